"""Flux study: trigger rate over time with Poisson errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .detector import Dataset
from .lifetime import DEFAULT_TRIGGER_WINDOW_NS, find_triggers


class FluxError(Exception):
    pass


class EmptyDataset(FluxError):
    def __init__(self):
        super().__init__("dataset has no pulses")


@dataclass(frozen=True)
class FluxPoint:
    bin_start_s: float  # seconds from the first trigger
    rate_hz: float
    error_hz: float
    count: int


def flux_study(
    ds: Dataset,
    bin_width_s: float,
    coincidence_level: int = 1,
    trigger_window_ns: int = DEFAULT_TRIGGER_WINDOW_NS,
) -> list[FluxPoint]:
    """Trigger counts per time bin, rate = n/width, error = sqrt(n)/width.

    Level 1 counts every pulse; higher levels count channel coincidences
    the same way the lifetime study does. Bin starts are relative to the
    first trigger, and the last partial bin is kept (its rate still uses
    the full bin width, which understates the final point; callers wanting
    exact tails should choose a width dividing the span).
    """
    if bin_width_s <= 0:
        raise FluxError("bin_width_s must be positive")
    if not ds.pulses:
        raise EmptyDataset()
    if coincidence_level <= 1:
        times_ns = [p.rise_ns for p in ds.pulses]
    else:
        times_ns = [t.t0_ns for t in find_triggers(ds.pulses, coincidence_level, trigger_window_ns)]
    if not times_ns:
        return []
    start_ns = times_ns[0]
    width_ns = bin_width_s * 1e9
    n_bins = max(1, int(math.floor((times_ns[-1] - start_ns) / width_ns)) + 1)
    counts = [0] * n_bins
    for t in times_ns:
        idx = min(int((t - start_ns) / width_ns), n_bins - 1)
        counts[idx] += 1
    return [
        FluxPoint(
            bin_start_s=i * bin_width_s,
            rate_hz=c / bin_width_s,
            error_hz=math.sqrt(c) / bin_width_s,
            count=c,
        )
        for i, c in enumerate(counts)
    ]
