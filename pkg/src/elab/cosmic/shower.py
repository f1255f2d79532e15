"""Cross-detector coincidence search for air-shower candidates.

All pulses from the participating detectors are merged into one
time-ordered stream; a window slides across it and every maximal group
spanning enough distinct detectors is reported. Maximal means no reported
group is a subset of another: the window anchored at pulse i covers the
same pulses as the window at i-1 whenever their reach coincides, and such
duplicates are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

from .detector import Dataset, Pulse


class ShowerError(Exception):
    pass


class NeedTwoDatasets(ShowerError):
    def __init__(self):
        super().__init__("shower search needs at least two datasets")


@dataclass(frozen=True)
class TaggedPulse:
    detector_id: str
    pulse: Pulse

    @property
    def rise_ns(self) -> int:
        return self.pulse.rise_ns


@dataclass(frozen=True)
class CoincidenceGroup:
    pulses: tuple[TaggedPulse, ...]
    detectors: tuple[str, ...]  # distinct, sorted
    start_ns: int
    spread_ns: int

    @property
    def end_ns(self) -> int:
        return self.start_ns + self.spread_ns


def merge_streams(datasets: list[Dataset]) -> list[TaggedPulse]:
    merged = [TaggedPulse(ds.detector_id, p) for ds in datasets for p in ds.pulses]
    merged.sort(key=lambda tp: (tp.pulse.rise_ns, tp.detector_id, tp.pulse.channel, tp.pulse.fall_ns))
    return merged


def _group(window: list[TaggedPulse]) -> CoincidenceGroup:
    detectors = tuple(sorted({tp.detector_id for tp in window}))
    return CoincidenceGroup(
        pulses=tuple(window),
        detectors=detectors,
        start_ns=window[0].rise_ns,
        spread_ns=window[-1].rise_ns - window[0].rise_ns,
    )


def shower_search(datasets: list[Dataset], window_s: float, min_detectors: int = 2) -> list[CoincidenceGroup]:
    if len(datasets) < 2:
        raise NeedTwoDatasets()
    if window_s <= 0:
        raise ShowerError("window_s must be positive")
    if min_detectors < 2:
        raise ShowerError("min_detectors must be >= 2")
    window_ns = int(round(window_s * 1e9))
    merged = merge_streams(datasets)
    n = len(merged)
    groups: list[CoincidenceGroup] = []
    reach = 0
    previous_reach = -1
    for i in range(n):
        if reach < i:
            reach = i
        while reach < n and merged[reach].rise_ns - merged[i].rise_ns <= window_ns:
            reach += 1
        if reach == previous_reach:
            continue  # same pulses as the previous anchor, minus the front
        window = merged[i:reach]
        if len({tp.detector_id for tp in window}) >= min_detectors:
            groups.append(_group(window))
            previous_reach = reach
    return groups
