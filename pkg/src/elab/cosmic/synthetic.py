"""Seeded synthetic detector data with a ground-truth sidecar.

The generator draws muon triggers as a Poisson process, emits each trigger
as a two-channel coincident pulse pair, attaches an exponentially
distributed decay pulse to a configurable fraction of triggers, overlays
uniform single-pulse background, and can plant cross-detector shower
groups. Everything is driven by one integer seed, so the same spec always
produces byte-identical files.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .detector import Dataset, Pulse, format_detector_text

# 2003-08-19T00:00:00Z, around when school detectors started uploading
DEFAULT_START_NS = 1_061_251_200 * 10**9

_WIDTH_LO = 50
_WIDTH_HI = 300


class InvalidSpec(Exception):
    pass


@dataclass(frozen=True)
class DetectorSpec:
    detector_id: str
    school: str = "Fermilab"
    city: str = "Batavia"
    state: str = "IL"
    latitude: float = 41.85
    longitude: float = -88.31
    altitude_m: float = 225.0


def detector_specs(n: int) -> tuple[DetectorSpec, ...]:
    """n distinct detectors with slightly separated sites."""
    return tuple(
        DetectorSpec(
            detector_id=f"det{i + 1:02d}",
            school=f"School{i + 1:02d}",
            latitude=41.85 + 0.01 * i,
            longitude=-88.31 - 0.01 * i,
        )
        for i in range(n)
    )


@dataclass(frozen=True)
class SyntheticSpec:
    detectors: tuple[DetectorSpec, ...]
    duration_s: float
    trigger_rate_hz: float = 1.0
    decay_fraction: float = 0.0
    tau_us: float = 2.2
    background_rate_hz: float = 0.0
    planted_showers: int = 0
    shower_spread_ns: int = 2000
    seed: int = 0
    start_ns: int = DEFAULT_START_NS

    def __post_init__(self):
        if not self.detectors:
            raise InvalidSpec("need at least one detector")
        if self.duration_s < 0:
            raise InvalidSpec("duration_s must be >= 0")
        if self.trigger_rate_hz < 0 or self.background_rate_hz < 0:
            raise InvalidSpec("rates must be >= 0")
        if not 0 <= self.decay_fraction <= 1:
            raise InvalidSpec("decay_fraction must be in [0, 1]")
        if self.tau_us <= 0:
            raise InvalidSpec("tau_us must be positive")
        if self.planted_showers < 0:
            raise InvalidSpec("planted_showers must be >= 0")
        if self.shower_spread_ns < 0:
            raise InvalidSpec("shower_spread_ns must be >= 0")
        ids = [d.detector_id for d in self.detectors]
        if len(set(ids)) != len(ids):
            raise InvalidSpec("detector ids must be unique")


@dataclass(frozen=True)
class PlantedShower:
    t_ns: int
    hits: tuple[tuple[str, int], ...]  # (detector_id, rise_ns)


@dataclass(frozen=True)
class DetectorTruth:
    detector_id: str
    n_triggers: int
    n_decays: int
    n_background: int
    decay_dts_us: tuple[float, ...]


@dataclass(frozen=True)
class GroundTruth:
    per_detector: dict[str, DetectorTruth]
    planted: tuple[PlantedShower, ...]

    @property
    def total_triggers(self) -> int:
        return sum(t.n_triggers for t in self.per_detector.values())

    @property
    def total_decays(self) -> int:
        return sum(t.n_decays for t in self.per_detector.values())


def _poisson_times(rng: random.Random, rate_hz: float, duration_s: float):
    t = 0.0
    while rate_hz > 0:
        t += rng.expovariate(rate_hz)
        if t >= duration_s:
            return
        yield t


def generate_synthetic(spec: SyntheticSpec) -> tuple[list[Dataset], GroundTruth]:
    raw_events: dict[str, list[tuple[int, int, int]]] = {
        d.detector_id: [] for d in spec.detectors
    }
    truths: dict[str, DetectorTruth] = {}
    for d in spec.detectors:
        rng = random.Random(f"{spec.seed}:{d.detector_id}")
        events = raw_events[d.detector_id]
        n_triggers = n_decays = n_background = 0
        decay_dts: list[float] = []
        for t_s in _poisson_times(rng, spec.trigger_rate_hz, spec.duration_s):
            base = spec.start_ns + int(t_s * 1e9)
            ch_a, ch_b = rng.sample((1, 2, 3, 4), 2)
            events.append((base, ch_a, rng.randint(_WIDTH_LO, _WIDTH_HI)))
            events.append((base + rng.randint(0, 60), ch_b, rng.randint(_WIDTH_LO, _WIDTH_HI)))
            n_triggers += 1
            if rng.random() < spec.decay_fraction:
                dt_us = rng.expovariate(1.0 / spec.tau_us)
                rise = base + int(round(dt_us * 1000.0))
                events.append((rise, rng.choice((ch_a, ch_b)), rng.randint(_WIDTH_LO, _WIDTH_HI)))
                decay_dts.append(dt_us)
                n_decays += 1
        for t_s in _poisson_times(rng, spec.background_rate_hz, spec.duration_s):
            rise = spec.start_ns + int(t_s * 1e9)
            events.append((rise, rng.choice((1, 2, 3, 4)), rng.randint(_WIDTH_LO, _WIDTH_HI)))
            n_background += 1
        truths[d.detector_id] = DetectorTruth(
            d.detector_id, n_triggers, n_decays, n_background, tuple(decay_dts)
        )
    planted: list[PlantedShower] = []
    if spec.planted_showers and spec.duration_s > 0:
        shower_rng = random.Random(f"{spec.seed}:showers")
        for _ in range(spec.planted_showers):
            t_ns = spec.start_ns + int(shower_rng.uniform(0, spec.duration_s) * 1e9)
            hits = []
            for d in spec.detectors:
                rise = t_ns + shower_rng.randint(0, spec.shower_spread_ns)
                raw_events[d.detector_id].append(
                    (rise, shower_rng.choice((1, 2, 3, 4)), shower_rng.randint(_WIDTH_LO, _WIDTH_HI))
                )
                hits.append((d.detector_id, rise))
            planted.append(PlantedShower(t_ns, tuple(hits)))
        planted.sort(key=lambda s: s.t_ns)
    datasets = []
    for d in spec.detectors:
        datasets.append(_build_dataset(d, raw_events[d.detector_id]))
    return datasets, GroundTruth(per_detector=truths, planted=tuple(planted))


def _build_dataset(d: DetectorSpec, events: list[tuple[int, int, int]]) -> Dataset:
    # enforce strictly increasing per-channel rise times by nudging collisions
    events = sorted(events)
    last: dict[int, int] = {}
    pulses = []
    for rise, channel, width in events:
        prev = last.get(channel)
        if prev is not None and rise <= prev:
            rise = prev + 1
        last[channel] = rise
        pulses.append(Pulse(rise, rise + width, channel))
    pulses.sort()
    return Dataset(
        detector_id=d.detector_id,
        school=d.school,
        city=d.city,
        state=d.state,
        latitude=d.latitude,
        longitude=d.longitude,
        altitude_m=d.altitude_m,
        pulses=tuple(pulses),
    )


def ground_truth_json(spec: SyntheticSpec, truth: GroundTruth) -> str:
    doc = {
        "spec": {
            "duration_s": spec.duration_s,
            "trigger_rate_hz": spec.trigger_rate_hz,
            "decay_fraction": spec.decay_fraction,
            "tau_us": spec.tau_us,
            "background_rate_hz": spec.background_rate_hz,
            "planted_showers": spec.planted_showers,
            "seed": spec.seed,
        },
        "detectors": {
            det_id: {
                "n_triggers": t.n_triggers,
                "n_decays": t.n_decays,
                "n_background": t.n_background,
                "decay_dts_us": list(t.decay_dts_us),
            }
            for det_id, t in sorted(truth.per_detector.items())
        },
        "planted": [
            {"t_ns": s.t_ns, "hits": [[d, r] for d, r in s.hits]} for s in truth.planted
        ],
    }
    return json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def write_files(spec: SyntheticSpec, out_dir: Path) -> dict[str, Path]:
    """Write one .data file per detector plus the ground-truth sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    datasets, truth = generate_synthetic(spec)
    paths: dict[str, Path] = {}
    for ds in datasets:
        path = out_dir / f"{ds.detector_id}.data"
        path.write_text(format_detector_text(ds), encoding="utf-8")
        paths[ds.detector_id] = path
    sidecar = out_dir / "ground_truth.json"
    sidecar.write_text(ground_truth_json(spec, truth), encoding="utf-8")
    paths["ground_truth"] = sidecar
    return paths
