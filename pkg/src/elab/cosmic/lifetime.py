"""Muon lifetime study: trigger selection, decay histogram, exponential fit.

A stopping muon shows up as a coincidence across detector channels; its
decay electron is a second pulse on one of those channels within the gate.
The distribution of the time gaps follows N(t) = A exp(-t/tau) + B, and the
fit recovers tau with uncertainties from the weighted normal equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detector import Dataset, Pulse

HISTOGRAM_CAP_US = 20.0
DEFAULT_TRIGGER_WINDOW_NS = 100
DEFAULT_ENERGY_THRESHOLD_NS = 40


class LifetimeError(Exception):
    pass


class NoCandidates(LifetimeError):
    def __init__(self):
        super().__init__("no decay candidates inside the gate")


class NoSignal(LifetimeError):
    def __init__(self):
        super().__init__("all in-range histogram bins are empty")


class FitRangeError(LifetimeError):
    pass


@dataclass(frozen=True)
class LifetimeParams:
    coincidence_level: int = 2
    check_second_pulse_energy: bool = False
    gate_width_s: float = 1e-4
    bins: int = 60
    fit_min_us: float = 0.2
    fit_max_us: float = 20.0
    trigger_window_ns: int = DEFAULT_TRIGGER_WINDOW_NS
    energy_threshold_ns: int = DEFAULT_ENERGY_THRESHOLD_NS

    def __post_init__(self):
        if self.coincidence_level < 1:
            raise ValueError("coincidence_level must be >= 1")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.gate_width_s <= 0:
            raise ValueError("gate_width_s must be positive")
        if not (0 < self.fit_min_us < self.fit_max_us):
            raise ValueError("need 0 < fit_min_us < fit_max_us")
        if self.fit_max_us > self.gate_width_s * 1e6:
            raise ValueError("fit_max_us exceeds the gate width")
        if self.trigger_window_ns <= 0:
            raise ValueError("trigger_window_ns must be positive")

    @property
    def histogram_max_us(self) -> float:
        return min(self.gate_width_s * 1e6, HISTOGRAM_CAP_US)


@dataclass(frozen=True)
class Histogram:
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    unit: str = "us"

    def __post_init__(self):
        if len(self.bin_edges) != len(self.counts) + 1:
            raise ValueError("need len(bin_edges) == len(counts) + 1")

    @property
    def centers(self) -> tuple[float, ...]:
        e = self.bin_edges
        return tuple((e[i] + e[i + 1]) / 2.0 for i in range(len(self.counts)))


@dataclass(frozen=True)
class FitResult:
    A: float
    tau_us: float
    B: float
    sigma_A: float
    sigma_tau_us: float
    sigma_B: float
    chi2: float
    ndf: int
    n_candidates: int
    converged: bool


@dataclass(frozen=True)
class Trigger:
    t0_ns: int
    channels: frozenset[int]
    end_index: int  # first pulse index past the coincidence window


def find_triggers(pulses: tuple[Pulse, ...], level: int, window_ns: int) -> list[Trigger]:
    """Coincidences of >= level distinct channels within window_ns.

    The scan anchors a window at each pulse not already inside a trigger;
    pulses belonging to a trigger are consumed, so triggers never overlap.
    """
    triggers = []
    i, n = 0, len(pulses)
    while i < n:
        t0 = pulses[i].rise_ns
        j = i
        channels = set()
        while j < n and pulses[j].rise_ns - t0 <= window_ns:
            channels.add(pulses[j].channel)
            j += 1
        if len(channels) >= level:
            triggers.append(Trigger(t0, frozenset(channels), j))
            i = j
        else:
            i += 1
    return triggers


def collect_decay_gaps(
    pulses: tuple[Pulse, ...],
    *,
    coincidence_level: int,
    gate_width_s: float,
    check_energy: bool = False,
    trigger_window_ns: int = DEFAULT_TRIGGER_WINDOW_NS,
    energy_threshold_ns: int = DEFAULT_ENERGY_THRESHOLD_NS,
) -> list[float]:
    """Decay-candidate time gaps in microseconds, one per qualifying trigger.

    The candidate is the earliest pulse after the trigger group on one of
    the triggered channels with 0 < dt <= gate; with the energy check on,
    pulses narrower than the threshold are passed over.
    """
    gate_ns = gate_width_s * 1e9
    out: list[float] = []
    for trig in find_triggers(pulses, coincidence_level, trigger_window_ns):
        for k in range(trig.end_index, len(pulses)):
            dt_ns = pulses[k].rise_ns - trig.t0_ns
            if dt_ns > gate_ns:
                break
            if pulses[k].channel not in trig.channels or dt_ns <= 0:
                continue
            if check_energy and pulses[k].width_ns < energy_threshold_ns:
                continue
            out.append(dt_ns / 1000.0)
            break
    return out


def select_decays(ds: Dataset, p: LifetimeParams) -> list[float]:
    return collect_decay_gaps(
        ds.pulses,
        coincidence_level=p.coincidence_level,
        gate_width_s=p.gate_width_s,
        check_energy=p.check_second_pulse_energy,
        trigger_window_ns=p.trigger_window_ns,
        energy_threshold_ns=p.energy_threshold_ns,
    )


def make_histogram(values_us: list[float], bins: int, t_min: float, t_max: float) -> Histogram:
    """Uniform histogram over (t_min, t_max]; out-of-range values dropped."""
    if bins < 1 or not t_max > t_min:
        raise ValueError("bad histogram range")
    width = (t_max - t_min) / bins
    edges = tuple(t_min + i * width for i in range(bins + 1))
    counts = [0] * bins
    for v in values_us:
        if not (t_min < v <= t_max):
            continue
        idx = min(int(math.ceil((v - t_min) / width)) - 1, bins - 1)
        counts[max(idx, 0)] += 1
    return Histogram(bin_edges=edges, counts=tuple(counts))


def _in_range(h: Histogram, fit_min_us: float, fit_max_us: float):
    centers = h.centers
    idx = [i for i, c in enumerate(centers) if fit_min_us <= c <= fit_max_us]
    return idx, centers


def fit_exponential(h: Histogram, fit_min_us: float, fit_max_us: float) -> FitResult:
    """Weighted least-squares fit of A exp(-t/tau) + B to in-range bins.

    Weights are 1/max(count, 1), the Poisson approximation with empty bins
    capped. Minimization is damped Gauss-Newton; a step is accepted only if
    it lowers the objective and keeps tau positive, otherwise the damping
    grows and the step is retried. Initialization needs no user guesses:
    the background from the last tenth of the range, the amplitude from the
    first bin, tau from the log slope between the first and middle bins.
    """
    idx, centers = _in_range(h, fit_min_us, fit_max_us)
    if len(idx) < 4:
        raise FitRangeError(f"only {len(idx)} bins inside the fit range, need at least 4")
    t = np.array([centers[i] for i in idx], dtype=float)
    y = np.array([h.counts[i] for i in idx], dtype=float)
    if not np.any(y > 0):
        raise NoSignal()
    w = 1.0 / np.maximum(y, 1.0)
    n_tail = max(1, len(idx) // 10)
    b0 = float(np.mean(y[-n_tail:]))
    a0 = max(float(y[0]) - b0, 1.0)
    mid = len(idx) // 2
    log_drop = math.log(max(float(y[0]) - b0, 1.0) / max(float(y[mid]) - b0, 1.0))
    tau0 = (t[mid] - t[0]) / log_drop if log_drop > 0 else float(t[mid] - t[0])
    theta = np.array([a0, max(tau0, 1e-3), b0], dtype=float)

    def model(par):
        return par[0] * np.exp(-t / par[1]) + par[2]

    def objective(par):
        r = y - model(par)
        return float(np.sum(w * r * r))

    s = objective(theta)
    lam = 1e-3
    converged = False
    for _ in range(200):
        decay = np.exp(-t / theta[1])
        jac = np.column_stack([decay, theta[0] * t * decay / theta[1] ** 2, np.ones_like(t)])
        residual = y - model(theta)
        jtw = jac.T * w
        normal = jtw @ jac
        gradient = jtw @ residual
        step = None
        for _ in range(40):
            try:
                step = np.linalg.solve(normal + lam * np.eye(3), gradient)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            candidate = theta + step
            if candidate[1] <= 0 or not np.all(np.isfinite(candidate)):
                lam *= 10.0
                continue
            s_new = objective(candidate)
            if s_new <= s:
                break
            lam *= 10.0
        else:
            step = None
        if step is None:
            break
        rel = float(np.max(np.abs(step) / np.maximum(np.abs(theta), 1e-12)))
        theta = theta + step
        s = objective(theta)
        lam = max(lam / 10.0, 1e-12)
        if rel < 1e-8:
            converged = True
            break
    decay = np.exp(-t / theta[1])
    jac = np.column_stack([decay, theta[0] * t * decay / theta[1] ** 2, np.ones_like(t)])
    normal = (jac.T * w) @ jac
    try:
        covariance = np.linalg.inv(normal)
        sigmas = np.sqrt(np.maximum(np.diag(covariance), 0.0))
    except np.linalg.LinAlgError:
        sigmas = np.array([float("nan")] * 3)
        converged = False
    return FitResult(
        A=float(theta[0]),
        tau_us=float(theta[1]),
        B=float(theta[2]),
        sigma_A=float(sigmas[0]),
        sigma_tau_us=float(sigmas[1]),
        sigma_B=float(sigmas[2]),
        chi2=s,
        ndf=len(idx) - 3,
        n_candidates=int(sum(h.counts)),
        converged=bool(converged and theta[1] > 0 and sigmas[1] > 0),
    )


def lifetime_study(ds: Dataset, p: LifetimeParams) -> tuple[Histogram, FitResult]:
    """The full study: select decays, histogram them, fit the exponential."""
    values = select_decays(ds, p)
    if not values:
        raise NoCandidates()
    hist = make_histogram(values, p.bins, 0.0, p.histogram_max_us)
    fit = fit_exponential(hist, p.fit_min_us, p.fit_max_us)
    return hist, fit
