"""The shipped transformations: recipe definitions plus implementations.

Definitions are written in the recipe language itself and parsed at import
time, so the same text could be loaded into any catalog. Implementations
are plain functions over a job context; intermediate products use small
line or JSON formats defined here so every stage is independently
inspectable and deterministic.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..executor import JobContext, TransformationRegistry
from ..vdl import Transformation, parse_vdl
from . import svgplot
from .detector import parse_detector_text
from .flux import FluxPoint, flux_study
from .lifetime import (
    FitResult,
    Histogram,
    collect_decay_gaps,
    fit_exponential,
    make_histogram,
)
from .shower import shower_search

STANDARD_VDL = """
# Recipes for the shipped studies. Version 1 throughout.

TR select_decays:1(
    input logical_file data,
    scalar integer coincidence_level = 2 @doc "distinct channels required for a muon trigger",
    scalar boolean check_energy = false @doc "drop second pulses below the width threshold",
    scalar float gate_width_s = 0.0001,
    scalar integer trigger_window_ns = 100,
    scalar integer energy_threshold_ns = 40,
    output logical_file candidates
) atomic "select_decays"

TR histogram:1(
    input logical_file values,
    scalar integer bins = 60,
    scalar float t_min = 0.0,
    scalar float t_max = 20.0,
    output logical_file counts
) atomic "histogram"

TR fit_decay:1(
    input logical_file hist,
    scalar float fit_min_us = 0.2,
    scalar float fit_max_us = 20.0,
    output logical_file fitres
) atomic "fit_decay"

TR render_lifetime_plot:1(
    input logical_file hist,
    input logical_file fitres,
    scalar string title = "Muon lifetime",
    scalar float fit_min_us = 0.2,
    scalar float fit_max_us = 20.0,
    output logical_file plot
) atomic "render_lifetime_plot"

TR lifetime_study:1(
    input logical_file data,
    scalar integer coincidence_level = 2,
    scalar boolean check_energy = false,
    scalar float gate_width_s = 0.0001,
    scalar integer trigger_window_ns = 100,
    scalar integer energy_threshold_ns = 40,
    scalar integer bins = 60,
    scalar float hist_max_us = 20.0 @doc "histogram upper edge, min(gate, 20 us)",
    scalar float fit_min_us = 0.2,
    scalar float fit_max_us = 20.0,
    scalar string title = "Muon lifetime",
    output logical_file hist,
    output logical_file fitres,
    output logical_file plot
) {
  select_decays(data = @data, coincidence_level = @coincidence_level,
                check_energy = @check_energy, gate_width_s = @gate_width_s,
                trigger_window_ns = @trigger_window_ns,
                energy_threshold_ns = @energy_threshold_ns, candidates = @cand);
  histogram(values = @cand, bins = @bins, t_min = 0.0, t_max = @hist_max_us,
            counts = @hist);
  fit_decay(hist = @hist, fit_min_us = @fit_min_us, fit_max_us = @fit_max_us,
            fitres = @fitres);
  render_lifetime_plot(hist = @hist, fitres = @fitres, title = @title,
                       fit_min_us = @fit_min_us, fit_max_us = @fit_max_us,
                       plot = @plot);
}

TR flux_series:1(
    input logical_file data,
    scalar float bin_width_s = 60.0,
    scalar integer coincidence_level = 1,
    output logical_file series
) atomic "flux_series"

TR render_flux_plot:1(
    input logical_file series,
    scalar string title = "Flux",
    output logical_file plot
) atomic "render_flux_plot"

TR flux_study:1(
    input logical_file data,
    scalar float bin_width_s = 60.0,
    scalar integer coincidence_level = 1,
    scalar string title = "Flux",
    output logical_file series,
    output logical_file plot
) {
  flux_series(data = @data, bin_width_s = @bin_width_s,
              coincidence_level = @coincidence_level, series = @series);
  render_flux_plot(series = @series, title = @title, plot = @plot);
}
"""


def standard_transformations() -> list[Transformation]:
    defs = parse_vdl(STANDARD_VDL)
    return [d for d in defs if isinstance(d, Transformation)]


def shower_transformation(n_inputs: int) -> Transformation:
    """A search recipe over exactly n datasets, built on demand."""
    if n_inputs < 2:
        raise ValueError("shower search needs at least two inputs")
    inputs = ",\n".join(f"    input logical_file data{i + 1}" for i in range(n_inputs))
    text = (
        f"TR shower_search{n_inputs}:1(\n{inputs},\n"
        '    scalar float window_s = 1e-05,\n'
        "    scalar integer min_detectors = 2,\n"
        "    output logical_file groups\n"
        ') atomic "shower_search"\n'
    )
    tr = parse_vdl(text)[0]
    assert isinstance(tr, Transformation)
    return tr


# ---------------------------------------------------------------------------
# Intermediate product formats


def write_candidates(path: Path, values_us: list[float]) -> None:
    path.write_text("".join(repr(v) + "\n" for v in values_us), encoding="utf-8")


def read_candidates(path: Path) -> list[float]:
    return [float(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def histogram_to_json(h: Histogram) -> str:
    doc = {"bin_edges": list(h.bin_edges), "counts": list(h.counts), "unit": h.unit}
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":")) + "\n"


def histogram_from_json(text: str) -> Histogram:
    doc = json.loads(text)
    return Histogram(
        bin_edges=tuple(doc["bin_edges"]), counts=tuple(doc["counts"]), unit=doc["unit"]
    )


def fit_to_json(f: FitResult) -> str:
    doc = {
        "A": f.A,
        "tau_us": f.tau_us,
        "B": f.B,
        "sigma_A": f.sigma_A,
        "sigma_tau_us": f.sigma_tau_us,
        "sigma_B": f.sigma_B,
        "chi2": f.chi2,
        "ndf": f.ndf,
        "n_candidates": f.n_candidates,
        "converged": f.converged,
    }
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":")) + "\n"


def fit_from_json(text: str) -> FitResult:
    return FitResult(**json.loads(text))


def series_to_tsv(points: list[FluxPoint]) -> str:
    lines = ["bin_start_s\trate_hz\terror_hz\tcount"]
    for p in points:
        lines.append(f"{p.bin_start_s!r}\t{p.rate_hz!r}\t{p.error_hz!r}\t{p.count}")
    return "\n".join(lines) + "\n"


def series_from_tsv(text: str) -> list[FluxPoint]:
    out = []
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        start, rate, err, count = line.split("\t")
        out.append(FluxPoint(float(start), float(rate), float(err), int(count)))
    return out


def groups_to_json(groups, window_s: float, min_detectors: int) -> str:
    doc = {
        "window_s": window_s,
        "min_detectors": min_detectors,
        "groups": [
            {
                "start_ns": g.start_ns,
                "spread_ns": g.spread_ns,
                "detectors": list(g.detectors),
                "pulses": [
                    [tp.detector_id, tp.pulse.channel, tp.pulse.rise_ns, tp.pulse.fall_ns]
                    for tp in g.pulses
                ],
            }
            for g in groups
        ],
    }
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":")) + "\n"


# ---------------------------------------------------------------------------
# Implementations


def _read_dataset(path: Path):
    return parse_detector_text(path.read_text(encoding="utf-8"))


def _exe_select_decays(ctx: JobContext) -> None:
    ds = _read_dataset(ctx.inputs[0])
    values = collect_decay_gaps(
        ds.pulses,
        coincidence_level=ctx.scalars["coincidence_level"],
        gate_width_s=ctx.scalars["gate_width_s"],
        check_energy=ctx.scalars["check_energy"],
        trigger_window_ns=ctx.scalars["trigger_window_ns"],
        energy_threshold_ns=ctx.scalars["energy_threshold_ns"],
    )
    write_candidates(ctx.outputs[0], values)


def _exe_histogram(ctx: JobContext) -> None:
    values = read_candidates(ctx.inputs[0])
    h = make_histogram(values, ctx.scalars["bins"], ctx.scalars["t_min"], ctx.scalars["t_max"])
    ctx.outputs[0].write_text(histogram_to_json(h), encoding="utf-8")


def _exe_fit_decay(ctx: JobContext) -> None:
    h = histogram_from_json(ctx.inputs[0].read_text(encoding="utf-8"))
    fit = fit_exponential(h, ctx.scalars["fit_min_us"], ctx.scalars["fit_max_us"])
    ctx.outputs[0].write_text(fit_to_json(fit), encoding="utf-8")


def _exe_render_lifetime_plot(ctx: JobContext) -> None:
    h = histogram_from_json(ctx.inputs[0].read_text(encoding="utf-8"))
    fit = fit_from_json(ctx.inputs[1].read_text(encoding="utf-8"))
    svg = svgplot.render_lifetime_plot(
        h,
        fit,
        title=ctx.scalars["title"],
        fit_min_us=ctx.scalars["fit_min_us"],
        fit_max_us=ctx.scalars["fit_max_us"],
    )
    ctx.outputs[0].write_bytes(svg)


def _exe_flux_series(ctx: JobContext) -> None:
    ds = _read_dataset(ctx.inputs[0])
    points = flux_study(ds, ctx.scalars["bin_width_s"], ctx.scalars["coincidence_level"])
    ctx.outputs[0].write_text(series_to_tsv(points), encoding="utf-8")


def _exe_render_flux_plot(ctx: JobContext) -> None:
    points = series_from_tsv(ctx.inputs[0].read_text(encoding="utf-8"))
    svg = svgplot.render_series_plot(points, title=ctx.scalars["title"])
    ctx.outputs[0].write_bytes(svg)


def _exe_shower_search(ctx: JobContext) -> None:
    datasets = [_read_dataset(p) for p in ctx.inputs]
    groups = shower_search(datasets, ctx.scalars["window_s"], ctx.scalars["min_detectors"])
    ctx.outputs[0].write_text(
        groups_to_json(groups, ctx.scalars["window_s"], ctx.scalars["min_detectors"]),
        encoding="utf-8",
    )


EXECUTABLES = {
    "select_decays": _exe_select_decays,
    "histogram": _exe_histogram,
    "fit_decay": _exe_fit_decay,
    "render_lifetime_plot": _exe_render_lifetime_plot,
    "flux_series": _exe_flux_series,
    "render_flux_plot": _exe_render_flux_plot,
    "shower_search": _exe_shower_search,
}


def register_standard(registry: TransformationRegistry) -> None:
    """Load every shipped recipe into the registry's catalog."""
    for tr in standard_transformations():
        registry.register(tr)


def ensure_shower_transformation(registry: TransformationRegistry, n_inputs: int) -> Transformation:
    tr = shower_transformation(n_inputs)
    if registry.get(tr.name, tr.version) is None:
        registry.register(tr)
    return tr
