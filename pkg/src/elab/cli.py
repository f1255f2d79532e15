"""Command line front door: synthesize data, run the studies, start the portal.

Each study command writes its delimited results and the deterministic SVG
into --out; --report additionally renders a matplotlib PNG there.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from .cosmic.detector import DetectorDataError, parse_detector_text
from .cosmic.flux import FluxError, flux_study
from .cosmic.lifetime import LifetimeError, LifetimeParams, lifetime_study
from .cosmic.shower import ShowerError, shower_search
from .cosmic.svgplot import render_lifetime_plot, render_series_plot
from .cosmic.synthetic import InvalidSpec, SyntheticSpec, detector_specs, write_files
from .cosmic.transforms import fit_to_json, groups_to_json, series_to_tsv


def _read_dataset(path: Path):
    try:
        return parse_detector_text(path.read_text(encoding="utf-8"))
    except DetectorDataError as exc:
        raise click.ClickException(f"{path}: {exc}")


def _out_dir(out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
def main():
    """Cosmic-ray e-lab: synthetic data, studies, and the collaboration portal."""


@main.command()
@click.option("--out", type=click.Path(path_type=Path), default=Path("synthetic"), show_default=True)
@click.option("--detectors", type=int, default=1, show_default=True)
@click.option("--duration-s", type=float, default=600.0, show_default=True)
@click.option("--trigger-rate-hz", type=float, default=3.0, show_default=True)
@click.option("--decay-fraction", type=float, default=0.1, show_default=True)
@click.option("--tau-us", type=float, default=2.2, show_default=True)
@click.option("--background-rate-hz", type=float, default=0.0, show_default=True)
@click.option("--showers", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def generate(out, detectors, duration_s, trigger_rate_hz, decay_fraction, tau_us,
             background_rate_hz, showers, seed):
    """Write synthetic detector files plus a ground-truth sidecar."""
    try:
        spec = SyntheticSpec(
            detectors=detector_specs(detectors),
            duration_s=duration_s,
            trigger_rate_hz=trigger_rate_hz,
            decay_fraction=decay_fraction,
            tau_us=tau_us,
            background_rate_hz=background_rate_hz,
            planted_showers=showers,
            seed=seed,
        )
    except InvalidSpec as exc:
        raise click.ClickException(str(exc))
    for name, path in sorted(write_files(spec, _out_dir(out)).items()):
        click.echo(f"{name}\t{path}")


@main.command()
@click.argument("data_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=Path("lifetime-out"), show_default=True)
@click.option("--coincidence-level", type=int, default=2, show_default=True)
@click.option("--check-energy/--no-check-energy", default=False, show_default=True)
@click.option("--gate-width-s", type=float, default=1e-4, show_default=True)
@click.option("--trigger-window-ns", type=int, default=100, show_default=True)
@click.option("--energy-threshold-ns", type=int, default=40, show_default=True)
@click.option("--bins", type=int, default=60, show_default=True)
@click.option("--fit-min-us", type=float, default=0.2, show_default=True)
@click.option("--fit-max-us", type=float, default=20.0, show_default=True)
@click.option("--title", default="Muon lifetime", show_default=True)
@click.option("--report/--no-report", default=False, help="Also render a matplotlib PNG.")
def lifetime(data_file, out, coincidence_level, check_energy, gate_width_s,
             trigger_window_ns, energy_threshold_ns, bins, fit_min_us, fit_max_us,
             title, report):
    """Muon lifetime study: histogram.tsv, fit.json, lifetime.svg."""
    ds = _read_dataset(data_file)
    try:
        params = LifetimeParams(
            coincidence_level=coincidence_level,
            check_second_pulse_energy=check_energy,
            gate_width_s=gate_width_s,
            trigger_window_ns=trigger_window_ns,
            energy_threshold_ns=energy_threshold_ns,
            bins=bins,
            fit_min_us=fit_min_us,
            fit_max_us=fit_max_us,
        )
        hist, fit = lifetime_study(ds, params)
    except (LifetimeError, ValueError) as exc:
        raise click.ClickException(str(exc))
    out = _out_dir(out)
    lines = ["bin_lo_us\tbin_hi_us\tcount"]
    for i, count in enumerate(hist.counts):
        lines.append(f"{hist.bin_edges[i]!r}\t{hist.bin_edges[i + 1]!r}\t{count}")
    (out / "histogram.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "fit.json").write_text(fit_to_json(fit), encoding="utf-8")
    (out / "lifetime.svg").write_bytes(
        render_lifetime_plot(hist, fit, title, fit_min_us=fit_min_us, fit_max_us=fit_max_us)
    )
    if report:
        from .cosmic.figures import lifetime_figure, save_figure

        save_figure(lifetime_figure(hist, fit, title), out / "lifetime.png")
    click.echo(f"candidates\t{fit.n_candidates}")
    click.echo(f"tau_us\t{fit.tau_us!r}")
    click.echo(f"sigma_tau_us\t{fit.sigma_tau_us!r}")
    click.echo(f"chi2_ndf\t{fit.chi2!r}/{fit.ndf}")
    click.echo(f"converged\t{str(fit.converged).lower()}")


@main.command()
@click.argument("data_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=Path("flux-out"), show_default=True)
@click.option("--bin-width-s", type=float, default=60.0, show_default=True)
@click.option("--coincidence-level", type=int, default=1, show_default=True)
@click.option("--title", default="Flux", show_default=True)
@click.option("--report/--no-report", default=False, help="Also render a matplotlib PNG.")
def flux(data_file, out, bin_width_s, coincidence_level, title, report):
    """Flux study: series.tsv and flux.svg."""
    ds = _read_dataset(data_file)
    try:
        points = flux_study(ds, bin_width_s=bin_width_s, coincidence_level=coincidence_level)
    except (FluxError, ValueError) as exc:
        raise click.ClickException(str(exc))
    out = _out_dir(out)
    (out / "series.tsv").write_text(series_to_tsv(points), encoding="utf-8")
    (out / "flux.svg").write_bytes(render_series_plot(points, title, x_width=bin_width_s))
    if report:
        from .cosmic.figures import flux_figure, save_figure

        save_figure(flux_figure(points, title), out / "flux.png")
    mean = sum(p.rate_hz for p in points) / len(points)
    click.echo(f"bins\t{len(points)}")
    click.echo(f"mean_rate_hz\t{mean!r}")


@main.command()
@click.argument("data_files", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=Path("shower-out"), show_default=True)
@click.option("--window-s", type=float, default=1e-5, show_default=True)
@click.option("--min-detectors", type=int, default=2, show_default=True)
@click.option("--report/--no-report", default=False, help="Also render a matplotlib PNG.")
def shower(data_files, out, window_s, min_detectors, report):
    """Cross-detector coincidence search: groups.json and groups.tsv."""
    datasets = [_read_dataset(p) for p in data_files]
    try:
        groups = shower_search(datasets, window_s=window_s, min_detectors=min_detectors)
    except (ShowerError, ValueError) as exc:
        raise click.ClickException(str(exc))
    out = _out_dir(out)
    (out / "groups.json").write_text(
        groups_to_json(groups, window_s, min_detectors), encoding="utf-8"
    )
    lines = ["start_ns\tspread_ns\tn_detectors\tdetectors\tn_pulses"]
    for g in groups:
        lines.append(
            f"{g.start_ns}\t{g.spread_ns}\t{len(g.detectors)}\t"
            f"{','.join(g.detectors)}\t{len(g.pulses)}"
        )
    (out / "groups.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if report:
        from .cosmic.figures import save_figure, shower_figure

        save_figure(shower_figure(groups), out / "shower.png")
    click.echo(f"groups\t{len(groups)}")


@main.command()
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="JSON config: port, storage_root, page_size, workers, "
                   "static_root, milestones.")
def serve(config_path):
    """Run the collaboration portal."""
    from .service import serve as run_service

    run_service(str(config_path) if config_path else None)


@main.command()
@click.argument("data_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def inspect(data_file):
    """Validate a detector file and print its summary metadata."""
    ds = _read_dataset(data_file)
    span = ds.span_ns / 1e9 if ds.pulses else 0.0
    click.echo(f"detector\t{ds.detector_id}")
    click.echo(f"school\t{ds.school}")
    click.echo(f"city\t{ds.city}")
    click.echo(f"state\t{ds.state}")
    click.echo(f"pulses\t{len(ds.pulses)}")
    click.echo(f"span_seconds\t{span!r}")


if __name__ == "__main__":
    main()
