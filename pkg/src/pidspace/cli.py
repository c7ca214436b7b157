"""Command-line front end: batch runs, file export and the HTTP service.

Commands: discretize, region, analyze, simulate, serve, export.
Exit codes: 0 success, 2 configuration/schema problem, 3 numeric failure,
4 violated precondition.  Set PIDSPACE_THREADS to bound region-map
parallelism.  CSV column layouts: boundary curves are
(kind, x, y, theta, theta_l); feasible-cell exports are (x, y) cell
centers; simulations are (time, reference, output, error, control).
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import load_project_config
from .errors import ConfigError, NumericsError, PreconditionError
from .project import Project, RegionOverrides, canonical_json
from .region import RegionMap, SweepResult, sweep_axis
from .tfcore import c2d_zoh, poly_roots

EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_PRECONDITION = 4


def _handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except PreconditionError as exc:
            click.echo(f"precondition violated: {exc}", err=True)
            sys.exit(EXIT_PRECONDITION)
        except NumericsError as exc:
            click.echo(f"numeric failure: {exc}", err=True)
            sys.exit(EXIT_NUMERICS)
        except ValueError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)

    return wrapper


def _write_bytes(path: str | None, payload: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.write(b"\n")
    else:
        Path(path).write_bytes(payload)
        click.echo(f"wrote {path}", err=True)


config_option = click.option(
    "--config", "-c", "config_path", required=True, type=click.Path(exists=True, dir_okay=False),
    help="Project JSON document.",
)


@click.group()
def main():
    """Digital PID gain-space design toolkit."""


@main.command()
@config_option
@click.option("--out", "-o", type=click.Path(dir_okay=False), default=None, help="Output transfer-function JSON.")
@_handle_errors
def discretize(config_path, out):
    """Discretize the project plant with the zero-order hold."""
    config = load_project_config(config_path)
    plant = config.plant.build()
    if plant.is_discrete:
        discrete = plant
        click.echo("plant is already discrete; echoing it unchanged", err=True)
    else:
        discrete = c2d_zoh(plant, config.sample_time)
        click.echo("pole mapping (s -> z = exp(sT)):", err=True)
        s_poles = poly_roots(plant.den) if plant.den.degree else []
        z_poles = poly_roots(discrete.den) if discrete.den.degree else []
        for sp in sorted(s_poles, key=lambda p: (p.real, p.imag)):
            target = np.exp(sp * config.sample_time)
            match = min(z_poles, key=lambda zp: abs(zp - target))
            click.echo(f"  {sp:+.6f}  ->  {match:+.6f}", err=True)
    _write_bytes(out, canonical_json(discrete.to_dict()))


def _parse_sweep(spec: str) -> tuple[str, list[float]]:
    axis, _, rest = spec.partition(":")
    axis = {"T": "sample_time", "sample_time": "sample_time"}.get(axis, axis)
    if axis not in ("sample_time", "kp", "ki", "kd"):
        raise ConfigError("sweep spec must look like 'sample_time:0.01,0.05' or 'ki:0,0.1'")
    try:
        values = [float(v) for v in rest.split(",") if v != ""]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values: {exc}") from exc
    if not values:
        raise ConfigError("sweep spec has no values")
    return axis, values


@main.command()
@config_option
@click.option("--out", "-o", type=click.Path(dir_okay=False), default=None, help="Region map JSON (default stdout).")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="Render the map to SVG.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Feasible cell centers CSV.")
@click.option("--sweep", default=None, help="Third-axis sweep, e.g. 'sample_time:0.01,0.05' or 'ki:0,0.01'.")
@click.option("--export-all", is_flag=True,
              help="Also write map JSON, SVG and CSV under the config's output directory.")
@_handle_errors
def region(config_path, out, svg, csv_path, sweep, export_all):
    """Compute the multi-objective region map (optionally swept)."""
    config = load_project_config(config_path)
    project = Project(config)
    if export_all:
        base = Path(config.outputs.directory)
        base.mkdir(parents=True, exist_ok=True)
        stem = base / f"{config.outputs.basename}.region"
        out = out or f"{stem}.json"
        svg = svg or f"{stem}.svg"
        csv_path = csv_path or f"{stem}.csv"
    if sweep:
        axis, values = _parse_sweep(sweep)
        default = project.region_map()
        if axis == "sample_time":
            result = sweep_axis(project.setup, "sample_time", values, project.plane,
                                default.x_range, default.y_range, nx=default.nx, ny=default.ny)
        else:
            if axis != project.plane.fixed_axis:
                raise ConfigError(f"sweep gain {axis!r} is not the plane's fixed gain {project.plane.fixed_axis!r}")
            result = sweep_axis(project.setup, "third_gain", values, project.plane,
                                default.x_range, default.y_range, nx=default.nx, ny=default.ny)
        for index, message in result.failures:
            click.echo(f"warning: slice {axis}={values[index]:g} failed: {message}", err=True)
        _write_bytes(out, canonical_json(result.to_dict()))
        return
    m = project.region_map()
    for warning in m.metadata["warnings"]:
        click.echo(f"warning: {warning}", err=True)
    if m.metadata["feasible_cells"] == 0:
        click.echo("empty region: no cell satisfies all active constraints", err=True)
    _write_bytes(out, project.region_bytes(m))
    if svg:
        from . import plots

        plots.region_svg(m, svg)
        click.echo(f"wrote {svg}", err=True)
    if csv_path:
        _write_csv(csv_path, m.csv_rows())


def _write_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    click.echo(f"wrote {path}", err=True)


@main.command()
@config_option
@click.argument("kp", type=float)
@click.argument("ki", type=float)
@click.argument("kd", type=float)
@click.option("--out", "-o", type=click.Path(dir_okay=False), default=None, help="Report JSON (default stdout).")
@click.option("--simulate", "sim_spec", nargs=2, type=(click.Choice(["step", "ramp"]), int), default=None,
              help="Append a closed-loop simulation, e.g. --simulate step 3000.")
@click.option("--force", is_flag=True, help="Simulate even if the loop is unstable.")
@click.option("--svg-dir", type=click.Path(file_okay=False), default=None,
              help="Write bode/rp/response SVG figures into this directory.")
@_handle_errors
def analyze(config_path, kp, ki, kd, out, sim_spec, force, svg_dir):
    """Run the verification oracle on one gain point."""
    project = Project(load_project_config(config_path))
    report = project.analyze(kp, ki, kd)
    payload = report.to_dict()
    sim = None
    if sim_spec:
        ref, n = sim_spec
        sim = project.simulate(kp, ki, kd, ref, n, force=force)
        payload["simulation"] = sim.to_dict()
    _write_bytes(out, canonical_json(payload))
    for name, flag in report.flags.items():
        click.echo(f"{name}: {'ok' if flag['satisfied'] else 'VIOLATED'} ({flag['reason']})", err=True)
    if svg_dir:
        from . import plots

        base = Path(svg_dir)
        base.mkdir(parents=True, exist_ok=True)
        plots.bode_svg(report, base / "bode.svg")
        if report.frequency_response and report.frequency_response.get("rp_value"):
            plots.robust_performance_svg(report, base / "robust_performance.svg")
        if sim is not None:
            plots.step_response_svg(sim, base / "response.svg")
        click.echo(f"wrote figures under {svg_dir}", err=True)


@main.command()
@config_option
@click.argument("kp", type=float)
@click.argument("ki", type=float)
@click.argument("kd", type=float)
@click.option("--ref", type=click.Choice(["step", "ramp"]), default="step", show_default=True)
@click.option("--steps", "-n", type=int, default=1000, show_default=True)
@click.option("--force", is_flag=True, help="Simulate even if the loop is unstable.")
@click.option("--out", "-o", type=click.Path(dir_okay=False), default=None, help="SimResult JSON (default stdout).")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="SimResult CSV.")
@_handle_errors
def simulate(config_path, kp, ki, kd, ref, steps, force, out, csv_path):
    """Simulate the closed loop for one gain point."""
    project = Project(load_project_config(config_path))
    sim = project.simulate(kp, ki, kd, ref, steps, force=force)
    for warning in sim.warnings:
        click.echo(f"warning: {warning}", err=True)
    _write_bytes(out, canonical_json(sim.to_dict()))
    if csv_path:
        _write_csv(csv_path, sim.csv_rows())


@main.command()
@config_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8710, show_default=True, type=int)
@_handle_errors
def serve(config_path, host, port):
    """Serve the JSON API (and the explorer bundle, when built)."""
    import uvicorn

    from .service import create_app, default_static_dir

    project = Project(load_project_config(config_path))
    app = create_app(project, static_dir=default_static_dir())
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command()
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Region map JSON produced by the region command.")
@click.option("--sim", "sim_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="SimResult JSON produced by the simulate command.")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="SVG output path.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="CSV output path.")
@click.option("--boundaries-csv", type=click.Path(dir_okay=False), default=None,
              help="Boundary points CSV (kind, x, y, theta, theta_l), one row per point.")
@_handle_errors
def export(map_path, sim_path, svg, csv_path, boundaries_csv):
    """Convert previously computed artifacts to SVG or CSV."""
    if (map_path is None) == (sim_path is None):
        raise ConfigError("export needs exactly one of --map or --sim")
    if map_path:
        m = RegionMap.from_dict(json.loads(Path(map_path).read_text()))
        if svg:
            from . import plots

            plots.region_svg(m, svg)
            click.echo(f"wrote {svg}", err=True)
        if csv_path:
            _write_csv(csv_path, m.csv_rows())
        if boundaries_csv:
            header = [["kind", "x", "y", "theta", "theta_l"]]
            _write_csv(boundaries_csv, header + [row for c in m.boundaries for row in c.csv_rows()])
        return
    from .analyzer import SimResult

    raw = json.loads(Path(sim_path).read_text())
    sim = SimResult(
        np.asarray(raw["time"]), np.asarray(raw["reference"]), np.asarray(raw["output"]),
        np.asarray(raw["error"]), np.asarray(raw["control"]), raw["sample_time"], raw.get("warnings", []),
    )
    if svg:
        from . import plots

        plots.step_response_svg(sim, svg)
        click.echo(f"wrote {svg}", err=True)
    if csv_path:
        _write_csv(csv_path, sim.csv_rows())


if __name__ == "__main__":
    main()
