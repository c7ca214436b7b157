"""SVG figure rendering: region maps, Bode plots, robust performance, responses.

Everything the browser explorer shows can also be produced headlessly
here, so the full figure set is reproducible without any frontend.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.colors import ListedColormap
from matplotlib.lines import Line2D

from .analyzer import AnalysisReport, SimResult
from .region import BIT_STABLE, RegionMap

_BOUNDARY_COLORS = {
    "CRB": "#d62728",
    "RRB_z_plus1": "#9467bd",
    "RRB_z_minus1": "#8c564b",
    "PM": "#2ca02c",
    "GM": "#ff7f0e",
    "MS": "#7f7f7f",
}


def _cell_categories(m: RegionMap) -> np.ndarray:
    """0: infeasible, 1: stable only, 2: partially feasible, 3: all bits."""
    active = m.active_mask
    cats = np.zeros_like(m.cells, dtype=np.uint8)
    stable_only = (m.cells & BIT_STABLE) > 0
    cats[stable_only] = 1
    partial = (m.cells & active) > 0
    cats[partial & ~stable_only] = 2
    cats[(m.cells & active) == active] = 3
    return cats


def region_svg(m: RegionMap, path: str) -> None:
    """Filled cells colored by constraint category plus boundary polylines."""
    fig, ax = plt.subplots(figsize=(7.5, 6.0))
    cats = _cell_categories(m)
    cmap = ListedColormap(["#ffffff", "#c6dbef", "#fdd49e", "#2171b5"])
    ax.imshow(
        cats,
        origin="lower",
        extent=(*m.x_range, *m.y_range),
        aspect="auto",
        cmap=cmap,
        vmin=0,
        vmax=3,
        interpolation="nearest",
    )
    seen = {}
    for curve in m.boundaries:
        color = _BOUNDARY_COLORS.get(curve.kind, "#000000")
        label = curve.kind if curve.constraint_value is None else f"{curve.kind}={curve.constraint_value:g}"
        if curve.points:
            xs = [p.x for p in curve.points]
            ys = [p.y for p in curve.points]
            ax.plot(xs, ys, ".", color=color, markersize=1.2)
            seen.setdefault(label, color)
        for seg in curve.singular_segments:
            span = max(m.x_range[1] - m.x_range[0], m.y_range[1] - m.y_range[0])
            t = np.linspace(-2 * span, 2 * span, 16)
            ax.plot(seg.point[0] + t * seg.direction[0], seg.point[1] + t * seg.direction[1],
                    "--", color=color, linewidth=1.0)
            seen.setdefault(label, color)
    handles = [
        plt.Rectangle((0, 0), 1, 1, color="#c6dbef"),
        plt.Rectangle((0, 0), 1, 1, color="#2171b5"),
    ]
    labels = ["stable", "all constraints"]
    for label, color in sorted(seen.items()):
        handles.append(Line2D([0], [0], color=color, linewidth=1.5))
        labels.append(label)
    ax.set_xlim(*m.x_range)
    ax.set_ylim(*m.y_range)
    ax.set_xlabel(m.plane.x_axis)
    ax.set_ylabel(m.plane.y_axis)
    fixed = m.plane.fixed_axis
    ax.set_title(f"Gain-space regions ({fixed} = {m.plane.fixed_gain_value:g}, T = {m.metadata.get('sample_time', '?')} s)")
    ax.legend(handles, labels, loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def bode_svg(report: AnalysisReport, path: str) -> None:
    """Loop magnitude/phase with crossover markers from the report curves."""
    fr = report.frequency_response
    if fr is None:
        raise ValueError("report carries no frequency-response curves")
    omega = np.asarray(fr["omega"])
    mag = np.asarray(fr["loop_mag_db"])
    phase = np.asarray(fr["loop_phase_deg"])
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.5, 6.5), sharex=True)
    ax1.semilogx(omega, mag, "b-")
    ax1.axhline(0.0, color="r", linestyle="--", linewidth=0.8)
    ax2.semilogx(omega, phase, "b-")
    ax2.axhline(-180.0, color="r", linestyle="--", linewidth=0.8)
    T = report.sample_time
    for theta, pm in report.gain_crossovers:
        ax1.axvline(theta / T, color="g", linestyle=":", linewidth=0.8)
        ax2.plot(theta / T, pm - 180.0, "go", markersize=5)
    for theta, gm in report.phase_crossovers:
        if theta > 0:
            ax1.plot(theta / T, -gm, "ms", markersize=5)
    pm_txt = "-" if report.worst_pm is None else f"{report.worst_pm:.2f} deg"
    gm_txt = "inf" if report.worst_gm is None else f"{report.worst_gm:.2f} dB"
    ax1.set_ylabel("|L| [dB]")
    ax1.set_title(f"Loop frequency response (PM {pm_txt}, GM {gm_txt})")
    ax2.set_ylabel("arg L [deg]")
    ax2.set_xlabel("frequency [rad/s]")
    for ax in (ax1, ax2):
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def robust_performance_svg(report: AnalysisReport, path: str) -> None:
    """|W_S S| + |W_T T| against the 0 dB line."""
    fr = report.frequency_response
    if fr is None or fr.get("rp_value") is None:
        raise ValueError("report carries no robust-performance curve")
    omega = np.asarray(fr["omega"])
    rp = np.asarray(fr["rp_value"])
    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    ax.semilogx(omega, 20 * np.log10(np.maximum(rp, 1e-12)), "b-")
    ax.axhline(0.0, color="r", linestyle="--", linewidth=0.9, label="0 dB bound")
    if report.rp_supremum is not None and report.rp_arg_theta is not None and np.isfinite(report.rp_supremum):
        ax.plot(report.rp_arg_theta / report.sample_time,
                20 * np.log10(max(report.rp_supremum, 1e-12)), "ko", markersize=5,
                label=f"supremum {report.rp_supremum:.4f}")
    ax.set_xlabel("frequency [rad/s]")
    ax.set_ylabel("|W_S S| + |W_T T| [dB]")
    ax.set_title("Robust performance")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def step_response_svg(sim: SimResult, path: str) -> None:
    """Reference/output tracking plus the control signal."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.5, 6.0), sharex=True)
    ax1.plot(sim.time, sim.reference, "k--", linewidth=0.9, label="reference")
    ax1.plot(sim.time, sim.output, "b-", label="output")
    ax1.set_ylabel("output")
    ax1.legend(fontsize=8)
    ax2.plot(sim.time, sim.control, "r-", label="control")
    ax2.set_ylabel("control")
    ax2.set_xlabel("time [s]")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
