"""Region maps: constraint classification over a gain-plane grid.

Every cell of a rectangular grid is classified by the analyzer oracle
(stability, phase margin, gain margin, mixed sensitivity) and the
requested boundary curves are attached as advisory overlays.  The cell
bitmask is ground truth; superimposing all active constraints gives the
multi-objective solution region.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import analyzer, boundary
from .boundary import BoundaryCurve, GainPlane, MarginSpec, WeightSpec, weight_tf
from .errors import NumericsError
from .tfcore import DISCRETE, RationalTransferFunction, c2d_zoh

log = logging.getLogger(__name__)

BIT_STABLE = 1
BIT_PM = 2
BIT_GM = 4
BIT_MS = 8

THREADS_ENV = "PIDSPACE_THREADS"


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


@dataclass(frozen=True)
class ConstraintSet:
    """Active constraints plus the plant family they apply to.

    All plants must be discrete with a common sample time; the family is
    classified by intersection (a cell satisfies a constraint only if
    every family member does).
    """

    plants: tuple[RationalTransferFunction, ...]
    require_stability: bool = True
    margin_spec: MarginSpec | None = None
    ms_weights: tuple[RationalTransferFunction, RationalTransferFunction] | None = None

    def __post_init__(self):
        if not self.plants:
            raise ValueError("constraint set needs at least one plant")
        for p in self.plants:
            if p.domain != DISCRETE:
                raise ValueError("constraint-set plants must be discrete")
            if p.sample_time != self.plants[0].sample_time:
                raise ValueError("all plants in the family must share the sample time")
        if not (self.require_stability or self.margin_spec is not None or self.ms_weights is not None):
            raise ValueError("constraint set has no active constraint")

    @property
    def sample_time(self) -> float:
        return self.plants[0].sample_time

    @property
    def active_mask(self) -> int:
        mask = BIT_STABLE if self.require_stability else 0
        if self.margin_spec is not None and self.margin_spec.has_pm:
            mask |= BIT_PM
        if self.margin_spec is not None and self.margin_spec.has_gm:
            mask |= BIT_GM
        if self.ms_weights is not None:
            mask |= BIT_MS
        return mask

    def describe(self) -> dict:
        return {
            "require_stability": self.require_stability,
            "margins": None if self.margin_spec is None else self.margin_spec.to_dict(),
            "mixed_sensitivity": self.ms_weights is not None,
            "active_mask": self.active_mask,
        }


def classify_point(
    constraints: ConstraintSet,
    plane: GainPlane,
    x: float,
    y: float,
    n_margin_points: int = analyzer._DEFAULT_MARGIN_POINTS,
    n_rp_points: int = analyzer._DEFAULT_RP_POINTS,
) -> int:
    """Constraint-satisfaction bitmask for the gain point (x, y).

    Delegates every check to the analyzer: the stable bit requires
    spectral radius < 1 - 1e-9 for every plant in the family, the pm bit
    the measured worst phase margin inside [pm_min, pm_max], the gm bit a
    worst gain margin of at least gm_min (absent crossover means infinite
    margin), and the ms bit a robust-performance supremum below one.
    """
    gains = plane.gains_at(x, y)
    spec = constraints.margin_spec
    bits = constraints.active_mask
    for plant in constraints.plants:
        if bits & BIT_STABLE:
            if not analyzer.spectral_radius(plant, gains) < 1.0 - analyzer.STABILITY_MARGIN:
                bits &= ~BIT_STABLE
        if bits & (BIT_PM | BIT_GM):
            mr = analyzer.margins(plant, gains, n_points=n_margin_points)
            if bits & BIT_PM:
                if mr.worst_pm is None or not (spec.pm_min <= mr.worst_pm <= spec.pm_max):
                    bits &= ~BIT_PM
            if bits & BIT_GM:
                if mr.worst_gm is not None and mr.worst_gm < spec.gm_min:
                    bits &= ~BIT_GM
        if bits & BIT_MS:
            rp = analyzer.robust_performance(plant, gains, constraints.ms_weights, n_points=n_rp_points)
            if not rp.supremum < 1.0:
                bits &= ~BIT_MS
        if bits == 0:
            break
    return bits


@dataclass
class RegionMap:
    """Classified grid over a gain plane with advisory boundary overlays."""

    plane: GainPlane
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int
    ny: int
    cells: np.ndarray  # (ny, nx) uint8 bitmasks, row 0 at y_range[0]
    boundaries: list[BoundaryCurve] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def active_mask(self) -> int:
        return int(self.metadata.get("active_mask", BIT_STABLE))

    def x_centers(self) -> np.ndarray:
        lo, hi = self.x_range
        return lo + (np.arange(self.nx) + 0.5) * (hi - lo) / self.nx

    def y_centers(self) -> np.ndarray:
        lo, hi = self.y_range
        return lo + (np.arange(self.ny) + 0.5) * (hi - lo) / self.ny

    def cell_containing(self, x: float, y: float) -> tuple[int, int]:
        ix = int((x - self.x_range[0]) / (self.x_range[1] - self.x_range[0]) * self.nx)
        iy = int((y - self.y_range[0]) / (self.y_range[1] - self.y_range[0]) * self.ny)
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise ValueError(f"point ({x}, {y}) outside the map ranges")
        return ix, iy

    def feasible_cells(self) -> np.ndarray:
        """Boolean (ny, nx) array of multi-objective (all active bits) cells."""
        return (self.cells & self.active_mask) == self.active_mask

    def feasible_centers(self) -> list[tuple[float, float]]:
        xs, ys = self.x_centers(), self.y_centers()
        mask = self.feasible_cells()
        return [(float(xs[i]), float(ys[j])) for j in range(self.ny) for i in range(self.nx) if mask[j, i]]

    def to_dict(self) -> dict:
        return {
            "plane": self.plane.to_dict(),
            "ranges": {"x": list(self.x_range), "y": list(self.y_range)},
            "nx": self.nx,
            "ny": self.ny,
            "cells": base64.b64encode(self.cells.astype(np.uint8).tobytes()).decode("ascii"),
            "boundaries": [b.to_dict() for b in self.boundaries],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegionMap":
        nx, ny = int(d["nx"]), int(d["ny"])
        cells = np.frombuffer(base64.b64decode(d["cells"]), dtype=np.uint8).reshape(ny, nx).copy()
        return cls(
            GainPlane.from_dict(d["plane"]),
            tuple(d["ranges"]["x"]),
            tuple(d["ranges"]["y"]),
            nx,
            ny,
            cells,
            [BoundaryCurve.from_dict(b) for b in d.get("boundaries", [])],
            d.get("metadata", {}),
        )

    def csv_rows(self):
        yield [self.plane.x_axis, self.plane.y_axis]
        for x, y in self.feasible_centers():
            yield [f"{x:.12g}", f"{y:.12g}"]


def _plant_digest(plant: RationalTransferFunction) -> str:
    payload = repr((plant.num.coeffs, plant.den.coeffs, plant.sample_time)).encode()
    return hashlib.sha256(payload).hexdigest()[:12]


def _classify_grid(constraints, plane, xs, ys, n_margin_points, n_rp_points) -> np.ndarray:
    cells = np.zeros((len(ys), len(xs)), dtype=np.uint8)

    def fill_row(j: int) -> None:
        for i, x in enumerate(xs):
            cells[j, i] = classify_point(
                constraints, plane, float(x), float(ys[j]),
                n_margin_points=n_margin_points, n_rp_points=n_rp_points,
            )

    workers = _worker_count()
    if workers <= 1:
        for j in range(len(ys)):
            fill_row(j)
    else:
        # rows are written into a pre-sized array, so the result does not
        # depend on scheduling order
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill_row, range(len(ys))))
    return cells


def build_region_map(
    constraints: ConstraintSet,
    plane: GainPlane,
    x_range: tuple[float, float] | None = None,
    y_range: tuple[float, float] | None = None,
    nx: int = 201,
    ny: int = 201,
    theta_grid: np.ndarray | None = None,
    theta_l_grid: np.ndarray | None = None,
    ms_theta_grid: np.ndarray | None = None,
    with_boundaries: bool = True,
    n_margin_points: int = analyzer._DEFAULT_MARGIN_POINTS,
    n_rp_points: int = analyzer._DEFAULT_RP_POINTS,
) -> RegionMap:
    """Classify every cell center and attach boundary curves per plant.

    Missing ranges are auto-scanned by expanding from the origin until the
    feasible region is strictly interior (or a cap is hit).  Boundary
    generation failures degrade to an oracle-only map with a warning list.
    """
    if nx < 2 or ny < 2:
        raise ValueError("grid needs at least 2 cells per axis")
    if x_range is None or y_range is None:
        auto_x, auto_y = auto_scan_ranges(constraints, plane, n_margin_points=n_margin_points, n_rp_points=n_rp_points)
        x_range = x_range or auto_x
        y_range = y_range or auto_y
    x_range = (float(x_range[0]), float(x_range[1]))
    y_range = (float(y_range[0]), float(y_range[1]))
    if not (x_range[0] < x_range[1] and y_range[0] < y_range[1]):
        raise ValueError("empty plane ranges")

    xs = x_range[0] + (np.arange(nx) + 0.5) * (x_range[1] - x_range[0]) / nx
    ys = y_range[0] + (np.arange(ny) + 0.5) * (y_range[1] - y_range[0]) / ny
    cells = _classify_grid(constraints, plane, xs, ys, n_margin_points, n_rp_points)

    warnings: list[str] = []
    curves: list[BoundaryCurve] = []
    if with_boundaries:
        spec = constraints.margin_spec
        for plant in constraints.plants:
            generators = [("CRB", lambda p=plant: [boundary.stability_crb(p, plane, theta_grid)])]
            generators.append(("RRB", lambda p=plant: boundary.stability_rrb(p, plane)))
            if spec is not None and spec.has_pm:
                generators.append(
                    ("PM", lambda p=plant: [
                        boundary.pm_boundary(p, plane, spec.pm_min, theta_grid),
                        boundary.pm_boundary(p, plane, spec.pm_max, theta_grid),
                    ])
                )
            if spec is not None and spec.has_gm:
                generators.append(("GM", lambda p=plant: [boundary.gm_boundary(p, plane, spec.gm_min, theta_grid)]))
            if constraints.ms_weights is not None:
                ms_grid = ms_theta_grid if ms_theta_grid is not None else boundary.default_ms_theta_grid()
                generators.append(
                    ("MS", lambda p=plant, g=ms_grid: boundary.ms_boundary(p, constraints.ms_weights, plane, g, theta_l_grid))
                )
            for name, gen in generators:
                try:
                    curves.extend(gen())
                except Exception as exc:  # degrade to oracle-only map
                    warnings.append(f"{name} boundary failed for plant {_plant_digest(plant)}: {exc}")
                    log.warning("boundary generation failed: %s", warnings[-1])

    feasible = (cells & constraints.active_mask) == constraints.active_mask
    clipped = bool(feasible[0, :].any() or feasible[-1, :].any() or feasible[:, 0].any() or feasible[:, -1].any())
    metadata = {
        "version": 1,
        "sample_time": constraints.sample_time,
        "plants": [_plant_digest(p) for p in constraints.plants],
        "constraints": constraints.describe(),
        "active_mask": constraints.active_mask,
        "warnings": warnings,
        "clipped": clipped,
        "feasible_cells": int(feasible.sum()),
    }
    return RegionMap(plane, x_range, y_range, nx, ny, cells, curves, metadata)


def auto_scan_ranges(
    constraints: ConstraintSet,
    plane: GainPlane,
    probe: int = 25,
    max_rounds: int = 6,
    n_margin_points: int = 1024,
    n_rp_points: int = 512,
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Expand symmetric ranges from the origin until the region is interior.

    A coarse probe grid is classified each round; sides touched by
    feasible cells are doubled.  When the feasible set is strictly
    interior the ranges are shrunk to its padded bounding box.  Hitting
    the round cap returns the current ranges (map will carry clipped=True).
    """
    x_lo, x_hi = -1.0, 1.0
    y_lo, y_hi = -1.0, 1.0
    for _ in range(max_rounds):
        xs = x_lo + (np.arange(probe) + 0.5) * (x_hi - x_lo) / probe
        ys = y_lo + (np.arange(probe) + 0.5) * (y_hi - y_lo) / probe
        cells = _classify_grid(constraints, plane, xs, ys, n_margin_points, n_rp_points)
        feas = (cells & constraints.active_mask) == constraints.active_mask
        if not feas.any():
            x_lo, x_hi, y_lo, y_hi = 2 * x_lo, 2 * x_hi, 2 * y_lo, 2 * y_hi
            continue
        touch_left = feas[:, 0].any()
        touch_right = feas[:, -1].any()
        touch_bottom = feas[0, :].any()
        touch_top = feas[-1, :].any()
        if not (touch_left or touch_right or touch_bottom or touch_top):
            ii = np.flatnonzero(feas.any(axis=0))
            jj = np.flatnonzero(feas.any(axis=1))
            dx = (x_hi - x_lo) / probe
            dy = (y_hi - y_lo) / probe
            pad_x = max(2.0 * dx, 0.25 * (xs[ii[-1]] - xs[ii[0]] + dx))
            pad_y = max(2.0 * dy, 0.25 * (ys[jj[-1]] - ys[jj[0]] + dy))
            return (
                (float(xs[ii[0]] - pad_x), float(xs[ii[-1]] + pad_x)),
                (float(ys[jj[0]] - pad_y), float(ys[jj[-1]] + pad_y)),
            )
        if touch_left:
            x_lo *= 2
        if touch_right:
            x_hi *= 2
        if touch_bottom:
            y_lo *= 2
        if touch_top:
            y_hi *= 2
    log.warning("auto-scan hit the expansion cap; region may be unbounded (map will be clipped)")
    return ((x_lo, x_hi), (y_lo, y_hi))


@dataclass(frozen=True)
class DesignSetup:
    """Pre-discretization description of a design problem.

    Plants may be continuous (discretized per sample time) or discrete
    (re-tagged, so a sample-time sweep varies the controller scaling the
    way the gain-absorbed boundary equations do).  Weights are given as
    continuous specs and discretized alongside.
    """

    plants: tuple[RationalTransferFunction, ...]
    sample_time: float
    require_stability: bool = True
    margin_spec: MarginSpec | None = None
    sensitivity_weight: WeightSpec | None = None
    complementary_weight: WeightSpec | None = None

    def __post_init__(self):
        if not self.plants:
            raise ValueError("design setup needs at least one plant")
        if not self.sample_time > 0:
            raise ValueError("sample time must be positive")
        if (self.sensitivity_weight is None) != (self.complementary_weight is None):
            raise ValueError("mixed-sensitivity weights must be given as a pair")

    def constraints_at(self, sample_time: float | None = None) -> ConstraintSet:
        T = self.sample_time if sample_time is None else float(sample_time)
        plants = tuple(
            p.with_sample_time(T) if p.is_discrete else c2d_zoh(p, T) for p in self.plants
        )
        weights = None
        if self.sensitivity_weight is not None:
            weights = (
                c2d_zoh(weight_tf(self.sensitivity_weight), T),
                c2d_zoh(weight_tf(self.complementary_weight), T),
            )
        return ConstraintSet(plants, self.require_stability, self.margin_spec, weights)


@dataclass
class SweepResult:
    """Stack of region maps along a third axis (sample time or third gain)."""

    axis: str
    values: list[float]
    maps: list[RegionMap | None]
    failures: list[tuple[int, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "values": self.values,
            "maps": [None if m is None else m.to_dict() for m in self.maps],
            "failures": [[i, msg] for i, msg in self.failures],
        }


def sweep_axis(
    setup: DesignSetup,
    axis: str,
    values,
    plane: GainPlane,
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    nx: int = 101,
    ny: int = 101,
    **map_kwargs,
) -> SweepResult:
    """One region map per axis value; failed slices are recorded, not fatal.

    axis = "sample_time" rebuilds the constraint set per value (continuous
    plants are rediscretized; discrete plants keep their coefficients and
    the controller scaling changes).  axis = "third_gain" keeps the plant
    fixed and moves the plane's fixed gain; a zero value degenerates the
    controller structure unless the plane pins one explicitly.
    """
    if axis not in ("sample_time", "third_gain"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    values = [float(v) for v in values]
    maps: list[RegionMap | None] = []
    failures: list[tuple[int, str]] = []
    for i, v in enumerate(values):
        try:
            if axis == "sample_time":
                constraints = setup.constraints_at(v)
                slice_plane = plane
            else:
                constraints = setup.constraints_at()
                slice_plane = replace(plane, fixed_gain_value=v)
            maps.append(
                build_region_map(constraints, slice_plane, x_range, y_range, nx=nx, ny=ny, **map_kwargs)
            )
        except Exception as exc:
            failures.append((i, str(exc)))
            maps.append(None)
            log.warning("sweep slice %s=%g failed: %s", axis, v, exc)
    return SweepResult(axis, values, maps, failures)
