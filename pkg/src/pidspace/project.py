"""A loaded project: derived objects, cached region map, canonical JSON.

The CLI commands and the HTTP endpoints both call the methods here, so
identical logical requests produce byte-identical JSON documents.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass

import numpy as np

from . import analyzer
from .boundary import GainPlane, MarginSpec, default_ms_theta_grid, default_theta_grid, default_theta_l_grid
from .config import ProjectConfig
from .errors import ConfigError
from .region import ConstraintSet, DesignSetup, RegionMap, build_region_map
from .tfcore import PidGains, RationalTransferFunction


def canonical_json(obj) -> bytes:
    """Compact, key-sorted, ASCII JSON bytes; NaN/Infinity are rejected."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


@dataclass(frozen=True)
class RegionOverrides:
    """Constraint/grid values replacing the project settings for one request."""

    pm_min: float | None = None
    pm_max: float | None = None
    gm_min: float | None = None
    use_margins: bool | None = None
    use_ms: bool | None = None
    nx: int | None = None
    ny: int | None = None
    x_range: tuple[float, float] | None = None
    y_range: tuple[float, float] | None = None


class Project:
    """Immutable project state plus a lazily computed default region map."""

    def __init__(self, config: ProjectConfig):
        self.config = config
        self.setup: DesignSetup = config.design_setup()
        self.plane: GainPlane = config.gain_plane()
        self.constraints: ConstraintSet = self.setup.constraints_at()
        self.plant: RationalTransferFunction = self.constraints.plants[0]
        self._region_lock = threading.Lock()
        self._region_cache: RegionMap | None = None

    # -- gains ---------------------------------------------------------

    def gains(self, kp: float, ki: float, kd: float) -> PidGains:
        try:
            return PidGains(kp, ki, kd, self.config.controller_structure)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- region --------------------------------------------------------

    def _build_map(self, constraints: ConstraintSet, plane: GainPlane,
                   nx: int, ny: int, x_range, y_range) -> RegionMap:
        grid = self.config.grid
        return build_region_map(
            constraints,
            plane,
            x_range,
            y_range,
            nx=nx,
            ny=ny,
            theta_grid=default_theta_grid(grid.theta_points),
            theta_l_grid=default_theta_l_grid(grid.theta_l_points),
            ms_theta_grid=default_ms_theta_grid(grid.ms_theta_points),
            n_margin_points=grid.margin_sweep_points,
            n_rp_points=grid.rp_grid_points,
        )

    def region_map(self) -> RegionMap:
        with self._region_lock:
            if self._region_cache is None:
                grid = self.config.grid
                self._region_cache = self._build_map(
                    self.constraints, self.plane, grid.nx, grid.ny, grid.x_range, grid.y_range
                )
            return self._region_cache

    def region_map_with_overrides(self, ov: RegionOverrides) -> RegionMap:
        """Pure recomputation; does not touch the cached default map."""
        spec = self.constraints.margin_spec
        pm_min = ov.pm_min if ov.pm_min is not None else (spec.pm_min if spec else None)
        pm_max = ov.pm_max if ov.pm_max is not None else (spec.pm_max if spec else None)
        gm_min = ov.gm_min if ov.gm_min is not None else (spec.gm_min if spec else None)
        use_margins = ov.use_margins if ov.use_margins is not None else (spec is not None)
        use_ms = ov.use_ms if ov.use_ms is not None else (self.constraints.ms_weights is not None)
        if use_ms and self.constraints.ms_weights is None:
            raise ConfigError("project has no mixed-sensitivity weights to enable")
        margin = None
        if use_margins and (pm_min is not None or gm_min is not None):
            try:
                margin = MarginSpec(pm_min, pm_max, gm_min)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        try:
            constraints = ConstraintSet(
                self.constraints.plants,
                self.constraints.require_stability,
                margin,
                self.constraints.ms_weights if use_ms else None,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        grid = self.config.grid
        default = self.region_map()
        return self._build_map(
            constraints,
            self.plane,
            ov.nx or grid.nx,
            ov.ny or grid.ny,
            ov.x_range or default.x_range,
            ov.y_range or default.y_range,
        )

    # -- analysis ------------------------------------------------------

    def analyze(self, kp: float, ki: float, kd: float, with_curves: bool = True) -> analyzer.AnalysisReport:
        grid = self.config.grid
        return analyzer.analyze_design(
            self.plant,
            self.gains(kp, ki, kd),
            margin_spec=self.constraints.margin_spec,
            ms_weights=self.constraints.ms_weights,
            require_stability=self.constraints.require_stability,
            with_curves=with_curves,
            n_margin_points=grid.margin_sweep_points,
            n_rp_points=grid.rp_grid_points,
        )

    def reference_signal(self, kind: str, n: int) -> np.ndarray:
        if n < 1:
            raise ConfigError("simulation needs at least one step")
        if kind == "step":
            return np.ones(n)
        if kind == "ramp":
            return 0.1 * np.arange(n) * self.plant.sample_time
        raise ConfigError(f"unknown reference kind {kind!r} (expected step or ramp)")

    def simulate(self, kp: float, ki: float, kd: float, ref: str, n: int, force: bool = False) -> analyzer.SimResult:
        return analyzer.simulate_closed_loop(
            self.plant, self.gains(kp, ki, kd), self.reference_signal(ref, n), force=force
        )

    # -- descriptors ----------------------------------------------------

    def describe(self) -> dict:
        return {
            "name": self.config.name,
            "version": self.config.version,
            "sample_time": self.config.sample_time,
            "controller_structure": self.config.controller_structure,
            "plane": self.plane.to_dict(),
            "plant_input": self.config.plant.model_dump(),
            "plant_discrete": self.plant.to_dict(),
            "constraints": self.constraints.describe() | {
                "pm_min": None if self.constraints.margin_spec is None else self.constraints.margin_spec.pm_min,
                "pm_max": None if self.constraints.margin_spec is None else self.constraints.margin_spec.pm_max,
                "gm_min": None if self.constraints.margin_spec is None else self.constraints.margin_spec.gm_min,
            },
            "grid": self.config.grid.model_dump(),
        }

    # canonical byte renderers shared by CLI and HTTP ------------------

    def project_bytes(self) -> bytes:
        return canonical_json(self.describe())

    def region_bytes(self, region: RegionMap | None = None) -> bytes:
        return canonical_json((region or self.region_map()).to_dict())

    def analyze_bytes(self, kp: float, ki: float, kd: float, with_curves: bool = True) -> bytes:
        return canonical_json(self.analyze(kp, ki, kd, with_curves=with_curves).to_dict())

    def simulate_bytes(self, kp: float, ki: float, kd: float, ref: str, n: int, force: bool = False) -> bytes:
        return canonical_json(self.simulate(kp, ki, kd, ref, n, force=force).to_dict())
