"""Project configuration: a single versioned JSON document.

All run inputs live in one schema-validated file so every region map,
report or simulation is reproducible from a committed fixture.  Units:
phase margins in degrees, gain margins in decibels, weight corner
frequencies in rad/s, sample times in seconds.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .boundary import GainPlane, MarginSpec, WeightSpec
from .errors import ConfigError
from .region import DesignSetup
from .tfcore import CONTINUOUS, DISCRETE, Polynomial, RationalTransferFunction


class TransferFunctionConfig(BaseModel):
    """{domain, sample_time, num, den} with coefficients highest degree first."""

    model_config = ConfigDict(extra="forbid")

    domain: Literal["continuous", "discrete"]
    sample_time: float | None = Field(default=None, description="seconds; required iff discrete")
    num: list[float] = Field(min_length=1)
    den: list[float] = Field(min_length=1)

    def build(self) -> RationalTransferFunction:
        try:
            return RationalTransferFunction(
                Polynomial(tuple(self.num)), Polynomial(tuple(self.den)), self.domain, self.sample_time
            )
        except ValueError as exc:
            raise ConfigError(f"invalid transfer function: {exc}") from exc


class WeightConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    l: float = Field(description="low-frequency parameter (dimensionless)")
    h: float = Field(description="high-frequency parameter (dimensionless)")
    omega: float = Field(description="corner frequency in rad/s")


class ConstraintConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    require_stability: bool = True
    pm_min: float | None = Field(default=None, description="degrees")
    pm_max: float | None = Field(default=None, description="degrees")
    gm_min: float | None = Field(default=None, description="decibels")
    sensitivity_weight: WeightConfig | None = None
    complementary_weight: WeightConfig | None = None

    @model_validator(mode="after")
    def _check(self):
        if (self.pm_min is None) != (self.pm_max is None):
            raise ValueError("pm_min and pm_max must be given together")
        if (self.sensitivity_weight is None) != (self.complementary_weight is None):
            raise ValueError("mixed-sensitivity weights must be given as a pair")
        if not (self.require_stability or self.pm_min is not None or self.gm_min is not None
                or self.sensitivity_weight is not None):
            raise ValueError("no active constraint")
        return self

    def margin_spec(self) -> MarginSpec | None:
        if self.pm_min is None and self.gm_min is None:
            return None
        return MarginSpec(self.pm_min, self.pm_max, self.gm_min)

    def weight_specs(self) -> tuple[WeightSpec, WeightSpec] | None:
        if self.sensitivity_weight is None:
            return None
        s, t = self.sensitivity_weight, self.complementary_weight
        return (
            WeightSpec(s.l, s.h, s.omega, "sensitivity"),
            WeightSpec(t.l, t.h, t.omega, "complementary"),
        )


class PlaneConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x_axis: Literal["kp", "ki", "kd"]
    y_axis: Literal["kp", "ki", "kd"]
    fixed_gain_value: float = 0.0


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nx: int = Field(default=201, ge=2)
    ny: int = Field(default=201, ge=2)
    x_range: tuple[float, float] | None = None
    y_range: tuple[float, float] | None = None
    theta_points: int = Field(default=2048, ge=8, description="boundary sweep resolution")
    theta_l_points: int = Field(default=720, ge=8, description="mixed-sensitivity loop-phase resolution")
    ms_theta_points: int = Field(default=64, ge=2, description="mixed-sensitivity overlay frequencies")
    margin_sweep_points: int = Field(default=8192, ge=64)
    rp_grid_points: int = Field(default=4096, ge=64)


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: str = "."
    basename: str = "pidspace"


class ProjectConfig(BaseModel):
    """Top-level project document (see examples under fixtures/)."""

    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = 1
    name: str = "unnamed project"
    plant: TransferFunctionConfig
    sample_time: float = Field(gt=0, description="seconds")
    controller_structure: Literal["P", "PI", "PD", "PID"]
    plane: PlaneConfig
    constraints: ConstraintConfig
    grid: GridConfig = GridConfig()
    outputs: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _check_plane(self):
        try:
            self.gain_plane()
        except ValueError as exc:
            raise ValueError(str(exc)) from exc
        return self

    def gain_plane(self) -> GainPlane:
        return GainPlane(
            self.plane.x_axis,
            self.plane.y_axis,
            self.plane.fixed_gain_value,
            self.controller_structure,
        )

    def design_setup(self) -> DesignSetup:
        weights = self.constraints.weight_specs()
        return DesignSetup(
            plants=(self.plant.build(),),
            sample_time=self.sample_time,
            require_stability=self.constraints.require_stability,
            margin_spec=self.constraints.margin_spec(),
            sensitivity_weight=None if weights is None else weights[0],
            complementary_weight=None if weights is None else weights[1],
        )


def load_project_config(path: str | Path) -> ProjectConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_project_config(raw)


def parse_project_config(raw: dict) -> ProjectConfig:
    try:
        return ProjectConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid project config: {exc}") from exc
