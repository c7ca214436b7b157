"""Constraint boundary curves in a two-gain plane.

Five boundary families are generated here, all by sweeping an angle theta
over the unit circle and solving a small linear system in the two free
PID gains:

  * CRB           -- gains placing a complex closed-loop root pair at
                     e^{+-j theta} (absolute stability boundary),
  * RRB at z=+1   -- gains placing a real root at z = 1,
  * RRB at z=-1   -- gains placing a real root at z = -1,
  * PM            -- gains making theta a unity-gain crossover with a
                     prescribed phase margin,
  * GM            -- gains making theta a -180 deg crossover with a
                     prescribed gain margin,
  * MS            -- gains for which the mixed-sensitivity constraint
                     |W_S| + |W_T||L| = |1 + L| holds with equality.

The characteristic equation is kept in polynomial form
    den(z) z(z-1) + num(z) (kp z(z-1) + ki T z^2 + (kd/T)(z-1)^2) = 0
so plants with unit-circle poles never require evaluating G at a pole.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import NumericsError
from .tfcore import (
    CONTINUOUS,
    PidGains,
    Polynomial,
    RationalTransferFunction,
    tf_eval_unit_circle,
)

log = logging.getLogger(__name__)

GAIN_NAMES = ("kp", "ki", "kd")

CRB = "CRB"
RRB_PLUS = "RRB_z_plus1"
RRB_MINUS = "RRB_z_minus1"
PM = "PM"
GM = "GM"
MS = "MS"

# relative threshold on the smallest singular value of the 2x2 boundary
# system below which a sweep angle is treated as singular
SINGULAR_RTOL = 1e-9

# sweep angles with |sin theta| below this are skipped for the PD/PI
# mixed-sensitivity back-substitution
_SIN_TOLERANCE = 1e-6

_MS_RESIDUAL_BOUND = 1e-9


def default_theta_grid(n: int = 2048) -> np.ndarray:
    """n uniform angles strictly inside (0, pi).

    Conjugate symmetry of real-coefficient plants makes the (0, pi) sweep
    equivalent to the full (0, 2*pi) one; the endpoints are the real-root
    boundaries and are handled by `stability_rrb`.
    """
    return np.linspace(0.0, np.pi, n + 2)[1:-1]


def default_theta_l_grid(n: int = 720) -> np.ndarray:
    """n uniform loop-phase angles on [0, 2*pi)."""
    return np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)


def default_ms_theta_grid(n: int = 64) -> np.ndarray:
    """Coarser frequency grid for mixed-sensitivity overlays.

    Each frequency already contributes a full closed curve over the loop
    phase, so a dense frequency sweep would only stack thousands of
    near-identical curves.
    """
    return default_theta_grid(n)


@dataclass(frozen=True)
class GainPlane:
    """A two-gain design plane with the remaining gain held fixed.

    `structure` may be given explicitly; when omitted it is derived from
    the plane: a zero fixed gain degenerates PID to the PI / PD structure
    spanned by the axes, a nonzero fixed gain means full PID.
    """

    x_axis: str
    y_axis: str
    fixed_gain_value: float = 0.0
    structure: str | None = None

    def __post_init__(self):
        if self.x_axis not in GAIN_NAMES or self.y_axis not in GAIN_NAMES:
            raise ValueError(f"plane axes must be among {GAIN_NAMES}")
        if self.x_axis == self.y_axis:
            raise ValueError("plane axes must be distinct")
        if self.structure is not None:
            self._validate_structure(self.structure)

    def _validate_structure(self, structure: str) -> None:
        members = {"P": {"kp"}, "PI": {"kp", "ki"}, "PD": {"kp", "kd"}, "PID": set(GAIN_NAMES)}
        if structure not in members:
            raise ValueError(f"unknown controller structure {structure!r}")
        axes = {self.x_axis, self.y_axis}
        if not axes <= members[structure]:
            raise ValueError(f"plane axes {sorted(axes)} not available in a {structure} controller")
        if structure != "PID" and self.fixed_gain_value != 0.0:
            raise ValueError(f"{structure} structure fixes the remaining gain at 0")

    @property
    def fixed_axis(self) -> str:
        return next(g for g in GAIN_NAMES if g not in (self.x_axis, self.y_axis))

    @property
    def resolved_structure(self) -> str:
        if self.structure is not None:
            return self.structure
        if self.fixed_gain_value != 0.0:
            return "PID"
        return {"kd": "PI", "ki": "PD", "kp": "PID"}[self.fixed_axis]

    def gains_at(self, x: float, y: float) -> PidGains:
        values = {self.x_axis: float(x), self.y_axis: float(y), self.fixed_axis: self.fixed_gain_value}
        return PidGains(structure=self.resolved_structure, **values)

    def to_dict(self) -> dict:
        return {
            "x_axis": self.x_axis,
            "y_axis": self.y_axis,
            "fixed_gain_value": self.fixed_gain_value,
            "structure": self.resolved_structure,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GainPlane":
        return cls(d["x_axis"], d["y_axis"], d.get("fixed_gain_value", 0.0), d.get("structure"))


class BoundaryPoint(NamedTuple):
    x: float
    y: float
    theta: float
    theta_l: float | None = None


@dataclass(frozen=True)
class LineSegment:
    """A straight-line solution set: point + direction in the gain plane."""

    point: tuple[float, float]
    direction: tuple[float, float]
    theta: float
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "direction": list(self.direction),
            "theta": self.theta,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LineSegment":
        return cls(tuple(d["point"]), tuple(d["direction"]), d["theta"], d.get("note", ""))


@dataclass
class BoundaryCurve:
    """Ordered boundary points from one constraint, plus singular lines.

    `degenerate` carries a note when the boundary collapses (e.g. a root
    pinned at z = +-1 for all gains) instead of producing a line.
    """

    kind: str
    constraint_value: float | None
    points: list[BoundaryPoint] = field(default_factory=list)
    singular_segments: list[LineSegment] = field(default_factory=list)
    degenerate: str | None = None

    def to_dict(self) -> dict:
        pts = []
        for p in self.points:
            row = [p.x, p.y, p.theta]
            if p.theta_l is not None:
                row.append(p.theta_l)
            pts.append(row)
        return {
            "kind": self.kind,
            "constraint_value": self.constraint_value,
            "points": pts,
            "singular_segments": [s.to_dict() for s in self.singular_segments],
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundaryCurve":
        pts = [BoundaryPoint(*row) if len(row) == 4 else BoundaryPoint(row[0], row[1], row[2]) for row in d["points"]]
        return cls(
            d["kind"],
            d.get("constraint_value"),
            pts,
            [LineSegment.from_dict(s) for s in d.get("singular_segments", [])],
            d.get("degenerate"),
        )

    def csv_rows(self) -> list[list]:
        return [[self.kind, p.x, p.y, p.theta, "" if p.theta_l is None else p.theta_l] for p in self.points]


@dataclass(frozen=True)
class WeightSpec:
    """First-order mixed-sensitivity weight parameters.

    `l` and `h` are the low/high frequency parameters (dimensionless),
    `omega` the corner frequency in rad/s.  The sensitivity role builds
    W_S(s) = (s + omega*h) / (h (s + omega*l)); the complementary role
    builds W_T(s) = h (s + omega*l) / (s + omega*h).
    """

    l: float
    h: float
    omega: float
    role: str

    def __post_init__(self):
        if self.role not in ("sensitivity", "complementary"):
            raise ValueError(f"unknown weight role {self.role!r}")
        if not self.h > 0:
            raise ValueError("weight high-frequency parameter h must be positive")
        if not self.omega > 0:
            raise ValueError("weight corner frequency must be positive")
        if self.role == "sensitivity" and not self.l > 0:
            raise ValueError("sensitivity weight needs l > 0 for a stable pole")
        if self.role == "complementary" and self.l < 0:
            raise ValueError("complementary weight needs l >= 0")

    def to_dict(self) -> dict:
        return {"l": self.l, "h": self.h, "omega": self.omega, "role": self.role}


@dataclass(frozen=True)
class MarginSpec:
    """Frequency-domain margin requirements.

    The phase margin is range-constrained (pm_min, pm_max, in degrees, as
    a pair); the gain margin is lower-bounded only (gm_min in decibels).
    Either part may be omitted, but not both.
    """

    pm_min: float | None = None
    pm_max: float | None = None
    gm_min: float | None = None

    def __post_init__(self):
        if (self.pm_min is None) != (self.pm_max is None):
            raise ValueError("pm_min and pm_max must be given together")
        if self.pm_min is not None and not (0.0 < self.pm_min < self.pm_max < 180.0):
            raise ValueError("phase margin bounds must satisfy 0 < pm_min < pm_max < 180 degrees")
        if self.gm_min is not None and not self.gm_min > 0:
            raise ValueError("gain margin bound must be positive decibels")
        if self.pm_min is None and self.gm_min is None:
            raise ValueError("margin spec is empty")

    @property
    def has_pm(self) -> bool:
        return self.pm_min is not None

    @property
    def has_gm(self) -> bool:
        return self.gm_min is not None

    def to_dict(self) -> dict:
        return {"pm_min": self.pm_min, "pm_max": self.pm_max, "gm_min": self.gm_min}


def weight_tf(spec: WeightSpec) -> RationalTransferFunction:
    """Continuous first-order weight transfer function for `spec`."""
    wl, wh = spec.omega * spec.l, spec.omega * spec.h
    if spec.role == "sensitivity":
        # (s + omega h) / (h (s + omega l)): gain 1/l at DC, 1/h at infinity
        return RationalTransferFunction.continuous((1.0 / spec.h, wh / spec.h), (1.0, wl))
    # h (s + omega l) / (s + omega h): gain l at DC, h at infinity
    return RationalTransferFunction.continuous((spec.h, spec.h * wl), (1.0, wh))


# ---------------------------------------------------------------------------
# linear systems in the gains
# ---------------------------------------------------------------------------


def _unit_point(theta: float) -> complex:
    """e^{j theta}, snapped to exactly +-1 at the real-axis angles.

    Without the snap, sin(pi) ~ 1.2e-16 hides the exact rank drops of the
    real-root angles behind roundoff.
    """
    z = complex(np.cos(theta), np.sin(theta))
    if abs(z.imag) < 1e-15 and abs(abs(z.real) - 1.0) < 1e-15:
        return complex(1.0 if z.real > 0 else -1.0, 0.0)
    return z


def characteristic_columns(G: RationalTransferFunction, z: complex) -> tuple[complex, complex, complex, complex]:
    """Constant and per-gain coefficients of the characteristic equation.

    Returns (c0, cp, ci, cd) with the polynomial-form characteristic
    equation at the point z reading c0 + kp*cp + ki*ci + kd*cd = 0.
    """
    T = G.sample_time
    nv = complex(G.num(z))
    dv = complex(G.den(z))
    zz1 = z * (z - 1.0)
    return dv * zz1, nv * zz1, nv * z * z * T, nv * (z - 1.0) ** 2 / T


def crb_system(G: RationalTransferFunction, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Real 2x3 system A k = b of the stability boundary at angle theta.

    This is the loop-evaluated regrouping (the characteristic equation
    divided by den(z)), so the residual A k - b of any gain vector equals
    the real/imaginary parts of z(z-1) + G(z) (kp z(z-1) + ki T z^2 +
    (kd/T)(z-1)^2) evaluated directly at z = e^{j theta}.
    """
    z = _unit_point(theta)
    dv = complex(G.den(z))
    if abs(dv) <= SINGULAR_RTOL:
        raise NumericsError(f"plant pole too close to the sweep angle theta={theta!r}")
    c0, cp, ci, cd = characteristic_columns(G, z)
    c0, cp, ci, cd = c0 / dv, cp / dv, ci / dv, cd / dv
    A = np.array([[cp.real, ci.real, cd.real], [cp.imag, ci.imag, cd.imag]])
    b = np.array([-c0.real, -c0.imag])
    return A, b


def _crb_system_polyform(G: RationalTransferFunction, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Polynomial-form variant of `crb_system` (no division by den(z))."""
    z = _unit_point(theta)
    c0, cp, ci, cd = characteristic_columns(G, z)
    A = np.array([[cp.real, ci.real, cd.real], [cp.imag, ci.imag, cd.imag]])
    b = np.array([-c0.real, -c0.imag])
    return A, b


def _loop_target_system(G: RationalTransferFunction, theta: float, w: complex) -> tuple[np.ndarray, np.ndarray]:
    """System for C(z) G(z) = w at z = e^{j theta}, in polynomial form.

    Multiplying through by den(z) z(z-1) turns the loop equation into
    num (kp z(z-1) + ki T z^2 + (kd/T)(z-1)^2) = w den z(z-1), which stays
    well defined at plant poles and at the controller poles z = 0, 1.
    """
    z = _unit_point(theta)
    c0, cp, ci, cd = characteristic_columns(G, z)
    # c0 is den * z(z-1); the gain columns already carry num
    A = np.array([[cp.real, ci.real, cd.real], [cp.imag, ci.imag, cd.imag]])
    rhs = w * c0
    b = np.array([rhs.real, rhs.imag])
    return A, b


def _axis_indices(plane: GainPlane) -> tuple[int, int, int]:
    return (
        GAIN_NAMES.index(plane.x_axis),
        GAIN_NAMES.index(plane.y_axis),
        GAIN_NAMES.index(plane.fixed_axis),
    )


def _solve_plane_system(A: np.ndarray, b: np.ndarray, plane: GainPlane):
    """Solve the 2x3 system restricted to the plane.

    Returns ("point", (x, y)), ("line", (point, direction)) for a
    consistent singular system, or ("skip", reason).
    """
    ix, iy, ifix = _axis_indices(plane)
    A2 = A[:, [ix, iy]]
    rhs = b - A[:, ifix] * plane.fixed_gain_value
    s = np.linalg.svd(A2, compute_uv=False)
    if s[0] == 0.0:
        return ("skip", "zero system")
    if s[1] > SINGULAR_RTOL * s[0]:
        sol = np.linalg.solve(A2, rhs)
        return ("point", (float(sol[0]), float(sol[1])))
    aug = np.column_stack([A2, rhs])
    sa = np.linalg.svd(aug, compute_uv=False)
    if sa[1] > SINGULAR_RTOL * sa[0]:
        return ("skip", "singular and inconsistent")
    # rank-one consistent system: a full line of solutions
    particular, *_ = np.linalg.lstsq(A2, rhs, rcond=None)
    if np.linalg.norm(A2 @ particular - rhs) > 1e-6 * max(1.0, float(np.linalg.norm(rhs))):
        return ("skip", "singular and inconsistent")
    _, _, vt = np.linalg.svd(A2)
    direction = vt[-1]
    return ("line", ((float(particular[0]), float(particular[1])), (float(direction[0]), float(direction[1]))))


def _unit_circle_pole_angles(G: RationalTransferFunction) -> list[float]:
    angles = []
    for p in G.poles():
        if abs(abs(p) - 1.0) < 1e-9:
            angles.append(abs(float(np.angle(p))))
    return angles


# ---------------------------------------------------------------------------
# stability boundaries
# ---------------------------------------------------------------------------


def stability_crb(
    G: RationalTransferFunction,
    plane: GainPlane,
    theta_grid: np.ndarray | None = None,
) -> BoundaryCurve:
    """Complex root boundary: gains placing a closed-loop root at e^{j theta}.

    For each sweep angle the characteristic equation is regrouped as a
    2x2 linear system in the plane gains (third gain fixed).  Angles where
    the system is singular but consistent contribute line segments
    (singular frequencies); singular inconsistent angles are skipped.
    """
    if theta_grid is None:
        theta_grid = default_theta_grid()
    theta_grid = np.asarray(theta_grid, dtype=float)
    if theta_grid.size == 0:
        raise ValueError("empty theta grid")
    if G.num.is_zero:
        raise NumericsError("zero plant: stability boundary system is singular everywhere")
    pole_angles = _unit_circle_pole_angles(G)
    points: list[BoundaryPoint] = []
    segments: list[LineSegment] = []
    for theta in theta_grid:
        if pole_angles and min(abs(theta - a) for a in pole_angles) < 1e-9:
            log.debug("skipping theta=%g: plant pole on the unit circle", theta)
            continue
        A, b = _crb_system_polyform(G, theta)
        kind, payload = _solve_plane_system(A, b, plane)
        if kind == "point":
            points.append(BoundaryPoint(payload[0], payload[1], float(theta)))
        elif kind == "line":
            segments.append(LineSegment(payload[0], payload[1], float(theta), "singular frequency"))
        else:
            log.debug("CRB skip at theta=%g: %s", theta, payload)
    return BoundaryCurve(CRB, None, points, segments)


def _line_curve(kind: str, coef_x: float, coef_y: float, const: float, theta: float, scale: float):
    """Build a line a*x + b*y + c = 0 as a boundary curve, or a marker."""
    norm = float(np.hypot(coef_x, coef_y))
    if norm <= 1e-12 * max(scale, 1.0):
        if abs(const) <= 1e-12 * max(scale, 1.0):
            return BoundaryCurve(kind, None, degenerate="satisfied for all gains in this plane")
        return BoundaryCurve(kind, None, degenerate="no gains in this plane place a root here")
    point = (-const * coef_x / norm**2, -const * coef_y / norm**2)
    direction = (-coef_y / norm, coef_x / norm)
    return BoundaryCurve(kind, None, singular_segments=[LineSegment(point, direction, theta)])


def stability_rrb(G: RationalTransferFunction, plane: GainPlane) -> list[BoundaryCurve]:
    """Real root boundaries at z = +1 and z = -1.

    Both come from substituting z = +-1 into the polynomial-form
    characteristic equation, so plants with poles at z = +-1 need no
    evaluation of G there.  For integral structures the z = +1 condition
    is exactly ki = 0; for P/PD structures (no z-1 controller pole) it is
    den(1) + num(1) kp = 0.  The z = -1 condition is
    2 den(-1) + num(-1) (2 kp + T ki + (4/T) kd) = 0, which differs from a
    naive reading of the loop equation by a factor of two on the constant;
    its correctness is settled by root placement, not transcription.
    """
    T = G.sample_time
    structure = plane.resolved_structure
    num_scale = G.num.max_coeff()
    den_scale = G.den.max_coeff()
    n1 = float(G.num(1.0))
    d1 = float(G.den(1.0))
    nm1 = float(G.num(-1.0))
    dm1 = float(G.den(-1.0))
    curves: list[BoundaryCurve] = []

    # z = +1
    if abs(n1) <= 1e-12 * num_scale:
        note = (
            "root pinned at z=+1 regardless of gains (num(1) = den(1) = 0)"
            if abs(d1) <= 1e-12 * den_scale
            else "num(1) = 0: no gains move a root to z=+1"
        )
        curves.append(BoundaryCurve(RRB_PLUS, None, degenerate=note))
    elif "I" in structure:
        coef = {"kp": 0.0, "ki": n1 * T, "kd": 0.0}
        const = coef[plane.fixed_axis] * plane.fixed_gain_value
        curves.append(
            _line_curve(RRB_PLUS, coef[plane.x_axis], coef[plane.y_axis], const, 0.0, abs(n1) * max(T, 1.0))
        )
    else:
        # cancelled characteristic polynomial at z = 1: den(1) + num(1) kp
        coef = {"kp": n1, "ki": 0.0, "kd": 0.0}
        const = d1 + coef[plane.fixed_axis] * plane.fixed_gain_value
        curves.append(_line_curve(RRB_PLUS, coef[plane.x_axis], coef[plane.y_axis], const, 0.0, abs(n1) + abs(d1)))

    # z = -1
    if abs(nm1) <= 1e-12 * num_scale:
        note = (
            "root pinned at z=-1 regardless of gains (num(-1) = den(-1) = 0)"
            if abs(dm1) <= 1e-12 * den_scale
            else "num(-1) = 0: no gains move a root to z=-1"
        )
        curves.append(BoundaryCurve(RRB_MINUS, None, degenerate=note))
    else:
        coef = {"kp": 2.0 * nm1, "ki": T * nm1, "kd": 4.0 * nm1 / T}
        const = 2.0 * dm1 + coef[plane.fixed_axis] * plane.fixed_gain_value
        scale = max(abs(v) for v in coef.values()) + abs(dm1)
        curves.append(_line_curve(RRB_MINUS, coef[plane.x_axis], coef[plane.y_axis], const, float(np.pi), scale))
    return curves


# ---------------------------------------------------------------------------
# frequency-domain boundaries
# ---------------------------------------------------------------------------


def _loop_value(G: RationalTransferFunction, gains: PidGains, theta: float) -> complex:
    from .tfcore import pid_tf  # local import to keep module load cheap

    z = complex(np.cos(theta), np.sin(theta))
    C = pid_tf(gains, G.sample_time)
    dv = complex(G.den(z)) * complex(C.den(z))
    if abs(dv) <= 1e-300:
        raise NumericsError(f"loop pole at theta={theta!r}")
    return complex(G.num(z)) * complex(C.num(z)) / dv


def _target_boundary(
    G: RationalTransferFunction,
    plane: GainPlane,
    w: complex,
    theta_grid: np.ndarray,
    kind: str,
    constraint_value: float,
) -> BoundaryCurve:
    points: list[BoundaryPoint] = []
    for theta in np.asarray(theta_grid, dtype=float):
        A, b = _loop_target_system(G, theta, w)
        status, payload = _solve_plane_system(A, b, plane)
        if status != "point":
            log.debug("%s boundary skip at theta=%g: %s", kind, theta, payload)
            continue
        x, y = payload
        gains = plane.gains_at(x, y)
        try:
            residual = abs(_loop_value(G, gains, theta) - w)
        except NumericsError:
            continue
        if residual > 1e-9 * max(1.0, abs(w)):
            log.debug("%s boundary residual %.3e at theta=%g, point dropped", kind, residual, theta)
            continue
        points.append(BoundaryPoint(x, y, float(theta)))
    return BoundaryCurve(kind, constraint_value, points)


def pm_boundary(
    G: RationalTransferFunction,
    plane: GainPlane,
    pm: float,
    theta_grid: np.ndarray | None = None,
) -> BoundaryCurve:
    """Phase-margin boundary: at each theta, L(e^{j theta}) = e^{j(pm - 180deg)}.

    Every emitted point makes theta a unity-gain crossover whose measured
    phase margin equals `pm` (degrees).
    """
    if not 0.0 < pm < 180.0:
        raise ValueError("phase margin must lie in (0, 180) degrees")
    if theta_grid is None:
        theta_grid = default_theta_grid()
    rad = np.radians(pm)
    w = complex(-np.cos(rad), -np.sin(rad))
    return _target_boundary(G, plane, w, theta_grid, PM, float(pm))


def gm_boundary(
    G: RationalTransferFunction,
    plane: GainPlane,
    gm_db: float,
    theta_grid: np.ndarray | None = None,
) -> BoundaryCurve:
    """Gain-margin boundary: at each theta, L(e^{j theta}) = -10^{-gm/20}.

    gm_db = 0 degenerates to the critical point L = -1, i.e. the CRB.
    """
    if gm_db < 0.0:
        raise ValueError("gain margin bound must be non-negative decibels")
    if theta_grid is None:
        theta_grid = default_theta_grid()
    w = complex(-(10.0 ** (-gm_db / 20.0)), 0.0)
    return _target_boundary(G, plane, w, theta_grid, GM, float(gm_db))


# ---------------------------------------------------------------------------
# mixed sensitivity
# ---------------------------------------------------------------------------


def ms_magnitude_solutions(ws_mag: float, wt_mag: float, theta_l: float) -> list[float]:
    """Nonnegative loop magnitudes solving |W_S| + |W_T| x = |1 + x e^{j theta_l}|.

    Squaring gives x^2 (1 - |W_T|^2) - 2 x (|W_S||W_T| - cos theta_l)
    - (|W_S|^2 - 1) = 0 with discriminant
    Delta = cos^2 theta_l + |W_S|^2 + |W_T|^2 - 2 |W_S||W_T| cos theta_l - 1;
    Delta < 0 means no boundary at this phase.  The |W_T| = 1 case
    degenerates to a linear equation.  Every returned root is checked
    against the unsquared equation.
    """
    if ws_mag < 0 or wt_mag < 0 or not np.isfinite(ws_mag) or not np.isfinite(wt_mag):
        raise ValueError("weight magnitudes must be finite and nonnegative")
    c = np.cos(theta_l)
    delta = c * c + ws_mag * ws_mag + wt_mag * wt_mag - 2.0 * ws_mag * wt_mag * c - 1.0
    if delta < 0.0:
        return []
    a = 1.0 - wt_mag * wt_mag
    if abs(a) < 1e-12:
        slope = 2.0 * (ws_mag * wt_mag - c)
        if abs(slope) < 1e-15:
            return []
        candidates = [(1.0 - ws_mag * ws_mag) / slope]
    else:
        root = float(np.sqrt(delta))
        candidates = [(ws_mag * wt_mag - c + root) / a, (ws_mag * wt_mag - c - root) / a]
    out = []
    for x in candidates:
        if x < 0.0:
            continue
        residual = ws_mag + wt_mag * x - abs(1.0 + x * np.exp(1j * theta_l))
        if abs(residual) < _MS_RESIDUAL_BOUND:
            out.append(float(x))
    out = sorted(set(out))
    return out


def _ms_backsubstitute(plane: GainPlane, G_val: complex, L: complex, theta: float, T: float):
    """Map a target loop value L at angle theta to plane gains.

    PD and PI use the closed-form inversion of the controller's real and
    imaginary parts; a nonzero fixed third gain goes through the generic
    2x2 system.
    """
    structure = plane.resolved_structure
    K = L / G_val
    s, c = np.sin(theta), np.cos(theta)
    if structure == "PD" and {plane.x_axis, plane.y_axis} == {"kp", "kd"}:
        kd = T * K.imag / s
        kp = K.real - K.imag * (1.0 - c) / s
        return {"kp": kp, "kd": kd}
    if structure == "PI" and {plane.x_axis, plane.y_axis} == {"kp", "ki"}:
        ki = -K.imag * (2.0 - 2.0 * c) / (T * s)
        kp = K.real + K.imag * (1.0 - c) / s
        return {"kp": kp, "ki": ki}
    return None


def _ms_solutions_vectorized(ws_mag: float, wt_mag: float, thl: np.ndarray) -> np.ndarray:
    """|L| candidates for a whole theta_l grid; NaN marks absent roots.

    Returns shape (n, 2) with columns [smaller root, larger root]; the
    formulas match `ms_magnitude_solutions` exactly.
    """
    c = np.cos(thl)
    delta = c * c + ws_mag * ws_mag + wt_mag * wt_mag - 2.0 * ws_mag * wt_mag * c - 1.0
    a = 1.0 - wt_mag * wt_mag
    out = np.full((thl.size, 2), np.nan)
    if abs(a) < 1e-12:
        slope = 2.0 * (ws_mag * wt_mag - c)
        ok = np.abs(slope) >= 1e-15
        out[ok, 1] = (1.0 - ws_mag * ws_mag) / slope[ok]
    else:
        ok = delta >= 0.0
        sd = np.sqrt(np.where(ok, delta, 0.0))
        lo = (ws_mag * wt_mag - c - sd) / a
        hi = (ws_mag * wt_mag - c + sd) / a
        out[ok, 0] = np.minimum(lo, hi)[ok]
        out[ok, 1] = np.maximum(lo, hi)[ok]
    out[out < 0.0] = np.nan
    # unsquared-equation filter
    for col in (0, 1):
        x = out[:, col]
        ok = ~np.isnan(x)
        resid = ws_mag + wt_mag * x[ok] - np.abs(1.0 + x[ok] * np.exp(1j * thl[ok]))
        bad = np.abs(resid) >= _MS_RESIDUAL_BOUND
        idx = np.flatnonzero(ok)
        out[idx[bad], col] = np.nan
    return out


def ms_boundary(
    G: RationalTransferFunction,
    weights: tuple[RationalTransferFunction, RationalTransferFunction],
    plane: GainPlane,
    theta_grid: np.ndarray | None = None,
    theta_l_grid: np.ndarray | None = None,
) -> list[BoundaryCurve]:
    """Mixed-sensitivity boundary curves, one closed curve per frequency.

    For each sweep angle theta the weight and plant responses fix the
    magnitudes in the boundary equation; sweeping the loop phase theta_l
    and solving for |L| yields loop values L = |L| e^{j theta_l} that are
    mapped back to plane gains.  All curves are returned tagged by theta;
    which curve is the active boundary is left to the region oracle.
    """
    ws_tf, wt_tf = weights
    for w_tf in (ws_tf, wt_tf):
        if not w_tf.is_discrete or w_tf.sample_time != G.sample_time:
            raise ValueError("weights must be discretized at the plant sample time")
    if theta_grid is None:
        theta_grid = default_ms_theta_grid()
    if theta_l_grid is None:
        theta_l_grid = default_theta_l_grid()
    T = G.sample_time
    structure = plane.resolved_structure
    closed_form = structure in ("PD", "PI")
    thl = np.asarray(theta_l_grid, dtype=float)
    curves: list[BoundaryCurve] = []
    for theta in np.asarray(theta_grid, dtype=float):
        if closed_form and abs(np.sin(theta)) < _SIN_TOLERANCE:
            continue
        try:
            g_val = tf_eval_unit_circle(G, theta)
            ws_mag = abs(tf_eval_unit_circle(ws_tf, theta))
            wt_mag = abs(tf_eval_unit_circle(wt_tf, theta))
        except NumericsError:
            log.debug("MS boundary: skipping theta=%g (pole on the unit circle)", theta)
            continue
        if abs(g_val) < 1e-12:
            log.debug("MS boundary: skipping theta=%g (plant gain ~ 0)", theta)
            continue
        mags = _ms_solutions_vectorized(ws_mag, wt_mag, thl)
        if closed_form:
            branches = _ms_points_closed_form(plane, g_val, mags, thl, theta, T, ws_mag, wt_mag)
        else:
            branches = _ms_points_generic(G, plane, g_val, mags, thl, theta, ws_mag, wt_mag)
        upper, lower = branches
        pts = upper + lower[::-1]
        if pts:
            curves.append(BoundaryCurve(MS, None, pts))
    return curves


def _ms_residual_ok(g_val, xs, ys, plane, thl, theta, T, ws_mag, wt_mag):
    """Vectorized check of the unsquared boundary equation at the
    reconstructed loop values."""
    z = _unit_point(theta)
    zi = z * T / (z - 1.0)
    zd = (z - 1.0) / (z * T)
    coef = {"kp": 1.0 + 0.0j, "ki": zi, "kd": zd}
    cv = (
        coef[plane.x_axis] * xs
        + coef[plane.y_axis] * ys
        + coef[plane.fixed_axis] * plane.fixed_gain_value
    )
    L = cv * g_val
    resid = ws_mag + wt_mag * np.abs(L) - np.abs(1.0 + L)
    return np.abs(resid) <= _MS_RESIDUAL_BOUND


def _ms_points_closed_form(plane, g_val, mags, thl, theta, T, ws_mag, wt_mag):
    s, c = np.sin(theta), np.cos(theta)
    upper: list[BoundaryPoint] = []
    lower: list[BoundaryPoint] = []
    for col, bucket in ((1, upper), (0, lower)):
        x_mag = mags[:, col]
        ok = ~np.isnan(x_mag)
        if not ok.any():
            continue
        L = x_mag[ok] * np.exp(1j * thl[ok])
        K = L / g_val
        if plane.resolved_structure == "PD":
            other = T * K.imag / s
            kp = K.real - K.imag * (1.0 - c) / s
        else:  # PI
            other = -K.imag * (2.0 - 2.0 * c) / (T * s)
            kp = K.real + K.imag * (1.0 - c) / s
        name = "kd" if plane.resolved_structure == "PD" else "ki"
        vals = {name: other, "kp": kp}
        xs, ys = vals[plane.x_axis], vals[plane.y_axis]
        good = _ms_residual_ok(g_val, xs, ys, plane, thl[ok], theta, T, ws_mag, wt_mag)
        for x, y, tl in zip(xs[good], ys[good], thl[ok][good]):
            bucket.append(BoundaryPoint(float(x), float(y), float(theta), float(tl)))
    return upper, lower


def _ms_points_generic(G, plane, g_val, mags, thl, theta, ws_mag, wt_mag):
    T = G.sample_time
    upper: list[BoundaryPoint] = []
    lower: list[BoundaryPoint] = []
    for col, bucket in ((1, upper), (0, lower)):
        for tl, x_mag in zip(thl, mags[:, col]):
            if np.isnan(x_mag):
                continue
            L = x_mag * complex(np.cos(tl), np.sin(tl))
            A, b = _loop_target_system(G, theta, L)
            status, payload = _solve_plane_system(A, b, plane)
            if status != "point":
                continue
            x, y = payload
            if not _ms_residual_ok(g_val, np.array([x]), np.array([y]), plane, np.array([tl]), theta, T, ws_mag, wt_mag)[0]:
                continue
            bucket.append(BoundaryPoint(x, y, float(theta), float(tl)))
    return upper, lower
