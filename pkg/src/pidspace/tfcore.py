"""Polynomials, rational transfer functions and discretization.

This is the numeric substrate for the boundary, region and analyzer
modules: Horner evaluation, companion-matrix root finding, evaluation on
the unit circle, exact zero-order-hold discretization and the digital PID
transfer function.

Conventions used throughout the package:
  * polynomial coefficients are real and stored highest degree first,
  * denominators of rational transfer functions are normalized monic,
  * discrete-time systems carry their sampling time T in seconds,
  * the digital PID is C(z) = kp + ki*T*z/(z-1) + (kd/T)*(z-1)/z, so the
    gains keep their physical meaning across sample times.  At T = 1 s
    this reduces to the gain-absorbed textbook form
    C(z) = kp + ki*z/(z-1) + kd*(z-1)/z.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from .errors import NumericsError

CONTINUOUS = "continuous"
DISCRETE = "discrete"

STRUCTURES = ("P", "PI", "PD", "PID")

# |den(e^{j theta})| below this means "pole on the unit circle" for the
# monic denominators used everywhere in the package.
POLE_TOLERANCE = 1e-12

_ROOT_RESIDUAL_BOUND = 1e-8
_POLISH_TOLERANCE = 1e-10


@dataclass(frozen=True)
class Polynomial:
    """Real-coefficient polynomial, highest degree first.

    The zero polynomial is the single coefficient 0; exact leading zeros
    are stripped on construction so the leading coefficient of any
    nonzero polynomial is nonzero.
    """

    coeffs: tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValueError("empty coefficient list (zero polynomial is (0.0,))")
        c = tuple(float(x) for x in self.coeffs)
        for x in c:
            if not np.isfinite(x):
                raise ValueError("non-finite polynomial coefficient")
        i = 0
        while i < len(c) - 1 and c[i] == 0.0:
            i += 1
        object.__setattr__(self, "coeffs", c[i:])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def __call__(self, z):
        """Horner evaluation; `z` may be scalar or ndarray, real or complex."""
        return np.polyval(np.asarray(self.coeffs), z)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(tuple(np.polyadd(self.coeffs, other.coeffs)))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(tuple(np.polysub(self.coeffs, other.coeffs)))

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(tuple(np.polymul(self.coeffs, other.coeffs)))

    def scaled(self, factor: float) -> "Polynomial":
        return Polynomial(tuple(factor * c for c in self.coeffs))

    def max_coeff(self) -> float:
        return max(abs(c) for c in self.coeffs)


def poly_eval(p: Polynomial, z: complex) -> complex:
    """Evaluate `p` at the (possibly complex) point `z`."""
    return complex(p(z))


def _companion(coeffs: np.ndarray) -> np.ndarray:
    monic = coeffs / coeffs[0]
    n = len(monic) - 1
    m = np.zeros((n, n))
    m[0, :] = -monic[1:]
    m[1:, :-1] = np.eye(n - 1)
    return m


def _newton_polish(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """A few Newton steps per root, kept only when the residual improves.

    LAPACK returns exact conjugate pairs for the real companion matrix and
    Newton's map commutes with conjugation for real coefficients, so the
    pairing survives polishing.
    """
    deriv = np.polyder(coeffs)
    out = roots.copy()
    for _ in range(3):
        pv = np.polyval(coeffs, out)
        if np.all(np.abs(pv) <= _POLISH_TOLERANCE):
            break
        dv = np.polyval(deriv, out)
        step = np.where(np.abs(dv) > 0, pv / np.where(dv == 0, 1, dv), 0)
        cand = out - step
        better = np.abs(np.polyval(coeffs, cand)) < np.abs(pv)
        out = np.where(better, cand, out)
    return out


def poly_roots(p: Polynomial) -> list[complex]:
    """All roots of `p` with multiplicity, via balanced companion eigenvalues.

    Roots are polished with Newton iterations and verified against the
    normalized residual bound |p(r)| / (max|c| * max(1, |r|)^deg) <= 1e-8.
    """
    if p.degree < 1:
        raise ValueError("no roots: polynomial has degree 0")
    coeffs = np.asarray(p.coeffs)
    # eigvals of the real companion matrix (LAPACK balances internally)
    raw = np.linalg.eigvals(_companion(coeffs))
    roots = _newton_polish(coeffs, raw)
    scale = p.max_coeff()
    resid = np.abs(np.polyval(coeffs, roots)) / (
        scale * np.maximum(1.0, np.abs(roots)) ** p.degree
    )
    if np.any(resid > _ROOT_RESIDUAL_BOUND):
        worst = float(np.max(resid))
        raise NumericsError(
            f"root finding did not converge: worst normalized residual "
            f"{worst:.3e} exceeds {_ROOT_RESIDUAL_BOUND:.0e} after polishing"
        )
    order = np.lexsort((np.imag(roots), np.real(roots)))
    return [complex(r) for r in roots[order]]


@dataclass(frozen=True)
class RationalTransferFunction:
    """Ratio of real-coefficient polynomials in s (continuous) or z (discrete).

    The denominator is normalized monic on construction; `sample_time` is
    required (and positive) exactly when the domain is discrete.
    """

    num: Polynomial
    den: Polynomial
    domain: str = CONTINUOUS
    sample_time: float | None = None

    def __post_init__(self):
        if self.domain not in (CONTINUOUS, DISCRETE):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.den.is_zero:
            raise ValueError("denominator is the zero polynomial")
        if self.domain == DISCRETE:
            if self.sample_time is None or not self.sample_time > 0:
                raise ValueError("discrete transfer function needs sample_time > 0")
        elif self.sample_time is not None:
            raise ValueError("continuous transfer function must not carry a sample time")
        lead = self.den.coeffs[0]
        if lead != 1.0:
            object.__setattr__(self, "num", self.num.scaled(1.0 / lead))
            object.__setattr__(self, "den", self.den.scaled(1.0 / lead))

    @classmethod
    def continuous(cls, num, den) -> "RationalTransferFunction":
        return cls(Polynomial(tuple(num)), Polynomial(tuple(den)), CONTINUOUS)

    @classmethod
    def discrete(cls, num, den, sample_time: float) -> "RationalTransferFunction":
        return cls(Polynomial(tuple(num)), Polynomial(tuple(den)), DISCRETE, sample_time)

    @property
    def is_discrete(self) -> bool:
        return self.domain == DISCRETE

    @property
    def is_proper(self) -> bool:
        return self.num.degree <= self.den.degree

    def __call__(self, z):
        return self.num(z) / self.den(z)

    def poles(self) -> list[complex]:
        if self.den.degree < 1:
            return []
        return poly_roots(self.den)

    def zeros(self) -> list[complex]:
        if self.num.degree < 1 or self.num.is_zero:
            return []
        return poly_roots(self.num)

    def with_sample_time(self, sample_time: float) -> "RationalTransferFunction":
        """Same coefficients, re-tagged sample time (discrete only)."""
        if not self.is_discrete:
            raise ValueError("with_sample_time applies to discrete transfer functions")
        return replace(self, sample_time=float(sample_time))

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "sample_time": self.sample_time,
            "num": list(self.num.coeffs),
            "den": list(self.den.coeffs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RationalTransferFunction":
        return cls(
            Polynomial(tuple(d["num"])),
            Polynomial(tuple(d["den"])),
            d["domain"],
            d.get("sample_time"),
        )


def series(a: RationalTransferFunction, b: RationalTransferFunction) -> RationalTransferFunction:
    """Cascade a*b; domains (and sample times, when discrete) must match."""
    if a.domain != b.domain or a.sample_time != b.sample_time:
        raise ValueError("cannot cascade systems from different domains or sample times")
    return RationalTransferFunction(a.num * b.num, a.den * b.den, a.domain, a.sample_time)


def tf_eval_unit_circle(G: RationalTransferFunction, theta: float) -> complex:
    """Evaluate a discrete G at z = e^{j theta} on the unit circle."""
    if not G.is_discrete:
        raise ValueError("unit-circle evaluation needs a discrete transfer function")
    z = complex(np.cos(theta), np.sin(theta))
    dv = complex(G.den(z))
    if abs(dv) <= POLE_TOLERANCE:
        raise NumericsError(f"pole on unit circle at theta={theta!r}")
    value = complex(G.num(z)) / dv
    if not (np.isfinite(value.real) and np.isfinite(value.imag)):
        raise NumericsError(f"non-finite frequency response at theta={theta!r}")
    return value


def c2d_zoh(G: RationalTransferFunction, T: float) -> RationalTransferFunction:
    """Exact zero-order-hold discretization of a proper continuous G.

    Uses the state-space realization and the augmented matrix exponential,
    which handles repeated poles (e.g. a double integrator) exactly.
    Poles map as z_i = e^{p_i T} and the DC gain is preserved whenever
    s = 0 is not a pole.
    """
    if G.is_discrete:
        raise ValueError("plant is already discrete")
    if not T > 0:
        raise ValueError("sample time must be positive")
    if not G.is_proper:
        raise ValueError("improper transfer function: numerator degree exceeds denominator degree")
    if G.den.degree == 0:
        # static gain: ZOH is the identity map
        return RationalTransferFunction(G.num, G.den, DISCRETE, float(T))
    numd, dend, _ = signal.cont2discrete((list(G.num.coeffs), list(G.den.coeffs)), T, method="zoh")
    numd = np.atleast_1d(np.squeeze(numd))
    return RationalTransferFunction.discrete(numd, np.atleast_1d(dend), float(T))


@dataclass(frozen=True)
class PidGains:
    """Digital PID gains with a structure tag (P / PI / PD / PID).

    Gains not covered by the structure must be exactly zero.
    """

    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    structure: str = "PID"

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown controller structure {self.structure!r}")
        if "I" not in self.structure and self.ki != 0.0:
            raise ValueError(f"{self.structure} structure requires ki = 0")
        if "D" not in self.structure and self.kd != 0.0:
            raise ValueError(f"{self.structure} structure requires kd = 0")

    def as_dict(self) -> dict:
        return {"kp": self.kp, "ki": self.ki, "kd": self.kd, "structure": self.structure}


def pid_tf(gains: PidGains, T: float) -> RationalTransferFunction:
    """Transfer function of the digital PID at sample time T.

    C(z) = kp + ki*T*z/(z-1) + (kd/T)*(z-1)/z over the common denominator
    z(z-1); poles that are structurally absent (the z-1 pole for P/PD, the
    z pole for P/PI) are cancelled, so e.g. a PD controller has
    denominator z.
    """
    if not T > 0:
        raise ValueError("sample time must be positive")
    kp, ki_t, kd_t = gains.kp, gains.ki * T, gains.kd / T
    s = gains.structure
    if s == "P":
        num, den = (kp,), (1.0,)
    elif s == "PI":
        num, den = (kp + ki_t, -kp), (1.0, -1.0)
    elif s == "PD":
        num, den = (kp + kd_t, -kd_t), (1.0, 0.0)
    else:  # PID
        num, den = (kp + ki_t + kd_t, -(kp + 2.0 * kd_t), kd_t), (1.0, -1.0, 0.0)
    return RationalTransferFunction.discrete(num, den, float(T))
