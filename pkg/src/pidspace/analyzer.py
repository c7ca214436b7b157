"""Independent verification oracle for a gain point.

Given a discrete plant and PID gains this module computes the closed-loop
characteristic polynomial and poles, locates gain/phase crossovers by a
dense frequency sweep with bisection refinement, evaluates the
robust-performance supremum of |W_S S| + |W_T T|, and simulates the
unity-feedback loop with direct-form difference equations.  The region
module delegates all membership decisions to these functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import NumericsError, PreconditionError
from .tfcore import PidGains, Polynomial, RationalTransferFunction, pid_tf, poly_roots

# spectral radius must stay below 1 - STABILITY_MARGIN to count as stable
STABILITY_MARGIN = 1e-9

_DEFAULT_MARGIN_POINTS = 8192
_DEFAULT_RP_POINTS = 4096
_BISECTION_WIDTH = 1e-9


def _wrap180(deg: float) -> float:
    w = (deg + 180.0) % 360.0 - 180.0
    return 180.0 if w == -180.0 else w


def loop_polynomials(G: RationalTransferFunction, gains: PidGains) -> tuple[Polynomial, Polynomial]:
    """Numerator and denominator of the loop gain L = C G in polynomial form."""
    C = pid_tf(gains, G.sample_time)
    return C.num * G.num, C.den * G.den


def closed_loop_charpoly(G: RationalTransferFunction, gains: PidGains) -> Polynomial:
    """Characteristic polynomial den_L + num_L of the unity-feedback loop.

    The controller polynomials already have structurally absent poles
    cancelled (see `pid_tf`), so a PD loop contributes no spurious root at
    z = 1 and a PI loop none at z = 0.
    """
    num_l, den_l = loop_polynomials(G, gains)
    char = den_l + num_l
    if char.is_zero:
        raise NumericsError("degenerate closed loop: characteristic polynomial is zero")
    return char


def closed_loop_poles(G: RationalTransferFunction, gains: PidGains) -> list[complex]:
    char = closed_loop_charpoly(G, gains)
    if char.degree < 1:
        return []
    return poly_roots(char)


def spectral_radius(G: RationalTransferFunction, gains: PidGains) -> float:
    poles = closed_loop_poles(G, gains)
    return max((abs(p) for p in poles), default=0.0)


@dataclass
class MarginReport:
    """Crossover lists plus the worst-case (minimum) margins."""

    gain_crossovers: list[tuple[float, float]]   # (theta, pm in degrees)
    phase_crossovers: list[tuple[float, float]]  # (theta, gm in dB)
    worst_pm: float | None
    worst_gm: float | None
    pm_reason: str = ""
    gm_reason: str = ""


def margins(
    G: RationalTransferFunction,
    gains: PidGains,
    n_points: int = _DEFAULT_MARGIN_POINTS,
) -> MarginReport:
    """Gain and phase crossovers of L = C G from a dense sweep over (0, pi).

    Gain crossovers are sign changes of |L| - 1, phase crossovers are
    zeros of Im L with Re L < 0 (equivalently the unwrapped phase crossing
    an odd multiple of 180 deg); both are refined by bisection to an angle
    resolution of 1e-9.  PM = 180 deg + arg L at each gain crossover,
    GM = -20 log10 |L| at each phase crossover; the reported worst-case
    values are the minima.
    """
    num_l, den_l = loop_polynomials(G, gains)
    nc = np.asarray(num_l.coeffs)
    dc = np.asarray(den_l.coeffs)

    def loop_at(theta: float) -> complex:
        z = complex(np.cos(theta), np.sin(theta))
        dv = np.polyval(dc, z)
        if abs(dv) <= 1e-12:
            raise NumericsError(f"loop pole on the unit circle at theta={theta!r}")
        return np.polyval(nc, z) / dv

    th = np.linspace(0.0, np.pi, n_points + 2)[1:-1]
    z = np.exp(1j * th)
    dv = np.polyval(dc, z)
    valid = np.abs(dv) > 1e-12
    L = np.full_like(z, np.nan, dtype=complex)
    L[valid] = np.polyval(nc, z[valid]) / dv[valid]

    gain_thetas: list[float] = []
    f = np.abs(L) - 1.0
    exact = valid & (np.abs(f) <= 1e-12)
    gain_thetas.extend(float(t) for t in th[exact])
    ok = valid[:-1] & valid[1:] & ~exact[:-1] & ~exact[1:]
    flips = ok & (np.sign(f[:-1]) != np.sign(f[1:]))
    for i in np.flatnonzero(flips):
        gain_thetas.append(_bisect(lambda t: abs(loop_at(t)) - 1.0, th[i], th[i + 1]))

    phase_crossings: list[tuple[float, float]] = []
    for endpoint_theta, zr in ((0.0, 1.0), (float(np.pi), -1.0)):
        dv0 = float(np.polyval(dc, zr))
        if abs(dv0) > 1e-12:
            l0 = float(np.polyval(nc, zr)) / dv0
            if l0 < 0.0:
                phase_crossings.append((endpoint_theta, -20.0 * math.log10(abs(l0))))
    im = L.imag
    re = L.real
    exact_im = valid & (im == 0.0) & (re < 0.0)
    for t in th[exact_im]:
        mag = abs(loop_at(float(t)))
        phase_crossings.append((float(t), -20.0 * math.log10(mag)))
    ok = valid[:-1] & valid[1:] & ~exact_im[:-1] & ~exact_im[1:]
    flips = ok & (np.sign(im[:-1]) != np.sign(im[1:])) & ((re[:-1] < 0.0) | (re[1:] < 0.0))
    for i in np.flatnonzero(flips):
        tc = _bisect(lambda t: loop_at(t).imag, th[i], th[i + 1])
        lc = loop_at(tc)
        if lc.real < 0.0:
            phase_crossings.append((tc, -20.0 * math.log10(abs(lc))))

    gain_crossovers = []
    for t in _dedupe(sorted(gain_thetas)):
        lc = loop_at(t)
        pm = _wrap180(180.0 + math.degrees(math.atan2(lc.imag, lc.real)))
        gain_crossovers.append((t, pm))
    phase_crossovers = sorted(_dedupe_pairs(phase_crossings))

    worst_pm = min((pm for _, pm in gain_crossovers), default=None)
    worst_gm = min((gm for _, gm in phase_crossovers), default=None)
    return MarginReport(
        gain_crossovers,
        phase_crossovers,
        worst_pm,
        worst_gm,
        pm_reason="" if gain_crossovers else "no gain crossover",
        gm_reason="" if phase_crossovers else "no phase crossover (gain margin infinite)",
    )


def _bisect(func, lo: float, hi: float) -> float:
    flo = func(lo)
    for _ in range(200):
        if hi - lo < _BISECTION_WIDTH:
            break
        mid = 0.5 * (lo + hi)
        fmid = func(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0.0) == (fmid < 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _dedupe(values: list[float], tol: float = 1e-9) -> list[float]:
    out: list[float] = []
    for v in values:
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


def _dedupe_pairs(pairs: list[tuple[float, float]], tol: float = 1e-9) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for t, v in sorted(pairs):
        if not out or t - out[-1][0] > tol:
            out.append((t, v))
    return out


@dataclass
class RobustPerformance:
    supremum: float
    arg_theta: float

    @property
    def infinite(self) -> bool:
        return math.isinf(self.supremum)


def robust_performance(
    G: RationalTransferFunction,
    gains: PidGains,
    weights: tuple[RationalTransferFunction, RationalTransferFunction],
    n_points: int = _DEFAULT_RP_POINTS,
) -> RobustPerformance:
    """Supremum over frequency of |W_S S| + |W_T T| with S = 1/(1+L), T = L/(1+L).

    Everything is evaluated in polynomial form: S = den_L / charpoly and
    T = num_L / charpoly, so plant poles on the unit circle (where S has a
    zero but L blows up) are handled exactly, including the endpoints
    z = +-1.  A characteristic-polynomial zero on the circle makes the
    supremum infinite.
    """
    ws_tf, wt_tf = weights
    for w_tf in (ws_tf, wt_tf):
        if not w_tf.is_discrete or w_tf.sample_time != G.sample_time:
            raise ValueError("weights must be discretized at the plant sample time")
    num_l, den_l = loop_polynomials(G, gains)
    char = den_l + num_l
    if char.is_zero:
        raise NumericsError("degenerate closed loop: characteristic polynomial is zero")
    ch = np.asarray(char.coeffs)
    nl = np.asarray(num_l.coeffs)
    dl = np.asarray(den_l.coeffs)
    ch_floor = 1e-12 * char.max_coeff()

    def rp_at(theta_arr):
        zv = np.exp(1j * np.asarray(theta_arr))
        chv = np.polyval(ch, zv)
        ws = np.polyval(ws_tf.num.coeffs, zv) / np.polyval(ws_tf.den.coeffs, zv)
        wt = np.polyval(wt_tf.num.coeffs, zv) / np.polyval(wt_tf.den.coeffs, zv)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (np.abs(ws * np.polyval(dl, zv)) + np.abs(wt * np.polyval(nl, zv))) / np.abs(chv)
        return val, np.abs(chv)

    th = np.linspace(0.0, np.pi, n_points)
    values, ch_mag = rp_at(th)
    on_pole = ch_mag <= ch_floor
    if np.any(on_pole):
        return RobustPerformance(math.inf, float(th[int(np.argmax(on_pole))]))
    i = int(np.argmax(values))
    lo = th[max(i - 1, 0)]
    hi = th[min(i + 1, len(th) - 1)]
    theta_star, sup = _golden_max(lambda t: float(rp_at([t])[0][0]), lo, hi)
    if sup < values[i]:
        theta_star, sup = float(th[i]), float(values[i])
    return RobustPerformance(sup, theta_star)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(func, lo: float, hi: float) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(200):
        if b - a < 1e-12:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = func(d)
    x = c if fc > fd else d
    return float(x), float(max(fc, fd))


@dataclass
class SimResult:
    """Closed-loop time response sampled at the plant sample time."""

    time: np.ndarray
    reference: np.ndarray
    output: np.ndarray
    error: np.ndarray
    control: np.ndarray
    sample_time: float
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sample_time": self.sample_time,
            "time": self.time.tolist(),
            "reference": self.reference.tolist(),
            "output": self.output.tolist(),
            "error": self.error.tolist(),
            "control": self.control.tolist(),
            "warnings": list(self.warnings),
        }

    def csv_rows(self):
        yield ["time", "reference", "output", "error", "control"]
        for row in zip(self.time, self.reference, self.output, self.error, self.control):
            yield [f"{v:.12g}" for v in row]


def _zinv_coeffs(num: Polynomial, den: Polynomial) -> tuple[np.ndarray, np.ndarray]:
    """(b, a) arrays in z^{-1} ordering for scipy's direct-form filter."""
    pad = den.degree - num.degree
    if pad < 0:
        raise NumericsError("improper closed-loop transfer function in simulation")
    b = np.concatenate([np.zeros(pad), np.asarray(num.coeffs)])
    return b, np.asarray(den.coeffs)


def simulate_closed_loop(
    G: RationalTransferFunction,
    gains: PidGains,
    reference,
    n_steps: int | None = None,
    force: bool = False,
) -> SimResult:
    """Simulate the unity-feedback loop driven by `reference`.

    The output, error and control sequences come from direct-form
    difference equations of the closed-loop polynomial forms
    y = (num_L / charpoly) r and u = (num_C den_G / charpoly) r, with
    e = r - y.  An unstable loop raises unless `force` is set, in which
    case the simulation proceeds and a divergence warning is attached.
    """
    r = np.asarray(reference, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("reference must be a non-empty 1-D sample sequence")
    if not np.all(np.isfinite(r)):
        raise ValueError("reference contains non-finite samples")
    if n_steps is not None:
        if n_steps > r.size:
            raise ValueError("n_steps exceeds the reference length")
        r = r[:n_steps]

    num_l, den_l = loop_polynomials(G, gains)
    char = den_l + num_l
    if char.is_zero:
        raise NumericsError("degenerate closed loop: characteristic polynomial is zero")
    rho = max((abs(p) for p in poly_roots(char)), default=0.0) if char.degree >= 1 else 0.0
    warn: list[str] = []
    if rho >= 1.0:
        if not force:
            raise PreconditionError(
                f"closed loop is not asymptotically stable (spectral radius {rho:.6f}); "
                "pass force=True to simulate anyway"
            )
        warn.append(f"unstable closed loop (spectral radius {rho:.6f}): response may diverge")

    C = pid_tf(gains, G.sample_time)
    by, a = _zinv_coeffs(num_l, char)
    bu, _ = _zinv_coeffs(C.num * G.den, char)
    y = lfilter(by, a, r)
    u = lfilter(bu, a, r)
    t = np.arange(r.size) * G.sample_time
    return SimResult(t, r, y, r - y, u, G.sample_time, warn)


@dataclass
class AnalysisReport:
    """Full oracle output for one gain point."""

    gains: PidGains
    sample_time: float
    char_poly: Polynomial
    poles: list[complex]
    spectral_radius: float
    gain_crossovers: list[tuple[float, float]]
    phase_crossovers: list[tuple[float, float]]
    worst_pm: float | None
    worst_gm: float | None
    rp_supremum: float | None
    rp_arg_theta: float | None
    flags: dict[str, dict]
    frequency_response: dict | None = None

    @property
    def all_satisfied(self) -> bool:
        return all(f["satisfied"] for f in self.flags.values())

    def to_dict(self) -> dict:
        rp_sup = self.rp_supremum
        rp_infinite = rp_sup is not None and math.isinf(rp_sup)
        return {
            "gains": self.gains.as_dict(),
            "sample_time": self.sample_time,
            "char_poly": list(self.char_poly.coeffs),
            "poles": [[p.real, p.imag] for p in self.poles],
            "spectral_radius": self.spectral_radius,
            "gain_crossovers": [[t, pm] for t, pm in self.gain_crossovers],
            "phase_crossovers": [[t, gm] for t, gm in self.phase_crossovers],
            "worst_pm": self.worst_pm,
            "worst_gm": self.worst_gm,
            "rp_supremum": None if rp_infinite else rp_sup,
            "rp_infinite": rp_infinite,
            "rp_arg_theta": self.rp_arg_theta,
            "flags": self.flags,
            "frequency_response": self.frequency_response,
        }


def _frequency_response_block(G, gains, weights, n: int = 512) -> dict:
    num_l, den_l = loop_polynomials(G, gains)
    char = den_l + num_l
    th = np.linspace(0.0, np.pi, n + 2)[1:-1]
    z = np.exp(1j * th)
    dv = np.polyval(den_l.coeffs, z)
    nv = np.polyval(num_l.coeffs, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.where(np.abs(dv) > 1e-300, nv / dv, np.inf)
        mag_db = 20.0 * np.log10(np.abs(L))
    mag_db = np.clip(mag_db, -400.0, 400.0)
    phase = np.degrees(np.unwrap(np.angle(L)))
    block = {
        "theta": [float(t) for t in th],
        "omega": [float(t / G.sample_time) for t in th],
        "loop_mag_db": [float(v) for v in mag_db],
        "loop_phase_deg": [float(v) for v in phase],
        "rp_value": None,
    }
    if weights is not None:
        ws_tf, wt_tf = weights
        chv = np.polyval(char.coeffs, z)
        ws = np.polyval(ws_tf.num.coeffs, z) / np.polyval(ws_tf.den.coeffs, z)
        wt = np.polyval(wt_tf.num.coeffs, z) / np.polyval(wt_tf.den.coeffs, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            rp = (np.abs(ws * dv) + np.abs(wt * nv)) / np.abs(chv)
        rp = np.where(np.isfinite(rp), rp, 1e12)
        block["rp_value"] = [float(v) for v in rp]
    return block


def analyze_design(
    G: RationalTransferFunction,
    gains: PidGains,
    margin_spec=None,
    ms_weights: tuple[RationalTransferFunction, RationalTransferFunction] | None = None,
    require_stability: bool = True,
    with_curves: bool = False,
    n_margin_points: int = _DEFAULT_MARGIN_POINTS,
    n_rp_points: int = _DEFAULT_RP_POINTS,
) -> AnalysisReport:
    """Run every oracle check for one gain point and collect the report."""
    char = closed_loop_charpoly(G, gains)
    poles = poly_roots(char) if char.degree >= 1 else []
    rho = max((abs(p) for p in poles), default=0.0)
    mr = margins(G, gains, n_points=n_margin_points)

    flags: dict[str, dict] = {}
    flags["stable"] = {
        "satisfied": bool(rho < 1.0 - STABILITY_MARGIN),
        "reason": f"spectral radius {rho:.9f}",
    }
    if not require_stability:
        flags["stable"]["constraint_active"] = False
    if margin_spec is not None and margin_spec.has_pm:
        if mr.worst_pm is None:
            flags["pm"] = {"satisfied": False, "reason": mr.pm_reason}
        else:
            ok = margin_spec.pm_min <= mr.worst_pm <= margin_spec.pm_max
            flags["pm"] = {
                "satisfied": bool(ok),
                "reason": f"worst phase margin {mr.worst_pm:.4f} deg",
            }
    if margin_spec is not None and margin_spec.has_gm:
        if mr.worst_gm is None:
            flags["gm"] = {"satisfied": True, "reason": mr.gm_reason}
        else:
            flags["gm"] = {
                "satisfied": bool(mr.worst_gm >= margin_spec.gm_min),
                "reason": f"worst gain margin {mr.worst_gm:.4f} dB",
            }
    rp = None
    if ms_weights is not None:
        rp = robust_performance(G, gains, ms_weights, n_points=n_rp_points)
        if rp.infinite:
            flags["ms"] = {"satisfied": False, "reason": "closed-loop pole on the unit circle"}
        else:
            flags["ms"] = {
                "satisfied": bool(rp.supremum < 1.0),
                "reason": f"robust performance supremum {rp.supremum:.6f}",
            }

    return AnalysisReport(
        gains=gains,
        sample_time=G.sample_time,
        char_poly=char,
        poles=poles,
        spectral_radius=rho,
        gain_crossovers=mr.gain_crossovers,
        phase_crossovers=mr.phase_crossovers,
        worst_pm=mr.worst_pm,
        worst_gm=mr.worst_gm,
        rp_supremum=None if rp is None else rp.supremum,
        rp_arg_theta=None if rp is None else rp.arg_theta,
        flags=flags,
        frequency_response=_frequency_response_block(G, gains, ms_weights) if with_curves else None,
    )
