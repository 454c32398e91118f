"""Laplace-domain pole analysis of the linearized field dynamics.

Everything here is dimensionless: frequencies and rates are divided by the
Doppler scale gamma_d*sqrt(2).  Each beam geometry has an entire
characteristic function D(z) whose roots are the poles of the transformed
field; the lasing threshold is the smallest coupling at which a root crosses
into the right half-plane.  Closed forms cover the single-beam and matched
counter-propagating cases; the numeric crossing search handles every regime,
including mixed-sign detunings where no closed form exists.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import special as _sp
from scipy.optimize import brentq

from .specfun import dawson, erfcx
from .thresholds import Geometry, InvalidRegime, ThresholdModel, ThresholdResult

__all__ = [
    "ConvergenceFailure",
    "ScaledParams",
    "Geometry",
    "ThresholdModel",
    "ThresholdResult",
    "characteristic",
    "single_beam_threshold_implicit",
    "counter_threshold_closed",
    "rightmost_root",
    "pole_threshold_numeric",
    "apply_delta_shift",
    "LAMBDA_BAR_MAX",
]

_SQRT_PI = math.sqrt(math.pi)

# Bisection gives up above this scaled coupling; paper-scale thresholds are
# O(1e0..1e2) so anything beyond is reported as "no threshold".
LAMBDA_BAR_MAX = 1.0e3

_RESID_TOL = 1.0e-10
_NEWTON_MAX_ITER = 100


class ConvergenceFailure(RuntimeError):
    """A root or bracket search failed to converge."""


@dataclasses.dataclass(frozen=True)
class ScaledParams:
    """Dimensionless inputs for the pole analysis.

    All *_bar fields are the physical rates divided by ``scale``, which is
    gamma_d*sqrt(2) in rad/s.  Construct directly for already-dimensionless
    work (scale=1) or via :meth:`from_raw` for physical inputs.
    """

    kappa_bar: float
    omega_bar: float
    omega0_bar: float
    lambda_r_bar: float = 0.0
    lambda_s_bar: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0.0:
            raise InvalidRegime(
                f"scale must be > 0 (got {self.scale}); a vanishing Doppler "
                "width has no scaled form - use the thresholds module"
            )

    @classmethod
    def from_raw(cls, kappa: float, omega: float, omega_0: float,
                 lambda_r: float, lambda_s: float, gamma_d: float) -> "ScaledParams":
        if not gamma_d > 0.0:
            raise InvalidRegime(
                f"gamma_d must be > 0 (got {gamma_d}); use the thresholds "
                "module for the homogeneous case"
            )
        s = gamma_d * math.sqrt(2.0)
        return cls(kappa / s, omega / s, omega_0 / s,
                   lambda_r / s, lambda_s / s, scale=s)

    def unscale(self) -> dict:
        """Physical rates in rad/s (inverse of from_raw to machine precision)."""
        s = self.scale
        return {
            "kappa": self.kappa_bar * s,
            "omega": self.omega_bar * s,
            "omega_0": self.omega0_bar * s,
            "lambda_r": self.lambda_r_bar * s,
            "lambda_s": self.lambda_s_bar * s,
            "gamma_d": s / math.sqrt(2.0),
        }


def _char_and_deriv(z, g: Geometry, lam_r2: float, lam_s2: float,
                    sp: ScaledParams, f):
    """Characteristic function and its z-derivative, erfcx supplied by caller.

    Uses f'(z) = 2 z f(z) - 2/sqrt(pi), so each f value is computed once.
    Works elementwise on arrays.
    """
    zm = z - 1j * sp.omega0_bar
    fm = f(zm)
    fpm = 2.0 * zm * fm - 2.0 / _SQRT_PI
    if g is Geometry.SINGLE:
        d = z + sp.kappa_bar + 1j * sp.omega_bar - _SQRT_PI * lam_s2 * fm
        dp = 1.0 - _SQRT_PI * lam_s2 * fpm
        return d, dp
    zp = z + 1j * sp.omega0_bar
    fp = f(zp)
    fpp = 2.0 * zp * fp - 2.0 / _SQRT_PI
    if g is Geometry.CO_PROP:
        d = (z + sp.kappa_bar + 1j * sp.omega_bar
             + _SQRT_PI * (lam_r2 * fp - lam_s2 * fm))
        dp = 1.0 + _SQRT_PI * (lam_r2 * fpp - lam_s2 * fpm)
        return d, dp
    if g is Geometry.COUNTER_PROP:
        pref = 2j * sp.omega_bar * lam_s2 * _SQRT_PI
        d = (z + sp.kappa_bar) ** 2 + sp.omega_bar**2 + pref * (fm - fp)
        dp = 2.0 * (z + sp.kappa_bar) + pref * (fpm - fpp)
        return d, dp
    raise ValueError(f"unknown geometry {g!r}")


def _coupling_squares(g: Geometry, sp: ScaledParams) -> tuple[float, float]:
    """Validate the geometry/coupling combination and return (lambda_r^2, lambda_s^2).

    Co-propagating cross terms are position-averaged away, so CoProp keeps
    both squares but never a lambda_r*lambda_s product (none appears in any
    characteristic).  CounterProp's determinant assumes matched beams.
    """
    if g is Geometry.SINGLE and sp.lambda_r_bar != 0.0:
        raise InvalidRegime(
            "Single geometry drives one pathway; lambda_r_bar must be 0"
        )
    if g is Geometry.COUNTER_PROP and sp.lambda_r_bar != sp.lambda_s_bar:
        raise InvalidRegime(
            "CounterProp characteristic assumes matched couplings "
            f"(got lambda_r_bar={sp.lambda_r_bar}, lambda_s_bar={sp.lambda_s_bar})"
        )
    return sp.lambda_r_bar**2, sp.lambda_s_bar**2


def characteristic(z: complex, g: Geometry, sp: ScaledParams) -> complex:
    """Scaled characteristic function whose roots are the field poles.

    Single:      z + kbar + i*wbar - sqrt(pi)*ls^2*f(z_-)
    CoProp:      z + kbar + i*wbar + sqrt(pi)*(lr^2*f(z_+) - ls^2*f(z_-))
    CounterProp: (z+kbar)^2 + wbar^2 + 2i*wbar*l^2*sqrt(pi)*(f(z_-) - f(z_+))

    with z_pm = z +- i*w0bar and f(z) = e^{z^2} erfc(z).  Overflow of f in
    the left half-plane propagates as OverflowDomain.
    """
    lr2, ls2 = _coupling_squares(g, sp)
    d, _ = _char_and_deriv(z, g, lr2, ls2, sp, erfcx)
    return d


def single_beam_threshold_implicit(delta_cs_bar: float, kappa_bar: float) -> float:
    """Scaled single-beam threshold from the implicit y-equation.

    Solves delta_cs_bar = y + kappa_bar*erfi(y) (the e^{y^2}F(y) form reduced
    via e^{y^2}F(y) = (sqrt(pi)/2) erfi(y)); the map is strictly increasing in
    y so the root is unique.  Returns lambda_bar = sqrt(kappa_bar/sqrt(pi)) *
    e^{y^2/2}, even in delta_cs_bar.
    """
    if not kappa_bar > 0.0:
        raise InvalidRegime(f"kappa_bar must be > 0, got {kappa_bar}")
    target = abs(float(delta_cs_bar))
    if target == 0.0:
        return math.sqrt(kappa_bar / _SQRT_PI)

    def lhs(y: float) -> float:
        with np.errstate(over="ignore"):
            v = y + kappa_bar * float(_sp.erfi(y))
        # erfi overflows past y ~ 26.6; a huge finite stand-in keeps the
        # bracket usable (the root always sits below the overflow boundary)
        return v if math.isfinite(v) else math.copysign(1.0e300, y)

    y_hi = 1.0
    while lhs(y_hi) < target:
        y_hi *= 2.0
        if y_hi > 30.0:
            raise ConvergenceFailure(
                f"no y in [0, 30] reaches delta_cs_bar = {delta_cs_bar}"
            )
    y = brentq(lambda t: lhs(t) - target, 0.0, y_hi,
               xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.sqrt(kappa_bar / _SQRT_PI) * math.exp(0.5 * y * y)


def counter_threshold_closed(sp: ScaledParams) -> float:
    """Closed-form counter-propagating threshold sqrt((wbar^2+kbar^2)/(8*wbar*F(w0bar))).

    Restricted to omega_bar*omega0_bar >= 0 (sign symmetry flips an
    all-negative pair); omega0_bar = 0 returns inf since the Dawson factor
    vanishes and no finite coupling crosses.
    """
    w, w0 = sp.omega_bar, sp.omega0_bar
    if w == 0.0:
        raise InvalidRegime("closed form needs omega_bar != 0")
    if w * w0 < 0.0:
        raise InvalidRegime(
            "closed form restricted to omega_bar*omega0_bar >= 0; "
            "use pole_threshold_numeric for mixed signs"
        )
    if w < 0.0:
        w, w0 = -w, -w0
    fval = float(dawson(w0))
    if fval == 0.0:
        return math.inf
    return math.sqrt((w * w + sp.kappa_bar**2) / (8.0 * w * fval))


def _lambda_squares(g: Geometry, lam: float) -> tuple[float, float]:
    # search couplings per geometry: s-beam only for Single, matched otherwise
    l2 = lam * lam
    if g is Geometry.SINGLE:
        return 0.0, l2
    return l2, l2


def _erfcx_raw(z):
    return _sp.erfcx(z)


def _newton_refine(seeds: np.ndarray, g: Geometry, lr2: float, ls2: float,
                   sp: ScaledParams, step_cap: float) -> np.ndarray:
    """Newton iteration on all seeds at once; returns converged roots."""
    z = np.asarray(seeds, dtype=complex).copy()
    done = np.full(z.shape, np.nan + 0j)
    active = np.ones(z.shape, dtype=bool)
    for _ in range(_NEWTON_MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        za = z[idx]
        with np.errstate(all="ignore"):
            d, dp = _char_and_deriv(za, g, lr2, ls2, sp, _erfcx_raw)
        resid = np.abs(d)
        ok = np.isfinite(resid) & (resid < _RESID_TOL * (1.0 + np.abs(za) ** 2))
        done[idx[ok]] = za[ok]
        active[idx[ok]] = False
        rest = ~ok
        if not rest.any():
            continue
        ridx = idx[rest]
        dr, dpr = d[rest], dp[rest]
        bad = ~np.isfinite(dr) | ~np.isfinite(dpr) | (dpr == 0)
        active[ridx[bad]] = False
        good = ~bad
        step = dr[good] / dpr[good]
        mag = np.abs(step)
        shrink = np.where(mag > step_cap, step_cap / np.where(mag == 0, 1, mag), 1.0)
        z[ridx[good]] = z[ridx[good]] - step * shrink
    return done[np.isfinite(done.real)]


def _newton_damped_scalar(z0: complex, g: Geometry, lr2: float, ls2: float,
                          sp: ScaledParams) -> complex | None:
    """Step-halving Newton fallback for seeds the plain iteration loses."""

    def val(z):
        with np.errstate(all="ignore"):
            d, dp = _char_and_deriv(np.asarray(z, complex), g, lr2, ls2, sp,
                                    _erfcx_raw)
        return complex(d), complex(dp)

    z = complex(z0)
    d, dp = val(z)
    if not (np.isfinite(d.real) and np.isfinite(d.imag)):
        return None
    for _ in range(_NEWTON_MAX_ITER):
        if abs(d) < _RESID_TOL * (1.0 + abs(z) ** 2):
            return z
        if dp == 0 or not np.isfinite(abs(dp)):
            return None
        step = d / dp
        for _ in range(40):
            zt = z - step
            dt, dpt = val(zt)
            if np.isfinite(abs(dt)) and abs(dt) < abs(d):
                break
            step *= 0.5
        else:
            return None
        z, d, dp = zt, dt, dpt
    return z if abs(d) < _RESID_TOL * (1.0 + abs(z) ** 2) else None


def rightmost_root(g: Geometry, sp: ScaledParams, lambda_bar: float) -> complex:
    """Root of the characteristic with maximal real part in the search window.

    The window is Re in [-4*kbar - 1, kbar + lambda_bar + 1] and
    |Im| <= |wbar| + |w0bar| + 10; a 61x61 grid of |D| seeds Newton
    refinement from every local minimum.  Ties in Re are broken by largest
    |Im|, then by positive Im.  The stored couplings on sp are ignored;
    lambda_bar sets them per geometry (matched beams except Single).
    """
    lam = abs(float(lambda_bar))
    lr2, ls2 = _lambda_squares(g, lam)
    re_lo = -4.0 * sp.kappa_bar - 1.0
    re_hi = sp.kappa_bar + lam + 1.0
    im_max = abs(sp.omega_bar) + abs(sp.omega0_bar) + 10.0
    res = np.linspace(re_lo, re_hi, 61)
    ims = np.linspace(-im_max, im_max, 61)
    zgrid = res[None, :] + 1j * ims[:, None]
    with np.errstate(all="ignore"):
        dgrid, _ = _char_and_deriv(zgrid, g, lr2, ls2, sp, _erfcx_raw)
    mag = np.abs(dgrid)
    mag[~np.isfinite(mag)] = np.inf

    # seed at every interior local minimum of |D| plus the globally smallest
    # values; roots sitting between grid nodes still pull a neighbour in
    core = mag[1:-1, 1:-1]
    is_min = np.isfinite(core)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            is_min &= core <= mag[1 + di:60 + di, 1 + dj:60 + dj]
    seeds = list(zgrid[1:-1, 1:-1][is_min])
    flat = np.argsort(mag, axis=None)[:8]
    seeds.extend(zgrid.flat[k] for k in flat if np.isfinite(mag.flat[k]))
    if not seeds:
        raise ConvergenceFailure(
            f"characteristic has no finite values on the search grid ({g})"
        )
    seeds = np.unique(np.asarray(seeds, dtype=complex))
    if seeds.size > 48:
        with np.errstate(all="ignore"):
            dsub, _ = _char_and_deriv(seeds, g, lr2, ls2, sp, _erfcx_raw)
        seeds = seeds[np.argsort(np.abs(dsub))[:48]]

    step_cap = 0.25 * math.hypot(re_hi - re_lo, 2.0 * im_max)
    roots = _newton_refine(seeds, g, lr2, ls2, sp, step_cap)
    if roots.size == 0:
        found = []
        for s in seeds[:10]:
            r = _newton_damped_scalar(s, g, lr2, ls2, sp)
            if r is not None:
                found.append(r)
        roots = np.asarray(found, dtype=complex)
    if roots.size == 0:
        raise ConvergenceFailure(
            f"no Newton seed converged for {g} at lambda_bar={lambda_bar}"
        )

    # clip to the window, then dedupe
    slack = 1.0e-6 * (1.0 + abs(re_hi) + abs(re_lo) + im_max)
    inside = ((roots.real >= re_lo - slack) & (roots.real <= re_hi + slack)
              & (np.abs(roots.imag) <= im_max + slack))
    roots = roots[inside]
    if roots.size == 0:
        raise ConvergenceFailure(
            f"all converged roots left the search window for {g} "
            f"at lambda_bar={lambda_bar}"
        )
    kept: list[complex] = []
    for r in sorted(roots, key=lambda c: (-c.real, -abs(c.imag), -c.imag)):
        if all(abs(r - k) > 1.0e-7 * (1.0 + abs(r)) for k in kept):
            kept.append(complex(r))
    best_re = kept[0].real
    tol = 1.0e-8 * (1.0 + abs(best_re))
    ties = [r for r in kept if r.real >= best_re - tol]
    big = max(abs(r.imag) for r in ties)
    ties = [r for r in ties if abs(r.imag) >= big - tol]
    ties.sort(key=lambda c: -c.imag)
    return ties[0]


def pole_threshold_numeric(g: Geometry, sp: ScaledParams) -> ThresholdResult:
    """Smallest scaled coupling at which a pole crosses the imaginary axis.

    Doubles an upper bound from 1 until the rightmost root has Re > 0, then
    bisects to 1e-8 relative in lambda_bar.  No crossing below
    LAMBDA_BAR_MAX reports exists=False.  lambda_c is dimensionless;
    diagnostics carry the rad/s value via sp.scale.
    """
    lo, hi = 0.0, 1.0
    evals = 0
    while True:
        re_hi = rightmost_root(g, sp, hi).real
        evals += 1
        if re_hi > 0.0:
            break
        if hi >= LAMBDA_BAR_MAX:
            return ThresholdResult(
                None, ThresholdModel.POLE_NUMERIC, g, exists=False,
                diagnostics={"lambda_bar_max": LAMBDA_BAR_MAX,
                             "rightmost_re_at_max": re_hi,
                             "evaluations": evals})
        lo, hi = hi, min(2.0 * hi, LAMBDA_BAR_MAX)
    while hi - lo > 1.0e-8 * hi:
        mid = 0.5 * (lo + hi)
        evals += 1
        if rightmost_root(g, sp, mid).real > 0.0:
            hi = mid
        else:
            lo = mid
    lam = 0.5 * (lo + hi)
    return ThresholdResult(
        lam, ThresholdModel.POLE_NUMERIC, g, exists=True,
        diagnostics={"lambda_c_rad_s": lam * sp.scale,
                     "bracket": (lo, hi),
                     "evaluations": evals})


def apply_delta_shift(sp: ScaledParams, delta: float) -> ScaledParams:
    """Fold the dispersive shift into the cavity detuning: wbar -> wbar - (delta/2)/scale."""
    return dataclasses.replace(
        sp, omega_bar=sp.omega_bar - 0.5 * delta / sp.scale)
