"""Mean-field time evolution of the driven collective spin plus cavity field.

The state is the scaled cavity amplitude alpha = <a>/sqrt(N) together with a
set of velocity classes, each carrying a normalized spin-1/2 Bloch vector.
First-moment factorization closes the equations; superradiance from the
normal phase therefore needs a small symmetry-breaking seed field, injected
by the integrator when the initial amplitude is exactly zero.

Velocity classes discretize the thermal Doppler distribution on Gauss-Hermite
nodes so the low moments of the Gaussian are exact with few classes.  An
optional harmonic modulation evolves each class detuning as k*v*cos(omega_T*t)
with positions untracked.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.integrate import DOP853, RK45

from .params import DEFAULT_WAVELENGTH, ModelParams

__all__ = [
    "StepSizeUnderflow",
    "NotReached",
    "VelocityClass",
    "SystemState",
    "RampSchedule",
    "IntegratorConfig",
    "TimeTrace",
    "mean_field_rhs",
    "integrate",
    "make_velocity_ensemble",
    "detect_threshold",
    "photons_per_atom",
    "DETECTION_BIN",
]

_LENGTH_SLACK = 1.0e-9

# detection bin width mirrors the counts-per-5-us criterion
DETECTION_BIN = 5.0e-6

_SOLVERS = {"DOP853": DOP853, "RK45": RK45}


class StepSizeUnderflow(RuntimeError):
    """Adaptive step fell below the configured floor (or the solver failed)."""


class NotReached(RuntimeError):
    """The binned photon rate never exceeded the detection threshold."""


@dataclass(frozen=True)
class VelocityClass:
    """One velocity class: statistical weight, velocity, and its Bloch vector.

    phase_shift is the Doppler detuning k*v at t = 0 in rad/s; when modulated
    is set the instantaneous detuning is phase_shift*cos(omega_trap*t).
    """

    weight: float
    v: float
    sx: float
    sy: float
    sz: float
    phase_shift: float
    omega_trap: float = 0.0
    modulated: bool = False

    def __post_init__(self):
        if self.weight < 0.0:
            raise ValueError(f"weight must be >= 0, got {self.weight}")
        length2 = self.sx**2 + self.sy**2 + self.sz**2
        if length2 > 0.25 + _LENGTH_SLACK:
            raise ValueError(
                f"Bloch vector length {math.sqrt(length2)} exceeds 1/2"
            )


@dataclass(frozen=True)
class SystemState:
    """Cavity amplitude (scaled by 1/sqrt(N)) plus the velocity-class spins."""

    alpha: complex
    classes: tuple[VelocityClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise ValueError("at least one velocity class is required")
        total = sum(c.weight for c in self.classes)
        if abs(total - 1.0) > 1.0e-9:
            raise ValueError(f"class weights must sum to 1, got {total}")


@dataclass(frozen=True)
class RampSchedule:
    """Piecewise-linear coupling schedule t -> (lambda_r(t), lambda_s(t)).

    Couplings hold at the start values before t_ramp_start, interpolate
    linearly to the end values across the ramp window, and hold after.
    Constant schedules set equal endpoints (or use :meth:`constant`).
    """

    lambda_r_start: float
    lambda_s_start: float
    lambda_r_end: float
    lambda_s_end: float
    t_ramp_start: float = 0.0
    t_ramp_end: float = 0.0

    def __post_init__(self):
        for name in ("lambda_r_start", "lambda_s_start",
                     "lambda_r_end", "lambda_s_end"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if self.t_ramp_end < self.t_ramp_start:
            raise ValueError("t_ramp_end must be >= t_ramp_start")

    @classmethod
    def constant(cls, lambda_r: float, lambda_s: float) -> "RampSchedule":
        return cls(lambda_r, lambda_s, lambda_r, lambda_s)

    @classmethod
    def linear(cls, lambda_r_span: tuple[float, float],
               lambda_s_span: tuple[float, float],
               t_ramp_start: float, t_ramp_end: float) -> "RampSchedule":
        return cls(lambda_r_span[0], lambda_s_span[0],
                   lambda_r_span[1], lambda_s_span[1],
                   t_ramp_start, t_ramp_end)

    def couplings(self, t: float) -> tuple[float, float]:
        if t <= self.t_ramp_start or self.t_ramp_end == self.t_ramp_start:
            return self.lambda_r_start, self.lambda_s_start
        if t >= self.t_ramp_end:
            return self.lambda_r_end, self.lambda_s_end
        x = (t - self.t_ramp_start) / (self.t_ramp_end - self.t_ramp_start)
        return (self.lambda_r_start + x * (self.lambda_r_end - self.lambda_r_start),
                self.lambda_s_start + x * (self.lambda_s_end - self.lambda_s_start))


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration horizon, sampling, tolerances, and the photon-count scale.

    n_atoms converts the scaled field to photon numbers in the outputs; the
    equations of motion themselves are N-free.  alpha_seed replaces an
    exactly-zero initial amplitude so the unstable mode has something to
    amplify.
    """

    t_final: float
    sample_dt: float = 1.0e-6
    tol: float = 1.0e-10
    atol: float = 1.0e-13
    alpha_seed: float = 1.0e-4
    min_dt: float = 0.0
    n_atoms: float = 1.0e6
    method: str = "DOP853"
    store_spins: bool = False

    def __post_init__(self):
        if not self.t_final > 0.0:
            raise ValueError("t_final must be > 0")
        if not self.sample_dt > 0.0:
            raise ValueError("sample_dt must be > 0")
        if not (self.tol > 0.0 and self.atol > 0.0):
            raise ValueError("tolerances must be > 0")
        if self.min_dt < 0.0:
            raise ValueError("min_dt must be >= 0")
        if self.n_atoms < 1.0:
            raise ValueError("n_atoms must be >= 1")
        if self.method not in _SOLVERS:
            raise ValueError(f"method must be one of {sorted(_SOLVERS)}")


@dataclass
class TimeTrace:
    """Sampled trajectory: photon outputs are absolute (already scaled by N)."""

    t: np.ndarray
    intensity: np.ndarray
    jz: np.ndarray
    cumulative_photons: np.ndarray
    lambda_t: np.ndarray
    metadata: dict = field(default_factory=dict)
    # per-class Bloch vectors, shape (samples, classes, 3); only kept when
    # IntegratorConfig.store_spins is set, never serialized
    spins: np.ndarray | None = None

    def write_csv(self, fh) -> None:
        """Delimited dump, one row per sample; floats round-trip via repr."""
        fh.write("t_s,intensity_photons,jz,cumulative_photons,lambda_krad_s\n")
        for i in range(len(self.t)):
            fh.write(",".join((
                repr(float(self.t[i])),
                repr(float(self.intensity[i])),
                repr(float(self.jz[i])),
                repr(float(self.cumulative_photons[i])),
                repr(float(self.lambda_t[i] / 1.0e3)),
            )) + "\n")


def _pack(state: SystemState, cum: float) -> np.ndarray:
    c = state.classes
    n = len(c)
    y = np.empty(3 + 3 * n)
    y[0] = state.alpha.real
    y[1] = state.alpha.imag
    y[2:2 + n] = [k.sx for k in c]
    y[2 + n:2 + 2 * n] = [k.sy for k in c]
    y[2 + 2 * n:2 + 3 * n] = [k.sz for k in c]
    y[-1] = cum
    return y


def _class_arrays(classes) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    w = np.array([k.weight for k in classes])
    kv = np.array([k.phase_shift for k in classes])
    trap = np.array([k.omega_trap if k.modulated else 0.0 for k in classes])
    return w, kv, trap, any(k.modulated for k in classes)


def _rhs(t: float, y: np.ndarray, mp: ModelParams, lam_r: float, lam_s: float,
         w: np.ndarray, kv: np.ndarray, trap: np.ndarray,
         mod: bool) -> np.ndarray:
    # fresh output each call: the solver keeps references to returned arrays
    out = np.empty_like(y)
    n = w.size
    ax, ay = y[0], y[1]
    sx = y[2:2 + n]
    sy = y[2 + n:2 + 2 * n]
    sz = y[2 + 2 * n:2 + 3 * n]

    sbx = w @ sx
    sby = w @ sy
    sbz = w @ sz
    i2 = ax * ax + ay * ay
    om_eff = mp.omega + mp.delta * sbz
    g = mp.gamma

    out[0] = -mp.kappa * ax + om_eff * ay + (lam_r - lam_s) * sby
    out[1] = -mp.kappa * ay - om_eff * ax - (lam_r + lam_s) * sbx

    nu = mp.omega_0 + mp.delta * i2 + (kv * np.cos(trap * t) if mod else kv)
    ux = (lam_r + lam_s) * ax
    uy = (lam_r - lam_s) * ay
    out[2:2 + n] = nu * sy - 2.0 * uy * sz - g * sx
    out[2 + n:2 + 2 * n] = -nu * sx + 2.0 * ux * sz - g * sy
    out[2 + 2 * n:2 + 3 * n] = (2.0 * (lam_r - lam_s) * ay * sx
                                - 2.0 * (lam_r + lam_s) * ax * sy
                                - 2.0 * g * (sz + 0.5))
    out[-1] = 2.0 * mp.kappa * i2
    return out


def mean_field_rhs(state: SystemState, mp: ModelParams, t: float = 0.0):
    """Time derivative of the mean-field state at couplings taken from mp.

    Returns (dalpha_dt, dspins) with dspins of shape (n_classes, 3) ordered
    (sx, sy, sz).  The field obeys
        dalpha/dt = -(kappa + i(omega + delta*sz_mean))*alpha
                    - i*lambda_r*s-_mean - i*lambda_s*s+_mean
    with s-+ = sx -+ i*sy; each class precesses about a z field
    omega_0 + delta*|alpha|^2 + k*v(t) and is driven through terms
    2i*(lambda_r*alpha + lambda_s*conj(alpha))*sz; gamma damps the coherence
    at rate gamma and relaxes sz toward -1/2 at rate 2*gamma.
    """
    if mp.lambda_r < 0.0 or mp.lambda_s < 0.0:
        raise ValueError("couplings must be >= 0")
    w, kv, trap, mod = _class_arrays(state.classes)
    y = _pack(state, 0.0)
    out = _rhs(t, y, mp, mp.lambda_r, mp.lambda_s, w, kv, trap, mod)
    n = w.size
    dalpha = complex(out[0], out[1])
    dspins = np.stack([out[2:2 + n], out[2 + n:2 + 2 * n],
                       out[2 + 2 * n:2 + 3 * n]], axis=1)
    return dalpha, dspins


def integrate(state0: SystemState, mp: ModelParams, schedule: RampSchedule,
              cfg: IntegratorConfig) -> TimeTrace:
    """Adaptive integration of the mean-field equations with dense sampling.

    Samples land on the uniform grid 0, sample_dt, ..., t_final via each
    step's dense interpolant, so the step controller is free to stride past
    sample points.  A zero initial amplitude is replaced by cfg.alpha_seed.
    """
    alpha0 = state0.alpha if state0.alpha != 0 else complex(cfg.alpha_seed)
    seeded = SystemState(alpha0, state0.classes)
    w, kv, trap, mod = _class_arrays(seeded.classes)
    y0 = _pack(seeded, 0.0)

    def fun(t, y):
        lam_r, lam_s = schedule.couplings(t)
        return _rhs(t, y, mp, lam_r, lam_s, w, kv, trap, mod)

    t_grid = np.arange(0.0, cfg.t_final + 0.5 * cfg.sample_dt, cfg.sample_dt)
    samples = np.empty((t_grid.size, y0.size))
    samples[0] = y0
    next_i = 1

    solver = _SOLVERS[cfg.method](fun, 0.0, y0, cfg.t_final,
                                  rtol=cfg.tol, atol=cfg.atol)
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise StepSizeUnderflow(msg or "adaptive step size underflow")
        if cfg.min_dt > 0.0 and solver.step_size is not None \
                and solver.step_size < cfg.min_dt:
            raise StepSizeUnderflow(
                f"step size {solver.step_size:.3e} fell below "
                f"min_dt {cfg.min_dt:.3e} at t = {solver.t:.6e}"
            )
        if next_i < t_grid.size and t_grid[next_i] <= solver.t:
            dense = solver.dense_output()
            while next_i < t_grid.size and t_grid[next_i] <= solver.t:
                samples[next_i] = dense(t_grid[next_i])
                next_i += 1
    if next_i < t_grid.size:
        samples[next_i:] = samples[next_i - 1]  # t_final hit exactly by solver

    n = w.size
    ax = samples[:, 0]
    ay = samples[:, 1]
    szm = samples[:, 2 + 2 * n:2 + 3 * n] @ w
    lams = np.array([schedule.couplings(t) for t in t_grid])
    spins = None
    if cfg.store_spins:
        spins = samples[:, 2:2 + 3 * n].reshape(t_grid.size, 3, n)
        spins = np.ascontiguousarray(spins.transpose(0, 2, 1))
    return TimeTrace(
        t=t_grid,
        intensity=cfg.n_atoms * (ax * ax + ay * ay),
        jz=szm,
        cumulative_photons=cfg.n_atoms * samples[:, -1],
        lambda_t=np.max(lams, axis=1),
        metadata={"alpha_seed": float(alpha0.real) if state0.alpha == 0 else None,
                  "n_atoms": cfg.n_atoms, "method": cfg.method,
                  "tol": cfg.tol, "atol": cfg.atol},
        spins=spins,
    )


def make_velocity_ensemble(gamma_d: float, n_classes: int = 15,
                           omega_T: float = 0.0,
                           modulated: bool = False) -> tuple[VelocityClass, ...]:
    """Gauss-Hermite velocity classes with rms Doppler detuning gamma_d.

    Nodes x_i of exp(-x^2) map to detunings sqrt(2)*gamma_d*x_i and weights
    w_i/sqrt(pi), so the weights sum to 1 and the second moment of k*v equals
    gamma_d^2 exactly (within quadrature exactness).  Spins start in the
    ground state.  n_classes must be odd so a zero-velocity class exists.
    """
    if n_classes < 1 or n_classes % 2 == 0:
        raise ValueError(f"n_classes must be odd and >= 1, got {n_classes}")
    if gamma_d < 0.0:
        raise ValueError(f"gamma_d must be >= 0, got {gamma_d}")
    nodes, weights = hermgauss(n_classes)
    weights = weights / math.sqrt(math.pi)
    k_opt = 2.0 * math.pi / DEFAULT_WAVELENGTH
    out = []
    for x, wt in zip(nodes, weights):
        kv = math.sqrt(2.0) * gamma_d * x
        out.append(VelocityClass(weight=float(wt), v=kv / k_opt,
                                 sx=0.0, sy=0.0, sz=-0.5, phase_shift=kv,
                                 omega_trap=omega_T, modulated=modulated))
    return tuple(out)


def detect_threshold(trace: TimeTrace, count_threshold: float = 10.0,
                     *, efficiency: float = 1.0) -> float:
    """Coupling at which the binned output rate first exceeds the preset count.

    The rate is the cumulative photon count emitted over the trailing
    DETECTION_BIN window (5 us), times the detector efficiency.  Raises
    NotReached when no sample ever exceeds count_threshold.
    """
    t = np.asarray(trace.t)
    cum = np.asarray(trace.cumulative_photons)
    if t.size < 2:
        raise NotReached("trace too short to bin")
    starts = np.searchsorted(t, t - DETECTION_BIN, side="left")
    counts = efficiency * (cum - cum[starts])
    hits = np.flatnonzero(counts > count_threshold)
    if hits.size == 0:
        raise NotReached(
            f"binned count never exceeded {count_threshold} "
            f"(max {counts.max():.3g})"
        )
    return float(trace.lambda_t[hits[0]])


def photons_per_atom(trace: TimeTrace, N: float) -> float:
    """Final cumulative emitted photon count divided by atom number."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return float(trace.cumulative_photons[-1]) / N
