"""Weak-probe transmission spectra of the coupled cavity-spin system.

Two linear-response models: the rotating-wave two-mode (Tavis-Cummings) form
used to calibrate a single coupling from the normal-mode splitting, and the
full below-threshold response with both couplings, which develops a probe
peak at zero detuning that sharpens and grows as lambda -> lambda_c.  The
probe is an infinitesimal drive; probe-power saturation effects seen in real
transmission scans are deliberately not modeled.

Probe detunings are measured from the mean frequency of the two drives, the
same reference as the cavity detuning omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams
from .poles import ScaledParams, apply_delta_shift, counter_threshold_closed
from .specfun import erfcx
from .thresholds import InvalidRegime, threshold_decay

__all__ = [
    "AboveThreshold",
    "SpectrumTrace",
    "tavis_cummings_transmission",
    "critical_transmission",
    "default_probe_grid",
]

_SQRT_PI = math.sqrt(math.pi)


class AboveThreshold(ValueError):
    """Linear response is invalid at or above the critical coupling."""


@dataclass
class SpectrumTrace:
    """Transmission vs probe detuning, normalized to the empty-cavity peak."""

    probe_detuning: np.ndarray
    transmission: np.ndarray
    lambda_frac: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.probe_detuning = np.asarray(self.probe_detuning, dtype=float)
        self.transmission = np.asarray(self.transmission, dtype=float)
        if np.any(np.diff(self.probe_detuning) <= 0.0):
            raise ValueError("probe grid must be strictly increasing")
        if np.any(self.transmission < 0.0):
            raise ValueError("transmission must be >= 0")

    def write_csv(self, fh) -> None:
        fh.write("probe_detuning_krad_s,transmission,lambda_frac\n")
        for x, tr in zip(self.probe_detuning, self.transmission):
            fh.write(f"{float(x / 1.0e3)!r},{float(tr)!r},"
                     f"{float(self.lambda_frac)!r}\n")


def tavis_cummings_transmission(probe_det, cavity_det: float, lambda_r: float,
                                kappa: float, gamma: float):
    """Normalized cavity transmission |kappa*chi|^2 in the rotating-wave model.

    chi(x) = 1/(kappa + i(cavity_det - x) + lambda_r^2/(gamma - i x)) with the
    spin held at two-photon resonance; peaks split by 2*lambda_r when
    lambda_r >> kappa, gamma.  At gamma = 0 the undamped spin pins the
    transmission to zero exactly at x = 0.
    """
    if not kappa > 0.0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    x = np.asarray(probe_det, dtype=float)
    base = kappa + 1j * (cavity_det - x)
    if lambda_r == 0.0:
        chi = 1.0 / base
    else:
        spin = gamma - 1j * x
        with np.errstate(divide="ignore", invalid="ignore"):
            chi = 1.0 / (base + lambda_r**2 / spin)
        chi = np.where(spin == 0.0, 0.0, chi)
    out = np.abs(kappa * chi) ** 2
    if np.ndim(probe_det) == 0:
        return float(out)
    return out


def default_probe_grid(mp: ModelParams, n_points: int = 801) -> np.ndarray:
    """Probe grid spanning +-5(|omega|+kappa), containing the bare-cavity peak.

    The grid point nearest omega - delta/2 is snapped onto it so the lambda=0
    trace samples its true maximum of 1.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    span = 5.0 * (abs(mp.omega) + mp.kappa)
    grid = np.linspace(-span, span, n_points)
    peak = mp.omega - 0.5 * mp.delta
    if -span < peak < span:
        grid[int(np.argmin(np.abs(grid - peak)))] = peak
    return grid


def _no_doppler_response(x: np.ndarray, mp: ModelParams,
                         lam: float) -> np.ndarray:
    """Cavity response from the 4-component (a, b, a+, b+) linearization."""
    c = -2.0 * mp.sigma_z0
    omega_eff = mp.omega - 0.5 * mp.delta
    n = x.size
    m = np.zeros((n, 4, 4), dtype=complex)
    m[:, 0, 0] = mp.kappa + 1j * (omega_eff - x)
    m[:, 0, 1] = 1j * lam
    m[:, 0, 3] = 1j * lam
    m[:, 1, 0] = 1j * lam * c
    m[:, 1, 1] = mp.gamma + 1j * (mp.omega_0 - x)
    m[:, 1, 2] = 1j * lam * c
    m[:, 2, 1] = -1j * lam
    m[:, 2, 2] = mp.kappa - 1j * (omega_eff + x)
    m[:, 2, 3] = -1j * lam
    m[:, 3, 0] = -1j * lam * c
    m[:, 3, 2] = -1j * lam * c
    m[:, 3, 3] = mp.gamma - 1j * (mp.omega_0 + x)
    rhs = np.zeros((n, 4, 1), dtype=complex)
    rhs[:, 0, 0] = 1.0
    v = np.linalg.solve(m, rhs)
    return v[:, 0, 0]


def _empty_cavity(x: np.ndarray, mp: ModelParams) -> np.ndarray:
    # spins decouple at zero coupling, thermal width and all; evaluating the
    # exact Lorentzian keeps the normalization free of matrix round-off
    w_eff = mp.omega - 0.5 * mp.delta
    return mp.kappa**2 / (mp.kappa**2 + (x - w_eff) ** 2)


def _doppler_response(x: np.ndarray, mp: ModelParams, lam_bar: float,
                      sp: ScaledParams) -> np.ndarray:
    """Cavity response from the Gaussian-averaged 2x2 system at z = gb - i*wp."""
    s = sp.scale
    wp = x / s
    gb = mp.gamma / s
    kb, w, w0 = sp.kappa_bar, sp.omega_bar, sp.omega0_bar
    z = gb - 1j * wp
    q = lam_bar**2 * _SQRT_PI * (erfcx(z + 1j * w0) - erfcx(z - 1j * w0))
    m22 = kb - 1j * (w + wp) - q
    det = (kb - 1j * wp) ** 2 + w * w - 2j * w * q
    return m22 / det


def critical_transmission(probe_grid, mp: ModelParams, lambda_frac: float,
                          use_doppler: bool = False) -> SpectrumTrace:
    """Below-threshold transmission at coupling lambda_frac * lambda_c.

    The no-Doppler route linearizes the damped mean-field equations around
    the normal phase (4 coupled components, threshold from threshold_decay);
    the Doppler route evaluates the Gaussian-averaged counter-propagating
    response (threshold from the closed form), requiring gamma_d > 0 and
    sigma_z0 = -1/2.  Both are normalized so the empty-cavity peak equals 1.
    """
    if not 0.0 <= lambda_frac:
        raise ValueError(f"lambda_frac must be >= 0, got {lambda_frac}")
    if lambda_frac >= 1.0:
        raise AboveThreshold(
            f"linear response diverges at lambda_frac = {lambda_frac} >= 1"
        )
    x = np.asarray(probe_grid, dtype=float)
    if use_doppler:
        if mp.sigma_z0 != -0.5:
            raise InvalidRegime(
                "Doppler response assumes a ground-state ensemble "
                f"(sigma_z0 = -1/2), got {mp.sigma_z0}"
            )
        sp = ScaledParams.from_raw(mp.kappa, mp.omega, mp.omega_0,
                                   0.0, 0.0, mp.gamma_d)
        sp = apply_delta_shift(sp, mp.delta)
        lam_bar_c = counter_threshold_closed(sp)
        if not math.isfinite(lam_bar_c):
            raise InvalidRegime("no finite Doppler threshold at omega_0 = 0")
        if lambda_frac == 0.0:
            trans = _empty_cavity(x, mp)
        else:
            resp = _doppler_response(x, mp, lambda_frac * lam_bar_c, sp)
            trans = np.abs(sp.kappa_bar * resp) ** 2
        lam_c_value = lam_bar_c * sp.scale
    else:
        lam_c = threshold_decay(mp.omega, mp.omega_0, mp.kappa, mp.gamma,
                                mp.sigma_z0, mp.delta).lambda_c
        if lambda_frac == 0.0:
            trans = _empty_cavity(x, mp)
        else:
            resp = _no_doppler_response(x, mp, lambda_frac * lam_c)
            trans = np.abs(mp.kappa * resp) ** 2
        lam_c_value = lam_c
    return SpectrumTrace(x, trans, lambda_frac,
                         metadata={"lambda_c": lam_c_value,
                                   "use_doppler": use_doppler})
