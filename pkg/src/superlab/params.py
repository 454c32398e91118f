"""Mapping from raw experimental parameters to effective model parameters.

The two-beam Raman drive realizes an effective two-level Dicke system inside
the cavity.  This module evaluates the exact (non-expanded) expressions for
the effective field frequency, spin splitting, dispersive nonlinearity and
collective couplings, together with the Doppler width implied by the trap
depth.  Everything is stored as angular frequency in rad/s; unit conversion
from the kHz-style external interface happens in the CLI layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import constants as _const

__all__ = [
    "ExperimentConfig",
    "ModelParams",
    "derive_model_params",
    "raman_detunings",
    "doppler_width",
    "RB87_MASS",
    "DEFAULT_WAVELENGTH",
    "TEMPERATURE_FRACTION",
]

# 87Rb in kg
RB87_MASS = 86.909180527 * _const.physical_constants["atomic mass constant"][0]

DEFAULT_WAVELENGTH = 780e-9  # m

# Calibration constant eta = T_atom / U0. Back-solved from the quoted
# (trap depth, Doppler width) pairs; override via the eta keyword where
# a different thermalization fraction applies.
TEMPERATURE_FRACTION = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    """Raw experimental parameters (angular frequencies in rad/s).

    The drive phases theta_r/theta_s are recorded for provenance but are
    eliminated by a gauge transform before any model quantity is formed;
    nothing downstream may depend on them.
    """

    g_avg: float            # thermally averaged atom-cavity coupling
    g2_avg: float           # thermal average of g^2 (rad^2/s^2)
    kappa: float            # cavity half-linewidth
    gamma_a: float          # atomic dipole decay rate (diagnostics only)
    Delta: float            # excited-state detuning, sign-carrying
    Omega_r: float          # classical Rabi rate, red beam
    Omega_s: float          # classical Rabi rate, blue beam
    omega_1: float          # Zeeman-shifted hyperfine splitting
    N: int                  # atom number in the two-level subspace
    carrier_detuning: float  # cavity minus mean drive frequency
    eom_half_split: float   # half the drive-frequency difference
    trap_depth: float       # lattice depth, kelvin
    trap_freq: float = 0.0  # harmonic trap frequency along the probe axis
    theta_r: float = 0.0    # drive phase, recorded then eliminated
    theta_s: float = 0.0
    wavelength: float = DEFAULT_WAVELENGTH
    atom_mass: float = RB87_MASS

    def __post_init__(self):
        problems = []
        if self.N < 1:
            problems.append(f"N must be >= 1, got {self.N}")
        if not self.kappa > 0.0:
            problems.append(f"kappa must be > 0, got {self.kappa}")
        if not abs(self.Delta) > 100.0 * self.omega_1:
            problems.append(
                "|Delta| must exceed 100*omega_1 (far-detuned regime), got "
                f"|{self.Delta}| vs 100*{self.omega_1}"
            )
        if self.g2_avg < self.g_avg**2:
            problems.append(
                f"g2_avg must be >= g_avg^2, got {self.g2_avg} < {self.g_avg**2}"
            )
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class ModelParams:
    """Effective Dicke-model parameters, all in rad/s except sigma_z0.

    gamma (collective spin decay) and sigma_z0 (initial normalized inversion)
    are model inputs rather than derived quantities.
    """

    omega: float
    omega_0: float
    delta: float
    omega_d: float
    delta_omega_ss: float
    lambda_r: float
    lambda_s: float
    gamma_d: float
    kappa: float
    gamma: float = 0.0
    sigma_z0: float = -0.5

    def __post_init__(self):
        problems = []
        if self.lambda_r < 0.0 or self.lambda_s < 0.0:
            problems.append("couplings must be >= 0 after phase elimination")
        if self.gamma_d < 0.0:
            problems.append(f"gamma_d must be >= 0, got {self.gamma_d}")
        if not self.kappa > 0.0:
            problems.append(f"kappa must be > 0, got {self.kappa}")
        if not -0.5 <= self.sigma_z0 <= 0.5:
            problems.append(f"sigma_z0 must lie in [-1/2, 1/2], got {self.sigma_z0}")
        if problems:
            raise ValueError("; ".join(problems))


def doppler_width(trap_depth: float, wavelength: float = DEFAULT_WAVELENGTH,
                  atom_mass: float = RB87_MASS, *,
                  eta: float = TEMPERATURE_FRACTION) -> float:
    """Rms two-photon Doppler shift k*v_rms for atoms held at depth trap_depth.

    The atomic temperature is taken as eta*trap_depth; v_rms is the 1D rms
    velocity at that temperature and k = 2*pi/wavelength.

    :param trap_depth: lattice depth in kelvin, > 0.
    :param wavelength: drive wavelength in m.
    :param atom_mass: atomic mass in kg.
    :param eta: temperature-to-depth calibration fraction.
    :return: gamma_d in rad/s.
    """
    if not trap_depth > 0.0:
        raise ValueError(f"trap_depth must be > 0, got {trap_depth}")
    temperature = eta * trap_depth
    v_rms = math.sqrt(_const.k * temperature / atom_mass)
    return 2.0 * math.pi / wavelength * v_rms


def derive_model_params(cfg: ExperimentConfig, *, gamma: float = 0.0,
                        sigma_z0: float = -0.5,
                        eta: float = TEMPERATURE_FRACTION) -> ModelParams:
    """Evaluate the effective model parameters from raw experimental inputs.

    Uses the exact two-denominator expressions (no first-order expansion in
    omega_1/Delta).  Couplings carry the sign of the Raman denominators; the
    overall phase is absorbed so both come out non-negative.
    """
    d_r = cfg.Delta - cfg.omega_1 / 2.0
    d_s = cfg.Delta + cfg.omega_1 / 2.0
    if d_r == 0.0 or d_s == 0.0:
        raise ValueError("Delta = +/- omega_1/2 makes a Raman denominator vanish")
    if cfg.N < 1:
        raise ValueError(f"N must be >= 1, got {cfg.N}")

    # differential Stark shift of the spin splitting
    stark = (cfg.Omega_r**2 / d_r - cfg.Omega_r**2 / (d_r - cfg.omega_1)
             - cfg.Omega_s**2 / d_s + cfg.Omega_s**2 / (d_s + cfg.omega_1)) / 6.0

    omega_0 = cfg.omega_1 - cfg.eom_half_split + stark
    omega_d = cfg.N / 3.0 * (cfg.g2_avg / d_s + cfg.g2_avg / d_r)
    omega = cfg.carrier_detuning + omega_d
    delta = 2.0 * cfg.N / 3.0 * (cfg.g2_avg / d_s - cfg.g2_avg / d_r)

    coeff = math.sqrt(3.0 * cfg.N) / 12.0 * cfg.g_avg
    lambda_r = abs(coeff * cfg.Omega_r / d_r)
    lambda_s = abs(coeff * cfg.Omega_s / d_s)

    # first-order consistency: delta opposes omega_d * omega_1 / Delta
    if delta != 0.0:
        assert delta * (omega_d * cfg.omega_1 / cfg.Delta) <= 0.0

    return ModelParams(
        omega=omega,
        omega_0=omega_0,
        delta=delta,
        omega_d=omega_d,
        delta_omega_ss=stark,
        lambda_r=lambda_r,
        lambda_s=lambda_s,
        gamma_d=doppler_width(cfg.trap_depth, cfg.wavelength, cfg.atom_mass,
                              eta=eta),
        kappa=cfg.kappa,
        gamma=gamma,
        sigma_z0=sigma_z0,
    )


def raman_detunings(mp: ModelParams) -> tuple[float, float]:
    """Detunings of each drive beam from its Raman resonance.

    Returns (delta_cr, delta_cs) = (omega_0 - omega, -(omega_0 + omega)).
    """
    return mp.omega_0 - mp.omega, -(mp.omega_0 + mp.omega)
