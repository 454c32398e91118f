"""Closed-form critical couplings for the driven Dicke system.

Four threshold models are provided: the ideal (lossless-spin) form, the
collective-decay-corrected form, the Doppler-inhomogeneous form built on the
Dawson function, and the single-beam (one Raman pathway) form.  All take and
return angular frequencies in rad/s.

Every formula is symmetric under simultaneous negation of (omega, omega_0,
delta); mixed-sign regimes have no closed form and raise InvalidRegime - the
numeric pole search handles those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .specfun import dawson

__all__ = [
    "InvalidRegime",
    "InvalidState",
    "Geometry",
    "ThresholdModel",
    "ThresholdResult",
    "threshold_ideal",
    "threshold_decay",
    "threshold_doppler",
    "threshold_single_beam",
]


class InvalidRegime(ValueError):
    """Parameter signs put the request outside the formula's domain."""


class InvalidState(ValueError):
    """Initial-state parameter outside the supported range."""


class Geometry(Enum):
    SINGLE = "Single"
    CO_PROP = "CoProp"
    COUNTER_PROP = "CounterProp"


class ThresholdModel(Enum):
    IDEAL = "Ideal"
    DECAY = "Decay"
    DOPPLER = "Doppler"
    SINGLE_BEAM = "SingleBeam"
    POLE_NUMERIC = "PoleNumeric"


@dataclass
class ThresholdResult:
    """Critical coupling plus provenance and solver metadata.

    lambda_c is None when exists is False.  The single documented exception
    to lambda_c > 0 is the degenerate zero-decoherence single-beam case,
    which reports exists=True with lambda_c = 0.
    """

    lambda_c: float | None
    model: ThresholdModel
    geometry: Geometry
    exists: bool = True
    diagnostics: dict = field(default_factory=dict)


def _mirror(omega: float, omega_0: float) -> tuple[float, float]:
    # sign symmetry: evaluate the all-negative regime at the mirrored point
    if omega < 0.0 and omega_0 < 0.0:
        return -omega, -omega_0
    return omega, omega_0


def threshold_ideal(omega: float, omega_0: float, kappa: float) -> ThresholdResult:
    """Ideal Dicke threshold (1/2) sqrt((omega_0/omega)(omega^2 + kappa^2))."""
    if omega * omega_0 <= 0.0:
        raise InvalidRegime(
            "threshold_ideal needs omega*omega_0 > 0; "
            "use the pole module for mixed-sign regimes"
        )
    omega, omega_0 = _mirror(omega, omega_0)
    lam = 0.5 * math.sqrt(omega_0 / omega * (omega**2 + kappa**2))
    return ThresholdResult(lam, ThresholdModel.IDEAL, Geometry.COUNTER_PROP)


def threshold_decay(omega: float, omega_0: float, kappa: float, gamma: float,
                    sigma_z0: float = -0.5, delta: float = 0.0) -> ThresholdResult:
    """Decay-corrected threshold for collective spin damping gamma.

    The dispersive nonlinearity enters only as the below-threshold shift
    omega -> omega - delta/2.
    """
    if sigma_z0 >= 0.0:
        raise InvalidState(f"sigma_z0 must be < 0, got {sigma_z0}")
    omega_eff = omega - delta / 2.0
    if omega_eff * omega_0 <= 0.0:
        raise InvalidRegime(
            "threshold_decay needs (omega - delta/2)*omega_0 > 0; "
            "use the pole module for mixed-sign regimes"
        )
    omega_eff, omega_0 = _mirror(omega_eff, omega_0)
    lam = 0.5 * math.sqrt(
        (omega_0**2 + gamma**2) / (-2.0 * sigma_z0 * omega_0)
        * (omega_eff**2 + kappa**2) / omega_eff
    )
    return ThresholdResult(lam, ThresholdModel.DECAY, Geometry.COUNTER_PROP,
                           diagnostics={"omega_eff": omega_eff})


def threshold_doppler(omega: float, omega_0: float, kappa: float,
                      gamma_d: float, delta: float = 0.0) -> ThresholdResult:
    """Doppler-inhomogeneous threshold.

    sqrt( sqrt(2)*gamma_d*((omega-delta/2)^2+kappa^2)
          / (8*(omega-delta/2)*F(omega_0/(sqrt(2)*gamma_d))) )
    with F the Dawson function.  Reduces to threshold_decay(gamma=0,
    sigma_z0=-1/2) as gamma_d -> 0.
    """
    if not gamma_d > 0.0:
        raise InvalidRegime(
            f"gamma_d must be > 0 (got {gamma_d}); "
            "use threshold_decay for the homogeneous limit"
        )
    omega_eff = omega - delta / 2.0
    if omega_eff * omega_0 <= 0.0:
        raise InvalidRegime(
            "threshold_doppler needs (omega - delta/2)*omega_0 > 0; "
            "use the pole module for mixed-sign regimes"
        )
    omega_eff, omega_0 = _mirror(omega_eff, omega_0)
    arg = omega_0 / (math.sqrt(2.0) * gamma_d)
    lam = math.sqrt(
        math.sqrt(2.0) * gamma_d * (omega_eff**2 + kappa**2)
        / (8.0 * omega_eff * float(dawson(arg)))
    )
    return ThresholdResult(lam, ThresholdModel.DOPPLER, Geometry.COUNTER_PROP,
                           diagnostics={"omega_eff": omega_eff,
                                        "dawson_arg": arg})


def threshold_single_beam(delta_cs: float, kappa: float, gamma: float,
                          sigma_z0: float = -0.5) -> ThresholdResult:
    """Single-beam threshold sqrt(gamma*kappa/(-2 sigma_z0)*(1+(delta_cs/(gamma+kappa))^2)).

    gamma = 0 is the documented degenerate case: any coupling is above
    threshold, reported as exists=True with lambda_c = 0.
    """
    if sigma_z0 >= 0.0:
        raise InvalidState(f"sigma_z0 must be < 0, got {sigma_z0}")
    if gamma < 0.0:
        raise InvalidState(f"gamma must be >= 0, got {gamma}")
    if gamma == 0.0:
        return ThresholdResult(0.0, ThresholdModel.SINGLE_BEAM, Geometry.SINGLE,
                               diagnostics={"degenerate": "no decoherence"})
    lam = math.sqrt(
        gamma * kappa / (-2.0 * sigma_z0)
        * (1.0 + (delta_cs / (gamma + kappa))**2)
    )
    return ThresholdResult(lam, ThresholdModel.SINGLE_BEAM, Geometry.SINGLE)
