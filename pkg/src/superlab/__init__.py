"""Threshold analysis and mean-field simulation of driven collective-spin
cavity systems, including thermal (Doppler) broadening of the ensemble.

Layering: specfun (scaled special functions) and params (unit handling,
effective-parameter derivation) sit at the bottom; thresholds holds the
closed-form critical couplings; poles locates response-function poles of the
velocity-averaged system; dynamics integrates the semiclassical equations of
motion; spectrum computes weak-probe transmission; cli drives everything
from flat config files.
"""

__version__ = "0.1.0"

from .specfun import OverflowDomain, dawson, dawson_from_erfcx, erfcx
from .params import (RB87_MASS, DEFAULT_WAVELENGTH, TEMPERATURE_FRACTION,
                     ExperimentConfig, ModelParams, derive_model_params,
                     doppler_width, raman_detunings)
from .thresholds import (Geometry, InvalidRegime, InvalidState,
                         ThresholdModel, ThresholdResult, threshold_decay,
                         threshold_doppler, threshold_ideal,
                         threshold_single_beam)
from .poles import (ConvergenceFailure, ScaledParams, apply_delta_shift,
                    characteristic, counter_threshold_closed,
                    pole_threshold_numeric, rightmost_root,
                    single_beam_threshold_implicit)
from .dynamics import (IntegratorConfig, NotReached, RampSchedule,
                       StepSizeUnderflow, SystemState, TimeTrace,
                       VelocityClass, detect_threshold, integrate,
                       make_velocity_ensemble, mean_field_rhs,
                       photons_per_atom)
from .spectrum import (AboveThreshold, SpectrumTrace, critical_transmission,
                       default_probe_grid, tavis_cummings_transmission)

__all__ = [
    "__version__",
    "OverflowDomain", "dawson", "dawson_from_erfcx", "erfcx",
    "RB87_MASS", "DEFAULT_WAVELENGTH", "TEMPERATURE_FRACTION",
    "ExperimentConfig", "ModelParams", "derive_model_params",
    "doppler_width", "raman_detunings",
    "Geometry", "InvalidRegime", "InvalidState", "ThresholdModel",
    "ThresholdResult", "threshold_decay", "threshold_doppler",
    "threshold_ideal", "threshold_single_beam",
    "ConvergenceFailure", "ScaledParams", "apply_delta_shift",
    "characteristic", "counter_threshold_closed", "pole_threshold_numeric",
    "rightmost_root", "single_beam_threshold_implicit",
    "IntegratorConfig", "NotReached", "RampSchedule", "StepSizeUnderflow",
    "SystemState", "TimeTrace", "VelocityClass", "detect_threshold",
    "integrate", "make_velocity_ensemble", "mean_field_rhs",
    "photons_per_atom",
    "AboveThreshold", "SpectrumTrace", "critical_transmission",
    "default_probe_grid", "tavis_cummings_transmission",
]
