"""Configuration-driven harness for threshold sweeps, pulses, and spectra.

Configs are flat ``key = value`` text files (``#`` comments).  External units
follow the lab conventions: frequencies and rates in kHz (cycles), times in
ms, temperatures in uK, lengths in nm, masses in amu.  Internally everything
is converted once to SI angular units; echoed values are always the external
form actually parsed (or the default), so a validate round-trip re-ingests to
bit-identical canonical values.

Outputs are CSV datasets plus a JSON manifest; ``--plot`` adds SVG figures
next to the data.  Exit codes: 0 success, 2 config error, 3 numerical
failure, 4 sweep finished with some failed points.
"""

from __future__ import annotations

import argparse
import dataclasses
import difflib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (IntegratorConfig, RampSchedule, StepSizeUnderflow,
                       SystemState, integrate, make_velocity_ensemble)
from .params import (ExperimentConfig, ModelParams, derive_model_params,
                     doppler_width)
from .poles import (ConvergenceFailure, ScaledParams, apply_delta_shift,
                    pole_threshold_numeric, single_beam_threshold_implicit)
from .spectrum import (AboveThreshold, critical_transmission,
                       default_probe_grid)
from .specfun import OverflowDomain
from .thresholds import (Geometry, InvalidRegime, InvalidState,
                         ThresholdModel, threshold_decay, threshold_doppler,
                         threshold_ideal, threshold_single_beam)

__all__ = [
    "ConfigError",
    "Mode",
    "SweepSpec",
    "ResolvedConfig",
    "validate_config",
    "run_sweep",
    "run_pulse",
    "run_spectrum",
    "main",
]

# exact external->canonical factors; conversions only ever run in this
# direction so echoed externals re-ingest bit-identically
_TAU_KILO = 2000.0 * math.pi
_AMU_KG = 1.66053906892e-27


class ConfigError(ValueError):
    """One or more configuration violations; message lists all of them."""


class Mode(Enum):
    THRESHOLD_VS_OMEGA0 = "ThresholdVsOmega0"
    THRESHOLD_VS_OMEGA = "ThresholdVsOmega"
    SINGLE_BEAM_VS_DETUNING = "SingleBeamVsDetuning"
    CO_PROP_GAP = "CoPropGap"
    PULSE_TRACE = "PulseTrace"
    SPECTRUM = "Spectrum"


_THRESHOLD_MODES = (Mode.THRESHOLD_VS_OMEGA0, Mode.THRESHOLD_VS_OMEGA,
                    Mode.SINGLE_BEAM_VS_DETUNING, Mode.CO_PROP_GAP)

_ALLOWED_MODELS = {
    Mode.THRESHOLD_VS_OMEGA0: (ThresholdModel.IDEAL, ThresholdModel.DECAY,
                               ThresholdModel.DOPPLER,
                               ThresholdModel.POLE_NUMERIC),
    Mode.THRESHOLD_VS_OMEGA: (ThresholdModel.IDEAL, ThresholdModel.DECAY,
                              ThresholdModel.DOPPLER,
                              ThresholdModel.POLE_NUMERIC),
    Mode.SINGLE_BEAM_VS_DETUNING: (ThresholdModel.SINGLE_BEAM,
                                   ThresholdModel.DOPPLER,
                                   ThresholdModel.POLE_NUMERIC),
    Mode.CO_PROP_GAP: (ThresholdModel.POLE_NUMERIC,),
}

_DEFAULT_MODELS = {
    Mode.THRESHOLD_VS_OMEGA0: "Ideal, Doppler",
    Mode.THRESHOLD_VS_OMEGA: "Ideal, Doppler",
    Mode.SINGLE_BEAM_VS_DETUNING: "SingleBeam, Doppler",
    Mode.CO_PROP_GAP: "PoleNumeric",
}

_AXIS_NAME = {
    Mode.THRESHOLD_VS_OMEGA0: "omega_0",
    Mode.THRESHOLD_VS_OMEGA: "omega",
    Mode.SINGLE_BEAM_VS_DETUNING: "delta_cs",
    Mode.CO_PROP_GAP: "omega_0",
}

_AUTO = "auto"


@dataclasses.dataclass(frozen=True)
class _Key:
    unit: str          # khz | khz2 | uk | nm | amu | ms | float | int | bool | str | list
    default: object    # external default, or _AUTO
    help: str


# every recognized config key with its external unit and default
_KEYS: dict[str, _Key] = {
    "mode": _Key("str", "ThresholdVsOmega0", "run recipe"),
    "derive": _Key("bool", False,
                   "derive effective parameters from the drive/cavity keys"),
    # experiment-level inputs (see params.ExperimentConfig)
    "g_avg": _Key("khz", 0.5, "cloud-averaged vacuum Rabi coupling"),
    "g2_avg": _Key("khz2", 0.3, "cloud-averaged squared coupling"),
    "kappa": _Key("khz", 150.0, "cavity field decay rate"),
    "gamma_a": _Key("khz", 6070.0, "excited-state linewidth"),
    "Delta": _Key("khz", -2.0e6, "drive detuning from the excited state"),
    "Omega_r": _Key("khz", 10000.0, "r-beam Rabi frequency"),
    "Omega_s": _Key("khz", 10000.0, "s-beam Rabi frequency"),
    "omega_1": _Key("khz", 10000.0, "ground-state splitting"),
    "N": _Key("int", 1000000, "atom number"),
    "carrier_detuning": _Key("khz", 100.0,
                             "two-photon carrier offset from cavity"),
    "eom_half_split": _Key("khz", 9785.0, "half the sideband separation"),
    "theta_r": _Key("float", 0.0, "r-beam angle to cavity axis (rad)"),
    "theta_s": _Key("float", 3.141592653589793,
                    "s-beam angle to cavity axis (rad)"),
    "trap_depth": _Key("uk", 219.0, "optical trap depth"),
    "trap_freq": _Key("khz", 0.13, "harmonic trap frequency"),
    "wavelength": _Key("nm", 780.0, "optical wavelength"),
    "atom_mass": _Key("amu", 86.909180527, "atomic mass"),
    # effective model parameters (auto: derived or lab defaults)
    "omega": _Key("khz", _AUTO, "cavity detuning from mean drive frequency"),
    "omega_0": _Key("khz", _AUTO, "effective spin splitting"),
    "delta": _Key("khz", _AUTO, "dispersive cavity nonlinearity"),
    "gamma": _Key("khz", 0.0, "collective spin decay rate"),
    "gamma_d": _Key("khz", _AUTO, "Doppler width (auto: from trap_depth)"),
    "sigma_z0": _Key("float", -0.5, "initial spin-z expectation"),
    # pulse schedule and integrator
    "lambda_r_start": _Key("khz", _AUTO, "r coupling at ramp start"),
    "lambda_r_end": _Key("khz", _AUTO, "r coupling at ramp end"),
    "lambda_s_start": _Key("khz", _AUTO, "s coupling at ramp start"),
    "lambda_s_end": _Key("khz", _AUTO, "s coupling at ramp end"),
    "t_ramp_start": _Key("ms", 0.0, "ramp start time"),
    "t_ramp_end": _Key("ms", 3.0, "ramp end time"),
    "t_final": _Key("ms", 5.0, "integration horizon"),
    "sample_dt": _Key("ms", 0.002, "output sampling interval"),
    "alpha_seed": _Key("float", 1.0e-4, "symmetry-breaking seed field"),
    "n_atoms": _Key("float", _AUTO, "photon-number scale (auto: N)"),
    "tol": _Key("float", 1.0e-10, "integrator relative tolerance"),
    "atol": _Key("float", 1.0e-13, "integrator absolute tolerance"),
    "min_dt": _Key("ms", 0.0, "abort when steps fall below this"),
    "method": _Key("str", "DOP853", "integrator (DOP853 or RK45)"),
    "n_classes": _Key("int", 15, "velocity classes (odd)"),
    "modulated": _Key("bool", False, "harmonic velocity modulation"),
    # sweep axis and model set
    "axis_start": _Key("khz", 50.0, "sweep axis start"),
    "axis_stop": _Key("khz", 500.0, "sweep axis stop"),
    "axis_points": _Key("int", 25, "sweep axis points"),
    "models": _Key("list", _AUTO, "threshold models (auto: per mode)"),
    # spectrum controls
    "lambda_frac": _Key("float", 0.8, "coupling as a fraction of lambda_c"),
    "use_doppler": _Key("bool", False, "Gaussian-averaged response"),
    "probe_points": _Key("int", 801, "probe grid points"),
}


def _to_canonical(unit: str, v):
    if unit == "khz":
        return v * _TAU_KILO
    if unit == "khz2":
        return v * _TAU_KILO * _TAU_KILO
    if unit == "uk":
        return v * 1.0e-6
    if unit == "nm":
        return v * 1.0e-9
    if unit == "amu":
        return v * _AMU_KG
    if unit == "ms":
        return v * 1.0e-3
    return v


def _parse_value(key: str, unit: str, text: str):
    if unit == "bool":
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {text!r}")
    if unit == "int":
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"{key}: expected an integer, got {text!r}") from None
    if unit == "str":
        return text
    if unit == "list":
        return ", ".join(p.strip() for p in text.split(",") if p.strip())
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"{key}: expected a number, got {text!r}") from None


def _format_external(unit: str, v) -> str:
    if unit == "bool":
        return "true" if v else "false"
    if unit in ("str", "list"):
        return str(v)
    if unit == "int":
        return str(int(v))
    return repr(float(v))


@dataclasses.dataclass
class ResolvedConfig:
    """Parsed config: external values plus provenance, canonical on demand."""

    external: dict
    provenance: dict

    def canonical(self, key: str):
        return _to_canonical(_KEYS[key].unit, self.external[key])

    def __getitem__(self, key: str):
        return self.canonical(key)

    @property
    def mode(self) -> Mode:
        return Mode(self.external["mode"])

    def echo(self) -> str:
        lines = []
        for key, spec in _KEYS.items():
            ext = _format_external(spec.unit, self.external[key])
            lines.append(f"{key} = {ext}  # {self.provenance[key]}")
        return "\n".join(lines) + "\n"

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(
            g_avg=self["g_avg"], g2_avg=self["g2_avg"], kappa=self["kappa"],
            gamma_a=self["gamma_a"], Delta=self["Delta"],
            Omega_r=self["Omega_r"], Omega_s=self["Omega_s"],
            omega_1=self["omega_1"], N=self.external["N"],
            carrier_detuning=self["carrier_detuning"],
            eom_half_split=self["eom_half_split"],
            theta_r=self["theta_r"], theta_s=self["theta_s"],
            trap_depth=self["trap_depth"], trap_freq=self["trap_freq"],
            wavelength=self["wavelength"], atom_mass=self["atom_mass"])

    def model_params(self) -> ModelParams:
        return ModelParams(
            omega=self["omega"], omega_0=self["omega_0"], delta=self["delta"],
            omega_d=0.0, delta_omega_ss=0.0, lambda_r=0.0, lambda_s=0.0,
            gamma_d=self["gamma_d"], kappa=self["kappa"],
            gamma=self["gamma"], sigma_z0=self.external["sigma_z0"])

    def models(self) -> tuple[ThresholdModel, ...]:
        names = [p.strip() for p in self.external["models"].split(",")]
        return tuple(ThresholdModel(n) for n in names)


def _suggest(key: str) -> str:
    close = difflib.get_close_matches(key, _KEYS, n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


def _read_pairs(path) -> tuple[dict, list]:
    pairs: dict[str, str] = {}
    errors: list[str] = []
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append(f"line {lineno}: expected 'key = value', got {body!r}")
            continue
        key, _, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}{_suggest(key)}")
        elif key in pairs:
            errors.append(f"line {lineno}: duplicate key {key!r}")
        elif not value:
            errors.append(f"line {lineno}: empty value for {key!r}")
        else:
            pairs[key] = value
    return pairs, errors


def _externalize(unit: str, canonical_value: float) -> float:
    # inverse conversion used only to seed auto defaults; the result is then
    # treated as if the user had typed it, keeping the echo round-trip exact
    if unit == "khz":
        return canonical_value / _TAU_KILO
    if unit == "ms":
        return canonical_value / 1.0e-3
    return canonical_value


def validate_config(path) -> ResolvedConfig:
    """Parse, default-fill, derive, and validate a config file.

    Raises ConfigError listing every violation found; on success the returned
    object echoes each parameter with its provenance (user/default/derived).
    """
    pairs, errors = _read_pairs(path)
    external: dict = {}
    provenance: dict = {}
    for key, spec in _KEYS.items():
        if key in pairs:
            try:
                external[key] = _parse_value(key, spec.unit, pairs[key])
                provenance[key] = "user"
            except ValueError as exc:
                errors.append(str(exc))
                external[key] = spec.default
                provenance[key] = "default"
        else:
            external[key] = spec.default
            provenance[key] = "default"

    rc = ResolvedConfig(external, provenance)

    mode = None
    if external["mode"] in {m.value for m in Mode}:
        mode = rc.mode
    else:
        errors.append(f"mode: unknown mode {external['mode']!r}; valid: "
                      + ", ".join(m.value for m in Mode))

    # experiment-level invariants come from the domain type itself
    derived = None
    try:
        exp = rc.experiment()
        if external["derive"]:
            derived = derive_model_params(
                exp, gamma=rc["gamma"], sigma_z0=external["sigma_z0"])
    except (ValueError, ZeroDivisionError) as exc:
        errors.append(str(exc))

    # fill auto keys, derivation first, lab defaults otherwise
    auto_fill: dict[str, tuple[str, float]] = {}
    if derived is not None:
        auto_fill = {
            "omega": ("khz", derived.omega),
            "omega_0": ("khz", derived.omega_0),
            "delta": ("khz", derived.delta),
            "gamma_d": ("khz", derived.gamma_d),
            "lambda_r_start": ("khz", derived.lambda_r),
            "lambda_r_end": ("khz", derived.lambda_r),
            "lambda_s_start": ("khz", derived.lambda_s),
            "lambda_s_end": ("khz", derived.lambda_s),
        }
    else:
        gd = doppler_width(rc["trap_depth"], rc["wavelength"],
                           rc["atom_mass"]) if rc["trap_depth"] > 0 else 0.0
        auto_fill = {
            "omega": ("khz", 100.0 * _TAU_KILO),
            "omega_0": ("khz", 215.0 * _TAU_KILO),
            "delta": ("khz", 0.0),
            "gamma_d": ("khz", gd),
            "lambda_r_start": ("khz", 0.0),
            "lambda_r_end": ("khz", 150.0 * _TAU_KILO),
            "lambda_s_start": ("khz", 0.0),
            "lambda_s_end": ("khz", 150.0 * _TAU_KILO),
        }
    auto_fill["n_atoms"] = ("float", float(external["N"]))
    auto_fill["models"] = ("list", _DEFAULT_MODELS.get(mode, "Ideal"))
    for key, (unit, canon) in auto_fill.items():
        if external[key] == _AUTO:
            external[key] = (canon if unit in ("float", "list")
                             else _externalize(unit, canon))
            provenance[key] = "derived" if derived is not None \
                and key not in ("n_atoms", "models") else "default"

    # cross-field checks, all collected
    if external["axis_points"] < 2:
        errors.append("axis_points: must be >= 2")
    if external["mode"] in {m.value for m in _THRESHOLD_MODES}:
        try:
            models = rc.models()
            bad = [m.value for m in models if m not in _ALLOWED_MODELS[mode]]
            if bad:
                allowed = ", ".join(m.value for m in _ALLOWED_MODELS[mode])
                errors.append(f"models: {', '.join(bad)} not valid for "
                              f"{mode.value} (allowed: {allowed})")
            if not models:
                errors.append("models: at least one model required")
        except ValueError:
            valid = ", ".join(m.value for m in ThresholdModel)
            errors.append(f"models: unknown model in "
                          f"{external['models']!r} (valid: {valid})")
    if rc["kappa"] <= 0:
        errors.append("kappa: must be > 0")
    if rc["gamma"] < 0:
        errors.append("gamma: must be >= 0")
    if rc["gamma_d"] < 0:
        errors.append("gamma_d: must be >= 0")
    if not external["sigma_z0"] < 0:
        errors.append("sigma_z0: must be < 0 (inverted ensembles have no "
                      "normal-phase threshold)")
    if external["method"] not in ("DOP853", "RK45"):
        errors.append("method: must be DOP853 or RK45")
    if external["n_classes"] < 1 or external["n_classes"] % 2 == 0:
        errors.append("n_classes: must be odd and >= 1")
    if not (external["tol"] > 0 and external["atol"] > 0):
        errors.append("tol/atol: must be > 0")
    if rc["t_final"] <= 0:
        errors.append("t_final: must be > 0")
    if rc["sample_dt"] <= 0:
        errors.append("sample_dt: must be > 0")
    if rc["t_ramp_end"] < rc["t_ramp_start"]:
        errors.append("t_ramp_end: must be >= t_ramp_start")
    for k in ("lambda_r_start", "lambda_r_end",
              "lambda_s_start", "lambda_s_end"):
        if rc[k] < 0:
            errors.append(f"{k}: must be >= 0")
    if not 0.0 <= external["lambda_frac"] < 1.0:
        errors.append("lambda_frac: must satisfy 0 <= lambda_frac < 1 "
                      "(linear response is invalid at threshold)")
    if external["probe_points"] < 2:
        errors.append("probe_points: must be >= 2")
    if errors:
        raise ConfigError("\n".join(errors))
    return rc


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    """A threshold-sweep recipe: what to vary, what to hold, which models."""

    mode: Mode
    fixed: dict
    sweep_axis: tuple  # (name, start, stop, n_points), canonical units
    models: tuple

    def __post_init__(self):
        if self.mode not in _THRESHOLD_MODES:
            raise ValueError(f"{self.mode.value} is not a threshold sweep")
        name, _, _, n = self.sweep_axis
        if n < 2:
            raise ValueError("sweep_axis needs n_points >= 2")
        if name in self.fixed:
            raise ValueError(f"axis {name!r} also appears in fixed")
        for m in self.models:
            if m not in _ALLOWED_MODELS[self.mode]:
                raise ValueError(f"{m.value} not valid for {self.mode.value}")


def _sweep_spec(rc: ResolvedConfig) -> SweepSpec:
    mode = rc.mode
    axis = _AXIS_NAME[mode]
    fixed = {"omega": rc["omega"], "omega_0": rc["omega_0"],
             "kappa": rc["kappa"], "gamma": rc["gamma"],
             "gamma_d": rc["gamma_d"], "delta": rc["delta"],
             "sigma_z0": rc.external["sigma_z0"]}
    fixed.pop(axis, None)
    return SweepSpec(mode=mode, fixed=fixed,
                     sweep_axis=(axis, rc["axis_start"], rc["axis_stop"],
                                 rc.external["axis_points"]),
                     models=rc.models())


def _eval_threshold_point(task) -> dict:
    """One (model, axis value) evaluation; total, returns a row dict."""
    mode, model, axis, value, fixed = task
    p = dict(fixed)
    p[axis] = value
    row = {"axis_value": value, "lambda_c": None, "exists": False,
           "model": model.value, "geometry": Geometry.COUNTER_PROP.value,
           "error": None}
    try:
        if mode is Mode.SINGLE_BEAM_VS_DETUNING:
            row["geometry"] = Geometry.SINGLE.value
            if model is ThresholdModel.SINGLE_BEAM:
                res = threshold_single_beam(p["delta_cs"], p["kappa"],
                                            p["gamma"], p["sigma_z0"])
                row["lambda_c"], row["exists"] = res.lambda_c, res.exists
            elif model is ThresholdModel.DOPPLER:
                s = p["gamma_d"] * math.sqrt(2.0)
                if s <= 0.0:
                    raise InvalidRegime("Doppler model needs gamma_d > 0")
                lam = single_beam_threshold_implicit(p["delta_cs"] / s,
                                                     p["kappa"] / s) * s
                row["lambda_c"], row["exists"] = lam, True
            else:
                sp = ScaledParams.from_raw(p["kappa"], 0.0, -p["delta_cs"],
                                           0.0, 0.0, p["gamma_d"])
                res = pole_threshold_numeric(Geometry.SINGLE, sp)
                row["exists"] = res.exists
                if res.exists:
                    row["lambda_c"] = res.lambda_c * sp.scale
        elif model is ThresholdModel.POLE_NUMERIC:
            g = (Geometry.CO_PROP if mode is Mode.CO_PROP_GAP
                 else Geometry.COUNTER_PROP)
            row["geometry"] = g.value
            sp = ScaledParams.from_raw(p["kappa"], p["omega"], p["omega_0"],
                                       0.0, 0.0, p["gamma_d"])
            sp = apply_delta_shift(sp, p["delta"])
            res = pole_threshold_numeric(g, sp)
            row["exists"] = res.exists
            if res.exists:
                row["lambda_c"] = res.lambda_c * sp.scale
        elif model is ThresholdModel.IDEAL:
            res = threshold_ideal(p["omega"], p["omega_0"], p["kappa"])
            row["lambda_c"], row["exists"] = res.lambda_c, res.exists
        elif model is ThresholdModel.DECAY:
            res = threshold_decay(p["omega"], p["omega_0"], p["kappa"],
                                  p["gamma"], p["sigma_z0"], p["delta"])
            row["lambda_c"], row["exists"] = res.lambda_c, res.exists
        elif model is ThresholdModel.DOPPLER:
            res = threshold_doppler(p["omega"], p["omega_0"], p["kappa"],
                                    p["gamma_d"], p["delta"])
            row["lambda_c"], row["exists"] = res.lambda_c, res.exists
        else:
            raise InvalidRegime(f"model {model.value} not valid here")
        if row["lambda_c"] is not None and not math.isfinite(row["lambda_c"]):
            row["lambda_c"], row["exists"] = None, False
    except (InvalidRegime, InvalidState, ConvergenceFailure, OverflowDomain,
            ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _out_dir(out) -> Path:
    base = out or os.environ.get("SUPERLAB_OUT") or "."
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(path: Path, rc, extra: dict) -> None:
    doc = {"version": __version__,
           "config": {k: _format_external(_KEYS[k].unit, v)
                      for k, v in rc.external.items()}}
    doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclasses.dataclass
class SweepOutcome:
    csv_paths: list
    manifest_path: Path
    n_failed: int


def run_sweep(spec: SweepSpec, out_dir=None, *, rc: ResolvedConfig = None,
              plot: bool = False, jobs: int = 1) -> SweepOutcome:
    """Evaluate every (model, axis point) pair and write one CSV per model.

    Rows keep axis order regardless of worker scheduling; points that raise
    are recorded as exists=false with the error kept in the manifest, and
    counted in the outcome so the CLI can signal a partial sweep.
    """
    t0 = time.perf_counter()
    out = _out_dir(out_dir)
    name, start, stop, n = spec.sweep_axis
    axis_values = np.linspace(start, stop, n)
    tasks = [(spec.mode, model, name, float(v), spec.fixed)
             for model in spec.models for v in axis_values]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_eval_threshold_point, tasks,
                                 chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_eval_threshold_point(t) for t in tasks]

    csv_paths = []
    failures = {}
    n_failed = 0
    for i, model in enumerate(spec.models):
        path = out / f"{spec.mode.value}_{model.value}.csv"
        with open(path, "w") as fh:
            fh.write("axis_value_khz,lambda_c_khz,exists,model,geometry\n")
            for row in rows[i * n:(i + 1) * n]:
                lam = ("" if row["lambda_c"] is None
                       else repr(row["lambda_c"] / _TAU_KILO))
                fh.write(f"{row['axis_value'] / _TAU_KILO!r},{lam},"
                         f"{'true' if row['exists'] else 'false'},"
                         f"{row['model']},{row['geometry']}\n")
                if row["error"] is not None:
                    n_failed += 1
                    failures.setdefault(model.value, {})[
                        repr(row["axis_value"] / _TAU_KILO)] = row["error"]
        csv_paths.append(path)

    if plot:
        _plot_sweep(out / f"{spec.mode.value}.svg", spec, axis_values, rows)
        csv_paths.append(out / f"{spec.mode.value}.svg")
    manifest = out / f"{spec.mode.value}_manifest.json"
    extra = {"mode": spec.mode.value,
             "outputs": [p.name for p in csv_paths],
             "failures": failures,
             "wall_time_s": time.perf_counter() - t0}
    if rc is not None:
        _write_manifest(manifest, rc, extra)
    else:
        with open(manifest, "w") as fh:
            json.dump({"version": __version__, **extra}, fh,
                      indent=2, sort_keys=True)
            fh.write("\n")
    return SweepOutcome(csv_paths, manifest, n_failed)


def _agg_axes():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _plot_sweep(path: Path, spec: SweepSpec, axis_values, rows) -> None:
    plt = _agg_axes()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    n = len(axis_values)
    for i, model in enumerate(spec.models):
        xs, ys = [], []
        for row in rows[i * n:(i + 1) * n]:
            if row["exists"] and row["lambda_c"] is not None:
                xs.append(row["axis_value"] / _TAU_KILO)
                ys.append(row["lambda_c"] / _TAU_KILO)
        ax.plot(xs, ys, marker="o", ms=3, label=model.value)
    ax.set_xlabel(f"{spec.sweep_axis[0]} (kHz)")
    ax.set_ylabel("critical coupling (kHz)")
    ax.set_title(spec.mode.value)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def run_pulse(config, out_dir=None, *, plot: bool = False) -> Path:
    """Integrate the configured ramp and write the trace CSV (+ SVG)."""
    t0 = time.perf_counter()
    rc = config if isinstance(config, ResolvedConfig) else validate_config(config)
    out = _out_dir(out_dir)
    mp = rc.model_params()
    ensemble = make_velocity_ensemble(rc["gamma_d"],
                                      rc.external["n_classes"],
                                      omega_T=rc["trap_freq"],
                                      modulated=rc.external["modulated"])
    schedule = RampSchedule(rc["lambda_r_start"], rc["lambda_s_start"],
                            rc["lambda_r_end"], rc["lambda_s_end"],
                            rc["t_ramp_start"], rc["t_ramp_end"])
    cfg = IntegratorConfig(t_final=rc["t_final"], sample_dt=rc["sample_dt"],
                           tol=rc.external["tol"], atol=rc.external["atol"],
                           alpha_seed=rc.external["alpha_seed"],
                           min_dt=rc["min_dt"], n_atoms=rc["n_atoms"],
                           method=rc.external["method"])
    trace = integrate(SystemState(0.0, ensemble), mp, schedule, cfg)
    path = out / "pulse.csv"
    with open(path, "w") as fh:
        trace.write_csv(fh)
    if plot:
        _plot_pulse(out / "pulse.svg", rc, trace)
    _write_manifest(out / "pulse_manifest.json", rc,
                    {"mode": Mode.PULSE_TRACE.value, "outputs": [path.name],
                     "wall_time_s": time.perf_counter() - t0})
    return path


def _plot_pulse(path: Path, rc: ResolvedConfig, trace) -> None:
    plt = _agg_axes()
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 5.5), sharex=True)
    t_ms = trace.t * 1.0e3
    ax1.plot(t_ms, trace.intensity, lw=0.8)
    ax1.set_ylabel("intracavity photons")
    ax2.plot(t_ms, trace.cumulative_photons, lw=0.8, label="cumulative")
    ax2.set_ylabel("emitted photons")
    ax2.set_xlabel("t (ms)")
    axr = ax2.twinx()
    axr.plot(t_ms, trace.lambda_t / _TAU_KILO, "C1--", lw=0.8, label="coupling")
    axr.set_ylabel("coupling (kHz)")
    omega_t = rc["trap_freq"]
    if rc.provenance["trap_freq"] == "user" and omega_t > 0:
        half_period = math.pi / omega_t
        marker = half_period
        while marker < trace.t[-1]:
            for ax in (ax1, ax2):
                ax.axvline(marker * 1.0e3, color="0.8", lw=0.6, zorder=0)
            marker += half_period
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def run_spectrum(config, out_dir=None, *, plot: bool = False) -> Path:
    """Evaluate the configured transmission scan and write its CSV (+ SVG)."""
    t0 = time.perf_counter()
    rc = config if isinstance(config, ResolvedConfig) else validate_config(config)
    out = _out_dir(out_dir)
    mp = rc.model_params()
    grid = default_probe_grid(mp, rc.external["probe_points"])
    trace = critical_transmission(grid, mp, rc.external["lambda_frac"],
                                  use_doppler=rc.external["use_doppler"])
    path = out / "spectrum.csv"
    with open(path, "w") as fh:
        trace.write_csv(fh)
    if plot:
        plt = _agg_axes()
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.plot(trace.probe_detuning / 1.0e3, trace.transmission, lw=0.9)
        ax.set_xlabel("probe detuning (krad/s)")
        ax.set_ylabel("normalized transmission")
        ax.set_title(f"lambda/lambda_c = {trace.lambda_frac}")
        fig.tight_layout()
        fig.savefig(out / "spectrum.svg")
        plt.close(fig)
    _write_manifest(out / "spectrum_manifest.json", rc,
                    {"mode": Mode.SPECTRUM.value, "outputs": [path.name],
                     "wall_time_s": time.perf_counter() - t0})
    return path


_NUMERIC_ERRORS = (StepSizeUnderflow, ConvergenceFailure, InvalidRegime,
                   InvalidState, AboveThreshold, OverflowDomain)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="superlab",
        description="Threshold sweeps, pulse simulations, and transmission "
                    "spectra for a driven collective-spin cavity system.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (("threshold", "run a threshold sweep"),
                        ("pulse", "integrate a coupling ramp"),
                        ("spectrum", "compute a transmission scan"),
                        ("validate", "check a config and echo it resolved")):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("config", help="flat key=value config file")
        if name != "validate":
            p.add_argument("--plot", action="store_true",
                           help="emit SVG figures next to the CSV output")
            p.add_argument("--out", default=None,
                           help="output directory (default: $SUPERLAB_OUT or .)")
        if name == "threshold":
            p.add_argument("--jobs", type=int, default=os.cpu_count(),
                           help="sweep worker processes")
    args = parser.parse_args(argv)

    try:
        rc = validate_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error(s) in {args.config}:\n{exc}", file=sys.stderr)
        return 2

    mode = rc.mode
    try:
        if args.command == "validate":
            sys.stdout.write(rc.echo())
            return 0
        if args.command == "threshold":
            if mode not in _THRESHOLD_MODES:
                print(f"config error: mode {mode.value} is not a threshold "
                      "sweep mode", file=sys.stderr)
                return 2
            outcome = run_sweep(_sweep_spec(rc), args.out, rc=rc,
                                plot=args.plot, jobs=args.jobs)
            for p in outcome.csv_paths:
                print(p)
            if outcome.n_failed:
                print(f"{outcome.n_failed} point(s) failed; see manifest",
                      file=sys.stderr)
                return 4
            return 0
        if args.command == "pulse":
            if mode is not Mode.PULSE_TRACE:
                print("config error: pulse command needs mode = PulseTrace",
                      file=sys.stderr)
                return 2
            print(run_pulse(rc, args.out, plot=args.plot))
            return 0
        if mode is not Mode.SPECTRUM:
            print("config error: spectrum command needs mode = Spectrum",
                  file=sys.stderr)
            return 2
        print(run_spectrum(rc, args.out, plot=args.plot))
        return 0
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
