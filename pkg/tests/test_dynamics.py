import io
import math

import numpy as np
import pytest

from superlab import (IntegratorConfig, ModelParams, NotReached,
                      RampSchedule, StepSizeUnderflow, SystemState, TimeTrace,
                      VelocityClass, detect_threshold, integrate,
                      make_velocity_ensemble, mean_field_rhs,
                      photons_per_atom)

TAU = 2 * math.pi


def make_mp(**overrides):
    base = dict(omega=TAU * 100e3, omega_0=TAU * 215e3, delta=0.0,
                omega_d=0.0, delta_omega_ss=0.0, lambda_r=0.0,
                lambda_s=0.0, gamma_d=0.0, kappa=TAU * 150e3,
                gamma=0.0, sigma_z0=-0.5)
    base.update(overrides)
    return ModelParams(**base)


def single_class(sx=0.0, sy=0.0, sz=-0.5, v=0.0):
    return (VelocityClass(weight=1.0, v=v, sx=sx, sy=sy, sz=sz,
                          phase_shift=0.0),)


# ---------------------------------------------------------------- containers

def test_velocity_class_rejects_overlong_spin():
    with pytest.raises(ValueError):
        VelocityClass(weight=1.0, v=0.0, sx=0.5, sy=0.5, sz=0.5,
                      phase_shift=0.0)
    with pytest.raises(ValueError):
        VelocityClass(weight=-0.1, v=0.0, sx=0.0, sy=0.0, sz=-0.5,
                      phase_shift=0.0)


def test_system_state_normalizes_weights():
    with pytest.raises(ValueError):
        SystemState(0.0, (VelocityClass(weight=0.7, v=0.0, sx=0, sy=0,
                                        sz=-0.5, phase_shift=0.0),))


def test_ramp_schedule_couplings():
    sch = RampSchedule.linear((0.0, 10.0), (5.0, 7.0), 1.0, 3.0)
    assert sch.couplings(0.5) == (0.0, 5.0)
    assert sch.couplings(2.0) == (5.0, 6.0)
    assert sch.couplings(3.0) == (10.0, 7.0)
    assert sch.couplings(99.0) == (10.0, 7.0)
    const = RampSchedule.constant(2.0, 3.0)
    assert const.couplings(0.0) == const.couplings(1e9) == (2.0, 3.0)


def test_ensemble_is_normalized_gaussian_quadrature():
    gd = TAU * 59e3
    classes = make_velocity_ensemble(gd, 15)
    w = np.array([c.weight for c in classes])
    kv = np.array([c.phase_shift for c in classes])
    assert w.sum() == pytest.approx(1.0, rel=1e-12)
    # second moment of the sampled shifts reproduces gamma_d^2 exactly
    assert (w * kv**2).sum() == pytest.approx(gd**2, rel=1e-12)
    assert kv[len(kv) // 2] == 0.0
    np.testing.assert_allclose(kv, -kv[::-1], atol=1e-6)
    with pytest.raises(ValueError):
        make_velocity_ensemble(gd, 4)


# ------------------------------------------------------------------ dynamics

def test_empty_cavity_decay_law():
    mp = make_mp(omega=0.0, kappa=TAU * 30e3)
    state = SystemState(1.0, single_class())
    cfg = IntegratorConfig(t_final=15e-6, sample_dt=0.5e-6, n_atoms=1.0)
    trace = integrate(state, mp, RampSchedule.constant(0.0, 0.0), cfg)
    expect = np.exp(-2 * mp.kappa * trace.t)
    np.testing.assert_allclose(trace.intensity, expect, rtol=1e-8)
    # spins never move without coupling
    assert trace.jz == pytest.approx(-0.5, abs=1e-15)


def test_free_spin_precession_frequency():
    # a tilted spin precesses at omega_0 + kv; the cavity stays empty
    kv = TAU * 40e3
    mp = make_mp(kappa=TAU * 50e3)
    cls = (VelocityClass(weight=1.0, v=0.0, sx=0.4, sy=0.0, sz=-0.3,
                         phase_shift=kv),)
    cfg = IntegratorConfig(t_final=20e-6, sample_dt=0.1e-6, n_atoms=1.0,
                           alpha_seed=0.0, store_spins=True)
    trace = integrate(SystemState(0.0, cls), mp, RampSchedule.constant(0, 0),
                      cfg)
    s_minus = trace.spins[:, 0, 0] + 1j * trace.spins[:, 0, 1]
    expect = 0.4 * np.exp(-1j * (mp.omega_0 + kv) * trace.t)
    np.testing.assert_allclose(s_minus, expect, atol=1e-7)
    np.testing.assert_allclose(trace.spins[:, 0, 2], -0.3, atol=1e-10)


def test_gamma_relaxation_rates():
    # with the cavity empty, sz relaxes at 2*gamma and s- dephases at gamma
    gamma = TAU * 10e3
    mp = make_mp(gamma=gamma)
    cls = (VelocityClass(weight=1.0, v=0.0, sx=0.3, sy=0.0, sz=0.2,
                         phase_shift=0.0),)
    cfg = IntegratorConfig(t_final=20e-6, sample_dt=1e-6, n_atoms=1.0,
                           alpha_seed=0.0, store_spins=True)
    trace = integrate(SystemState(0.0, cls), mp, RampSchedule.constant(0, 0),
                      cfg)
    sz = trace.spins[:, 0, 2]
    np.testing.assert_allclose(sz + 0.5, 0.7 * np.exp(-2 * gamma * trace.t),
                               rtol=1e-8)
    mag = np.hypot(trace.spins[:, 0, 0], trace.spins[:, 0, 1])
    np.testing.assert_allclose(mag, 0.3 * np.exp(-gamma * trace.t),
                               rtol=1e-7)


def test_spin_length_conserved_without_decay():
    mp = make_mp(gamma_d=TAU * 59e3)
    classes = make_velocity_ensemble(mp.gamma_d, 7)
    lam = TAU * 120e3
    sch = RampSchedule.linear((0.0, lam), (0.0, lam), 0.0, 0.5e-3)
    cfg = IntegratorConfig(t_final=1e-3, sample_dt=5e-6, store_spins=True)
    trace = integrate(SystemState(0.0, classes), mp, sch, cfg)
    length = np.sqrt((trace.spins**2).sum(axis=2))
    drift = np.abs(length / 0.5 - 1.0)
    assert drift.max() < 1e-9


def test_single_beam_photon_number_conservation():
    # with lambda_r = gamma = 0, emitted + stored photons track -N*d(sz)
    mp = make_mp(omega=-TAU * 215e3, kappa=TAU * 100e3)
    n_atoms = 1e5
    lam = TAU * 80e3
    cfg = IntegratorConfig(t_final=0.3e-3, sample_dt=1e-6, n_atoms=n_atoms)
    trace = integrate(SystemState(0.0, single_class()), mp,
                      RampSchedule.constant(0.0, lam), cfg)
    invariant = (trace.intensity - n_atoms * trace.jz
                 + trace.cumulative_photons)
    np.testing.assert_allclose(invariant, invariant[0], rtol=1e-7)
    assert trace.cumulative_photons[-1] > 1.0  # actually emitted something


def test_intensity_and_cumulative_sanity():
    mp = make_mp()
    lam = TAU * 200e3
    cfg = IntegratorConfig(t_final=0.2e-3, sample_dt=1e-6)
    trace = integrate(SystemState(0.0, single_class()), mp,
                      RampSchedule.constant(lam, lam), cfg)
    assert (trace.intensity >= 0).all()
    assert (np.diff(trace.cumulative_photons) >= -1e-9).all()
    assert trace.lambda_t == pytest.approx(lam)
    assert trace.metadata["alpha_seed"] == cfg.alpha_seed


def test_mean_field_rhs_matches_hand_evaluation():
    mp = make_mp(lambda_r=TAU * 10e3, lambda_s=TAU * 30e3, delta=TAU * 5e3)
    cls = (VelocityClass(weight=1.0, v=0.0, sx=0.2, sy=-0.1, sz=-0.4,
                         phase_shift=TAU * 3e3),)
    state = SystemState(0.3 - 0.2j, cls)
    dalpha, dspins = mean_field_rhs(state, mp)

    alpha = 0.3 - 0.2j
    s_minus = 0.2 + 1j * -0.1  # s- = sx + i*sy convention
    s_mean_z = -0.4
    expect_alpha = (-(mp.kappa + 1j * (mp.omega + mp.delta * s_mean_z)) * alpha
                    - 1j * mp.lambda_r * s_minus
                    - 1j * mp.lambda_s * np.conj(s_minus))
    assert dalpha == pytest.approx(expect_alpha, rel=1e-12)

    nu = mp.omega_0 + mp.delta * abs(alpha) ** 2 + TAU * 3e3
    ds = (-1j * nu * s_minus
          + 2j * (mp.lambda_r * alpha + mp.lambda_s * np.conj(alpha)) * (-0.4))
    assert dspins[0, 0] + 1j * dspins[0, 1] == pytest.approx(ds, rel=1e-12)
    dsz = (2 * mp.lambda_r * (alpha * np.conj(s_minus)).imag
           - 2 * mp.lambda_s * (alpha * s_minus).imag)
    assert dspins[0, 2] == pytest.approx(dsz, rel=1e-12)


def test_modulated_class_freezes_at_trap_turning_points():
    # kv(t) = kv*cos(w_T t): after a half period the shift is reversed
    gd = TAU * 59e3
    w_t = TAU * 2e3
    classes = make_velocity_ensemble(gd, 5, omega_T=w_t, modulated=True)
    assert all(c.modulated for c in classes)
    assert all(c.omega_trap == w_t for c in classes)
    mp = make_mp(gamma_d=gd)
    cfg = IntegratorConfig(t_final=0.2e-3, sample_dt=2e-6, store_spins=True,
                           alpha_seed=0.0)
    tilted = tuple(
        VelocityClass(weight=c.weight, v=c.v, sx=0.4, sy=0.0, sz=-0.3,
                      phase_shift=c.phase_shift, omega_trap=c.omega_trap,
                      modulated=True) for c in classes)
    trace = integrate(SystemState(0.0, tilted), mp,
                      RampSchedule.constant(0.0, 0.0), cfg)
    # phase advance of class i is omega_0*t + kv_i * sin(w_T t)/w_T
    kv = np.array([c.phase_shift for c in tilted])
    t = trace.t[-1]
    phases = mp.omega_0 * t + kv * np.sin(w_t * t) / w_t
    s_minus = trace.spins[-1, :, 0] + 1j * trace.spins[-1, :, 1]
    np.testing.assert_allclose(s_minus, 0.4 * np.exp(-1j * phases),
                               atol=1e-6)


def test_step_size_underflow():
    mp = make_mp(kappa=TAU * 5e6)
    cfg = IntegratorConfig(t_final=1e-3, sample_dt=1e-5, min_dt=1e-4)
    with pytest.raises(StepSizeUnderflow):
        integrate(SystemState(1.0, single_class()), mp,
                  RampSchedule.constant(0.0, 0.0), cfg)


# ----------------------------------------------------------------- detection

def synthetic_trace(rate, t_final=1e-3, dt=1e-6, lam=1.0):
    t = np.arange(0.0, t_final + dt / 2, dt)
    cum = rate * t
    return TimeTrace(t=t, intensity=np.zeros_like(t),
                     jz=np.full_like(t, -0.5),
                     cumulative_photons=cum,
                     lambda_t=np.full_like(t, lam), metadata={})


def test_detect_threshold_first_crossing_time():
    # 5 us window at rate r crosses "10 photons" when r*5e-6 > 10
    trace = synthetic_trace(rate=4e6)
    lam = detect_threshold(trace, count_threshold=10.0)
    assert lam == 1.0
    with pytest.raises(NotReached):
        detect_threshold(trace, count_threshold=100.0)


def test_detect_threshold_efficiency_scales_counts():
    trace = synthetic_trace(rate=4e6)
    with pytest.raises(NotReached):
        detect_threshold(trace, count_threshold=10.0, efficiency=0.1)


def test_detect_threshold_reports_coupling_at_crossing():
    t = np.arange(0.0, 1e-3 + 5e-7, 1e-6)
    cum = np.where(t < 0.5e-3, 0.0, (t - 0.5e-3) * 1e8)
    lam_t = np.linspace(0.0, 2.0, t.size)
    trace = TimeTrace(t=t, intensity=np.zeros_like(t),
                      jz=np.full_like(t, -0.5), cumulative_photons=cum,
                      lambda_t=lam_t, metadata={})
    lam = detect_threshold(trace, count_threshold=10.0)
    assert 0.99 < lam < 1.1  # crossing just after the halfway point


def test_photons_per_atom():
    trace = synthetic_trace(rate=1e6, t_final=2e-3)
    assert photons_per_atom(trace, 100.0) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        photons_per_atom(trace, 0.5)


def test_trace_csv_round_trip():
    trace = synthetic_trace(rate=1e6, t_final=1e-5)
    buf = io.StringIO()
    trace.write_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "t_s,intensity_photons,jz,cumulative_photons,lambda_krad_s"
    assert len(lines) == trace.t.size + 1
    row = lines[1].split(",")
    assert float(row[0]) == trace.t[0]
    assert float(row[2]) == -0.5
