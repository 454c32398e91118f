import io
import math

import numpy as np
import pytest

from superlab import (AboveThreshold, InvalidRegime, ModelParams,
                      SpectrumTrace, critical_transmission,
                      default_probe_grid, tavis_cummings_transmission,
                      threshold_decay)

TAU = 2 * math.pi


def make_mp(**overrides):
    base = dict(omega=TAU * 100e3, omega_0=TAU * 215e3, delta=0.0,
                omega_d=0.0, delta_omega_ss=0.0, lambda_r=0.0,
                lambda_s=0.0, gamma_d=0.0, kappa=TAU * 150e3,
                gamma=TAU * 20e3, sigma_z0=-0.5)
    base.update(overrides)
    return ModelParams(**base)


def lorentzian(x, center, kappa):
    return kappa**2 / (kappa**2 + (x - center) ** 2)


def test_empty_cavity_is_exact_lorentzian():
    mp = make_mp()
    grid = default_probe_grid(mp)
    for use_doppler in (False, True):
        m = make_mp(gamma_d=TAU * 59e3) if use_doppler else mp
        trace = critical_transmission(grid, m, 0.0, use_doppler=use_doppler)
        expect = lorentzian(grid, m.omega, m.kappa)
        np.testing.assert_allclose(trace.transmission, expect, rtol=1e-10)
        assert trace.transmission.max() == 1.0  # grid contains the peak


def test_peak_transmission_grows_toward_threshold():
    mp = make_mp()
    grid = np.array([0.0])  # probe exactly at the drive frequency
    peaks = [critical_transmission(grid, mp, f).transmission[0]
             for f in (0.0, 0.5, 0.8, 0.95)]
    assert all(b > a for a, b in zip(peaks, peaks[1:]))
    assert peaks[-1] > 10 * peaks[0]


def test_doppler_route_matches_cold_limit():
    mp_cold = make_mp(gamma=0.0)
    mp_warm = make_mp(gamma=0.0, gamma_d=1e-4 * TAU * 215e3)
    grid = default_probe_grid(mp_cold, 201)
    a = critical_transmission(grid, mp_cold, 0.7, use_doppler=False)
    b = critical_transmission(grid, mp_warm, 0.7, use_doppler=True)
    np.testing.assert_allclose(b.transmission, a.transmission, rtol=2e-3,
                               atol=1e-8)


def test_metadata_reports_threshold():
    mp = make_mp()
    grid = np.array([0.0, 1.0])
    trace = critical_transmission(grid, mp, 0.5)
    lam_c = threshold_decay(mp.omega, mp.omega_0, mp.kappa, mp.gamma,
                            mp.sigma_z0, mp.delta).lambda_c
    assert trace.metadata["lambda_c"] == pytest.approx(lam_c, rel=1e-14)
    assert trace.lambda_frac == 0.5


def test_above_threshold_rejected():
    mp = make_mp()
    grid = np.array([0.0])
    with pytest.raises(AboveThreshold):
        critical_transmission(grid, mp, 1.0)
    with pytest.raises(ValueError):
        critical_transmission(grid, mp, -0.1)


def test_doppler_route_requires_thermal_width_and_full_inversion():
    grid = np.array([0.0])
    with pytest.raises(InvalidRegime):
        critical_transmission(grid, make_mp(gamma_d=0.0), 0.5,
                              use_doppler=True)
    with pytest.raises(InvalidRegime):
        critical_transmission(grid, make_mp(gamma_d=TAU * 59e3,
                                            sigma_z0=-0.3), 0.5,
                              use_doppler=True)


def test_default_probe_grid_properties():
    mp = make_mp(delta=TAU * 10e3)
    grid = default_probe_grid(mp, 801)
    assert grid.size == 801
    assert (np.diff(grid) > 0).all()
    peak = mp.omega - mp.delta / 2
    assert np.min(np.abs(grid - peak)) == 0.0  # snapped onto the response peak
    span = 5 * (abs(mp.omega) + mp.kappa)
    assert grid[0] >= -span - abs(peak) and grid[-1] <= span + abs(peak)


def test_tavis_cummings_splitting():
    # strong coupling splits the line into two peaks near +/- lambda
    lam = TAU * 40e3
    kappa, gamma = TAU * 3e3, TAU * 1e3
    x = np.linspace(-TAU * 80e3, TAU * 80e3, 4001)
    t = tavis_cummings_transmission(x, 0.0, lam, kappa, gamma)
    i_left = t[: x.size // 2].argmax()
    i_right = t[x.size // 2:].argmax() + x.size // 2
    assert abs(x[i_left] + lam) < TAU * 1e3
    assert abs(x[i_right] - lam) < TAU * 1e3
    # and the bare line is recovered without coupling
    bare = tavis_cummings_transmission(x, 0.0, 0.0, kappa, gamma)
    np.testing.assert_allclose(bare, lorentzian(x, 0.0, kappa), rtol=1e-12)


def test_tavis_cummings_edge_cases():
    assert tavis_cummings_transmission(0.0, 0.0, TAU * 10e3, TAU * 3e3,
                                       0.0) == 0.0
    with pytest.raises(ValueError):
        tavis_cummings_transmission(0.0, 0.0, 0.0, -1.0, 0.0)


def test_trace_validation_and_csv():
    t = SpectrumTrace(probe_detuning=np.array([0.0, 1.0]),
                      transmission=np.array([0.5, 0.25]), lambda_frac=0.5)
    buf = io.StringIO()
    t.write_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "probe_detuning_krad_s,transmission,lambda_frac"
    assert len(lines) == 3
    with pytest.raises(ValueError):
        SpectrumTrace(probe_detuning=np.array([1.0, 0.0]),
                      transmission=np.array([0.5, 0.25]), lambda_frac=0.5)
    with pytest.raises(ValueError):
        SpectrumTrace(probe_detuning=np.array([0.0, 1.0]),
                      transmission=np.array([-0.5, 0.25]), lambda_frac=0.5)
