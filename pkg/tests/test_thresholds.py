import math

import numpy as np
import pytest

from superlab import (Geometry, InvalidRegime, InvalidState, ThresholdModel,
                      dawson, threshold_decay, threshold_doppler,
                      threshold_ideal, threshold_single_beam)

TAU = 2 * math.pi
W = TAU * 100e3
W0 = TAU * 215e3
K = TAU * 150e3


def test_ideal_closed_form_value():
    res = threshold_ideal(W, W0, K)
    assert res.exists
    assert res.model is ThresholdModel.IDEAL
    assert res.geometry is Geometry.COUNTER_PROP
    assert res.lambda_c == pytest.approx(
        0.5 * math.sqrt(W0 / W * (W**2 + K**2)), rel=1e-14)


def test_ideal_lossless_limit():
    # kappa -> 0 recovers the textbook sqrt(omega*omega_0)/2
    res = threshold_ideal(W, W0, 1e-6)
    assert res.lambda_c == pytest.approx(0.5 * math.sqrt(W * W0), rel=1e-9)


def test_ideal_sign_symmetry():
    assert threshold_ideal(-W, -W0, K).lambda_c \
        == threshold_ideal(W, W0, K).lambda_c


def test_ideal_invalid_regime():
    with pytest.raises(InvalidRegime):
        threshold_ideal(W, -W0, K)
    with pytest.raises(InvalidRegime):
        threshold_ideal(0.0, W0, K)


def test_decay_reduces_to_ideal():
    # gamma = 0, sigma_z0 = -1/2, delta = 0 collapses the two expressions
    rng = np.random.default_rng(3)
    for _ in range(50):
        w, w0, k = rng.uniform(0.1, 5.0, 3) * TAU * 1e5
        a = threshold_ideal(w, w0, k).lambda_c
        b = threshold_decay(w, w0, k, 0.0).lambda_c
        assert b == pytest.approx(a, rel=1e-13)


def test_decay_delta_is_a_cavity_shift():
    delta = TAU * 30e3
    shifted = threshold_decay(W, W0, K, TAU * 20e3, delta=delta)
    direct = threshold_decay(W - delta / 2, W0, K, TAU * 20e3)
    assert shifted.lambda_c == direct.lambda_c
    assert shifted.diagnostics["omega_eff"] == W - delta / 2


def test_decay_gamma_raises_threshold():
    lam0 = threshold_decay(W, W0, K, 0.0).lambda_c
    lam1 = threshold_decay(W, W0, K, TAU * 20e3).lambda_c
    assert lam1 > lam0


def test_decay_partial_inversion_raises_threshold():
    lam_half = threshold_decay(W, W0, K, 0.0, sigma_z0=-0.5).lambda_c
    lam_weak = threshold_decay(W, W0, K, 0.0, sigma_z0=-0.1).lambda_c
    assert lam_weak == pytest.approx(lam_half * math.sqrt(5.0), rel=1e-12)


def test_decay_invalid_state_and_regime():
    with pytest.raises(InvalidState):
        threshold_decay(W, W0, K, 0.0, sigma_z0=0.0)
    with pytest.raises(InvalidRegime):
        threshold_decay(W, -W0, K, 0.0)
    with pytest.raises(InvalidRegime):
        # the delta shift can push the effective detuning through zero
        threshold_decay(W, W0, K, 0.0, delta=4 * W)


def test_doppler_against_direct_expression():
    gd = TAU * 59e3
    res = threshold_doppler(W, W0, K, gd)
    arg = W0 / (math.sqrt(2.0) * gd)
    expect = math.sqrt(math.sqrt(2.0) * gd * (W**2 + K**2)
                       / (8.0 * W * float(dawson(arg))))
    assert res.lambda_c == pytest.approx(expect, rel=1e-14)
    assert res.model is ThresholdModel.DOPPLER


def test_doppler_reduces_to_decay_at_small_width():
    res_d = threshold_doppler(W, W0, K, 1e-3 * W0)
    res_0 = threshold_decay(W, W0, K, 0.0)
    assert res_d.lambda_c == pytest.approx(res_0.lambda_c, rel=1e-4)


def test_doppler_deep_limit_scales_linearly():
    # for gamma_d >> omega_0 the threshold grows like gamma_d itself
    lam1 = threshold_doppler(W, W0, K, 200 * W0).lambda_c
    lam2 = threshold_doppler(W, W0, K, 400 * W0).lambda_c
    assert lam2 / lam1 == pytest.approx(2.0, rel=1e-3)


def test_doppler_needs_positive_width():
    with pytest.raises(InvalidRegime):
        threshold_doppler(W, W0, K, 0.0)
    with pytest.raises(InvalidRegime):
        threshold_doppler(W, -W0, K, TAU * 59e3)


def test_doppler_sign_symmetry():
    gd = TAU * 40e3
    assert threshold_doppler(-W, -W0, K, gd).lambda_c \
        == threshold_doppler(W, W0, K, gd).lambda_c


def test_single_beam_direct_expression():
    g = TAU * 20e3
    d_cs = -TAU * 315e3
    res = threshold_single_beam(d_cs, K, g)
    expect = math.sqrt(g * K * (1.0 + (d_cs / (g + K)) ** 2))
    assert res.lambda_c == pytest.approx(expect, rel=1e-14)
    assert res.geometry is Geometry.SINGLE
    assert res.exists


def test_single_beam_resonant_minimum():
    g = TAU * 20e3
    on = threshold_single_beam(0.0, K, g).lambda_c
    assert on == pytest.approx(math.sqrt(g * K), rel=1e-14)
    for d in (0.5, -0.5, 2.0, -2.0):
        assert threshold_single_beam(d * K, K, g).lambda_c > on


def test_single_beam_weak_inversion_scaling():
    g = TAU * 20e3
    full = threshold_single_beam(0.0, K, g, sigma_z0=-0.5).lambda_c
    fifth = threshold_single_beam(0.0, K, g, sigma_z0=-0.1).lambda_c
    assert fifth == pytest.approx(full * math.sqrt(5.0), rel=1e-12)


def test_single_beam_degenerate_and_invalid():
    assert threshold_single_beam(0.0, K, 0.0).lambda_c == 0.0
    with pytest.raises(InvalidState):
        threshold_single_beam(0.0, K, TAU * 20e3, sigma_z0=0.2)
    with pytest.raises(InvalidState):
        threshold_single_beam(0.0, K, -1.0)
