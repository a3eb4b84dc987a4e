import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vlcsteer.channel import (BeamState, NoiseModel, ReceiverParams, lambertian_gain, link_rate, los_gain,
                              noma_sinrs, pointed_gain, rate_from_sinr, sinr_all, sinr_multibeam, snr)
from vlcsteer.geometry import SteeringAngles

from conftest import AP, USER_Z

# Hand-evaluated: AP at 4 m, user 3.15 m below, beam aimed down, gamma 5, 1 cm^2, 1 A/W
GAIN_BELOW = 9.623881668444162e-06
SNR_BELOW = 185.23819673643118
RATE_BELOW = 150820103.68423444
# Same beam, user 2 m to the side
GAIN_OFFSET = 2.4829375617257986e-06


def _beam(alpha=270.0, beta=0.0, gamma=5.0):
    return BeamState(AP, SteeringAngles(alpha, beta), gamma)


def test_gain_below_ap():
    assert los_gain(_beam(), ReceiverParams(np.array([4, 4, USER_Z]))) == pytest.approx(GAIN_BELOW, rel=1e-12)


def test_gain_off_axis():
    assert los_gain(_beam(), ReceiverParams(np.array([6, 4, USER_Z]))) == pytest.approx(GAIN_OFFSET, rel=1e-12)


def test_snr_and_rate(noise):
    assert snr(GAIN_BELOW, 1.0, noise) == pytest.approx(SNR_BELOW, rel=1e-12)
    assert link_rate(GAIN_BELOW, 1.0, noise) == pytest.approx(RATE_BELOW, rel=1e-12)
    assert rate_from_sinr(SNR_BELOW, noise) == pytest.approx(RATE_BELOW, rel=1e-12)


def test_pointed_gain_matches_steered_beam():
    rx = np.array([6.5, 1.0, USER_Z])
    v = rx - AP
    alpha = 360 + np.degrees(np.arcsin(v[2] / np.linalg.norm(v)))
    beta = np.degrees(np.arctan2(v[1], v[0])) % 360
    g = los_gain(_beam(alpha, beta, 9.0), ReceiverParams(rx))
    assert pointed_gain(AP, rx, 9.0, 1e-4, 1.0)[0] == pytest.approx(g, rel=1e-9)


def test_beam_facing_away_gives_zero():
    assert los_gain(_beam(90.0), ReceiverParams(np.array([4, 4, USER_Z]))) == 0.0


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.1, 10), st.floats(0, 30))
def test_gain_nonnegative(cp, ct, d, g):
    assert lambertian_gain(cp, ct, d, g, 1e-4, 1.0) >= 0


def test_invalid_parameters():
    with pytest.raises(ValueError):
        NoiseModel(-1.0, 20e6)
    with pytest.raises(ValueError):
        ReceiverParams(np.zeros(3), area_m2=0)
    with pytest.raises(ValueError):
        BeamState(AP, SteeringAngles(270, 0), -1)


def test_multibeam_sinr(noise):
    # (0.5 * 2e-6)^2 / (5e-13 + (0.5 * 1e-6)^2)
    assert sinr_multibeam([2e-6, 1e-6], [0.5, 0.5], 0, noise) == pytest.approx(4 / 3)
    with pytest.raises(ValueError):
        sinr_multibeam([1e-6], [0.5, 0.5], 0, noise)


def test_sinr_all_matches_scalar(noise):
    rng = np.random.default_rng(0)
    g = rng.uniform(0, 5e-6, size=(6, 3))
    a = rng.integers(0, 3, size=6)
    p = np.array([0.2, 0.3, 0.5])
    expected = [sinr_multibeam(g[k], p, a[k], noise) for k in range(6)]
    np.testing.assert_allclose(sinr_all(g, a, p, noise), expected, rtol=1e-12)


def test_noma_sinrs_limits(noise):
    gw, gs = np.array([1e-6, 2e-7]), np.array([5e-6, 1e-7])
    p = np.array([0.5, 0.5])
    full = noma_sinrs(gw, gs, 0, p, 1.0, noise)
    assert full.xi_strong == 0.0
    assert full.xi_weak == pytest.approx(sinr_multibeam(gw, p, 0, noise))
    with pytest.raises(ValueError):
        noma_sinrs(gw, gs, 0, p, 1.5, noise)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_noma_cross_sinr_monotone(e1, e2):
    noise = NoiseModel()
    gw, gs, p = np.array([1e-6, 2e-7]), np.array([5e-6, 1e-7]), np.array([0.5, 0.5])
    lo, hi = sorted((e1, e2))
    assert noma_sinrs(gw, gs, 0, p, lo, noise).xi_cross <= noma_sinrs(gw, gs, 0, p, hi, noise).xi_cross + 1e-12
