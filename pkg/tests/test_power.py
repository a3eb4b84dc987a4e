import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vlcsteer.power import (brute_force_power_oracle, equal_power, inner_convex_solve, sca_power_opt,
                            taylor_surrogate, time_shares, true_objective, user_rates)

pos = st.floats(1e-6, 1e3)


def random_gains(rng, k, n):
    """Cross-beam gains an order of magnitude below the serving beam."""
    g = rng.uniform(1e-8, 5e-7, size=(k, n))
    a = np.arange(k) % n
    g[np.arange(k), a] = rng.uniform(1e-6, 1e-5, size=k)
    return g, a


@given(pos, pos, pos)
def test_taylor_minorizes(p, kappa, ratio):
    exact = p * p / kappa
    assert taylor_surrogate(p, kappa, ratio) <= exact * (1 + 1e-12) + 1e-300


@given(pos, pos)
def test_taylor_tight_at_linearisation_point(kappa, ratio):
    p = ratio * kappa
    assert taylor_surrogate(p, kappa, ratio) == pytest.approx(p * p / kappa, rel=1e-9)


def test_equal_power_and_shares():
    np.testing.assert_allclose(equal_power(4, 1.0).powers, 0.25)
    np.testing.assert_allclose(time_shares([0, 0, 1, 2, 2, 2], 3), [1 / 2, 1 / 2, 1, 1 / 3, 1 / 3, 1 / 3])
    with pytest.raises(ValueError):
        equal_power(0, 1.0)


def test_user_rates_time_shared(noise):
    g = np.array([[1e-6, 0.0], [2e-6, 0.0], [0.0, 1e-6]])
    r = user_rates(g, [0, 0, 1], [0.5, 0.5], noise)
    assert r[2] == pytest.approx(2 * r[0])


@pytest.mark.parametrize("objective", ["log_rate", "sum_rate"])
def test_sca_feasible_and_monotone(noise, objective):
    rng = np.random.default_rng(0)
    for n in (2, 3, 5):
        g, a = random_gains(rng, 2 * n, n)
        alloc, state = sca_power_opt(g, a, 1.0, noise, objective)
        assert np.all(alloc.powers >= 0) and alloc.total <= 1.0 + 1e-9
        tr = np.array(state.objective_trace)
        assert np.all(np.diff(tr) >= -1e-6 * np.maximum(1.0, np.abs(tr[:-1])))
        assert tr[-1] >= true_objective(g, a, equal_power(n, 1.0).powers, noise, objective) - 1e-6 * abs(tr[0])


def test_sca_matches_grid_oracle_log(noise):
    rng = np.random.default_rng(1)
    for n in (2, 3):
        g, a = random_gains(rng, 2 * n + 1, n)
        alloc, _ = sca_power_opt(g, a, 1.0, noise, "log_rate")
        oracle = brute_force_power_oracle(g, a, 1.0, noise, "log_rate")
        got = true_objective(g, a, alloc.powers, noise, "log_rate")
        ref = true_objective(g, a, oracle.powers, noise, "log_rate")
        assert got >= ref - 0.02 * abs(ref)


def test_inner_solve_bounds_are_tight(noise):
    g, a = random_gains(np.random.default_rng(2), 4, 2)
    # ratios of the tangent point at equal power, interference normalised by the noise power
    p0 = np.full(2, 0.5)
    rx0 = (g * p0) ** 2 / noise.power
    ratios = p0[a] / (1 + rx0.sum(axis=1) - rx0[np.arange(4), a])
    alloc, bounds, _ = inner_convex_solve(g, a, ratios, 1.0, noise, "sum_rate")
    p = alloc.powers
    rx = (g * p) ** 2
    own = rx[np.arange(4), a]
    np.testing.assert_allclose(bounds.kappa, noise.power + rx.sum(axis=1) - own, rtol=1e-9)
    assert alloc.total <= 1.0


def test_inner_rejects_unknown_objective(noise):
    g, a = random_gains(np.random.default_rng(3), 2, 2)
    with pytest.raises(ValueError):
        inner_convex_solve(g, a, [1.0, 1.0], 1.0, noise, "max_min")


def test_oracle_limited_to_three_beams(noise):
    g, a = random_gains(np.random.default_rng(4), 4, 4)
    with pytest.raises(ValueError):
        brute_force_power_oracle(g, a, 1.0, noise)


def test_oracle_grid_points_on_simplex(noise):
    g, a = random_gains(np.random.default_rng(5), 3, 3)
    p = brute_force_power_oracle(g, a, 1.0, noise, "sum_rate").powers
    assert p.sum() <= 1.0 + 1e-12
    np.testing.assert_allclose(p * 200, np.round(p * 200), atol=1e-9)
