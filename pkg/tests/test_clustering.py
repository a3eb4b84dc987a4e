import numpy as np
import pytest

from vlcsteer.channel import link_rate, snr
from vlcsteer.clustering import (ClusterAssignment, assign_best_beam, multistream_rates, repair_empty,
                                 singlestream_rates, vuc)
from vlcsteer.steering import build_gain_table

from conftest import AP, drop


def test_assignment_validation():
    with pytest.raises(ValueError):
        ClusterAssignment(np.array([0, 3]), 3)
    a = ClusterAssignment(np.array([0, 2, 2]), 3)
    assert list(a.sizes) == [1, 0, 2]
    assert [list(m) for m in a.members] == [[0], [], [1, 2]]


def test_best_beam_ties_to_lowest_index():
    g = np.array([[1.0, 1.0], [0.5, 2.0]])
    assert list(assign_best_beam(g).assignment) == [0, 1]


def test_repair_moves_weakest_donor_user():
    g = np.array([[3.0, 0.1, 0.0], [2.0, 0.2, 0.0], [1.0, 0.3, 0.0]])
    out = repair_empty(np.array([0, 0, 0]), g)
    assert np.bincount(out, minlength=3).min() == 1
    assert out[0] == 0  # strongest user stays
    with pytest.raises(ValueError):
        repair_empty(np.array([0]), np.ones((1, 2)))


def test_multistream_without_interference_is_tdma(noise):
    g = np.array([[2e-6, 0.0], [1e-6, 0.0], [0.0, 3e-6]])
    p = np.array([0.5, 0.5])
    rates = multistream_rates(g, [0, 0, 1], p, noise)
    np.testing.assert_allclose(rates, [link_rate(2e-6, 0.5, noise) / 2, link_rate(1e-6, 0.5, noise) / 2,
                                       link_rate(3e-6, 0.5, noise)])


def test_singlestream_coherent_sum_beats_each_beam(noise):
    rng = np.random.default_rng(0)
    g = rng.uniform(1e-7, 5e-6, size=(5, 3))
    p = np.full(3, 1 / 3)
    combined = snr(g @ p, 1.0, noise)
    assert np.all(combined[:, None] > snr(g, p, noise))
    np.testing.assert_allclose(singlestream_rates(g, p, noise), link_rate(g @ p, 1.0, noise) / 5)


def test_vuc_fixpoint(coarse_grid, noise):
    rng = np.random.default_rng(7)
    for k in (3, 6, 10):
        table = build_gain_table(drop(rng, k), AP, coarse_grid)
        sol = vuc(table, 3, 1 / 3, noise)
        assert sol.assignment.sizes.min() >= 1
        assert sol.gains.shape == (k, 3)
        assert np.isfinite(sol.objective)
        if sol.converged:
            again = repair_empty(assign_best_beam(sol.gains).assignment, sol.gains)
            assert np.array_equal(again, sol.assignment.assignment)
        np.testing.assert_allclose(sol.per_user_rate_bps,
                                   multistream_rates(sol.gains, sol.assignment.assignment, sol.powers, noise))


def test_vuc_reduction_matches_full_search(coarse_grid, noise):
    table = build_gain_table(drop(np.random.default_rng(8), 5), AP, coarse_grid)
    fast = vuc(table, 2, 0.5, noise)
    full = vuc(table, 2, 0.5, noise, reduce=False)
    assert fast.objective == pytest.approx(full.objective, rel=1e-9)


def test_vuc_needs_enough_users(coarse_grid, noise):
    table = build_gain_table(drop(np.random.default_rng(9), 2), AP, coarse_grid)
    with pytest.raises(ValueError):
        vuc(table, 3, 1 / 3, noise)


def test_vuc_custom_solver_is_called(coarse_grid, noise):
    from vlcsteer.steering import solve_enumeration
    calls = []

    def solver(tab, p, nz, users, allowed):
        calls.append(len(users))
        return solve_enumeration(tab, p, nz, users=users, allowed=allowed)

    table = build_gain_table(drop(np.random.default_rng(10), 4), AP, coarse_grid)
    vuc(table, 2, 0.5, noise, solver=solver)
    assert calls and sum(calls[:2]) == 2
