import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vlcsteer.geometry import make_grid
from vlcsteer.steering import (baseline_genie_fast, baseline_no_steering, build_gain_table, cell_objectives,
                               project_simplex, solve_enumeration, solve_mm)

from conftest import AP, USER_Z, drop

# On-axis rate 3.15 m below the AP with gamma 15, evaluated by hand
RATE_BELOW_G15 = 207288152.47320527
# User at (7, 1): downward gamma-5 beam, and a gamma-15 beam aimed at it
RATE_NO_STEER_CORNER = 1328116.3809090396
RATE_POINTED_CORNER = 118191150.57769716


def test_gain_table_shape_and_mask(coarse_grid):
    grid = coarse_grid.with_mask(np.zeros(coarse_grid.mask.shape, dtype=bool))
    table = build_gain_table(drop(np.random.default_rng(0), 3), AP, grid)
    assert table.gains.shape == (3, grid.size)
    assert not table.gains.any()


def test_single_user_below_ap(grid, noise):
    table = build_gain_table([[4, 4, USER_Z]], AP, grid)
    sol = solve_enumeration(table, 1.0, noise)
    assert sol.angles.alpha == 270.0
    assert sol.gamma == 15.0
    assert sol.link_rate_bps[0] == pytest.approx(RATE_BELOW_G15, rel=1e-9)
    # every azimuth points straight down at alpha=270; ties go to the lowest index
    assert sol.angles.beta == 0.0


def test_fixed_focus_restriction(grid, noise):
    table = build_gain_table(drop(np.random.default_rng(1), 4), AP, grid)
    sbs = solve_enumeration(table, 1.0, noise, gammas=5.0)
    sbsf = solve_enumeration(table, 1.0, noise)
    assert sbs.gamma == 5.0
    assert sbsf.objective >= sbs.objective


def test_unknown_gamma_rejected(coarse_grid, noise):
    table = build_gain_table([[1, 1, USER_Z]], AP, coarse_grid)
    with pytest.raises(ValueError):
        solve_enumeration(table, 1.0, noise, gammas=2.0)


def test_log_objective_uses_equal_shares(coarse_grid, noise):
    table = build_gain_table(drop(np.random.default_rng(2), 3), AP, coarse_grid)
    sol = solve_enumeration(table, 1.0, noise)
    np.testing.assert_allclose(sol.tau, 1 / 3)
    assert sol.objective == pytest.approx(np.sum(np.log(sol.per_user_rate_bps)))
    assert sol.objective == pytest.approx(cell_objectives(table, 1.0, noise).max())


def test_sum_rate_mode_serves_strongest(coarse_grid, noise):
    table = build_gain_table(drop(np.random.default_rng(3), 3), AP, coarse_grid)
    sol = solve_enumeration(table, 1.0, noise, objective_mode="sum_rate")
    assert sol.tau.sum() == 1.0 and sol.tau.max() == 1.0
    assert sol.sum_rate_bps == pytest.approx(sol.link_rate_bps.max())


def test_no_allowed_cells(coarse_grid, noise):
    table = build_gain_table([[1, 1, USER_Z]], AP, coarse_grid)
    with pytest.raises(ValueError):
        solve_enumeration(table, 1.0, noise, allowed=np.zeros(coarse_grid.size, dtype=bool))


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20))
def test_simplex_projection(v):
    d = project_simplex(np.array(v))
    assert np.all(d >= 0)
    assert abs(d.sum() - 1) < 1e-9
    np.testing.assert_allclose(project_simplex(d), d, atol=1e-12)


def test_mm_single_user_matches_enumeration(coarse_grid, noise):
    rng = np.random.default_rng(4)
    for _ in range(3):
        table = build_gain_table(drop(rng, 1), AP, coarse_grid)
        d, sol = solve_mm(table, 1.0, noise)
        exact = solve_enumeration(table, 1.0, noise)
        assert sol.converged
        assert sol.objective == pytest.approx(exact.objective, rel=1e-9)
        assert d.sum() == pytest.approx(1.0)


def test_mm_never_beats_enumeration(coarse_grid, noise):
    rng = np.random.default_rng(5)
    for k in (2, 3):
        table = build_gain_table(drop(rng, k), AP, coarse_grid)
        _, sol = solve_mm(table, 1.0, noise)
        assert sol.objective <= solve_enumeration(table, 1.0, noise).objective + 1e-9


def test_mm_validates_parameters(coarse_grid, noise):
    table = build_gain_table([[1, 1, USER_Z]], AP, coarse_grid)
    with pytest.raises(ValueError):
        solve_mm(table, 1.0, noise, q=1.5)


def test_baseline_reference_values(noise):
    rx = [[7, 1, USER_Z]]
    ns = baseline_no_steering(rx, AP, 5.0, 1.0, noise)
    assert ns.link_rate_bps[0] == pytest.approx(RATE_NO_STEER_CORNER, rel=1e-9)
    assert baseline_genie_fast(rx, AP, 15.0, 1.0, noise)[0] == pytest.approx(RATE_POINTED_CORNER, rel=1e-9)


def test_genie_upper_bounds_slow_steering(grid, noise):
    rng = np.random.default_rng(6)
    for k in (1, 3, 6):
        pos = drop(rng, k)
        table = build_gain_table(pos, AP, grid)
        sbsf = solve_enumeration(table, 1.0, noise)
        genie = baseline_genie_fast(pos, AP, 15.0, 1.0, noise)
        assert genie.sum() >= sbsf.sum_rate_bps * (1 - 1e-12)
        assert math.isfinite(sbsf.objective)
