import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plstm.dag import build_line_graph
from plstm.errors import DegenerateColumn, RangeError
from plstm.grid import GridGates, gating_matrix_grid, grid_to_stm
from plstm.paths import count_paths_2d, is_multitree, nilpotency_index
from plstm.stability import (
    DModeMask,
    StTransition,
    anti_diagonal_mass,
    critical_grid_gates,
    critical_transition_2d,
    decay_profile,
    directional_head_init,
    dmode_apply,
    dmode_line_graph,
    dmode_reach_gates,
    householder_product,
    leading_direction,
    pmode_normalize,
    pmode_normalize_grid,
    skew_exponential,
    spectral_norm,
    st_transition_build,
    t_full_exact,
)
from plstm.stm import backward_recurrent, forward_recurrent

# -- P-mode -------------------------------------------------------------------------------------


def test_small_mass_is_left_alone():
    t = np.array([[0.5, 0.3]])
    np.testing.assert_array_equal(pmode_normalize(t), t)


def test_critical_scaling_to_unit_mass():
    np.testing.assert_array_equal(pmode_normalize(np.array([[2.0, 2.0]]), critical=True), [[0.5, 0.5]])


def test_all_zero_row_cannot_be_made_critical():
    with pytest.raises(DegenerateColumn):
        pmode_normalize([np.array([[0.0, 0.0]])], critical=True)


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_normalized_mass_is_limited(seed, critical):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal((3, 4)) * rng.uniform(0.1, 5)
    mass = np.abs(pmode_normalize(t, critical)).sum(axis=1)
    assert np.all(mass <= 1 + 1e-15)
    if critical:
        np.testing.assert_allclose(mass, 1.0, rtol=1e-15)


def test_grid_normalization_limits_each_incoming_pair():
    gates = pmode_normalize_grid(GridGates.random(np.random.default_rng(0), 4, 4, 2.0))
    assert np.all(np.abs(gates.t_rr) + np.abs(gates.t_rd) <= 1 + 1e-15)
    assert np.all(np.abs(gates.t_dr) + np.abs(gates.t_dd) <= 1 + 1e-15)


def test_critical_transition_examples():
    np.testing.assert_array_equal(critical_transition_2d(0.5, 1), [[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_array_equal(critical_transition_2d(1, 1), [[1, 1], [0, 0]])
    np.testing.assert_allclose(critical_transition_2d(0.3, 0.9).sum(axis=0), [0.9, 0.9], rtol=1e-15)
    mixed = critical_transition_2d(0.2, 0.8, beta=0.6)
    np.testing.assert_allclose(mixed, [[0.16, 0.48], [0.64, 0.32]], rtol=1e-14)
    np.testing.assert_allclose(mixed.sum(axis=0), [0.8, 0.8], rtol=1e-15)
    for bad in ((-0.1, 1), (0.5, 1.5), (math.nan, 1), (0.5, 1, 2.0)):
        with pytest.raises(RangeError):
            critical_transition_2d(*bad)


def test_critical_grid_gates_follow_the_two_by_two_matrix():
    rng = np.random.default_rng(1)
    alpha, gamma = rng.random((3, 3)), rng.random((3, 3))
    g = critical_grid_gates(alpha, gamma)
    for x, y in np.ndindex(3, 3):
        t = critical_transition_2d(alpha[x, y], gamma[x, y])
        np.testing.assert_allclose([[g.t_rr[x, y], g.t_dr[x, y]], [g.t_rd[x, y], g.t_dd[x, y]]], t, rtol=1e-15)


@pytest.mark.parametrize("n", [4, 16])
def test_critical_cells_obey_the_accumulation_bound(n):
    rng = np.random.default_rng(n)
    gates = critical_grid_gates(rng.random((n, n)), source_split=rng.random((n, n)))
    ones = np.ones((n * n, 1))
    dag, params = grid_to_stm(gates, ones, ones, ones)
    cells, _ = forward_recurrent(dag, params)
    p = nilpotency_index(build_line_graph(dag))
    assert p == 2 * n - 3
    source_mass = sum(np.abs(s).sum() for s in params.source)
    assert np.abs(cells).sum() <= (p + 1) * source_mass
    dh = rng.uniform(-1, 1, (n * n, 1))
    _, dcells = backward_recurrent(dag, params, dh, return_cells=True)
    assert np.abs(dcells).max() <= (p + 1) * np.abs(dh).max()


# -- D-mode -------------------------------------------------------------------------------------


def test_masking_removes_one_corner_path():
    ones = GridGates.filled(2, 2)
    assert gating_matrix_grid(ones)[0, 3] == 2.0
    assert gating_matrix_grid(dmode_apply(ones))[0, 3] == 1.0
    assert gating_matrix_grid(dmode_apply(ones, DModeMask.ZERO_DR))[0, 3] == 1.0


@pytest.mark.parametrize("n", range(1, 9))
def test_masked_grids_are_multitrees(n):
    assert is_multitree(dmode_line_graph(n, n))
    assert is_multitree(dmode_line_graph(n, n, DModeMask.ZERO_DR))
    assert is_multitree(dmode_line_graph(n, n, None)) == (n < 3)


def test_apply_only_touches_the_masked_family():
    g = GridGates.random(np.random.default_rng(2), 3, 3)
    out = dmode_apply(g)
    assert not np.any(out.t_rd)
    np.testing.assert_array_equal(out.t_dr, g.t_dr)
    assert np.any(g.t_rd)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_reach_assignment_covers_the_quadrant_with_unit_weight(n):
    g = gating_matrix_grid(dmode_reach_gates(n, n))
    np.testing.assert_allclose(g[0, 1:], 1.0, atol=1e-12, rtol=0)
    gates = dmode_reach_gates(n, n)
    for arr in gates.arrays():
        assert np.all(np.abs(arr) <= 1.0)


# -- decay ------------------------------------------------------------------------------------------


def test_decay_small_case():
    assert t_full_exact(0.5, 2, 1) == pytest.approx(0.5, rel=1e-15)
    assert decay_profile(0.5, 2)[1].t_full == pytest.approx(0.5, rel=1e-15)


def test_decay_matches_exact_binomial_and_power_law():
    rows = decay_profile(0.5, 200)
    assert len(rows) == 200
    last = rows[-1]
    assert last.delta == 200 and last.k == 100
    assert last.t_full == pytest.approx(math.comb(200, 100) / 2**200, rel=1e-12)
    assert last.asymptote == pytest.approx(1 / math.sqrt(100 * math.pi), rel=1e-15)
    # the commonly quoted 0.0562 is rounded down; exact is 0.056348
    assert abs(last.t_full - 0.0562) < 2e-4
    assert abs(rows[49].ratio - 1) <= 0.05
    assert abs(last.ratio - 1) <= 0.01


@given(st.floats(0.01, 0.99), st.integers(1, 64))
def test_anti_diagonal_mass_is_conserved(alpha, delta):
    assert abs(anti_diagonal_mass(alpha, delta) - 1) <= 1e-12


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_leading_direction_follows_alpha(alpha):
    assert abs(leading_direction(alpha, 400) - alpha) <= 1 / 400


def test_decay_rejects_closed_endpoints():
    for a in (0.0, 1.0):
        with pytest.raises(RangeError):
            decay_profile(a, 10)
        with pytest.raises(RangeError):
            leading_direction(a)


def test_path_weights_at_half_split_count_lattice_paths():
    # with alpha = 1/2 every monotone path carries weight 2**-delta
    for k in range(7):
        assert t_full_exact(0.5, 6, k) == pytest.approx(count_paths_2d(k, 6 - k) / 64, rel=1e-14)


# -- state-tracking transitions ------------------------------------------------------------------


def test_identity_factors_and_unit_sigma():
    spec = StTransition(3, np.zeros((0, 3)), np.zeros((0, 3)), np.ones(3), sigma_mode="sign")
    np.testing.assert_array_equal(st_transition_build(spec), np.eye(3))


def test_single_reflection_has_unit_norm():
    v = np.array([[1.0, 2.0, -0.5]])
    h = householder_product(v)
    np.testing.assert_allclose(h, np.eye(3) - 2 * np.outer(v[0], v[0]) / (v[0] @ v[0]), atol=1e-15)
    spec = StTransition(3, v, np.zeros((0, 3)), np.ones(3), sigma_mode="sign")
    assert spectral_norm(st_transition_build(spec)) == pytest.approx(1.0, abs=1e-14)


def test_skew_exponential_is_a_rotation():
    r = skew_exponential([0.3], 2)
    np.testing.assert_allclose(r, [[math.cos(0.3), math.sin(0.3)], [-math.sin(0.3), math.cos(0.3)]], atol=1e-15)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.sampled_from(["householder", "skew"]),
       st.sampled_from(["tanh", "sign"]))
def test_built_transitions_are_norm_limited(seed, dim, param, sigma_mode):
    rng = np.random.default_rng(seed)
    m = st_transition_build(StTransition.random(rng, dim, param, sigma_mode=sigma_mode))
    # independent estimate by power iteration on M^T M
    x = rng.standard_normal(dim)
    for _ in range(200):
        x = m.T @ (m @ x)
        nrm = np.linalg.norm(x)
        if nrm == 0:
            break
        x /= nrm
    assert math.sqrt(np.linalg.norm(m.T @ (m @ x))) <= 1 + 1e-10
    assert spectral_norm(m) <= 1 + 1e-10


# -- head initialization ------------------------------------------------------------------------------


def test_three_heads_use_the_table_range():
    heads = directional_head_init(3)
    assert [h.bias for h in heads] == [-2.0, 0.0, 2.0]
    assert all(h.gamma == 1.0 for h in heads)


def test_single_head_points_diagonally():
    (h,) = directional_head_init(1)
    assert h.bias == 0.0 and h.alpha == 0.5


@given(st.integers(2, 64))
def test_head_biases_increase_between_the_endpoints(n):
    b = [h.bias for h in directional_head_init(n, mode="d", decay=0.9)]
    assert b[0] == -2.0 and b[-1] == 2.0
    assert all(x < y for x, y in zip(b, b[1:]))
    assert all(h.gamma == 0.9 for h in directional_head_init(n, mode="d", decay=0.9))
