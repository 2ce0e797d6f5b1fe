import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plstm.dag import Dag, chain_dag, random_dag, reverse_dag
from plstm.decompose import decompose
from plstm.errors import ShapeError
from plstm.stm import (
    StmParams,
    apply_gating,
    backward_recurrent,
    forward_bidirectional,
    forward_recurrent,
    gating_matrix_hierarchical,
    gating_matrix_paths,
    gating_matrix_recurrent,
    lift_params,
    random_params,
)
from plstm.verify import finite_difference, rel_error


def ones_params(dag, key_dim=1, value_dim=1, direct=0.0):
    n = dag.node_count
    return StmParams(
        [np.ones(len(dag.out_edges[v])) for v in range(n)],
        [np.ones((len(dag.in_edges[v]), len(dag.out_edges[v]))) for v in range(n)],
        [np.ones(len(dag.in_edges[v])) for v in range(n)],
        np.full(n, direct),
        np.ones((n, key_dim)),
        np.ones((n, key_dim)),
        np.ones((n, value_dim)),
    )


DIAMOND = Dag(4, ((0, 1), (0, 2), (1, 3), (2, 3)))


def test_single_node_keeps_only_the_direct_term():
    dag = Dag(1, ())
    p = StmParams([np.zeros(0)], [np.zeros((0, 0))], [np.zeros(0)], np.ones(1),
                  np.array([[2.0, 1.0]]), np.array([[0.5, 3.0]]), np.array([[4.0, -1.0]]))
    _, h = forward_recurrent(dag, p)
    np.testing.assert_allclose(h, [[4.0 * 4.0, -4.0]])


def test_two_node_chain_passes_one_key_value_pair():
    dag = chain_dag(2)
    rng = np.random.default_rng(0)
    p = ones_params(dag, key_dim=3, value_dim=2)
    p.query, p.key, p.value = rng.standard_normal((2, 3)), rng.standard_normal((2, 3)), rng.standard_normal((2, 2))
    _, h = forward_recurrent(dag, p)
    np.testing.assert_allclose(h[1], (p.query[1] @ p.key[0]) * p.value[0], rtol=1e-14)
    np.testing.assert_array_equal(h[0], 0.0)


def test_chain_of_ones_gating_matrix():
    g = gating_matrix_paths(chain_dag(3), ones_params(chain_dag(3)))
    np.testing.assert_array_equal(g, [[0, 1, 1], [0, 0, 1], [0, 0, 0]])


def test_two_paths_through_a_diamond_add_up():
    rng = np.random.default_rng(1)
    p = random_params(DIAMOND, rng)
    s, t, m = p.source[0], p.transition, p.mark[3]
    expected = s[0] * t[1][0, 0] * m[0] + s[1] * t[2][0, 0] * m[1]
    for fn in (gating_matrix_paths, gating_matrix_recurrent):
        assert fn(DIAMOND, p)[0, 3] == pytest.approx(expected, rel=1e-14)
    g = gating_matrix_hierarchical(DIAMOND, decompose(DIAMOND), p)
    assert g[0, 3] == pytest.approx(expected, rel=1e-14)


def test_identity_gating_is_per_token_attention():
    rng = np.random.default_rng(2)
    p = random_params(chain_dag(5), rng)
    h = apply_gating(np.eye(5), p)
    np.testing.assert_allclose(h, np.sum(p.query * p.key, 1)[:, None] * p.value, rtol=1e-14)


def test_chain_of_ones_is_unmasked_linear_attention():
    rng = np.random.default_rng(3)
    p = random_params(chain_dag(6), rng)
    h = apply_gating(np.tril(np.ones((6, 6))).T, p)
    ref = np.array([sum((p.query[n] @ p.key[m]) * p.value[m] for m in range(n + 1)) for n in range(6)])
    np.testing.assert_allclose(h, ref, rtol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_oracle_triangle_on_random_dags(seed, n):
    rng = np.random.default_rng(seed)
    dag = random_dag(rng, n)
    p = random_params(dag, rng)
    _, h = forward_recurrent(dag, p)
    gp = gating_matrix_paths(dag, p)
    np.testing.assert_allclose(apply_gating(gp, p), h, atol=1e-12 * max(1, np.abs(h).max()))
    np.testing.assert_allclose(gating_matrix_hierarchical(dag, decompose(dag), p), gp, atol=1e-12 * max(1, np.abs(gp).max()))
    np.testing.assert_allclose(gating_matrix_recurrent(dag, p), gp, atol=1e-12 * max(1, np.abs(gp).max()))


@given(st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_lifted_scalar_parameters_give_the_same_result(seed, n):
    rng = np.random.default_rng(seed)
    dag = random_dag(rng, n)
    p = random_params(dag, rng)
    c1, h1 = forward_recurrent(dag, p)
    c2, h2 = forward_recurrent(dag, lift_params(p))
    np.testing.assert_array_equal(h1, h2)
    np.testing.assert_array_equal(c1.reshape(c2.shape), c2)


@given(st.integers(0, 2**32 - 1))
def test_state_tracking_matches_paths(seed):
    rng = np.random.default_rng(seed)
    dag = random_dag(rng, 7)
    p = random_params(dag, rng, state_dims=(2, 3, 2), gate_scale=0.6)
    _, h = forward_recurrent(dag, p)
    np.testing.assert_allclose(apply_gating(gating_matrix_paths(dag, p), p), h, atol=1e-12 * max(1, np.abs(h).max()))


def test_normalized_hidden_matches_gating_form():
    rng = np.random.default_rng(4)
    dag = random_dag(rng, 8)
    p = random_params(dag, rng)
    _, h = forward_recurrent(dag, p, normalize=True)
    np.testing.assert_allclose(apply_gating(gating_matrix_paths(dag, p), p, normalize=True), h, rtol=1e-10, atol=1e-12)


def test_bidirectional_sums_both_directions():
    rng = np.random.default_rng(5)
    dag = chain_dag(5)
    fwd, bwd = random_params(dag, rng), random_params(reverse_dag(dag), rng)
    bwd.query, bwd.key, bwd.value = fwd.query, fwd.key, fwd.value
    h = forward_bidirectional(dag, fwd, bwd)
    gf = gating_matrix_paths(dag, fwd)
    gb = gating_matrix_paths(reverse_dag(dag), bwd)
    # the backward cover only connects later nodes to earlier ones
    assert not np.any(np.tril(gf, -1)) and not np.any(np.triu(gb, 1))
    np.testing.assert_allclose(h, apply_gating(gf + gb, fwd), rtol=1e-12, atol=1e-14)


def test_zero_cotangent_gives_zero_gradients():
    rng = np.random.default_rng(6)
    dag = random_dag(rng, 8)
    p = random_params(dag, rng)
    g = backward_recurrent(dag, p, np.zeros_like(p.value))
    for arrs in (g.source, g.transition, g.mark, [g.direct, g.query, g.key, g.value]):
        assert all(not np.any(a) for a in arrs)


@pytest.mark.parametrize("seed", range(3))
def test_backward_matches_central_differences(seed):
    rng = np.random.default_rng(100 + seed)
    dag = random_dag(rng, 8, 0.4)
    p = random_params(dag, rng, gate_scale=0.8)
    dh = rng.standard_normal(p.value.shape)
    g = backward_recurrent(dag, p, dh)
    loss = lambda: float(np.sum(forward_recurrent(dag, p)[1] * dh))
    pairs = [(a, b) for arrs, grads in ((p.source, g.source), (p.transition, g.transition), (p.mark, g.mark))
             for a, b in zip(arrs, grads) if a.size]
    pairs += [(p.direct, g.direct), (p.query, g.query), (p.key, g.key), (p.value, g.value)]
    for arr, grad in pairs:
        for idx in np.ndindex(arr.shape):
            fd = finite_difference(loss, arr, idx, 1e-5)
            assert rel_error(fd, grad[idx]) <= 1e-6


def test_validation_catches_wrong_shapes():
    dag = chain_dag(3)
    p = ones_params(dag)
    p.source[0] = np.ones(2)
    with pytest.raises(ShapeError):
        p.validate(dag)
    p = ones_params(dag)
    p.direct = np.full(3, np.nan)
    with pytest.raises(ShapeError):
        p.validate(dag)
