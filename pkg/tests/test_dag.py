import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plstm.dag import (
    Dag,
    build_line_graph,
    chain_dag,
    edges_between,
    format_dag,
    grid_dag,
    grid_edge_ids,
    induced_edges,
    parse_dag,
    random_dag,
    read_dag,
    reverse_dag,
    topological_order,
    write_dag,
)
from plstm.decompose import decompose
from plstm.errors import CycleError, ShapeError, StrategyMismatch


@st.composite
def dags(draw, max_nodes=10):
    n = draw(st.integers(0, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    perm = draw(st.permutations(range(n)))
    return Dag(n, tuple((perm[i], perm[j]) for i, j in chosen))


def test_topological_order_respects_every_edge_on_a_diamond():
    dag = Dag(4, ((0, 1), (0, 2), (1, 3), (2, 3)))
    order = topological_order(dag)
    assert order == [0, 1, 2, 3]


def test_cycle_is_rejected():
    with pytest.raises(CycleError):
        topological_order(Dag(3, ((0, 1), (1, 2), (2, 0))))


def test_out_of_range_and_duplicate_edges_are_rejected():
    with pytest.raises(ShapeError):
        Dag(2, ((0, 2),))
    with pytest.raises(ShapeError):
        Dag(2, ((0, 1), (0, 1)))


@given(dags())
def test_topological_order_is_a_valid_linear_extension(dag):
    pos = {n: i for i, n in enumerate(topological_order(dag))}
    assert sorted(pos) == list(range(dag.node_count))
    assert all(pos[u] < pos[v] for u, v in dag.edges)


@given(dags())
def test_line_graph_joins_exactly_the_edges_meeting_at_a_node(dag):
    lg = build_line_graph(dag)
    expected = {(a, b) for a, (_, v) in enumerate(dag.edges) for b, (u, _) in enumerate(dag.edges) if v == u}
    assert set(lg.line_edges) == expected
    # the line graph of a DAG is acyclic
    topological_order(lg.as_dag())


def test_grid_dag_layout():
    dag = grid_dag(3, 2)
    assert dag.node_count == 6
    assert dag.edges[:3] == ((0, 1), (0, 3), (1, 2))
    right, down = grid_edge_ids(3, 2)
    assert len(right) == 4 and len(down) == 3
    for (x, y), e in right.items():
        assert dag.edges[e] == (y * 3 + x, y * 3 + x + 1)
    for (x, y), e in down.items():
        assert dag.edges[e] == (y * 3 + x, (y + 1) * 3 + x)


def test_chain_and_reverse():
    c = chain_dag(4)
    assert c.edges == ((0, 1), (1, 2), (2, 3))
    assert reverse_dag(c).edges == ((1, 0), (2, 1), (3, 2))


def test_text_format_round_trip(tmp_path):
    dag = random_dag(np.random.default_rng(3), 7)
    text = format_dag(dag, comment="seven nodes")
    assert text.startswith("# seven nodes\nnodes 7\n")
    assert parse_dag(text) == dag
    write_dag(dag, tmp_path / "g.txt")
    assert read_dag(tmp_path / "g.txt") == dag


@pytest.mark.parametrize("text", ["edge 0 1\n", "nodes 2\nedge 0\n", "nodes x\n"])
def test_malformed_text_is_rejected(text):
    with pytest.raises(ValueError):
        parse_dag(text)


def test_edge_selection_helpers():
    dag = Dag(4, ((0, 1), (1, 2), (2, 3), (0, 3)))
    assert edges_between(dag, [0], [1, 3]) == [0, 3]
    assert induced_edges(dag, [0, 1, 2]) == [0, 1]


@given(dags(max_nodes=9), st.sampled_from(["topological-bisection"]))
def test_decomposition_levels_partition_the_nodes(dag, strategy):
    dec = decompose(dag, strategy)
    for level in range(dec.levels + 1):
        nodes = sorted(n for blk in dec.blocks[level] for n in blk)
        assert nodes == list(range(dag.node_count))
    if dag.node_count:
        assert len(dec.blocks[dec.levels]) == 1
        assert all(len(b) == 1 for b in dec.blocks[0])
    # children are ordered so that no edge runs backwards between them
    for level in range(1, dec.levels + 1):
        where = dec.assignment(level - 1)
        for kids in dec.children[level]:
            rank = {c: i for i, c in enumerate(kids)}
            for u, v in dag.edges:
                a, b = where[u], where[v]
                if a in rank and b in rank:
                    assert rank[a] <= rank[b]


def test_grid_quadrants_split_into_four_spatial_blocks():
    dec = decompose(grid_dag(4, 4), "grid-quadrant")
    assert dec.levels == 2
    top = dec.children[2][0]
    assert len(top) == 4
    first = sorted(dec.blocks[1][top[0]])
    assert first == [0, 1, 4, 5]


def test_quadrant_strategy_needs_a_grid():
    with pytest.raises(StrategyMismatch):
        decompose(Dag(3, ((0, 1),)), "grid-quadrant")


def test_boundary_and_internal_edges_cover_all_edges():
    dag = grid_dag(4, 4)
    dec = decompose(dag, "grid-quadrant")
    for level in range(dec.levels + 1):
        crossing = {e for es in dec.boundary_edges(level).values() for e in es}
        assert crossing.isdisjoint(dec.internal_edges(level))
        assert crossing | set(dec.internal_edges(level)) == set(range(dag.edge_count))


def test_four_chain_bisects_into_pairs_joined_by_one_edge():
    dec = decompose(chain_dag(4))
    assert dec.levels == 2
    assert dec.blocks[1] == ((0, 1), (2, 3))
    assert dec.boundary_edges(1) == {(0, 1): (1,)}


def test_five_chain_splits_three_two():
    dec = decompose(chain_dag(5))
    assert sorted(len(b) for b in dec.blocks[dec.levels - 1]) == [2, 3]


def test_adjacent_quadrants_share_two_edges_per_side():
    dec = decompose(grid_dag(4, 4), "grid-quadrant")
    crossing = dec.boundary_edges(1)
    assert len(crossing) == 4
    assert all(len(es) == 2 for es in crossing.values())
