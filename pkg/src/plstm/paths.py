"""Exact path combinatorics on DAGs and line graphs.

These are the slow-but-obvious references the fast kernels are checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .dag import Dag, LineGraph, build_line_graph
from .errors import PathExplosionError, ShapeError

DEFAULT_PATH_CAP = 10**6

__all__ = [
    "DEFAULT_PATH_CAP",
    "PathSet",
    "enumerate_paths",
    "iter_paths_from",
    "count_paths_2d",
    "stirling_paths_2d",
    "nilpotency_index",
    "longest_path_edges",
    "is_multitree",
]


@dataclass(frozen=True)
class PathSet:
    first_edge: int
    last_edge: int
    paths: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


def iter_paths_from(lg: LineGraph, first_edge: int, cap: int = DEFAULT_PATH_CAP):
    """Yield every line-graph path starting at ``first_edge`` (including the trivial one).

    Paths come out in depth-first order with successors visited by increasing id.
    """
    succ = lg.successors
    count = 0
    stack = [(first_edge, 0)]
    path = [first_edge]
    # explicit stack of (node, next-successor-index) keeps deep grids off the recursion limit
    count += 1
    yield tuple(path)
    while stack:
        node, i = stack[-1]
        if i < len(succ[node]):
            stack[-1] = (node, i + 1)
            nxt = succ[node][i]
            path.append(nxt)
            stack.append((nxt, 0))
            count += 1
            if count > cap:
                raise PathExplosionError(f"more than {cap} paths start at edge {first_edge}")
            yield tuple(path)
        else:
            stack.pop()
            path.pop()


def enumerate_paths(
    dag: Dag, first_edge: int, last_edge: int, cap: int = DEFAULT_PATH_CAP, lg: LineGraph | None = None
) -> PathSet:
    """All edge sequences from ``first_edge`` to ``last_edge`` joined at shared nodes."""
    for e in (first_edge, last_edge):
        if not 0 <= e < dag.edge_count:
            raise ShapeError(f"edge {e} does not exist")
    lg = lg or build_line_graph(dag)
    found = []
    for p in iter_paths_from(lg, first_edge, cap=cap):
        if p[-1] == last_edge:
            found.append(p)
    found.sort()
    return PathSet(first_edge, last_edge, tuple(found))


def count_paths_2d(dx: int, dy: int) -> int:
    """Monotone lattice paths spanning offsets ``dx`` right and ``dy`` down."""
    if dx < 0 or dy < 0:
        raise ValueError("offsets must be non-negative")
    return math.comb(dx + dy, dx)


def stirling_paths_2d(dx: int, dy: int) -> float:
    """Stirling estimate of :func:`count_paths_2d`; needs ``dx, dy >= 1``."""
    if dx < 1 or dy < 1:
        raise ValueError("the Stirling form needs dx, dy >= 1")
    d = dx + dy
    log_val = 0.5 * math.log(d / (2 * math.pi * dx * dy)) + d * math.log(d) - dx * math.log(dx) - dy * math.log(dy)
    return math.exp(log_val)


def longest_path_edges(lg: LineGraph) -> int:
    """Number of line edges on the longest line-graph path."""
    order = lg.as_dag().order
    depth = [0] * lg.node_count
    for a in order:
        for b in lg.successors[a]:
            depth[b] = max(depth[b], depth[a] + 1)
    return max(depth, default=0)


def nilpotency_index(lg: LineGraph) -> int:
    """Largest ``P`` with ``T**P != 0`` for the line-graph adjacency ``T``.

    Equal to the number of line edges on the longest path, so a line graph
    with ``P`` has paths of at most ``P + 1`` base edges.
    """
    return longest_path_edges(lg)


def is_multitree(lg: LineGraph) -> bool:
    """True iff every ordered pair of line-graph nodes is joined by at most one path.

    Counts paths exactly by dynamic programming from each start node, stopping
    as soon as any count reaches two.
    """
    order = lg.as_dag().order
    pos = {n: i for i, n in enumerate(order)}
    succ = lg.successors
    for start in range(lg.node_count):
        count = {start: 1}
        for a in order[pos[start]:]:
            ca = count.get(a)
            if not ca:
                continue
            for b in succ[a]:
                cb = count.get(b, 0) + ca
                if cb > 1:
                    return False
                count[b] = cb
    return True
