"""Directed acyclic graphs, their line graphs, and the fixture text format.

Edges are identified by their position in ``Dag.edges``. A cell state lives on
an edge; the node an edge leaves from computes it, the node it enters reads it.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import CycleError, ShapeError

__all__ = [
    "Dag",
    "LineGraph",
    "topological_order",
    "build_line_graph",
    "grid_dag",
    "chain_dag",
    "reverse_dag",
    "random_dag",
    "parse_dag",
    "format_dag",
    "read_dag",
    "write_dag",
]


@dataclass(frozen=True)
class Dag:
    """A directed graph on nodes ``0..node_count-1``.

    ``grid`` is set by :func:`grid_dag` and records the ``(nx, ny)`` extent of
    a down-right grid cover; node ``(x, y)`` has id ``y * nx + x``.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    grid: tuple[int, int] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        if self.node_count < 0:
            raise ShapeError("node_count must be non-negative")
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ShapeError(f"edge ({u}, {v}) references a node outside [0, {self.node_count})")
            if (u, v) in seen:
                raise ShapeError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def in_edges(self) -> tuple[tuple[int, ...], ...]:
        """Edge ids entering each node, in edge-id order."""
        acc: list[list[int]] = [[] for _ in range(self.node_count)]
        for e, (_, v) in enumerate(self.edges):
            acc[v].append(e)
        return tuple(tuple(a) for a in acc)

    @cached_property
    def out_edges(self) -> tuple[tuple[int, ...], ...]:
        """Edge ids leaving each node, in edge-id order."""
        acc: list[list[int]] = [[] for _ in range(self.node_count)]
        for e, (u, _) in enumerate(self.edges):
            acc[u].append(e)
        return tuple(tuple(a) for a in acc)

    @cached_property
    def order(self) -> tuple[int, ...]:
        return tuple(topological_order(self))

    def source(self, e: int) -> int:
        return self.edges[e][0]

    def target(self, e: int) -> int:
        return self.edges[e][1]


@dataclass(frozen=True)
class LineGraph:
    """Line graph of ``base``: nodes are base edges, ``(e1, e2)`` joins them at a node."""

    base: Dag
    line_edges: tuple[tuple[int, int], ...]

    @property
    def node_count(self) -> int:
        return self.base.edge_count

    @cached_property
    def successors(self) -> tuple[tuple[int, ...], ...]:
        acc: list[list[int]] = [[] for _ in range(self.node_count)]
        for a, b in self.line_edges:
            acc[a].append(b)
        return tuple(tuple(x) for x in acc)

    def as_dag(self) -> Dag:
        return Dag(self.node_count, self.line_edges)


def topological_order(dag: Dag) -> list[int]:
    """Kahn's algorithm, always releasing the lowest ready node id first."""
    indeg = [len(x) for x in dag.in_edges]
    ready = [n for n in range(dag.node_count) if indeg[n] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for e in dag.out_edges[n]:
            v = dag.edges[e][1]
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, v)
    if len(order) != dag.node_count:
        raise CycleError(f"graph has a cycle through {dag.node_count - len(order)} node(s)")
    return order


def build_line_graph(
    dag: Dag, keep: Callable[[int, int, int], bool] | None = None
) -> LineGraph:
    """Connect every incoming edge of a node to every outgoing edge of it.

    ``keep(node, e_in, e_out)`` can drop individual transitions, which is how a
    D-mode mask is reflected in the line graph.
    """
    dag.order  # raises CycleError for cyclic input
    pairs = []
    for n in range(dag.node_count):
        for ei in dag.in_edges[n]:
            for eo in dag.out_edges[n]:
                if keep is None or keep(n, ei, eo):
                    pairs.append((ei, eo))
    pairs.sort()
    return LineGraph(dag, tuple(pairs))


def grid_dag(nx: int, ny: int) -> Dag:
    """Down-right cover of an ``nx`` by ``ny`` grid.

    Node ``(x, y)`` is ``y * nx + x``. Edges are emitted node by node in id
    order, the rightward edge before the downward one.
    """
    edges = []
    for y in range(ny):
        for x in range(nx):
            n = y * nx + x
            if x + 1 < nx:
                edges.append((n, n + 1))
            if y + 1 < ny:
                edges.append((n, n + nx))
    return Dag(nx * ny, tuple(edges), grid=(nx, ny))


def grid_edge_ids(nx: int, ny: int) -> tuple[dict[tuple[int, int], int], dict[tuple[int, int], int]]:
    """Edge ids of :func:`grid_dag` keyed by the ``(x, y)`` of the edge's source node.

    Returns ``(right, down)`` dictionaries.
    """
    right, down = {}, {}
    e = 0
    for y in range(ny):
        for x in range(nx):
            if x + 1 < nx:
                right[(x, y)] = e
                e += 1
            if y + 1 < ny:
                down[(x, y)] = e
                e += 1
    return right, down


def chain_dag(n: int) -> Dag:
    return Dag(n, tuple((i, i + 1) for i in range(n - 1)), grid=(n, 1) if n else None)


def reverse_dag(dag: Dag) -> Dag:
    """Same edge ids, every edge flipped."""
    return Dag(dag.node_count, tuple((v, u) for u, v in dag.edges))


def random_dag(rng, n: int, p: float = 0.35, max_edges: int | None = None) -> Dag:
    """Random DAG: edge ``i -> j`` for ``i < j`` with probability ``p`` under a random relabeling."""
    perm = rng.permutation(n)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((int(perm[i]), int(perm[j])))
    if max_edges is not None and len(edges) > max_edges:
        keep = sorted(rng.choice(len(edges), size=max_edges, replace=False))
        edges = [edges[k] for k in keep]
    return Dag(n, tuple(edges))


def parse_dag(text: str) -> Dag:
    """Parse the fixture format: ``nodes <N>`` then ``edge <u> <v>`` lines, ``#`` comments."""
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "nodes" and len(parts) == 2 and n is None:
            n = int(parts[1])
        elif parts[0] == "edge" and len(parts) == 3 and n is not None:
            edges.append((int(parts[1]), int(parts[2])))
        else:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
    if n is None:
        raise ValueError("missing 'nodes <N>' header")
    return Dag(n, tuple(edges))


def format_dag(dag: Dag, comment: str | None = None) -> str:
    lines = [f"# {c}" for c in (comment.splitlines() if comment else [])]
    lines.append(f"nodes {dag.node_count}")
    lines.extend(f"edge {u} {v}" for u, v in dag.edges)
    return "\n".join(lines) + "\n"


def read_dag(path: str | Path) -> Dag:
    return parse_dag(Path(path).read_text())


def write_dag(dag: Dag, path: str | Path, comment: str | None = None) -> None:
    Path(path).write_text(format_dag(dag, comment))


def edges_between(dag: Dag, a: Iterable[int], b: Iterable[int]) -> list[int]:
    """Ids of edges whose source lies in ``a`` and target in ``b``."""
    sa, sb = set(a), set(b)
    return [e for e, (u, v) in enumerate(dag.edges) if u in sa and v in sb]


def induced_edges(dag: Dag, nodes: Sequence[int]) -> list[int]:
    s = set(nodes)
    return [e for e, (u, v) in enumerate(dag.edges) if u in s and v in s]
