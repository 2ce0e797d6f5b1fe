"""Recursive decomposition of a DAG into balanced subgraphs, down to single nodes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from .dag import Dag
from .errors import StrategyMismatch

__all__ = ["Decomposition", "decompose", "STRATEGIES"]

STRATEGIES = ("topological-bisection", "grid-quadrant")


@dataclass(frozen=True)
class Decomposition:
    """Subgraph hierarchy of ``dag``.

    ``blocks[l]`` lists the level-``l`` subgraphs as node tuples (level 0 holds
    singletons, level ``levels`` the whole graph). ``children[l][i]`` indexes
    the level ``l-1`` blocks making up block ``i`` of level ``l``, listed in an
    order in which no edge runs from a later child to an earlier one.
    """

    dag: Dag
    strategy: str
    blocks: tuple[tuple[tuple[int, ...], ...], ...]
    children: tuple[tuple[tuple[int, ...], ...], ...]

    @property
    def levels(self) -> int:
        return len(self.blocks) - 1

    def assignment(self, level: int) -> dict[int, int]:
        """Node id -> index of its block at ``level``."""
        return {n: i for i, blk in enumerate(self.blocks[level]) for n in blk}

    def multi_index(self, level: int, block: int) -> tuple[int, ...]:
        """Child positions from the root down to ``block`` at ``level``."""
        path = []
        for l in range(level, self.levels):
            parent = next(i for i, ch in enumerate(self.children[l + 1]) if block in ch)
            path.append(self.children[l + 1][parent].index(block))
            block = parent
        return tuple(reversed(path))

    @cached_property
    def _boundary(self):
        out = []
        for l in range(len(self.blocks)):
            where = self.assignment(l)
            acc: dict[tuple[int, int], list[int]] = {}
            for e, (u, v) in enumerate(self.dag.edges):
                a, b = where[u], where[v]
                if a != b:
                    acc.setdefault((a, b), []).append(e)
            out.append({k: tuple(v) for k, v in acc.items()})
        return tuple(out)

    def boundary_edges(self, level: int) -> dict[tuple[int, int], tuple[int, ...]]:
        """Edges joining distinct level-``level`` blocks, keyed by ``(from_block, to_block)``."""
        return self._boundary[level]

    def internal_edges(self, level: int) -> tuple[int, ...]:
        where = self.assignment(level)
        return tuple(e for e, (u, v) in enumerate(self.dag.edges) if where[u] == where[v])


def _halves(seq):
    k = math.ceil(len(seq) / 2)
    return [seq[:k], seq[k:]]


def _bisection(dag: Dag):
    order = list(dag.order)
    levels = math.ceil(math.log2(len(order))) if len(order) > 1 else 0
    # top-down: each level splits every block of size > 1 in two contiguous halves
    tiers = [[tuple(order)]] if order else [[]]
    kids = []
    for _ in range(levels):
        nxt, ch = [], []
        for blk in tiers[-1]:
            parts = _halves(list(blk)) if len(blk) > 1 else [list(blk)]
            idx = []
            for p in parts:
                if p:
                    idx.append(len(nxt))
                    nxt.append(tuple(p))
            ch.append(tuple(idx))
        tiers.append(nxt)
        kids.append(tuple(ch))
    return tiers, kids


def _quadrants(dag: Dag):
    nx, ny = dag.grid
    levels = max(math.ceil(math.log2(nx)) if nx > 1 else 0, math.ceil(math.log2(ny)) if ny > 1 else 0)
    tiers = [[(range(nx), range(ny))]]
    kids = []
    for _ in range(levels):
        nxt, ch = [], []
        for xr, yr in tiers[-1]:
            xs = _halves(xr) if len(xr) > 1 else [xr]
            ys = _halves(yr) if len(yr) > 1 else [yr]
            idx = []
            for ysub in ys:
                for xsub in xs:
                    if len(xsub) and len(ysub):
                        idx.append(len(nxt))
                        nxt.append((xsub, ysub))
            ch.append(tuple(idx))
        tiers.append(nxt)
        kids.append(tuple(ch))
    as_nodes = [[tuple(sorted(y * nx + x for y in yr for x in xr)) for xr, yr in tier] for tier in tiers]
    return as_nodes, kids


def decompose(dag: Dag, strategy: str = "topological-bisection") -> Decomposition:
    """Split ``dag`` recursively until every block is a single node.

    ``topological-bisection`` halves contiguous runs of the topological order;
    ``grid-quadrant`` halves the x and y ranges of a grid built by
    :func:`plstm.dag.grid_dag`.
    """
    if strategy == "topological-bisection":
        tiers, kids = _bisection(dag)
    elif strategy == "grid-quadrant":
        if dag.grid is None:
            raise StrategyMismatch("grid-quadrant decomposition needs a grid DAG")
        tiers, kids = _quadrants(dag)
    else:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    # stored bottom-up: blocks[0] are singletons
    blocks = tuple(tuple(t) for t in reversed(tiers))
    children = ((),) + tuple(reversed(kids))
    return Decomposition(dag, strategy, blocks, children)
