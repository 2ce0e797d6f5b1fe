"""Parallel and chunkwise evaluation of pLSTM on chains and 2D grids.

Grid gates are arrays indexed ``[x, y]``. Gate names follow travel direction:
``r`` is the horizontal edge leaving a node (rightward in the down-right
cover), ``d`` the vertical one. ``t_ab`` carries a cell arriving on an
``a``-edge onto the outgoing ``b``-edge, so ``t_dr`` turns a vertical cell
horizontal and ``t_rd`` turns a horizontal cell vertical.

Gating matrices are dense ``(N, N)`` arrays indexed ``[source, target]`` with
node id ``y * nx + x``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from . import _scan_rules as rules
from . import kernels
from .dag import Dag, chain_dag, grid_dag, grid_edge_ids
from .errors import LengthError, ShapeError
from .stm import StmParams, apply_gating

__all__ = [
    "GridGates",
    "SeqLevelTensors",
    "GridLevelTensors",
    "DirectionCombo",
    "grid_to_stm",
    "chain_to_stm",
    "seq_level0",
    "grid_level0",
    "scan_1d",
    "scan_2d",
    "chunkwise",
    "gating_matrix_grid",
    "grid_hidden",
    "multidirectional_2d",
    "reflect_gates",
    "reflection_permutation",
]

_GATE_NAMES = ("s_r", "s_d", "t_rr", "t_dr", "t_rd", "t_dd", "m_r", "m_d", "direct")


@dataclass
class GridGates:
    """Scalar gates for every node of an ``nx`` by ``ny`` grid, each array ``(nx, ny)``."""

    s_r: np.ndarray
    s_d: np.ndarray
    t_rr: np.ndarray
    t_dr: np.ndarray
    t_rd: np.ndarray
    t_dd: np.ndarray
    m_r: np.ndarray
    m_d: np.ndarray
    direct: np.ndarray

    def __post_init__(self):
        shape = np.shape(self.s_r)
        for name in _GATE_NAMES:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape or arr.ndim != 2:
                raise ShapeError(f"gate {name} has shape {arr.shape}, expected {shape}")
            setattr(self, name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.s_r.shape

    @classmethod
    def filled(cls, nx: int, ny: int, value: float = 1.0, direct: float = 0.0) -> "GridGates":
        full = lambda v: np.full((nx, ny), float(v))
        return cls(*(full(value) for _ in range(8)), full(direct))

    @classmethod
    def random(cls, rng: np.random.Generator, nx: int, ny: int, scale: float = 1.0) -> "GridGates":
        return cls(*(scale * rng.standard_normal((nx, ny)) for _ in range(9)))

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, n) for n in _GATE_NAMES)

    def map(self, fn) -> "GridGates":
        return GridGates(*(fn(a) for a in self.arrays()))


# -- conversion to the general DAG form -------------------------------------------------------


def grid_to_stm(gates: GridGates, query, key, value) -> tuple[Dag, StmParams]:
    """Express grid gates as :class:`StmParams` on :func:`grid_dag`.

    ``query``/``key``/``value`` are ``(N, K)``/``(N, K)``/``(N, V)`` in node-id order.
    """
    nx, ny = gates.shape
    dag = grid_dag(nx, ny)
    right, down = grid_edge_ids(nx, ny)
    # which gate family applies to an (in edge, out edge) pair, by edge kind
    kind = {e: "r" for e in right.values()}
    kind.update({e: "d" for e in down.values()})
    source, transition, mark = [], [], []
    for y in range(ny):
        for x in range(nx):
            n = y * nx + x
            ins, outs = dag.in_edges[n], dag.out_edges[n]
            source.append(np.array([getattr(gates, "s_" + kind[e])[x, y] for e in outs]))
            mark.append(np.array([getattr(gates, "m_" + kind[e])[x, y] for e in ins]))
            t = np.zeros((len(ins), len(outs)))
            for i, ei in enumerate(ins):
                for j, eo in enumerate(outs):
                    t[i, j] = getattr(gates, f"t_{kind[ei]}{kind[eo]}")[x, y]
            transition.append(t)
    params = StmParams(
        source,
        transition,
        mark,
        gates.direct.T.reshape(-1).copy(),
        np.asarray(query, dtype=float),
        np.asarray(key, dtype=float),
        np.asarray(value, dtype=float),
    )
    params.validate(dag)
    return dag, params


def chain_to_stm(source, transition, mark, direct, query, key, value) -> tuple[Dag, StmParams]:
    """Per-node scalar chain gates as :class:`StmParams` on :func:`chain_dag`."""
    n = len(direct)
    dag = chain_dag(n)
    params = StmParams(
        [np.array([source[i]]) if i + 1 < n else np.zeros(0) for i in range(n)],
        [np.full((1 if i > 0 else 0, 1 if i + 1 < n else 0), transition[i]) for i in range(n)],
        [np.array([mark[i]]) if i > 0 else np.zeros(0) for i in range(n)],
        np.asarray(direct, dtype=float),
        np.asarray(query, dtype=float),
        np.asarray(key, dtype=float),
        np.asarray(value, dtype=float),
    )
    params.validate(dag)
    return dag, params


# -- 1D scan --------------------------------------------------------------------------------------


@dataclass
class SeqLevelTensors:
    """Chain blocks of ``2**level`` nodes.

    ``S`` is ``(A, s)``, ``T`` is ``(A,)``, ``M`` is ``(A, s)`` and ``G`` is
    ``(A, s, s)`` indexed ``[block, source, target]``. ``length`` is the
    unpadded sequence length.
    """

    level: int
    S: np.ndarray
    T: np.ndarray
    M: np.ndarray
    G: np.ndarray
    length: int

    @property
    def block(self) -> int:
        return 2**self.level


def seq_level0(source, transition, mark, direct, levels: int | None = None) -> SeqLevelTensors:
    """Level-0 chain tensors, padded to ``2**levels`` with identity transitions.

    Padded nodes get zero source, mark and direct terms. ``levels=None`` picks
    the smallest power of two that fits.
    """
    arrs = [np.asarray(a, dtype=float).reshape(-1) for a in (source, transition, mark, direct)]
    n = arrs[0].size
    if any(a.size != n for a in arrs):
        raise ShapeError("chain gates must all have one entry per node")
    if levels is None:
        levels = max(0, math.ceil(math.log2(max(n, 1))))
    total = 2**levels
    if total < n:
        raise LengthError(f"length {n} does not fit in 2**{levels}")
    pad = total - n
    s, t, m, d = (np.concatenate([a, np.full(pad, fill)]) for a, fill in zip(arrs, (0.0, 1.0, 0.0, 0.0)))
    return SeqLevelTensors(0, s[:, None], t, m[:, None], d[:, None, None], n)


def _merge_1d(lv: SeqLevelTensors) -> SeqLevelTensors:
    a, b = slice(0, None, 2), slice(1, None, 2)
    sa, sb, ta, tb, ma, mb = lv.S[a], lv.S[b], lv.T[a], lv.T[b], lv.M[a], lv.M[b]
    s = lv.block
    S = np.concatenate([sa * tb[:, None], sb], axis=1)
    M = np.concatenate([ma, ta[:, None] * mb], axis=1)
    G = np.zeros((sa.shape[0], 2 * s, 2 * s))
    G[:, :s, :s] = lv.G[a]
    G[:, s:, s:] = lv.G[b]
    G[:, :s, s:] = sa[:, :, None] * mb[:, None, :]
    return SeqLevelTensors(lv.level + 1, S, ta * tb, M, G, lv.length)


def _scan_1d_levels(level0: SeqLevelTensors, levels: int, stats: dict | None) -> SeqLevelTensors:
    if level0.level != 0 or level0.T.shape[0] != 2**levels:
        raise LengthError(f"sequence of {level0.T.shape[0]} blocks is not padded to 2**{levels}")
    lv = level0
    for _ in range(levels):
        lv = _merge_1d(lv)
        if stats is not None:
            stats["merge_levels"] = stats.get("merge_levels", 0) + 1
    return lv


def scan_1d(level0: SeqLevelTensors, levels: int, stats: dict | None = None) -> np.ndarray:
    """Gating matrix of a chain by ``levels`` pairwise merges; cropped to the unpadded length."""
    lv = _scan_1d_levels(level0, levels, stats)
    n = level0.length
    return lv.G[0, :n, :n].copy()


def _reduce_1d(level0: SeqLevelTensors, chunk_level: int) -> SeqLevelTensors:
    lv = level0
    for _ in range(chunk_level):
        lv = _merge_1d(lv)
    return lv


# -- 2D scan --------------------------------------------------------------------------------------


@dataclass
class GridLevelTensors:
    """Grid blocks of ``s = 2**level`` by ``s`` nodes, leading axes ``(X, Y)`` over blocks.

    Node-indexed axes ``(u, w)`` are the in-block ``(x, y)`` offsets. Boundary
    axes run along the boundary: ``y`` offset for left/right boundaries and
    ``x`` offset for top/bottom ones.

    * ``S_r``, ``S_d``: ``(X, Y, s, s, s)`` node -> right-out / bottom-out
    * ``T_rr``, ``T_dr``, ``T_rd``, ``T_dd``: ``(X, Y, s, s)`` in-boundary -> out-boundary
    * ``M_r``, ``M_d``: ``(X, Y, s, s, s)`` left-in / top-in -> node
    * ``G``: ``(X, Y, s, s, s, s)`` node -> node
    """

    level: int
    S_r: np.ndarray
    S_d: np.ndarray
    T_rr: np.ndarray
    T_dr: np.ndarray
    T_rd: np.ndarray
    T_dd: np.ndarray
    M_r: np.ndarray
    M_d: np.ndarray
    G: np.ndarray
    extent: tuple[int, int]

    @property
    def block(self) -> int:
        return 2**self.level

    @property
    def blocks(self) -> tuple[int, int]:
        return self.G.shape[:2]

    def check(self) -> None:
        bx, by = self.blocks
        s = self.block
        want = {
            "S_r": 3, "S_d": 3, "M_r": 3, "M_d": 3,
            "T_rr": 2, "T_dr": 2, "T_rd": 2, "T_dd": 2, "G": 4,
        }
        for name, k in want.items():
            shape = getattr(self, name).shape
            if shape != (bx, by) + (s,) * k:
                raise ShapeError(f"{name} has shape {shape}, expected {(bx, by) + (s,) * k}")


def grid_level0(gates: GridGates, levels: int | None = None) -> GridLevelTensors:
    """Level-0 grid tensors, padded to ``2**levels`` per side.

    Padded nodes pass cells straight through (``t_rr = t_dd = 1``, mixed
    transitions 0) and have zero source, mark and direct terms.
    """
    nx, ny = gates.shape
    if levels is None:
        levels = max(0, math.ceil(math.log2(max(nx, ny, 1))))
    side = 2**levels
    if side < max(nx, ny):
        raise LengthError(f"grid {nx}x{ny} does not fit in 2**{levels}")
    fill = {"t_rr": 1.0, "t_dd": 1.0}

    def pad(name):
        out = np.full((side, side), fill.get(name, 0.0))
        out[:nx, :ny] = getattr(gates, name)
        return out

    p = {name: pad(name) for name in _GATE_NAMES}
    e = lambda a, k: a.reshape(a.shape + (1,) * k)
    return GridLevelTensors(
        0,
        e(p["s_r"], 3), e(p["s_d"], 3),
        e(p["t_rr"], 2), e(p["t_dr"], 2), e(p["t_rd"], 2), e(p["t_dd"], 2),
        e(p["m_r"], 3), e(p["m_d"], 3),
        e(p["direct"], 4),
        (nx, ny),
    )


# the einsum that appends one more operand to a partial product, keyed by (acc kind, operand kind)
# and the kind of the result
_FOLD = {
    ("T", "T"): ("...ab,...bc->...ac", "T"),
    ("S", "T"): ("...uwa,...ab->...uwb", "S"),
    ("T", "M"): ("...ab,...uwb->...uwa", "M"),
    ("S", "M"): ("...uwa,...pqa->...uwpq", "G"),
}


def _kind(name: str) -> str:
    return name.split(".")[1][0]


def _term(children: dict, term: tuple[str, ...]) -> np.ndarray:
    child, tensor = term[0].split(".")
    acc = children[child][tensor]
    kind = _kind(term[0])
    for ref in term[1:]:
        child, tensor = ref.split(".")
        spec, kind = _FOLD[(kind, _kind(ref))]
        acc = np.einsum(spec, acc, children[child][tensor])
    return acc


def _rule_value(children: dict, terms) -> np.ndarray:
    out = _term(children, terms[0])
    for t in terms[1:]:
        out = out + _term(children, t)
    return out


def _merge_2d(lv: GridLevelTensors) -> GridLevelTensors:
    s = lv.block
    bx, by = lv.blocks
    hx, hy = bx // 2, by // 2
    children = {}
    for name, (dx, dy) in rules.CHILDREN.items():
        children[name] = {
            f.name: getattr(lv, f.name)[dx::2, dy::2]
            for f in fields(lv)
            if f.name not in ("level", "extent")
        }
    half = {"lo": slice(0, s), "hi": slice(s, 2 * s)}
    node = {c: (half["lo" if dx == 0 else "hi"], half["lo" if dy == 0 else "hi"]) for c, (dx, dy) in rules.CHILDREN.items()}
    out = {}
    for name, table in rules.T_RULES.items():
        t = np.zeros((hx, hy, 2 * s, 2 * s))
        for (hin, hout), terms in table.items():
            t[:, :, half[hin], half[hout]] = _rule_value(children, terms)
        out[name] = t
    for table_set in (rules.S_RULES, rules.M_RULES):
        for name, table in table_set.items():
            t = np.zeros((hx, hy, 2 * s, 2 * s, 2 * s))
            for (child, h), terms in table.items():
                u, w = node[child]
                t[:, :, u, w, half[h]] = _rule_value(children, terms)
            out[name] = t
    g = np.zeros((hx, hy) + (2 * s,) * 4)
    for (src, tgt), terms in rules.G_RULES.items():
        (u, w), (p, q) = node[src], node[tgt]
        g[:, :, u, w, p, q] = _rule_value(children, terms)
    out["G"] = g
    return GridLevelTensors(lv.level + 1, extent=lv.extent, **out)


def _check_2d(level0: GridLevelTensors, levels: int) -> None:
    if level0.level != 0:
        raise ShapeError("scan input must be level-0 tensors")
    level0.check()
    side = 2**levels
    if level0.blocks != (side, side):
        raise LengthError(f"grid of {level0.blocks} blocks is not padded to 2**{levels} per side")


def _reduce_2d(level0: GridLevelTensors, levels: int, stats: dict | None = None) -> GridLevelTensors:
    lv = level0
    for _ in range(levels):
        lv = _merge_2d(lv)
        if stats is not None:
            stats["merge_levels"] = stats.get("merge_levels", 0) + 1
    return lv


def _block_g_to_nodes(g: np.ndarray) -> np.ndarray:
    """``(s, s, s, s)`` ``[u, w, p, q]`` block gating to ``(s*s, s*s)`` in id order."""
    s = g.shape[0]
    return g.transpose(1, 0, 3, 2).reshape(s * s, s * s)


def scan_2d(level0: GridLevelTensors, levels: int, stats: dict | None = None) -> np.ndarray:
    """Down-right gating matrix of a grid by ``levels`` quadrant merges, cropped to the grid extent."""
    _check_2d(level0, levels)
    top = _reduce_2d(level0, levels, stats)
    nx, ny = level0.extent
    g = top.G[0, 0, :nx, :ny, :nx, :ny]
    return g.transpose(1, 0, 3, 2).reshape(nx * ny, nx * ny).copy()


# -- recurrent grid evaluation through the compiled kernel ---------------------------------------


def _kernel_gates(gates: GridGates):
    return tuple(a[None] for a in gates.arrays()[:8])


def gating_matrix_grid(gates: GridGates, backend: str | None = None) -> np.ndarray:
    """Down-right gating matrix by the grid recurrence with a one-hot payload per node."""
    nx, ny = gates.shape
    n = nx * ny
    eye = np.eye(n).reshape(ny, nx, n).transpose(1, 0, 2)[None]
    out, _, _ = kernels.grid_forward(*_kernel_gates(gates), eye, backend=backend)
    g = out[0].transpose(1, 0, 2).reshape(n, n).T.copy()
    g[np.diag_indices(n)] += gates.direct.T.reshape(-1)
    return g


def grid_hidden(gates: GridGates, query, key, value, backend: str | None = None) -> np.ndarray:
    """Hidden states ``(N, V)`` of the down-right grid recurrence, including the direct term.

    ``query``/``key``/``value`` are in node-id order.
    """
    nx, ny = gates.shape
    q, k, v = (np.asarray(a, dtype=float) for a in (query, key, value))
    kd, vd = k.shape[1], v.shape[1]
    kv = (k[:, :, None] * v[:, None, :]).reshape(ny, nx, kd * vd).transpose(1, 0, 2)[None]
    out, _, _ = kernels.grid_forward(*_kernel_gates(gates), kv, backend=backend)
    cells = out[0].transpose(1, 0, 2).reshape(nx * ny, kd, vd)
    h = np.einsum("nk,nkv->nv", q, cells)
    d = gates.direct.T.reshape(-1)
    return h + (d * np.sum(q * k, axis=1))[:, None] * v


# -- chunkwise ------------------------------------------------------------------------------------


def _chunkwise_1d(level0: SeqLevelTensors, chunk_level: int, query, key, value) -> np.ndarray:
    lv = _reduce_1d(level0, chunk_level)
    s = lv.block
    total = level0.T.shape[0]
    n = level0.length
    kd, vd = key.shape[1], value.shape[1]
    q, k, v = (np.concatenate([a, np.zeros((total - n, a.shape[1]))]) for a in (query, key, value))
    h = np.zeros((total, vd))
    cell = np.zeros((kd, vd))
    for b in range(total // s):
        sl = slice(b * s, (b + 1) * s)
        qb, kb, vb = q[sl], k[sl], v[sl]
        inter = lv.M[b][:, None] * (qb @ cell)
        intra = ((qb @ kb.T) * lv.G[b].T) @ vb
        h[sl] = inter + intra
        cell = lv.T[b] * cell + np.einsum("n,nk,nv->kv", lv.S[b], kb, vb)
    return h[:n]


def _chunkwise_2d(level0: GridLevelTensors, chunk_level: int, query, key, value) -> np.ndarray:
    lv = _reduce_2d(level0, chunk_level)
    s = lv.block
    bx, by = lv.blocks
    nx, ny = level0.extent
    side = bx * s
    kd, vd = key.shape[1], value.shape[1]

    def to_grid(a):
        full = np.zeros((side, side, a.shape[1]))
        full[:nx, :ny] = a.reshape(ny, nx, -1).transpose(1, 0, 2)
        return full

    q, k, v = to_grid(query), to_grid(key), to_grid(value)
    h = np.zeros((side, side, vd))
    right = np.zeros((bx, by, s, kd, vd))  # right-out boundary cells of every block
    bottom = np.zeros((bx, by, s, kd, vd))
    zero = np.zeros((s, kd, vd))
    for j in range(by):
        for i in range(bx):
            xs, ys = slice(i * s, (i + 1) * s), slice(j * s, (j + 1) * s)
            qb, kb, vb = q[xs, ys], k[xs, ys], v[xs, ys]
            c_left = right[i - 1, j] if i > 0 else zero
            c_top = bottom[i, j - 1] if j > 0 else zero
            read = np.einsum("uwa,akv->uwkv", lv.M_r[i, j], c_left) + np.einsum("uwa,akv->uwkv", lv.M_d[i, j], c_top)
            inter = np.einsum("uwk,uwkv->uwv", qb, read)
            w = np.einsum("pqk,uwk,uwpq->uwpq", qb, kb, lv.G[i, j])
            intra = np.einsum("uwpq,uwv->pqv", w, vb)
            h[xs, ys] = inter + intra
            kv = np.einsum("uwk,uwv->uwkv", kb, vb)
            right[i, j] = (
                np.einsum("ab,akv->bkv", lv.T_rr[i, j], c_left)
                + np.einsum("ab,akv->bkv", lv.T_dr[i, j], c_top)
                + np.einsum("uwb,uwkv->bkv", lv.S_r[i, j], kv)
            )
            bottom[i, j] = (
                np.einsum("ab,akv->bkv", lv.T_rd[i, j], c_left)
                + np.einsum("ab,akv->bkv", lv.T_dd[i, j], c_top)
                + np.einsum("uwb,uwkv->bkv", lv.S_d[i, j], kv)
            )
    return h[:nx, :ny].transpose(1, 0, 2).reshape(nx * ny, vd)


def chunkwise(level0, chunk_level: int, query, key, value) -> np.ndarray:
    """Hidden states by parallel scans inside chunks of ``2**chunk_level`` and a recurrence across chunks.

    ``level0`` is a :class:`SeqLevelTensors` or :class:`GridLevelTensors`;
    ``query``/``key``/``value`` are ``(N, K)``/``(N, K)``/``(N, V)`` in node-id
    order over the unpadded extent.
    """
    q, k, v = (np.asarray(a, dtype=float) for a in (query, key, value))
    if isinstance(level0, SeqLevelTensors):
        levels = int(math.log2(level0.T.shape[0]))
        if level0.level != 0 or 2**levels != level0.T.shape[0]:
            raise LengthError("chain tensors are not padded to a power of two")
        if not 0 <= chunk_level <= levels:
            raise LengthError(f"chunk_level {chunk_level} outside [0, {levels}]")
        return _chunkwise_1d(level0, chunk_level, q, k, v)
    levels = int(math.log2(level0.blocks[0]))
    _check_2d(level0, levels)
    if not 0 <= chunk_level <= levels:
        raise LengthError(f"chunk_level {chunk_level} outside [0, {levels}]")
    return _chunkwise_2d(level0, chunk_level, q, k, v)


# -- four direction covers ------------------------------------------------------------------------


class DirectionCombo(enum.Enum):
    DOWN_RIGHT = "down-right"
    DOWN_LEFT = "down-left"
    UP_RIGHT = "up-right"
    UP_LEFT = "up-left"

    @property
    def flips(self) -> tuple[bool, bool]:
        """Whether x and y are reflected to map this cover onto the down-right one."""
        return (self in (DirectionCombo.DOWN_LEFT, DirectionCombo.UP_LEFT),
                self in (DirectionCombo.UP_RIGHT, DirectionCombo.UP_LEFT))


def reflect_gates(gates: GridGates, combo: DirectionCombo) -> GridGates:
    fx, fy = combo.flips
    sl = (slice(None, None, -1) if fx else slice(None), slice(None, None, -1) if fy else slice(None))
    return gates.map(lambda a: a[sl].copy())


def reflection_permutation(nx: int, ny: int, combo: DirectionCombo) -> np.ndarray:
    """``perm[i]`` is the original node id of node ``i`` in the reflected grid."""
    fx, fy = combo.flips
    y, x = np.divmod(np.arange(nx * ny), nx)
    ox = nx - 1 - x if fx else x
    oy = ny - 1 - y if fy else y
    return oy * nx + ox


def _cover_gating(gates: GridGates, method: str, backend: str | None) -> np.ndarray:
    if method == "scan":
        level0 = grid_level0(gates)
        return scan_2d(level0, int(math.log2(level0.blocks[0])))
    if method == "recurrent":
        return gating_matrix_grid(gates, backend=backend)
    raise ValueError(f"unknown method {method!r}")


def multidirectional_2d(
    gates_by_combo: dict,
    direct,
    query,
    key,
    value,
    method: str = "scan",
    backend: str | None = None,
    return_gating: bool = False,
):
    """Hidden states from the summed gating matrices of up to four direction covers.

    Each cover's gates are indexed by the original ``[x, y]``; their names
    refer to that cover's travel directions (``r`` is leftward in a left-going
    cover). Cover ``direct`` fields are ignored; ``direct`` ``(nx, ny)`` is
    added once on the diagonal. The combined matrix is applied in one pass.
    """
    if not gates_by_combo:
        raise ShapeError("at least one direction cover is required")
    direct = np.asarray(direct, dtype=float)
    shapes = {g.shape for g in gates_by_combo.values()}
    if len(shapes) != 1 or direct.shape not in shapes:
        raise ShapeError(f"cover gate shapes {shapes} and direct {direct.shape} disagree")
    nx, ny = direct.shape
    n = nx * ny
    total = np.zeros((n, n))
    for combo in DirectionCombo:
        gates = gates_by_combo.get(combo)
        if gates is None:
            continue
        flipped = replace(reflect_gates(gates, combo), direct=np.zeros_like(direct))
        g = _cover_gating(flipped, method, backend)
        perm = reflection_permutation(nx, ny, combo)
        cover = np.empty_like(g)
        cover[np.ix_(perm, perm)] = g
        total += cover
    total[np.diag_indices(n)] += direct.T.reshape(-1)
    params = StmParams([], [], [], np.zeros(n), np.asarray(query, float), np.asarray(key, float), np.asarray(value, float))
    h = apply_gating(total, params)
    return (h, total) if return_gating else h
