"""Source / Transition / Mark networks on general DAGs.

Every node ``n`` owns

* ``source[n][j]``        gate from the node input onto its ``j``-th outgoing edge,
* ``transition[n][i, j]`` gate from its ``i``-th incoming to ``j``-th outgoing edge,
* ``mark[n][i]``          gate from its ``i``-th incoming edge to the node output,
* ``direct[n]``           skip term from input to output,

plus query/key/value vectors. Incoming and outgoing edges are numbered in the
order of ``Dag.in_edges`` / ``Dag.out_edges``.

The cell on edge ``e`` leaving node ``n`` is::

    C_e = sum_i transition[n][i, e] C_{in_i} + source[n][e] * outer(k_n, v_n)

and the node output is::

    H_n = q_n @ sum_i mark[n][i] C_{in_i} + direct[n] * (q_n @ k_n) * v_n

In state-tracking mode gates carry extra matrix dimensions: ``source[n]`` is
``(out, J_S, J_T)``, ``transition[n]`` is ``(in, out, J_T, J_T)``, ``mark[n]``
is ``(in, J_T, J_M)``, ``direct`` is ``(N, J_S, J_M)``, keys are
``(N, J_S, K)`` and queries ``(N, J_M, K)``. Path products then read
``S @ T_1 @ ... @ T_p @ M``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dag import Dag, build_line_graph, reverse_dag
from .decompose import Decomposition
from .errors import DecompositionMismatch, ShapeError
from .paths import DEFAULT_PATH_CAP, iter_paths_from

__all__ = [
    "StmParams",
    "StmGrads",
    "random_params",
    "lift_params",
    "forward_recurrent",
    "gating_matrix_paths",
    "gating_matrix_recurrent",
    "gating_matrix_hierarchical",
    "apply_gating",
    "backward_recurrent",
    "forward_bidirectional",
    "NORMALIZER_EPS",
]

NORMALIZER_EPS = 1e-6


@dataclass
class StmParams:
    source: list[np.ndarray]
    transition: list[np.ndarray]
    mark: list[np.ndarray]
    direct: np.ndarray
    query: np.ndarray
    key: np.ndarray
    value: np.ndarray

    @property
    def state_tracking(self) -> bool:
        return self.direct.ndim == 3

    @property
    def key_dim(self) -> int:
        return self.key.shape[-1]

    @property
    def value_dim(self) -> int:
        return self.value.shape[-1]

    def validate(self, dag: Dag) -> None:
        n = dag.node_count
        for name in ("source", "transition", "mark"):
            if len(getattr(self, name)) != n:
                raise ShapeError(f"{name} has {len(getattr(self, name))} entries for {n} nodes")
        if self.value.ndim != 2 or self.value.shape[0] != n:
            raise ShapeError(f"value must be (N, V), got {self.value.shape}")
        st = self.state_tracking
        if st:
            js, jm = self.direct.shape[1:]
            if self.key.shape[:2] != (n, js) or self.query.shape[:2] != (n, jm):
                raise ShapeError("state-tracking key/query must be (N, J_S, K) and (N, J_M, K)")
        else:
            if self.direct.shape != (n,):
                raise ShapeError(f"direct must be (N,), got {self.direct.shape}")
            if self.key.ndim != 2 or self.query.shape != self.key.shape or self.key.shape[0] != n:
                raise ShapeError(f"query/key must both be (N, K), got {self.query.shape}, {self.key.shape}")
        for v in range(n):
            din, dout = len(dag.in_edges[v]), len(dag.out_edges[v])
            s, t, m = self.source[v], self.transition[v], self.mark[v]
            if st:
                ok = (
                    s.shape[:2] == (dout, js)
                    and t.shape[:2] == (din, dout)
                    and m.shape[0] == din
                    and (m.ndim == 3 and m.shape[2] == jm)
                )
            else:
                ok = s.shape == (dout,) and t.shape == (din, dout) and m.shape == (din,)
            if not ok:
                raise ShapeError(
                    f"node {v}: gate shapes {s.shape}, {t.shape}, {m.shape} do not match in/out degree {din}/{dout}"
                )
        arrays = [*self.source, *self.transition, *self.mark, self.direct, self.query, self.key, self.value]
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ShapeError("parameters must be finite")

    def copy(self) -> "StmParams":
        return StmParams(
            [a.copy() for a in self.source],
            [a.copy() for a in self.transition],
            [a.copy() for a in self.mark],
            self.direct.copy(),
            self.query.copy(),
            self.key.copy(),
            self.value.copy(),
        )


StmGrads = StmParams  # gradients share the parameter layout


def random_params(
    dag: Dag,
    rng: np.random.Generator,
    key_dim: int = 3,
    value_dim: int = 2,
    gate_scale: float = 1.0,
    state_dims: tuple[int, int, int] | None = None,
) -> StmParams:
    """Gaussian parameters for ``dag``; ``state_dims=(J_S, J_T, J_M)`` enables state tracking."""
    n = dag.node_count
    din = [len(x) for x in dag.in_edges]
    dout = [len(x) for x in dag.out_edges]
    g = lambda *shape: gate_scale * rng.standard_normal(shape)
    if state_dims is None:
        return StmParams(
            [g(dout[v]) for v in range(n)],
            [g(din[v], dout[v]) for v in range(n)],
            [g(din[v]) for v in range(n)],
            g(n),
            rng.standard_normal((n, key_dim)),
            rng.standard_normal((n, key_dim)),
            rng.standard_normal((n, value_dim)),
        )
    js, jt, jm = state_dims
    return StmParams(
        [g(dout[v], js, jt) for v in range(n)],
        [g(din[v], dout[v], jt, jt) for v in range(n)],
        [g(din[v], jt, jm) for v in range(n)],
        g(n, js, jm),
        rng.standard_normal((n, jm, key_dim)),
        rng.standard_normal((n, js, key_dim)),
        rng.standard_normal((n, value_dim)),
    )


def lift_params(params: StmParams) -> StmParams:
    """Express scalar parameters in state-tracking layout with ``J_S = J_T = J_M = 1``."""
    if params.state_tracking:
        return params
    return StmParams(
        [s[:, None, None] for s in params.source],
        [t[:, :, None, None] for t in params.transition],
        [m[:, None, None] for m in params.mark],
        params.direct[:, None, None],
        params.query[:, None, :],
        params.key[:, None, :],
        params.value,
    )


# -- recurrent form ---------------------------------------------------------------------------


def _forward_scalar(dag: Dag, p: StmParams):
    n_edges = dag.edge_count
    cells = np.zeros((n_edges, p.key_dim, p.value_dim))
    hidden = np.zeros((dag.node_count, p.value_dim))
    for n in dag.order:
        ins, outs = dag.in_edges[n], dag.out_edges[n]
        q, k, v = p.query[n], p.key[n], p.value[n]
        if ins:
            acc = p.mark[n][0] * cells[ins[0]]
            for i in range(1, len(ins)):
                acc = acc + p.mark[n][i] * cells[ins[i]]
            hidden[n] = q @ acc
        hidden[n] = hidden[n] + p.direct[n] * (q @ k) * v
        for j, eo in enumerate(outs):
            c = (p.source[n][j] * k)[:, None] * v[None, :]
            for i, ei in enumerate(ins):
                c = c + p.transition[n][i, j] * cells[ei]
            cells[eo] = c
    return cells, hidden


def _forward_st(dag: Dag, p: StmParams):
    js, jm = p.direct.shape[1:]
    jt = _transition_dim(p)
    cells = np.zeros((dag.edge_count, jt, p.key_dim, p.value_dim))
    hidden = np.zeros((dag.node_count, p.value_dim))
    for n in dag.order:
        ins, outs = dag.in_edges[n], dag.out_edges[n]
        q, k, v = p.query[n], p.key[n], p.value[n]
        if ins:
            acc = np.einsum("im,ikv->mkv", p.mark[n][0], cells[ins[0]])
            for i in range(1, len(ins)):
                acc = acc + np.einsum("im,ikv->mkv", p.mark[n][i], cells[ins[i]])
            h = q[0] @ acc[0]
            for m in range(1, jm):
                h = h + q[m] @ acc[m]
            hidden[n] = h
        d = None
        for s in range(js):
            for m in range(jm):
                term = p.direct[n][s, m] * (q[m] @ k[s]) * v
                d = term if d is None else d + term
        hidden[n] = hidden[n] + d
        for j, eo in enumerate(outs):
            c = np.einsum("si,sk->ik", p.source[n][j], k)[:, :, None] * v[None, None, :]
            for i, ei in enumerate(ins):
                c = c + np.einsum("ji,jkv->ikv", p.transition[n][i, j], cells[ei])
            cells[eo] = c
    return cells, hidden


def _transition_dim(p: StmParams) -> int:
    for s in p.source:
        if s.size:
            return s.shape[-1]
    for m in p.mark:
        if m.size:
            return m.shape[1]
    return 1


def _normalizer_params(p: StmParams) -> StmParams:
    return replace(p, value=np.ones((p.value.shape[0], 1)))


def forward_recurrent(dag: Dag, params: StmParams, normalize: bool = False):
    """Evaluate the network node by node in topological order.

    Returns ``(cells, hidden)``: ``cells`` is ``(E, K, V)`` (``(E, J_T, K, V)``
    in state-tracking mode) and ``hidden`` is ``(N, V)``. With ``normalize`` the
    output is divided by the same network run on unit values, floored at
    ``NORMALIZER_EPS`` in magnitude.
    """
    params.validate(dag)
    run = _forward_st if params.state_tracking else _forward_scalar
    cells, hidden = run(dag, params)
    if normalize:
        _, den = run(dag, _normalizer_params(params))
        hidden = hidden / np.maximum(np.abs(den), NORMALIZER_EPS)
    return cells, hidden


def forward_bidirectional(dag: Dag, forward: StmParams, backward: StmParams) -> np.ndarray:
    """Sum of the causal pass and a pass over the reversed DAG (``backward`` uses reversed degrees)."""
    _, h1 = forward_recurrent(dag, forward)
    _, h2 = forward_recurrent(reverse_dag(dag), backward)
    return h1 + h2


# -- gating matrices ------------------------------------------------------------------------


def _edge_positions(dag: Dag):
    pos_in = np.empty(dag.edge_count, dtype=int)
    pos_out = np.empty(dag.edge_count, dtype=int)
    for n in range(dag.node_count):
        for i, e in enumerate(dag.in_edges[n]):
            pos_in[e] = i
        for j, e in enumerate(dag.out_edges[n]):
            pos_out[e] = j
    return pos_in, pos_out


def gating_matrix_paths(dag: Dag, params: StmParams, cap: int = DEFAULT_PATH_CAP) -> np.ndarray:
    """Gating matrix by explicit enumeration of every edge path.

    ``g[n', n]`` sums ``source * prod(transitions) * mark`` over all paths from
    an outgoing edge of ``n'`` to an incoming edge of ``n``; the diagonal holds
    ``direct``. Exponential in general, meant for small graphs only.
    """
    params.validate(dag)
    p = lift_params(params)
    js, jm = p.direct.shape[1:]
    n_nodes = dag.node_count
    g = np.zeros((n_nodes, n_nodes, js, jm))
    g[np.arange(n_nodes), np.arange(n_nodes)] = p.direct
    lg = build_line_graph(dag)
    pos_in, pos_out = _edge_positions(dag)
    for e0 in range(dag.edge_count):
        src = dag.source(e0)
        s = p.source[src][pos_out[e0]]
        for path in iter_paths_from(lg, e0, cap=cap):
            prod = s
            for a, b in zip(path[:-1], path[1:]):
                node = dag.target(a)
                prod = prod @ p.transition[node][pos_in[a], pos_out[b]]
            last = path[-1]
            dst = dag.target(last)
            g[src, dst] += prod @ p.mark[dst][pos_in[last]]
    return g if params.state_tracking else g[:, :, 0, 0]


def gating_matrix_recurrent(dag: Dag, params: StmParams) -> np.ndarray:
    """Gating matrix by propagating a one-hot input from every node at once."""
    params.validate(dag)
    p = lift_params(params)
    js, jm = p.direct.shape[1:]
    jt = _transition_dim(p)
    n_nodes = dag.node_count
    cells = np.zeros((dag.edge_count, n_nodes, js, jt))
    g = np.zeros((n_nodes, n_nodes, js, jm))
    for n in dag.order:
        ins, outs = dag.in_edges[n], dag.out_edges[n]
        for i, e in enumerate(ins):
            g[:, n] += cells[e] @ p.mark[n][i]
        g[n, n] += p.direct[n]
        for j, eo in enumerate(outs):
            c = np.zeros((n_nodes, js, jt))
            c[n] = p.source[n][j]
            for i, ei in enumerate(ins):
                c += cells[ei] @ p.transition[n][i, j]
            cells[eo] = c
    return g if params.state_tracking else g[:, :, 0, 0]


@dataclass
class _Block:
    nodes: list[int]
    ins: list[int]
    outs: list[int]
    S: np.ndarray  # (nodes, outs, J_S, J_T)
    T: np.ndarray  # (ins, outs, J_T, J_T)
    M: np.ndarray  # (nodes, ins, J_T, J_M)
    G: np.ndarray  # (nodes, nodes, J_S, J_M)


def _leaf(dag: Dag, p: StmParams, n: int) -> _Block:
    return _Block(
        [n],
        list(dag.in_edges[n]),
        list(dag.out_edges[n]),
        p.source[n][None],
        p.transition[n],
        p.mark[n][None],
        p.direct[n][None, None],
    )


def _merge(a: _Block, c: _Block, dims: tuple[int, int, int]) -> _Block:
    """Combine ``a`` and ``c``, no edge running from ``c`` into ``a``.

    Paths crossing from ``a`` to ``c`` do so over exactly one shared boundary
    edge, so every cross term is a single contraction over those edges.
    """
    shared = [e for e in a.outs if e in set(c.ins)]
    sh = set(shared)
    ax = [a.outs.index(e) for e in shared]
    ak = [j for j, e in enumerate(a.outs) if e not in sh]
    cx = [c.ins.index(e) for e in shared]
    ck = [i for i, e in enumerate(c.ins) if e not in sh]
    na, nc = len(a.nodes), len(c.nodes)
    ia, ic_k = len(a.ins), len(ck)
    oa_k, oc = len(ak), len(c.outs)
    js, jt, jm = dims

    T_ax = a.T[:, ax]  # a.ins -> shared
    T_cx = c.T[cx]  # shared -> c.outs
    T = np.zeros((ia + ic_k, oa_k + oc, jt, jt))
    T[:ia, :oa_k] = a.T[:, ak]
    T[:ia, oa_k:] = np.einsum("axij,xbjk->abik", T_ax, T_cx)
    T[ia:, oa_k:] = c.T[ck]

    S = np.zeros((na + nc, oa_k + oc, js, jt))
    S[:na, :oa_k] = a.S[:, ak]
    S[:na, oa_k:] = np.einsum("nxsi,xbij->nbsj", a.S[:, ax], T_cx)
    S[na:, oa_k:] = c.S

    M = np.zeros((na + nc, ia + ic_k, jt, jm))
    M[:na, :ia] = a.M
    M[na:, :ia] = np.einsum("axij,nxjm->naim", T_ax, c.M[:, cx])
    M[na:, ia:] = c.M[:, ck]

    G = np.zeros((na + nc, na + nc, js, jm))
    G[:na, :na] = a.G
    G[na:, na:] = c.G
    G[:na, na:] = np.einsum("pxsi,nxim->pnsm", a.S[:, ax], c.M[:, cx])

    return _Block(
        a.nodes + c.nodes,
        a.ins + [c.ins[i] for i in ck],
        [a.outs[j] for j in ak] + c.outs,
        S,
        T,
        M,
        G,
    )


def gating_matrix_hierarchical(dag: Dag, decomp: Decomposition, params: StmParams) -> np.ndarray:
    """Gating matrix by bottom-up merging of generalized Source/Transition/Mark blocks.

    Level-0 blocks are the raw node gates. A parent block is formed by merging
    its children in their listed order, which sums every meta-path through the
    children.
    """
    if decomp.dag.node_count != dag.node_count or decomp.dag.edges != dag.edges:
        raise DecompositionMismatch("decomposition was built for a different graph")
    params.validate(dag)
    p = lift_params(params)
    js, jm = p.direct.shape[1:]
    dims = (js, _transition_dim(p), jm)
    level = [_leaf(dag, p, blk[0]) for blk in decomp.blocks[0]]
    for l in range(1, decomp.levels + 1):
        nxt = []
        for kids in decomp.children[l]:
            blk = level[kids[0]]
            for k in kids[1:]:
                blk = _merge(blk, level[k], dims)
            nxt.append(blk)
        level = nxt
    n = dag.node_count
    g = np.zeros((n, n, js, jm))
    if level:
        (root,) = level
        idx = np.array(root.nodes)
        g[np.ix_(idx, idx)] = root.G
    return g if params.state_tracking else g[:, :, 0, 0]


def apply_gating(g: np.ndarray, params: StmParams, normalize: bool = False) -> np.ndarray:
    """``H_n = sum_{n'} (q_n . k_{n'}) g[n', n] v_{n'}``, like masked linear attention."""
    q, k, v = params.query, params.key, params.value
    n = v.shape[0]
    if g.ndim == 2:
        if g.shape != (n, n) or q.shape != k.shape or q.shape[0] != n:
            raise ShapeError(f"gating {g.shape} does not fit {n} nodes")
        w = (q @ k.T) * g.T
    else:
        if g.shape[:2] != (n, n):
            raise ShapeError(f"gating {g.shape} does not fit {n} nodes")
        w = np.einsum("nmk,psk,pnsm->np", q, k, g)
    h = w @ v
    if normalize:
        den = w.sum(axis=1, keepdims=True)
        h = h / np.maximum(np.abs(den), NORMALIZER_EPS)
    return h


# -- backward -------------------------------------------------------------------------------


def backward_recurrent(dag: Dag, params: StmParams, grad_hidden: np.ndarray, return_cells: bool = False):
    """Vector-Jacobian product of :func:`forward_recurrent` (scalar mode).

    Walks the nodes in reverse topological order, pushing cell cotangents
    through transposed transitions. Returns an :class:`StmParams`-shaped
    gradient; with ``return_cells`` also the ``(E, K, V)`` cell cotangents.
    """
    if params.state_tracking:
        raise NotImplementedError("backward is implemented for scalar gates")
    params.validate(dag)
    grad_hidden = np.asarray(grad_hidden, dtype=float)
    if grad_hidden.shape != params.value.shape:
        raise ShapeError(f"grad_hidden must be {params.value.shape}, got {grad_hidden.shape}")
    p = params
    cells, _ = _forward_scalar(dag, p)
    dcells = np.zeros_like(cells)
    gs = [np.zeros_like(a) for a in p.source]
    gt = [np.zeros_like(a) for a in p.transition]
    gm = [np.zeros_like(a) for a in p.mark]
    gd = np.zeros_like(p.direct)
    gq = np.zeros_like(p.query)
    gk = np.zeros_like(p.key)
    gv = np.zeros_like(p.value)
    for n in reversed(dag.order):
        ins, outs = dag.in_edges[n], dag.out_edges[n]
        q, k, v, dh = p.query[n], p.key[n], p.value[n], grad_hidden[n]
        qk = q @ k
        vdh = v @ dh
        gd[n] = qk * vdh
        gq[n] += p.direct[n] * vdh * k
        gk[n] += p.direct[n] * vdh * q
        gv[n] += p.direct[n] * qk * dh
        # out-edge cotangents are final: their readers come later in topological order
        for j, eo in enumerate(outs):
            dc = dcells[eo]
            gs[n][j] = k @ dc @ v
            gk[n] += p.source[n][j] * (dc @ v)
            gv[n] += p.source[n][j] * (k @ dc)
        for i, ei in enumerate(ins):
            c = cells[ei]
            cq = q @ c
            gm[n][i] = cq @ dh
            gq[n] += p.mark[n][i] * (c @ dh)
            dc = p.mark[n][i] * np.outer(q, dh)
            for j, eo in enumerate(outs):
                gt[n][i, j] = np.sum(dcells[eo] * c)
                dc = dc + p.transition[n][i, j] * dcells[eo]
            dcells[ei] = dc
    grads = StmParams(gs, gt, gm, gd, gq, gk, gv)
    return (grads, dcells) if return_cells else grads
