"""Stable gate constructions: P-mode column limiting, D-mode masking, decay analysis,
and norm-limited state-tracking transitions.

P-mode limits, for every incoming edge, the L1 mass it hands to the outgoing
edges (one row of a node's ``transition[n]`` array). On the 2D grid the
critical form ``gamma * [[a, a], [1 - a, 1 - a]]`` (rows: right-out, down-out;
columns: right-in, down-in) sends fraction ``a`` of every cell rightward.

D-mode zeroes one of the two turning transitions everywhere so that the line
graph becomes a multitree. With ``t_rd`` (horizontal-in, vertical-out) zeroed
the only path from ``(0, 0)`` to ``(x, y)`` with ``x, y > 0`` leaves downward,
travels ``y`` steps, turns right once and travels ``x`` steps. Setting every
remaining transition, source and mark to 1 (each within the D-mode limit of
absolute value one) makes that unique path product exactly 1, which is the
reach assignment returned by :func:`dmode_reach_gates`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dag import LineGraph, build_line_graph, grid_dag, grid_edge_ids
from .errors import DegenerateColumn, RangeError
from .grid import GridGates

__all__ = [
    "pmode_normalize",
    "pmode_normalize_grid",
    "critical_transition_2d",
    "critical_grid_gates",
    "DModeMask",
    "dmode_apply",
    "dmode_line_graph",
    "dmode_reach_gates",
    "DecayRow",
    "decay_profile",
    "t_full_exact",
    "anti_diagonal_mass",
    "leading_direction",
    "StTransition",
    "householder_product",
    "skew_exponential",
    "st_transition_build",
    "spectral_norm",
    "HeadInit",
    "directional_head_init",
]


# -- P-mode ---------------------------------------------------------------------------------------


def _limit_rows(t: np.ndarray, critical: bool) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.size == 0:
        return t.copy()
    mass = np.sum(np.abs(t), axis=-1, keepdims=True)
    if critical:
        if np.any(mass == 0):
            raise DegenerateColumn("an incoming edge has all-zero transitions; critical scaling is undefined")
        return t / mass
    return t / np.maximum(mass, 1.0)


def pmode_normalize(transitions, critical: bool = False):
    """Limit each incoming edge's outgoing L1 mass to at most one (or exactly one if ``critical``).

    Accepts one ``(in, out)`` array or a list of them (as in ``StmParams.transition``).
    """
    if isinstance(transitions, (list, tuple)):
        return [_limit_rows(t, critical) for t in transitions]
    return _limit_rows(transitions, critical)


def pmode_normalize_grid(gates: GridGates, critical: bool = False) -> GridGates:
    """Grid version: the horizontal-in pair ``(t_rr, t_rd)`` and vertical-in pair ``(t_dr, t_dd)``."""
    h = _limit_rows(np.stack([gates.t_rr, gates.t_rd], axis=-1), critical)
    v = _limit_rows(np.stack([gates.t_dr, gates.t_dd], axis=-1), critical)
    return GridGates(gates.s_r, gates.s_d, h[..., 0], v[..., 0], h[..., 1], v[..., 1], gates.m_r, gates.m_d, gates.direct)


def _check_unit(name, value):
    a = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(a < 0) or np.any(a > 1):
        raise RangeError(f"{name} must lie in [0, 1]")
    return a


def critical_transition_2d(alpha: float, gamma: float = 1.0, beta: float | None = None) -> np.ndarray:
    """``gamma * [[alpha, beta], [1 - alpha, 1 - beta]]``; rows are right/down out, columns right/down in.

    ``beta`` defaults to ``alpha``, the only choice with a single propagation
    angle; other values still give columns summing to ``gamma``.
    """
    a = float(_check_unit("alpha", alpha))
    b = a if beta is None else float(_check_unit("beta", beta))
    g = float(_check_unit("gamma", gamma))
    return g * np.array([[a, b], [1.0 - a, 1.0 - b]])


def critical_grid_gates(alpha, gamma=1.0, source_split=None, mark=1.0, direct=0.0) -> GridGates:
    """Grid gates with the critical transition at every node.

    ``alpha``/``gamma`` broadcast to the grid shape of ``alpha``. Sources are
    ``(split, 1 - split)`` with ``split`` defaulting to ``alpha``.
    """
    a = _check_unit("alpha", alpha)
    g = np.broadcast_to(_check_unit("gamma", gamma), a.shape)
    split = a if source_split is None else np.broadcast_to(_check_unit("source_split", source_split), a.shape)
    full = lambda v: np.broadcast_to(np.asarray(v, dtype=float), a.shape).copy()
    return GridGates(
        split.copy(), 1.0 - split,
        g * a, g * a, g * (1.0 - a), g * (1.0 - a),
        full(mark), full(mark), full(direct),
    )


# -- D-mode ---------------------------------------------------------------------------------------


class DModeMask(enum.Enum):
    """Which turning transition family is zeroed."""

    ZERO_RD = "t_rd"  # horizontal-in, vertical-out
    ZERO_DR = "t_dr"  # vertical-in, horizontal-out


def dmode_apply(gates: GridGates, mask: DModeMask = DModeMask.ZERO_RD) -> GridGates:
    out = gates.map(np.copy)
    setattr(out, mask.value, np.zeros_like(gates.t_rd))
    return out


def dmode_line_graph(nx: int, ny: int, mask: DModeMask | None = DModeMask.ZERO_RD) -> LineGraph:
    """Line graph of the down-right grid with the masked turns removed (``mask=None`` keeps all)."""
    dag = grid_dag(nx, ny)
    right, down = grid_edge_ids(nx, ny)
    horizontal = set(right.values())
    vertical = set(down.values())
    if mask is None:
        return build_line_graph(dag)
    drop_in, drop_out = (horizontal, vertical) if mask is DModeMask.ZERO_RD else (vertical, horizontal)
    return build_line_graph(dag, keep=lambda n, ei, eo: not (ei in drop_in and eo in drop_out))


def dmode_reach_gates(nx: int, ny: int) -> GridGates:
    """The critical D-mode assignment under which ``(0, 0)`` reaches its whole quadrant with weight 1."""
    gates = GridGates.filled(nx, ny, 1.0)
    return dmode_apply(gates, DModeMask.ZERO_RD)


# -- decay of critical P-mode propagation --------------------------------------------------------


def _check_open(alpha: float) -> float:
    a = float(alpha)
    if not 0.0 < a < 1.0:
        raise RangeError("alpha must lie strictly between 0 and 1")
    return a


def _log_t_full(alpha: float, delta: int, k: int) -> float:
    return math.log(math.comb(delta, k)) + k * math.log(alpha) + (delta - k) * math.log1p(-alpha)


def t_full_exact(alpha: float, delta: int, k: int) -> float:
    """Summed path weight from a node to the one ``k`` right and ``delta - k`` down, at ``gamma = 1``."""
    a = _check_open(alpha)
    if not 0 <= k <= delta:
        return 0.0
    return math.exp(_log_t_full(a, delta, k))


@dataclass(frozen=True)
class DecayRow:
    delta: int
    k: int
    t_full: float
    k_floor: int
    t_full_floor: float
    k_ceil: int
    t_full_ceil: float
    asymptote: float

    @property
    def ratio(self) -> float:
        return self.t_full / self.asymptote


def decay_profile(alpha: float, delta_max: int) -> list[DecayRow]:
    """Exact weight along the leading direction for ``delta = 1..delta_max`` and its power-law asymptote.

    The horizontal offset is ``alpha * delta`` rounded half up; the two
    bracketing integers are reported as well.
    """
    a = _check_open(alpha)
    if delta_max < 1:
        raise RangeError("delta_max must be at least 1")
    rows = []
    for d in range(1, int(delta_max) + 1):
        x = a * d
        k = int(math.floor(x + 0.5))
        lo, hi = int(math.floor(x)), int(math.ceil(x))
        rows.append(
            DecayRow(
                d, k, math.exp(_log_t_full(a, d, k)),
                lo, math.exp(_log_t_full(a, d, lo)),
                hi, math.exp(_log_t_full(a, d, hi)),
                1.0 / math.sqrt(2.0 * math.pi * a * (1.0 - a) * d),
            )
        )
    return rows


def anti_diagonal_mass(alpha: float, delta: int) -> float:
    """Sum of the exact weights over every node at distance ``delta``; one by the binomial theorem."""
    a = _check_open(alpha)
    return math.fsum(math.exp(_log_t_full(a, delta, k)) for k in range(delta + 1))


def leading_direction(alpha: float, delta: int = 400) -> float:
    """``beta = k / delta`` maximizing the exact weight at distance ``delta``."""
    a = _check_open(alpha)
    best = max(range(delta + 1), key=lambda k: _log_t_full(a, delta, k))
    return best / delta


# -- state-tracking transitions ------------------------------------------------------------------


def householder_product(vectors) -> np.ndarray:
    """Product of reflections ``I - 2 v v^T / |v|^2`` for each row ``v`` of ``vectors``."""
    vs = np.atleast_2d(np.asarray(vectors, dtype=float))
    j = vs.shape[1]
    q = np.eye(j)
    for v in vs:
        nrm = v @ v
        if nrm == 0:
            continue
        q = q - 2.0 * np.outer(q @ v, v) / nrm
    return q


def skew_exponential(params, dim: int) -> np.ndarray:
    """``expm(A)`` for the skew-symmetric ``A`` whose strict upper triangle is ``params``."""
    a = np.zeros((dim, dim))
    a[np.triu_indices(dim, 1)] = np.asarray(params, dtype=float)
    a = a - a.T
    # i*A is Hermitian, so expm(A) = V diag(exp(-i w)) V^H with (w, V) = eigh(i*A)
    w, v = np.linalg.eigh(1j * a)
    return ((v * np.exp(-1j * w)) @ v.conj().T).real


@dataclass
class StTransition:
    """``U diag(sigma) V^T`` with orthogonal factors.

    ``param`` is ``"householder"`` (factor parameters are ``(r, J)`` reflection
    vectors) or ``"skew"`` (``J (J - 1) / 2`` upper-triangle entries).
    ``sigma_mode`` is ``"tanh"`` (``sigma = tanh(raw)``) or ``"sign"`` (``sigma = sign(raw)``, zero mapped to 1).
    """

    dim: int
    u_params: np.ndarray
    v_params: np.ndarray
    sigma_raw: np.ndarray
    param: str = "householder"
    sigma_mode: str = "tanh"

    @classmethod
    def random(cls, rng, dim: int, param: str = "householder", reflections: int = 2, sigma_mode: str = "tanh"):
        if param == "householder":
            shape = (reflections, dim)
        else:
            shape = (dim * (dim - 1) // 2,)
        return cls(dim, rng.standard_normal(shape), rng.standard_normal(shape), rng.standard_normal(dim), param, sigma_mode)


def _factor(params, dim, param):
    if param == "householder":
        return householder_product(params) if np.size(params) else np.eye(dim)
    if param == "skew":
        return skew_exponential(params, dim)
    raise ValueError(f"unknown factor parameterization {param!r}")


def st_transition_build(spec: StTransition, tol: float = 1e-10) -> np.ndarray:
    u = _factor(spec.u_params, spec.dim, spec.param)
    v = _factor(spec.v_params, spec.dim, spec.param)
    eye = np.eye(spec.dim)
    for f in (u, v):
        if np.max(np.abs(f.T @ f - eye)) > tol:
            raise FloatingPointError("orthogonal factor lost orthogonality")
    raw = np.asarray(spec.sigma_raw, dtype=float)
    if spec.sigma_mode == "tanh":
        sigma = np.tanh(raw)
    elif spec.sigma_mode == "sign":
        sigma = np.where(raw < 0, -1.0, 1.0)
    else:
        raise ValueError(f"unknown sigma mode {spec.sigma_mode!r}")
    return (u * sigma) @ v.T


def spectral_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m, dtype=float), 2))


# -- head initialization --------------------------------------------------------------------------


@dataclass(frozen=True)
class HeadInit:
    bias: float
    alpha: float
    gamma: float


def directional_head_init(num_heads: int, mode: str = "p", decay: float = 1.0) -> list[HeadInit]:
    """Orientation biases spread over ``[-2, 2]`` across heads, mapped to ``alpha`` by a sigmoid.

    P-mode heads start critical (``gamma = 1``); D-mode heads use ``decay``.
    """
    if num_heads < 1:
        raise RangeError("num_heads must be at least 1")
    biases = np.linspace(-2.0, 2.0, num_heads) if num_heads > 1 else np.zeros(1)
    gamma = 1.0 if mode == "p" else float(decay)
    return [HeadInit(float(b), float(1.0 / (1.0 + math.exp(-b))), gamma) for b in biases]
