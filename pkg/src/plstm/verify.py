"""Oracle-equivalence and invariant suites behind ``plstm verify``.

Every case compares a computed quantity against an independent reference and
records the largest absolute error, the error relative to the reference's
magnitude, and whether it is within tolerance. Errors are judged after
scaling by ``max(1, max|reference|)``.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dag import build_line_graph, random_dag
from .decompose import decompose
from .errors import UnknownSuite
from .grid import (
    DirectionCombo,
    GridGates,
    chain_to_stm,
    chunkwise,
    gating_matrix_grid,
    grid_level0,
    grid_to_stm,
    multidirectional_2d,
    scan_1d,
    scan_2d,
    seq_level0,
)
from .paths import is_multitree, nilpotency_index
from .stm import (
    apply_gating,
    backward_recurrent,
    forward_recurrent,
    gating_matrix_hierarchical,
    gating_matrix_paths,
    gating_matrix_recurrent,
    random_params,
)

SUITES = ("dag", "1d", "2d", "chunkwise", "gradients", "stability", "dmode")

DEFAULT_SIZES = {
    "dag": [12],
    "1d": [8, 64, 256],
    "2d": [2, 4, 8, 16],
    "chunkwise": [8, 64, 4, 8],
    "gradients": [8],
    "stability": [16],
    "dmode": [2, 4, 8],
}


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    abs_err: float
    rel_err: float
    tol: float
    raw_err: float | None = None  # unscaled difference, when it differs from abs_err

    @property
    def passed(self) -> bool:
        return math.isfinite(self.abs_err) and self.abs_err <= self.tol


@dataclass
class RunReport:
    suite: str
    cases: list[CaseResult] = field(default_factory=list)
    wall_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    @property
    def max_abs_err(self) -> float:
        return max((c.abs_err for c in self.cases), default=0.0)

    @property
    def max_rel_err(self) -> float:
        return max((c.rel_err for c in self.cases), default=0.0)

    def csv_rows(self) -> list[list]:
        return [[c.case_id, repr(c.abs_err), repr(c.rel_err), repr(c.tol), int(c.passed)] for c in self.cases]


def compare(case_id: str, got, ref, tol: float) -> CaseResult:
    got = np.asarray(got, dtype=float)
    ref = np.asarray(ref, dtype=float)
    diff = float(np.max(np.abs(got - ref))) if ref.size else 0.0
    mag = float(np.max(np.abs(ref))) if ref.size else 0.0
    return CaseResult(case_id, diff / max(1.0, mag), diff / mag if mag > 0 else diff, tol, diff)


def bound_case(case_id: str, value: float, bound: float) -> CaseResult:
    """``value <= bound`` expressed as an error: the excess over the bound, relative to it."""
    excess = max(0.0, value - bound)
    return CaseResult(case_id, excess / max(1.0, bound), excess / bound if bound else excess, 0.0, excess)


def _rng(seed: int, *tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *tag]))


# -- suites ---------------------------------------------------------------------------------------


def _dag_case(seed: int, n: int, i: int) -> list[CaseResult]:
    rng = _rng(seed, n, i)
    dag = random_dag(rng, int(rng.integers(1, n + 1)))
    params = random_params(dag, rng)
    _, h = forward_recurrent(dag, params)
    gp = gating_matrix_paths(dag, params)
    gh = gating_matrix_hierarchical(dag, decompose(dag), params)
    gr = gating_matrix_recurrent(dag, params)
    cid = f"dag/n{n}/{i:02d}"
    return [
        compare(cid + "/paths-vs-recurrent", apply_gating(gp, params), h, 1e-12),
        compare(cid + "/hierarchical-vs-paths", gh, gp, 1e-12),
        compare(cid + "/onehot-vs-paths", gr, gp, 1e-12),
    ]


def suite_dag(seed: int, sizes) -> list:
    return [(lambda n=n, i=i: _dag_case(seed, n, i)) for n in sizes for i in range(50)]


def _chain_gates(rng, n):
    s, m, d = rng.standard_normal((3, n))
    t = rng.uniform(-1.0, 1.0, n)
    q, k = rng.standard_normal((2, n, 3))
    v = rng.standard_normal((n, 2))
    return (s, t, m, d), (q, k, v)


def _1d_case(seed: int, n: int) -> list[CaseResult]:
    rng = _rng(seed, n)
    gates, qkv = _chain_gates(rng, n)
    dag, params = chain_to_stm(*gates, *qkv)
    level0 = seq_level0(*gates)
    levels = int(math.log2(level0.T.shape[0]))
    stats = {}
    g = scan_1d(level0, levels, stats)
    _, h = forward_recurrent(dag, params)
    return [
        compare(f"1d/n{n}/gating", g, gating_matrix_recurrent(dag, params), 1e-12),
        compare(f"1d/n{n}/hidden", apply_gating(g, params), h, 1e-12),
        CaseResult(f"1d/n{n}/merge-levels", abs(stats.get("merge_levels", 0) - levels), 0.0, 0.0),
    ]


def suite_1d(seed: int, sizes) -> list:
    return [(lambda n=n: _1d_case(seed, n)) for n in sizes]


def _grid_problem(seed: int, n: int, scale: float = 0.7):
    rng = _rng(seed, n, 2)
    gates = GridGates.random(rng, n, n, scale)
    q, k = rng.standard_normal((2, n * n, 3))
    v = rng.standard_normal((n * n, 2))
    return rng, gates, q, k, v


def _2d_case(seed: int, n: int) -> list[CaseResult]:
    rng, gates, q, k, v = _grid_problem(seed, n)
    level0 = grid_level0(gates)
    levels = int(math.log2(level0.blocks[0]))
    stats = {}
    g = scan_2d(level0, levels, stats)
    dag, params = grid_to_stm(gates, q, k, v)
    ref = gating_matrix_recurrent(dag, params)
    out = [
        compare(f"2d/{n}x{n}/scan-vs-recurrent", g, ref, 1e-10),
        compare(f"2d/{n}x{n}/kernel-vs-recurrent", gating_matrix_grid(gates), ref, 1e-10),
        CaseResult(f"2d/{n}x{n}/merge-levels", abs(stats.get("merge_levels", 0) - levels), 0.0, 0.0),
    ]
    covers = {c: GridGates.random(rng, n, n, 0.7) for c in DirectionCombo}
    direct = rng.standard_normal((n, n))
    h, total = multidirectional_2d(covers, direct, q, k, v, return_gating=True)
    # four independent passes plus the direct term
    passes = np.zeros_like(h)
    gsum = np.zeros_like(total)
    for combo, gg in covers.items():
        one, gm = multidirectional_2d({combo: gg}, np.zeros((n, n)), q, k, v, return_gating=True)
        passes += one
        gsum += gm
    diag = np.diag(direct.T.reshape(-1))
    passes += apply_gating(diag, params)
    gsum += diag
    out.append(CaseResult(f"2d/{n}x{n}/multidir-gating-sum", float(np.max(np.abs(total - gsum))), 0.0, 0.0))
    out.append(compare(f"2d/{n}x{n}/multidir-hidden", h, passes, 1e-12))
    return out


def suite_2d(seed: int, sizes) -> list:
    return [(lambda n=n: _2d_case(seed, n)) for n in sizes]


def _chunk_case(seed: int, n: int, dim: int) -> list[CaseResult]:
    out = []
    if dim == 1:
        rng = _rng(seed, n, 1)
        gates, (q, k, v) = _chain_gates(rng, n)
        dag, params = chain_to_stm(*gates, q, k, v)
        level0 = seq_level0(*gates)
        levels = int(math.log2(level0.T.shape[0]))
        tag = f"chunkwise/1d/n{n}"
    else:
        rng, gg, q, k, v = _grid_problem(seed, n)
        dag, params = grid_to_stm(gg, q, k, v)
        level0 = grid_level0(gg)
        levels = int(math.log2(level0.blocks[0]))
        tag = f"chunkwise/2d/{n}x{n}"
    _, h = forward_recurrent(dag, params)
    for c in range(levels + 1):
        out.append(compare(f"{tag}/level{c}", chunkwise(level0, c, q, k, v), h, 1e-10 if dim == 2 else 1e-12))
    return out


def suite_chunkwise(seed: int, sizes) -> list:
    # sizes above 16 are chain lengths, the rest grid sides; both forms run for ambiguous sizes
    cases = []
    seen = set()
    for n in sizes:
        dims = (1,) if n > 16 else (1, 2)
        for d in dims:
            if (n, d) not in seen:
                seen.add((n, d))
                cases.append(lambda n=n, d=d: _chunk_case(seed, n, d))
    return cases


def finite_difference(fn, x: np.ndarray, idx, h: float) -> float:
    old = x[idx]
    x[idx] = old + h
    up = fn()
    x[idx] = old - h
    down = fn()
    x[idx] = old
    return (up - down) / (2.0 * h)


def rel_error(a: float, b: float, floor: float = 1e-8) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def _grad_stm_case(seed: int, n: int, coords: int = 20) -> list[CaseResult]:
    rng = _rng(seed, n, 3)
    dag = random_dag(rng, n, 0.4)
    params = random_params(dag, rng, gate_scale=0.8)
    dh = rng.standard_normal(params.value.shape)
    grads = backward_recurrent(dag, params, dh)

    def loss():
        return float(np.sum(forward_recurrent(dag, params)[1] * dh))

    fields_ = [
        ("source", params.source, grads.source),
        ("transition", params.transition, grads.transition),
        ("mark", params.mark, grads.mark),
        ("direct", [params.direct], [grads.direct]),
        ("query", [params.query], [grads.query]),
        ("key", [params.key], [grads.key]),
        ("value", [params.value], [grads.value]),
    ]
    slots = [(name, a, g) for name, arrs, gs in fields_ for a, g in zip(arrs, gs) if a.size]
    out = []
    for i in range(coords):
        name, arr, g = slots[int(rng.integers(len(slots)))]
        idx = tuple(int(rng.integers(s)) for s in arr.shape)
        fd = finite_difference(loss, arr, idx, 1e-6)
        err = rel_error(fd, float(g[idx]))
        out.append(CaseResult(f"gradients/stm/n{n}/{i:02d}-{name}", err, err, 1e-6))
    return out


def _grad_model_case(seed: int, coords: int = 20) -> list[CaseResult]:
    from .vision import ModelConfig, init_params, model_backward, model_loss

    rng = _rng(seed, 4)
    cfg = ModelConfig()
    params = init_params(cfg, seed)
    images = rng.random((4, cfg.image_size, cfg.image_size))
    labels = np.array([0.0, 1.0, 1.0, 0.0])
    _, grads = model_backward(cfg, params, images, labels)
    keys = sorted(params)
    out = []
    for i in range(coords):
        key = keys[int(rng.integers(len(keys)))]
        arr = params[key]
        idx = tuple(int(rng.integers(s)) for s in arr.shape)
        fd = finite_difference(lambda: model_loss(cfg, params, images, labels), arr, idx, 1e-4)
        err = rel_error(fd, float(grads[key][idx]))
        out.append(CaseResult(f"gradients/model/{i:02d}-{key}", err, err, 1e-4))
    return out


def suite_gradients(seed: int, sizes) -> list:
    return [(lambda n=n: _grad_stm_case(seed, n)) for n in sizes] + [lambda: _grad_model_case(seed)]


def _stability_case(seed: int, n: int) -> list[CaseResult]:
    from .stability import (
        StTransition,
        anti_diagonal_mass,
        critical_grid_gates,
        decay_profile,
        leading_direction,
        spectral_norm,
        st_transition_build,
    )

    rng = _rng(seed, n, 5)
    gates = critical_grid_gates(rng.random((n, n)), source_split=rng.random((n, n)))
    ones = np.ones((n * n, 1))
    dag, params = grid_to_stm(gates, ones, ones, ones)
    cells, _ = forward_recurrent(dag, params)
    p = nilpotency_index(build_line_graph(dag))
    source_mass = sum(float(np.abs(s).sum()) for s in params.source)
    out = [bound_case(f"stability/{n}x{n}/cell-l1", float(np.abs(cells).sum()), (p + 1) * source_mass)]
    dh = rng.uniform(-1.0, 1.0, (n * n, 1))
    _, dcells = backward_recurrent(dag, params, dh, return_cells=True)
    out.append(bound_case(f"stability/{n}x{n}/cotangent-linf", float(np.abs(dcells).max()), (p + 1) * float(np.abs(dh).max())))
    rows = decay_profile(0.5, 200)
    out.append(CaseResult("stability/decay/ratio50", abs(rows[49].ratio - 1.0), abs(rows[49].ratio - 1.0), 0.05))
    out.append(CaseResult("stability/decay/ratio200", abs(rows[199].ratio - 1.0), abs(rows[199].ratio - 1.0), 0.01))
    mass = max(abs(anti_diagonal_mass(a, d) - 1.0) for a in (0.25, 0.5, 0.75) for d in range(1, 65))
    out.append(CaseResult("stability/decay/anti-diagonal-mass", mass, mass, 1e-12))
    for a in (0.25, 0.5, 0.75):
        dev = abs(leading_direction(a, 400) - a)
        out.append(CaseResult(f"stability/decay/leading-direction-{a}", max(0.0, dev - 1 / 400), dev, 0.0))
    worst = 0.0
    for param in ("householder", "skew"):
        for _ in range(50):
            m = st_transition_build(StTransition.random(rng, int(rng.integers(1, 6)), param))
            worst = max(worst, spectral_norm(m))
    out.append(bound_case("stability/st-transition-norm", worst, 1.0 + 1e-10))
    return out


def suite_stability(seed: int, sizes) -> list:
    return [(lambda n=n: _stability_case(seed, n)) for n in sizes]


def _dmode_case(seed: int, n: int) -> list[CaseResult]:
    from .stability import dmode_line_graph, dmode_reach_gates

    out = [CaseResult(f"dmode/{n}x{n}/multitree", 0.0 if is_multitree(dmode_line_graph(n, n)) else 1.0, 0.0, 0.0)]
    g = gating_matrix_grid(dmode_reach_gates(n, n))
    reach = g[0, 1:]
    out.append(compare(f"dmode/{n}x{n}/reach", reach, np.ones_like(reach), 1e-12))
    return out


def suite_dmode(seed: int, sizes) -> list:
    return [(lambda n=n: _dmode_case(seed, n)) for n in sizes]


_SUITES = {
    "dag": suite_dag,
    "1d": suite_1d,
    "2d": suite_2d,
    "chunkwise": suite_chunkwise,
    "gradients": suite_gradients,
    "stability": suite_stability,
    "dmode": suite_dmode,
}


def worker_count() -> int:
    try:
        cap = int(os.environ.get("PLSTM_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, cap)


def run_suite(name: str, seed: int = 0, sizes=None) -> RunReport:
    if name not in _SUITES:
        raise UnknownSuite(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    sizes = list(sizes) if sizes else DEFAULT_SIZES[name]
    start = time.perf_counter()
    jobs = _SUITES[name](seed, sizes)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = [r for batch in pool.map(lambda job: job(), jobs) for r in batch]
    results.sort(key=lambda c: c.case_id)
    return RunReport(name, results, time.perf_counter() - start)
