"""Compare the compiled and numpy grid kernels.

    python3 benchmarks/bench_kernels.py --sides 8,16,32,64 --payload 16

Prints CSV: side,backend,direction,wall_ns,speedup. Outputs of the two
backends are checked before timing: forward results must be identical,
backward reductions may differ by summation order (1e-12 relative).
"""
import argparse
import csv
import sys
import time

import numpy as np

from plstm import kernels


def best_of(fn, reps):
    best = None
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        dt = time.perf_counter_ns() - t0
        best = dt if best is None else min(best, dt)
    return best


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sides", default="8,16,32,64")
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--payload", type=int, default=16)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the numpy kernel is available", file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["side", "backend", "direction", "wall_ns", "speedup"])
    for side in (int(s) for s in args.sides.split(",")):
        shape = (args.batch, side, side)
        gates = [rng.uniform(-1, 1, shape) for _ in range(8)]
        x = rng.standard_normal(shape + (args.payload,))
        gout = rng.standard_normal(shape + (args.payload,))
        fwd = {b: kernels.grid_forward(*gates, x, backend=b) for b in backends}
        bwd = {b: kernels.grid_backward(*gates, x, fwd[b][1], fwd[b][2], gout, backend=b) for b in backends}
        for b in backends:
            same = all(np.array_equal(r, g) for r, g in zip(fwd["python"], fwd[b]))
            close = all(np.allclose(r, g, rtol=1e-12, atol=1e-12 * np.abs(r).max()) for r, g in zip(bwd["python"], bwd[b]))
            if not (same and close):
                raise SystemExit(f"backend {b} disagrees with numpy at side {side}")
        times = {}
        for b in backends:
            cr, cd = fwd[b][1], fwd[b][2]
            times[(b, "forward")] = best_of(lambda: kernels.grid_forward(*gates, x, backend=b), args.reps)
            times[(b, "backward")] = best_of(lambda: kernels.grid_backward(*gates, x, cr, cd, gout, backend=b), args.reps)
        for (b, direction), ns in times.items():
            w.writerow([side, b, direction, ns, f"{times[('python', direction)] / ns:.1f}"])


if __name__ == "__main__":
    main()
