"""``plstm`` command line: verification suites, benchmarks, datasets, decay tables, toy training.

Exit codes: 0 pass, 1 tolerance failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .errors import PlstmError, SizeError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return values


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline=""), True


def _write_csv(path, header, rows) -> None:
    fh, close = _open_out(path)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if close:
            fh.close()


# -- commands -------------------------------------------------------------------------------------


def cmd_verify(args) -> int:
    from .verify import run_suite

    report = run_suite(args.suite, seed=args.seed, sizes=args.sizes)
    if args.out:
        _write_csv(args.out, ["case", "abs_err", "rel_err", "tol", "passed"], report.csv_rows())
    for case in report.cases:
        if not case.passed:
            print(f"FAIL {case.case_id} err={case.abs_err:.3e} tol={case.tol:.1e}", file=sys.stderr)
    status = "pass" if report.passed else "fail"
    print(
        f"suite={report.suite} cases={len(report.cases)} max_abs_err={report.max_abs_err:.3e} "
        f"max_rel_err={report.max_rel_err:.3e} wall_s={report.wall_s:.2f} {status}"
    )
    return EXIT_OK if report.passed else EXIT_FAIL


def _bench_problem(n: int, seed: int):
    from .grid import chain_to_stm, seq_level0

    rng = np.random.default_rng(np.random.SeedSequence([seed, n]))
    s, m, d = rng.standard_normal((3, n))
    t = rng.uniform(-1.0, 1.0, n)
    q, k = rng.standard_normal((2, n, 8))
    v = rng.standard_normal((n, 8))
    dag, params = chain_to_stm(s, t, m, d, q, k, v)
    return dag, params, seq_level0(s, t, m, d), (q, k, v)


def cmd_bench(args) -> int:
    from .grid import chunkwise, scan_1d
    from .stm import apply_gating, forward_recurrent

    forms = [args.form] if args.form else ["recurrent", "parallel", "chunkwise"]
    rows = []
    for n in args.sizes:
        if n & (n - 1):
            raise SizeError(f"size {n} is not a power of two")
        levels = int(math.log2(n))
        chunk = min(args.chunk_level if args.chunk_level is not None else levels // 2, levels)
        dag, params, level0, (q, k, v) = _bench_problem(n, args.seed)
        runners = {
            "recurrent": (lambda: forward_recurrent(dag, params)[1], 0),
            "parallel": (lambda: apply_gating(scan_1d(level0, levels), params), levels),
            "chunkwise": (lambda: chunkwise(level0, chunk, q, k, v), chunk),
        }
        ref = runners["recurrent"][0]()
        for form in forms:
            fn, merge_levels = runners[form]
            got = fn()
            err = float(np.max(np.abs(got - ref))) / max(1.0, float(np.max(np.abs(ref))))
            if err > 1e-10:
                print(f"size {n} form {form} disagrees with the recurrent form: {err:.3e}", file=sys.stderr)
                return EXIT_FAIL
            best = None
            for _ in range(args.reps):
                t0 = time.perf_counter_ns()
                fn()
                dt = time.perf_counter_ns() - t0
                best = dt if best is None else min(best, dt)
            rows.append([n, form, best, merge_levels])
    _write_csv(args.out, ["size", "form", "wall_ns", "merge_levels"], rows)
    return EXIT_OK


def cmd_gen_arrows(args) -> int:
    from .arrows import DatasetSpec, generate_dataset

    out = generate_dataset(DatasetSpec(args.count, args.resolution, args.seed, args.out))
    print(f"wrote {args.count} images to {out}")
    return EXIT_OK


def cmd_decay(args) -> int:
    from .stability import decay_profile

    rows = [[r.delta, repr(r.t_full), repr(r.asymptote), repr(r.ratio)] for r in decay_profile(args.alpha, args.delta_max)]
    _write_csv(args.out, ["delta", "t_full_exact", "asymptote", "ratio"], rows)
    return EXIT_OK


def cmd_train_toy(args) -> int:
    from .arrows import DatasetSpec, generate_dataset, load_dataset
    from .vision import LayerConfig, ModelConfig, save_checkpoint, train_toy

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = Path(args.data) if args.data else out / "data"
    if not args.data and not (data / "labels.csv").is_file():
        generate_dataset(DatasetSpec(args.count, args.resolution, args.seed, str(data)))
    images, labels = load_dataset(data)
    cfg = ModelConfig(layer=LayerConfig(mode=args.mode))
    result = train_toy(images, labels, cfg, steps=args.steps, seed=args.seed, lr=args.lr, optimizer=args.optimizer)
    (out / "loss.csv").write_text(result.loss_csv())
    save_checkpoint(out / "checkpoint", cfg, result.params)
    first, last = result.losses[0], result.losses[-1]
    report = {
        "steps": args.steps,
        "initial_loss": first,
        "final_loss": last,
        "relative_drop": (first - last) / first if first else 0.0,
        "accuracy": result.accuracy,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"loss {first:.4f} -> {last:.4f}, train accuracy {result.accuracy:.3f}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .verify import SUITES

    p = argparse.ArgumentParser(prog="plstm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run an oracle-equivalence suite")
    v.add_argument("--suite", required=True, choices=SUITES)
    v.add_argument("--sizes", type=_int_list)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", help="per-case CSV path")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="time the recurrent, parallel and chunkwise chain forms")
    b.add_argument("--form", choices=("recurrent", "parallel", "chunkwise"))
    b.add_argument("--sizes", type=_int_list, default=[64, 256])
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--chunk-level", type=int)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", help="CSV path (default stdout)")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen-arrows", help="write an arrow-pointing dataset")
    g.add_argument("--count", type=int, default=512)
    g.add_argument("--resolution", type=int, default=32)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="arrows")
    g.set_defaults(func=cmd_gen_arrows)

    d = sub.add_parser("decay", help="exact critical P-mode decay against its power-law asymptote")
    d.add_argument("--alpha", type=float, default=0.5)
    d.add_argument("--delta-max", type=int, default=200)
    d.add_argument("--out", help="CSV path (default stdout)")
    d.set_defaults(func=cmd_decay)

    t = sub.add_parser("train-toy", help="train the small model on arrow images")
    t.add_argument("--data", help="dataset directory (generated under --out when omitted)")
    t.add_argument("--count", type=int, default=512)
    t.add_argument("--resolution", type=int, default=32)
    t.add_argument("--steps", type=int, default=50)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--mode", choices=("p", "d", "alternating"), default="alternating")
    t.add_argument("--lr", type=float, default=1e-2)
    t.add_argument("--optimizer", choices=("adam", "gd"), default="adam")
    t.add_argument("--out", default="toy-run")
    t.set_defaults(func=cmd_train_toy)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except PlstmError as exc:
        print(f"plstm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"plstm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
