"""Command-line experiment harness.

Subcommands:

``cluster``      one run of linearize -> K-means -> metrics, written as JSON
``compare``      repeated trials over methods and sample counts, written as CSV
``bound-check``  exhaustive-partition check of the approximation bound on small instances

Exit codes: 0 success, 1 invalid flags or preconditions, 2 data errors,
3 numerical failure, 4 bound violation (``bound-check`` only).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .approx import (
    SketchConfig,
    approx_error,
    derive_seed,
    exact_truncated,
    linearize,
    rng_for,
)
from .cluster import brute_force_optimal, kernel_kmeans_full, kmeans, trace_objective
from .data import DataError, LabeledDataset, generate_rings, load_csv, normalize_rows_unit_l2
from .kernel import DEFAULT_BLOCK_WIDTH, KernelSpec, kernel_matrix
from .metrics import clustering_accuracy, error_functionals

EXIT_FLAGS, EXIT_DATA, EXIT_NUMERIC, EXIT_VIOLATION = 1, 2, 3, 4

METHOD_NAMES = {
    "one-pass": "one_pass_srht",
    "gaussian": "one_pass_gaussian",
    "nystrom": "nystrom",
    "exact": "exact",
    "full-kkm": None,
    "raw-kmeans": None,
}
_BOUND_KERNELS = (KernelSpec.polynomial(2), KernelSpec.polynomial(2, 1.0), KernelSpec.rbf(0.5))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FLAGS, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    return a, b


def _kernel(text: str) -> KernelSpec:
    try:
        return KernelSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_common(p: argparse.ArgumentParser, *, oversample: int = 10, trials: int = 1):
    p.add_argument("--kernel", type=_kernel, default=KernelSpec.polynomial(2), help="poly:D[:GAMMA] or rbf:GAMMA")
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--oversample", type=int, default=oversample)
    p.add_argument("--clusters", type=int, default=None, help="default: number of true classes, else 2")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=20)
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--block-width", type=int, default=DEFAULT_BLOCK_WIDTH)
    p.add_argument("--basis", choices=("full", "leading"), default="full",
                   help="one-pass basis: full range of the sketch, or its leading r directions")
    p.add_argument("--out", type=Path, default=None)


def _add_data(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--generate", metavar="NAME:N", help="synthetic data, e.g. rings:4000")
    src.add_argument("--data", type=Path, metavar="PATH", help="CSV file")
    p.add_argument("--label-col", type=int, default=None)
    p.add_argument("--skip-rows", type=int, default=0)
    p.add_argument("--normalize", action="store_true", help="scale every sample to unit l2 norm")
    p.add_argument("--radii", type=_float_pair, default=(1.0, 4.5))
    p.add_argument("--noise", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="onepass-kkm", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cluster", help="single pipeline run, JSON output")
    _add_data(p)
    p.add_argument("--method", choices=tuple(METHOD_NAMES), default="one-pass")
    p.add_argument("--samples", type=int, default=None, help="Nyström column count m")
    _add_common(p)

    p = sub.add_parser("compare", help="trial sweep over methods, CSV output")
    _add_data(p)
    p.add_argument("--method", default="one-pass,nystrom", help="comma-separated methods")
    p.add_argument("--samples", type=_int_list, default=[10, 20, 30, 40, 50], help="Nyström m grid")
    _add_common(p, trials=10)

    p = sub.add_parser("bound-check", help="verify the clustering-gap bound on small random instances")
    p.add_argument("--method", choices=("one-pass", "gaussian", "nystrom", "exact"), default="one-pass")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--kernels", type=lambda s: [_kernel(t) for t in s.split(",")], default=list(_BOUND_KERNELS),
                   help="comma-separated kernels cycled over trials")
    _add_common(p, oversample=4, trials=200)
    return parser


def load_dataset(args) -> LabeledDataset:
    if args.generate:
        name, _, count = args.generate.partition(":")
        if name != "rings":
            raise UsageError(f"unknown generator {name!r}")
        try:
            n = int(count) if count else 4000
        except ValueError:
            raise UsageError(f"bad sample count in {args.generate!r}") from None
        try:
            ds = generate_rings(n, args.radii, args.noise, seed=args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        ds = load_csv(args.data, label_column=args.label_col, skip_rows=args.skip_rows)
    if args.normalize:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ds = LabeledDataset(normalize_rows_unit_l2(ds.data), ds.truth, ds.name, ds.class_names)
    return ds


@dataclass
class RunResult:
    method: str
    samples: int | None
    approx_error: float | None
    accuracy: float | None
    objective: float
    peak_bytes: int


def _sketch_config(method: str, args, seed: int, samples: int | None) -> SketchConfig:
    return SketchConfig(rank=args.rank, oversampling=args.oversample, seed=seed,
                        block_width=args.block_width, method=METHOD_NAMES[method],
                        samples=samples, basis=args.basis)


def run_once(ds: LabeledDataset, method: str, args, seed: int, *, samples: int | None = None,
             threads: int = 1, factor=None) -> RunResult:
    """Linearize, cluster and score one configuration.

    ``factor`` may carry a precomputed deterministic linearization (exact method).
    """
    k = args.clusters or ds.n_classes or 2
    spec = args.kernel
    kseed = derive_seed(seed, 1)
    err = None
    if method == "raw-kmeans":
        assign = kmeans(ds.data, k, args.restarts, args.max_iter, kseed)
        peak = 0
    elif method == "full-kkm":
        assign = kernel_kmeans_full(ds.data, spec, k, args.max_iter, args.restarts, kseed)
        err = 0.0
        peak = ds.n * ds.n * 8
    else:
        if factor is None:
            cfg = _sketch_config(method, args, seed, samples)
            factor = linearize(ds.data, spec, cfg, threads=threads)
        err = approx_error(ds.data, spec, factor, args.block_width)
        assign = kmeans(factor.Y, k, args.restarts, args.max_iter, kseed)
        peak = int(factor.memory.get("peak_bytes", 0))
    acc = clustering_accuracy(assign.labels, ds.truth) if ds.truth is not None else None
    return RunResult(method, samples, err, acc, assign.objective, peak)


def _samples_for(method: str, args, n: int, m: int | None):
    if method in ("one-pass", "gaussian"):
        return args.rank + args.oversample
    if method == "nystrom":
        return m
    return n


def cmd_cluster(args) -> int:
    ds = load_dataset(args)
    if args.method == "nystrom" and args.samples is None:
        raise UsageError("--samples is required for nystrom")
    t0 = time.perf_counter()
    res = run_once(ds, args.method, args, args.seed, samples=args.samples, threads=args.threads)
    wall_ms = (time.perf_counter() - t0) * 1e3
    sketch = args.method in ("one-pass", "gaussian")
    record = {
        "method": args.method,
        "kernel": str(args.kernel),
        "dataset": ds.name,
        "n": ds.n,
        "clusters": args.clusters or ds.n_classes or 2,
        "r": args.rank,
        "l": args.oversample if sketch else None,
        "m": args.samples if args.method == "nystrom" else None,
        "seed": args.seed,
        "approx_error": res.approx_error,
        "accuracy": res.accuracy,
        "objective": res.objective,
        "wall_time_ms": round(wall_ms, 3),
        "peak_block_memory_bytes": res.peak_bytes,
    }
    text = json.dumps(record, indent=2, sort_keys=True) + "\n"
    if args.out:
        args.out.write_text(text)
    sys.stdout.write(text)
    return 0


COMPARE_COLUMNS = ("method", "samples", "trial", "approx_error", "accuracy")


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def cmd_compare(args) -> int:
    ds = load_dataset(args)
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    for m in methods:
        if m not in METHOD_NAMES:
            raise UsageError(f"unknown method {m!r}")
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    cells = []
    for m in methods:
        for s in (args.samples if m == "nystrom" else [None]):
            cells.append((m, s))
    # validate every configuration up front so bad flags fail before any work
    for m, s in cells:
        if METHOD_NAMES[m]:
            _sketch_config(m, args, 0, s).check(ds.n)

    exact = None
    if "exact" in methods:
        exact = exact_truncated(ds.data, args.kernel, args.rank)

    def task(cell_trial):
        (m, s), t = cell_trial
        seed = derive_seed(args.seed, t)
        res = run_once(ds, m, args, seed, samples=s, factor=exact if m == "exact" else None)
        return (m, _samples_for(m, args, ds.n, s), t, res.approx_error, res.accuracy)

    jobs = [(c, t) for c in cells for t in range(args.trials)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                rows = list(pool.map(task, jobs))
        else:
            rows = [task(j) for j in jobs]
    rows.sort(key=lambda r: (methods.index(r[0]), r[1], r[2]))

    body = io.StringIO()
    w = csv.writer(body, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    for m, s, t, e, a in rows:
        w.writerow([m, s, t, _fmt(e), _fmt(a)])

    summary = io.StringIO()
    w = csv.writer(summary, lineterminator="\n")
    w.writerow(("method", "samples", "trials", "mean_approx_error", "mean_accuracy"))
    for key in dict.fromkeys((r[0], r[1]) for r in rows):
        sel = [r for r in rows if (r[0], r[1]) == key]
        errs = [r[3] for r in sel if r[3] is not None]
        accs = [r[4] for r in sel if r[4] is not None]
        w.writerow([key[0], key[1], len(sel),
                    _fmt(np.mean(errs) if errs else None), _fmt(np.mean(accs) if accs else None)])

    if args.out:
        args.out.write_text(body.getvalue())
        args.out.with_name(args.out.stem + "_summary.csv").write_text(summary.getvalue())
    else:
        sys.stdout.write(body.getvalue())
    sys.stdout.write(summary.getvalue())
    return 0


BOUND_COLUMNS = ("trial", "kernel", "L_hat", "L_star", "gap", "twice_trace_norm", "trace_E",
                 "bound_pass", "trace_bound_pass")


def bound_trial(t: int, args) -> dict:
    """One random instance: optimal partitions under K and under its approximation."""
    seed = derive_seed(args.seed, t)
    X = rng_for(seed, 0).standard_normal((args.dim, args.n))
    spec = args.kernels[t % len(args.kernels)]
    K = kernel_matrix(X, spec)
    if args.method == "exact":
        factor = exact_truncated(X, spec, args.rank)
    else:
        factor = linearize(X, spec, _sketch_config(args.method, args, seed, args.samples))
    K_hat = factor.gram()
    k = args.clusters or 2
    star = brute_force_optimal(K, k)
    hat = brute_force_optimal(K_hat, k)
    L_hat = trace_objective(K, hat.labels, k)
    L_star = star.objective
    ef = error_functionals(K, K_hat)
    gap = L_hat - L_star
    return {
        "trial": t,
        "kernel": str(spec),
        "L_hat": L_hat,
        "L_star": L_star,
        "gap": gap,
        "twice_trace_norm": 2.0 * ef.trace_norm,
        "trace_E": ef.trace,
        "bound_pass": bool(gap <= 2.0 * ef.trace_norm + 1e-8),
        "trace_bound_pass": bool(gap <= ef.trace + 1e-8) if args.method == "exact" else None,
    }


def cmd_bound_check(args) -> int:
    if args.n > 12 or (args.clusters or 2) > 3:
        raise UsageError("exhaustive search is limited to n <= 12 and K <= 3")
    if args.method == "nystrom" and args.samples is None:
        raise UsageError("--samples is required for nystrom")
    if args.method != "exact":
        _sketch_config(args.method, args, 0, args.samples).check(args.n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = [bound_trial(t, args) for t in range(args.trials)]
    lines = io.StringIO()
    w = csv.writer(lines, lineterminator="\n")
    w.writerow(BOUND_COLUMNS)
    for r in rows:
        w.writerow([r["trial"], r["kernel"]] + [_fmt(r[c]) for c in BOUND_COLUMNS[2:7]]
                   + ["" if r[c] is None else ("pass" if r[c] else "FAIL") for c in BOUND_COLUMNS[7:]])
    if args.out:
        args.out.write_text(lines.getvalue())
    sys.stdout.write(lines.getvalue())
    n_bound = sum(not r["bound_pass"] for r in rows)
    n_trace = sum(r["trace_bound_pass"] is False for r in rows)
    sys.stdout.write(f"# {len(rows)} trials: {n_bound} violation(s) of gap <= 2*trace_norm(E)")
    if args.method == "exact":
        sys.stdout.write(f", {n_trace} violation(s) of gap <= trace(E)")
    sys.stdout.write("\n")
    return EXIT_VIOLATION if n_bound or n_trace else 0


COMMANDS = {"cluster": cmd_cluster, "compare": cmd_compare, "bound-check": cmd_bound_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, MemoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FLAGS

if __name__ == "__main__":
    sys.exit(main())
