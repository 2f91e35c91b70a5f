"""Command-line front end: generate traces, run experiments, sweep sampling rates.

Exit codes: 0 on success, 2 for usage errors, 3 for runtime failures.
Every command is deterministic given its flags; the seed is a flag.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace
from pathlib import Path

from .core import Catalog, PolicyConfig, Trace, default_eta
from .engine import PolicySpec, TraceSpec, make_trace, run_experiment
from .metrics import (
    default_checkpoints,
    write_series_csv,
    write_summary_json,
    write_summary_table,
)
from .oracle import opt_static, regret_bound_caching
from .policies import POLICY_NAMES
from .traces import save_trace

GEN_KINDS = ("zipf", "zipf-rr", "round-robin")
NFPL_FAMILY = ("s-nfpl", "d-nfpl", "l-nfpl", "nfpl", "fpl")


def _parse_policies(value: str) -> list[str]:
    names = [v.strip() for v in value.split(",") if v.strip()]
    bad = [n for n in names if n not in POLICY_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown policy name(s) {bad}; valid names: {', '.join(POLICY_NAMES)}"
        )
    return names


def _parse_rates(value: str) -> list[float]:
    try:
        rates = [float(v) for v in value.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad rate list: {exc}")
    if not rates:
        raise argparse.ArgumentTypeError("rate grid must not be empty")
    if any(not 0.0 < r <= 1.0 for r in rates):
        raise argparse.ArgumentTypeError("rates must lie in (0, 1]")
    return rates


def _add_trace_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trace", help="path to a trace file (lines or csv)")
    parser.add_argument("--id-column", help="csv column holding request ids")
    parser.add_argument("--n-files", type=int, help="catalog size override for file traces")
    parser.add_argument("--gen-kind", choices=GEN_KINDS, help="generate a synthetic trace")
    parser.add_argument("--n", type=int, help="catalog size for synthetic traces")
    parser.add_argument("--t", type=int, help="trace length for synthetic traces")
    parser.add_argument("--alpha", type=float, default=1.0, help="zipf exponent")
    parser.add_argument("--trace-seed", type=int, help="seed for trace generation (default: --seed)")


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--policies", type=_parse_policies, required=True,
                        help="comma-separated policy names")
    parser.add_argument("--c", type=int, required=True, help="cache capacity")
    parser.add_argument("--b", type=int, default=1, help="batch size")
    parser.add_argument("--p", type=float, default=1.0, help="observation probability")
    parser.add_argument("--q", type=float, default=1.0, help="request sampling probability")
    parser.add_argument("--eta", default="auto",
                        help="noise magnitude: auto (sqrt(BT/2C)), auto-exp (p*sqrt(BT/2C)), or a number")
    parser.add_argument("--runs", type=int, default=1, help="number of seeded runs")
    parser.add_argument("--seed", type=int, default=0, help="base seed")
    parser.add_argument("--parallel", type=int, default=1,
                        help="worker processes (env NFPL_THREADS overrides)")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--format", choices=("csv", "tsv"), default="csv",
                        help="summary table format")
    parser.add_argument("--checkpoints", type=int, default=200,
                        help="number of log-spaced miss-ratio checkpoints")
    parser.add_argument("--unpaired", action="store_true",
                        help="give each policy its own observation mask stream")
    parser.add_argument("--regen-trace-per-run", action="store_true",
                        help="redraw the synthetic trace for every seed")
    parser.add_argument("--emit-plot-script", action="store_true",
                        help="also write a matplotlib script for the emitted csv files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nfplcache",
        description="Trace-driven cache simulation under Bernoulli partial observation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic trace file")
    gen.add_argument("--kind", choices=GEN_KINDS, required=True)
    gen.add_argument("--n", type=int, required=True, help="catalog size")
    gen.add_argument("--t", type=int, required=True, help="trace length")
    gen.add_argument("--alpha", type=float, default=1.0, help="zipf exponent")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output trace path")

    run = sub.add_parser("run", help="run policies over a trace and summarize")
    _add_trace_source(run)
    _add_run_options(run)
    run.add_argument("--sampling", choices=("bernoulli", "fixed"), default="bernoulli")
    run.add_argument("--fixed-b", type=int, help="samples per batch for fixed sampling")

    sweep = sub.add_parser("sweep", help="sweep the request sampling rate")
    _add_trace_source(sweep)
    _add_run_options(sweep)
    sweep.add_argument("--rates", type=_parse_rates, required=True,
                       help="comma-separated sampling rates in (0, 1]")
    sweep.add_argument("--mode", choices=("var", "fix", "both"), default="var",
                       help="per-request Bernoulli sampling, per-batch fixed, or both")
    return parser


def _resolve_parallelism(requested: int) -> int:
    env = os.environ.get("NFPL_THREADS")
    if env:
        return max(1, int(env))
    return max(1, requested)


def _resolve_trace(args, parser) -> tuple:
    if args.trace:
        if getattr(args, "regen_trace_per_run", False):
            parser.error("--regen-trace-per-run needs a synthetic trace (--gen-kind)")
        spec = TraceSpec(kind="file", path=args.trace, id_column=args.id_column)
        trace = make_trace(spec)
        if args.n_files:
            if args.n_files < trace.catalog.n_files:
                parser.error("--n-files smaller than the ids present in the trace")
            trace = Trace(Catalog(args.n_files), trace.requests)
        return spec, trace
    if not args.gen_kind:
        parser.error("either --trace or --gen-kind is required")
    if args.n is None or args.t is None:
        parser.error("--gen-kind needs --n and --t")
    if args.gen_kind in ("zipf", "zipf-rr") and args.alpha <= 0:
        parser.error("--alpha must be positive for zipf traces")
    seed = args.trace_seed if args.trace_seed is not None else args.seed
    spec = TraceSpec(kind=args.gen_kind, n_files=args.n, length=args.t,
                     alpha=args.alpha, seed=seed)
    return spec, make_trace(spec)


def _resolve_eta(value: str, batch: int, capacity: int, horizon: int, p: float) -> float:
    if value == "auto":
        return default_eta(batch, capacity, horizon)
    if value == "auto-exp":
        return default_eta(batch, capacity, horizon, p, kind="experimental")
    return float(value)


def _base_config(args, horizon: int) -> PolicyConfig:
    eta = _resolve_eta(args.eta, args.b, args.c, horizon, args.p)
    sampling = getattr(args, "sampling", "bernoulli")
    return PolicyConfig(
        cache_capacity=args.c,
        batch_size=args.b,
        observe_prob=args.p,
        sample_prob=args.q,
        eta=eta,
        sampling=sampling,
        fixed_per_batch=getattr(args, "fixed_b", None) if sampling == "fixed" else None,
        seed=args.seed,
    )


def _summary_row(name: str, agg, bound: float | None) -> dict:
    return {
        "policy": name,
        "mean_final_miss_ratio": repr(agg.final_mean_miss_ratio),
        "variance": repr(agg.final_variance),
        "mean_regret": repr(agg.mean_regret),
        "regret_bound": "" if bound is None else repr(bound),
        "mean_heap_ops": repr(agg.mean_heap_ops),
        "mean_cache_refreshes": repr(agg.mean_cache_refreshes),
        "mean_wall_time_sec": repr(agg.mean_wall_time),
    }


def _print_summary(rows: list[dict]) -> None:
    cols = ("policy", "mean_final_miss_ratio", "variance", "mean_regret",
            "regret_bound", "mean_heap_ops", "mean_wall_time_sec")
    print("  ".join(f"{c:>22s}" for c in cols))
    for row in rows:
        cells = []
        for c in cols:
            v = row.get(c, "")
            try:
                cells.append(f"{float(v):>22.6g}")
            except (TypeError, ValueError):
                cells.append(f"{str(v):>22s}")
        print("  ".join(cells))


PLOT_SCRIPT = """\
# Auto-generated plotting helper; run with: python plot_results.py
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).parent
for path in sorted(here.glob("*_series.csv")):
    ts, ys = [], []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            ts.append(int(row["checkpoint_t"]))
            ys.append(float(row["mean_miss_ratio"]))
    plt.plot(ts, ys, label=path.stem.replace("_series", ""))
plt.xscale("log")
plt.xlabel("requests")
plt.ylabel("average miss ratio")
plt.legend()
plt.savefig(here / "miss_ratio.png", dpi=150)
print("wrote", here / "miss_ratio.png")
"""


def cmd_gen(args, parser) -> int:
    if args.kind in ("zipf", "zipf-rr") and args.alpha <= 0:
        parser.error("--alpha must be positive for zipf traces")
    if args.n < 1 or args.t < 1:
        parser.error("--n and --t must be positive")
    spec = TraceSpec(kind=args.kind, n_files=args.n, length=args.t,
                     alpha=args.alpha, seed=args.seed)
    trace = make_trace(spec)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    save_trace(trace, out)
    print(f"wrote {len(trace)} requests over {trace.catalog.n_files} files to {out}")
    return 0


def cmd_run(args, parser) -> int:
    trace_spec, trace = _resolve_trace(args, parser)
    horizon = len(trace)
    if args.c >= trace.catalog.n_files:
        raise RuntimeError(
            f"cache capacity {args.c} must be below catalog size {trace.catalog.n_files}"
        )
    config = _base_config(args, horizon)
    specs = [PolicySpec(name, config) for name in args.policies]
    results = run_experiment(
        trace_spec,
        specs,
        runs=args.runs,
        base_seed=args.seed,
        parallelism=_resolve_parallelism(args.parallel),
        paired=not args.unpaired,
        regen_trace_per_run=args.regen_trace_per_run,
        checkpoints=default_checkpoints(horizon, args.checkpoints),
        trace=None if args.regen_trace_per_run else trace,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    payload = {}
    _, opt_misses = opt_static(trace, args.c)
    for name in args.policies:
        agg = results[name]
        write_series_csv(out / f"{name}_series.csv", agg)
        bound = None
        if name in NFPL_FAMILY:
            bound = regret_bound_caching(args.b, args.c, horizon, args.p, args.q)
        rows.append(_summary_row(name, agg, bound))
        payload[name] = {
            "mean_final_miss_ratio": agg.final_mean_miss_ratio,
            "variance": agg.final_variance,
            "mean_total_misses": float(sum(r.total_misses for r in agg.runs)) / agg.n_runs,
            "opt_misses": opt_misses,
            "mean_regret": agg.mean_regret,
            "regret_bound": bound,
            "mean_heap_ops": agg.mean_heap_ops,
            "mean_cache_refreshes": agg.mean_cache_refreshes,
            "mean_wall_time_sec": agg.mean_wall_time,
            "runs": agg.n_runs,
        }
    payload["experiment"] = {
        "trace_kind": trace_spec.kind,
        "n_files": trace.catalog.n_files,
        "horizon": horizon,
        "cache_capacity": args.c,
        "batch_size": args.b,
        "observe_prob": args.p,
        "sample_prob": args.q,
        "eta": config.eta,
        "base_seed": args.seed,
        "opt_miss_ratio": opt_misses / horizon,
    }
    write_summary_table(out / f"summary.{args.format}", rows, args.format)
    write_summary_json(out / "summary.json", payload)
    if args.emit_plot_script:
        (out / "plot_results.py").write_text(PLOT_SCRIPT, encoding="utf-8")
    _print_summary(rows)
    print(f"opt miss ratio: {opt_misses / horizon:.4f}; results in {out}/")
    return 0


def cmd_sweep(args, parser) -> int:
    bad = [n for n in args.policies if n not in NFPL_FAMILY]
    if bad:
        parser.error(f"sweep only applies to sampling policies, got {bad}")
    trace_spec, trace = _resolve_trace(args, parser)
    horizon = len(trace)
    if args.c >= trace.catalog.n_files:
        raise RuntimeError(
            f"cache capacity {args.c} must be below catalog size {trace.catalog.n_files}"
        )
    modes = ("var", "fix") if args.mode == "both" else (args.mode,)
    base = _base_config(args, horizon)
    _, opt_misses = opt_static(trace, args.c)
    parallelism = _resolve_parallelism(args.parallel)

    curves: dict[str, list[tuple[float, float, float]]] = {}
    for rate in args.rates:
        for mode in modes:
            if mode == "var":
                config = replace(base, sample_prob=rate, sampling="bernoulli",
                                 fixed_per_batch=None)
            else:
                b = min(args.b, max(1, round(rate * args.b)))
                config = replace(base, sample_prob=1.0, sampling="fixed",
                                 fixed_per_batch=b)
            specs = [PolicySpec(name, config) for name in args.policies]
            results = run_experiment(
                trace_spec, specs, runs=args.runs, base_seed=args.seed,
                parallelism=parallelism, paired=not args.unpaired,
                regen_trace_per_run=args.regen_trace_per_run,
                trace=None if args.regen_trace_per_run else trace,
            )
            effective = rate if mode == "var" else config.fixed_per_batch / args.b
            for name in args.policies:
                label = name if len(modes) == 1 else f"{name}-{mode}"
                agg = results[name]
                curves.setdefault(label, []).append(
                    (effective, agg.final_mean_miss_ratio, agg.final_ci95)
                )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for label, points in curves.items():
        with open(out / f"{label}_sweep.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sampling_rate", "mean_miss_ratio", "ci95"])
            for rate, mean, ci in points:
                writer.writerow([repr(rate), repr(mean), repr(ci)])
    opt_ratio = opt_misses / horizon
    with open(out / "opt_sweep.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sampling_rate", "mean_miss_ratio", "ci95"])
        for rate in args.rates:
            writer.writerow([repr(float(rate)), repr(opt_ratio), repr(0.0)])

    for label, points in sorted(curves.items()):
        series = ", ".join(f"{r:.3g}->{m:.4f}" for r, m, _ in points)
        print(f"{label}: {series}")
    print(f"opt miss ratio: {opt_ratio:.4f}; results in {out}/")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args, parser)
        if args.command == "run":
            return cmd_run(args, parser)
        return cmd_sweep(args, parser)
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
