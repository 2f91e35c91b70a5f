"""Experiment orchestration: one trace, a policy set, M seeds, run in parallel.

Results are deterministic functions of (trace spec, policy specs, base
seed): seeds are processed independently and aggregated in seed order,
so the output is identical at any parallelism level. Within one seed all
policies see the same observation mask by default, which pairs the
comparison; ``paired=False`` gives each policy its own mask substream.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .core import (
    STREAM_BPO,
    STREAM_POLICY,
    STREAM_TRACE,
    Catalog,
    PolicyConfig,
    Trace,
    spawn_stream,
)
from .metrics import AggregateResult, RunResult, aggregate, default_checkpoints
from .oracle import opt_static
from .policies import make_policy
from .traces import (
    ObservationMask,
    bpo_mask,
    gen_round_robin,
    gen_zipf,
    gen_zipf_rr,
    load_trace,
)

TRACE_KINDS = ("zipf", "zipf-rr", "round-robin", "file")


@dataclass(frozen=True)
class PolicySpec:
    """A named policy plus its full configuration."""

    name: str
    config: PolicyConfig


@dataclass(frozen=True)
class TraceSpec:
    """Recipe for building a trace, so workers can regenerate it."""

    kind: str
    n_files: int = 0
    length: int = 0
    alpha: float = 1.0
    seed: int = 0
    path: str | None = None
    id_column: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in TRACE_KINDS:
            raise ValueError(f"trace kind must be one of {TRACE_KINDS}")


def make_trace(spec: TraceSpec, seed: int | None = None) -> Trace:
    """Materialize a trace; ``seed`` overrides the spec's own seed."""
    if spec.kind == "file":
        if not spec.path:
            raise ValueError("file traces need a path")
        return load_trace(spec.path, id_column=spec.id_column)
    rng = spawn_stream(spec.seed if seed is None else seed, STREAM_TRACE)
    catalog = Catalog(spec.n_files)
    if spec.kind == "zipf":
        return gen_zipf(catalog, spec.length, spec.alpha, rng)
    if spec.kind == "zipf-rr":
        return gen_zipf_rr(catalog, spec.length, spec.alpha, rng)
    return gen_round_robin(catalog, spec.length)


def run_one(
    trace: Trace,
    spec: PolicySpec,
    seed: int,
    mask: ObservationMask | None = None,
    checkpoints: tuple[int, ...] | None = None,
    opt_misses: int | None = None,
    **policy_hooks,
) -> RunResult:
    """Simulate one policy over one trace with one seed.

    The observation mask comes from the seed's BPO stream unless given;
    policy randomness always comes from the seed's policy stream.
    """
    horizon = len(trace)
    if mask is None:
        mask = bpo_mask(horizon, spec.config.observe_prob, spawn_stream(seed, STREAM_BPO))
    if len(mask) != horizon:
        raise ValueError("mask length must match the trace")
    if checkpoints is None:
        checkpoints = default_checkpoints(horizon)
    if opt_misses is None:
        _, opt_misses = opt_static(trace, spec.config.cache_capacity)
    policy = make_policy(
        spec.name, spec.config, trace.catalog, horizon, spawn_stream(seed, STREAM_POLICY),
        **policy_hooks,
    )

    step = policy.step
    misses = 0
    series = []
    cp_iter = iter(checkpoints)
    next_cp = next(cp_iter)
    started = time.perf_counter()
    # trace and mask are walked in blocks so working state stays O(N + C)
    block = 65_536
    for start in range(0, horizon, block):
        requests = trace.requests[start : start + block].tolist()
        observed = mask.bits[start : start + block].tolist()
        t = start
        for f, obs in zip(requests, observed):
            t += 1
            if not step(t, f, obs).hit:
                misses += 1
            if t == next_cp:
                series.append(misses / t)
                next_cp = next(cp_iter, 0)
    wall = time.perf_counter() - started

    return RunResult(
        policy=spec.name,
        seed=seed,
        checkpoints=tuple(checkpoints),
        miss_series=tuple(series),
        total_misses=misses,
        opt_misses=opt_misses,
        regret=misses - opt_misses,
        heap_ops=policy.heap_ops,
        cache_refreshes=policy.cache_refreshes,
        sampled_steps=policy.sampled_steps,
        score_changes=policy.score_changes,
        wall_time=wall,
    )


# Worker context is installed once per process by the pool initializer so
# the trace is not re-pickled for every seed.
_CTX: dict = {}


def _init_worker(ctx: dict) -> None:
    _CTX.update(ctx)


def _run_seed(seed: int) -> list[RunResult]:
    ctx = _CTX
    trace = ctx["trace"]
    if trace is None:
        trace = make_trace(ctx["trace_spec"], seed=seed)
    specs = ctx["specs"]
    checkpoints = ctx["checkpoints"] or default_checkpoints(len(trace))
    results = []
    try:
        for idx, spec in enumerate(specs):
            if ctx["paired"]:
                mask = bpo_mask(
                    len(trace), spec.config.observe_prob, spawn_stream(seed, STREAM_BPO)
                )
            else:
                mask = bpo_mask(
                    len(trace),
                    spec.config.observe_prob,
                    spawn_stream(seed, STREAM_BPO).substream(idx),
                )
            opt = ctx["opt_misses"].get(spec.config.cache_capacity)
            if opt is None:
                _, opt = opt_static(trace, spec.config.cache_capacity)
            results.append(
                run_one(trace, spec, seed, mask=mask, checkpoints=checkpoints, opt_misses=opt)
            )
    except Exception as exc:
        raise RuntimeError(f"run failed for seed {seed}: {exc}") from exc
    return results


def run_experiment(
    trace_spec: TraceSpec,
    policy_specs: list[PolicySpec],
    runs: int,
    base_seed: int,
    parallelism: int = 1,
    paired: bool = True,
    regen_trace_per_run: bool = False,
    checkpoints: tuple[int, ...] | None = None,
    trace: Trace | None = None,
) -> dict[str, AggregateResult]:
    """Run every policy over seeds base_seed..base_seed+runs-1 and aggregate.

    ``paired=True`` requires a single observation probability across the
    policy set (all policies share each seed's mask). A pre-built trace
    may be passed to skip generation; otherwise the trace is built once
    from the spec, or per run when ``regen_trace_per_run`` is set.
    """
    if runs < 1:
        raise ValueError("need at least one run")
    names = [s.name for s in policy_specs]
    if len(set(names)) != len(names):
        raise ValueError("policy names must be unique within one experiment")
    if paired:
        probs = {s.config.observe_prob for s in policy_specs}
        if len(probs) > 1:
            raise ValueError(
                "paired masks need a single observe_prob across policies; "
                "use paired=False for mixed settings"
            )

    if regen_trace_per_run:
        shared_trace = None
        opt_cache: dict[int, int] = {}
    else:
        shared_trace = trace if trace is not None else make_trace(trace_spec)
        opt_cache = {}
        for spec in policy_specs:
            c = spec.config.cache_capacity
            if c not in opt_cache:
                opt_cache[c] = opt_static(shared_trace, c)[1]
        if checkpoints is None:
            checkpoints = default_checkpoints(len(shared_trace))

    ctx = {
        "trace": shared_trace,
        "trace_spec": trace_spec,
        "specs": tuple(policy_specs),
        "checkpoints": checkpoints,
        "paired": paired,
        "opt_misses": opt_cache,
    }
    seeds = list(range(base_seed, base_seed + runs))

    if parallelism <= 1:
        _init_worker(ctx)
        per_seed = [_run_seed(s) for s in seeds]
        _CTX.clear()
    else:
        with ProcessPoolExecutor(
            max_workers=parallelism, initializer=_init_worker, initargs=(ctx,)
        ) as pool:
            per_seed = list(pool.map(_run_seed, seeds))

    by_policy: dict[str, list[RunResult]] = {s.name: [] for s in policy_specs}
    for results in per_seed:  # seed order, independent of completion order
        for spec, res in zip(policy_specs, results):
            by_policy[spec.name].append(res)
    return {name: aggregate(rs) for name, rs in by_policy.items()}
