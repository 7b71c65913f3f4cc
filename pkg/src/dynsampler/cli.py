"""Command-line harness.

Subcommands: ``sample``, ``verify``, ``regime`` and ``bench``. Artifacts are
written as CSV/JSON; stdout carries only machine-readable output and
diagnostics go to stderr.

Exit codes:
    0  success
    2  bad arguments, unparsable input or unwritable output
    3  a run exceeded its round budget
    4  verification failed
    5  regime condition not satisfied
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .convergence import RegimeReport, check_hardcore_regime, check_ising_regime, check_soft_condition, soft_threshold
from .engine import (
    BudgetExceeded,
    ResampleState,
    TraceStats,
    bootstrap_sample,
    compute_kappa,
    dynamic_sample,
    unit_kappa,
)
from .factor_graph import ModelError, apply_update, dependency_degree, vbl
from .instances import chain_model, random_chain_update, regular_hardcore, regular_ising
from .io import LoadedModel, ParseError, load_model, load_updates
from .streams import Stream
from .oracle import (
    EmpiricalDistribution,
    StateSpaceTooLarge,
    collect_snapshots,
    conditional_gibbs_test,
    exact_gibbs,
    noise_scale,
    tvd,
)
from .rng import RngStream
from .spin_models import (
    HardcoreUpdate,
    SpinUpdate,
    apply_hardcore_update,
    apply_spin_update,
    hardcore_bootstrap_sample,
    hardcore_dynamic_sample,
    spin_bootstrap_sample,
    spin_dynamic_sample,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_BUDGET = 3
EXIT_VERIFY = 4
EXIT_REGIME = 5

STATS_COLUMNS = ("update_index", "iterations", "var_resamples", "coin_flips", "wallclock_ns")
BENCH_COLUMNS = ("k", "mean_iterations", "mean_resamples", "stderr")
CHUNK = 256


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    updates: Optional[str]
    seed: int
    trials: int
    budget: Optional[int]
    mode: str
    out: Optional[str]

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.mode not in ("seq", "par"):
            raise ValueError("mode must be seq or par")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _fmt(x: float) -> str:
    return format(x, ".10g")


def _load_stream(model_path: str, updates_path: Optional[str]) -> Stream:
    loaded = load_model(model_path)
    updates = load_updates(updates_path, loaded) if updates_path else []
    return Stream.build(loaded, updates)


# Worker state: each process (or the parent in sequential mode) builds its
# context once and then runs trials by index.
_CONTEXT = None


def _init_context(builder: Callable, args: tuple) -> None:
    global _CONTEXT
    _CONTEXT = builder(*args)


def _run_chunk(job: tuple) -> list:
    fn, indices = job
    return [fn(_CONTEXT, i) for i in indices]


def _map_trials(fn: Callable, trials: int, mode: str, builder: Callable, args: tuple) -> list:
    """Run ``fn(context, i)`` for i < trials; results come back in trial order."""
    chunks = [(fn, range(s, min(s + CHUNK, trials))) for s in range(0, trials, CHUNK)]
    if mode == "seq":
        _init_context(builder, args)
        results = []
        for job in chunks:
            results.extend(_run_chunk(job))
        return results
    with ProcessPoolExecutor(initializer=_init_context, initargs=(builder, args)) as pool:
        results = []
        for part in pool.map(_run_chunk, chunks):
            results.extend(part)
        return results


# --- sample -----------------------------------------------------------------------


@dataclass
class _SampleContext:
    stream: Stream
    seed: int
    budget: Optional[int]
    timing: bool


def _build_sample_context(model_path, updates_path, seed, budget, timing):
    return _SampleContext(_load_stream(model_path, updates_path), seed, budget, timing)


def _sample_trial(ctx: _SampleContext, i: int):
    rng = RngStream(ctx.seed).split("trial", i)
    x = ctx.stream.initial_sample(rng.split("initial"))
    rows = []
    for j in range(len(ctx.stream.updates)):
        t0 = time.perf_counter_ns()
        try:
            x, stats = ctx.stream.step(j, x, rng, ctx.budget)
        except BudgetExceeded as exc:
            rows.append(_stats_row(j, exc.stats, time.perf_counter_ns() - t0 if ctx.timing else 0))
            return rows, None
        rows.append(_stats_row(j, stats, time.perf_counter_ns() - t0 if ctx.timing else 0))
    return rows, list(x)


def _stats_row(index: int, stats: TraceStats, ns: int) -> tuple:
    return (index, stats.iterations, stats.variable_resamples, stats.coin_flips, ns)


def cmd_sample(cfg: ExperimentConfig, timing: bool = False) -> int:
    if cfg.out is None:
        raise ParseError("sample needs --out")
    _load_stream(cfg.model, cfg.updates)  # parse errors surface before any work
    results = _map_trials(
        _sample_trial, cfg.trials, cfg.mode, _build_sample_context,
        (cfg.model, cfg.updates, cfg.seed, cfg.budget, timing),
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "stats.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_COLUMNS)
        for rows, _ in results:
            w.writerows(rows)
    finals = [x for _, x in results]
    with open(out / "final.json", "w", encoding="utf-8") as fh:
        json.dump({"seed": cfg.seed, "configurations": finals}, fh)
        fh.write("\n")
    failed = sum(x is None for x in finals)
    if failed:
        _log(f"{failed} of {cfg.trials} trials exceeded the round budget")
        return EXIT_BUDGET
    return EXIT_OK


# --- verify -----------------------------------------------------------------------


@dataclass
class _VerifyContext:
    stream: Stream
    seed: int
    budget: Optional[int]
    kappa: Callable
    initial: object


def _build_verify_context(model_path, updates_path, seed, budget, mutate):
    stream = _load_stream(model_path, updates_path)
    initial = exact_gibbs(stream.factor_graph(stream.loaded.model))
    return _VerifyContext(stream, seed, budget, unit_kappa if mutate else compute_kappa, initial)


def _verify_trial(ctx: _VerifyContext, i: int):
    rng = RngStream(ctx.seed).split("trial", i)
    x = ctx.initial.sample(rng.split("initial"))
    for j in range(len(ctx.stream.updates)):
        x, _ = ctx.stream.step(j, x, rng, ctx.budget, ctx.kappa)
    return tuple(x)


def cmd_verify(
    cfg: ExperimentConfig,
    samples: int,
    tol: float,
    bucket_tol: float = 0.05,
    mutate: bool = False,
) -> int:
    stream = _load_stream(cfg.model, cfg.updates)
    if mutate and stream.kind != "generic":
        raise ParseError("--no-kappa applies to generic factor graphs only")
    if samples < 1:
        raise ParseError("samples must be at least 1")
    final_fg = stream.factor_graph(stream.final_model)
    target = exact_gibbs(final_fg)

    finals = _map_trials(
        _verify_trial, samples, cfg.mode, _build_verify_context,
        (cfg.model, cfg.updates, cfg.seed, cfg.budget, mutate),
    )
    emp = EmpiricalDistribution.from_samples(target.shape, finals)
    distance = tvd(emp, target)
    report = {
        "model_kind": stream.kind,
        "updates": len(stream.updates),
        "samples": samples,
        "final_law": {
            "tvd": distance,
            "tolerance": tol,
            "noise": noise_scale(target.size, samples),
            "passed": distance <= tol,
        },
    }
    passed = distance <= tol
    _log(f"{'PASS' if passed else 'FAIL'} final-law tvd={distance:.4f} tol={tol}")

    if stream.kind == "generic" and stream.updates:
        pre = stream.pre_model(len(stream.updates) - 1)
        kappa = unit_kappa if mutate else compute_kappa
        snaps = collect_snapshots(
            pre, stream.updates[-1], samples, (1, 2, 3),
            RngStream(cfg.seed).split("buckets"), kappa, exact_gibbs(pre),
        )
        rounds = {}
        for t, states in snaps.items():
            rep = conditional_gibbs_test(stream.models[-1], states, tolerance=bucket_tol)
            rounds[str(t)] = rep.as_dict()
            passed = passed and rep.passed
            _log(f"round {t}: {rep.summary()}")
        report["conditional_gibbs"] = rounds
    report["passed"] = passed
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if cfg.out is not None:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.json").write_text(text + "\n", encoding="utf-8")
    return EXIT_OK if passed else EXIT_VERIFY


# --- regime -----------------------------------------------------------------------


def regime_report(loaded: LoadedModel, delta: Optional[float]):
    """Regime check for the model's family.

    Without ``delta`` a generic model is checked against the weakest form of
    the soft condition (delta -> 0); the report then carries the largest
    admissible delta.
    """
    if loaded.kind == "hardcore":
        return check_hardcore_regime(loaded.model)
    if loaded.kind in ("ising", "potts"):
        return check_ising_regime(loaded.model)
    model = loaded.model
    if delta is not None:
        return check_soft_condition(model, delta)
    d = dependency_degree(model)
    b_min = min((c.lower_bound for c in model.constraints.values()), default=1.0)
    threshold = soft_threshold(d, 0.0)
    delta_max = min(1.0, 1 - (d + 1) * (1 - b_min ** 2))
    return RegimeReport(
        "soft",
        delta_max > 0,
        b_min - threshold,
        {"d": d, "delta": None, "threshold": threshold, "B_min": b_min, "delta_max": delta_max},
    )


def cmd_regime(model_path: str, delta: Optional[float]) -> int:
    if delta is not None and not 0 < delta < 1:
        raise ParseError("delta must lie in (0, 1)")
    report = regime_report(load_model(model_path), delta)
    print(json.dumps(report.as_dict(), sort_keys=True))
    return EXIT_OK if report.satisfied else EXIT_REGIME


# --- bench ------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchSpec:
    family: str
    n: int
    degree: int
    delta: float
    scale: float
    seed: int
    budget: Optional[int]


@dataclass
class _BenchContext:
    spec: BenchSpec
    base: object


def build_bench_model(spec: BenchSpec):
    if spec.family == "chain":
        return chain_model(spec.n, spec.delta, RngStream(spec.seed, ("model",)))
    if spec.family == "ising":
        return regular_ising(spec.n, spec.degree, spec.scale, spec.seed)
    if spec.family == "hardcore":
        return regular_hardcore(spec.n, spec.degree, spec.scale, spec.seed)
    raise ParseError(f"unknown bench family {spec.family!r}")


def _build_bench_context(spec: BenchSpec) -> _BenchContext:
    return _BenchContext(spec, build_bench_model(spec))


def bench_trial(ctx: _BenchContext, job: tuple) -> tuple[int, int]:
    """One update of size k on the base model: (iterations, total resamples).

    chain: k constraint tables are redrawn. ising / hardcore: k edges are
    removed from the base graph and the update inserts them again.
    """
    k, i = job
    spec, base = ctx.spec, ctx.base
    rng = RngStream(spec.seed).split("k", k).split("trial", i)
    if spec.family == "chain":
        update = random_chain_update(base, k, spec.delta, rng.split("update"))
        post = apply_update(base, update)
        x0 = bootstrap_sample(base, rng.split("initial"))[0]
        _, stats = dynamic_sample(post, ResampleState(x0, vbl(base, update)), rng, spec.budget)
    elif spec.family == "ising":
        edges = rng.split("update").sample(base.edges, k)
        pre = apply_spin_update(base, SpinUpdate({e: 0.0 for e in edges}))
        x0 = spin_bootstrap_sample(pre, rng.split("initial"))[0]
        _, stats = spin_dynamic_sample(base, x0, edges, rng, spec.budget)
    else:
        edges = rng.split("update").sample(sorted(base.edges), k)
        pre = apply_hardcore_update(base, HardcoreUpdate(remove_edges=frozenset(edges)))
        x0 = hardcore_bootstrap_sample(pre, rng.split("initial"))[0]
        _, stats = hardcore_dynamic_sample(base, x0, edges, rng, spec.budget)
    return stats.iterations, stats.total_resamples


def _bench_job(ctx: _BenchContext, job: tuple):
    try:
        return bench_trial(ctx, job)
    except BudgetExceeded:
        return None


def _mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    return mean, math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1) / n)


def bench_rows(spec: BenchSpec, ks: Sequence[int], trials: int, mode: str = "seq") -> list[tuple]:
    """Rows (k, mean_iterations, mean_resamples, stderr of iterations).

    Raises BudgetExceeded if any trial runs out of rounds.
    """
    jobs = [(k, i) for k in ks for i in range(trials)]
    results = _map_trials(_IndexedJob(_bench_job, tuple(jobs)), len(jobs), mode, _build_bench_context, (spec,))
    if any(r is None for r in results):
        raise BudgetExceeded(ResampleState(()), TraceStats(), spec.budget or 0)
    rows = []
    for a, k in enumerate(ks):
        chunk = results[a * trials:(a + 1) * trials]
        it_mean, it_se = _mean_stderr([r[0] for r in chunk])
        rs_mean, _ = _mean_stderr([r[1] for r in chunk])
        rows.append((k, it_mean, rs_mean, it_se))
    return rows


@dataclass(frozen=True)
class _IndexedJob:
    fn: Callable
    jobs: tuple

    def __call__(self, ctx, i):
        return self.fn(ctx, self.jobs[i])


def cmd_bench(spec: BenchSpec, ks: Sequence[int], trials: int, mode: str, out: Optional[str]) -> int:
    if trials < 1 or any(k < 1 for k in ks) or not ks:
        raise ParseError("trials and every k must be positive")
    base = build_bench_model(spec)
    if spec.family == "chain":
        report = check_soft_condition(base, spec.delta)
        capacity = len(base.constraints)
    elif spec.family == "ising":
        report = check_ising_regime(base)
        capacity = len(base.edges)
    else:
        report = check_hardcore_regime(base)
        capacity = len(base.edges)
    if not report.satisfied:
        _log(f"regime not satisfied: {json.dumps(report.as_dict(), sort_keys=True)}")
        return EXIT_REGIME
    if max(ks) > capacity:
        raise ParseError(f"k={max(ks)} exceeds the {capacity} updatable factors")
    try:
        rows = bench_rows(spec, ks, trials, mode)
    except BudgetExceeded:
        _log("a bench trial exceeded the round budget")
        return EXIT_BUDGET
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for k, it, rs, se in rows:
        w.writerow((k, _fmt(it), _fmt(rs), _fmt(se)))
    if out is None:
        sys.stdout.write(buf.getvalue())
    else:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / "bench.csv").write_text(buf.getvalue(), encoding="utf-8")
    return EXIT_OK


# --- argument parsing -----------------------------------------------------------------


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _ks(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma separated list of integers")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynsampler", description="Dynamic perfect sampling under update streams.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, updates=True):
        sp.add_argument("--model", required=True)
        if updates:
            sp.add_argument("--updates")
        sp.add_argument("--seed", type=_u64, default=0)
        sp.add_argument("--trials", type=int, default=1)
        sp.add_argument("--budget", type=int)
        sp.add_argument("--mode", choices=("seq", "par"), default="seq")
        sp.add_argument("--out")

    s = sub.add_parser("sample", help="run update streams and write per-update statistics")
    common(s)
    s.add_argument("--timing", action="store_true", help="record wall-clock time (breaks byte-identical output)")

    v = sub.add_parser("verify", help="compare sampler output with exact enumeration")
    common(v)
    v.add_argument("--samples", type=int, default=200_000)
    v.add_argument("--tol", type=float, default=0.015)
    v.add_argument("--bucket-tol", type=float, default=0.05)
    v.add_argument("--no-kappa", action="store_true", help="mutation control: force correcting factors to 1")

    r = sub.add_parser("regime", help="check the convergence regime of a model")
    r.add_argument("--model", required=True)
    r.add_argument("--delta", type=float)

    b = sub.add_parser("bench", help="iterations and resamples against update size")
    b.add_argument("--family", choices=("chain", "ising", "hardcore"), default="chain")
    b.add_argument("--n", type=int, default=256)
    b.add_argument("--degree", type=int, default=3)
    b.add_argument("--delta", type=float, default=0.2)
    b.add_argument("--scale", type=float, default=0.9, help="fraction of the regime threshold (ising, hardcore)")
    b.add_argument("--ks", type=_ks, default=[1, 2, 4, 8, 16, 32, 64])
    b.add_argument("--seed", type=_u64, default=0)
    b.add_argument("--trials", type=int, default=100)
    b.add_argument("--budget", type=int)
    b.add_argument("--mode", choices=("seq", "par"), default="seq")
    b.add_argument("--out")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "regime":
            return cmd_regime(args.model, args.delta)
        if args.command == "bench":
            spec = BenchSpec(args.family, args.n, args.degree, args.delta, args.scale, args.seed, args.budget)
            if args.budget is not None and args.budget < 1:
                raise ParseError("budget must be at least 1")
            return cmd_bench(spec, args.ks, args.trials, args.mode, args.out)
        cfg = ExperimentConfig(args.model, args.updates, args.seed, args.trials, args.budget, args.mode, args.out)
        if args.command == "sample":
            return cmd_sample(cfg, args.timing)
        return cmd_verify(cfg, args.samples, args.tol, args.bucket_tol, args.no_kappa)
    except BudgetExceeded as exc:
        _log(f"error: {exc}")
        return EXIT_BUDGET
    except (ParseError, ModelError, StateSpaceTooLarge, ValueError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
