"""Command-line entry point: generate workloads, run variants, run the
full experiment matrix, and calibrate cost parameters.

Configuration lives in one JSON document; command-line flags override
individual fields. Identical invocations produce identical output files.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import calibrate as calibrate_mod
from . import metrics, workload as workload_mod
from .engine import ReconfigConfig, run, trace_to_jsonl
from .model import ClusterState, MallsimError
from .policy import PolicyConfig
from .reconfig import (
    ASYNC,
    BASELINE,
    MERGE,
    PARALLEL,
    CostParams,
    MamConfig,
    default_cost_params,
    load_cost_params,
    save_cost_params,
)
from .workload import WorkloadSpec, generate, load, save, to_static

STATIC = "Static"
VARIANTS = (STATIC, "Baseline", "Merge", "BaselineAsync", "MergeAsync")

OUTPUT_DIR_ENV = "MALLSIM_OUT"


class ConfigError(MallsimError):
    """Run configuration is unusable."""


@dataclass
class RunConfig:
    cluster: ClusterState = field(
        default_factory=lambda: ClusterState(total_nodes=31, ranks_per_node=112)
    )
    workload_spec: WorkloadSpec = field(default_factory=WorkloadSpec)
    workload_path: str | None = None
    variant: str = "Baseline"
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    cost_params: CostParams = None
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    output_dir: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.cost_params is None:
            self.cost_params = default_cost_params()


def _build_config(path: str | None, overrides: dict) -> RunConfig:
    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from exc
    doc.update({k: v for k, v in overrides.items() if v is not None})

    cluster_doc = doc.get("cluster", {})
    cluster = ClusterState(
        total_nodes=cluster_doc.get("total_nodes", 31),
        ranks_per_node=cluster_doc.get("ranks_per_node", 112),
    )
    wl_doc = doc.get("workload", {})
    spec = WorkloadSpec(
        job_count=wl_doc.get("job_count", 30),
        type_weights=wl_doc.get("type_weights"),
        mean_interarrival=wl_doc.get("mean_interarrival", 10.0),
        malleable=wl_doc.get("malleable", True),
        seed=wl_doc.get("seed", 1),
    )
    seeds = doc.get("seeds", [1, 2, 3, 4, 5])
    if "seed" in doc and doc["seed"] is not None:
        seeds = [doc["seed"]]
    repetitions = doc.get("repetitions")
    if repetitions is not None and repetitions != len(seeds):
        raise ConfigError(
            f"repetitions ({repetitions}) does not match the seed list ({len(seeds)})"
        )
    variant = doc.get("variant", "Baseline")
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    params_path = doc.get("cost_params_path")
    try:
        params = load_cost_params(params_path) if params_path else default_cost_params()
    except FileNotFoundError as exc:
        raise ConfigError(f"cost params file not found: {params_path}") from exc
    policy_doc = doc.get("policy", {})
    try:
        policy = PolicyConfig(
            backfill=policy_doc.get("backfill", True),
            start_size_rule=policy_doc.get("start_size_rule", "largest-fit"),
            expansion_rule=policy_doc.get("expansion_rule", "maximal"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    output_dir = os.environ.get(OUTPUT_DIR_ENV) or doc.get("output_dir", "out")
    return RunConfig(
        cluster=cluster,
        workload_spec=spec,
        workload_path=doc.get("workload_path"),
        variant=variant,
        seeds=list(seeds),
        cost_params=params,
        policy=policy,
        output_dir=output_dir,
        workers=doc.get("workers", 1),
    )


def variant_reconfig(variant: str, params: CostParams) -> ReconfigConfig:
    if variant == STATIC:
        return ReconfigConfig(params=params)
    method = BASELINE if variant.startswith("Baseline") else MERGE
    strategies = {PARALLEL}
    if variant.endswith("Async"):
        strategies.add(ASYNC)
    override = MamConfig(method, frozenset(strategies), user_override=True)
    return ReconfigConfig(override=override, params=params)


def _workload_for(config: RunConfig, seed: int, variant: str):
    if config.workload_path:
        wl = load(config.workload_path)
    else:
        from dataclasses import replace

        wl = generate(replace(config.workload_spec, seed=seed))
    return to_static(wl) if variant == STATIC else wl


def _execute_run(config: RunConfig, seed: int, variant: str, out_dir: Path) -> dict:
    wl = _workload_for(config, seed, variant)
    trace = run(
        wl,
        config.cluster,
        policy_config=config.policy,
        reconfig=variant_reconfig(variant, config.cost_params),
    )
    report = metrics.compute(trace, config.cluster)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics.write_job_csv(report, out_dir / "jobs.csv")
    metrics.write_utilization_csv(report, out_dir / "utilization.csv")
    metrics.write_report_json(report, out_dir / "report.json")
    (out_dir / "trace.jsonl").write_text(trace_to_jsonl(trace))
    row = report.scalar_summary()
    row["variant"] = variant
    row["seed"] = seed
    row["median_episode"] = metrics.median_episode_duration(trace)
    return row


def _execute_run_args(args) -> dict:
    return _execute_run(*args)


def cmd_generate(config: RunConfig, out: str | None) -> int:
    wl = generate(config.workload_spec)
    path = Path(out) if out else Path(config.output_dir) / "workload.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    save(wl, path)
    print(f"wrote {len(wl.jobs)} jobs to {path}")
    return 0


def cmd_run(config: RunConfig) -> int:
    seed = config.seeds[0]
    out_dir = Path(config.output_dir) / config.variant.lower() / f"seed_{seed}"
    row = _execute_run(config, seed, config.variant, out_dir)
    print(
        f"{config.variant} seed {seed}: makespan {row['makespan']:.2f} s, "
        f"utilization {row['mean_utilization']:.4f}"
    )
    return 0


def cmd_experiment(config: RunConfig) -> int:
    tasks = []
    for variant in VARIANTS:
        for seed in config.seeds:
            out_dir = Path(config.output_dir) / variant.lower() / f"seed_{seed}"
            tasks.append((config, seed, variant, out_dir))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_execute_run_args, tasks))
    else:
        rows = [_execute_run_args(t) for t in tasks]

    rows.sort(key=lambda r: (VARIANTS.index(r["variant"]), r["seed"]))
    reports_by_variant: dict[str, list[dict]] = {v: [] for v in VARIANTS}
    for row in rows:
        reports_by_variant[row["variant"]].append(row)

    summary_rows = []
    for variant in VARIANTS:
        per_seed = reports_by_variant[variant]
        agg = {"variant": variant}
        for key in per_seed[0]:
            if key in ("variant", "seed"):
                continue
            values = [r[key] for r in per_seed if r[key] is not None]
            agg[key] = metrics.median_lower(values) if values else None
        summary_rows.append(agg)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_summary_csv(summary_rows, out / "summary.csv")
    with open(out / "summary.json", "w") as fh:
        json.dump(
            {"aggregate": summary_rows, "runs": rows}, fh, indent=1, sort_keys=True
        )
        fh.write("\n")

    for agg in summary_rows:
        print(
            f"{agg['variant']:>14}: makespan {agg['makespan']:.2f} s, "
            f"utilization {agg['mean_utilization']:.4f}"
        )
    return 0


def cmd_calibrate(config: RunConfig, out: str | None) -> int:
    result = calibrate_mod.calibrate(seed=config.seeds[0])
    path = Path(out) if out else Path(config.output_dir) / "cost_params.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_cost_params(result.params, path)
    summary = result.summary()
    print(f"wrote {path}")
    print(
        f"accumulated resize: Baseline {summary['accum_baseline']:.2f} s "
        f"(target {calibrate_mod.ACCUM_BASELINE_TARGET}), "
        f"Merge {summary['accum_merge']:.2f} s "
        f"(target {calibrate_mod.ACCUM_MERGE_TARGET})"
    )
    print(
        f"median episode ratio: {summary['episode_ratio']:.3f} "
        f"(target {calibrate_mod.EPISODE_RATIO_TARGET})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mallsim",
        description="Discrete-event simulator for malleable HPC workloads",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "run", "experiment", "calibrate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the seed list with one seed")
        p.add_argument("--out", help="output directory (or file for generate/calibrate)")
        if name == "run":
            p.add_argument("--variant", choices=VARIANTS)
        if name == "experiment":
            p.add_argument("--workers", type=int, help="parallel simulation workers")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed}
    if getattr(args, "variant", None):
        overrides["variant"] = args.variant
    if getattr(args, "workers", None):
        overrides["workers"] = args.workers
    if args.command in ("run", "experiment") and args.out:
        overrides["output_dir"] = args.out
    try:
        config = _build_config(args.config, overrides)
    except (ConfigError, workload_mod.InvalidSpec) as exc:
        print(f"mallsim: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "generate":
            return cmd_generate(config, args.out)
        if args.command == "run":
            return cmd_run(config)
        if args.command == "experiment":
            return cmd_experiment(config)
        if args.command == "calibrate":
            return cmd_calibrate(config, args.out)
    except MallsimError as exc:
        print(f"mallsim: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
