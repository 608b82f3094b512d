"""Workload generation and serialization.

Jobs are drawn from a weighted type mix with exponential interarrival gaps;
per-type node bounds and iteration counts come from the job type table.
Generation is a pure function of the spec, so a seed pins the workload.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace

from .model import JOB_TYPES, TYPE_CONFIG, JobSpec, MallsimError

WORKLOAD_FIELDS = (
    "id", "jtype", "iterations", "min_nodes", "max_nodes", "malleable", "submit_time",
)


class InvalidSpec(MallsimError):
    """Workload spec violates weight or positivity constraints."""


class MalformedFile(MallsimError):
    """Workload file is structurally or semantically invalid."""


@dataclass(frozen=True)
class WorkloadSpec:
    job_count: int = 30
    type_weights: dict[str, float] = None
    mean_interarrival: float = 10.0
    malleable: bool = True
    seed: int = 1

    def __post_init__(self):
        if self.type_weights is None:
            object.__setattr__(
                self, "type_weights", {t: TYPE_CONFIG[t].likelihood for t in JOB_TYPES}
            )

    def validate(self):
        if self.job_count < 1:
            raise InvalidSpec("job_count must be >= 1")
        if self.mean_interarrival <= 0:
            raise InvalidSpec("mean_interarrival must be positive")
        unknown = set(self.type_weights) - set(JOB_TYPES)
        if unknown:
            raise InvalidSpec(f"unknown job types in weights: {sorted(unknown)}")
        if any(w < 0 for w in self.type_weights.values()):
            raise InvalidSpec("type weights must be non-negative")
        if abs(sum(self.type_weights.values()) - 1.0) > 1e-9:
            raise InvalidSpec("type weights must sum to 1")


@dataclass(frozen=True)
class Workload:
    jobs: tuple[JobSpec, ...]

    def __post_init__(self):
        times = [j.submit_time for j in self.jobs]
        if times != sorted(times):
            raise ValueError("submit times must be non-decreasing")


def generate(spec: WorkloadSpec) -> Workload:
    """Draw a workload: types by weight, gaps i.i.d. exponential.

    With malleable=False every job is pinned to its type's static size
    (min == max == the type's max nodes).
    """
    spec.validate()
    rng = random.Random(spec.seed)
    # Fixed type order keeps the draw sequence independent of dict ordering.
    types = [t for t in JOB_TYPES if spec.type_weights.get(t, 0.0) > 0]
    weights = [spec.type_weights[t] for t in types]
    width = max(3, len(str(spec.job_count - 1)))
    jobs = []
    t = 0.0
    for i in range(spec.job_count):
        t += rng.expovariate(1.0 / spec.mean_interarrival)
        jtype = rng.choices(types, weights)[0]
        cfg = TYPE_CONFIG[jtype]
        if spec.malleable:
            lo, hi = cfg.min_nodes, cfg.max_nodes
        else:
            lo = hi = cfg.max_nodes
        jobs.append(
            JobSpec(
                id=f"j{i:0{width}d}",
                jtype=jtype,
                iterations=cfg.iterations,
                min_nodes=lo,
                max_nodes=hi,
                malleable=spec.malleable,
                submit_time=t,
            )
        )
    return Workload(tuple(jobs))


def to_static(workload: Workload) -> Workload:
    """Rigid twin of a workload: same jobs, pinned to their static sizes."""
    jobs = tuple(
        replace(
            j,
            min_nodes=TYPE_CONFIG[j.jtype].max_nodes,
            max_nodes=TYPE_CONFIG[j.jtype].max_nodes,
            malleable=False,
        )
        for j in workload.jobs
    )
    return Workload(jobs)


def save(workload: Workload, path) -> None:
    doc = {
        "jobs": [
            {field: getattr(j, field) for field in WORKLOAD_FIELDS}
            for j in workload.jobs
        ]
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load(path) -> Workload:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "jobs" not in doc:
        raise MalformedFile(f"{path}: expected an object with a 'jobs' list")
    records = doc["jobs"]
    if not isinstance(records, list) or not records:
        raise MalformedFile(f"{path}: 'jobs' must be a non-empty list")
    jobs = []
    for idx, rec in enumerate(records):
        missing = [f for f in WORKLOAD_FIELDS if f not in rec]
        if missing:
            raise MalformedFile(f"{path}: job #{idx}: missing fields {missing}")
        extra = sorted(set(rec) - set(WORKLOAD_FIELDS))
        if extra:
            raise MalformedFile(f"{path}: job #{idx}: unknown fields {extra}")
        try:
            jobs.append(
                JobSpec(
                    id=rec["id"],
                    jtype=rec["jtype"],
                    iterations=rec["iterations"],
                    min_nodes=rec["min_nodes"],
                    max_nodes=rec["max_nodes"],
                    malleable=rec["malleable"],
                    submit_time=rec["submit_time"],
                )
            )
        except (TypeError, ValueError) as exc:
            raise MalformedFile(f"{path}: job #{idx}: {exc}") from exc
    ids = [j.id for j in jobs]
    if len(set(ids)) != len(ids):
        raise MalformedFile(f"{path}: duplicate job ids")
    try:
        return Workload(tuple(jobs))
    except ValueError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
