"""Scheduler decision layer: job starts and resize decisions.

try_start_jobs implements FCFS with first-fit backfill over the pending
queue; select_natural answers a running malleable job that asks whether to
grow, shrink, or stay, favoring whatever keeps the most nodes busy. Both
are pure functions over snapshots; the engine applies their effects.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .model import RUNNING, ClusterState, JobSpec, JobState, MallsimError

LARGEST_FIT = "largest-fit"
START_AT_MIN = "min"
EXPAND_MAXIMAL = "maximal"
EXPAND_SINGLE = "single-step"


class NotEligible(MallsimError):
    """Resize consultation requested for a job that may not resize now."""


@dataclass
class QueueState:
    """Pending jobs in submit order plus the set of boosted ids.

    Boosted jobs were promised nodes by a shrink decision and are
    considered ahead of the rest of the queue.
    """

    pending: list[str] = field(default_factory=list)
    priority_boosts: set[str] = field(default_factory=set)

    def push(self, job_id: str) -> None:
        self.pending.append(job_id)

    def remove(self, job_id: str) -> None:
        self.pending.remove(job_id)
        self.priority_boosts.discard(job_id)

    def boost(self, job_id: str) -> None:
        if job_id in self.pending:
            self.priority_boosts.add(job_id)

    def ordered(self) -> list[str]:
        boosted = [j for j in self.pending if j in self.priority_boosts]
        rest = [j for j in self.pending if j not in self.priority_boosts]
        return boosted + rest

    def __contains__(self, job_id: str) -> bool:
        return job_id in self.pending


@dataclass(frozen=True)
class PolicyConfig:
    backfill: bool = True
    start_size_rule: str = LARGEST_FIT
    expansion_rule: str = EXPAND_MAXIMAL

    def __post_init__(self):
        if self.start_size_rule not in (LARGEST_FIT, START_AT_MIN):
            raise ValueError(f"unknown start size rule {self.start_size_rule!r}")
        if self.expansion_rule not in (EXPAND_MAXIMAL, EXPAND_SINGLE):
            raise ValueError(f"unknown expansion rule {self.expansion_rule!r}")


@dataclass(frozen=True)
class ReconfigDecision:
    """Outcome of a resize consultation: the new node count (0 = stay put)
    and, for shrinks, the pending job the released nodes are meant for."""

    resultant_nodes: int = 0
    released_for: Optional[str] = None


def start_size(spec: JobSpec, idle: int, config: PolicyConfig) -> Optional[int]:
    """Node count this job would start with given `idle` free nodes, or
    None when it does not fit."""
    if idle < spec.min_nodes:
        return None
    if not spec.malleable or config.start_size_rule == START_AT_MIN:
        return spec.min_nodes if idle >= spec.min_nodes else None
    return min(spec.max_nodes, idle)


def _expansion_target(trigger: JobState, idle: int, config: PolicyConfig) -> int:
    if config.expansion_rule == EXPAND_SINGLE:
        return min(trigger.spec.max_nodes, trigger.current_nodes + min(1, idle))
    return min(trigger.spec.max_nodes, trigger.current_nodes + idle)


def select_natural(
    trigger: JobState,
    queue: QueueState,
    cluster: ClusterState,
    specs: Mapping[str, JobSpec],
    config: PolicyConfig = PolicyConfig(),
) -> ReconfigDecision:
    """Resize decision for one running malleable job.

    Empty queue: grow into the idle pool, up to the job's maximum. Otherwise
    look for the first pending job (submit order) that could start if this
    job gave nodes back, shrink just enough to admit it, and boost it.
    Failing that, grow anyway if nodes are idle. Any natural node count is
    allowed. Pending jobs already boosted by an in-flight shrink are
    skipped; their nodes are on the way.
    """
    if trigger.phase != RUNNING:
        raise NotEligible(f"{trigger.spec.id} is {trigger.phase}, not Running")
    if not trigger.spec.malleable:
        raise NotEligible(f"{trigger.spec.id} is not malleable")
    if trigger.inhibit_remaining > 0:
        raise NotEligible(f"{trigger.spec.id} is inhibited")
    if trigger.pending_resize is not None:
        raise NotEligible(f"{trigger.spec.id} already has a resize in flight")

    idle = cluster.idle_nodes
    current = trigger.current_nodes

    if not queue.pending:
        target = _expansion_target(trigger, idle, config)
        if idle > 0 and target > current:
            return ReconfigDecision(resultant_nodes=target)
        return ReconfigDecision()

    for job_id in queue.pending:
        if job_id in queue.priority_boosts:
            continue
        need = specs[job_id].min_nodes
        shrunk = current + idle - need
        if shrunk < current and shrunk >= trigger.spec.min_nodes:
            return ReconfigDecision(resultant_nodes=shrunk, released_for=job_id)

    target = _expansion_target(trigger, idle, config)
    if idle > 0 and target > current:
        return ReconfigDecision(resultant_nodes=target)
    return ReconfigDecision()


def try_start_jobs(
    queue: QueueState,
    cluster: ClusterState,
    clock,
    specs: Mapping[str, JobSpec],
    config: PolicyConfig = PolicyConfig(),
) -> list[tuple[str, int, float]]:
    """Jobs that can start right now, as (job id, nodes, start time) tuples.

    Boosted jobs are considered first, then the rest in submit order. The
    head starts whenever it fits; with backfill enabled, later jobs that fit
    the remaining idle nodes start too. Pure: the caller applies the starts.
    """
    idle = cluster.idle_nodes
    starts: list[tuple[str, int, float]] = []
    for job_id in queue.ordered():
        size = start_size(specs[job_id], idle, config)
        if size is not None:
            starts.append((job_id, size, clock.now))
            idle -= size
        elif not config.backfill:
            break
        if idle <= 0:
            break
    return starts
