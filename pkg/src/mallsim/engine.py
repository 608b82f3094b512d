"""Deterministic discrete-event core.

Processes job arrivals, per-iteration sync points, resize completions, and
job terminations in (time, seq) order. At every non-inhibited sync point of
a malleable job the resize policy is consulted; a nonzero decision opens a
resize episode that either blocks the job (synchronous) or lets it keep
iterating at a reduced rate until the background work finishes
(asynchronous). Identical inputs always produce identical traces.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Optional

from .model import (
    DONE,
    PENDING,
    RESIZING,
    RUNNING,
    TYPE_CONFIG,
    ClusterState,
    JobSpec,
    JobState,
    MallsimError,
    SimClock,
    apply_allocation,
)
from .policy import PolicyConfig, QueueState, select_natural, try_start_jobs
from .reconfig import CostParams, MamConfig, ReconfigPlan, build_plan, choose_config
from .scalability import ScalabilityProfile, iteration_time

ARRIVAL = "Arrival"
ITERATION_END = "IterationEnd"
RESIZE_DONE = "ResizeDone"
JOB_DONE = "JobDone"


class StalledSimulation(MallsimError):
    """No event can fire although jobs remain unfinished."""


class EmptyQueue(MallsimError):
    """step() called with no events left."""


@dataclass(frozen=True)
class Event:
    """One processed event, with the job's allocation around it."""

    time: float
    kind: str
    job: str
    seq: int
    nodes_before: int
    nodes_after: int


@dataclass
class ResizeEpisode:
    """One resize of one job, from decision to applied allocation."""

    job: str
    plan: ReconfigPlan
    t_start: float
    t_complete: float  # when the resize work itself is done
    asynchronous: bool
    from_nodes: int
    to_nodes: int
    released_for: Optional[str] = None
    t_end: Optional[float] = None  # when the new allocation takes effect
    iterations_overlapped: int = 0

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass
class SimulationTrace:
    """Everything the metrics layer needs about one run."""

    job_specs: dict[str, JobSpec] = field(default_factory=dict)
    events: list[Event] = field(default_factory=list)
    allocation_snapshots: list[tuple[float, dict[str, int]]] = field(default_factory=list)
    resize_episodes: list[ResizeEpisode] = field(default_factory=list)
    job_states: dict[str, JobState] = field(default_factory=dict)
    queue_empty_time: Optional[float] = None

    @property
    def first_arrival(self) -> float:
        return min(e.time for e in self.events if e.kind == ARRIVAL)

    @property
    def last_done(self) -> float:
        return max(e.time for e in self.events if e.kind == JOB_DONE)

    def complete(self) -> bool:
        return all(s.phase == DONE for s in self.job_states.values())


@dataclass(frozen=True)
class ReconfigConfig:
    """Per-run reconfiguration setup: a forced method/strategy combination
    (experiment variants) or None to let the engine pick per episode."""

    override: Optional[MamConfig] = None
    params: CostParams = field(default_factory=CostParams)


@dataclass
class SimulationState:
    clock: SimClock
    cluster: ClusterState
    jobs: dict[str, JobState]
    queue: QueueState
    profiles: dict[str, ScalabilityProfile]
    policy_config: PolicyConfig
    reconfig: ReconfigConfig
    trace: SimulationTrace
    heap: list = field(default_factory=list)
    seq: int = 0
    arrivals_pending: int = 0

    # -- event plumbing ---------------------------------------------------

    def schedule(self, time: float, kind: str, job: str) -> None:
        heapq.heappush(self.heap, (time, self.seq, kind, job))
        self.seq += 1

    def _snapshot(self) -> None:
        self.trace.allocation_snapshots.append(
            (self.clock.now, dict(self.cluster.allocations))
        )

    def _allocate(self, job_id: str, nodes: int) -> None:
        self.cluster = apply_allocation(self.cluster, job_id, nodes)
        self._snapshot()

    def _iter_seconds(self, job: JobState, nodes: int) -> float:
        return iteration_time(self.profiles[job.spec.jtype], nodes)

    # -- job starts -------------------------------------------------------

    def _try_starts(self) -> None:
        starts = try_start_jobs(
            self.queue, self.cluster, self.clock, self.trace.job_specs, self.policy_config
        )
        for job_id, nodes, t in starts:
            job = self.jobs[job_id]
            self.queue.remove(job_id)
            job.phase = RUNNING
            job.current_nodes = nodes
            job.start_nodes = nodes
            job.start_time = t
            job.wait_time = t - job.spec.submit_time
            self._allocate(job_id, nodes)
            self.schedule(t + self._iter_seconds(job, nodes), ITERATION_END, job_id)

    # -- resize episodes --------------------------------------------------

    def _open_episode(self, job: JobState, decision) -> None:
        now = self.clock.now
        rpn = self.cluster.ranks_per_node
        ns_nodes, nt_nodes = job.current_nodes, decision.resultant_nodes
        config = choose_config(
            ns_nodes * rpn,
            nt_nodes * rpn,
            job.start_nodes * rpn,
            self.reconfig.override,
        )
        cfg = TYPE_CONFIG[job.spec.jtype]
        plan = build_plan(
            ns_nodes * rpn,
            nt_nodes * rpn,
            cfg.slice_count,
            cfg.slice_volume,
            cfg.problem_size,
            config,
            self.reconfig.params,
        )
        work = plan.async_duration if config.asynchronous else plan.sync_duration
        episode = ResizeEpisode(
            job=job.spec.id,
            plan=plan,
            t_start=now,
            t_complete=now + work,
            asynchronous=config.asynchronous,
            from_nodes=ns_nodes,
            to_nodes=nt_nodes,
            released_for=decision.released_for,
        )
        job.pending_resize = episode
        self.trace.resize_episodes.append(episode)
        if decision.released_for is not None:
            self.queue.boost(decision.released_for)
        if nt_nodes > ns_nodes:
            # Growth claims its nodes up front; both process groups coexist
            # for the span of the episode.
            self._allocate(job.spec.id, nt_nodes)
        if config.asynchronous:
            dilated = self._iter_seconds(job, ns_nodes) / plan.overlap_speedup
            self.schedule(now + dilated, ITERATION_END, job.spec.id)
        else:
            job.phase = RESIZING
            self.schedule(episode.t_complete, RESIZE_DONE, job.spec.id)

    def _complete_episode(self, job: JobState) -> None:
        episode = job.pending_resize
        episode.t_end = self.clock.now
        if episode.to_nodes < episode.from_nodes:
            # Shrinks give their nodes back only once the resize has landed.
            self._allocate(job.spec.id, episode.to_nodes)
        job.current_nodes = episode.to_nodes
        job.inhibit_remaining = job.spec.inhibit_window
        job.pending_resize = None
        if episode.to_nodes < episode.from_nodes:
            self._try_starts()

    # -- event handlers ---------------------------------------------------

    def _on_arrival(self, job: JobState) -> None:
        self.arrivals_pending -= 1
        self.queue.push(job.spec.id)
        self._try_starts()

    def _on_iteration_end(self, job: JobState) -> None:
        now = self.clock.now
        job.iterations_done += 1
        episode = job.pending_resize
        if episode is not None:
            episode.iterations_overlapped += 1
        finished = job.iterations_done >= job.spec.iterations

        if finished:
            if episode is not None and now < episode.t_complete:
                # The job must wait for the background resize before it can
                # finalize; the episode closes together with the job.
                self.schedule(episode.t_complete, JOB_DONE, job.spec.id)
            else:
                if episode is not None:
                    self._complete_episode(job)
                self.schedule(now, JOB_DONE, job.spec.id)
            return

        if episode is not None:
            if now >= episode.t_complete:
                self._complete_episode(job)
                self.schedule(
                    now + self._iter_seconds(job, job.current_nodes),
                    ITERATION_END,
                    job.spec.id,
                )
            else:
                dilated = (
                    self._iter_seconds(job, episode.from_nodes)
                    / episode.plan.overlap_speedup
                )
                self.schedule(now + dilated, ITERATION_END, job.spec.id)
            return

        may_consult = job.spec.malleable and job.inhibit_remaining == 0
        if job.inhibit_remaining > 0:
            job.inhibit_remaining -= 1
        if may_consult:
            decision = select_natural(
                job, self.queue, self.cluster, self.trace.job_specs, self.policy_config
            )
            if decision.resultant_nodes not in (0, job.current_nodes):
                self._open_episode(job, decision)
                return
        self.schedule(
            now + self._iter_seconds(job, job.current_nodes), ITERATION_END, job.spec.id
        )

    def _on_resize_done(self, job: JobState) -> None:
        self._complete_episode(job)
        job.phase = RUNNING
        self.schedule(
            self.clock.now + self._iter_seconds(job, job.current_nodes),
            ITERATION_END,
            job.spec.id,
        )

    def _on_job_done(self, job: JobState) -> None:
        if job.pending_resize is not None:
            self._complete_episode(job)
        job.phase = DONE
        job.end_time = self.clock.now
        job.run_time = self.clock.now - job.start_time
        self._allocate(job.spec.id, 0)
        self._try_starts()


_HANDLERS = {
    ARRIVAL: SimulationState._on_arrival,
    ITERATION_END: SimulationState._on_iteration_end,
    RESIZE_DONE: SimulationState._on_resize_done,
    JOB_DONE: SimulationState._on_job_done,
}


def step(state: SimulationState) -> SimulationState:
    """Consume exactly one event, mutating and returning the state."""
    if not state.heap:
        raise EmptyQueue("no events left to process")
    time, seq, kind, job_id = heapq.heappop(state.heap)
    state.clock.advance_to(time)
    job = state.jobs[job_id]
    before = state.cluster.allocations.get(job_id, 0)
    _HANDLERS[kind](state, job)
    after = state.cluster.allocations.get(job_id, 0)
    state.trace.events.append(Event(time, kind, job_id, seq, before, after))
    if (
        state.trace.queue_empty_time is None
        and state.arrivals_pending == 0
        and not state.queue.pending
    ):
        state.trace.queue_empty_time = time
    return state


def init_state(
    workload,
    cluster: ClusterState,
    policy_config: PolicyConfig = PolicyConfig(),
    reconfig: ReconfigConfig = ReconfigConfig(),
    profiles: Optional[dict[str, ScalabilityProfile]] = None,
) -> SimulationState:
    if not workload.jobs:
        raise ValueError("workload is empty")
    if profiles is None:
        from .scalability import default_profiles

        profiles = default_profiles()
    for spec in workload.jobs:
        if spec.jtype not in profiles:
            raise ValueError(f"no scalability profile for job type {spec.jtype!r}")
        if spec.min_nodes < profiles[spec.jtype].base_nodes:
            raise ValueError(
                f"job {spec.id}: min_nodes {spec.min_nodes} below the "
                f"{spec.jtype} profile minimum {profiles[spec.jtype].base_nodes}"
            )
    trace = SimulationTrace(job_specs={s.id: s for s in workload.jobs})
    state = SimulationState(
        clock=SimClock(),
        cluster=cluster,
        jobs={s.id: JobState(spec=s, phase=PENDING) for s in workload.jobs},
        queue=QueueState(),
        profiles=profiles,
        policy_config=policy_config,
        reconfig=reconfig,
        trace=trace,
    )
    state.trace.job_states = state.jobs
    state.arrivals_pending = len(workload.jobs)
    for spec in workload.jobs:
        state.schedule(spec.submit_time, ARRIVAL, spec.id)
    return state


def run(
    workload,
    cluster: ClusterState,
    policy_config: PolicyConfig = PolicyConfig(),
    reconfig: ReconfigConfig = ReconfigConfig(),
    profiles: Optional[dict[str, ScalabilityProfile]] = None,
) -> SimulationTrace:
    """Simulate a workload to quiescence and return its trace."""
    state = init_state(workload, cluster, policy_config, reconfig, profiles)
    while state.heap:
        step(state)
    if not state.trace.complete():
        unfinished = sorted(
            j for j, s in state.jobs.items() if s.phase != DONE
        )
        raise StalledSimulation(f"no events left but jobs remain: {unfinished}")
    return state.trace


def trace_to_jsonl(trace: SimulationTrace) -> str:
    """Line-delimited export of the event log, stable for fixed inputs."""
    lines = [
        json.dumps(
            {
                "time": e.time,
                "kind": e.kind,
                "job": e.job,
                "nodes_before": e.nodes_before,
                "nodes_after": e.nodes_after,
            },
            separators=(",", ":"),
        )
        for e in trace.events
    ]
    return "\n".join(lines) + "\n"
