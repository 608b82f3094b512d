"""Shared domain vocabulary: cluster, jobs, allocations, simulated time.

Allocation granularity is whole nodes; a job's rank count is always
nodes * ranks_per_node (one rank per core). All times are seconds as floats.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional


class MallsimError(Exception):
    """Base class for all simulator errors."""


class InfeasibleAllocation(MallsimError):
    """Requested allocation change cannot be satisfied by idle nodes."""


class UnknownJob(MallsimError):
    """Operation referred to a job id absent from the allocation map."""


# Job types with their workload configuration: likelihood in the random mix,
# node bounds (smallest node count able to hold the problem, and the largest
# size that keeps per-node efficiency at least as good as the smallest),
# iteration count, and the 3D grid dimensions (n, m, l). The grid is
# decomposed along the n dimension into slices of (m+1)*(l+1) values.
SMALL = "Small"
MEDIUM = "Medium"
LARGE = "Large"
JOB_TYPES = (SMALL, MEDIUM, LARGE)


@dataclass(frozen=True)
class JobTypeConfig:
    likelihood: float
    min_nodes: int
    max_nodes: int
    iterations: int
    grid: tuple[int, int, int]  # (n, m, l)

    @property
    def slice_count(self) -> int:
        return self.grid[0]

    @property
    def slice_volume(self) -> int:
        """Values per slice along the decomposed dimension."""
        _, m, l = self.grid
        return (m + 1) * (l + 1)

    @property
    def problem_size(self) -> int:
        """Total values in one redistributed array."""
        return self.slice_count * self.slice_volume


TYPE_CONFIG: dict[str, JobTypeConfig] = {
    SMALL: JobTypeConfig(0.2, 1, 8, 20, (8192, 2048, 128)),
    MEDIUM: JobTypeConfig(0.2, 2, 6, 60, (8192, 4096, 128)),
    LARGE: JobTypeConfig(0.6, 4, 11, 100, (8192, 8192, 128)),
}

# Lifecycle phases of a job inside the simulation.
PENDING = "Pending"
RUNNING = "Running"
RESIZING = "Resizing"
DONE = "Done"

# Number of redistributed arrays per job (input field plus three velocity
# components), used as a volume multiplier in redistribution plans.
REDISTRIBUTED_ARRAYS = 4

DEFAULT_INHIBIT_WINDOW = 4


@dataclass(frozen=True)
class JobSpec:
    """Immutable description of a submitted job."""

    id: str
    jtype: str
    iterations: int
    min_nodes: int
    max_nodes: int
    malleable: bool
    submit_time: float
    inhibit_window: int = DEFAULT_INHIBIT_WINDOW

    def __post_init__(self):
        if self.jtype not in JOB_TYPES:
            raise ValueError(f"unknown job type {self.jtype!r}")
        if not (1 <= self.min_nodes <= self.max_nodes):
            raise ValueError(
                f"job {self.id}: need 1 <= min_nodes <= max_nodes, "
                f"got [{self.min_nodes}, {self.max_nodes}]"
            )
        if self.iterations < 1:
            raise ValueError(f"job {self.id}: iterations must be >= 1")
        if self.inhibit_window < 0:
            raise ValueError(f"job {self.id}: inhibit_window must be >= 0")
        if self.submit_time < 0:
            raise ValueError(f"job {self.id}: submit_time must be >= 0")


@dataclass
class JobState:
    """Mutable per-job simulation state."""

    spec: JobSpec
    phase: str = PENDING
    current_nodes: int = 0
    iterations_done: int = 0
    inhibit_remaining: int = 0
    pending_resize: Optional[object] = None  # open ResizeEpisode, if any
    start_nodes: int = 0  # allocation at job start, anchor for rank bookkeeping
    wait_time: float = 0.0
    run_time: float = 0.0
    start_time: Optional[float] = None
    end_time: Optional[float] = None


@dataclass(frozen=True)
class ClusterState:
    """Snapshot of the cluster allocation map at one simulated instant."""

    total_nodes: int
    ranks_per_node: int
    allocations: dict[str, int] = field(default_factory=dict)

    @property
    def allocated_nodes(self) -> int:
        return sum(self.allocations.values())

    @property
    def idle_nodes(self) -> int:
        return self.total_nodes - self.allocated_nodes

    def ranks(self, nodes: int) -> int:
        return nodes * self.ranks_per_node


def apply_allocation(cluster: ClusterState, job: str, nodes: int) -> ClusterState:
    """Return a new cluster state with `job` allocated `nodes` nodes.

    nodes == 0 releases the job's allocation entirely. Growth beyond the
    idle node pool raises InfeasibleAllocation; releasing or shrinking an
    unknown job raises UnknownJob.
    """
    if nodes < 0:
        raise InfeasibleAllocation(f"negative allocation for {job}")
    current = cluster.allocations.get(job)
    if nodes == 0:
        if current is None:
            raise UnknownJob(f"cannot release unknown job {job!r}")
        new_alloc = dict(cluster.allocations)
        del new_alloc[job]
        return replace(cluster, allocations=new_alloc)
    growth = nodes - (current or 0)
    if growth > cluster.idle_nodes:
        raise InfeasibleAllocation(
            f"job {job}: growth of {growth} exceeds {cluster.idle_nodes} idle nodes"
        )
    new_alloc = dict(cluster.allocations)
    new_alloc[job] = nodes
    return replace(cluster, allocations=new_alloc)


class ClockRegression(MallsimError):
    """Simulated time tried to move backwards."""


@dataclass
class SimClock:
    """Monotone non-decreasing simulated time in seconds."""

    now: float = 0.0

    def advance_to(self, t: float) -> float:
        if t < self.now:
            raise ClockRegression(f"clock cannot move from {self.now} back to {t}")
        self.now = t
        return self.now
