"""Discrete-event simulator for malleable MPI job workloads on an HPC cluster."""

__version__ = "0.1.0"

from .model import ClusterState, JobSpec, JobState, apply_allocation
from .scalability import (
    ScalabilityProfile,
    default_profiles,
    efficiency,
    iteration_time,
    speedup,
    static_max_nodes,
)
from .workload import Workload, WorkloadSpec, generate
from .engine import ReconfigConfig, run, step
from .metrics import RunReport, aggregate, compute

__all__ = [
    "ClusterState",
    "JobSpec",
    "JobState",
    "ReconfigConfig",
    "RunReport",
    "ScalabilityProfile",
    "Workload",
    "WorkloadSpec",
    "aggregate",
    "apply_allocation",
    "compute",
    "default_profiles",
    "efficiency",
    "generate",
    "iteration_time",
    "run",
    "speedup",
    "static_max_nodes",
    "step",
]
