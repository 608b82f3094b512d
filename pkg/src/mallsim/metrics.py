"""Workload metrics computed from simulation traces.

Makespan, per-type median wait/run/turnaround, the allocation-based
utilization timeline and its time-weighted mean, and resize statistics.
Medians use the lower-middle convention for even counts.
"""
from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from typing import Optional

from .engine import SimulationTrace
from .model import JOB_TYPES, ClusterState, MallsimError


class IncompleteTrace(MallsimError):
    """Metrics requested on a trace with unfinished jobs."""


def median_lower(values):
    """Median with the lower of the two middle elements for even counts."""
    return statistics.median_low(values)


@dataclass
class RunReport:
    makespan: float
    per_type: dict[str, dict[str, Optional[float]]]  # jtype -> metric -> median
    mean_utilization: float
    utilization_series: list[tuple[float, float]]
    accumulated_resize: float
    overlapped_iterations: int
    queue_empty_time: Optional[float]
    job_rows: list[dict] = field(default_factory=list)

    def scalar_summary(self) -> dict:
        row = {
            "makespan": self.makespan,
            "mean_utilization": self.mean_utilization,
            "accumulated_resize": self.accumulated_resize,
            "overlapped_iterations": self.overlapped_iterations,
            "queue_empty_time": self.queue_empty_time,
        }
        for jtype in JOB_TYPES:
            for metric in ("wait", "run", "turnaround"):
                row[f"{jtype.lower()}_{metric}"] = self.per_type[jtype][metric]
        return row


def utilization_timeline(trace: SimulationTrace, cluster: ClusterState):
    """Step series of allocated-node fraction between first arrival and
    last completion, plus its time-weighted integral."""
    t0, t1 = trace.first_arrival, trace.last_done
    series: list[tuple[float, float]] = []
    integral = 0.0
    prev_t, prev_nodes = t0, 0
    for t, allocations in trace.allocation_snapshots:
        nodes = sum(allocations.values())
        if t > prev_t:
            integral += prev_nodes * (t - prev_t)
        if series and series[-1][0] == t:
            series[-1] = (t, nodes / cluster.total_nodes)
        else:
            series.append((t, nodes / cluster.total_nodes))
        prev_t, prev_nodes = t, nodes
    if t1 > prev_t:
        integral += prev_nodes * (t1 - prev_t)
    return series, integral


def compute(trace: SimulationTrace, cluster: ClusterState) -> RunReport:
    """Reduce one trace to its report."""
    if not trace.complete():
        unfinished = sorted(j for j, s in trace.job_states.items() if s.end_time is None)
        raise IncompleteTrace(f"jobs not finished: {unfinished}")

    t0, t1 = trace.first_arrival, trace.last_done
    makespan = t1 - t0

    job_rows = []
    for job_id in sorted(trace.job_states):
        s = trace.job_states[job_id]
        job_rows.append(
            {
                "id": job_id,
                "jtype": s.spec.jtype,
                "submit": s.spec.submit_time,
                "start": s.start_time,
                "end": s.end_time,
                "wait": s.wait_time,
                "run": s.run_time,
                "turnaround": s.wait_time + s.run_time,
            }
        )

    per_type: dict[str, dict[str, Optional[float]]] = {}
    for jtype in JOB_TYPES:
        rows = [r for r in job_rows if r["jtype"] == jtype]
        per_type[jtype] = {
            metric: (median_lower([r[metric] for r in rows]) if rows else None)
            for metric in ("wait", "run", "turnaround")
        }

    series, node_seconds = utilization_timeline(trace, cluster)
    mean_utilization = (
        node_seconds / (cluster.total_nodes * makespan) if makespan > 0 else 1.0
    )

    accumulated = sum(e.duration for e in trace.resize_episodes)
    overlapped = sum(e.iterations_overlapped for e in trace.resize_episodes)

    return RunReport(
        makespan=makespan,
        per_type=per_type,
        mean_utilization=mean_utilization,
        utilization_series=series,
        accumulated_resize=accumulated,
        overlapped_iterations=overlapped,
        queue_empty_time=trace.queue_empty_time,
        job_rows=job_rows,
    )


def aggregate(reports: list[RunReport]) -> dict:
    """Element-wise medians of scalar metrics across repetitions."""
    if not reports:
        raise ValueError("need at least one report")
    keys = reports[0].scalar_summary().keys()
    out = {}
    for key in keys:
        values = [r.scalar_summary()[key] for r in reports]
        present = [v for v in values if v is not None]
        out[key] = median_lower(present) if present else None
    return out


def median_episode_duration(trace: SimulationTrace) -> Optional[float]:
    durations = [e.duration for e in trace.resize_episodes]
    return median_lower(durations) if durations else None


# -- exports ---------------------------------------------------------------

JOB_CSV_FIELDS = (
    "id", "jtype", "submit", "start", "end", "wait", "run", "turnaround",
)


def write_job_csv(report: RunReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(JOB_CSV_FIELDS)
        for row in report.job_rows:
            writer.writerow([row[f] for f in JOB_CSV_FIELDS])


def write_utilization_csv(report: RunReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "utilization"])
        for t, u in report.utilization_series:
            writer.writerow([t, u])


def write_report_json(report: RunReport, path) -> None:
    doc = report.scalar_summary()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


SUMMARY_FIELDS = (
    "variant", "makespan", "mean_utilization", "accumulated_resize",
    "overlapped_iterations", "queue_empty_time",
)


def write_summary_csv(rows: list[dict], path) -> None:
    """Aggregate table: one row per experiment variant."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        for row in rows:
            writer.writerow([row[f] for f in SUMMARY_FIELDS])
