"""Iteration-time profiles and efficiency-based job sizing.

A profile maps node counts to measured per-iteration times for one job type.
Speedup is relative to the smallest feasible node count, efficiency divides
that speedup by the resource growth factor, and a job's static size is the
largest node count whose efficiency has not yet dropped below the anchor.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from importlib import resources

from .model import MallsimError

PROFILE_FIELDS = ("jtype", "nodes", "seconds")


class BelowMinimum(MallsimError):
    """Node count below the smallest sampled (feasible) configuration."""


class DegenerateSeries(UserWarning):
    """Normalization requested on a constant series (max == min)."""


class MalformedProfile(MallsimError):
    """Profile table file violates the (jtype, nodes, seconds) schema."""


@dataclass(frozen=True)
class ScalabilityProfile:
    jtype: str
    base_nodes: int
    samples: dict[int, float]  # node count -> iteration seconds

    def __post_init__(self):
        if self.base_nodes not in self.samples:
            raise ValueError(f"{self.jtype}: no sample at base_nodes={self.base_nodes}")
        keys = sorted(self.samples)
        if keys != list(range(self.base_nodes, self.base_nodes + len(keys))):
            raise ValueError(f"{self.jtype}: samples must cover a contiguous node range")
        if keys[0] != self.base_nodes:
            raise ValueError(f"{self.jtype}: samples must start at base_nodes")
        if any(t <= 0 for t in self.samples.values()):
            raise ValueError(f"{self.jtype}: iteration times must be positive")

    @property
    def max_sampled(self) -> int:
        return max(self.samples)


def iteration_time(profile: ScalabilityProfile, nodes: int) -> float:
    """Tabulated iteration seconds; flat extrapolation above the last sample."""
    if nodes < profile.base_nodes:
        raise BelowMinimum(
            f"{profile.jtype} needs at least {profile.base_nodes} nodes, got {nodes}"
        )
    if nodes > profile.max_sampled:
        return profile.samples[profile.max_sampled]
    return profile.samples[nodes]


def speedup(profile: ScalabilityProfile, nodes: int) -> float:
    return profile.samples[profile.base_nodes] / iteration_time(profile, nodes)


def efficiency(profile: ScalabilityProfile, nodes: int) -> float:
    return speedup(profile, nodes) / (nodes / profile.base_nodes)


def normalized_efficiency(series: list[float]) -> list[float]:
    """Map a series linearly onto [0, 1] with min -> 0 and max -> 1.

    A constant series cannot be normalized; it yields all zeros and a
    DegenerateSeries warning.
    """
    if not series:
        raise ValueError("cannot normalize an empty series")
    lo, hi = min(series), max(series)
    if hi == lo:
        warnings.warn(DegenerateSeries("series is constant, returning zeros"))
        return [0.0] * len(series)
    return [(e - lo) / (hi - lo) for e in series]


def static_max_nodes(profile: ScalabilityProfile) -> int:
    """Largest node count whose efficiency is still >= 1 (the base anchor).

    Scans contiguously upward from base_nodes and stops at the first drop,
    so a later recovery above 1 does not count.
    """
    best = profile.base_nodes
    for nodes in range(profile.base_nodes + 1, profile.max_sampled + 1):
        if efficiency(profile, nodes) < 1.0:
            break
        best = nodes
    return best


def _parse_rows(rows, source: str) -> dict[str, ScalabilityProfile]:
    by_type: dict[str, dict[int, float]] = {}
    for lineno, row in rows:
        try:
            jtype = row["jtype"]
            nodes = int(row["nodes"])
            seconds = float(row["seconds"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedProfile(f"{source}:{lineno}: {exc}") from exc
        if seconds <= 0:
            raise MalformedProfile(f"{source}:{lineno}: non-positive iteration time")
        samples = by_type.setdefault(jtype, {})
        if nodes in samples:
            raise MalformedProfile(f"{source}:{lineno}: duplicate ({jtype}, {nodes})")
        samples[nodes] = seconds
    if not by_type:
        raise MalformedProfile(f"{source}: no profile records")
    profiles = {}
    for jtype, samples in by_type.items():
        try:
            profiles[jtype] = ScalabilityProfile(jtype, min(samples), samples)
        except ValueError as exc:
            raise MalformedProfile(f"{source}: {exc}") from exc
    return profiles


def load_profiles(path) -> dict[str, ScalabilityProfile]:
    """Load profiles from a CSV table with columns jtype, nodes, seconds."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return _parse_rows(enumerate(reader, start=2), str(path))


def save_profiles(profiles: dict[str, ScalabilityProfile], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROFILE_FIELDS)
        for jtype in sorted(profiles):
            profile = profiles[jtype]
            for nodes in sorted(profile.samples):
                writer.writerow([jtype, nodes, profile.samples[nodes]])


def default_profiles() -> dict[str, ScalabilityProfile]:
    """The iteration-time dataset shipped with the package."""
    ref = resources.files("mallsim.data").joinpath("iteration_times.csv")
    with ref.open(newline="") as fh:
        reader = csv.DictReader(fh)
        return _parse_rows(enumerate(reader, start=2), "iteration_times.csv")
