"""Deployment result types shared by the sequential and joint pipelines."""

from __future__ import annotations

from dataclasses import dataclass

from .fleet import TripChain
from .select import LineSelection


@dataclass(frozen=True)
class StageInfo:
    """Solver outcome of one pipeline stage, for gap reporting."""

    stage: str
    status: str
    gap: float
    nodes: int = 0


@dataclass(frozen=True)
class LineDeployment:
    """One line's share of a deployment.

    saturation_rewards holds the per-sensor-count optima probed while
    profiling the line (index k = reward with k+1 sensors); populated by
    the joint pipeline only, so reports can chart saturation without
    re-solving anything.
    """

    line_id: int
    min_fleet_size: int
    idle_cap: float | None
    saturation_count: int | None
    sensors: int
    line_reward: float
    chains: tuple[TripChain, ...]
    saturation_rewards: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Deployment:
    """A full deployment: which chains run, which carry sensors, and the
    reward every report must be able to recompute from them."""

    approach: str
    selection: LineSelection
    lines: tuple[LineDeployment, ...]
    budget: int
    sensors_used: int
    reward: float
    mode: str | None
    stages: tuple[StageInfo, ...]
    fingerprint: str | None = None

    def instrumented_trip_ids(self) -> tuple[int, ...]:
        return tuple(
            t
            for line in self.lines
            for chain in line.chains
            if chain.instrumented
            for t in chain.trip_ids
        )

    @property
    def worst_gap(self) -> float:
        return max((s.gap for s in self.stages), default=0.0)

    @property
    def hit_limit(self) -> bool:
        return any(s.status in ("feasible", "limit-reached") for s in self.stages)
