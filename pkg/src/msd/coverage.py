"""Space-time coverage: which (grid, interval) pairs a trip senses, and the
weighted reward of a covered set."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .instance import Instance, SensingInterval, Trip

TICKS_PER_MINUTE = 60


def _occupancy_ticks(trip: Trip, tpm: int) -> list[tuple[int, int, int]]:
    """(grid id, enter tick, leave tick) per route cell; spans partition the
    trip duration exactly."""
    start = trip.start * tpm
    span = trip.duration * tpm
    bounds = [start + round(f * span) for _, f in trip.route]
    bounds.append(start + span)
    return [
        (grid_id, bounds[k], bounds[k + 1])
        for k, (grid_id, _) in enumerate(trip.route)
    ]


def trip_coverage(
    trip: Trip,
    intervals: tuple[SensingInterval, ...],
    ticks_per_minute: int = TICKS_PER_MINUTE,
) -> frozenset[tuple[int, int]]:
    """(grid id, interval index) pairs the trip occupies for positive time.

    Cell occupancy and sensing intervals are both half-open, so touching at a
    boundary covers nothing. A trip outside the horizon covers the empty set.
    """
    pairs = set()
    for grid_id, lo, hi in _occupancy_ticks(trip, ticks_per_minute):
        for iv in intervals:
            iv_lo = iv.start * ticks_per_minute
            if iv_lo >= hi:
                break
            if max(lo, iv_lo) < min(hi, iv.end * ticks_per_minute):
                pairs.add((grid_id, iv.index))
    return frozenset(pairs)


def sensing_reward(
    covered: Iterable[tuple[int, int]],
    grid_weights: dict[int, float],
    interval_weights: dict[int, float],
) -> float:
    """Weighted share of covered space-time pairs, in [0, 1] when each weight
    family sums to 1. Exactly-rounded sum, so the result does not depend on
    iteration order."""
    return math.fsum(grid_weights[g] * interval_weights[t] for g, t in set(covered))


@dataclass(frozen=True)
class CoverageTensor:
    """Coverage pairs of every trip of an instance, keyed by trip id."""

    pairs: dict[int, frozenset[tuple[int, int]]]

    def union(self, trip_ids: Iterable[int]) -> frozenset[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        for trip_id in trip_ids:
            out |= self.pairs[trip_id]
        return frozenset(out)


def coverage_tensor(
    inst: Instance, ticks_per_minute: int = TICKS_PER_MINUTE
) -> CoverageTensor:
    return CoverageTensor(
        pairs={
            t.id: trip_coverage(t, inst.intervals, ticks_per_minute)
            for t in inst.trips()
        }
    )


@dataclass(frozen=True)
class CoverageReport:
    """Coverage achieved by a set of instrumented trips."""

    reward: float
    covered: frozenset[tuple[int, int]]
    raw_counts: dict[tuple[int, int], int]
    time_average: dict[int, float]
    completely_covered: tuple[int, ...]
    n_grids: int
    n_intervals: int

    @property
    def covered_share(self) -> float:
        return len(self.covered) / (self.n_grids * self.n_intervals)


def coverage_report(
    inst: Instance,
    instrumented_trips: Iterable[Trip],
    ticks_per_minute: int = TICKS_PER_MINUTE,
) -> CoverageReport:
    """Count sensing passes per (grid, interval) pair and reduce to the capped
    reward. raw_counts holds how many instrumented trips sense each pair; the
    reward caps every pair at one."""
    counts: dict[tuple[int, int], int] = {}
    for trip in instrumented_trips:
        for pair in trip_coverage(trip, inst.intervals, ticks_per_minute):
            counts[pair] = counts.get(pair, 0) + 1
    covered = frozenset(counts)
    n_slots = len(inst.intervals)
    per_grid: dict[int, int] = {g.id: 0 for g in inst.mesh}
    for grid_id, _ in covered:
        per_grid[grid_id] += 1
    return CoverageReport(
        reward=sensing_reward(covered, inst.grid_weights(), inst.interval_weights()),
        covered=covered,
        raw_counts=counts,
        time_average={g: c / n_slots for g, c in per_grid.items()},
        completely_covered=tuple(
            sorted(g for g, c in per_grid.items() if c == n_slots)
        ),
        n_grids=len(inst.mesh),
        n_intervals=n_slots,
    )
