"""Minimum fleet size per line via trip-pair matching, and the idle-time cap
that shrinks the connection graph without growing the fleet.

Two service trips of one line are connectable when a single bus can run them
back to back: the second departs where the first arrives (or a deadhead entry
bridges the terminals) no earlier than the first finishes. The fewest buses
covering all trips equals trips minus a maximum matching on that relation, and
the matching's connected runs are the trip chains.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Mapping

from .instance import Line, Trip

log = logging.getLogger(__name__)

DELTA_SEARCH_ITERATIONS = 12


def connection_slack(
    trip_i: Trip, trip_j: Trip, deadhead: Mapping[tuple[str, str], int]
) -> int | None:
    """Terminal idle time if one bus runs trip_j after trip_i, None when the
    terminals do not link. A missing deadhead entry means no link unless the
    terminals coincide (then the bus just waits there)."""
    hop = deadhead.get((trip_i.arrive_terminal, trip_j.depart_terminal))
    if hop is None:
        if trip_i.arrive_terminal != trip_j.depart_terminal:
            return None
        hop = 0
    return trip_j.start - (trip_i.start + trip_i.duration + hop)


def is_connectable(
    trip_i: Trip,
    trip_j: Trip,
    deadhead: Mapping[tuple[str, str], int],
    idle_cap: float | None = None,
) -> bool:
    slack = connection_slack(trip_i, trip_j, deadhead)
    if slack is None or slack < 0:
        return False
    return idle_cap is None or slack <= idle_cap


@dataclass(frozen=True)
class TripPairGraph:
    """Feasible trip connections of one line: arc (i, j) means one bus can run
    trip j directly after trip i; the value is the idle slack in minutes."""

    line_id: int
    trip_ids: tuple[int, ...]
    arcs: dict[tuple[int, int], int]
    idle_cap: float | None

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    def successors(self, trip_id: int) -> list[int]:
        return sorted(j for (i, j) in self.arcs if i == trip_id)


@dataclass(frozen=True)
class TripChain:
    """Trips one bus executes in order; instrumented means it carries a sensor."""

    line_id: int
    trip_ids: tuple[int, ...]
    instrumented: bool = False


@dataclass(frozen=True)
class FleetResult:
    """Minimum fleet of one line and a partition of its trips into chains."""

    line_id: int
    n_trips: int
    matching_size: int
    min_fleet_size: int
    chains: tuple[TripChain, ...]
    idle_cap: float | None
    n_feasible_pairs: int


def _ordered_trips(line: Line) -> list[Trip]:
    return sorted(line.trips, key=lambda t: (t.start, t.id))


def feasible_pairs(line: Line, idle_cap: float | None = None) -> TripPairGraph:
    """Every ordered trip pair of the line one bus can serve consecutively,
    with idle slack at most idle_cap when a cap is given."""
    deadhead = line.deadhead_map()
    trips = _ordered_trips(line)
    arcs: dict[tuple[int, int], int] = {}
    for ti in trips:
        for tj in trips:
            if ti.id == tj.id:
                continue
            slack = connection_slack(ti, tj, deadhead)
            if slack is None or slack < 0:
                continue
            if idle_cap is not None and slack > idle_cap:
                continue
            arcs[ti.id, tj.id] = slack
    return TripPairGraph(
        line_id=line.id,
        trip_ids=tuple(t.id for t in trips),
        arcs=arcs,
        idle_cap=idle_cap,
    )


def _hopcroft_karp(order: list[int], adj: dict[int, list[int]]) -> dict[int, int]:
    """Maximum matching on the bipartite predecessor/successor view of the
    connection graph. Returns successor per matched trip. Deterministic:
    vertices and adjacency are scanned in sorted order."""
    match_succ: dict[int, int] = {}
    match_pred: dict[int, int] = {}
    dist: dict[int, float] = {}

    def bfs() -> bool:
        dist.clear()
        queue = deque()
        for u in order:
            if u not in match_succ:
                dist[u] = 0
                queue.append(u)
        found_free = False
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                w = match_pred.get(v)
                if w is None:
                    found_free = True
                elif w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found_free

    def dfs(u: int) -> bool:
        for v in adj[u]:
            w = match_pred.get(v)
            if w is None or (dist.get(w) == dist[u] + 1 and dfs(w)):
                match_succ[u] = v
                match_pred[v] = u
                return True
        dist[u] = float("inf")
        return False

    while bfs():
        for u in order:
            if u not in match_succ:
                dfs(u)
    return match_succ


def min_fleet_on_graph(line: Line, graph: TripPairGraph) -> FleetResult:
    """Fewest buses executing all trips, restricted to the graph's arcs."""
    trips = _ordered_trips(line)
    order = [t.id for t in trips]
    adj = {t.id: [] for t in trips}
    for i, j in sorted(graph.arcs):
        adj[i].append(j)
    match_succ = _hopcroft_karp(order, adj)

    has_pred = set(match_succ.values())
    chains = []
    for t in trips:
        if t.id in has_pred:
            continue
        run = [t.id]
        while run[-1] in match_succ:
            run.append(match_succ[run[-1]])
        chains.append(TripChain(line_id=line.id, trip_ids=tuple(run)))

    n = len(trips)
    result = FleetResult(
        line_id=line.id,
        n_trips=n,
        matching_size=len(match_succ),
        min_fleet_size=n - len(match_succ),
        chains=tuple(chains),
        idle_cap=graph.idle_cap,
        n_feasible_pairs=graph.n_arcs,
    )
    if len(result.chains) != result.min_fleet_size:
        raise RuntimeError(
            f"line {line.id}: chain extraction lost the matching size"
        )
    if sorted(t for c in result.chains for t in c.trip_ids) != sorted(order):
        raise RuntimeError(f"line {line.id}: chains do not partition the trips")
    return result


def min_fleet(line: Line, idle_cap: float | None = None) -> FleetResult:
    return min_fleet_on_graph(line, feasible_pairs(line, idle_cap))


def default_idle_bound(line: Line) -> float:
    """Starting idle cap for find_delta: twice the longest trip plus the
    longest deadhead of the line."""
    longest = max(t.duration for t in line.trips)
    hop = max((m for _, _, m in line.deadhead), default=0)
    return float(2 * longest + hop)


def find_delta(
    line: Line,
    iterations: int = DELTA_SEARCH_ITERATIONS,
    delta0: float | None = None,
) -> float:
    """Tightest validated idle cap found by bisection.

    Starts from delta0 (default default_idle_bound), widening it twofold with
    a warning if capping at delta0 already grows the fleet. Every returned cap
    keeps the line's minimum fleet size equal to the uncapped one.
    """
    if iterations < 0:
        raise ValueError(f"iterations {iterations} negative")
    target = min_fleet(line).min_fleet_size
    cap = default_idle_bound(line) if delta0 is None else float(delta0)
    while min_fleet(line, cap).min_fleet_size > target:
        log.warning(
            "line %s: idle bound %s grows the fleet, widening to %s",
            line.id, cap, cap * 2,
        )
        cap *= 2
    lo, hi = 0.0, cap
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if min_fleet(line, mid).min_fleet_size > target:
            lo = mid
        else:
            hi = mid
    return hi
