"""Problem instance model: mesh, sensing intervals, bus lines, timetabled trips.

All times are integer minutes since midnight. Instances round-trip through a
versioned JSON document with deterministic field ordering, so byte equality of
two saved files means equality of the instances.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    InfeasibleParamsError,
    InstanceParseError,
    SchemaVersionError,
    UnknownReferenceError,
)

SCHEMA_VERSION = "1"

WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class GridCell:
    """One cell of the rectangular sensing mesh."""

    id: int
    row: int
    col: int
    weight: float


@dataclass(frozen=True)
class SensingInterval:
    """One slot of the sensing horizon, half-open [start, end)."""

    index: int
    start: int
    end: int
    weight: float


@dataclass(frozen=True)
class Trip:
    """A timetabled service trip of one line.

    route lists (grid id, entry fraction) pairs in visiting order; the entry
    fraction is the share of the trip duration elapsed when the bus enters the
    cell, so the first fraction is 0 and fractions increase strictly and stay
    below 1.
    """

    id: int
    line_id: int
    depart_terminal: str
    arrive_terminal: str
    start: int
    duration: int
    route: tuple[tuple[int, float], ...]

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class Line:
    """A bus line: its terminals, deadhead times between them, and trips."""

    id: int
    terminals: tuple[str, ...]
    deadhead: tuple[tuple[str, str, int], ...]
    trips: tuple[Trip, ...]

    def deadhead_map(self) -> dict[tuple[str, str], int]:
        return {(a, b): minutes for a, b, minutes in self.deadhead}


@dataclass(frozen=True)
class Instance:
    """A complete deployment problem."""

    mesh: tuple[GridCell, ...]
    intervals: tuple[SensingInterval, ...]
    lines: tuple[Line, ...]
    sensor_budget: int
    gamma: float
    schema_version: str = SCHEMA_VERSION

    def grid_weights(self) -> dict[int, float]:
        return {g.id: g.weight for g in self.mesh}

    def interval_weights(self) -> dict[int, float]:
        return {iv.index: iv.weight for iv in self.intervals}

    def horizon(self) -> tuple[int, int]:
        return self.intervals[0].start, self.intervals[-1].end

    def trips(self) -> tuple[Trip, ...]:
        return tuple(t for line in self.lines for t in line.trips)

    def trip_by_id(self) -> dict[int, Trip]:
        return {t.id: t for t in self.trips()}

    def line_by_id(self) -> dict[int, Line]:
        return {line.id: line for line in self.lines}


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_instance: violations are reported, never thrown."""

    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def _instance_to_dict(inst: Instance) -> dict:
    return {
        "mesh": [
            {"id": g.id, "row": g.row, "col": g.col, "weight": g.weight}
            for g in inst.mesh
        ],
        "intervals": [
            {"index": iv.index, "start": iv.start, "end": iv.end, "weight": iv.weight}
            for iv in inst.intervals
        ],
        "lines": [
            {
                "id": line.id,
                "terminals": list(line.terminals),
                "deadhead": [[a, b, minutes] for a, b, minutes in line.deadhead],
                "trips": [
                    {
                        "id": t.id,
                        "depart_terminal": t.depart_terminal,
                        "arrive_terminal": t.arrive_terminal,
                        "start": t.start,
                        "duration": t.duration,
                        "route": [[g, f] for g, f in t.route],
                    }
                    for t in line.trips
                ],
            }
            for line in inst.lines
        ],
        "sensor_budget": inst.sensor_budget,
        "gamma": inst.gamma,
        "schema_version": inst.schema_version,
    }


def instance_json(inst: Instance) -> str:
    """Canonical JSON serialization with a fixed field order."""
    return json.dumps(_instance_to_dict(inst), indent=2, allow_nan=False) + "\n"


def save_instance(inst: Instance, path: str | Path) -> None:
    """Write the instance as JSON with a fixed field order."""
    Path(path).write_text(instance_json(inst), encoding="utf-8")


def load_instance(path: str | Path) -> Instance:
    """Read an instance file and resolve every cross-reference.

    Raises:
        InstanceParseError: the file is not the expected JSON shape.
        SchemaVersionError: the declared schema version is unsupported.
        UnknownReferenceError: a trip references an undefined grid or terminal.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceParseError(f"cannot read instance {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InstanceParseError(f"instance {path}: top level must be an object")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"instance {path}: schema_version {version!r} unsupported"
            f" (expected {SCHEMA_VERSION!r})"
        )
    try:
        inst = _instance_from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceParseError(f"instance {path}: {exc}") from exc
    _check_references(inst)
    return inst


def _instance_from_dict(raw: dict) -> Instance:
    mesh = tuple(
        GridCell(id=int(g["id"]), row=int(g["row"]), col=int(g["col"]),
                 weight=float(g["weight"]))
        for g in raw["mesh"]
    )
    intervals = tuple(
        SensingInterval(index=int(iv["index"]), start=int(iv["start"]),
                        end=int(iv["end"]), weight=float(iv["weight"]))
        for iv in raw["intervals"]
    )
    lines = []
    for entry in raw["lines"]:
        line_id = int(entry["id"])
        trips = tuple(
            Trip(
                id=int(t["id"]),
                line_id=line_id,
                depart_terminal=str(t["depart_terminal"]),
                arrive_terminal=str(t["arrive_terminal"]),
                start=int(t["start"]),
                duration=int(t["duration"]),
                route=tuple((int(g), float(f)) for g, f in t["route"]),
            )
            for t in entry["trips"]
        )
        lines.append(
            Line(
                id=line_id,
                terminals=tuple(str(s) for s in entry["terminals"]),
                deadhead=tuple(
                    (str(a), str(b), int(m)) for a, b, m in entry["deadhead"]
                ),
                trips=trips,
            )
        )
    return Instance(
        mesh=mesh,
        intervals=intervals,
        lines=tuple(lines),
        sensor_budget=int(raw["sensor_budget"]),
        gamma=float(raw["gamma"]),
        schema_version=str(raw["schema_version"]),
    )


def _check_references(inst: Instance) -> None:
    grid_ids = {g.id for g in inst.mesh}
    for line in inst.lines:
        terminals = set(line.terminals)
        for a, b, _ in line.deadhead:
            for term in (a, b):
                if term not in terminals:
                    raise UnknownReferenceError(
                        f"line {line.id}: deadhead terminal {term!r} undefined"
                    )
        for trip in line.trips:
            for term in (trip.depart_terminal, trip.arrive_terminal):
                if term not in terminals:
                    raise UnknownReferenceError(
                        f"trip {trip.id}: terminal {term!r} not in line {line.id}"
                    )
            for grid_id, _ in trip.route:
                if grid_id not in grid_ids:
                    raise UnknownReferenceError(
                        f"trip {trip.id}: grid {grid_id} undefined"
                    )


def validate_instance(inst: Instance) -> ValidationReport:
    """Check every semantic invariant, collecting violations instead of raising."""
    bad: list[str] = []

    if not inst.mesh:
        bad.append("mesh is empty")
    if len({g.id for g in inst.mesh}) != len(inst.mesh):
        bad.append("grid ids are not unique")
    for g in inst.mesh:
        if g.weight < 0:
            bad.append(f"grid {g.id}: negative weight {g.weight}")
    wsum = math.fsum(g.weight for g in inst.mesh)
    if abs(wsum - 1.0) > WEIGHT_SUM_TOL:
        bad.append(f"grid weight sum {wsum!r} is not 1 within {WEIGHT_SUM_TOL}")

    if not inst.intervals:
        bad.append("intervals are empty")
    else:
        lengths = {iv.end - iv.start for iv in inst.intervals}
        if any(iv.end <= iv.start for iv in inst.intervals):
            bad.append("an interval has nonpositive length")
        elif len(lengths) != 1:
            bad.append(f"interval lengths differ: {sorted(lengths)}")
        for k, iv in enumerate(inst.intervals):
            if iv.index != k:
                bad.append(f"interval at position {k} has index {iv.index}")
            if k and iv.start != inst.intervals[k - 1].end:
                bad.append(f"interval {iv.index} is not contiguous with its predecessor")
            if iv.weight < 0:
                bad.append(f"interval {iv.index}: negative weight {iv.weight}")
        musum = math.fsum(iv.weight for iv in inst.intervals)
        if abs(musum - 1.0) > WEIGHT_SUM_TOL:
            bad.append(f"interval weight sum {musum!r} is not 1 within {WEIGHT_SUM_TOL}")

    if len({line.id for line in inst.lines}) != len(inst.lines):
        bad.append("line ids are not unique")
    seen_trip_ids: set[int] = set()
    for line in inst.lines:
        if len(set(line.terminals)) != len(line.terminals):
            bad.append(f"line {line.id}: duplicate terminals")
        for a, b, minutes in line.deadhead:
            if minutes < 0:
                bad.append(f"line {line.id}: negative deadhead {a}->{b}")
        for trip in line.trips:
            if trip.id in seen_trip_ids:
                bad.append(f"trip id {trip.id} is not unique")
            seen_trip_ids.add(trip.id)
            if trip.line_id != line.id:
                bad.append(f"trip {trip.id}: line_id {trip.line_id} != {line.id}")
            if trip.duration <= 0:
                bad.append(f"trip {trip.id}: nonpositive duration {trip.duration}")
            if trip.start < 0:
                bad.append(f"trip {trip.id}: negative start {trip.start}")
            if not trip.route:
                bad.append(f"trip {trip.id}: empty route")
                continue
            fractions = [f for _, f in trip.route]
            if fractions[0] != 0.0:
                bad.append(f"trip {trip.id}: first route fraction {fractions[0]} != 0")
            if any(b <= a for a, b in zip(fractions, fractions[1:])):
                bad.append(f"trip {trip.id}: route fractions not strictly increasing")
            if any(f < 0 or f >= 1 for f in fractions):
                bad.append(f"trip {trip.id}: route fraction outside [0, 1)")

    if inst.sensor_budget < 0:
        bad.append(f"sensor_budget {inst.sensor_budget} is negative")
    if not 0 < inst.gamma <= 1:
        bad.append(f"gamma {inst.gamma} outside (0, 1]")

    return ValidationReport(violations=tuple(bad))


def incidence_matrix(inst: Instance) -> np.ndarray:
    """Binary grid-by-line matrix: entry (g, l) is 1 iff any trip of line
    inst.lines[l] visits grid id g. Rows are indexed by grid id."""
    n_grids = max(g.id for g in inst.mesh) + 1
    mat = np.zeros((n_grids, len(inst.lines)), dtype=np.int8)
    for col, line in enumerate(inst.lines):
        for trip in line.trips:
            for grid_id, _ in trip.route:
                mat[grid_id, col] = 1
    return mat


def coverable_grids(inst: Instance) -> tuple[int, ...]:
    """Grid ids reachable by at least one line, ascending."""
    reached = {g for line in inst.lines for t in line.trips for g, _ in t.route}
    return tuple(sorted(reached))


DEFAULT_GEN_PARAMS: dict = {
    "seed": 0,
    "n_lines": 4,
    "trips_per_line": 12,
    "mesh_dims": (4, 4),
    "horizon": (420, 1320),
    "interval_minutes": 60,
    "weight_profile": "uniform",
    "sensor_budget": 4,
    "gamma": 1.0,
}


def generate_synthetic(params: Mapping[str, object]) -> Instance:
    """Build a random but reproducible instance on a lattice mesh.

    Lines follow simple row-then-column lattice paths between two random
    cells and run alternating-direction trips at a line-specific headway.
    Identical params (including seed) give a byte-identical saved instance.

    Raises:
        InfeasibleParamsError: the horizon cannot hold the requested trips
            or does not divide into equal sensing intervals.
    """
    p = {**DEFAULT_GEN_PARAMS, **dict(params)}
    rng = random.Random(p["seed"])
    rows, cols = p["mesh_dims"]
    h_start, h_end = p["horizon"]
    slot = int(p["interval_minutes"])
    n_lines = int(p["n_lines"])
    trips_per_line = int(p["trips_per_line"])

    if rows < 1 or cols < 1 or rows * cols < 2:
        raise InfeasibleParamsError(f"mesh_dims {p['mesh_dims']} cannot host a path")
    if h_end <= h_start:
        raise InfeasibleParamsError(f"horizon {p['horizon']} is empty")
    if slot <= 0 or (h_end - h_start) % slot:
        raise InfeasibleParamsError(
            f"interval_minutes {slot} does not divide horizon length {h_end - h_start}"
        )

    mesh = _make_mesh(rows, cols, str(p["weight_profile"]))
    n_slots = (h_end - h_start) // slot
    intervals = tuple(
        SensingInterval(index=k, start=h_start + k * slot,
                        end=h_start + (k + 1) * slot, weight=1.0 / n_slots)
        for k in range(n_slots)
    )

    lines = []
    next_trip_id = 0
    for line_id in range(n_lines):
        cells = _lattice_path(rng, rows, cols)
        cell_minutes = rng.randint(2, 5)
        duration = len(cells) * cell_minutes
        start_offset = rng.randint(0, 30)
        usable = (h_end - h_start) - duration - start_offset
        if usable < 0 or (trips_per_line > 1 and usable // (trips_per_line - 1) < 1):
            raise InfeasibleParamsError(
                f"line {line_id}: {trips_per_line} trips of {duration} min"
                f" cannot fit in horizon {p['horizon']}"
            )
        headway_cap = usable // (trips_per_line - 1) if trips_per_line > 1 else usable
        # headways mostly below the trip duration so several buses are needed
        lo = max(1, duration // 3)
        hi = min(headway_cap, duration + 5)
        headway = rng.randint(lo, hi) if hi >= lo else max(1, headway_cap)

        term_a, term_b = f"l{line_id}a", f"l{line_id}b"
        forward = tuple((g, k / len(cells)) for k, g in enumerate(cells))
        backward = tuple((g, k / len(cells)) for k, g in enumerate(reversed(cells)))
        trips = []
        for k in range(trips_per_line):
            outbound = k % 2 == 0
            trips.append(
                Trip(
                    id=next_trip_id,
                    line_id=line_id,
                    depart_terminal=term_a if outbound else term_b,
                    arrive_terminal=term_b if outbound else term_a,
                    start=h_start + start_offset + k * headway,
                    duration=duration,
                    route=forward if outbound else backward,
                )
            )
            next_trip_id += 1

        deadhead: list[tuple[str, str, int]] = []
        if rng.random() < 0.5:
            # repositioning runs allow same-direction chaining
            minutes = rng.randint(1, max(2, duration // 2))
            deadhead = [(term_a, term_b, minutes), (term_b, term_a, minutes)]
        lines.append(
            Line(id=line_id, terminals=(term_a, term_b),
                 deadhead=tuple(deadhead), trips=tuple(trips))
        )

    return Instance(
        mesh=mesh,
        intervals=intervals,
        lines=tuple(lines),
        sensor_budget=int(p["sensor_budget"]),
        gamma=float(p["gamma"]),
    )


def _make_mesh(rows: int, cols: int, profile: str) -> tuple[GridCell, ...]:
    if profile == "uniform":
        raw = [1.0] * (rows * cols)
    elif profile == "gradient":
        raw = [1.0 + r + c for r in range(rows) for c in range(cols)]
    else:
        raise InfeasibleParamsError(f"unknown weight_profile {profile!r}")
    total = math.fsum(raw)
    return tuple(
        GridCell(id=r * cols + c, row=r, col=c, weight=raw[r * cols + c] / total)
        for r in range(rows)
        for c in range(cols)
    )


def _lattice_path(rng: random.Random, rows: int, cols: int) -> list[int]:
    """Row-then-column path between two distinct random cells, as grid ids."""
    while True:
        r1, c1 = rng.randrange(rows), rng.randrange(cols)
        r2, c2 = rng.randrange(rows), rng.randrange(cols)
        if (r1, c1) != (r2, c2):
            break
    cells = []
    step_r = 1 if r2 >= r1 else -1
    for r in range(r1, r2 + step_r, step_r):
        cells.append((r, c1))
    step_c = 1 if c2 >= c1 else -1
    for c in range(c1 + step_c, c2 + step_c, step_c):
        cells.append((r2, c))
    return [r * cols + c for r, c in cells]
