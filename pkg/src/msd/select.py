"""Line pre-selection: cover every reachable grid with as few lines as
possible, or a gamma share of them."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import SolverLimitError
from .instance import Instance, coverable_grids, incidence_matrix
from .solver import BipLimits, BipModel, BipSolution, solve_bip


@dataclass(frozen=True)
class LineSelection:
    """Chosen lines and the grids they reach."""

    chosen_line_ids: tuple[int, ...]
    covered_grids: tuple[int, ...]
    coverable: tuple[int, ...]
    gamma: float
    status: str
    gap: float


def _tie_break_weight(position: int, n_lines: int) -> float:
    """Discount that makes equal-size covers resolve to the lexicographically
    smallest id set: subtracted from a line's unit cost, geometrically decaying
    so each id outweighs all later ones, total under 1/n so cardinality still
    dominates."""
    return 2.0 ** -(position + 1) / max(n_lines, 1)


def _grids_reached(inst: Instance, chosen: set[int]) -> tuple[int, ...]:
    return tuple(
        sorted(
            {
                g
                for line in inst.lines
                if line.id in chosen
                for t in line.trips
                for g, _ in t.route
            }
        )
    )


def _finish(inst: Instance, sol: BipSolution, gamma: float) -> LineSelection:
    if sol.assignment is None:
        # cover models are always feasible, so this is a limit, not a proof
        raise SolverLimitError(f"line cover unsolved: {sol.status}")
    ids = tuple(line.id for k, line in enumerate(inst.lines) if sol.assignment[k])
    return LineSelection(
        chosen_line_ids=ids,
        covered_grids=_grids_reached(inst, set(ids)),
        coverable=coverable_grids(inst),
        gamma=gamma,
        status=sol.status,
        gap=sol.gap,
    )


def select_lines_full(
    inst: Instance, limits: BipLimits | None = None
) -> LineSelection:
    """Minimum set of lines covering every coverable grid."""
    n = len(inst.lines)
    model = BipModel(sense="min", name="line-cover-full")
    for k, line in enumerate(inst.lines):
        model.add_var(f"line[{line.id}]", 1.0 - _tie_break_weight(k, n))
    delta = incidence_matrix(inst) if n else None
    for g in coverable_grids(inst):
        model.add_ge([(k, 1.0) for k in range(n) if delta[g, k]], 1.0)
    return _finish(inst, solve_bip(model, limits), gamma=1.0)


def select_lines_partial(
    inst: Instance, gamma: float | None = None, limits: BipLimits | None = None
) -> LineSelection:
    """Minimum set of lines covering at least ceil(gamma * coverable) grids.

    The grid side is linked one-sidedly (a grid may only count as covered when
    a chosen line reaches it), which keeps the model free of big-M terms.
    """
    gamma = inst.gamma if gamma is None else gamma
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma {gamma} outside (0, 1]")
    n = len(inst.lines)
    reachable = coverable_grids(inst)
    required = math.ceil(gamma * len(reachable))

    model = BipModel(sense="min", name="line-cover-partial")
    line_vars = [
        model.add_var(f"line[{line.id}]", 1.0 - _tie_break_weight(k, n))
        for k, line in enumerate(inst.lines)
    ]
    delta = incidence_matrix(inst) if n else None
    grid_vars: dict[int, int] = {}
    for g in reachable:
        grid_vars[g] = model.add_var(f"grid[{g}]")
        model.add_le(
            [(grid_vars[g], 1.0)]
            + [(line_vars[k], -1.0) for k in range(n) if delta[g, k]],
            0.0,
        )
    model.add_ge([(v, 1.0) for v in grid_vars.values()], float(required))
    return _finish(inst, solve_bip(model, limits), gamma=gamma)
