"""Sequential pipeline: fix the minimum-fleet chains first, then choose which
chains carry the sensors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .config import RunConfig
from .coverage import CoverageTensor, coverage_tensor, sensing_reward
from .errors import SolverLimitError
from .fleet import TripChain, min_fleet
from .instance import Instance
from .results import Deployment, LineDeployment, StageInfo
from .select import LineSelection, select_lines_full, select_lines_partial
from .solver import BipLimits, BipModel, OPTIMAL, solve_bip, write_lp

log = logging.getLogger(__name__)

GREEDY_GUARANTEE = 1.0 - 1.0 / math.e


@dataclass(frozen=True)
class AllocationResult:
    """Sensor-to-chain assignment: chains in candidate order with instrumented
    flags set, and the reward those sensors earn."""

    chains: tuple[TripChain, ...]
    reward: float
    mode: str
    status: str
    gap: float
    bound: float
    nodes: int = 0


def _chain_pairs(
    chains: tuple[TripChain, ...] | list[TripChain], tensor: CoverageTensor
) -> list[frozenset[tuple[int, int]]]:
    return [tensor.union(c.trip_ids) for c in chains]


def allocate_exact(
    chains: list[TripChain] | tuple[TripChain, ...],
    inst: Instance,
    budget: int,
    tensor: CoverageTensor | None = None,
    limits: BipLimits | None = None,
    dump_path: str | Path | None = None,
) -> AllocationResult:
    """Optimal sensor placement on fixed candidate chains.

    Pair variables exist only for pairs some candidate chain covers; every
    other pair is a structural zero.
    """
    tensor = tensor or coverage_tensor(inst)
    if budget < 0:
        raise ValueError(f"budget {budget} is negative")
    per_chain = _chain_pairs(chains, tensor)
    grid_w = inst.grid_weights()
    slot_w = inst.interval_weights()

    model = BipModel(sense="max", name="sensor-allocation")
    z = [model.add_var(f"chain[{k}]") for k in range(len(chains))]
    covering: dict[tuple[int, int], list[int]] = {}
    for k, pairs in enumerate(per_chain):
        for p in pairs:
            covering.setdefault(p, []).append(k)
    pair_vars = {}
    for p in sorted(covering):
        g, t = p
        pair_vars[p] = model.add_var(f"pair[{g},{t}]", grid_w[g] * slot_w[t])
    for p, ks in sorted(covering.items()):
        model.add_le([(pair_vars[p], 1.0)] + [(z[k], -1.0) for k in ks], 0.0)
    model.add_le([(v, 1.0) for v in z], float(budget))
    if dump_path is not None:
        write_lp(model, dump_path)

    sol = solve_bip(model, limits)
    if sol.assignment is None:
        # the all-zero assignment is feasible, so this is a limit, not a proof
        raise SolverLimitError(f"allocation unsolved: {sol.status}")
    flagged = tuple(
        replace(c, instrumented=bool(sol.assignment[z[k]]))
        for k, c in enumerate(chains)
    )
    covered = tensor.union(t for c in flagged if c.instrumented for t in c.trip_ids)
    reward = sensing_reward(covered, grid_w, slot_w)
    if sol.status == OPTIMAL and abs(reward - sol.objective) > 1e-9:
        raise RuntimeError(
            f"allocation reward drift: recomputed {reward} vs model {sol.objective}"
        )
    return AllocationResult(
        chains=flagged,
        reward=reward,
        mode="exact",
        status=sol.status,
        gap=sol.gap,
        bound=reward if sol.status == OPTIMAL else sol.bound,
        nodes=sol.nodes,
    )


def allocate_greedy(
    chains: list[TripChain] | tuple[TripChain, ...],
    inst: Instance,
    budget: int,
    tensor: CoverageTensor | None = None,
) -> AllocationResult:
    """Largest-marginal-gain placement; ties go to the lowest chain index.

    Coverage reward is submodular, so the result is at least (1 - 1/e) of the
    optimum; the reported bound inverts that guarantee.
    """
    tensor = tensor or coverage_tensor(inst)
    if budget < 0:
        raise ValueError(f"budget {budget} is negative")
    per_chain = _chain_pairs(chains, tensor)
    grid_w = inst.grid_weights()
    slot_w = inst.interval_weights()

    covered: set[tuple[int, int]] = set()
    picked: set[int] = set()
    for _ in range(budget):
        best_k, best_gain = None, 0.0
        for k, pairs in enumerate(per_chain):
            if k in picked:
                continue
            gain = math.fsum(
                grid_w[g] * slot_w[t] for g, t in pairs if (g, t) not in covered
            )
            if gain > best_gain:
                best_k, best_gain = k, gain
        if best_k is None:
            break
        picked.add(best_k)
        covered |= per_chain[best_k]

    flagged = tuple(
        replace(c, instrumented=k in picked) for k, c in enumerate(chains)
    )
    reward = sensing_reward(covered, grid_w, slot_w)
    return AllocationResult(
        chains=flagged,
        reward=reward,
        mode="greedy",
        status="heuristic",
        gap=min(1.0, reward / GREEDY_GUARANTEE) - reward,
        bound=min(1.0, reward / GREEDY_GUARANTEE),
    )


def candidate_chains(inst: Instance, selection: LineSelection) -> list[TripChain]:
    """Minimum-fleet chains of every chosen line, pooled in line-id order."""
    pool: list[TripChain] = []
    for line in inst.lines:
        if line.id in set(selection.chosen_line_ids) and line.trips:
            pool.extend(min_fleet(line).chains)
    return pool


def _pick_mode(config: RunConfig, n_chains: int, n_pairs: int) -> str:
    if config.mode in ("exact", "greedy"):
        return config.mode
    if config.mode != "auto":
        raise ValueError(f"unknown allocation mode {config.mode!r}")
    if n_chains > config.exact_max_chains or n_pairs > config.exact_max_pairs:
        log.info(
            "allocation falls back to greedy: %d chains, %d pairs", n_chains, n_pairs
        )
        return "greedy"
    return "exact"


def _select(inst: Instance, config: RunConfig) -> LineSelection:
    gamma = inst.gamma if config.gamma is None else config.gamma
    if gamma == 1.0:
        return select_lines_full(inst, config.limits())
    return select_lines_partial(inst, gamma, config.limits())


def run_sequential(inst: Instance, config: RunConfig | None = None) -> Deployment:
    """Line selection, minimum fleets, then sensor allocation on the pooled
    chains."""
    config = config or RunConfig()
    budget = config.budget(inst.sensor_budget)
    tensor = coverage_tensor(inst)
    selection = _select(inst, config)

    pool = candidate_chains(inst, selection)
    n_pairs = len({p for c in pool for p in tensor.union(c.trip_ids)})
    mode = _pick_mode(config, len(pool), n_pairs)
    if mode == "exact":
        dump = (
            Path(config.dump_dir) / "allocation.lp" if config.dump_dir else None
        )
        alloc = allocate_exact(pool, inst, budget, tensor, config.limits(), dump)
    else:
        alloc = allocate_greedy(pool, inst, budget, tensor)

    grid_w = inst.grid_weights()
    slot_w = inst.interval_weights()
    by_line: dict[int, list[TripChain]] = {}
    for chain in alloc.chains:
        by_line.setdefault(chain.line_id, []).append(chain)
    lines = []
    for line_id in sorted(by_line):
        chains = tuple(by_line[line_id])
        instrumented = [c for c in chains if c.instrumented]
        lines.append(
            LineDeployment(
                line_id=line_id,
                min_fleet_size=len(chains),
                idle_cap=None,
                saturation_count=None,
                sensors=len(instrumented),
                line_reward=sensing_reward(
                    tensor.union(t for c in instrumented for t in c.trip_ids),
                    grid_w,
                    slot_w,
                ),
                chains=chains,
            )
        )
    return Deployment(
        approach="sequential",
        selection=selection,
        lines=tuple(lines),
        budget=budget,
        sensors_used=sum(d.sensors for d in lines),
        reward=alloc.reward,
        mode=alloc.mode,
        stages=(
            StageInfo("select", selection.status, selection.gap),
            StageInfo("allocate", alloc.status, alloc.gap, alloc.nodes),
        ),
    )
