"""Deterministic 0-1 program solver: best-first branch and bound with
LP-relaxation bounds.

The search is exact down to objective differences of PRUNE_SAFETY: a node is
pruned only when its relaxation bound plus that safety margin cannot beat the
incumbent, which covers the LP solver's own tolerance. Identical models and
limits always produce identical solutions because node order, branching, and
tie-breaking use no randomness: nodes pop best-bound-first with insertion
order breaking ties, and branching picks the most fractional variable with the
lowest index breaking ties.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
LIMIT_REACHED = "limit-reached"

PRUNE_SAFETY = 1e-7
INTEGRALITY_TOL = 1e-6
VERIFY_TOL = 1e-6

_LP_OPTIONS = {
    "presolve": True,
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}


@dataclass
class BipModel:
    """A 0-1 program under construction. All variables are binary."""

    sense: str = "max"
    name: str = "model"
    var_names: list[str] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    constraints: list[tuple[tuple[tuple[int, float], ...], str, float]] = field(
        default_factory=list
    )

    def add_var(self, name: str, obj: float = 0.0) -> int:
        self.var_names.append(name)
        self.objective.append(float(obj))
        return len(self.var_names) - 1

    def add_le(self, coeffs, rhs: float) -> None:
        self._add(coeffs, "<=", rhs)

    def add_ge(self, coeffs, rhs: float) -> None:
        self._add(coeffs, ">=", rhs)

    def add_eq(self, coeffs, rhs: float) -> None:
        self._add(coeffs, "==", rhs)

    def _add(self, coeffs, rel: str, rhs: float) -> None:
        n = len(self.var_names)
        merged: dict[int, float] = {}
        for idx, coef in coeffs:
            if not 0 <= idx < n:
                raise ValueError(f"constraint references unknown variable {idx}")
            merged[idx] = merged.get(idx, 0.0) + float(coef)
        row = tuple(sorted(merged.items()))
        self.constraints.append((row, rel, float(rhs)))

    @property
    def n_vars(self) -> int:
        return len(self.var_names)


@dataclass(frozen=True)
class BipLimits:
    """Optional search limits; None means unlimited."""

    time_limit_s: float | None = None
    node_cap: int | None = None


@dataclass(frozen=True)
class BipSolution:
    """Search outcome. optimal and infeasible are proofs; feasible carries an
    incumbent without proof (a limit stopped the search); limit-reached means
    the limit hit before any incumbent was found."""

    status: str
    assignment: tuple[int, ...] | None
    objective: float | None
    bound: float | None
    gap: float
    nodes: int


def verify_assignment(
    model: BipModel, assignment: tuple[int, ...], tol: float = VERIFY_TOL
) -> tuple[str, ...]:
    """Independent re-check of an assignment against every constraint."""
    bad = []
    if len(assignment) != model.n_vars:
        return (f"assignment length {len(assignment)} != {model.n_vars} vars",)
    if any(v not in (0, 1) for v in assignment):
        bad.append("assignment contains non-binary values")
    for k, (row, rel, rhs) in enumerate(model.constraints):
        lhs = math.fsum(coef * assignment[idx] for idx, coef in row)
        ok = (
            lhs <= rhs + tol
            if rel == "<="
            else lhs >= rhs - tol
            if rel == ">="
            else abs(lhs - rhs) <= tol
        )
        if not ok:
            bad.append(f"constraint {k}: {lhs} {rel} {rhs} violated")
    return tuple(bad)


def _objective_value(model: BipModel, assignment: tuple[int, ...]) -> float:
    return math.fsum(
        c for c, v in zip(model.objective, assignment) if v
    )


def _dedup_constraints(model: BipModel):
    seen = set()
    rows = []
    for row, rel, rhs in model.constraints:
        sig = (row, rel, rhs)
        if sig not in seen:
            seen.add(sig)
            rows.append((row, rel, rhs))
    return rows


def _build_lp(model: BipModel, rows):
    """Split deduplicated rows into <= and == sparse blocks."""
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for row, rel, rhs in rows:
        if rel == "<=":
            ub_rows.append(row)
            ub_rhs.append(rhs)
        elif rel == ">=":
            ub_rows.append(tuple((i, -c) for i, c in row))
            ub_rhs.append(-rhs)
        elif rel == "==":
            eq_rows.append(row)
            eq_rhs.append(rhs)
        else:
            raise ValueError(f"unknown relation {rel!r}")

    def to_csr(entries, n_cols):
        data, indices, indptr = [], [], [0]
        for row in entries:
            for idx, coef in row:
                indices.append(idx)
                data.append(coef)
            indptr.append(len(indices))
        return sparse.csr_matrix(
            (data, indices, indptr), shape=(len(entries), n_cols)
        )

    n = model.n_vars
    a_ub = to_csr(ub_rows, n) if ub_rows else None
    a_eq = to_csr(eq_rows, n) if eq_rows else None
    return a_ub, (np.array(ub_rhs) if ub_rows else None), a_eq, (
        np.array(eq_rhs) if eq_rows else None
    )


def solve_bip(model: BipModel, limits: BipLimits | None = None) -> BipSolution:
    """Solve a 0-1 program to proven optimality unless a limit interrupts.

    Minimization is handled by negating the objective, searching as a
    maximization, and negating the reported values back.
    """
    limits = limits or BipLimits()
    started = time.monotonic()
    if model.sense not in ("max", "min"):
        raise ValueError(f"unknown sense {model.sense!r}")
    negate = model.sense == "min"
    c = np.array(model.objective, dtype=float)
    if negate:
        c = -c

    rows = _dedup_constraints(model)
    for row, rel, rhs in rows:
        if row:
            continue
        # constant row: satisfiable or the whole model is empty of solutions
        if (rel == "<=" and 0 > rhs + VERIFY_TOL) or (
            rel == ">=" and 0 < rhs - VERIFY_TOL
        ) or (rel == "==" and abs(rhs) > VERIFY_TOL):
            return BipSolution(INFEASIBLE, None, None, None, math.inf, 0)
    rows = [r for r in rows if r[0]]

    if model.n_vars == 0:
        return BipSolution(OPTIMAL, (), 0.0, 0.0, 0.0, 0)

    a_ub, b_ub, a_eq, b_eq = _build_lp(model, rows)

    def relax(fixed: dict[int, int]):
        bounds = [(0.0, 1.0)] * model.n_vars
        for idx, val in fixed.items():
            bounds[idx] = (float(val), float(val))
        res = linprog(
            -c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
            bounds=bounds, method="highs", options=_LP_OPTIONS,
        )
        if res.status == 2:
            return None
        if res.status != 0:
            raise RuntimeError(
                f"LP relaxation failed (status {res.status}): {res.message}"
            )
        return -res.fun, res.x

    incumbent: tuple[int, ...] | None = None
    incumbent_obj = -math.inf
    nodes = 0
    seq = 0
    heap: list[tuple[float, int, dict[int, int], np.ndarray]] = []

    def evaluate(fixed: dict[int, int]):
        """LP-solve one node; update the incumbent or queue the node."""
        nonlocal nodes, seq, incumbent, incumbent_obj
        nodes += 1
        out = relax(fixed)
        if out is None:
            return
        bound, x = out
        if bound + PRUNE_SAFETY <= incumbent_obj:
            return
        if np.all(np.abs(x - np.round(x)) <= INTEGRALITY_TOL):
            candidate = tuple(int(round(v)) for v in x)
            if not verify_assignment(model, candidate):
                value_signed = math.fsum(
                    ci for ci, v in zip(c, candidate) if v
                )
                if value_signed > incumbent_obj:
                    incumbent = candidate
                    incumbent_obj = value_signed
                return
        heapq.heappush(heap, (-bound, seq, fixed, x))
        seq += 1

    def out_of_limits() -> bool:
        if limits.node_cap is not None and nodes >= limits.node_cap:
            return True
        if (
            limits.time_limit_s is not None
            and time.monotonic() - started >= limits.time_limit_s
        ):
            return True
        return False

    def finish(status: str, open_bound: float | None) -> BipSolution:
        if incumbent is None:
            if status == OPTIMAL:
                return BipSolution(INFEASIBLE, None, None, None, math.inf, nodes)
            bound = open_bound
            if negate and bound is not None:
                bound = -bound
            return BipSolution(LIMIT_REACHED, None, None, bound, math.inf, nodes)
        obj = incumbent_obj
        if status == OPTIMAL:
            bound, gap = obj, 0.0
        else:
            bound = max(obj, math.inf if open_bound is None else open_bound)
            gap = bound - obj
            status = FEASIBLE
        if negate:
            obj, bound = -obj, -bound
        return BipSolution(status, incumbent, obj, bound, gap, nodes)

    evaluate({})
    while heap:
        if out_of_limits():
            open_bound = -heap[0][0] + PRUNE_SAFETY
            return finish(LIMIT_REACHED, open_bound)
        neg_bound, _, fixed, x = heapq.heappop(heap)
        if -neg_bound + PRUNE_SAFETY <= incumbent_obj:
            break  # best-first: nothing left can beat the incumbent
        frac = np.abs(x - np.round(x))
        open_idx = [i for i in range(model.n_vars) if i not in fixed]
        fractional = [i for i in open_idx if frac[i] > INTEGRALITY_TOL]
        if fractional:
            branch_var = max(fractional, key=lambda i: (-abs(x[i] - 0.5), -i))
        elif open_idx:
            branch_var = open_idx[0]
        else:
            continue
        for val in (1, 0):
            evaluate({**fixed, branch_var: val})
    return finish(OPTIMAL, None)


def write_lp(model: BipModel, path: str | Path) -> None:
    """Dump the model as LP-format text for offline inspection."""
    def term(idx: int, coef: float) -> str:
        return f"{coef:+g} {_safe_name(model.var_names[idx])}"

    lines = [f"\\ {model.name}"]
    lines.append("Maximize" if model.sense == "max" else "Minimize")
    obj = " ".join(
        term(i, coef) for i, coef in enumerate(model.objective) if coef
    )
    if not obj:
        obj = f"0 {_safe_name(model.var_names[0])}" if model.var_names else "0"
    lines.append(f" obj: {obj}")
    lines.append("Subject To")
    for k, (row, rel, rhs) in enumerate(model.constraints):
        body = " ".join(term(i, coef) for i, coef in row) or "0"
        op = {"<=": "<=", ">=": ">=", "==": "="}[rel]
        lines.append(f" c{k}: {body} {op} {rhs:g}")
    lines.append("Binaries")
    lines.append(" " + " ".join(_safe_name(n) for n in model.var_names))
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "_[]()." else "_" for ch in name)
