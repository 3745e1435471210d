"""Artifact writers: deployment JSON, coverage and sweep tables, figures.

Deployment files must be byte-identical across repeated runs with the same
inputs, so anything nondeterministic (wall-clock timings) goes to a sidecar
file instead of the deployment document itself.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .config import RunConfig
from .coverage import CoverageReport
from .errors import InstanceParseError
from .instance import Instance, Trip, instance_json
from .results import Deployment

DEPLOYMENT_SCHEMA_VERSION = "1"

# config fields that cannot change the solution, only how fast it appears
_NON_SEMANTIC_CONFIG = ("jobs", "dump_dir")


def config_fingerprint(inst: Instance, config: RunConfig) -> str:
    """Hash of the canonical instance serialization plus the solve-relevant
    configuration, stamped on every report for reproducibility."""
    cfg = {k: v for k, v in asdict(config).items() if k not in _NON_SEMANTIC_CONFIG}
    digest = hashlib.sha256()
    digest.update(instance_json(inst).encode("utf-8"))
    digest.update(json.dumps(cfg, sort_keys=True).encode("utf-8"))
    return digest.hexdigest()


def deployment_to_dict(dep: Deployment) -> dict:
    lines = []
    for line in dep.lines:
        row = {
            "line_id": line.line_id,
            "min_fleet_size": line.min_fleet_size,
            "idle_cap": line.idle_cap,
            "saturation_count": line.saturation_count,
            "sensors": line.sensors,
            "line_reward": line.line_reward,
            "chains": [
                {"trip_ids": list(c.trip_ids), "instrumented": c.instrumented}
                for c in line.chains
            ],
        }
        if line.saturation_rewards is not None:
            row["saturation_rewards"] = list(line.saturation_rewards)
        lines.append(row)
    return {
        "schema_version": DEPLOYMENT_SCHEMA_VERSION,
        "approach": dep.approach,
        "fingerprint": dep.fingerprint,
        "budget": dep.budget,
        "sensors_used": dep.sensors_used,
        "reward": dep.reward,
        "mode": dep.mode,
        "selection": {
            "chosen_line_ids": list(dep.selection.chosen_line_ids),
            "covered_grids": list(dep.selection.covered_grids),
            "coverable": list(dep.selection.coverable),
            "gamma": dep.selection.gamma,
            "status": dep.selection.status,
            "gap": dep.selection.gap,
        },
        "stages": [asdict(s) for s in dep.stages],
        "lines": lines,
    }


def write_deployment(path: str | Path, dep: Deployment) -> None:
    Path(path).write_text(
        json.dumps(deployment_to_dict(dep), indent=2) + "\n", encoding="utf-8"
    )


def read_deployment(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceParseError(f"cannot read deployment {path}: {exc}") from exc
    if not isinstance(doc, dict) or "lines" not in doc or "reward" not in doc:
        raise InstanceParseError(f"{path} is not a deployment document")
    return doc


def instrumented_trips(inst: Instance, doc: Mapping) -> list[Trip]:
    """Resolve the instrumented trip ids of a deployment document against an
    instance. Unknown ids mean the document belongs to a different instance."""
    by_id = inst.trip_by_id()
    trips = []
    for line in doc["lines"]:
        for chain in line["chains"]:
            if not chain["instrumented"]:
                continue
            for trip_id in chain["trip_ids"]:
                if trip_id not in by_id:
                    raise InstanceParseError(
                        f"deployment references unknown trip {trip_id}"
                    )
                trips.append(by_id[trip_id])
    return trips


def write_timings(path: str | Path, timings: Mapping[str, float]) -> None:
    Path(path).write_text(
        json.dumps({k: round(v, 6) for k, v in timings.items()}, indent=2) + "\n",
        encoding="utf-8",
    )


def write_coverage_csv(path: str | Path, inst: Instance, cov: CoverageReport) -> None:
    complete = set(cov.completely_covered)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["grid_id", "row", "col", "weight", "time_avg_coverage", "completely_covered"]
        )
        for cell in inst.mesh:
            writer.writerow(
                [
                    cell.id,
                    cell.row,
                    cell.col,
                    repr(cell.weight),
                    repr(cov.time_average.get(cell.id, 0.0)),
                    int(cell.id in complete),
                ]
            )


def write_summary_json(
    path: str | Path, cov: CoverageReport, extra: Mapping | None = None
) -> None:
    doc = {
        "reward": cov.reward,
        "covered_pairs": len(cov.covered),
        "covered_share": cov.covered_share,
        "completely_covered_grids": len(cov.completely_covered),
        "n_grids": cov.n_grids,
        "n_intervals": cov.n_intervals,
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class SweepRow:
    """One (budget, approach) point of a budget sweep."""

    sensors: int
    approach: str
    reward: float
    covered_share: float
    sensors_used: int
    worst_gap: float


def write_sweep_csv(path: str | Path, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["sensors", "approach", "reward", "covered_share", "sensors_used", "worst_gap"]
        )
        for r in rows:
            writer.writerow(
                [r.sensors, r.approach, repr(r.reward), repr(r.covered_share),
                 r.sensors_used, repr(r.worst_gap)]
            )


def write_saturation_csv(path: str | Path, doc: Mapping) -> None:
    """Per-line reward against sensor count, from a joint deployment document."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["line_id", "sensors", "line_reward"])
        for line in doc["lines"]:
            for m, reward in enumerate(line.get("saturation_rewards") or (), start=1):
                writer.writerow([line["line_id"], m, repr(reward)])


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_coverage_heatmap(
    path: str | Path, inst: Instance, cov: CoverageReport, title: str = "Coverage"
) -> None:
    import numpy as np

    plt = _pyplot()
    n_rows = max(c.row for c in inst.mesh) + 1
    n_cols = max(c.col for c in inst.mesh) + 1
    grid = np.zeros((n_rows, n_cols))
    for cell in inst.mesh:
        grid[cell.row, cell.col] = cov.time_average.get(cell.id, 0.0)
    fig, ax = plt.subplots(figsize=(max(4, n_cols * 0.6), max(3, n_rows * 0.6)))
    image = ax.imshow(grid, vmin=0.0, vmax=1.0, cmap="viridis")
    fig.colorbar(image, ax=ax, label="time-averaged coverage")
    ax.set_title(title)
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_reward_curve(path: str | Path, rows: Sequence[SweepRow]) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for approach in sorted({r.approach for r in rows}):
        pts = sorted((r.sensors, r.reward) for r in rows if r.approach == approach)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=approach)
    ax.set_xlabel("sensors")
    ax.set_ylabel("sensing reward")
    ax.set_ylim(bottom=0.0)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_saturation_chart(path: str | Path, doc: Mapping) -> None:
    """Grouped bars of per-line reward at 1..K sensors, joint deployments only."""
    plt = _pyplot()
    lines = [l for l in doc["lines"] if l.get("saturation_rewards")]
    if not lines:
        return
    max_m = max(len(l["saturation_rewards"]) for l in lines)
    width = 0.8 / max_m
    fig, ax = plt.subplots(figsize=(max(6, len(lines) * 0.9), 4))
    for m in range(max_m):
        xs, ys = [], []
        for i, line in enumerate(lines):
            if m < len(line["saturation_rewards"]):
                xs.append(i + m * width)
                ys.append(line["saturation_rewards"][m])
        ax.bar(xs, ys, width=width, label=f"{m + 1} sensor{'s' if m else ''}")
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(lines))])
    ax.set_xticklabels([str(l["line_id"]) for l in lines])
    ax.set_xlabel("line")
    ax.set_ylabel("line reward")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def deployment_outputs(out: str | Path) -> dict[str, Path]:
    """Sidecar paths derived from the deployment output path."""
    base = Path(out)
    stem = base.parent / base.stem
    return {
        "deployment": base,
        "timings": Path(f"{stem}.timings.json"),
        "coverage": Path(f"{stem}.coverage.csv"),
    }


def sweep_points(values: Iterable[int]) -> list[int]:
    pts = sorted(set(int(v) for v in values))
    if any(v < 0 for v in pts):
        raise ValueError("sensor counts must be nonnegative")
    return pts
