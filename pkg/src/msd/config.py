"""Run configuration shared by the pipelines and the CLI."""

from __future__ import annotations

from dataclasses import dataclass

from .solver import BipLimits

EXACT_MAX_CHAINS = 500
EXACT_MAX_PAIRS = 50_000


@dataclass(frozen=True)
class RunConfig:
    """Knobs of one pipeline run; None fields fall back to instance values."""

    sensors: int | None = None
    gamma: float | None = None
    mode: str = "auto"  # sequential allocation: auto | exact | greedy
    exact_max_chains: int = EXACT_MAX_CHAINS
    exact_max_pairs: int = EXACT_MAX_PAIRS
    delta_policy: str | float = "auto"  # auto | none | minutes
    delta_iterations: int = 12
    saturation_exhaustive: bool = False
    jobs: int = 1
    time_limit_s: float | None = None
    node_cap: int | None = None
    dump_dir: str | None = None
    seed: int | None = None

    def limits(self) -> BipLimits:
        return BipLimits(time_limit_s=self.time_limit_s, node_cap=self.node_cap)

    def budget(self, instance_budget: int) -> int:
        n = instance_budget if self.sensors is None else self.sensors
        if n < 0:
            raise ValueError(f"sensor budget {n} is negative")
        return n
