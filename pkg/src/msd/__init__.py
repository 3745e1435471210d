"""Trip-based mobile sensor deployment on bus fleets.

The pipeline picks bus lines that cover a gridded target area, forms
minimum-size trip chains per line, and assigns a sensor budget to chains so
the weighted share of sensed (grid, interval) pairs is maximized. Two
procedures are provided: a sequential one that fixes chains before placing
sensors, and a joint one that re-forms chains while placing them.
"""

from .config import RunConfig
from .coverage import (
    CoverageReport,
    CoverageTensor,
    coverage_report,
    coverage_tensor,
    sensing_reward,
    trip_coverage,
)
from .errors import (
    DataError,
    InfeasibleParamsError,
    InstanceParseError,
    MsdError,
    SchemaVersionError,
    SolverLimitError,
    UnknownReferenceError,
)
from .fleet import (
    FleetResult,
    TripChain,
    TripPairGraph,
    connection_slack,
    default_idle_bound,
    feasible_pairs,
    find_delta,
    min_fleet,
    min_fleet_on_graph,
)
from .instance import (
    GridCell,
    Instance,
    Line,
    SensingInterval,
    Trip,
    ValidationReport,
    coverable_grids,
    generate_synthetic,
    incidence_matrix,
    load_instance,
    save_instance,
    validate_instance,
)
from .joint import (
    SaturationProfile,
    compute_saturation,
    run_joint,
    solve_lower,
    solve_upper,
)
from .results import Deployment, LineDeployment, StageInfo
from .select import LineSelection, select_lines_full, select_lines_partial
from .sequential import (
    AllocationResult,
    allocate_exact,
    allocate_greedy,
    candidate_chains,
    run_sequential,
)
from .solver import BipLimits, BipModel, BipSolution, solve_bip, verify_assignment

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "BipLimits",
    "BipModel",
    "BipSolution",
    "CoverageReport",
    "CoverageTensor",
    "DataError",
    "Deployment",
    "FleetResult",
    "GridCell",
    "InfeasibleParamsError",
    "Instance",
    "InstanceParseError",
    "Line",
    "LineDeployment",
    "LineSelection",
    "MsdError",
    "RunConfig",
    "SaturationProfile",
    "SchemaVersionError",
    "SensingInterval",
    "SolverLimitError",
    "StageInfo",
    "Trip",
    "TripChain",
    "TripPairGraph",
    "UnknownReferenceError",
    "ValidationReport",
    "allocate_exact",
    "allocate_greedy",
    "candidate_chains",
    "compute_saturation",
    "connection_slack",
    "coverable_grids",
    "coverage_report",
    "coverage_tensor",
    "default_idle_bound",
    "feasible_pairs",
    "find_delta",
    "generate_synthetic",
    "incidence_matrix",
    "load_instance",
    "min_fleet",
    "min_fleet_on_graph",
    "run_joint",
    "run_sequential",
    "save_instance",
    "select_lines_full",
    "select_lines_partial",
    "sensing_reward",
    "solve_bip",
    "solve_lower",
    "solve_upper",
    "trip_coverage",
    "validate_instance",
    "verify_assignment",
]
