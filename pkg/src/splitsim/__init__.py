"""splitsim: a discrete-event simulator and control loop for serving a
block-chain model split across heterogeneous edge and cloud nodes.

The pieces compose bottom-up: `model_graph` describes the model and its
split schemes, `topology` the nodes/links and their time-varying
capacity, `cost` scores a (scheme, placement) candidate, `solver` finds
good candidates, `orchestrator` decides when and how to reconfigure,
`simengine` replays it all deterministically, `metrics` aggregates, and
`cli` wires scenarios to runs.
"""

from .cost import (
    CostBreakdown,
    CostWeights,
    FeasibilityReport,
    Placement,
    check_feasible,
    latency_term,
    privacy_term,
    total_cost,
    utilization_term,
)
from .metrics import CdfSeries, MetricsReport, export, latency_cdf, sla_hit_rate
from .model_graph import (
    Block,
    ModelSpec,
    SplitScheme,
    enumerate_splits,
    partition_stats,
    split_count,
    validate_model,
)
from .orchestrator import (
    EwmaState,
    OrchestratorState,
    ReconfigPlan,
    Thresholds,
    TriggerReport,
    apply_reconfiguration,
    decide,
    should_reconfigure,
    static_baseline,
    update_ewma,
)
from .scenario import Scenario, ScenarioError, load_scenario, validate_scenario
from .simengine import (
    ConfigError,
    RequestSpec,
    SimConfig,
    Simulation,
    WorkloadSpec,
    run_scenario,
)
from .solver import (
    BudgetExceededError,
    InfeasibleError,
    Solution,
    SolverConfig,
    dp_chain_solver,
    migrate_only,
    solve_joint,
    solve_placement,
)
from .topology import (
    ConstantTrace,
    LinkSpec,
    MarkovTrace,
    NodeSpec,
    PiecewiseTrace,
    SinusoidTrace,
    Topology,
    snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BudgetExceededError",
    "CdfSeries",
    "CostBreakdown",
    "CostWeights",
    "ConfigError",
    "ConstantTrace",
    "EwmaState",
    "FeasibilityReport",
    "InfeasibleError",
    "LinkSpec",
    "MarkovTrace",
    "MetricsReport",
    "ModelSpec",
    "NodeSpec",
    "OrchestratorState",
    "PiecewiseTrace",
    "Placement",
    "ReconfigPlan",
    "RequestSpec",
    "Scenario",
    "ScenarioError",
    "SimConfig",
    "Simulation",
    "SinusoidTrace",
    "Solution",
    "SolverConfig",
    "SplitScheme",
    "Thresholds",
    "Topology",
    "TriggerReport",
    "WorkloadSpec",
    "apply_reconfiguration",
    "check_feasible",
    "decide",
    "dp_chain_solver",
    "enumerate_splits",
    "export",
    "latency_cdf",
    "latency_term",
    "load_scenario",
    "migrate_only",
    "partition_stats",
    "privacy_term",
    "run_scenario",
    "should_reconfigure",
    "sla_hit_rate",
    "snapshot",
    "solve_joint",
    "solve_placement",
    "split_count",
    "static_baseline",
    "total_cost",
    "update_ewma",
    "utilization_term",
    "validate_model",
    "validate_scenario",
]
