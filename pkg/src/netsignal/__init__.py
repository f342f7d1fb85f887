"""netsignal: anytime decentralized traffic-signal coordination.

Each intersection is an agent on a coordination graph whose cost tables
encode the predicted next-period squared-queue balance of the links between
neighbors. An anytime alternating-direction message-passing pass minimizes
the network-wide balance, a few local best-response sweeps recover
throughput, and a built-in queue-dynamics simulator evaluates the result
against fixed-time and max-pressure baselines.
"""

from netsignal.controllers import FixedTimeConfig, fixed_time, max_pressure, phase_pressure
from netsignal.coordination import (
    CoordinationGraph,
    brute_force_optimum,
    build_cg,
    dump_edge_costs,
    global_cost,
)
from netsignal.harness import (
    BudgetOverrunError,
    DelayModel,
    Metrics,
    RateSpec,
    Scenario,
    network_order,
    run_experiment,
    simulate_comm_delay,
    write_comparison_csv,
    write_metrics_csv,
)
from netsignal.improvement import (
    PlannerConfig,
    best_response,
    local_improvement,
    plan_phases,
    plan_phases_detailed,
)
from netsignal.messaging import (
    CoorBudget,
    CoordResult,
    MessageTable,
    compute_message,
    coordinate,
    decide,
    message_passing,
)
from netsignal.network import (
    Link,
    LinkKind,
    LoadError,
    Movement,
    Phase,
    RoadNetwork,
    build_grid,
    load_network,
    save_network,
    validate,
)
from netsignal.ordering import DagOrder, TopologyError, eccentricity, min_diameter_dag, reverse
from netsignal.simulation import (
    Flow,
    JointAssignment,
    MetricsError,
    QueueState,
    SimConfig,
    SimMode,
    TurningModel,
    Vehicle,
    balance_index,
    estimate_turning,
    generate_uniform_flow,
    initial_state,
    load_flow,
    predict_next_queues,
    save_flow,
    step,
    travel_time_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetOverrunError",
    "CoorBudget",
    "CoordResult",
    "CoordinationGraph",
    "DagOrder",
    "DelayModel",
    "FixedTimeConfig",
    "Flow",
    "JointAssignment",
    "Link",
    "LinkKind",
    "LoadError",
    "MessageTable",
    "Metrics",
    "MetricsError",
    "Movement",
    "Phase",
    "PlannerConfig",
    "QueueState",
    "RateSpec",
    "RoadNetwork",
    "Scenario",
    "SimConfig",
    "SimMode",
    "TopologyError",
    "TurningModel",
    "Vehicle",
    "balance_index",
    "best_response",
    "brute_force_optimum",
    "build_cg",
    "build_grid",
    "compute_message",
    "coordinate",
    "decide",
    "dump_edge_costs",
    "eccentricity",
    "estimate_turning",
    "fixed_time",
    "generate_uniform_flow",
    "global_cost",
    "initial_state",
    "load_flow",
    "load_network",
    "local_improvement",
    "max_pressure",
    "message_passing",
    "min_diameter_dag",
    "network_order",
    "phase_pressure",
    "plan_phases",
    "plan_phases_detailed",
    "predict_next_queues",
    "reverse",
    "run_experiment",
    "save_flow",
    "save_network",
    "simulate_comm_delay",
    "step",
    "travel_time_metrics",
    "validate",
    "write_comparison_csv",
    "write_metrics_csv",
]
