"""Experiment orchestration: controller loop, metrics, delay modeling.

One experiment steps the micro simulator over the horizon, asking the
selected controller for a joint phase decision each period from the true
queue state and the route-estimated turning model. Everything except the
wall-clock columns is deterministic given the scenario seed; randomness
flows through named substreams so flow generation and delay sampling cannot
perturb each other.
"""
from __future__ import annotations

import csv
import time
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from netsignal.controllers import FixedTimeConfig, fixed_time, max_pressure
from netsignal.coordination import build_cg
from netsignal.improvement import PlannerConfig, plan_phases_detailed
from netsignal.messaging import coordinate
from netsignal.network import RoadNetwork
from netsignal.ordering import DagOrder, min_diameter_dag
from netsignal.simulation import (
    Flow,
    JointAssignment,
    QueueState,
    SimConfig,
    TurningModel,
    Vehicle,
    balance_index,
    estimate_turning,
    generate_uniform_flow,
    initial_state,
    step,
    travel_time_metrics,
)

CONTROLLERS = ("fixedtime", "maxpressure", "nlcoor", "emc")


class BudgetOverrunError(RuntimeError):
    """Safety valve: a controller exceeded 10x its wall-clock budget."""


def substream_seed(seed: int, name: str) -> int:
    return (seed * 1_000_003 + zlib.crc32(name.encode())) % (2**31)


@dataclass
class RateSpec:
    rate_vps: float
    duration_s: float
    seed: Optional[int] = None


@dataclass
class DelayModel:
    """Per-message latency N(mu, sigma^2) in milliseconds, clamped at zero."""

    mu_ms: float
    sigma_ms: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.mu_ms < 0:
            raise ValueError("mu must be >= 0")


@dataclass
class Scenario:
    network: RoadNetwork
    flow: Union[Sequence[Vehicle], RateSpec]
    sim: SimConfig
    controller: str = "emc"
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    fixed: FixedTimeConfig = field(default_factory=FixedTimeConfig)
    delay: Optional[DelayModel] = None
    delay_nodes: Optional[int] = None

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ValueError(f"unknown controller {self.controller!r}, expected one of {CONTROLLERS}")


@dataclass
class PeriodRow:
    period: int
    total_queue: float
    balance: float
    decision_ms: float
    comm_delay_ms: float


@dataclass
class Metrics:
    avg_travel_time_s: float
    throughput: int
    mean_balance: float
    max_total_queue: float
    mean_decision_ms: float
    mean_comm_delay_ms: float
    rows: list[PeriodRow]


class _FixedTimeController:
    needs_order = False

    def __init__(self, scenario: Scenario):
        self.cfg = scenario.fixed
        self.intersections = sorted(scenario.network.intersections)
        self.rounds_last = 0

    def decide(self, state: QueueState, turning: TurningModel, period: int) -> JointAssignment:
        return fixed_time(period, self.cfg, self.intersections)


class _MaxPressureController:
    needs_order = False

    def __init__(self, scenario: Scenario):
        self.net = scenario.network
        self.rounds_last = 0

    def decide(self, state: QueueState, turning: TurningModel, period: int) -> JointAssignment:
        return max_pressure(state, self.net, turning)


class _MessagePassingController:
    """Coordination stage only, under the full planner budget."""

    needs_order = True

    def __init__(self, scenario: Scenario):
        self.net = scenario.network
        self.cfg = scenario.planner
        self.order = network_order(self.net)
        self.rounds_last = 0

    def decide(self, state: QueueState, turning: TurningModel, period: int) -> JointAssignment:
        cg = build_cg(state, self.net, turning)
        budget = self.cfg.budget
        if self.cfg.max_cycles is not None:
            budget = budget.capped_rounds(2 * self.cfg.max_cycles * max(self.order.diameter, 1))
        result = coordinate(cg, self.order, budget)
        self.rounds_last = result.rounds
        return result.assignment


class _PlannerController:
    needs_order = True

    def __init__(self, scenario: Scenario):
        self.net = scenario.network
        self.cfg = scenario.planner
        self.order = network_order(self.net)
        self.rounds_last = 0

    def decide(self, state: QueueState, turning: TurningModel, period: int) -> JointAssignment:
        detail = plan_phases_detailed(state, self.net, turning, self.cfg, order=self.order)
        self.rounds_last = detail.coordination.rounds
        return detail.assignment


def network_order(net: RoadNetwork) -> DagOrder:
    """Message-passing orientation for a network; topology-only, so it can
    be computed once and reused every period."""
    zero = initial_state(net)
    turning = TurningModel(r={}, d={})
    return min_diameter_dag(build_cg(zero, net, turning))


def make_controller(scenario: Scenario):
    return {
        "fixedtime": _FixedTimeController,
        "maxpressure": _MaxPressureController,
        "nlcoor": _MessagePassingController,
        "emc": _PlannerController,
    }[scenario.controller](scenario)


def resolve_flow(scenario: Scenario) -> list[Vehicle]:
    if isinstance(scenario.flow, RateSpec):
        seed = scenario.flow.seed
        if seed is None:
            seed = substream_seed(scenario.sim.seed, "flow")
        return generate_uniform_flow(
            scenario.network, scenario.flow.rate_vps, scenario.flow.duration_s, seed
        )
    return list(scenario.flow)


def modeled_delay_ms(
    order: DagOrder,
    rounds: int,
    model: DelayModel,
    nodes: Optional[int] = None,
) -> float:
    """Virtual-clock total: per round, the slowest message on the critical
    path; intra-node messages are free under a node partition."""
    n_edges = len(order.edges)
    if rounds <= 0 or n_edges == 0:
        return 0.0
    rng = np.random.default_rng(np.random.SeedSequence([model.seed, 0xD31A]))
    samples = rng.normal(model.mu_ms, model.sigma_ms, size=(rounds, n_edges))
    np.clip(samples, 0.0, None, out=samples)
    if nodes:
        # intra-node messages are free; same per-message draws either way
        agents = sorted(order.dist)
        perm = rng.permutation(len(agents))
        node_of = {a: int(perm[k]) % nodes for k, a in enumerate(agents)}
        mask = np.array([node_of[u] != node_of[v] for u, v in order.edges])
        if not mask.any():
            return 0.0
        samples = samples[:, mask]
    return float(samples.max(axis=1).sum())


def simulate_comm_delay(
    order: DagOrder,
    passes: int,
    model: DelayModel,
    nodes: Optional[int] = None,
) -> float:
    """Modeled communication time (ms) for `passes` full message passes."""
    return modeled_delay_ms(order, passes * order.diameter, model, nodes)


def run_experiment(scenario: Scenario) -> Metrics:
    net = scenario.network
    cfg = scenario.sim
    vehicles = resolve_flow(scenario)
    flow = Flow(vehicles, cfg.tau)
    controller = make_controller(scenario)
    budget_wall = scenario.planner.budget.wall_ms if controller.needs_order else None
    delay_model = scenario.delay if controller.needs_order else None

    state = initial_state(net)
    rows: list[PeriodRow] = []
    delay_seed = substream_seed(cfg.seed, "delay")
    for t in range(cfg.horizon):
        turning = estimate_turning(state, net, flow)
        t0 = time.perf_counter()
        decision = controller.decide(state, turning, t)
        decision_ms = (time.perf_counter() - t0) * 1e3
        if budget_wall is not None and decision_ms > 10 * budget_wall:
            raise BudgetOverrunError(
                f"controller took {decision_ms:.0f} ms against a {budget_wall:.0f} ms budget"
            )
        comm_ms = 0.0
        if delay_model is not None and controller.rounds_last > 0:
            per_period = DelayModel(delay_model.mu_ms, delay_model.sigma_ms, delay_seed + t)
            comm_ms = modeled_delay_ms(
                controller.order, controller.rounds_last, per_period, scenario.delay_nodes
            )
        state = step(state, decision, net, cfg, flow=flow)
        rows.append(
            PeriodRow(t, state.total_queue(), balance_index(state), decision_ms, comm_ms)
        )

    base = travel_time_metrics(
        vehicles,
        end_time=cfg.horizon * cfg.tau,
        balance_series=[r.balance for r in rows],
        queue_series=[r.total_queue for r in rows],
    )
    return Metrics(
        avg_travel_time_s=base.avg_travel_time_s,
        throughput=base.throughput,
        mean_balance=base.mean_balance,
        max_total_queue=base.max_total_queue,
        mean_decision_ms=float(np.mean([r.decision_ms for r in rows])),
        mean_comm_delay_ms=float(np.mean([r.comm_delay_ms for r in rows])),
        rows=rows,
    )


def write_metrics_csv(metrics: Metrics, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "total_queue", "balance", "decision_ms", "comm_delay_ms"])
        for r in metrics.rows:
            writer.writerow(
                [r.period, r.total_queue, r.balance, f"{r.decision_ms:.3f}", f"{r.comm_delay_ms:.3f}"]
            )


def write_comparison_csv(results: dict[str, Metrics], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["controller", "avg_travel_time_s", "mean_balance", "mean_decision_ms"])
        for name, m in results.items():
            writer.writerow(
                [name, f"{m.avg_travel_time_s:.2f}", f"{m.mean_balance:.2f}", f"{m.mean_decision_ms:.3f}"]
            )
