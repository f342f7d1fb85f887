"""Local best-response refinement and the two-stage decision pipeline.

Network-wide coordination minimizes total predicted balance, which can
strand vehicles on internal links when pushing others out reduces the sum.
A few synchronized best-response sweeps afterwards let every intersection
cut its own predicted balance given its neighbors' announced phases, which
recovers the throughput such "clean-out" assignments give up.

`plan_phases` is the full per-period pipeline: build the coordination graph,
message-pass under a fraction of the time budget, then sweep the remainder.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from netsignal.coordination import build_cg
from netsignal.messaging import CoorBudget, CoordResult, coordinate
from netsignal.network import LinkKind, Phase, RoadNetwork
from netsignal.ordering import DagOrder, min_diameter_dag
from netsignal.simulation import JointAssignment, QueueState, TurningModel


@dataclass
class PlannerConfig:
    """Budget split for the two stages plus determinism caps.

    `epsilon` is the fraction of the budget spent on message passing; the
    rest goes to best-response sweeps. `max_cycles` bounds message passes in
    rounds so identical inputs give identical decisions regardless of
    hardware; the wall-clock budget still applies on top.
    """

    budget: CoorBudget = field(default_factory=lambda: CoorBudget.wall_clock(3000.0))
    epsilon: float = 0.8
    max_sweeps: int = 4
    max_cycles: Optional[int] = 2

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if self.max_sweeps < 0:
            raise ValueError("max_sweeps must be >= 0")


def _predicted_own_balance(
    agent: int,
    candidate: Phase,
    actions: JointAssignment,
    state: QueueState,
    net: RoadNetwork,
    turning: TurningModel,
) -> float:
    """Next-period sum of squared queues on the agent's input links, given
    the neighbors' phases fixed."""
    total = 0.0
    for l in net.in_links[agent]:
        link = net.links[l]
        if link.kind is LinkKind.ENTRY:
            inflow = turning.demand(l)
        else:
            inflow = 0.0
            upstream_phase = actions[link.start]
            for m in net.movements_into[l]:
                if m.phase is None or m.phase == upstream_phase:
                    inflow += min(m.sat_flow, state.q[m.key])
        for m in net.movements_from[l]:
            q = state.q[m.key]
            if m.phase is None or m.phase == candidate:
                q -= min(m.sat_flow, q)
            q += inflow * turning.proportion(l, m.to)
            total += q * q
    return total


def best_response(
    agent: int,
    actions: JointAssignment,
    state: QueueState,
    net: RoadNetwork,
    turning: TurningModel,
) -> Phase:
    """Phase minimizing the agent's own predicted balance.

    `actions` must cover every neighbor (their releases feed the agent's
    input queues); it may include the agent itself, in which case ties keep
    the current phase before falling back to the lowest index.
    """
    missing = [j for j in net.neighbors[agent] if j not in actions]
    if missing:
        raise ValueError(f"agent {agent}: missing neighbor actions {missing}")
    scores = [
        _predicted_own_balance(agent, p, actions, state, net, turning) for p in Phase
    ]
    best = min(scores)
    current = actions.get(agent)
    if current is not None and scores[int(current)] <= best + 1e-9:
        return current
    return Phase(int(np.argmin(scores)))


def local_improvement(
    init: JointAssignment,
    state: QueueState,
    net: RoadNetwork,
    turning: TurningModel,
    budget: Optional[CoorBudget] = None,
    max_sweeps: int = 4,
) -> JointAssignment:
    """Synchronized best-response sweeps from `init`.

    Every sweep, each agent best-responds to the previous sweep's actions
    (vectorized over agents; per-agent semantics match `best_response`).
    Stops on budget exhaustion, the sweep cap, or a sweep that changes
    nothing (a fixed point under the keep-current tie rule).
    """
    from netsignal.prediction import movement_arrays, period_model

    start = time.perf_counter()
    arr = movement_arrays(net)
    model = period_model(net, state, turning)
    actions = np.array([int(init[a]) for a in arr.agent_ids], dtype=np.intp)
    sweeps = max_sweeps
    if budget is not None and budget.rounds is not None:
        sweeps = min(sweeps, budget.rounds)
    for _ in range(sweeps):
        if (
            budget is not None
            and budget.wall_ms is not None
            and (time.perf_counter() - start) * 1e3 >= budget.wall_ms
        ):
            break
        scores = model.sweep_scores(actions)
        best = scores.min(axis=1)
        keep = scores[np.arange(len(actions)), actions] <= best + 1e-9
        proposal = np.where(keep, actions, np.argmin(scores, axis=1)).astype(np.intp)
        if np.array_equal(proposal, actions):
            break
        actions = proposal
    return {a: Phase(int(actions[k])) for k, a in enumerate(arr.agent_ids)}


@dataclass
class PlanResult:
    assignment: JointAssignment
    coordination: CoordResult
    sweeps_budget_ms: Optional[float]


def plan_phases_detailed(
    state: QueueState,
    net: RoadNetwork,
    turning: TurningModel,
    cfg: Optional[PlannerConfig] = None,
    order: Optional[DagOrder] = None,
) -> PlanResult:
    """Coordinate under epsilon of the budget, then sweep under the rest."""
    cfg = cfg or PlannerConfig()
    cg = build_cg(state, net, turning)
    if order is None:
        order = min_diameter_dag(cg)
    nl_budget = cfg.budget.scaled(cfg.epsilon)
    if cfg.max_cycles is not None:
        nl_budget = nl_budget.capped_rounds(2 * cfg.max_cycles * max(order.diameter, 1))
    coord = coordinate(cg, order, nl_budget)
    sweep_budget = cfg.budget.scaled(1.0 - cfg.epsilon)
    final = local_improvement(
        coord.assignment, state, net, turning, budget=sweep_budget, max_sweeps=cfg.max_sweeps
    )
    return PlanResult(final, coord, sweep_budget.wall_ms)


def plan_phases(
    state: QueueState,
    net: RoadNetwork,
    turning: TurningModel,
    cfg: Optional[PlannerConfig] = None,
    order: Optional[DagOrder] = None,
) -> JointAssignment:
    return plan_phases_detailed(state, net, turning, cfg, order).assignment
