"""Baseline signal controllers: fixed cycling and greedy pressure.

Both act per intersection with no communication. The pressure of a movement
is its saturation flow times the gap between its upstream queue and the
turning-weighted queues downstream; picking the phase with the highest
total pressure is the classic stabilizing greedy rule the coordinated
planner is measured against.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from netsignal.network import LinkKind, Phase, RoadNetwork
from netsignal.simulation import JointAssignment, QueueState, TurningModel


@dataclass
class FixedTimeConfig:
    sequence: tuple[Phase, ...] = (
        Phase.WE_STRAIGHT,
        Phase.WE_LEFT,
        Phase.SN_STRAIGHT,
        Phase.SN_LEFT,
    )
    phase_duration: int = 1  # periods per phase

    def __post_init__(self):
        if not self.sequence:
            raise ValueError("sequence must be non-empty")
        if self.phase_duration < 1:
            raise ValueError("phase_duration must be >= 1")


def fixed_time(period: int, cfg: FixedTimeConfig, intersections: Iterable[int]) -> JointAssignment:
    """Every intersection shows the same scheduled phase."""
    phase = cfg.sequence[(period // cfg.phase_duration) % len(cfg.sequence)]
    return {i: phase for i in intersections}


def phase_pressure(
    agent: int,
    phase: Phase,
    state: QueueState,
    net: RoadNetwork,
    turning: TurningModel,
) -> float:
    """Total pressure of the movements the phase would activate.

    Right turns run regardless of phase and are excluded. Exit links have no
    downstream queues, so their term is the upstream queue alone.
    """
    total = 0.0
    for m in net.movements_at[agent]:
        if m.phase != phase:
            continue
        downstream = 0.0
        if net.links[m.to].kind is not LinkKind.EXIT:
            for down in net.movements_from[m.to]:
                downstream += turning.proportion(m.to, down.to) * state.q[down.key]
        total += m.sat_flow * (state.q[m.key] - downstream)
    return total


def max_pressure(state: QueueState, net: RoadNetwork, turning: TurningModel) -> JointAssignment:
    """Independently per intersection, the highest-pressure phase (lowest
    index on ties)."""
    decision: JointAssignment = {}
    for i in sorted(net.intersections):
        best_phase = Phase(0)
        best_value = None
        for p in Phase:
            value = phase_pressure(i, p, state, net, turning)
            if best_value is None or value > best_value:
                best_phase, best_value = p, value
        decision[i] = best_phase
    return decision
