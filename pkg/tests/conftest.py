"""Shared fixtures: small networks and hand-built traffic states."""
from dataclasses import dataclass, replace

import numpy as np
import pytest

from netsignal.network import Phase, RoadNetwork, build_grid
from netsignal.simulation import Flow, QueueState, SimMode, TurningModel, Vehicle, initial_state


def micro_state_with(net, queued, period=0):
    """Build a micro QueueState holding the given vehicles per movement.

    `queued` maps movement keys to lists of Vehicle objects whose routes pass
    through that movement. The vehicles are marked as already entered (depart
    before period 0) so the flow does not re-inject them. Returns
    (state, flow).
    """
    vehicles = [v for vs in queued.values() for v in vs]
    state = initial_state(net, SimMode.MICRO)
    fifo = dict(state.fifo)
    q = dict(state.q)
    for key, vs in queued.items():
        fifo[key] = tuple(v.id for v in vs)
        q[key] = float(len(vs))
    for v in vehicles:
        v.depart_s = -10.0
        v.enter_time = 0.0
    flow = Flow(vehicles, tau=10.0)
    return replace(state, q=q, fifo=fifo), flow


def macro_state_with(net, queues, period=0):
    state = initial_state(net, SimMode.MACRO)
    q = dict(state.q)
    q.update({k: float(v) for k, v in queues.items()})
    return replace(state, q=q, period=period)


def random_macro_state(net, rng, max_q=10):
    q = {k: float(rng.integers(0, max_q + 1)) for k in net.movement_keys()}
    return replace(initial_state(net, SimMode.MACRO), q=q)


def random_turning(net, rng, max_demand=4.0):
    r = {}
    for l, succs in net.down_links.items():
        if not succs:
            continue
        weights = rng.random(len(succs)) + 1e-3
        weights /= weights.sum()
        for h, w in zip(succs, weights):
            r[(l, h)] = float(w)
    d = {l: float(rng.random() * max_demand) for l in net.entry_links()}
    return TurningModel(r=r, d=d)


@dataclass
class TwoIntersectionCase:
    """The worked two-intersection example: entry l1 into i, internal l2 to
    j, exit l3 (left turn target at i). Four vehicles queue on (l1, l2), two
    on (l1, l3); everything on l2 heads to the exit east of j."""

    net: RoadNetwork
    i: int
    j: int
    l1: int
    l2: int
    l3: int
    exit_j: int
    state: QueueState
    flow: Flow
    turning: TurningModel


@pytest.fixture
def fig_two(request):
    net = build_grid(1, 2, 300, 300, 5)
    i, j = 0, 1
    l2 = next(
        l for l in net.internal_links() if net.links[l].start == i and net.links[l].end == j
    )
    l1 = next(
        m.frm
        for m in net.movements_at[i]
        if m.to == l2 and m.phase == Phase.WE_STRAIGHT
    )
    l3 = next(m.to for m in net.movements_at[i] if m.frm == l1 and m.phase == Phase.WE_LEFT)
    exit_j = next(m.to for m in net.movements_at[j] if m.frm == l2 and m.phase == Phase.WE_STRAIGHT)

    through = [Vehicle(k, l1, 0.0, exit_j, (l1, l2, exit_j)) for k in range(4)]
    turners = [Vehicle(4 + k, l1, 0.0, l3, (l1, l3)) for k in range(2)]
    state, flow = micro_state_with(net, {(l1, l2): through, (l1, l3): turners})

    turning = random_turning(net, np.random.default_rng(0), max_demand=0.0)
    turning.d = {l: 0.0 for l in net.entry_links()}
    for h in net.down_links[l2]:
        turning.r[(l2, h)] = 1.0 if h == exit_j else 0.0
    for h in net.down_links[l1]:
        turning.r[(l1, h)] = 0.0

    return TwoIntersectionCase(net, i, j, l1, l2, l3, exit_j, state, flow, turning)


def all_phase(net, phase):
    return {i: phase for i in net.intersections}


def random_cg(rng, n_agents, edge_pairs, scale=10.0):
    """A hand-rolled coordination graph with random non-negative tables."""
    from netsignal.coordination import CoordinationGraph

    agents = tuple(range(n_agents))
    edge_costs = {
        (min(i, j), max(i, j)): np.round(rng.random((4, 4)) * scale, 3)
        for (i, j) in edge_pairs
    }
    individual = {a: np.round(rng.random(4) * scale, 3) for a in agents}
    return CoordinationGraph(agents, tuple(edge_costs), edge_costs, individual)


def random_tree_edges(rng, n_agents):
    """Random spanning tree over agents 0..n-1."""
    edges = []
    for j in range(1, n_agents):
        i = int(rng.integers(j))
        edges.append((i, j))
    return edges


def random_connected_edges(rng, n_agents, extra=0):
    edges = set(random_tree_edges(rng, n_agents))
    attempts = 0
    while extra > 0 and attempts < 50 * extra:
        i, j = sorted(rng.integers(n_agents, size=2).tolist())
        attempts += 1
        if i != j and (i, j) not in edges:
            edges.add((i, j))
            extra -= 1
    return sorted(edges)
