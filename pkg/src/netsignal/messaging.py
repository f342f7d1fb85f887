"""Anytime coordination by min-sum message passing on an oriented graph.

A pass runs `diameter` synchronous rounds in one edge direction; passes
alternate directions until the budget runs out or a full forward+reverse
cycle leaves every message unchanged. Messages persist across passes, so the
second (reverse) pass combines each agent's own cost with everything
learned on the first pass: on acyclic graphs one cycle yields exact
min-marginals and the recovered joint action is optimal.

A message from sender to receiver scores each receiver phase with the best
the sender can do given it: its own cost, the shared edge cost, and all
messages the sender has received from agents other than the receiver. A
complete joint decision can be extracted at any time by per-agent argmin
over own cost plus received messages, which is what makes the loop
interruptible.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from netsignal.coordination import CoordinationGraph
from netsignal.network import NUM_PHASES, Phase
from netsignal.ordering import DagOrder
from netsignal.simulation import JointAssignment


@dataclass
class MessageTable:
    """Per-directed-edge message vectors over the receiver's phase domain."""

    messages: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    rounds: int = 0


@dataclass(frozen=True)
class CoorBudget:
    """Caps on coordination effort: message rounds, wall-clock, or both.

    Whichever cap trips first ends the run; rounds caps keep results
    hardware-independent, wall-clock caps bound latency.
    """

    rounds: Optional[int] = None
    wall_ms: Optional[float] = None

    def __post_init__(self):
        if self.rounds is None and self.wall_ms is None:
            raise ValueError("budget needs a rounds or wall-clock cap")
        if self.rounds is not None and self.rounds < 0:
            raise ValueError("rounds cap must be >= 0")
        if self.wall_ms is not None and self.wall_ms < 0:
            raise ValueError("wall-clock cap must be >= 0")

    @classmethod
    def from_rounds(cls, n: int) -> "CoorBudget":
        return cls(rounds=n)

    @classmethod
    def wall_clock(cls, ms: float) -> "CoorBudget":
        return cls(wall_ms=ms)

    def scaled(self, fraction: float) -> "CoorBudget":
        return CoorBudget(
            rounds=None if self.rounds is None else int(self.rounds * fraction),
            wall_ms=None if self.wall_ms is None else self.wall_ms * fraction,
        )

    def capped_rounds(self, cap: int) -> "CoorBudget":
        rounds = cap if self.rounds is None else min(self.rounds, cap)
        return CoorBudget(rounds=rounds, wall_ms=self.wall_ms)


def compute_message(sender: int, receiver: int, cg: CoordinationGraph, table: MessageTable) -> np.ndarray:
    """Message vector over the receiver's phases (missing inputs are zero)."""
    u = cg.individual[sender].copy()
    for k in cg.neighbors[sender]:
        if k == receiver:
            continue
        incoming = table.messages.get((k, sender))
        if incoming is not None:
            u = u + incoming
    pair = cg.edge_cost(sender, receiver)  # [x_sender][x_receiver]
    return (u[:, None] + pair).min(axis=0)


def decide(agent: int, cg: CoordinationGraph, table: MessageTable) -> Phase:
    """Phase minimizing own cost plus all received messages; lowest index on
    ties. Works on any partial table, including an empty one."""
    vec = cg.individual[agent].copy()
    for j in cg.neighbors[agent]:
        incoming = table.messages.get((j, agent))
        if incoming is not None:
            vec = vec + incoming
    return Phase(int(np.argmin(vec)))


class _Engine:
    """Vectorized synchronous rounds over the orientation's edge list.

    Forward messages travel along `order.edges`, reverse messages against
    them; both stores persist so each new message can exclude exactly the
    recipient's own contribution.
    """

    def __init__(self, cg: CoordinationGraph, order: DagOrder):
        self.cg = cg
        self.agents = cg.agents
        self.index = {a: k for k, a in enumerate(self.agents)}
        self.c_ind = np.stack([cg.individual[a] for a in self.agents])
        edges = order.edges
        self.edges = edges
        n_edges = len(edges)
        self.src = np.array([self.index[u] for u, v in edges], dtype=np.intp)
        self.dst = np.array([self.index[v] for u, v in edges], dtype=np.intp)
        if n_edges:
            self.cost_fwd = np.stack([cg.edge_cost(u, v) for u, v in edges])
        else:
            self.cost_fwd = np.zeros((0, NUM_PHASES, NUM_PHASES))
        self.cost_rev = self.cost_fwd.transpose(0, 2, 1)
        self.r_fwd = np.zeros((n_edges, NUM_PHASES))
        self.r_rev = np.zeros((n_edges, NUM_PHASES))
        self.sent_fwd = False
        self.sent_rev = False

    def _incoming_sums(self) -> np.ndarray:
        sums = np.zeros_like(self.c_ind)
        np.add.at(sums, self.dst, self.r_fwd)
        np.add.at(sums, self.src, self.r_rev)
        return sums

    def run_round(self, forward: bool) -> None:
        sums = self._incoming_sums()
        if forward:
            base = self.c_ind[self.src] + sums[self.src] - self.r_rev
            self.r_fwd = np.min(base[:, :, None] + self.cost_fwd, axis=1)
            self.sent_fwd = True
        else:
            base = self.c_ind[self.dst] + sums[self.dst] - self.r_fwd
            self.r_rev = np.min(base[:, :, None] + self.cost_rev, axis=1)
            self.sent_rev = True

    def decide_all(self) -> JointAssignment:
        totals = self.c_ind + self._incoming_sums()
        picks = np.argmin(totals, axis=1)
        return {a: Phase(int(picks[k])) for k, a in enumerate(self.agents)}

    def seed(self, table: MessageTable) -> None:
        for e, (u, v) in enumerate(self.edges):
            if (u, v) in table.messages:
                self.r_fwd[e] = table.messages[(u, v)]
                self.sent_fwd = True
            if (v, u) in table.messages:
                self.r_rev[e] = table.messages[(v, u)]
                self.sent_rev = True

    def table(self, rounds: int) -> MessageTable:
        messages: dict[tuple[int, int], np.ndarray] = {}
        for e, (u, v) in enumerate(self.edges):
            if self.sent_fwd:
                messages[(u, v)] = self.r_fwd[e].copy()
            if self.sent_rev:
                messages[(v, u)] = self.r_rev[e].copy()
        return MessageTable(messages=messages, rounds=rounds)


def message_passing(
    cg: CoordinationGraph,
    order: DagOrder,
    rounds: Optional[int] = None,
    table: Optional[MessageTable] = None,
) -> MessageTable:
    """Run synchronous rounds along the orientation; defaults to diameter
    rounds, after which the table is a fixpoint."""
    if rounds is None:
        rounds = order.diameter
    engine = _Engine(cg, order)
    if table is not None:
        engine.seed(table)
    done = 0
    for _ in range(rounds):
        if not order.edges:
            break
        engine.run_round(forward=True)
        done += 1
    return engine.table((table.rounds if table else 0) + done)


@dataclass
class CoordResult:
    assignment: JointAssignment
    passes: int
    rounds: int
    converged: bool


def coordinate(
    cg: CoordinationGraph,
    order: DagOrder,
    budget: CoorBudget,
    trace: Optional[Callable[[int, int, JointAssignment], None]] = None,
) -> CoordResult:
    """Alternating forward/reverse passes under a budget; anytime.

    A complete joint decision is snapshotted after every finished pass; an
    interruption mid-pass returns the latest snapshot, or a decision from
    the partial messages if no pass ever finished. Stops early once a full
    cycle no longer changes any message.
    """
    start = time.perf_counter()
    engine = _Engine(cg, order)
    if not order.edges:
        return CoordResult(engine.decide_all(), 0, 0, True)

    def exhausted(done: int) -> bool:
        if budget.rounds is not None and done >= budget.rounds:
            return True
        if budget.wall_ms is not None and (time.perf_counter() - start) * 1e3 >= budget.wall_ms:
            return True
        return False

    rounds_done = 0
    passes = 0
    snapshot: Optional[JointAssignment] = None
    previous_cycle: Optional[tuple[np.ndarray, np.ndarray]] = None
    forward = True
    while True:
        for _ in range(order.diameter):
            if exhausted(rounds_done):
                if snapshot is None:
                    snapshot = engine.decide_all()
                return CoordResult(snapshot, passes, rounds_done, False)
            engine.run_round(forward)
            rounds_done += 1
        passes += 1
        snapshot = engine.decide_all()
        if trace is not None:
            trace(passes, rounds_done, snapshot)
        if not forward:
            cycle = (engine.r_fwd.copy(), engine.r_rev.copy())
            if previous_cycle is not None and all(
                np.allclose(a, b, rtol=0.0, atol=1e-9)
                for a, b in zip(cycle, previous_cycle)
            ):
                return CoordResult(snapshot, passes, rounds_done, True)
            previous_cycle = cycle
        forward = not forward
