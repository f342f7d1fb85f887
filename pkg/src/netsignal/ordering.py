"""Edge orientation for message passing: sink selection by eccentricity.

Orienting every edge toward a minimum-eccentricity sink gives the shallowest
possible DAG, so synchronous message passing converges in the fewest rounds
(one per hop of the sink's eccentricity).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

from netsignal.coordination import CoordinationGraph


class TopologyError(ValueError):
    """Raised when the coordination graph is not connected."""


@dataclass(frozen=True)
class DagOrder:
    """An orientation of the CG edges plus the round count it implies.

    `edges` hold (sender, receiver) pairs; `dist` is hop distance to the
    sink; `diameter` is the sink's eccentricity, which bounds the length of
    any directed path.
    """

    sink: int
    edges: tuple[tuple[int, int], ...]
    dist: dict[int, int]
    diameter: int

    def predecessors(self) -> dict[int, list[int]]:
        prev: dict[int, list[int]] = {a: [] for a in self.dist}
        for u, v in self.edges:
            prev[v].append(u)
        return prev

    def followers(self) -> dict[int, list[int]]:
        foll: dict[int, list[int]] = {a: [] for a in self.dist}
        for u, v in self.edges:
            foll[u].append(v)
        return foll


def _bfs_distances(cg: CoordinationGraph, source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for nbr in cg.neighbors[node]:
            if nbr not in dist:
                dist[nbr] = dist[node] + 1
                queue.append(nbr)
    return dist


def eccentricity(cg: CoordinationGraph, agent: int) -> int:
    """Max BFS hop distance from `agent` to any other agent."""
    dist = _bfs_distances(cg, agent)
    if len(dist) != len(cg.agents):
        missing = sorted(set(cg.agents) - dist.keys())
        raise TopologyError(f"coordination graph disconnected, unreachable from {agent}: {missing}")
    return max(dist.values())


def min_diameter_dag(cg: CoordinationGraph) -> DagOrder:
    """Orient every edge from the agent farther from the best sink to the
    nearer one.

    The sink is the agent of minimum eccentricity (lowest id on ties);
    equal-distance edges point from the higher id to the lower id, so the
    orientation is acyclic and deterministic.
    """
    best_sink = None
    best_ecc = None
    for a in cg.agents:
        ecc = eccentricity(cg, a)
        if best_ecc is None or ecc < best_ecc or (ecc == best_ecc and a < best_sink):
            best_sink, best_ecc = a, ecc
    dist = _bfs_distances(cg, best_sink)
    edges = []
    for (i, j) in sorted(cg.edges):
        if dist[i] < dist[j]:
            edges.append((j, i))
        elif dist[j] < dist[i]:
            edges.append((i, j))
        else:
            edges.append((max(i, j), min(i, j)))
    return DagOrder(sink=best_sink, edges=tuple(edges), dist=dict(dist), diameter=best_ecc)


def reverse(order: DagOrder) -> DagOrder:
    """Flip every edge; an involution that preserves the round bound."""
    return replace(order, edges=tuple((v, u) for (u, v) in order.edges))
