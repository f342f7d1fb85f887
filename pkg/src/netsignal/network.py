"""Road-network topology: links, movements, phases, and adjacency queries.

The network is a directed-link graph. Entry links feed traffic into boundary
intersections, internal links connect intersections, exit links drain traffic
out. A movement (l, h) is traffic crossing one intersection from input link l
to output link h; phased movements are gated by one of four signal phases,
right turns run unphased every period.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Optional


class Phase(IntEnum):
    """The four-phase signal scheme: straight/left per axis."""

    WE_STRAIGHT = 0
    WE_LEFT = 1
    SN_STRAIGHT = 2
    SN_LEFT = 3


PHASES: tuple[Phase, ...] = tuple(Phase)
NUM_PHASES = len(PHASES)

DEFAULT_SPEED_MPS = 10.0
DEFAULT_SAT_FLOW = 5.0
DEFAULT_RIGHT_TURN_FLOW = 3.0


class LinkKind(Enum):
    ENTRY = "entry"
    INTERNAL = "internal"
    EXIT = "exit"


class LoadError(ValueError):
    """Raised when a network or flow file cannot be parsed or is invalid."""


@dataclass
class Link:
    """A directed road segment.

    Entry links have no start intersection, exit links no end intersection,
    internal links have both.
    """

    id: int
    kind: LinkKind
    start: Optional[int]
    end: Optional[int]
    length_m: float
    speed_mps: float = DEFAULT_SPEED_MPS


@dataclass
class Movement:
    """Traffic crossing `intersection` from input link `frm` to output `to`.

    `phase` is None for right turns, which are served every period.
    `sat_flow` caps vehicles discharged per period when the movement is
    active.
    """

    frm: int
    to: int
    intersection: int
    phase: Optional[Phase]
    sat_flow: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.frm, self.to)


class RoadNetwork:
    """Immutable-by-convention topology with adjacency caches.

    Caches are derived from `links` and `movements` at construction and are
    not kept in sync with later mutation; mutate-then-revalidate is only done
    by tests probing `validate`.
    """

    def __init__(
        self,
        intersections: Iterable[int],
        links: Iterable[Link],
        movements: Iterable[Movement],
        coords: Optional[dict[int, tuple[float, float]]] = None,
    ):
        self.intersections: set[int] = set(intersections)
        self.links: dict[int, Link] = {l.id: l for l in links}
        self.movements: list[Movement] = list(movements)
        self.coords: dict[int, tuple[float, float]] = dict(coords or {})
        self._build_caches()

    def _build_caches(self) -> None:
        self.in_links: dict[int, list[int]] = {i: [] for i in self.intersections}
        self.out_links: dict[int, list[int]] = {i: [] for i in self.intersections}
        for lid in sorted(self.links):
            link = self.links[lid]
            if link.end in self.in_links:
                self.in_links[link.end].append(lid)
            if link.start in self.out_links:
                self.out_links[link.start].append(lid)

        self.neighbors: dict[int, list[int]] = {i: [] for i in self.intersections}
        seen: set[tuple[int, int]] = set()
        for link in self.links.values():
            if link.kind is LinkKind.INTERNAL and link.start is not None and link.end is not None:
                for a, b in ((link.start, link.end), (link.end, link.start)):
                    if (a, b) not in seen and a in self.neighbors:
                        seen.add((a, b))
                        self.neighbors[a].append(b)
        for i in self.neighbors:
            self.neighbors[i].sort()

        self.boundary: set[int] = {
            i
            for i in self.intersections
            if any(self.links[l].kind is LinkKind.ENTRY for l in self.in_links[i])
        }

        # Movement-derived adjacency: downstream/upstream links of a link are
        # the targets/sources of its movements (U-turn links are never
        # movement targets, so they do not appear here).
        self.movement_map: dict[tuple[int, int], Movement] = {}
        self.movements_at: dict[int, list[Movement]] = {i: [] for i in self.intersections}
        self.movements_from: dict[int, list[Movement]] = {l: [] for l in self.links}
        self.movements_into: dict[int, list[Movement]] = {l: [] for l in self.links}
        for m in self.movements:
            self.movement_map[m.key] = m
            if m.intersection in self.movements_at:
                self.movements_at[m.intersection].append(m)
            if m.frm in self.movements_from:
                self.movements_from[m.frm].append(m)
            if m.to in self.movements_into:
                self.movements_into[m.to].append(m)
        self.down_links: dict[int, list[int]] = {
            l: [m.to for m in ms] for l, ms in self.movements_from.items()
        }
        self.up_links: dict[int, list[int]] = {
            l: [m.frm for m in ms] for l, ms in self.movements_into.items()
        }

    def entry_links(self) -> list[int]:
        return [l for l in sorted(self.links) if self.links[l].kind is LinkKind.ENTRY]

    def exit_links(self) -> list[int]:
        return [l for l in sorted(self.links) if self.links[l].kind is LinkKind.EXIT]

    def internal_links(self) -> list[int]:
        return [l for l in sorted(self.links) if self.links[l].kind is LinkKind.INTERNAL]

    def movement_keys(self) -> list[tuple[int, int]]:
        return [m.key for m in self.movements]

    def to_dict(self) -> dict:
        """Canonical JSON-ready form (also used for structural equality)."""
        inter = [
            {"id": i, "x": self.coords.get(i, (0.0, 0.0))[0], "y": self.coords.get(i, (0.0, 0.0))[1]}
            for i in sorted(self.intersections)
        ]
        links = []
        for lid in sorted(self.links):
            l = self.links[lid]
            entry = {"id": l.id, "kind": l.kind.value, "length_m": l.length_m, "speed_mps": l.speed_mps}
            if l.start is not None:
                entry["start"] = l.start
            if l.end is not None:
                entry["end"] = l.end
            links.append(entry)
        movements = []
        for m in sorted(self.movements, key=lambda m: m.key):
            entry = {"from": m.frm, "to": m.to, "intersection": m.intersection, "sat_flow": m.sat_flow}
            if m.phase is not None:
                entry["phase"] = int(m.phase)
            movements.append(entry)
        return {"intersections": inter, "links": links, "movements": movements}


# Compass handling for grid construction. Directions are indexed N, E, S, W;
# an approach direction is the side an input link enters from, so traffic
# approaching from W heads E.
_DIRS = ("N", "E", "S", "W")
_OPPOSITE = {"N": "S", "S": "N", "E": "W", "W": "E"}
_LEFT_OF = {"W": "N", "E": "S", "S": "W", "N": "E"}
_RIGHT_OF = {"W": "S", "E": "N", "S": "E", "N": "W"}
_STRAIGHT_PHASE = {"W": Phase.WE_STRAIGHT, "E": Phase.WE_STRAIGHT, "S": Phase.SN_STRAIGHT, "N": Phase.SN_STRAIGHT}
_LEFT_PHASE = {"W": Phase.WE_LEFT, "E": Phase.WE_LEFT, "S": Phase.SN_LEFT, "N": Phase.SN_LEFT}


def build_grid(
    rows: int,
    cols: int,
    h_len: float = 300.0,
    v_len: float = 300.0,
    sat_flow: float = DEFAULT_SAT_FLOW,
    right_turn_flow: float = DEFAULT_RIGHT_TURN_FLOW,
    speed_mps: float = DEFAULT_SPEED_MPS,
) -> RoadNetwork:
    """Build a rows x cols grid of bi-directional 4-way intersections.

    Boundary intersections get entry/exit stubs on approaches without an
    internal neighbor, so every intersection keeps the full 12-movement
    structure (4 approaches x straight/left/right).
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be >= 1, got {rows}x{cols}")
    if h_len <= 0 or v_len <= 0:
        raise ValueError("link lengths must be positive")

    def iid(r: int, c: int) -> int:
        return r * cols + c

    intersections = [iid(r, c) for r in range(rows) for c in range(cols)]
    coords = {iid(r, c): (c * h_len, r * v_len) for r in range(rows) for c in range(cols)}

    links: list[Link] = []
    # per intersection: direction -> (in_link_id, out_link_id)
    ports: dict[int, dict[str, tuple[int, int]]] = {i: {} for i in intersections}
    next_id = 0

    def neighbor(r: int, c: int, d: str) -> Optional[int]:
        if d == "N" and r + 1 < rows:
            return iid(r + 1, c)
        if d == "S" and r - 1 >= 0:
            return iid(r - 1, c)
        if d == "E" and c + 1 < cols:
            return iid(r, c + 1)
        if d == "W" and c - 1 >= 0:
            return iid(r, c - 1)
        return None

    def length_for(d: str) -> float:
        return v_len if d in ("N", "S") else h_len

    # Internal links: one per ordered adjacent pair, created from the start
    # side so ids are deterministic.
    internal_out: dict[tuple[int, str], int] = {}
    for r in range(rows):
        for c in range(cols):
            i = iid(r, c)
            for d in _DIRS:
                j = neighbor(r, c, d)
                if j is not None:
                    links.append(Link(next_id, LinkKind.INTERNAL, i, j, length_for(d), speed_mps))
                    internal_out[(i, d)] = next_id
                    next_id += 1
    for r in range(rows):
        for c in range(cols):
            i = iid(r, c)
            for d in _DIRS:
                j = neighbor(r, c, d)
                if j is not None:
                    out_id = internal_out[(i, d)]
                    in_id = internal_out[(j, _OPPOSITE[d])]
                    ports[i][d] = (in_id, out_id)

    # Entry/exit stubs on missing approaches.
    for r in range(rows):
        for c in range(cols):
            i = iid(r, c)
            for d in _DIRS:
                if neighbor(r, c, d) is None:
                    links.append(Link(next_id, LinkKind.ENTRY, None, i, length_for(d), speed_mps))
                    entry_id = next_id
                    next_id += 1
                    links.append(Link(next_id, LinkKind.EXIT, i, None, length_for(d), speed_mps))
                    ports[i][d] = (entry_id, next_id)
                    next_id += 1

    movements: list[Movement] = []
    for i in intersections:
        for d in _DIRS:  # approach side
            in_id = ports[i][d][0]
            movements.append(
                Movement(in_id, ports[i][_OPPOSITE[d]][1], i, _STRAIGHT_PHASE[d], sat_flow)
            )
            movements.append(
                Movement(in_id, ports[i][_LEFT_OF[d]][1], i, _LEFT_PHASE[d], sat_flow)
            )
            movements.append(Movement(in_id, ports[i][_RIGHT_OF[d]][1], i, None, right_turn_flow))

    return RoadNetwork(intersections, links, movements, coords)


def validate(net: RoadNetwork) -> list[str]:
    """Check all structural invariants; returns one message per violation.

    Movement checks skip links already reported as broken, so a single bad
    link yields a single violation rather than a cascade.
    """
    violations: list[str] = []
    bad_links: set[int] = set()
    for lid, link in net.links.items():
        if link.length_m <= 0:
            violations.append(f"link {lid}: non-positive length {link.length_m}")
        if link.speed_mps <= 0:
            violations.append(f"link {lid}: non-positive speed {link.speed_mps}")
        if link.kind is LinkKind.ENTRY:
            if link.start is not None:
                violations.append(f"link {lid}: entry link must not have a start intersection")
                bad_links.add(lid)
            if link.end is None or link.end not in net.intersections:
                violations.append(f"link {lid}: entry link needs a valid end intersection")
                bad_links.add(lid)
        elif link.kind is LinkKind.EXIT:
            if link.end is not None:
                violations.append(f"link {lid}: exit link must not have an end intersection")
                bad_links.add(lid)
            if link.start is None or link.start not in net.intersections:
                violations.append(f"link {lid}: exit link needs a valid start intersection")
                bad_links.add(lid)
        else:
            if link.start is None or link.start not in net.intersections:
                violations.append(f"link {lid}: internal link missing valid start intersection")
                bad_links.add(lid)
            if link.end is None or link.end not in net.intersections:
                violations.append(f"link {lid}: internal link missing valid end intersection")
                bad_links.add(lid)

    seen_keys: set[tuple[int, int]] = set()
    # phases used per (intersection, input link), to catch geometry conflicts
    axis_groups: dict[tuple[int, int], set[Phase]] = {}
    for m in net.movements:
        name = f"movement ({m.frm}->{m.to})"
        if m.intersection not in net.intersections:
            violations.append(f"{name}: unknown intersection {m.intersection}")
            continue
        frm, to = net.links.get(m.frm), net.links.get(m.to)
        if m.frm not in bad_links and (frm is None or frm.end != m.intersection):
            violations.append(f"{name}: source is not an input link of intersection {m.intersection}")
        if m.to not in bad_links and (to is None or to.start != m.intersection):
            violations.append(f"{name}: target is not an output link of intersection {m.intersection}")
        if m.sat_flow < 0:
            violations.append(f"{name}: negative saturation flow")
        if m.key in seen_keys:
            violations.append(f"{name}: duplicate movement")
        seen_keys.add(m.key)
        if m.phase is not None:
            group = axis_groups.setdefault((m.intersection, m.frm), set())
            if m.phase in group:
                violations.append(
                    f"{name}: phase {m.phase.name} already used by another movement on link {m.frm}"
                )
            group.add(m.phase)
    we = {Phase.WE_STRAIGHT, Phase.WE_LEFT}
    sn = {Phase.SN_STRAIGHT, Phase.SN_LEFT}
    for (i, l), phases in axis_groups.items():
        if phases & we and phases & sn:
            violations.append(
                f"intersection {i}, link {l}: movements mix WE and SN phases, conflicting turn geometry"
            )

    if len(net.intersections) > 1:
        adj: dict[int, set[int]] = {i: set() for i in net.intersections}
        for link in net.links.values():
            if link.kind is LinkKind.INTERNAL and link.start in adj and link.end in adj:
                adj[link.start].add(link.end)
                adj[link.end].add(link.start)
        start = min(net.intersections)
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for nxt in adj[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(seen) != len(net.intersections):
            missing = sorted(net.intersections - seen)
            violations.append(f"intersection graph disconnected, unreachable: {missing}")

    return violations


def _parse_phase(value) -> Optional[Phase]:
    if value is None:
        return None
    try:
        return Phase(int(value))
    except ValueError as exc:
        raise LoadError(f"invalid phase value {value!r}") from exc


def network_from_dict(doc: dict) -> RoadNetwork:
    try:
        inter_docs = doc["intersections"]
        link_docs = doc["links"]
        movement_docs = doc["movements"]
    except (KeyError, TypeError) as exc:
        raise LoadError(f"roadnet document missing section: {exc}") from exc

    intersections = []
    coords = {}
    for d in inter_docs:
        intersections.append(int(d["id"]))
        coords[int(d["id"])] = (float(d.get("x", 0.0)), float(d.get("y", 0.0)))

    links = []
    for d in link_docs:
        try:
            kind = LinkKind(d["kind"])
        except ValueError as exc:
            raise LoadError(f"link {d.get('id')}: unknown kind {d.get('kind')!r}") from exc
        links.append(
            Link(
                id=int(d["id"]),
                kind=kind,
                start=int(d["start"]) if d.get("start") is not None else None,
                end=int(d["end"]) if d.get("end") is not None else None,
                length_m=float(d["length_m"]),
                speed_mps=float(d.get("speed_mps", DEFAULT_SPEED_MPS)),
            )
        )

    movements = []
    for d in movement_docs:
        movements.append(
            Movement(
                frm=int(d["from"]),
                to=int(d["to"]),
                intersection=int(d["intersection"]),
                phase=_parse_phase(d.get("phase")),
                sat_flow=float(d.get("sat_flow", DEFAULT_SAT_FLOW)),
            )
        )

    return RoadNetwork(intersections, links, movements, coords)


def load_network(path: str) -> RoadNetwork:
    """Load and validate a roadnet JSON file; raise LoadError on any problem."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read roadnet file {path}: {exc}") from exc
    net = network_from_dict(doc)
    problems = validate(net)
    if problems:
        raise LoadError(f"invalid network in {path}: " + "; ".join(problems))
    return net


def save_network(net: RoadNetwork, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(net.to_dict(), fh, indent=1)
