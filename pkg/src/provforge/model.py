"""PROV-DM property graph: node and relation kinds, the signature table,
structural validation and depth measurements."""

from __future__ import annotations

import datetime as _dt
from collections import Counter, deque
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple, Union

from .errors import (
    CyclicGraph,
    DanglingEndpoint,
    SignatureMismatch,
    UniqueGenerationViolation,
    UnknownNode,
)

PropValue = Union[str, int, float, bool, _dt.datetime]


class NodeKind(str, Enum):
    ENTITY = "Entity"
    ACTIVITY = "Activity"
    AGENT = "Agent"

    @property
    def provn(self) -> str:
        return self.value.lower()

    @classmethod
    def parse(cls, name: str) -> "NodeKind":
        """Case-insensitive lookup; raises ValueError on an unknown name."""
        for kind in cls:
            if kind.value.lower() == name.lower():
                return kind
        raise ValueError(f"unknown node kind {name!r}")


class RelationKind(str, Enum):
    USED = "Used"
    WAS_GENERATED_BY = "WasGeneratedBy"
    WAS_INFORMED_BY = "WasInformedBy"
    WAS_STARTED_BY = "WasStartedBy"
    WAS_ENDED_BY = "WasEndedBy"
    WAS_INVALIDATED_BY = "WasInvalidatedBy"
    WAS_DERIVED_FROM = "WasDerivedFrom"
    WAS_ATTRIBUTED_TO = "WasAttributedTo"
    WAS_ASSOCIATED_WITH = "WasAssociatedWith"
    ACTED_ON_BEHALF_OF = "ActedOnBehalfOf"
    WAS_INFLUENCED_BY = "WasInfluencedBy"
    ALTERNATE_OF = "AlternateOf"
    SPECIALIZATION_OF = "SpecializationOf"

    @property
    def provn(self) -> str:
        """PROV-N statement name, e.g. ``wasGeneratedBy``."""
        return self.value[0].lower() + self.value[1:]

    @property
    def cypher(self) -> str:
        """Relationship type as emitted in queries, e.g. ``WAS_GENERATED_BY``."""
        return self.name

    @classmethod
    def parse(cls, name: str) -> "RelationKind":
        """Accepts ``Used``, ``used`` or ``USED`` style names (case-insensitive)."""
        key = name.replace("_", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown relation kind {name!r}")


E, A, G = NodeKind.ENTITY, NodeKind.ACTIVITY, NodeKind.AGENT

#: (source kind, target kind) per relation; ``None`` means any kind.
SIGNATURES: Dict[RelationKind, Tuple[Optional[NodeKind], Optional[NodeKind]]] = {
    RelationKind.USED: (A, E),
    RelationKind.WAS_GENERATED_BY: (E, A),
    RelationKind.WAS_INFORMED_BY: (A, A),
    RelationKind.WAS_STARTED_BY: (A, E),
    RelationKind.WAS_ENDED_BY: (A, E),
    RelationKind.WAS_INVALIDATED_BY: (E, A),
    RelationKind.WAS_DERIVED_FROM: (E, E),
    RelationKind.WAS_ATTRIBUTED_TO: (E, G),
    RelationKind.WAS_ASSOCIATED_WITH: (A, G),
    RelationKind.ACTED_ON_BEHALF_OF: (G, G),
    RelationKind.WAS_INFLUENCED_BY: (None, None),
    RelationKind.ALTERNATE_OF: (E, E),
    RelationKind.SPECIALIZATION_OF: (E, E),
}


def signature_allows(kind: RelationKind, src: NodeKind, dst: NodeKind) -> bool:
    want_src, want_dst = SIGNATURES[kind]
    return (want_src is None or want_src is src) and (want_dst is None or want_dst is dst)


def parse_timestamp(text: str) -> _dt.datetime:
    """ISO-8601 timestamp; a trailing ``Z`` is read as UTC."""
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return _dt.datetime.fromisoformat(text)


def format_timestamp(value: _dt.datetime) -> str:
    return value.isoformat()


class Node:
    __slots__ = ("id", "kind", "props", "start", "end", "out_edges", "in_edges", "rel_count")

    def __init__(self, node_id: str, kind: NodeKind, props: Dict[str, PropValue],
                 start: Optional[_dt.datetime] = None, end: Optional[_dt.datetime] = None):
        self.id = node_id
        self.kind = kind
        self.props = props
        self.start = start
        self.end = end
        self.out_edges: List[str] = []
        self.in_edges: List[str] = []
        # incident edge count per relation kind, both directions
        self.rel_count: Dict[RelationKind, int] = {}

    def __repr__(self) -> str:
        return f"Node({self.id!r}, {self.kind.value})"


class Edge:
    __slots__ = ("id", "kind", "src", "dst", "props", "time")

    def __init__(self, edge_id: str, kind: RelationKind, src: str, dst: str,
                 props: Dict[str, PropValue], time: Optional[_dt.datetime] = None):
        self.id = edge_id
        self.kind = kind
        self.src = src
        self.dst = dst
        self.props = props
        self.time = time

    def __repr__(self) -> str:
        return f"Edge({self.id!r}, {self.kind.value}, {self.src!r}->{self.dst!r})"


@dataclass(frozen=True)
class Violation:
    code: str  # "signature" | "unique-generation" | "dangling"
    subject: str  # offending edge id (or node id)
    message: str

    def to_dict(self) -> Dict[str, str]:
        return {"code": self.code, "subject": self.subject, "message": self.message}


class ProvGraph:
    """Typed property digraph. Iteration order is insertion order everywhere."""

    def __init__(self) -> None:
        self.nodes: Dict[str, Node] = {}
        self.edges: Dict[str, Edge] = {}
        self.by_kind: Dict[NodeKind, List[str]] = {k: [] for k in NodeKind}
        self._pairs: set = set()  # (relation, src, dst) present at least once
        self._next_node = 0
        self._next_edge = 0

    # -- construction ------------------------------------------------------

    def add_node(self, kind: NodeKind, props: Optional[Dict[str, PropValue]] = None,
                 node_id: Optional[str] = None, start: Optional[_dt.datetime] = None,
                 end: Optional[_dt.datetime] = None) -> str:
        if node_id is None:
            node_id = f"n{self._next_node}"
            while node_id in self.nodes:
                self._next_node += 1
                node_id = f"n{self._next_node}"
            self._next_node += 1
        elif node_id in self.nodes:
            raise ValueError(f"duplicate node id {node_id!r}")
        if start is not None and end is not None and start > end:
            raise ValueError(f"activity {node_id!r} ends before it starts")
        self.nodes[node_id] = Node(node_id, kind, dict(props or {}), start, end)
        self.by_kind[kind].append(node_id)
        return node_id

    def add_edge(self, kind: RelationKind, src: str, dst: str,
                 props: Optional[Dict[str, PropValue]] = None, *,
                 time: Optional[_dt.datetime] = None, edge_id: Optional[str] = None,
                 check: bool = True) -> str:
        """Append an edge. ``check=False`` skips the signature and
        unique-generation checks (used when loading foreign files, which are
        then inspected with :func:`validate`)."""
        nodes = self.nodes
        if src not in nodes or dst not in nodes:
            missing = src if src not in nodes else dst
            raise DanglingEndpoint(f"{kind.value} endpoint {missing!r} does not exist")
        s, d = nodes[src], nodes[dst]
        if check:
            if not signature_allows(kind, s.kind, d.kind):
                raise SignatureMismatch(
                    f"{kind.value} does not allow {s.kind.value} -> {d.kind.value}")
            if kind is RelationKind.WAS_GENERATED_BY and self.is_generated(src):
                raise UniqueGenerationViolation(f"entity {src!r} is already generated")
        if edge_id is None:
            edge_id = f"r{self._next_edge}"
            while edge_id in self.edges:
                self._next_edge += 1
                edge_id = f"r{self._next_edge}"
            self._next_edge += 1
        elif edge_id in self.edges:
            raise ValueError(f"duplicate edge id {edge_id!r}")
        self.edges[edge_id] = Edge(edge_id, kind, src, dst, dict(props or {}), time)
        s.out_edges.append(edge_id)
        d.in_edges.append(edge_id)
        # a self-loop counts twice, matching degree(both) = in + out
        s.rel_count[kind] = s.rel_count.get(kind, 0) + 1
        d.rel_count[kind] = d.rel_count.get(kind, 0) + 1
        self._pairs.add((kind, src, dst))
        return edge_id

    def pop_edge(self, edge_id: str) -> None:
        """Remove the most recently added edge (rollback support)."""
        edge = self.edges.pop(edge_id)
        s, d = self.nodes[edge.src], self.nodes[edge.dst]
        assert s.out_edges[-1] == edge_id and d.in_edges[-1] == edge_id
        s.out_edges.pop()
        d.in_edges.pop()
        for n in (s, d):
            n.rel_count[edge.kind] -= 1
            if not n.rel_count[edge.kind]:
                del n.rel_count[edge.kind]
        if not any(self.edges[e].kind is edge.kind and self.edges[e].dst == edge.dst
                   for e in s.out_edges):
            self._pairs.discard((edge.kind, edge.src, edge.dst))
        self._next_edge -= 1 if edge_id == f"r{self._next_edge - 1}" else 0

    def pop_node(self, node_id: str) -> None:
        """Remove the most recently added, edgeless node (rollback support)."""
        node = self.nodes.pop(node_id)
        assert not node.in_edges and not node.out_edges
        ids = self.by_kind[node.kind]
        assert ids[-1] == node_id
        ids.pop()
        self._next_node -= 1 if node_id == f"n{self._next_node - 1}" else 0

    # -- queries -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def order(self) -> int:
        return len(self.nodes)

    @property
    def size(self) -> int:
        return len(self.edges)

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"unknown node {node_id!r}") from None

    def has_pair(self, kind: RelationKind, src: str, dst: str) -> bool:
        return (kind, src, dst) in self._pairs

    def is_generated(self, entity_id: str) -> bool:
        node = self.nodes[entity_id]
        return any(self.edges[e].kind is RelationKind.WAS_GENERATED_BY for e in node.out_edges)

    def incident(self, node_id: str, direction: str = "both") -> Iterator[Edge]:
        node = self.node(node_id)
        if direction in ("out", "both"):
            for e in node.out_edges:
                yield self.edges[e]
        if direction in ("in", "both"):
            for e in node.in_edges:
                edge = self.edges[e]
                if direction == "both" and edge.src == edge.dst:
                    continue  # a self-loop is already listed as outgoing
                yield edge

    def neighbours(self, node_id: str, kind: Optional[RelationKind] = None) -> Iterator[str]:
        """Adjacent node ids over edges of ``kind`` (either direction), with repetition."""
        for edge in self.incident(node_id):
            if kind is None or edge.kind is kind:
                yield edge.dst if edge.src == node_id else edge.src

    def relation_kinds(self) -> set:
        return {e.kind for e in self.edges.values()}

    def copy(self) -> "ProvGraph":
        g = ProvGraph()
        for n in self.nodes.values():
            g.add_node(n.kind, n.props, node_id=n.id, start=n.start, end=n.end)
        for e in self.edges.values():
            g.add_edge(e.kind, e.src, e.dst, e.props, time=e.time, edge_id=e.id, check=False)
        g._next_node, g._next_edge = self._next_node, self._next_edge
        return g


# -- free-function operations -------------------------------------------------

def add_node(graph: ProvGraph, kind: NodeKind, props: Optional[Dict[str, PropValue]] = None) -> str:
    return graph.add_node(kind, props)


def add_edge(graph: ProvGraph, kind: RelationKind, src: str, dst: str,
             props: Optional[Dict[str, PropValue]] = None) -> str:
    return graph.add_edge(kind, src, dst, props)


def degree(graph: ProvGraph, node_id: str, direction: str = "both",
           kind: Optional[RelationKind] = None) -> int:
    """Number of incident edges; parallel edges count once each."""
    node = graph.node(node_id)
    if direction not in ("in", "out", "both"):
        raise ValueError(f"direction must be in, out or both, not {direction!r}")
    if kind is None and direction != "both":
        return len(node.in_edges if direction == "in" else node.out_edges)
    if kind is None:
        return len(node.in_edges) + len(node.out_edges)
    if direction == "both":
        return node.rel_count.get(kind, 0)
    ids = node.in_edges if direction == "in" else node.out_edges
    return sum(1 for e in ids if graph.edges[e].kind is kind)


def validate(graph: ProvGraph) -> List[Violation]:
    out: List[Violation] = []
    generated: Dict[str, str] = {}
    for edge in graph.edges.values():
        s, d = graph.nodes.get(edge.src), graph.nodes.get(edge.dst)
        if s is None or d is None:
            out.append(Violation("dangling", edge.id, f"edge {edge.id} has a missing endpoint"))
            continue
        if not signature_allows(edge.kind, s.kind, d.kind):
            out.append(Violation(
                "signature", edge.id,
                f"{edge.kind.value} {edge.id} links {s.kind.value} -> {d.kind.value}"))
        if edge.kind is RelationKind.WAS_GENERATED_BY and s.kind is NodeKind.ENTITY:
            if edge.src in generated:
                out.append(Violation(
                    "unique-generation", edge.id,
                    f"entity {edge.src} generated by {edge.id} and {generated[edge.src]}"))
            else:
                generated[edge.src] = edge.id
    return out


def depths(graph: ProvGraph) -> Dict[str, int]:
    """Longest directed path length from any source node to each node."""
    indeg = {nid: len(n.in_edges) for nid, n in graph.nodes.items()}
    depth = {nid: 0 for nid in graph.nodes}
    queue = deque(nid for nid, d in indeg.items() if d == 0)
    seen = 0
    while queue:
        nid = queue.popleft()
        seen += 1
        here = depth[nid] + 1
        for e in graph.nodes[nid].out_edges:
            dst = graph.edges[e].dst
            if here > depth[dst]:
                depth[dst] = here
            indeg[dst] -= 1
            if indeg[dst] == 0:
                queue.append(dst)
    if seen != len(graph.nodes):
        raise CyclicGraph("graph contains a directed cycle")
    return depth


def height_width(graph: ProvGraph) -> Tuple[int, int]:
    if not graph.nodes:
        return 0, 0
    depth = depths(graph)
    levels = Counter(depth.values())
    return max(levels), max(levels.values())
