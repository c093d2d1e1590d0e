"""Rule application and the generator loop.

Each graph starts from one node and grows by passes over the active rules.
A pass makes one attempt per rule, in rule order, with a binding drawn
uniformly from the rule's candidates. An attempt is inhibited when the
mutation would push any applicable constraint on a touched node past its
maximum, break unique generation, close a directed cycle, or exceed the
height/width limits. When a pass fires nothing, a systematic search for any
admissible binding runs before the graph is declared quiescent.

Once the budgets are spent, nodes still below a minimum (or below their
sampled per-node target) are completed with targeted mutations; this is the
only way a budget can be exceeded.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .constraints import (
    And,
    Constraint,
    Measure,
    Or,
    RelAtom,
    Status,
    condition_holds,
    measure,
    requirement_status,
    sample_target,
)
from .errors import ProvForgeError, StaleBinding
from .model import NodeKind, ProvGraph, RelationKind, depths
from .provn import SeedPattern, derive_rules, _node_template
from .rng import Rng
from .rules import NodeTemplate, RewriteRule, Variant

log = logging.getLogger(__name__)

DEFAULT_SEED = 42
WGB = RelationKind.WAS_GENERATED_BY

# attempts spent drawing a fresh pair for ConnectExisting before giving up the pass
PAIR_DRAWS = 32
# bounds on the systematic searches (fallback and completion)
SEARCH_PAIR_LIMIT = 200_000
PARTNER_DRAWS = 8
PARTNER_SCAN = 32
PARTNER_REORDERS = 4
# random open pairs tried by the fallback search before enumerating
SEARCH_PAIR_DRAWS = 64
# nodes the incremental topological reordering may visit per edge
REORDER_LIMIT = 256


class HaltReason(str, Enum):
    NODE_BUDGET = "NodeBudget"
    EDGE_BUDGET = "EdgeBudget"
    QUIESCENT = "Quiescent"
    CONSTRAINT_COMPLETION = "ConstraintCompletion"
    NON_TERMINATING = "NonTerminating"


@dataclass(frozen=True)
class ExecutionParams:
    num_graphs: int = 1
    max_nodes: int = 100
    max_edges: int = 150
    max_height: Optional[int] = None
    max_width: Optional[int] = None
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        for name in ("num_graphs", "max_nodes", "max_edges", "max_height", "max_width"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")

    def to_dict(self) -> dict:
        return {"num_graphs": self.num_graphs, "max_nodes": self.max_nodes,
                "max_edges": self.max_edges, "max_height": self.max_height,
                "max_width": self.max_width, "seed": self.seed}


@dataclass(frozen=True)
class Binding:
    source: Optional[str] = None  # None: the rule creates the source node
    target: Optional[str] = None  # None: the rule creates the target node


@dataclass(frozen=True)
class Applied:
    nodes: Tuple[str, ...]
    edge: str


@dataclass(frozen=True)
class Inhibited:
    reason: str  # constraint id ("c1", ...) or one of the structural reasons below


UNIQUE_GENERATION = "unique-generation"
ACYCLIC = "acyclicity"
MAX_HEIGHT = "max-height"
MAX_WIDTH = "max-width"


@dataclass
class GraphReport:
    index: int
    nodes: int = 0
    edges: int = 0
    iterations: int = 0
    completion_steps: int = 0
    rule_fires: Dict[str, int] = field(default_factory=dict)
    inhibitions: Dict[str, int] = field(default_factory=dict)
    halting_reason: HaltReason = HaltReason.QUIESCENT

    def to_dict(self) -> dict:
        return {"index": self.index, "nodes": self.nodes, "edges": self.edges,
                "iterations": self.iterations, "completion_steps": self.completion_steps,
                "rule_fires": dict(self.rule_fires), "inhibitions": dict(self.inhibitions),
                "halting_reason": self.halting_reason.value}


@dataclass
class GenerationReport:
    params: ExecutionParams
    graphs: List[GraphReport] = field(default_factory=list)

    @property
    def total_nodes(self) -> int:
        return sum(g.nodes for g in self.graphs)

    @property
    def total_edges(self) -> int:
        return sum(g.edges for g in self.graphs)

    @property
    def nonterminating(self) -> bool:
        return any(g.halting_reason is HaltReason.NON_TERMINATING for g in self.graphs)

    def to_dict(self) -> dict:
        reasons = Counter(g.halting_reason.value for g in self.graphs)
        return {"params": self.params.to_dict(),
                "totals": {"graphs": len(self.graphs), "nodes": self.total_nodes,
                           "edges": self.total_edges,
                           "halting_reasons": dict(sorted(reasons.items()))},
                "graphs": [g.to_dict() for g in self.graphs]}


def constraint_id(index: int) -> str:
    return f"c{index + 1}"


# -- candidates -------------------------------------------------------------------

def candidates(rule: RewriteRule, graph: ProvGraph) -> List[Binding]:
    """Every binding the rule could be applied at, before constraints."""
    if rule.variant is Variant.GROW_SOURCE:
        return [Binding(None, n) for n in graph.by_kind[rule.dst_kind]]
    if rule.variant is Variant.GROW_TARGET:
        return [Binding(n, None) for n in graph.by_kind[rule.src_kind]]
    return [Binding(s, d)
            for s in graph.by_kind[rule.src_kind]
            for d in graph.by_kind[rule.dst_kind]
            if s != d and not graph.has_pair(rule.relation, s, d)]


def _condition_relations(c: Constraint) -> Tuple[frozenset, bool]:
    """Relations a condition inspects, and whether it binds variables."""
    rels, binds = set(), False
    stack = [c.condition.expr] if c.condition else []
    while stack:
        e = stack.pop()
        if isinstance(e, (And, Or)):
            stack.extend(e.items)
        elif isinstance(e, RelAtom):
            rels.add(e.relation)
            binds = binds or e.bind is not None
    return frozenset(rels), binds


class _Depths:
    """Incrementally maintained longest-path depths, for height/width limits."""

    def __init__(self, graph: ProvGraph):
        self.graph = graph
        self.depth = depths(graph) if graph.nodes else {}
        self.levels = Counter(self.depth.values())
        self.height = max(self.levels) if self.levels else 0

    def add_node(self, nid: str, log_: list) -> None:
        self.depth[nid] = 0
        self.levels[0] += 1
        log_.append((nid, None))

    def add_edge(self, src: str, dst: str, log_: list) -> set:
        """Propagate depth increases; returns the levels that grew."""
        grown = set()
        depth, edges, nodes = self.depth, self.graph.edges, self.graph.nodes
        work = [(dst, depth[src] + 1)]
        while work:
            nid, d = work.pop()
            old = depth[nid]
            if d <= old:
                continue
            log_.append((nid, old))
            depth[nid] = d
            self.levels[old] -= 1
            self.levels[d] += 1
            grown.add(d)
            if d > self.height:
                self.height = d
            for e in nodes[nid].out_edges:
                work.append((edges[e].dst, d + 1))
        return grown

    def undo(self, log_: list, height: int) -> None:
        for nid, old in reversed(log_):
            d = self.depth[nid]
            self.levels[d] -= 1
            if old is None:
                del self.depth[nid]
            else:
                self.depth[nid] = old
                self.levels[old] += 1
        self.height = height


class _IndexedSet:
    """Insertion-ordered set with O(1) add, remove and positional access."""

    __slots__ = ("items", "pos")

    def __init__(self):
        self.items: List[str] = []
        self.pos: Dict[str, int] = {}

    def __len__(self):
        return len(self.items)

    def add(self, x: str) -> None:
        if x not in self.pos:
            self.pos[x] = len(self.items)
            self.items.append(x)

    def discard(self, x: str) -> None:
        i = self.pos.pop(x, None)
        if i is None:
            return
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i


class _Builder:
    """Mutable generation state for one graph.

    ``open`` indexes, per (relation, role, kind) used by some rule, the nodes
    that :meth:`blocked` does not rule out. Blocking depends only on a node's
    own incidences and targets, so it is refreshed for touched nodes only.
    """

    def __init__(self, rules: Sequence[RewriteRule], constraints: Sequence[Constraint],
                 params: ExecutionParams, rng: Rng, graph: Optional[ProvGraph] = None):
        self.rules = list(rules)
        self.constraints = list(constraints)
        self.params = params
        self.rng = rng
        self.graph = graph if graph is not None else ProvGraph()
        self.cids = [constraint_id(i) for i in range(len(self.constraints))]
        self.by_kind: Dict[NodeKind, List[int]] = {
            k: [i for i, c in enumerate(self.constraints) if c.determiner.kind is k]
            for k in NodeKind}
        self.cond_info = [_condition_relations(c) for c in self.constraints]
        self.targets: Dict[str, Dict[int, int]] = {}
        self.deficits: Dict[str, None] = {}
        self.fresh: List[str] = []  # nodes that became deficient since last drained
        self.report = GraphReport(0)
        self._init_order()
        limited = params.max_height is not None or params.max_width is not None
        self.depths = _Depths(self.graph) if limited else None
        self.open: Dict[Tuple[RelationKind, str, NodeKind], _IndexedSet] = {}
        for rule in self.rules:
            self.open.setdefault((rule.relation, "src", rule.src_kind), _IndexedSet())
            self.open.setdefault((rule.relation, "dst", rule.dst_kind), _IndexedSet())
        self.open_keys: Dict[NodeKind, list] = {k: [] for k in NodeKind}
        for key in self.open:
            self.open_keys[key[2]].append(key)
        for nid in self.graph.nodes:
            self._refresh(nid)

    def _refresh(self, nid: str) -> None:
        for key in self.open_keys[self.graph.nodes[nid].kind]:
            if self.blocked(nid, key[0], key[1]) is None:
                self.open[key].add(nid)
            else:
                self.open[key].discard(nid)

    def _init_order(self) -> None:
        if self.graph.nodes:
            d = depths(self.graph)
            ranked = sorted(self.graph.nodes, key=lambda n: d[n])
            self.ord = {n: i for i, n in enumerate(ranked)}
            self._lo, self._hi = -1, len(ranked)
        else:
            self.ord = {}
            self._lo, self._hi = -1, 0

    # -- bounds ----------------------------------------------------------

    def bounds(self, nid: str, ci: int) -> Tuple[int, Optional[int]]:
        target = self.targets.get(nid)
        if target is not None and ci in target:
            t = target[ci]
            return t, t
        q = self.constraints[ci].qualifier
        return q.low, q.high

    def _delta(self, ci: int, relation: RelationKind, role: str) -> int:
        r = self.constraints[ci].requirement
        m = r.measure
        if m is Measure.RELATIONSHIP:
            return 1 if r.relation is relation else 0
        if m is Measure.DEGREE:
            return 1
        if m is Measure.IN_DEGREE:
            return 1 if role == "dst" else 0
        if m is Measure.OUT_DEGREE:
            return 1 if role == "src" else 0
        return 0

    def blocked(self, nid: str, relation: RelationKind, role: str) -> Optional[str]:
        """Cheap, exact-where-possible test that one more ``relation`` edge
        at ``nid`` (as ``role``) is inadmissible, evaluated before mutating."""
        node = self.graph.nodes[nid]
        if relation is WGB and role == "src" and node.kind is NodeKind.ENTITY \
                and node.rel_count.get(WGB, 0):
            return UNIQUE_GENERATION
        for ci in self.by_kind[node.kind]:
            delta = self._delta(ci, relation, role)
            if not delta:
                continue
            rels, binds = self.cond_info[ci]
            if binds or relation in rels:
                continue  # condition may change with the new edge; decided after mutation
            _, hi = self.bounds(nid, ci)
            if hi is None:
                continue
            c = self.constraints[ci]
            if measure(c, self.graph, nid) + delta > hi and condition_holds(c, self.graph, nid):
                return self.cids[ci]
        return None

    def first_violation(self, touched: Sequence[str]) -> Optional[str]:
        g = self.graph
        for ci, c in enumerate(self.constraints):
            for nid in touched:
                if g.nodes[nid].kind is not c.determiner.kind:
                    continue
                _, hi = self.bounds(nid, ci)
                if hi is not None and measure(c, g, nid) > hi and condition_holds(c, g, nid):
                    return self.cids[ci]
        return None

    def is_deficient(self, nid: str) -> bool:
        g = self.graph
        for ci in self.by_kind[g.nodes[nid].kind]:
            lo, _ = self.bounds(nid, ci)
            c = self.constraints[ci]
            if lo > 0 and measure(c, g, nid) < lo and condition_holds(c, g, nid):
                return True
        return False

    def deficient_constraints(self, nid: str) -> List[int]:
        g = self.graph
        out = []
        for ci in self.by_kind[g.nodes[nid].kind]:
            lo, _ = self.bounds(nid, ci)
            c = self.constraints[ci]
            if lo > 0 and measure(c, g, nid) < lo and condition_holds(c, g, nid):
                out.append(ci)
        return out

    # -- topological order (Pearce-Kelly) ----------------------------------

    def _order_allows(self, src: str, dst: str) -> bool:
        """Keep a topological order; False if ``src -> dst`` closes a cycle.

        The search is bounded by ``REORDER_LIMIT`` visited nodes; past it
        the edge is refused as if it closed a cycle, which is conservative.
        """
        ord_ = self.ord
        ub, lb = ord_[src], ord_[dst]
        if ub < lb:
            return True
        g = self.graph
        edges, nodes = g.edges, g.nodes
        fwd, seen, stack = [], {dst}, [dst]
        limit = REORDER_LIMIT
        while stack:
            n = stack.pop()
            fwd.append(n)
            limit -= 1
            if limit < 0:
                return False
            for e in nodes[n].out_edges:
                w = edges[e].dst
                if w == src:
                    return False
                if w not in seen and ord_[w] < ub:
                    seen.add(w)
                    stack.append(w)
        back, seen, stack = [], {src}, [src]
        while stack:
            n = stack.pop()
            back.append(n)
            limit -= 1
            if limit < 0:
                return False
            for e in nodes[n].in_edges:
                w = edges[e].src
                if w not in seen and ord_[w] > lb:
                    seen.add(w)
                    stack.append(w)
        back.sort(key=ord_.__getitem__)
        fwd.sort(key=ord_.__getitem__)
        slots = sorted(ord_[n] for n in back + fwd)
        for n, slot in zip(back + fwd, slots):
            ord_[n] = slot
        return True

    # -- mutation ------------------------------------------------------------

    def add_start(self, template: NodeTemplate) -> Optional[str]:
        """Place the start node, unless it alone is already past a maximum
        (a property requirement contradicting the seed template)."""
        nid = self.graph.add_node(template.kind, dict(template.props),
                                  start=template.start, end=template.end)
        self._sample_targets(nid)
        reason = self.first_violation((nid,))
        if reason is not None:
            self.graph.pop_node(nid)
            self.targets.pop(nid, None)
            self._inhibit(reason)
            return None
        self.ord[nid] = self._hi
        self._hi += 1
        if self.depths is not None:
            self.depths.add_node(nid, [])
        if self.is_deficient(nid):
            self.deficits[nid] = None
        self._refresh(nid)
        return nid

    def _sample_targets(self, nid: str) -> None:
        kind = self.graph.nodes[nid].kind
        for ci in self.by_kind[kind]:
            q = self.constraints[ci].qualifier
            if q.distribution is not None:
                self.targets.setdefault(nid, {})[ci] = sample_target(q, self.rng)

    def _inhibit(self, reason: str) -> Inhibited:
        inh = self.report.inhibitions
        inh[reason] = inh.get(reason, 0) + 1
        return Inhibited(reason)

    def apply(self, rule: RewriteRule, b: Binding) -> Union[Applied, Inhibited]:
        g = self.graph
        relation, variant = rule.relation, rule.variant
        if variant is Variant.GROW_SOURCE:
            if b.target not in g.nodes or b.source is not None:
                raise StaleBinding(f"{rule.id} needs an existing target only")
            existing = ((b.target, "dst"),)
        elif variant is Variant.GROW_TARGET:
            if b.source not in g.nodes or b.target is not None:
                raise StaleBinding(f"{rule.id} needs an existing source only")
            existing = ((b.source, "src"),)
        else:
            if b.source not in g.nodes or b.target not in g.nodes or b.source == b.target \
                    or g.has_pair(relation, b.source, b.target):
                raise StaleBinding(f"{rule.id} binding {b} is no longer valid")
            existing = ((b.source, "src"), (b.target, "dst"))
        for nid, role in existing:
            kind = rule.src_kind if role == "src" else rule.dst_kind
            if g.nodes[nid].kind is not kind:
                raise StaleBinding(f"{rule.id} expects a {kind.value} as {role}")
            reason = self.blocked(nid, relation, role)
            if reason is not None:
                return self._inhibit(reason)
        if variant is Variant.CONNECT_EXISTING and not self._order_allows(b.source, b.target):
            return self._inhibit(ACYCLIC)

        new_id = None
        dlog: list = []
        height = self.depths.height if self.depths is not None else 0
        template = rule.new_node_template
        if template is not None:
            new_id = g.add_node(template.kind, dict(template.props),
                                start=template.start, end=template.end)
            if variant is Variant.GROW_SOURCE:
                self.ord[new_id] = self._lo
                self._lo -= 1
            else:
                self.ord[new_id] = self._hi
                self._hi += 1
            self._sample_targets(new_id)
            if self.depths is not None:
                self.depths.add_node(new_id, dlog)
        src = b.source if b.source is not None else new_id
        dst = b.target if b.target is not None else new_id
        eid = g.add_edge(relation, src, dst, dict(rule.edge_props), time=rule.edge_time,
                         check=False)
        touched = (src, dst)

        reason = None
        if self.depths is not None:
            grown = self.depths.add_edge(src, dst, dlog)
            if new_id is not None:
                grown.add(self.depths.depth[new_id])
            p = self.params
            if p.max_height is not None and self.depths.height > p.max_height:
                reason = MAX_HEIGHT
            elif p.max_width is not None and any(self.depths.levels[lv] > p.max_width
                                                 for lv in grown):
                reason = MAX_WIDTH
        if reason is None:
            reason = self.first_violation(touched)
        if reason is not None:
            g.pop_edge(eid)
            if new_id is not None:
                g.pop_node(new_id)
                del self.ord[new_id]
                self.targets.pop(new_id, None)
            if self.depths is not None:
                self.depths.undo(dlog, height)
            return self._inhibit(reason)

        fires = self.report.rule_fires
        fires[rule.id] = fires.get(rule.id, 0) + 1
        for nid in touched:
            if self.is_deficient(nid):
                if nid not in self.deficits:
                    self.fresh.append(nid)
                self.deficits[nid] = None
            else:
                self.deficits.pop(nid, None)
            self._refresh(nid)
        return Applied((new_id,) if new_id is not None else (), eid)

    # -- binding selection ---------------------------------------------------

    def draw(self, rule: RewriteRule) -> Optional[Binding]:
        g, rng = self.graph, self.rng
        if rule.variant is Variant.GROW_SOURCE:
            pool = g.by_kind[rule.dst_kind]
            return Binding(None, rng.choice(pool)) if pool else None
        if rule.variant is Variant.GROW_TARGET:
            pool = g.by_kind[rule.src_kind]
            return Binding(rng.choice(pool), None) if pool else None
        srcs, dsts = g.by_kind[rule.src_kind], g.by_kind[rule.dst_kind]
        if not srcs or not dsts:
            return None
        for _ in range(PAIR_DRAWS):
            s, d = rng.choice(srcs), rng.choice(dsts)
            if s != d and not g.has_pair(rule.relation, s, d):
                return Binding(s, d)
        return None

    def _rotation(self, items: List[str]):
        """Iterate ``items`` once, starting at a random offset, without copying."""
        n = len(items)
        if not n:
            return
        k = self.rng.randbelow(n)
        for i in range(n):
            yield items[(k + i) % n]

    def search(self, rule: RewriteRule) -> bool:
        """Systematic search for an admissible binding; applies the first found.

        Pairs already consistent with the topological order are tried before
        those that would need a reordering (and may close a cycle).
        """
        g = self.graph
        relation = rule.relation
        srcs = self.open[(relation, "src", rule.src_kind)].items
        dsts = self.open[(relation, "dst", rule.dst_kind)].items
        # apply() touches the open index only when it succeeds, and every
        # loop below stops at the first success, so iterating lazily is safe
        if rule.variant is Variant.GROW_SOURCE:
            return any(isinstance(self.apply(rule, Binding(None, n)), Applied)
                       for n in self._rotation(dsts))
        if rule.variant is Variant.GROW_TARGET:
            return any(isinstance(self.apply(rule, Binding(n, None)), Applied)
                       for n in self._rotation(srcs))
        if not srcs or not dsts:
            return False
        rng = self.rng
        for _ in range(SEARCH_PAIR_DRAWS):
            s, d = rng.choice(srcs), rng.choice(dsts)
            if s != d and not g.has_pair(relation, s, d) \
                    and isinstance(self.apply(rule, Binding(s, d)), Applied):
                return True
        srcs, dsts = list(self._rotation(srcs)), list(self._rotation(dsts))
        ord_ = self.ord
        budget = SEARCH_PAIR_LIMIT
        for forward in (True, False):
            for s in srcs:
                for d in dsts:
                    if (ord_[s] < ord_[d]) is not forward:
                        continue
                    budget -= 1
                    if budget < 0:
                        return False
                    if s == d or g.has_pair(relation, s, d):
                        continue
                    if isinstance(self.apply(rule, Binding(s, d)), Applied):
                        return True
        return False

    # -- completion of outstanding minima -------------------------------------

    def _fix_options(self, nid: str, cis: List[int]):
        kind = self.graph.nodes[nid].kind
        connect, grow = [], []
        for rule in self.rules:
            for role in ("src", "dst"):
                if (rule.src_kind if role == "src" else rule.dst_kind) is not kind:
                    continue
                if not any(self._delta(ci, rule.relation, role) for ci in cis):
                    continue
                if rule.variant is Variant.CONNECT_EXISTING:
                    connect.append((rule, role))
                elif (rule.variant is Variant.GROW_TARGET) == (role == "src"):
                    grow.append((rule, role))
        return connect + grow

    def _fix_step(self, nid: str) -> bool:
        g, rng = self.graph, self.rng
        cis = self.deficient_constraints(nid)
        if not cis:
            return False
        for rule, role in self._fix_options(nid, cis):
            if self.blocked(nid, rule.relation, role) is not None:
                continue
            if rule.variant is Variant.GROW_SOURCE:
                if isinstance(self.apply(rule, Binding(None, nid)), Applied):
                    return True
                continue
            if rule.variant is Variant.GROW_TARGET:
                if isinstance(self.apply(rule, Binding(nid, None)), Applied):
                    return True
                continue
            if role == "src":
                pool = self.open[(rule.relation, "dst", rule.dst_kind)].items
            else:
                pool = self.open[(rule.relation, "src", rule.src_kind)].items
            if not pool:
                continue
            tries = [rng.choice(pool) for _ in range(PARTNER_DRAWS)]
            tries += itertools.islice(self._rotation(pool), PARTNER_SCAN)
            # partners already on the right side of the topological order
            # first; only a few that would need reordering
            ord_, here = self.ord, self.ord[nid]
            ahead = [o for o in tries if (ord_[o] > here) == (role == "src")]
            behind = [o for o in tries if (ord_[o] > here) != (role == "src")]
            for other in ahead + behind[:PARTNER_REORDERS]:
                s, d = (nid, other) if role == "src" else (other, nid)
                if s == d or g.has_pair(rule.relation, s, d):
                    continue
                if isinstance(self.apply(rule, Binding(s, d)), Applied):
                    return True
        return False

    def complete(self, cap: int) -> bool:
        """Drive outstanding minima to completion. False if the cap was hit.

        Deficient nodes are served first come, first served. A node with no
        admissible fix is set aside and retried after a round that changed
        the graph.
        """
        queue = deque(self.deficits)
        queued = set(queue)
        self.fresh.clear()
        stuck: List[str] = []
        progressed = False
        while True:
            while queue:
                nid = queue.popleft()
                queued.discard(nid)
                while nid in self.deficits:
                    if self.report.iterations + self.report.completion_steps >= cap:
                        return False
                    self.report.completion_steps += 1
                    if not self._fix_step(nid):
                        stuck.append(nid)
                        break
                    progressed = True
                # nodes created or touched as partners may now be deficient
                for other in self.fresh:
                    if other not in queued and other != nid:
                        queue.append(other)
                        queued.add(other)
                self.fresh.clear()
            if not (stuck and progressed):
                return True
            queue = deque(n for n in stuck if n in self.deficits)
            queued = set(queue)
            stuck, progressed = [], False

    # -- main loop -----------------------------------------------------------

    def run(self, start: NodeTemplate) -> ProvGraph:
        g, p, report = self.graph, self.params, self.report
        cap = 100 * p.max_nodes
        nonterminating = False
        placed = self.add_start(start) is not None
        while placed and len(g.edges) < p.max_edges:
            if report.iterations >= cap:
                nonterminating = True
                break
            report.iterations += 1
            fired = 0
            for rule in self.rules:
                if len(g.edges) >= p.max_edges:
                    break
                if rule.variant.creates_node and len(g.nodes) >= p.max_nodes:
                    continue
                b = self.draw(rule)
                if b is not None and isinstance(self.apply(rule, b), Applied):
                    fired += 1
            if fired:
                continue
            found = False
            for rule in self.rules:
                if rule.variant.creates_node and len(g.nodes) >= p.max_nodes:
                    continue
                if self.search(rule):
                    found = True
                    break
            if not found:
                break
        if not nonterminating and self.deficits:
            nonterminating = not self.complete(cap)
        report.nodes, report.edges = len(g.nodes), len(g.edges)
        report.halting_reason = halting_reason(g, p, self.constraints,
                                               nonterminating=nonterminating)
        return g


def halting_reason(graph: ProvGraph, params: ExecutionParams,
                   constraints: Sequence[Constraint], *,
                   nonterminating: bool = False) -> HaltReason:
    """Classify a finished graph.

    Outstanding minima mean the run stalled: ``Quiescent`` within budget,
    ``NonTerminating`` if completion had already overrun a budget. A run that
    overran a budget and settled every minimum ended by
    ``ConstraintCompletion``.
    """
    if nonterminating:
        return HaltReason.NON_TERMINATING
    over = len(graph.nodes) > params.max_nodes or len(graph.edges) > params.max_edges
    residue = any(
        graph.nodes[nid].kind is c.determiner.kind
        and condition_holds(c, graph, nid)
        and requirement_status(c, graph, nid) is Status.BELOW_MINIMUM
        for c in constraints if c.qualifier.low > 0
        for nid in graph.by_kind[c.determiner.kind])
    if residue:
        return HaltReason.NON_TERMINATING if over else HaltReason.QUIESCENT
    if over:
        return HaltReason.CONSTRAINT_COMPLETION
    if len(graph.nodes) >= params.max_nodes:
        return HaltReason.NODE_BUDGET
    if len(graph.edges) >= params.max_edges:
        return HaltReason.EDGE_BUDGET
    return HaltReason.QUIESCENT


# -- public operations --------------------------------------------------------------

def apply(rule: RewriteRule, binding: Binding, graph: ProvGraph,
          constraints: Sequence[Constraint], rng: Rng,
          params: Optional[ExecutionParams] = None) -> Union[Applied, Inhibited]:
    """Apply one rule at one binding to an existing graph, atomically."""
    b = _Builder([rule], constraints, params or ExecutionParams(), rng, graph)
    return b.apply(rule, binding)


def _generate_one(args) -> Tuple[ProvGraph, GraphReport]:
    rules, constraints, params, start, index = args
    builder = _Builder(rules, constraints, params, Rng.stream(params.seed, index))
    builder.report.index = index
    graph = builder.run(start)
    return graph, builder.report


def generate(pattern: SeedPattern, constraints: Sequence[Constraint],
             params: ExecutionParams, parallel: int = 1,
             ) -> Tuple[List[ProvGraph], GenerationReport]:
    """Grow ``params.num_graphs`` disjoint graphs. Graph ``i`` draws from its
    own stream, so the result does not depend on ``parallel``."""
    if not pattern.nodes:
        raise ProvForgeError("seed declares no nodes, so there is no start node")
    rules = derive_rules(pattern) if pattern.edges else []
    start = _node_template(pattern, pattern.start_kind)
    jobs = [(rules, list(constraints), params, start, i) for i in range(params.num_graphs)]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_generate_one, jobs))
    else:
        results = [_generate_one(job) for job in jobs]
    report = GenerationReport(params, [r for _, r in results])
    for r in report.graphs:
        log.debug("graph %d: |V|=%d |E|=%d %s", r.index, r.nodes, r.edges,
                  r.halting_reason.value)
    return [gph for gph, _ in results], report
