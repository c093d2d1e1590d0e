"""openCypher text for rules, constraints and finished graphs.

Nothing here talks to a database; the output is plain query text.

Two dialects are emitted for constraint guards:

``compact``
    Auxiliary ``MATCH (a)-[r]-()`` clauses with inline ``count(r)``
    predicates. A constraint with a condition contributes only its
    condition as a filter; one without contributes its count guard.
``strict``
    ``size(pattern)`` counts and one self-contained guard per constraint,
    ``NOT applies OR count < max``, equivalent to the engine's check.
"""

from __future__ import annotations

import datetime as _dt
import itertools
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .constraints import And, Constraint, Expr, Measure, Or, RelAtom, bound_variables
from .errors import InvalidGraph, UnsupportedConstruct
from .model import NodeKind, PropValue, ProvGraph, RelationKind, validate
from .rules import RewriteRule, Variant

DIALECTS = ("compact", "strict")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def mangle(name: str) -> str:
    """Property name as written in a query: ``ex:fct`` becomes ``ex_fct``."""
    out = name.replace(":", "_")
    if _IDENT.match(out):
        return out
    return "`" + out.replace("`", "``") + "`"


def literal(value: PropValue) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, _dt.datetime):
        return f'datetime("{value.isoformat()}")'
    text = str(value).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{text}"'


def prop_map(props: Sequence[Tuple[str, PropValue]]) -> str:
    if not props:
        return "{}"
    return "{" + ", ".join(f"{mangle(k)}: {literal(v)}" for k, v in props) + "}"


@dataclass(frozen=True)
class CompiledQuery:
    rule_id: str
    clauses: Tuple[str, ...]
    variables: Tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join(self.clauses)

    def __str__(self) -> str:
        return self.text


def compile_rule(rule: RewriteRule) -> CompiledQuery:
    """MATCH/CREATE pair for one rule. Node templates appear in the CREATE
    clause only; matched nodes are selected by label."""
    t = rule.relation.cypher
    edge = prop_map(rule.edge_props)
    src_t, dst_t = rule.src_template, rule.dst_template
    if rule.variant is Variant.GROW_TARGET:
        match = f"MATCH (a:{rule.src_kind.value} {{}})"
        create = f"CREATE (a)-[:{t} {edge}]->(:{rule.dst_kind.value} {prop_map(dst_t.props)})"
        names = ("a",)
    elif rule.variant is Variant.GROW_SOURCE:
        match = f"MATCH (a:{rule.dst_kind.value} {{}})"
        create = f"CREATE (a)<-[:{t} {edge}]-(:{rule.src_kind.value} {prop_map(src_t.props)})"
        names = ("a",)
    else:
        match = f"MATCH (a:{rule.src_kind.value} {{}}), (b:{rule.dst_kind.value} {{}})"
        create = f"CREATE (a)-[:{t} {edge}]->(b)"
        names = ("a", "b")
    return CompiledQuery(rule.id, (match, create), names)


# -- constraints ------------------------------------------------------------------

def count_pattern(c: Constraint, var: str = "a", rel_var: str = "") -> Optional[str]:
    """Relationship pattern whose matches the requirement counts."""
    r = c.requirement
    m = r.measure
    if m is Measure.PROPERTY:
        return None
    label = f":{r.relation.cypher}" if m is Measure.RELATIONSHIP else ""
    rel = f"[{rel_var}{label}]"
    if m is Measure.IN_DEGREE:
        return f"()-{rel}->({var})"
    if m is Measure.OUT_DEGREE:
        return f"({var})-{rel}->()"
    return f"({var})-{rel}-()"


def _count_expr(c: Constraint, var: str) -> str:
    r = c.requirement
    if r.measure is Measure.PROPERTY:
        name, value = r.prop
        return f"CASE WHEN {var}.{mangle(name)} = {literal(value)} THEN 1 ELSE 0 END"
    return f"size({count_pattern(c, var)})"


def _fold_and(parts: List[str]) -> str:
    if "false" in parts:
        return "false"
    parts = [p for p in parts if p != "true"]
    if not parts:
        return "true"
    return parts[0] if len(parts) == 1 else "(" + " AND ".join(parts) + ")"


def _fold_or(parts: List[str]) -> str:
    if "true" in parts:
        return "true"
    parts = [p for p in parts if p != "false"]
    if not parts:
        return "false"
    return parts[0] if len(parts) == 1 else "(" + " OR ".join(parts) + ")"


def _atoms(e: Expr, var: str, bound: Dict[str, bool], strict: bool) -> str:
    """Render an expression; ``bound[v]`` says whether variable v is matched
    (unmatched variables make their atoms false)."""
    if isinstance(e, And):
        return _fold_and([_atoms(i, var, bound, strict) for i in e.items])
    if isinstance(e, Or):
        return _fold_or([_atoms(i, var, bound, strict) for i in e.items])
    if isinstance(e, RelAtom):
        if e.bind:
            return "true" if bound.get(e.bind[1]) else "false"
        return f"size(({var})-[:{e.relation.cypher}]-()) > 0"
    subject = var if e.subject is None else e.subject
    if e.subject is not None and not bound.get(e.subject):
        return "false"
    test = f"{subject}.{mangle(e.name)} = {literal(e.value)}"
    return f"coalesce({test}, false)" if strict else test


def _binding_pattern(var: str, name: str, kind: NodeKind, relation: RelationKind) -> str:
    return f"({var})-[:{relation.cypher}]-({name}:{kind.value})"


def expr_predicate(e: Expr, var: str = "a", strict: bool = True) -> str:
    """WHERE predicate equivalent to the expression holding for ``var``.

    Bound variables are existential; since expressions never negate, the
    truth value is the OR, over every subset of variables that can be
    matched, of an EXISTS subquery matching exactly that subset.
    """
    binds = bound_variables(e)
    if not binds:
        return _atoms(e, var, {}, strict)
    options = []
    for k in range(len(binds) + 1):
        for subset in itertools.combinations(binds, k):
            names = {name for name, _, _ in subset}
            inner = _atoms(e, var, {n: n in names for n, _, _ in binds}, strict)
            if inner == "false":
                continue
            if not subset:
                options.append(inner)
                continue
            # one MATCH per variable: relationship uniqueness must not keep
            # two variables from reaching the same neighbour
            matches = " ".join(f"MATCH {_binding_pattern(var, n, kind, rel)}"
                               for n, kind, rel in subset)
            where = "" if inner == "true" else f" WHERE {inner}"
            options.append(f"EXISTS {{ {matches}{where} }}")
    return _fold_or(options)


def _negate(p: str) -> str:
    if p == "true":
        return "false"
    if p == "false":
        return "true"
    return f"NOT {p}"


@dataclass(frozen=True)
class ConstraintFragment:
    kind: NodeKind
    matches: Tuple[str, ...]          # auxiliary MATCH patterns (compact dialect)
    count: Optional[str]              # counted expression (compact: count(r))
    condition: Optional[str]          # predicate that the constraint applies, None if always
    at_maximum: Optional[str]         # strict: count has reached the maximum
    below_minimum: Optional[str]      # strict: count is under the minimum
    guard: str                        # strict: adding one more is allowed
    unsupported: Tuple[str, ...] = field(default=())


def compile_constraint(c: Constraint, var: str = "a", rel_var: str = "r",
                       allow_unsupported: bool = True) -> ConstraintFragment:
    """Query fragments for one constraint, bound to node variable ``var``.

    Distributions have no query rendering; they are listed in
    ``unsupported`` (or raised, with ``allow_unsupported=False``).
    """
    unsupported = []
    q = c.qualifier
    if q.distribution is not None:
        unsupported.append(f"distribution {q.distribution.family}")
    if unsupported and not allow_unsupported:
        raise UnsupportedConstruct(unsupported)
    matches = []
    pattern = count_pattern(c, var, rel_var)
    if pattern is not None:
        matches.append(pattern)
        match_count = f"count({rel_var})"
    else:
        match_count = _count_expr(c, var)
    for name, kind, rel in (bound_variables(c.condition.expr) if c.condition else []):
        matches.append(_binding_pattern(var, name, kind, rel))
    cond = exempt = None
    if c.condition is not None:
        holds = expr_predicate(c.condition.expr, var)
        when = c.condition.polarity == "when"
        cond = holds if when else _negate(holds)
        exempt = _negate(holds) if when else holds
    n = _count_expr(c, var)
    at_max = f"{n} >= {q.high}" if q.high is not None else None
    below = f"{n} < {q.low}" if q.low > 0 else None
    if at_max is None:
        guard = "true"
    elif exempt is None:
        guard = f"{n} < {q.high}"
    else:
        guard = _fold_or([exempt, f"{n} < {q.high}"])
    return ConstraintFragment(c.determiner.kind, tuple(matches), match_count, cond,
                              at_max, below, guard, tuple(unsupported))


def _compact_filter(c: Constraint, var: str, rel_var: str) -> Tuple[List[str], List[str]]:
    """Compact-dialect (matches, WHERE terms) for one constraint."""
    if c.condition is not None:
        e = c.condition.expr
        holds = _atoms(e, var, {n: True for n, _, _ in bound_variables(e)}, strict=False)
        term = holds if c.condition.polarity == "when" else _negate(holds)
        binds = [_binding_pattern(var, n, k, r) for n, k, r in bound_variables(e)]
        return binds, [term]
    if c.qualifier.high is None:
        return [], []
    pattern = count_pattern(c, var, rel_var)
    if pattern is None:
        return [], [f"NOT {_count_expr(c, var)} >= {c.qualifier.high}"]
    return [pattern], [f"NOT count({rel_var}) >= {c.qualifier.high}"]


def _touches(rule: RewriteRule, c: Constraint, role: str) -> bool:
    kind = rule.src_kind if role == "src" else rule.dst_kind
    if c.determiner.kind is not kind:
        return False
    r = c.requirement
    return (r.measure is Measure.DEGREE
            or (r.measure is Measure.RELATIONSHIP and r.relation is rule.relation)
            or (r.measure is Measure.IN_DEGREE and role == "dst")
            or (r.measure is Measure.OUT_DEGREE and role == "src"))


def compile_merged(rule: RewriteRule, constraints: Sequence[Constraint],
                   dialect: str = "compact") -> CompiledQuery:
    """Rule query with the guards of every constraint the new edge affects
    on a matched node."""
    if dialect not in DIALECTS:
        raise ValueError(f"unknown dialect {dialect!r}")
    base = compile_rule(rule)
    match, create = base.clauses
    if rule.variant is Variant.GROW_TARGET:
        roles = [("a", "src")]
    elif rule.variant is Variant.GROW_SOURCE:
        roles = [("a", "dst")]
    else:
        roles = [("a", "src"), ("b", "dst")]
    extra: List[str] = []
    terms: List[str] = []
    for var, role in roles:
        for c in constraints:
            if not _touches(rule, c, role):
                continue
            if dialect == "compact":
                n = sum(1 for x in extra if "[r" in x)
                rel_var = "r" if n == 0 else f"r{n + 1}"
                m, t = _compact_filter(c, var, rel_var)
                extra.extend(f"MATCH {p}" for p in m)
                terms.extend(t)
            else:
                g = compile_constraint(c, var).guard
                if g != "true":
                    terms.append(g)
    if dialect == "strict" and rule.variant is Variant.CONNECT_EXISTING:
        terms.append(f"NOT (a)-[:{rule.relation.cypher}]->(b)")
    clauses = [match, *extra]
    if terms:
        clauses.append("WHERE " + " AND ".join(terms))
    clauses.append(create)
    return CompiledQuery(rule.id, tuple(clauses), base.variables)


# -- graph export -------------------------------------------------------------------

def _node_props(graph: ProvGraph, nid: str) -> List[Tuple[str, PropValue]]:
    node = graph.nodes[nid]
    out: List[Tuple[str, PropValue]] = [("id", nid)]
    if node.start is not None:
        out.append(("prov:startTime", node.start))
    if node.end is not None:
        out.append(("prov:endTime", node.end))
    out.extend(node.props.items())
    return out


def iter_create_script(graph: ProvGraph) -> Iterator[str]:
    problems = validate(graph)
    if problems:
        raise InvalidGraph(f"graph has {len(problems)} violation(s)", problems)
    for nid, node in graph.nodes.items():
        yield f"CREATE (:{node.kind.value} {prop_map(_node_props(graph, nid))});"
    for eid, e in graph.edges.items():
        props: List[Tuple[str, PropValue]] = [("id", eid)]
        if e.time is not None:
            props.append(("prov:time", e.time))
        props.extend(e.props.items())
        yield (f'MATCH (s {{id: {literal(e.src)}}}), (d {{id: {literal(e.dst)}}}) '
               f"CREATE (s)-[:{e.kind.cypher} {prop_map(props)}]->(d);")


def export_create_script(graph: ProvGraph) -> str:
    """One CREATE per node and one MATCH ... CREATE per edge, one per line."""
    return "".join(line + "\n" for line in iter_create_script(graph))
