"""The constraint language: parsing, rendering and evaluation.

A statement reads ``<determiner> <requirement> <qualifier> [<condition>];``::

    an Entity has in degree at most 1;
    an Agent has relationship "WasAssociatedWith" between 1, 1000 times,
        with distribution gamma(2.0, 3.0), unless it has relationship "ActedOnBehalfOf";
    an Entity has relationship "WasDerivedFrom" at least 1 times,
        unless it has relationship "WasGeneratedBy" with the Activity, a1,
        AND a1 has property {prov:type="create"};

Keywords are case-insensitive. ``AND`` and ``OR`` may not be mixed at one
level without parentheses. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from .errors import (
    InvalidRange,
    ParseError,
    UnboundVariable,
    UnknownNodeKind,
    UnknownRelation,
)
from .model import NodeKind, PropValue, ProvGraph, RelationKind
from .rng import Rng


# -- AST -----------------------------------------------------------------------

@dataclass(frozen=True)
class Determiner:
    kind: NodeKind
    var: Optional[str] = None  # set for the invariable form "the Agent, a1"

    @property
    def invariable(self) -> bool:
        return self.var is not None


class Measure(str, Enum):
    IN_DEGREE = "in degree"
    OUT_DEGREE = "out degree"
    DEGREE = "degree"
    RELATIONSHIP = "relationship"
    PROPERTY = "property"


@dataclass(frozen=True)
class Requirement:
    measure: Measure
    relation: Optional[RelationKind] = None
    prop: Optional[Tuple[str, PropValue]] = None


@dataclass(frozen=True)
class Distribution:
    family: str  # "gamma" | "uniform" | "normal"
    params: Tuple[float, ...] = ()

    def sample(self, rng: Rng) -> float:
        if self.family == "gamma":
            return rng.gamma(*self.params)
        if self.family == "normal":
            return rng.normal(*self.params)
        raise ValueError(f"{self.family} is sampled over integers")


class Op(str, Enum):
    AT_MOST = "at most"
    AT_LEAST = "at least"
    EXACTLY = "exactly"
    BETWEEN = "between"


@dataclass(frozen=True)
class Qualifier:
    op: Op
    low: int
    high: Optional[int]  # None: unbounded above
    distribution: Optional[Distribution] = None

    @classmethod
    def at_most(cls, n: int, distribution=None) -> "Qualifier":
        return cls(Op.AT_MOST, 0, n, distribution)

    @classmethod
    def at_least(cls, n: int, distribution=None) -> "Qualifier":
        return cls(Op.AT_LEAST, n, None, distribution)

    @classmethod
    def exactly(cls, n: int) -> "Qualifier":
        return cls(Op.EXACTLY, n, n)

    @classmethod
    def between(cls, lo: int, hi: int, distribution=None) -> "Qualifier":
        return cls(Op.BETWEEN, lo, hi, distribution)


@dataclass(frozen=True)
class RelAtom:
    relation: RelationKind
    bind: Optional[Tuple[NodeKind, str]] = None  # "with the Activity, a1"


@dataclass(frozen=True)
class PropAtom:
    name: str
    value: PropValue
    subject: Optional[str] = None  # None: the determined node itself


@dataclass(frozen=True)
class And:
    items: Tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    items: Tuple["Expr", ...]


Expr = Union[RelAtom, PropAtom, And, Or]


@dataclass(frozen=True)
class Condition:
    polarity: str  # "when" | "unless"
    expr: Expr


@dataclass(frozen=True)
class Constraint:
    determiner: Determiner
    requirement: Requirement
    qualifier: Qualifier
    condition: Optional[Condition] = None
    line: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return render(self)


class Status(str, Enum):
    SATISFIED = "Satisfied"
    BELOW_MINIMUM = "BelowMinimum"
    AT_MAXIMUM = "AtMaximum"
    PAST_MAXIMUM = "PastMaximum"


# -- lexer -----------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<word>[A-Za-z_][\w.]*(?::[A-Za-z_][\w.]*)?)
  | (?P<punct>[,;{}():=])
""", re.VERBOSE)

KEYWORDS = frozenset("""a an the has in out degree relationship property at most least
    exactly between times with distribution when unless it and or gamma uniform
    normal true false""".split())


@dataclass
class _Tok:
    type: str
    text: str
    line: int
    column: int

    @property
    def key(self) -> str:
        return self.text.lower() if self.type == "word" else self.text


def _tokenize(text: str) -> List[_Tok]:
    out: List[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        if m.lastgroup not in ("ws", "nl", "comment"):
            out.append(_Tok(m.lastgroup, m.group(), line, pos - line_start + 1))
        if m.lastgroup == "nl":
            line += 1
            line_start = m.end()
        pos = m.end()
    out.append(_Tok("eof", "", line, pos - line_start + 1))
    return out


# -- parser ----------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0
        self.scope: Dict[str, Optional[NodeKind]] = {}
        self.self_var: Optional[str] = None

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def fail(self, message: str, tok: Optional[_Tok] = None, cls=ParseError):
        tok = tok or self.tok
        return cls(message, tok.line, tok.column)

    def at(self, *keys: str) -> bool:
        return self.tok.key in keys and self.tok.type in ("word", "punct")

    def take(self, *keys: str) -> Optional[_Tok]:
        if self.at(*keys):
            self.pos += 1
            return self.toks[self.pos - 1]
        return None

    def need(self, *keys: str) -> _Tok:
        tok = self.take(*keys)
        if tok is None:
            found = self.tok.text or "end of input"
            raise self.fail(f"expected {' or '.join(map(repr, keys))}, found {found!r}")
        return tok

    def integer(self) -> int:
        tok = self.tok
        if tok.type != "number" or not re.fullmatch(r"\d+", tok.text):
            raise self.fail(f"expected a non-negative integer, found {tok.text!r}")
        self.pos += 1
        return int(tok.text)

    def real(self) -> float:
        tok = self.tok
        if tok.type != "number":
            raise self.fail(f"expected a number, found {tok.text!r}")
        self.pos += 1
        return float(tok.text)

    def string(self) -> str:
        tok = self.tok
        if tok.type != "string":
            raise self.fail(f"expected a quoted string, found {tok.text!r}")
        self.pos += 1
        return re.sub(r"\\(.)", r"\1", tok.text[1:-1])

    def node_kind(self) -> NodeKind:
        tok = self.tok
        try:
            kind = NodeKind.parse(tok.text)
        except ValueError:
            raise self.fail(f"unknown node kind {tok.text!r}", tok, UnknownNodeKind) from None
        self.pos += 1
        return kind

    def relation(self) -> RelationKind:
        tok = self.tok
        name = self.string()
        try:
            return RelationKind.parse(name)
        except ValueError:
            raise self.fail(f"unknown relation {name!r}", tok, UnknownRelation) from None

    def variable(self) -> str:
        tok = self.tok
        if tok.type != "word" or tok.key in KEYWORDS or ":" in tok.text:
            raise self.fail(f"expected a variable name, found {tok.text!r}")
        self.pos += 1
        return tok.text

    # statement structure

    def statements(self) -> List[Constraint]:
        out = []
        while self.tok.type != "eof":
            out.append(self.statement())
        return out

    def statement(self) -> Constraint:
        first = self.tok
        self.scope, self.self_var = {}, None
        det = self.determiner()
        req = self.requirement()
        self.take(",")
        qual = self.qualifier()
        self.take(",")
        cond = None
        if self.at("when", "unless"):
            cond = self.condition()
        self.need(";")
        return Constraint(det, req, qual, cond, line=first.line)

    def determiner(self) -> Determiner:
        if self.take("a", "an"):
            return Determiner(self.node_kind())
        if self.take("the"):
            kind = self.node_kind()
            self.take(",")
            var = self.variable()
            self.take(",")
            self.scope[var] = None
            self.self_var = var
            return Determiner(kind, var)
        raise self.fail(f"expected a determiner (a, an, the), found {self.tok.text!r}")

    def requirement(self) -> Requirement:
        self.need("has")
        if self.take("in"):
            self.need("degree")
            return Requirement(Measure.IN_DEGREE)
        if self.take("out"):
            self.need("degree")
            return Requirement(Measure.OUT_DEGREE)
        if self.take("degree"):
            return Requirement(Measure.DEGREE)
        if self.take("relationship"):
            return Requirement(Measure.RELATIONSHIP, relation=self.relation())
        if self.take("property"):
            return Requirement(Measure.PROPERTY, prop=self.property_map())
        raise self.fail(f"unknown requirement {self.tok.text!r}")

    def qualifier(self) -> Qualifier:
        start = self.tok
        if self.take("at"):
            if self.take("most"):
                op, lo, hi = Op.AT_MOST, 0, self.integer()
            else:
                self.need("least")
                op, lo, hi = Op.AT_LEAST, self.integer(), None
        elif self.take("exactly"):
            n = self.integer()
            op, lo, hi = Op.EXACTLY, n, n
        elif self.take("between"):
            lo = self.integer()
            if not self.take(","):
                self.need("and")
            hi = self.integer()
            op = Op.BETWEEN
            if lo > hi:
                raise self.fail(f"empty range: {lo} > {hi}", start, InvalidRange)
        else:
            raise self.fail(f"expected a qualifier, found {self.tok.text!r}")
        self.take("times")
        dist = None
        mark = self.pos
        self.take(",")
        if self.take("with"):
            self.need("distribution")
            dist = self.distribution(op, hi)
        else:
            self.pos = mark
        return Qualifier(op, lo, hi, dist)

    def distribution(self, op: Op, hi: Optional[int]) -> Distribution:
        tok = self.tok
        if op is Op.EXACTLY:
            raise self.fail("a distribution needs a range qualifier", tok)
        family = self.need("gamma", "uniform", "normal").key
        if family == "uniform":
            if self.take("("):
                self.need(")")
            if hi is None:
                raise self.fail("uniform distribution needs a bounded range", tok, InvalidRange)
            return Distribution("uniform")
        self.need("(")
        a = self.real()
        self.need(",")
        b = self.real()
        self.need(")")
        if family == "gamma" and (a <= 0 or b <= 0):
            raise self.fail("gamma needs shape > 0 and scale > 0", tok, InvalidRange)
        if family == "normal" and b <= 0:
            raise self.fail("normal needs stddev > 0", tok, InvalidRange)
        return Distribution(family, (a, b))

    def property_map(self) -> Tuple[str, PropValue]:
        self.need("{")
        tok = self.tok
        if tok.type == "string":
            name = self.string()
        elif tok.type == "word":
            name = tok.text
            self.pos += 1
        else:
            raise self.fail(f"expected a property name, found {tok.text!r}")
        self.need(":", "=")
        value = self.literal()
        if self.at(","):
            raise self.fail("one property per map")
        self.need("}")
        return name, value

    def literal(self) -> PropValue:
        tok = self.tok
        if tok.type == "string":
            return self.string()
        if tok.type == "number":
            self.pos += 1
            return float(tok.text) if any(c in tok.text for c in ".eE") else int(tok.text)
        if self.take("true"):
            return True
        if self.take("false"):
            return False
        raise self.fail(f"expected a literal, found {tok.text!r}")

    # conditions

    def condition(self) -> Condition:
        polarity = self.need("when", "unless").key
        return Condition(polarity, self.expr())

    def expr(self) -> Expr:
        items = [self.term()]
        op = None
        while True:
            mark = self.pos
            self.take(",")
            tok = self.take("and", "or")
            if tok is None:
                self.pos = mark
                break
            if op is not None and tok.key != op:
                raise self.fail("mixed AND/OR needs parentheses", tok)
            op = tok.key
            items.append(self.term())
        if op is None:
            return items[0]
        return And(tuple(items)) if op == "and" else Or(tuple(items))

    def term(self) -> Expr:
        if self.take("("):
            e = self.expr()
            self.need(")")
            return e
        tok = self.tok
        if self.take("it"):
            subject = None
        else:
            name = self.variable()
            if name not in self.scope:
                raise self.fail(f"variable {name!r} is not bound", tok, UnboundVariable)
            subject = None if name == self.self_var else name
        self.need("has")
        if self.take("relationship"):
            if subject is not None:
                raise self.fail("relationship conditions apply to the determined node", tok)
            relation = self.relation()
            mark = self.pos
            self.take(",")
            bind = None
            if self.take("with"):
                self.need("the")
                kind = self.node_kind()
                self.take(",")
                vtok = self.tok
                var = self.variable()
                if var in self.scope:
                    raise self.fail(f"variable {var!r} is already bound", vtok)
                self.scope[var] = kind
                bind = (kind, var)
            else:
                self.pos = mark
            return RelAtom(relation, bind)
        if self.take("property"):
            name, value = self.property_map()
            return PropAtom(name, value, subject)
        raise self.fail(f"expected 'relationship' or 'property', found {self.tok.text!r}")


def parse_constraints(text: str) -> List[Constraint]:
    """One :class:`Constraint` per ``;``-terminated statement, in order."""
    return _Parser(text).statements()


def parse_constraint(text: str) -> Constraint:
    found = parse_constraints(text)
    if len(found) != 1:
        raise ParseError(f"expected one statement, found {len(found)}")
    return found[0]


# -- rendering -------------------------------------------------------------------

def _lit(value: PropValue) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return '"' + str(value).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _render_expr(e: Expr, nested: bool = False) -> str:
    if isinstance(e, (And, Or)):
        sep = " AND " if isinstance(e, And) else " OR "
        body = sep.join(_render_expr(i, True) for i in e.items)
        return f"({body})" if nested else body
    if isinstance(e, RelAtom):
        text = f'it has relationship "{e.relation.value}"'
        if e.bind:
            text += f" with the {e.bind[0].value}, {e.bind[1]}"
        return text
    subject = e.subject or "it"
    return f"{subject} has property {{{_lit(e.name)}: {_lit(e.value)}}}"


def render(c: Constraint) -> str:
    d = c.determiner
    parts = [f"the {d.kind.value}, {d.var}" if d.var else f"an {d.kind.value}"]
    r = c.requirement
    if r.measure is Measure.RELATIONSHIP:
        parts.append(f'has relationship "{r.relation.value}"')
    elif r.measure is Measure.PROPERTY:
        parts.append(f"has property {{{_lit(r.prop[0])}: {_lit(r.prop[1])}}}")
    else:
        parts.append(f"has {r.measure.value}")
    q = c.qualifier
    if q.op is Op.BETWEEN:
        qual = f"between {q.low}, {q.high}"
    elif q.op is Op.AT_LEAST:
        qual = f"at least {q.low}"
    else:
        qual = f"{q.op.value} {q.high}"
    if r.measure in (Measure.RELATIONSHIP, Measure.PROPERTY):
        qual += " times"
    if q.distribution:
        dist = q.distribution
        args = "(" + ", ".join(repr(float(p)) for p in dist.params) + ")" if dist.params else ""
        qual += f", with distribution {dist.family}{args}"
    parts.append(qual)
    text = " ".join(parts)
    if c.condition:
        text += f", {c.condition.polarity} {_render_expr(c.condition.expr)}"
    return text + ";"


def render_all(constraints: Sequence[Constraint]) -> str:
    return "".join(render(c) + "\n" for c in constraints)


# -- evaluation -----------------------------------------------------------------

def _same(a: PropValue, b: PropValue) -> bool:
    return type(a) is type(b) and a == b


def bound_variables(e: Expr) -> List[Tuple[str, NodeKind, RelationKind]]:
    out = []
    if isinstance(e, (And, Or)):
        for i in e.items:
            out.extend(bound_variables(i))
    elif isinstance(e, RelAtom) and e.bind:
        out.append((e.bind[1], e.bind[0], e.relation))
    return out


def _eval(e: Expr, graph: ProvGraph, node, env: Dict[str, Optional[str]]) -> bool:
    if isinstance(e, And):
        return all(_eval(i, graph, node, env) for i in e.items)
    if isinstance(e, Or):
        return any(_eval(i, graph, node, env) for i in e.items)
    if isinstance(e, RelAtom):
        if e.bind:
            return env.get(e.bind[1]) is not None
        return node.rel_count.get(e.relation, 0) > 0
    target = node if e.subject is None else (
        graph.nodes[env[e.subject]] if env.get(e.subject) is not None else None)
    if target is None or e.name not in target.props:
        return False
    return _same(target.props[e.name], e.value)


def _domain(graph: ProvGraph, node_id: str, kind: NodeKind, relation: RelationKind) -> List[str]:
    seen: Dict[str, None] = {}
    for other in graph.neighbours(node_id, relation):
        if graph.nodes[other].kind is kind:
            seen.setdefault(other)
    return list(seen)


def expr_holds(e: Expr, graph: ProvGraph, node_id: str) -> bool:
    """Truth of a condition expression for one node.

    Bound variables are existentially quantified over the neighbours reached
    through their binding relationship. Expressions are monotone (no
    negation), so a variable with no candidate is simply left unbound and
    every atom mentioning it is false.
    """
    node = graph.node(node_id)
    binds = bound_variables(e)
    if not binds:
        return _eval(e, graph, node, {})
    domains = [_domain(graph, node_id, kind, rel) or [None] for _, kind, rel in binds]
    names = [b[0] for b in binds]
    for combo in itertools.product(*domains):
        if _eval(e, graph, node, dict(zip(names, combo))):
            return True
    return False


def condition_holds(c: Constraint, graph: ProvGraph, node_id: str) -> bool:
    """Whether ``c`` applies to the node: its condition (if any) allows it.
    The node's kind is not checked; see :func:`applies`."""
    if c.condition is None:
        graph.node(node_id)
        return True
    value = expr_holds(c.condition.expr, graph, node_id)
    return value if c.condition.polarity == "when" else not value


def applies(c: Constraint, graph: ProvGraph, node_id: str) -> bool:
    return graph.node(node_id).kind is c.determiner.kind and condition_holds(c, graph, node_id)


def measure(c: Constraint, graph: ProvGraph, node_id: str) -> int:
    """The count the requirement constrains (parallel edges count each)."""
    node = graph.node(node_id)
    r = c.requirement
    m = r.measure
    if m is Measure.RELATIONSHIP:
        return node.rel_count.get(r.relation, 0)
    if m is Measure.IN_DEGREE:
        return len(node.in_edges)
    if m is Measure.OUT_DEGREE:
        return len(node.out_edges)
    if m is Measure.DEGREE:
        return len(node.in_edges) + len(node.out_edges)
    name, value = r.prop
    return 1 if name in node.props and _same(node.props[name], value) else 0


def status_of(count: int, low: int, high: Optional[int]) -> Status:
    if count < low:
        return Status.BELOW_MINIMUM
    if high is not None:
        if count > high:
            return Status.PAST_MAXIMUM
        if count == high:
            return Status.AT_MAXIMUM
    return Status.SATISFIED


def requirement_status(c: Constraint, graph: ProvGraph, node_id: str) -> Status:
    q = c.qualifier
    return status_of(measure(c, graph, node_id), q.low, q.high)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def sample_target(q: Qualifier, rng: Rng) -> int:
    """Per-node target count drawn from the qualifier's distribution,
    rounded half-up and clamped into the qualifier range. Without a
    distribution the draw is uniform over the range; an open range
    ("at least n") then yields n."""
    lo, hi = q.low, q.high
    dist = q.distribution
    if dist is None or dist.family == "uniform":
        if hi is None:
            return lo
        return rng.randint(lo, hi)
    value = dist.sample(rng)
    n = _round_half_up(value) if math.isfinite(value) else lo
    if n < lo:
        return lo
    if hi is not None and n > hi:
        return hi
    return n


def iter_applicable(constraints: Sequence[Constraint], graph: ProvGraph,
                    node_id: str) -> Iterator[Constraint]:
    for c in constraints:
        if applies(c, graph, node_id):
            yield c
