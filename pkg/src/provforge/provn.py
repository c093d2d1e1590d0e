"""PROV-N subset: seed trace parsing, rule derivation and graph serialization.

Supported statements are ``entity``, ``activity``, ``agent`` and the thirteen
relation statements, each with optional positional arguments (``-`` marks a
missing one) and an optional ``[name=value, ...]`` attribute list.
``document``/``endDocument`` wrappers and ``prefix`` lines are accepted and
ignored.
"""

from __future__ import annotations

import datetime as _dt
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple, Union

from .errors import (
    DuplicateIdentifier,
    EmptyActiveSet,
    ParseError,
    SeedPropertyConflict,
    SignatureMismatch,
    UndeclaredIdentifier,
    UnknownKey,
    UnknownRelation,
)
from .model import (
    NodeKind,
    PropValue,
    ProvGraph,
    RelationKind,
    format_timestamp,
    parse_timestamp,
    signature_allows,
)
from .rules import NodeTemplate, RewriteRule, Variant

# Optional positional arguments after (src, dst), per relation.
# "time" fills Edge.time; any other role is stored as an edge property.
EXTRA_ARGS: Dict[RelationKind, Tuple[Tuple[str, str], ...]] = {
    RelationKind.USED: (("time", "time"),),
    RelationKind.WAS_GENERATED_BY: (("time", "time"),),
    RelationKind.WAS_INVALIDATED_BY: (("time", "time"),),
    RelationKind.WAS_STARTED_BY: (("prov:starter", "id"), ("time", "time")),
    RelationKind.WAS_ENDED_BY: (("prov:ender", "id"), ("time", "time")),
    RelationKind.WAS_DERIVED_FROM: (
        ("prov:activity", "id"), ("prov:generation", "id"), ("prov:usage", "id")),
    RelationKind.WAS_ASSOCIATED_WITH: (("prov:plan", "id"),),
    RelationKind.ACTED_ON_BEHALF_OF: (("prov:activity", "id"),),
}

_RELATIONS_BY_PROVN = {k.provn: k for k in RelationKind}
_NODE_STATEMENTS = {"entity": NodeKind.ENTITY, "activity": NodeKind.ACTIVITY,
                    "agent": NodeKind.AGENT}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<time>\d{4}-\d{2}-\d{2}T\d{2}:\d{2}(?::\d{2}(?:\.\d+)?)?(?:[Zz]|[+-]\d{2}:\d{2})?)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<qstring>'(?:[^'\\\n]|\\.)*')
  | (?P<uri><[^>\s]*>)
  | (?P<name>[A-Za-z_][\w.\-]*(?::[\w.\-]+)?)
  | (?P<dtype>%%)
  | (?P<punct>[()\[\],=;-])
""", re.VERBOSE | re.DOTALL)


@dataclass
class Token:
    type: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind, value = m.lastgroup, m.group()
        if kind not in ("ws", "nl", "comment"):
            tokens.append(Token(kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", r"\1", body)


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"')


_INT_TYPES = {"xsd:int", "xsd:integer", "xsd:long", "xsd:short", "xsd:byte",
              "xsd:nonNegativeInteger", "xsd:positiveInteger"}
_FLOAT_TYPES = {"xsd:decimal", "xsd:double", "xsd:float"}


def _typed(text: str, dtype: str, tok: Token) -> PropValue:
    try:
        if dtype in _INT_TYPES:
            return int(text)
        if dtype in _FLOAT_TYPES:
            return float(text)
        if dtype == "xsd:boolean":
            if text not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return text in ("true", "1")
        if dtype == "xsd:dateTime":
            return parse_timestamp(text)
    except ValueError:
        raise ParseError(f"{text!r} is not a valid {dtype}", tok.line, tok.column) from None
    return text


def format_value(value: PropValue) -> str:
    """PROV-N literal for a property value."""
    if isinstance(value, bool):
        return f'"{"true" if value else "false"}" %% xsd:boolean'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isfinite(value):
            return repr(value)
        return f'"{value!r}" %% xsd:double'
    if isinstance(value, _dt.datetime):
        return f'"{format_timestamp(value)}" %% xsd:dateTime'
    return f'"{_escape(value)}"'


@dataclass
class NodeDecl:
    id: str
    kind: NodeKind
    props: Dict[str, PropValue] = field(default_factory=dict)
    start: Optional[_dt.datetime] = None
    end: Optional[_dt.datetime] = None
    line: int = 0


@dataclass
class EdgeDecl:
    kind: RelationKind
    src: str
    dst: str
    props: Dict[str, PropValue] = field(default_factory=dict)
    time: Optional[_dt.datetime] = None
    refs: Dict[str, str] = field(default_factory=dict)
    line: int = 0


@dataclass
class SeedPattern:
    nodes: Dict[str, NodeDecl] = field(default_factory=dict)
    edges: List[EdgeDecl] = field(default_factory=list)

    @property
    def active_kinds(self) -> List[RelationKind]:
        """Relation kinds present in the trace, in order of first appearance."""
        seen: List[RelationKind] = []
        for e in self.edges:
            if e.kind not in seen:
                seen.append(e.kind)
        return seen

    @property
    def start_kind(self) -> NodeKind:
        return next(iter(self.nodes.values())).kind

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SeedPattern):
            return NotImplemented
        strip = lambda decls: [{k: v for k, v in vars(d).items() if k != "line"} for d in decls]
        return (strip(self.nodes.values()) == strip(other.nodes.values())
                and strip(self.edges) == strip(other.edges))

    def to_graph(self, check: bool = True) -> ProvGraph:
        """Materialize the trace as a graph with the local ids as node ids.
        Reference arguments (e.g. the activity of ``wasDerivedFrom``) are kept
        as edge properties under their role name."""
        g = ProvGraph()
        for n in self.nodes.values():
            g.add_node(n.kind, n.props, node_id=n.id, start=n.start, end=n.end)
        for e in self.edges:
            props = dict(e.props)
            props.update(e.refs)
            g.add_edge(e.kind, e.src, e.dst, props, time=e.time, check=check)
        return g


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.endpoints: List[Tuple[EdgeDecl, Token, Token]] = []

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str, tok: Optional[Token] = None, cls=ParseError):
        tok = tok or self.tok
        return cls(message, tok.line, tok.column)

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.tok.type in ("punct", "dtype") and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.tokens[self.pos - 1]

    def ident(self) -> Token:
        if self.tok.type != "name":
            raise self.error(f"expected an identifier, found {self.tok.text or 'end of input'!r}")
        return self.next()

    # -- grammar -----------------------------------------------------------

    def document(self) -> SeedPattern:
        pattern = SeedPattern()
        if self.tok.type == "name" and self.tok.text == "document":
            self.next()
        while self.tok.type != "eof":
            if self.tok.type == "name" and self.tok.text == "endDocument":
                self.next()
                if self.tok.type != "eof":
                    raise self.error("content after endDocument")
                break
            self.statement(pattern)
        return pattern

    def statement(self, pattern: SeedPattern) -> None:
        head = self.ident()
        if head.text == "prefix":
            self.ident()
            if self.tok.type != "uri":
                raise self.error("expected <namespace-uri> after prefix name")
            self.next()
            return
        if head.text in _NODE_STATEMENTS:
            decl = self.node_statement(_NODE_STATEMENTS[head.text], head)
            if decl.id in pattern.nodes:
                raise self.error(f"identifier {decl.id!r} declared twice", head,
                                 DuplicateIdentifier)
            pattern.nodes[decl.id] = decl
            return
        kind = _RELATIONS_BY_PROVN.get(head.text)
        if kind is None:
            raise self.error(f"unknown statement {head.text!r}", head, UnknownRelation)
        pattern.edges.append(self.relation_statement(kind, head))

    def node_statement(self, kind: NodeKind, head: Token) -> NodeDecl:
        self.expect("(")
        decl = NodeDecl(self.ident().text, kind, line=head.line)
        if kind is NodeKind.ACTIVITY and self.accept(","):
            if self.tok.type == "punct" and self.tok.text == "[":
                decl.props = self.attributes()
                self.expect(")")
                return decl
            decl.start = self.optional_time()
            self.expect(",")
            decl.end = self.optional_time()
            if decl.start and decl.end and decl.start > decl.end:
                raise self.error(f"activity {decl.id!r} ends before it starts", head)
        if self.accept(","):
            decl.props = self.attributes()
        self.expect(")")
        return decl

    def optional_time(self) -> Optional[_dt.datetime]:
        if self.accept("-"):
            return None
        if self.tok.type != "time":
            raise self.error(f"expected a timestamp or '-', found {self.tok.text!r}")
        tok = self.next()
        try:
            return parse_timestamp(tok.text)
        except ValueError:
            raise self.error(f"invalid timestamp {tok.text!r}", tok) from None

    def relation_statement(self, kind: RelationKind, head: Token) -> EdgeDecl:
        self.expect("(")
        src = self.endpoint()
        self.expect(",")
        dst = self.endpoint()
        edge = EdgeDecl(kind, src.text, dst.text, line=head.line)
        self.endpoints.append((edge, src, dst))
        extras = EXTRA_ARGS.get(kind, ())
        i = 0
        while self.accept(","):
            if self.tok.type == "punct" and self.tok.text == "[":
                edge.props = self.attributes()
                break
            if i >= len(extras):
                raise self.error(f"too many arguments for {kind.provn}")
            role, typ = extras[i]
            i += 1
            if self.accept("-"):
                continue
            if typ == "time":
                edge.time = self.optional_time()
            else:
                edge.refs[role] = self.ident().text
        self.expect(")")
        return edge

    def endpoint(self) -> Token:
        if self.tok.type == "punct" and self.tok.text == "-":
            raise self.error("relation endpoints cannot be '-'")
        return self.ident()

    def attributes(self) -> Dict[str, PropValue]:
        self.expect("[")
        props: Dict[str, PropValue] = {}
        if self.accept("]"):
            return props
        while True:
            name = self.ident().text
            self.expect("=")
            value = self.literal()
            props.setdefault(name, value)
            if self.accept("]"):
                return props
            self.expect(",")

    def literal(self) -> PropValue:
        tok = self.next()
        if tok.type == "string":
            body = _unescape(tok.text[1:-1])
            if self.accept("%%"):
                return _typed(body, self.ident().text, tok)
            return body
        if tok.type == "qstring":
            return _unescape(tok.text[1:-1])
        if tok.type == "number":
            return float(tok.text) if any(c in tok.text for c in ".eE") else int(tok.text)
        if tok.type == "name" and tok.text in ("true", "false"):
            return tok.text == "true"
        if tok.type == "time":
            return parse_timestamp(tok.text)
        raise self.error(f"expected a literal value, found {tok.text!r}", tok)


def parse_seed(text: str) -> SeedPattern:
    """Parse a PROV-N trace. Every relation endpoint must be declared by a
    node statement somewhere in the document."""
    parser = _Parser(text)
    pattern = parser.document()
    for edge, *toks in parser.endpoints:
        for tok in toks:
            if tok.text not in pattern.nodes:
                raise UndeclaredIdentifier(
                    f"{edge.kind.provn} refers to undeclared identifier {tok.text!r}",
                    tok.line, tok.column)
    return pattern


def parse_graph(text: str) -> ProvGraph:
    """Load a PROV-N document as a graph without enforcing invariants, so
    that :func:`provforge.model.validate` can report them."""
    return parse_seed(text).to_graph(check=False)


# -- rule and template derivation ---------------------------------------------

def property_template(pattern: SeedPattern,
                      key: Union[NodeKind, RelationKind]) -> List[Tuple[str, PropValue]]:
    """Properties harvested from every seed element of ``key``, in seed order.
    On a name clash the first value wins and a warning is emitted."""
    if isinstance(key, NodeKind):
        elements = [n.props for n in pattern.nodes.values() if n.kind is key]
    else:
        elements = [e.props for e in pattern.edges if e.kind is key]
    if not elements:
        raise UnknownKey(f"{key.value} does not occur in the seed")
    merged: Dict[str, PropValue] = {}
    for props in elements:
        for name, value in props.items():
            if name not in merged:
                merged[name] = value
            elif merged[name] != value:
                warnings.warn(
                    f"{key.value} property {name}: keeping {merged[name]!r}, ignoring {value!r}",
                    SeedPropertyConflict, stacklevel=2)
    return list(merged.items())


def _node_template(pattern: SeedPattern, kind: NodeKind) -> NodeTemplate:
    try:
        props = tuple(property_template(pattern, kind))
    except UnknownKey:
        props = ()
    start = end = None
    for n in pattern.nodes.values():
        if n.kind is kind and (n.start or n.end):
            start, end = n.start, n.end
            break
    return NodeTemplate(kind, props, start, end)


def derive_rules(pattern: SeedPattern) -> List[RewriteRule]:
    """Three rules per active relation kind (grow-source, grow-target,
    connect-existing), in order of first appearance in the seed."""
    active = pattern.active_kinds
    if not active:
        warnings.warn("seed declares no relations; no rewrite rules are active",
                      EmptyActiveSet, stacklevel=2)
        return []
    templates = {k: _node_template(pattern, k) for k in NodeKind}
    rules: List[RewriteRule] = []
    for kind in active:
        first = next(e for e in pattern.edges if e.kind is kind)
        src_kind = pattern.nodes[first.src].kind
        dst_kind = pattern.nodes[first.dst].kind
        for e in pattern.edges:
            s, d = pattern.nodes[e.src].kind, pattern.nodes[e.dst].kind
            if not signature_allows(e.kind, s, d):
                raise SignatureMismatch(
                    f"line {e.line}: {e.kind.provn} does not allow {s.value} -> {d.value}")
        time = next((e.time for e in pattern.edges if e.kind is kind and e.time), None)
        props = tuple(property_template(pattern, kind))
        for variant in Variant:
            rules.append(RewriteRule(kind, variant, src_kind, dst_kind, props, time,
                                     templates[src_kind], templates[dst_kind]))
    return rules


# -- serialization --------------------------------------------------------------

def _attrs(props: Dict[str, PropValue]) -> str:
    return "[" + ", ".join(f"{k}={format_value(v)}" for k, v in props.items()) + "]"


def _time_or_dash(t: Optional[_dt.datetime]) -> str:
    return format_timestamp(t) if t is not None else "-"


def _node_line(kind: NodeKind, node_id: str, props, start, end) -> str:
    args = [node_id]
    if kind is NodeKind.ACTIVITY and (start is not None or end is not None):
        args += [_time_or_dash(start), _time_or_dash(end)]
    if props:
        args.append(_attrs(props))
    return f"{kind.provn}({', '.join(args)})"


def _edge_line(kind: RelationKind, src: str, dst: str, props: Dict[str, PropValue],
               time: Optional[_dt.datetime], refs: Dict[str, str]) -> str:
    args = [src, dst]
    extras: List[str] = []
    for role, typ in EXTRA_ARGS.get(kind, ()):
        if typ == "time":
            extras.append(_time_or_dash(time))
        else:
            extras.append(refs.get(role, "-"))
    while extras and extras[-1] == "-":
        extras.pop()
    args += extras
    if props:
        args.append(_attrs(props))
    return f"{kind.provn}({', '.join(args)})"


def serialize_seed(pattern: SeedPattern) -> str:
    lines = [_node_line(n.kind, n.id, n.props, n.start, n.end) for n in pattern.nodes.values()]
    lines += [_edge_line(e.kind, e.src, e.dst, e.props, e.time, e.refs) for e in pattern.edges]
    return "\n".join(lines) + "\n"


def _split_refs(kind: RelationKind, props: Dict[str, PropValue]):
    roles = {role for role, typ in EXTRA_ARGS.get(kind, ()) if typ == "id"}
    refs = {k: v for k, v in props.items() if k in roles and isinstance(v, str)}
    rest = {k: v for k, v in props.items() if k not in refs}
    return rest, refs


def iter_provn_lines(graph: ProvGraph) -> Iterator[str]:
    for n in graph.nodes.values():
        yield _node_line(n.kind, n.id, n.props, n.start, n.end)
    for e in graph.edges.values():
        props, refs = _split_refs(e.kind, e.props)
        yield _edge_line(e.kind, e.src, e.dst, props, e.time, refs)


def graph_to_provn(graph: ProvGraph) -> str:
    return "".join(line + "\n" for line in iter_provn_lines(graph))

