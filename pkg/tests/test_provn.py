import datetime as dt
import warnings

import pytest

from provforge.errors import (
    DuplicateIdentifier,
    EmptyActiveSet,
    ParseError,
    SeedPropertyConflict,
    SignatureMismatch,
    UndeclaredIdentifier,
    UnknownKey,
    UnknownRelation,
)
from provforge.model import NodeKind, RelationKind, validate
from provforge.provn import (
    derive_rules,
    graph_to_provn,
    parse_graph,
    parse_seed,
    property_template,
    serialize_seed,
)
from provforge.rules import Variant

R = RelationKind


def test_docrev_listing(docrev):
    assert list(docrev.nodes) == ["e1", "e2", "a", "ag"]
    assert len(docrev.edges) == 4
    assert docrev.active_kinds == [R.USED, R.WAS_GENERATED_BY, R.WAS_ASSOCIATED_WITH,
                                   R.WAS_DERIVED_FROM]
    assert docrev.start_kind is NodeKind.ENTITY
    a = docrev.nodes["a"]
    assert a.start == dt.datetime(2013, 11, 16, 16, 0) and a.end == dt.datetime(2013, 11, 16, 16, 5)
    assert docrev.nodes["ag"].props == {"prov:type": "prov:Person"}
    used = docrev.edges[0]
    assert (used.src, used.dst, used.time) == ("a", "e1", dt.datetime(2013, 11, 16, 16, 0))
    derived = docrev.edges[3]
    assert derived.refs == {"prov:activity": "a"} and derived.props == {}


def test_single_entity():
    p = parse_seed("entity(e1)")
    assert list(p.nodes) == ["e1"] and p.edges == [] and p.active_kinds == []


def test_undeclared_identifier_has_position():
    with pytest.raises(UndeclaredIdentifier) as info:
        parse_seed("entity(e1)\nused(a, e1, -)\n")
    assert (info.value.line, info.value.column) == (2, 6)


def test_duplicate_identifier():
    with pytest.raises(DuplicateIdentifier):
        parse_seed("entity(e1)\nagent(e1)")


def test_unknown_statement():
    with pytest.raises(UnknownRelation):
        parse_seed("entity(e1)\nhadMember(e1, e1)")


@pytest.mark.parametrize("text", [
    "entity(e1",
    "entity(e1, [prov:type=])",
    "used(a, e1, 2013-13-45T00:00:00)",
    "activity(a, 2013-01-02T00:00:00, 2013-01-01T00:00:00)",
    "used(a, e1, -, -)",
    "entity(e1) endDocument entity(e2)",
])
def test_syntax_errors(text):
    with pytest.raises(ParseError) as info:
        parse_seed(text)
    assert info.value.line >= 1


def test_literals_comments_and_wrappers():
    text = """document
    prefix ex <http://example.org/>
    // a comment
    entity(e1, [ex:n=3, ex:x=2.5, ex:b=true, ex:q='single', /* inline */ ex:t="2020-01-01T00:00:00" %% xsd:dateTime])
    endDocument"""
    p = parse_seed(text)
    assert p.nodes["e1"].props == {"ex:n": 3, "ex:x": 2.5, "ex:b": True, "ex:q": "single",
                                   "ex:t": dt.datetime(2020, 1, 1)}


def test_round_trip_is_fixed_point(docrev):
    once = serialize_seed(docrev)
    again = parse_seed(once)
    assert again == docrev
    assert serialize_seed(again) == once


def test_derive_rules_docrev(docrev):
    rules = derive_rules(docrev)
    assert len(rules) == 12 == 3 * len(docrev.active_kinds)
    assert [r.id for r in rules[:3]] == ["Used.GrowSource", "Used.GrowTarget",
                                         "Used.ConnectExisting"]
    wgb = rules[3]
    assert wgb.edge_props == (("ex:fct", "save"),)
    assert (wgb.src_kind, wgb.dst_kind) == (NodeKind.ENTITY, NodeKind.ACTIVITY)
    assert rules[0].src_template.props == (("prov:type", "edit"),)


def test_used_only_gives_three_variants():
    rules = derive_rules(parse_seed("activity(a)\nentity(e1)\nused(a, e1)"))
    assert [r.variant for r in rules] == [Variant.GROW_SOURCE, Variant.GROW_TARGET,
                                          Variant.CONNECT_EXISTING]
    assert [r.variant.creates_node for r in rules] == [True, True, False]


def test_node_only_pattern_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert derive_rules(parse_seed("entity(e1)")) == []
    assert any(issubclass(w.category, EmptyActiveSet) for w in caught)


def test_property_templates(docrev):
    assert property_template(docrev, R.WAS_GENERATED_BY) == [("ex:fct", "save")]
    assert property_template(docrev, NodeKind.ENTITY) == [("prov:type", "Document")]
    with pytest.raises(UnknownKey):
        property_template(docrev, R.WAS_INFORMED_BY)


def test_property_conflict_first_wins():
    p = parse_seed('entity(e1, [k="x", j=1])\nentity(e2, [k="y", m=2])')
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert property_template(p, NodeKind.ENTITY) == [("k", "x"), ("j", 1), ("m", 2)]
    assert any(issubclass(w.category, SeedPropertyConflict) for w in caught)


def test_signature_checked_when_deriving():
    p = parse_seed("entity(e)\nactivity(a)\nused(e, a)")
    with pytest.raises(SignatureMismatch):
        derive_rules(p)


def test_parse_graph_keeps_violations_for_validate():
    g = parse_graph("entity(e)\nactivity(a1)\nactivity(a2)\n"
                    "wasGeneratedBy(e, a1)\nwasGeneratedBy(e, a2)")
    assert [v.code for v in validate(g)] == ["unique-generation"]


def test_graph_serialization_round_trip(docrev):
    g = docrev.to_graph()
    text = graph_to_provn(g)
    assert graph_to_provn(parse_graph(text)) == text
    assert "wasDerivedFrom(e2, e1, a)" in text
