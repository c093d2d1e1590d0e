import datetime as dt

import pytest

from provforge.errors import (
    CyclicGraph,
    DanglingEndpoint,
    SignatureMismatch,
    UniqueGenerationViolation,
    UnknownNode,
)
from provforge.model import (
    SIGNATURES,
    NodeKind,
    ProvGraph,
    RelationKind,
    add_edge,
    add_node,
    degree,
    depths,
    height_width,
    parse_timestamp,
    signature_allows,
    validate,
)

E, A, G = NodeKind.ENTITY, NodeKind.ACTIVITY, NodeKind.AGENT
R = RelationKind


def test_thirteen_relation_kinds_in_signature_table():
    assert len(RelationKind) == 13
    assert set(SIGNATURES) == set(RelationKind)
    assert "hadMember" not in {k.provn for k in RelationKind}


def test_relation_kind_names():
    assert R.WAS_GENERATED_BY.provn == "wasGeneratedBy"
    assert R.WAS_GENERATED_BY.cypher == "WAS_GENERATED_BY"
    for text in ("Used", "used", "USED"):
        assert R.parse(text) is R.USED
    assert R.parse("WAS_DERIVED_FROM") is R.WAS_DERIVED_FROM
    with pytest.raises(ValueError):
        R.parse("hadMember")


def test_signature_lookup():
    assert signature_allows(R.USED, A, E)
    assert not signature_allows(R.USED, E, A)
    assert all(signature_allows(R.WAS_INFLUENCED_BY, s, d) for s in NodeKind for d in NodeKind)


def test_add_edge_checks_signature():
    g = ProvGraph()
    a, e = add_node(g, A), add_node(g, E)
    with pytest.raises(SignatureMismatch):
        add_edge(g, R.USED, e, a)
    assert g.size == 0


def test_unique_generation():
    g = ProvGraph()
    e, a1, a2 = add_node(g, E), add_node(g, A), add_node(g, A)
    add_edge(g, R.WAS_GENERATED_BY, e, a1)
    with pytest.raises(UniqueGenerationViolation):
        add_edge(g, R.WAS_GENERATED_BY, e, a2)


def test_dangling_and_unknown():
    g = ProvGraph()
    a = add_node(g, A)
    with pytest.raises(DanglingEndpoint):
        add_edge(g, R.USED, a, "nope")
    with pytest.raises(UnknownNode):
        g.node("nope")
    with pytest.raises(KeyError):
        degree(g, "nope")


def test_duplicate_ids_rejected():
    g = ProvGraph()
    g.add_node(E, node_id="x")
    with pytest.raises(ValueError):
        g.add_node(A, node_id="x")


def test_activity_interval_order():
    g = ProvGraph()
    t0, t1 = parse_timestamp("2013-11-16T16:00:00"), parse_timestamp("2013-11-16T16:05:00")
    g.add_node(A, start=t0, end=t1)
    with pytest.raises(ValueError):
        g.add_node(A, start=t1, end=t0)


def test_timestamp_accepts_zulu():
    t = parse_timestamp("2020-01-01T00:00:00Z")
    assert t.tzinfo is not None and t.utcoffset() == dt.timedelta(0)


def test_degree_counts_parallel_edges():
    g = ProvGraph()
    e1, e2 = add_node(g, E), add_node(g, E)
    add_edge(g, R.WAS_DERIVED_FROM, e2, e1)
    add_edge(g, R.WAS_DERIVED_FROM, e2, e1)
    add_edge(g, R.ALTERNATE_OF, e1, e2)
    assert degree(g, e1, "in") == 2
    assert degree(g, e1, "out") == 1
    assert degree(g, e1) == 3
    assert degree(g, e1, "both", R.WAS_DERIVED_FROM) == 2
    assert degree(g, e2, "out", R.WAS_DERIVED_FROM) == 2
    with pytest.raises(ValueError):
        degree(g, e1, "sideways")


def test_self_loop_counts_twice():
    g = ProvGraph()
    x = add_node(g, E)
    add_edge(g, R.WAS_INFLUENCED_BY, x, x)
    assert degree(g, x) == 2 == degree(g, x, "both", R.WAS_INFLUENCED_BY)
    assert list(g.neighbours(x)) == [x]


def test_pop_restores_state():
    g = ProvGraph()
    a = add_node(g, A)
    n = add_node(g, E)
    r = add_edge(g, R.USED, a, n)
    g.pop_edge(r)
    g.pop_node(n)
    assert (g.order, g.size) == (1, 0)
    assert not g.has_pair(R.USED, a, n)
    assert g.nodes[a].rel_count == {} and g.nodes[a].out_edges == []
    # ids are reused after rollback, keeping runs reproducible
    assert add_node(g, E) == n


def test_validate_reports_foreign_violations():
    g = ProvGraph()
    g.add_node(E, node_id="e")
    g.add_node(A, node_id="a1")
    g.add_node(A, node_id="a2")
    g.add_edge(R.WAS_GENERATED_BY, "e", "a1", check=False)
    g.add_edge(R.WAS_GENERATED_BY, "e", "a2", check=False)
    g.add_edge(R.USED, "e", "a1", check=False)
    codes = sorted(v.code for v in validate(g))
    assert codes == ["signature", "unique-generation"]


def test_depths_and_width():
    g = ProvGraph()
    a, b, c, d = (add_node(g, E) for _ in range(4))
    add_edge(g, R.WAS_DERIVED_FROM, a, b)
    add_edge(g, R.WAS_DERIVED_FROM, b, c)
    add_edge(g, R.WAS_DERIVED_FROM, a, c)
    assert depths(g) == {a: 0, b: 1, c: 2, d: 0}
    assert height_width(g) == (2, 2)
    assert height_width(ProvGraph()) == (0, 0)


def test_cycle_detected():
    g = ProvGraph()
    a, b = add_node(g, E), add_node(g, E)
    add_edge(g, R.WAS_DERIVED_FROM, a, b)
    add_edge(g, R.WAS_DERIVED_FROM, b, a)
    with pytest.raises(CyclicGraph):
        depths(g)


def test_copy_is_independent():
    g = ProvGraph()
    a, e = add_node(g, A, {"k": 1}), add_node(g, E)
    add_edge(g, R.USED, a, e)
    h = g.copy()
    add_node(h, G)
    assert (g.order, h.order) == (2, 3)
    assert h.nodes[a].props == {"k": 1} and h.has_pair(R.USED, a, e)


def test_generated_fixture_validates_by_edge_scan(docrev, wiki_constraints):
    from provforge.engine import ExecutionParams, generate
    graphs, _ = generate(docrev, wiki_constraints, ExecutionParams(1, 500, 750, seed=21))
    g = graphs[0]
    assert len(g.nodes) >= 500
    assert validate(g) == []
    generated = {}
    for e in g.edges.values():
        want_src, want_dst = SIGNATURES[e.kind]
        assert want_src is None or g.nodes[e.src].kind is want_src
        assert want_dst is None or g.nodes[e.dst].kind is want_dst
        if e.kind is R.WAS_GENERATED_BY:
            generated[e.src] = generated.get(e.src, 0) + 1
    assert all(n == 1 for n in generated.values())
