import random

import pytest

import oracles
from cypher_oracle import Interpreter, random_graph, tokens
from fuzz import constraint_text
from provforge.constraints import (
    condition_holds,
    measure,
    parse_constraint,
    parse_constraints,
)
from provforge.cypher import (
    compile_constraint,
    compile_merged,
    compile_rule,
    export_create_script,
    expr_predicate,
    literal,
    mangle,
)
from provforge.engine import ExecutionParams, generate
from provforge.errors import InvalidGraph, UnsupportedConstruct
from provforge.model import NodeKind, ProvGraph, RelationKind
from provforge.provn import derive_rules, parse_seed

K, R = NodeKind, RelationKind

BARE_USED = "activity(a)\nentity(e)\nused(a, e)\n"
Q1 = "MATCH (a:Activity {}) CREATE (a)-[:USED {}]->(:Entity {})"
Q2 = "MATCH (a:Entity {}) CREATE (a)<-[:USED {}]-(:Activity {})"
Q3 = "MATCH (a:Activity {}), (b:Entity {}) CREATE (a)-[:USED {}]->(b)"
MERGED = """MATCH (a:Activity {})
MATCH (a)-[r]-()
WHERE NOT a.ex_name = "create" AND NOT count(r) >= 5
CREATE (a)-[:USED {}]->(:Entity {})"""
MERGE_CONSTRAINTS = """an Activity has relationship "Used" exactly 1 times,
    unless it has property {"ex:name":"create"};
an Activity has degree at most 5;"""


@pytest.fixture
def used_rules():
    return {r.variant.value: r for r in derive_rules(parse_seed(BARE_USED))}


def test_rule_queries(used_rules):
    grow_target, grow_source = used_rules["GrowTarget"], used_rules["GrowSource"]
    connect = used_rules["ConnectExisting"]
    assert tokens(compile_rule(grow_target).text) == tokens(Q1)
    assert tokens(compile_rule(grow_source).text) == tokens(Q2)
    assert tokens(compile_rule(connect).text) == tokens(Q3)


def test_merged_query(used_rules):
    q = compile_merged(used_rules["GrowTarget"], parse_constraints(MERGE_CONSTRAINTS))
    assert tokens(q.text) == tokens(MERGED)


def test_strict_merge_keeps_both_guards(used_rules):
    q = compile_merged(used_rules["GrowTarget"], parse_constraints(MERGE_CONSTRAINTS), "strict")
    where = next(c for c in q.clauses if c.startswith("WHERE"))
    assert "size((a)-[:USED]-())" in where and "size((a)-[]-())" in where
    connect = compile_merged(used_rules["ConnectExisting"], [], "strict")
    assert connect.clauses[-2] == "WHERE NOT (a)-[:USED]->(b)"


def test_templates_land_in_create(docrev):
    q = compile_rule(derive_rules(docrev)[0])
    assert q.clauses[0] == "MATCH (a:Entity {})"
    assert 'prov_type: "edit"' in q.clauses[1]


def test_in_degree_fragment_is_directed():
    f = compile_constraint(parse_constraint("an Entity has in degree at most 1;"))
    assert f.matches == ("()-[r]->(a)",)
    assert f.at_maximum == "size(()-[]->(a)) >= 1"


def test_distribution_unsupported():
    c = parse_constraint('an Agent has relationship "WasAssociatedWith" between 1, 9 times, '
                         "with distribution gamma(2.0, 3.0);")
    assert compile_constraint(c).unsupported == ("distribution gamma",)
    with pytest.raises(UnsupportedConstruct):
        compile_constraint(c, allow_unsupported=False)


def test_identifiers_and_literals():
    assert mangle("prov:type") == "prov_type"
    assert mangle("ex:some-thing") == "`ex_some-thing`"
    assert literal('say "hi"') == '"say \\"hi\\""'
    assert literal(True) == "true" and literal(3) == "3"


# -- differential ----------------------------------------------------------------

EXTRA = [
    'an Entity has property {ex:n=1} at most 0 times;',
    'an Activity has degree at most 3, when it has relationship "Used" with the Entity, x '
    'AND it has relationship "WasAssociatedWith" with the Agent, y AND x has property '
    '{prov:type="a"} AND y has property {prov:type="b"};',
    'an Entity has relationship "WasDerivedFrom" at least 1 times, unless it has relationship '
    '"WasGeneratedBy" with the Activity, a1, AND a1 has property {prov:type="create"};',
    'an Agent has out degree between 1, 2, when (it has property {prov:type="a"} OR '
    'it has relationship "ActedOnBehalfOf" with the Agent, b) AND it has property {ex:n=2};',
    'the Entity, e has in degree at least 2, when e has property {prov:type="b"};',
]


def _check(interp, c, g, nid):
    """Every strict fragment of ``c`` agrees with the evaluator at ``nid``."""
    f = compile_constraint(c)
    env = {"a": nid}
    if g.nodes[nid].kind is not c.determiner.kind:
        return 0
    holds = condition_holds(c, g, nid)
    got = True if f.condition is None else interp.eval(f.condition, env)
    assert got is holds, (str(c), nid, f.condition)
    n = measure(c, g, nid)
    q = c.qualifier
    if f.at_maximum is not None:
        assert interp.eval(f.at_maximum, env) is (n >= q.high)
    if f.below_minimum is not None:
        assert interp.eval(f.below_minimum, env) is (n < q.low)
    admissible = (not holds) or q.high is None or n < q.high
    assert interp.eval(f.guard, env) is admissible, (str(c), f.guard)
    return 1


def differential(graphs=100, seed=0):
    rnd = random.Random(seed)
    checked = 0
    for gi in range(graphs):
        g = random_graph(rnd)
        rels = list(RelationKind)
        cs = [parse_constraint(constraint_text(rnd, rels, i)) for i in range(6)]
        cs += [parse_constraint(t) for t in EXTRA]
        interp = Interpreter(g, mangle)
        for c in cs:
            for nid in g.nodes:
                checked += _check(interp, c, g, nid)
    return checked


def test_differential_agreement():
    assert differential() > 1000


def test_bound_variable_condition_matches_brute_force():
    c = parse_constraint(EXTRA[2])
    pred = expr_predicate(c.condition.expr)
    rnd = random.Random(7)
    for _ in range(50):
        g = random_graph(rnd)
        interp = Interpreter(g, mangle)
        for nid in g.by_kind[K.ENTITY]:
            assert interp.eval(pred, {"a": nid}) is oracles.holds(c.condition.expr, g, nid)


def test_interpreter_counts_directions():
    g = ProvGraph()
    a, e = g.add_node(K.ACTIVITY), g.add_node(K.ENTITY)
    g.add_edge(R.USED, a, e)
    g.add_edge(R.USED, a, e)
    interp = Interpreter(g, mangle)
    assert interp.eval("size((a)-[]-())", {"a": a}) == 2
    assert interp.eval("size(()-[]->(a))", {"a": a}) == 0
    assert interp.eval("size(()-[:USED]->(a))", {"a": e}) == 2


# -- CREATE scripts -----------------------------------------------------------------

def test_create_script_for_seed(docrev):
    script = export_create_script(docrev.to_graph())
    lines = script.splitlines()
    assert len(lines) == 8
    assert lines[0].startswith('CREATE (:Entity {id: "e1"')
    assert 'prov_startTime: datetime("2013-11-16T16:00:00")' in script
    assert lines[4].startswith('MATCH (s {id: "a"}), (d {id: "e1"}) CREATE (s)-[:USED {')


def test_create_script_scales(docrev, wiki_constraints):
    graphs, _ = generate(docrev, wiki_constraints, ExecutionParams(1, 1000, 1500, seed=2))
    g = graphs[0]
    assert len(export_create_script(g).splitlines()) == len(g.nodes) + len(g.edges)


def test_create_script_rejects_invalid_graph():
    g = ProvGraph()
    e = g.add_node(K.ENTITY)
    g.add_edge(R.WAS_GENERATED_BY, e, g.add_node(K.ACTIVITY))
    g.add_edge(R.WAS_GENERATED_BY, e, g.add_node(K.ACTIVITY), check=False)
    with pytest.raises(InvalidGraph):
        export_create_script(g)

