import json
import random

import pytest

import oracles
from conftest import FIXTURES
from provforge.engine import ExecutionParams, generate
from provforge.errors import InvalidGraph, MetricMismatch, MissingTitleProperty
from provforge.metrics import (
    MetricsReport,
    Summary,
    compare,
    compute_metrics,
    contributions,
)
from provforge.model import NodeKind, ProvGraph, RelationKind

K, R = NodeKind, RelationKind


def _load(name):
    return MetricsReport.from_dict(json.loads((FIXTURES / name).read_text()))


def test_seed_graph_associations(docrev):
    report = compute_metrics([docrev.to_graph()])
    s = report.metrics["associations_per_agent"]
    assert (s.n, s.mean, s.std) == (1, 1.0, 0.0)
    assert report.metrics["usages_per_entity"].mean == 0.5
    assert report.metrics["height"].mean == 2  # e2 -> a -> e1


def test_flat_scan_cross_check(docrev, wiki_constraints):
    graphs, _ = generate(docrev, wiki_constraints, ExecutionParams(10, 60, 90, seed=6))
    report = compute_metrics(graphs)
    values = [v for g in graphs
              for v in oracles.relation_counts_by_kind(g, R.WAS_ASSOCIATED_WITH, K.AGENT).values()]
    mean, std = oracles.flat_mean_std(values)
    s = report.metrics["associations_per_agent"]
    assert s.mean == pytest.approx(mean, rel=1e-9)
    assert s.std == pytest.approx(std, rel=1e-9)
    per = [oracles.flat_mean_std(list(
        oracles.relation_counts_by_kind(g, R.WAS_ASSOCIATED_WITH, K.AGENT).values()))[0]
        for g in graphs]
    assert s.per_trace_mean == pytest.approx(sum(per) / len(per))


def test_permutation_invariance(docrev, wiki_constraints):
    graphs, _ = generate(docrev, wiki_constraints, ExecutionParams(5, 40, 60, seed=9))
    a = compute_metrics(graphs).to_dict()
    shuffled = graphs[:]
    random.Random(1).shuffle(shuffled)
    b = compute_metrics(shuffled).to_dict()
    for name, s in a["metrics"].items():
        t = b["metrics"][name]
        if s is None:
            assert t is None
            continue
        for key in ("n", "mean", "std", "min", "max", "histogram"):
            assert s[key] == pytest.approx(t[key]) if isinstance(s[key], float) else s[key] == t[key]


def test_contributions_count_distinct_titles():
    g = ProvGraph()
    ag = g.add_node(K.AGENT)
    for title in ("A", "A", "B"):
        act = g.add_node(K.ACTIVITY)
        g.add_edge(R.WAS_ASSOCIATED_WITH, act, ag)
        ent = g.add_node(K.ENTITY, {"ex:title": title})
        g.add_edge(R.WAS_GENERATED_BY, ent, act)
    assert contributions(g, ag) == 2
    assert compute_metrics([g]).metrics["contributions_per_agent"].mean == 2.0


def test_missing_title_is_reported(docrev):
    report = compute_metrics([docrev.to_graph()])
    assert report.metrics["contributions_per_agent"] is None
    assert any("ex:title" in n for n in report.notes)
    with pytest.raises(MissingTitleProperty):
        compute_metrics([docrev.to_graph()], require_title=True)


def test_invalid_graph_rejected():
    g = ProvGraph()
    e = g.add_node(K.ENTITY)
    g.add_edge(R.WAS_GENERATED_BY, e, g.add_node(K.ACTIVITY))
    g.add_edge(R.WAS_GENERATED_BY, e, g.add_node(K.ACTIVITY), check=False)
    with pytest.raises(InvalidGraph):
        compute_metrics([g])


def test_summary_population_std():
    s = Summary.of([1, 2, 3, 4])
    assert s.mean == 2.5 and s.std == pytest.approx(1.118033988749895)
    assert s.histogram == {1: 1, 2: 1, 3: 1, 4: 1}
    assert Summary.of([]).mean is None


def test_report_round_trip(docrev):
    report = compute_metrics([docrev.to_graph()])
    again = MetricsReport.from_dict(json.loads(report.to_json()))
    assert again.to_dict() == report.to_dict()
    assert "associations_per_agent" in report.to_text()


def test_self_comparison_is_zero(docrev, wiki_constraints):
    graphs, _ = generate(docrev, wiki_constraints, ExecutionParams(2, 40, 60, seed=1))
    r = compute_metrics(graphs)
    for row in compare(r, r).rows:
        if row.control is not None:
            assert row.absolute == 0.0


def test_fixture_deltas():
    report = compare(_load("control_metrics.json"), _load("test_metrics.json"))
    assoc = report.row("associations_per_agent")
    assert (assoc.control, assoc.test, assoc.absolute) == (2.4, 2.9, 0.5)
    assert assoc.relative == pytest.approx(0.5 / 2.4)
    contrib = report.row("contributions_per_agent")
    assert contrib.absolute == 0.7
    assert report.row("associations_per_agent", "std").absolute is None
    text = report.to_text()
    assert "+0.5" in text and "+0.7" in text
    assert json.loads(report.to_json())["comparisons"][0]["absolute_delta"] == 0.5


def test_relative_delta_undefined_at_zero():
    a = MetricsReport(1, 0, 0, {"m": Summary(mean=0.0, std=0.0)}, {})
    b = MetricsReport(1, 0, 0, {"m": Summary(mean=1.0, std=0.0)}, {})
    row = compare(a, b).row("m")
    assert row.absolute == 1.0 and row.relative is None
    assert row.to_dict()["relative_delta"] == "undefined"
    assert "undefined" in compare(a, b).to_text()


def test_mismatched_reports():
    a = MetricsReport(1, 0, 0, {"m": Summary(mean=1.0)}, {"std": "population"})
    b = MetricsReport(1, 0, 0, {"m": Summary(mean=1.0)}, {"std": "sample"})
    with pytest.raises(MetricMismatch):
        compare(a, b)
    c = MetricsReport(1, 0, 0, {"other": Summary(mean=1.0)}, {"std": "population"})
    with pytest.raises(MetricMismatch):
        compare(a, c)
