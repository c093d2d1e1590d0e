"""Summary statistics over graph collections and control/test comparison."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

from .errors import CyclicGraph, InvalidGraph, MetricMismatch, MissingTitleProperty
from .model import NodeKind, ProvGraph, RelationKind, height_width, validate

DEFAULT_TITLE = "ex:title"
USED = RelationKind.USED
WAW = RelationKind.WAS_ASSOCIATED_WITH
WGB = RelationKind.WAS_GENERATED_BY
# deltas are rounded so that e.g. 2.9 - 2.4 reports as 0.5
DELTA_DIGITS = 12


@dataclass
class Summary:
    n: int = 0
    mean: Optional[float] = None
    std: Optional[float] = None  # population standard deviation
    min: Optional[float] = None
    max: Optional[float] = None
    histogram: Dict[int, int] = field(default_factory=dict)
    per_trace_mean: Optional[float] = None  # mean of the per-graph means

    @classmethod
    def of(cls, values: Sequence[float], per_graph: Iterable[Sequence[float]] = ()) -> "Summary":
        n = len(values)
        if not n:
            return cls()
        mean = math.fsum(values) / n
        var = math.fsum((v - mean) ** 2 for v in values) / n
        means = [math.fsum(g) / len(g) for g in per_graph if len(g)]
        hist = Counter(values)
        return cls(n, mean, math.sqrt(var), min(values), max(values),
                   dict(sorted(hist.items())),
                   math.fsum(means) / len(means) if means else None)

    def to_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "std": self.std, "min": self.min,
                "max": self.max, "per_trace_mean": self.per_trace_mean,
                "histogram": {str(k): v for k, v in self.histogram.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "Summary":
        return cls(d.get("n", 0), d.get("mean"), d.get("std"), d.get("min"), d.get("max"),
                   {int(k): v for k, v in (d.get("histogram") or {}).items()},
                   d.get("per_trace_mean"))


@dataclass
class MetricsReport:
    graphs: int
    nodes: int
    edges: int
    metrics: Dict[str, Optional[Summary]]  # None: the metric could not be measured
    definitions: Dict[str, str]
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"collection": {"graphs": self.graphs, "nodes": self.nodes, "edges": self.edges},
                "definitions": dict(self.definitions),
                "metrics": {k: (v.to_dict() if v is not None else None)
                            for k, v in self.metrics.items()},
                "notes": list(self.notes)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        col = d.get("collection", {})
        return cls(col.get("graphs", 0), col.get("nodes", 0), col.get("edges", 0),
                   {k: (Summary.from_dict(v) if v is not None else None)
                    for k, v in d.get("metrics", {}).items()},
                   dict(d.get("definitions", {})), list(d.get("notes", [])))

    def to_text(self) -> str:
        head = ("metric", "n", "mean", "std", "min", "max")
        rows = [head]
        for name, s in self.metrics.items():
            if s is None:
                rows.append((name, "-", "absent", "", "", ""))
            else:
                rows.append((name, str(s.n), _fmt(s.mean), _fmt(s.std), _fmt(s.min), _fmt(s.max)))
        title = f"{self.graphs} graph(s), {self.nodes} nodes, {self.edges} edges"
        return title + "\n" + _table(rows)


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return "-"
    return f"{x:.4g}" if isinstance(x, float) else str(x)


def _table(rows: List[tuple]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for j, r in enumerate(rows):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _count(graph: ProvGraph, nid: str, kind: RelationKind) -> int:
    return graph.nodes[nid].rel_count.get(kind, 0)


def contributions(graph: ProvGraph, agent: str, title: str = DEFAULT_TITLE) -> int:
    """Distinct titles of entities generated by activities associated with ``agent``."""
    g = graph
    titles = set()
    for e in g.nodes[agent].in_edges:
        assoc = g.edges[e]
        if assoc.kind is not WAW:
            continue
        for e2 in g.nodes[assoc.src].in_edges:
            gen = g.edges[e2]
            if gen.kind is WGB:
                props = g.nodes[gen.src].props
                if title in props:
                    titles.add(props[title])
    return len(titles)


def compute_metrics(collection: Sequence[ProvGraph], title_property: str = DEFAULT_TITLE,
                    require_title: bool = False) -> MetricsReport:
    for i, g in enumerate(collection):
        problems = validate(g)
        if problems:
            raise InvalidGraph(f"graph {i} has {len(problems)} violation(s)", problems)

    per: Dict[str, List[List[float]]] = {}

    def add(name: str, values: List[float]) -> None:
        per.setdefault(name, []).append(values)

    has_title = False
    notes = []
    for g in collection:
        entities, agents = g.by_kind[NodeKind.ENTITY], g.by_kind[NodeKind.AGENT]
        add("usages_per_entity", [_count(g, n, USED) for n in entities])
        add("associations_per_agent", [_count(g, n, WAW) for n in agents])
        add("contributions_per_agent", [contributions(g, n, title_property) for n in agents])
        has_title = has_title or any(title_property in g.nodes[n].props for n in entities)
        for kind in NodeKind:
            ids = g.by_kind[kind]
            nodes = [g.nodes[n] for n in ids]
            add(f"in_degree.{kind.value}", [len(n.in_edges) for n in nodes])
            add(f"out_degree.{kind.value}", [len(n.out_edges) for n in nodes])
            add(f"degree.{kind.value}", [len(n.in_edges) + len(n.out_edges) for n in nodes])
        try:
            h, w = height_width(g)
        except CyclicGraph:
            notes.append("height/width undefined for a cyclic graph")
            continue
        add("height", [h])
        add("width", [w])

    metrics: Dict[str, Optional[Summary]] = {}
    for name in sorted(per):
        groups = per[name]
        metrics[name] = Summary.of([v for grp in groups for v in grp], groups)
    if not has_title:
        if require_title:
            raise MissingTitleProperty(f"no Entity has property {title_property!r}")
        metrics["contributions_per_agent"] = None
        notes.append(f"contributions_per_agent absent: no Entity has {title_property!r}")
    return MetricsReport(len(collection), sum(len(g.nodes) for g in collection),
                         sum(len(g.edges) for g in collection), metrics,
                         {"std": "population", "title_property": title_property}, notes)


# -- comparison -------------------------------------------------------------------

@dataclass(frozen=True)
class Delta:
    metric: str
    statistic: str
    control: Optional[float]
    test: Optional[float]
    absolute: Optional[float]
    relative: Optional[float]  # None when undefined (control is 0 or absent)

    def to_dict(self) -> dict:
        return {"metric": self.metric, "statistic": self.statistic, "control": self.control,
                "test": self.test, "absolute_delta": self.absolute,
                "relative_delta": self.relative if self.relative is not None else "undefined"}


@dataclass
class ComparisonReport:
    rows: List[Delta]

    def row(self, metric: str, statistic: str = "mean") -> Delta:
        for r in self.rows:
            if r.metric == metric and r.statistic == statistic:
                return r
        raise KeyError((metric, statistic))

    def to_dict(self) -> dict:
        return {"comparisons": [r.to_dict() for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        rows = [("metric", "stat", "control", "test", "abs delta", "rel delta")]
        for r in self.rows:
            rel = "undefined" if r.relative is None else f"{r.relative:+.1%}"
            ab = "-" if r.absolute is None else f"{r.absolute:+.4g}"
            rows.append((r.metric, r.statistic, _fmt(r.control), _fmt(r.test), ab, rel))
        return _table(rows)


STATISTICS = ("mean", "std")


def compare(control: MetricsReport, test: MetricsReport) -> ComparisonReport:
    """Test minus control, per metric and statistic."""
    if control.definitions != test.definitions:
        raise MetricMismatch(f"definitions differ: {control.definitions} vs {test.definitions}")
    if set(control.metrics) != set(test.metrics):
        diff = sorted(set(control.metrics) ^ set(test.metrics))
        raise MetricMismatch(f"metric sets differ: {', '.join(diff)}")
    rows = []
    for name in sorted(control.metrics):
        a, b = control.metrics[name], test.metrics[name]
        for stat in STATISTICS:
            x = getattr(a, stat) if a is not None else None
            y = getattr(b, stat) if b is not None else None
            if x is None or y is None:
                rows.append(Delta(name, stat, x, y, None, None))
                continue
            absolute = round(y - x, DELTA_DIGITS)
            relative = round(absolute / x, DELTA_DIGITS) if x != 0 else None
            rows.append(Delta(name, stat, x, y, absolute, relative))
    return ComparisonReport(rows)
