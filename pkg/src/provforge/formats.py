"""Graph file formats: PROV-N, JSON Lines and Cypher scripts.

The JSON form is line-delimited: one object per node, then one per edge, in
insertion order. Edge objects are the ones carrying ``src`` and ``dst``.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import tempfile
from pathlib import Path
from typing import List, Optional

from .cypher import export_create_script
from .model import NodeKind, ProvGraph, PropValue, RelationKind, format_timestamp, parse_timestamp
from .provn import graph_to_provn, parse_graph

FORMATS = ("provn", "json", "cypher")
EXTENSIONS = {"provn": ".provn", "json": ".jsonl", "cypher": ".cypher"}


def _enc(value: PropValue):
    if isinstance(value, _dt.datetime):
        return {"$datetime": format_timestamp(value)}
    return value


def _dec(value) -> PropValue:
    if isinstance(value, dict) and set(value) == {"$datetime"}:
        return parse_timestamp(value["$datetime"])
    return value


def _time(t: Optional[_dt.datetime]):
    return format_timestamp(t) if t is not None else None


def graph_to_dict(graph: ProvGraph) -> dict:
    nodes = []
    for n in graph.nodes.values():
        d = {"id": n.id, "kind": n.kind.value, "props": {k: _enc(v) for k, v in n.props.items()}}
        if n.start is not None:
            d["start"] = _time(n.start)
        if n.end is not None:
            d["end"] = _time(n.end)
        nodes.append(d)
    edges = []
    for e in graph.edges.values():
        d = {"id": e.id, "kind": e.kind.value, "src": e.src, "dst": e.dst,
             "props": {k: _enc(v) for k, v in e.props.items()}}
        if e.time is not None:
            d["time"] = _time(e.time)
        edges.append(d)
    return {"nodes": nodes, "edges": edges}


def graph_from_dict(d: dict) -> ProvGraph:
    g = ProvGraph()
    for n in d.get("nodes", []):
        start, end = n.get("start"), n.get("end")
        g.add_node(NodeKind.parse(n["kind"]), {k: _dec(v) for k, v in n.get("props", {}).items()},
                   node_id=n["id"], start=parse_timestamp(start) if start else None,
                   end=parse_timestamp(end) if end else None)
    for e in d.get("edges", []):
        t = e.get("time")
        g.add_edge(RelationKind.parse(e["kind"]), e["src"], e["dst"],
                   {k: _dec(v) for k, v in e.get("props", {}).items()},
                   time=parse_timestamp(t) if t else None, edge_id=e["id"], check=False)
    return g


def graph_to_json(graph: ProvGraph) -> str:
    d = graph_to_dict(graph)
    return "".join(json.dumps(obj, ensure_ascii=False) + "\n" for obj in d["nodes"] + d["edges"])


def graph_from_json(text: str) -> ProvGraph:
    """Parse JSON Lines, or a single ``{"nodes": [...], "edges": [...]}`` document."""
    stripped = text.lstrip()
    if stripped.startswith("{") and '"nodes"' in stripped.split("\n", 1)[0]:
        try:
            doc = json.loads(text)
        except ValueError:
            doc = None
        if isinstance(doc, dict) and "nodes" in doc:
            return graph_from_dict(doc)
    nodes, edges = [], []
    for line in text.splitlines():
        if line.strip():
            obj = json.loads(line)
            (edges if "src" in obj else nodes).append(obj)
    return graph_from_dict({"nodes": nodes, "edges": edges})


def dumps(graph: ProvGraph, fmt: str) -> str:
    if fmt == "provn":
        return graph_to_provn(graph)
    if fmt == "json":
        return graph_to_json(graph)
    if fmt == "cypher":
        return export_create_script(graph)
    raise ValueError(f"unknown format {fmt!r}")


def load_graph(path) -> ProvGraph:
    """Read a graph from ``.jsonl``/``.json`` or PROV-N (any other extension)."""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if p.suffix in (".jsonl", ".json"):
        return graph_from_json(text)
    return parse_graph(text)


def graph_files(directory) -> List[Path]:
    """Graph files in a collection directory, in name order."""
    d = Path(directory)
    return sorted(p for p in d.iterdir()
                  if p.suffix in (".provn", ".jsonl", ".json") and p.name != "report.json")


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    p = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", dir=p.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
