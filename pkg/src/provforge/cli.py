"""Command-line entry point: generate, validate, compile, stats, compare."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .constraints import parse_constraints
from .cypher import DIALECTS, compile_merged, compile_rule, export_create_script
from .engine import DEFAULT_SEED, ExecutionParams, HaltReason, generate
from .errors import ParseError, ProvForgeError
from .formats import EXTENSIONS, FORMATS, dumps, graph_files, load_graph, write_atomic
from .metrics import DEFAULT_TITLE, MetricsReport, compare, compute_metrics
from .model import validate
from .provn import derive_rules, parse_seed

EXIT_OK, EXIT_INPUT, EXIT_NONTERMINATING = 0, 1, 2
SEED_ENV = "PROVFORGE_SEED"

log = logging.getLogger("provforge")


class InputError(Exception):
    """A user-facing input problem, reported as ``path: message``."""


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc


def _parse(path: str, parser):
    try:
        return parser(_read(path))
    except ParseError as exc:
        raise InputError(f"{path}:{exc}") from exc


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return DEFAULT_SEED
    try:
        return int(raw, 0)
    except ValueError:
        raise InputError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _emit(args, text: str, payload) -> None:
    """Human text or JSON on stdout; optionally also written to ``--out``."""
    body = json.dumps(payload, indent=2, sort_keys=True) + "\n" if args.json else text
    if getattr(args, "out", None):
        write_atomic(args.out, body)
    else:
        sys.stdout.write(body)


# -- subcommands -------------------------------------------------------------------

def cmd_generate(args) -> int:
    pattern = _parse(args.seed, parse_seed)
    constraints = _parse(args.constraints, parse_constraints) if args.constraints else []
    seed = args.rng_seed if args.rng_seed is not None else _default_seed()
    try:
        params = ExecutionParams(args.graphs, args.max_nodes, args.max_edges,
                                 args.max_height, args.max_width, seed)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    graphs, report = generate(pattern, constraints, params, parallel=args.parallel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(graphs) - 1)))
    for i, g in enumerate(graphs):
        write_atomic(out / f"graph_{i:0{width}d}{EXTENSIONS[args.format]}", dumps(g, args.format))
    data = report.to_dict()
    write_atomic(out / "report.json", json.dumps(data, indent=2, sort_keys=True) + "\n")
    totals = data["totals"]
    reasons = ", ".join(f"{k}={v}" for k, v in totals["halting_reasons"].items())
    text = (f"wrote {len(graphs)} graph(s) to {out}: {totals['nodes']} nodes, "
            f"{totals['edges']} edges ({reasons})\n")
    if args.json:
        sys.stdout.write(json.dumps(totals, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)
    if report.nonterminating:
        bad = [g.index for g in report.graphs if g.halting_reason is HaltReason.NON_TERMINATING]
        print(f"provforge: constraint completion hit the safety cap in graph(s) {bad}; "
              "partial output written", file=sys.stderr)
        return EXIT_NONTERMINATING
    return EXIT_OK


def _expand(paths: Sequence[str]) -> List[Path]:
    out: List[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(graph_files(p))
        elif p.exists():
            out.append(p)
        else:
            raise InputError(f"{p}: no such file or directory")
    return out


def cmd_validate(args) -> int:
    results = []
    for path in _expand(args.paths):
        if path.suffix == ".constraints":
            _parse(str(path), parse_constraints)
            results.append({"path": str(path), "violations": []})
            continue
        try:
            graph = load_graph(path)
        except ParseError as exc:
            raise InputError(f"{path}:{exc}") from exc
        except (ValueError, KeyError) as exc:
            raise InputError(f"{path}: {exc}") from exc
        results.append({"path": str(path), "violations": [v.to_dict() for v in validate(graph)]})
    failed = [r for r in results if r["violations"]]
    lines = []
    for r in results:
        if not r["violations"]:
            lines.append(f"{r['path']}: ok")
        for v in r["violations"]:
            lines.append(f"{r['path']}: {v['code']}: {v['subject']}: {v['message']}")
    _emit(args, "\n".join(lines) + "\n", {"files": results, "valid": not failed})
    return EXIT_INPUT if failed else EXIT_OK


def cmd_compile(args) -> int:
    if args.graph:
        graph = load_graph(args.graph)
        text = export_create_script(graph)
        _emit(args, text, {"statements": text.splitlines()})
        return EXIT_OK
    if not args.seed:
        raise InputError("compile needs --seed or --graph")
    pattern = _parse(args.seed, parse_seed)
    constraints = _parse(args.constraints, parse_constraints) if args.constraints else []
    queries = []
    for rule in derive_rules(pattern):
        q = compile_merged(rule, constraints, args.dialect) if constraints else compile_rule(rule)
        queries.append(q)
    text = "".join(f"// {q.rule_id}\n{q.text};\n" for q in queries)
    _emit(args, text, {"dialect": args.dialect,
                       "queries": [{"rule": q.rule_id, "text": q.text} for q in queries]})
    return EXIT_OK


def cmd_stats(args) -> int:
    files = _expand([args.collection])
    if not files:
        raise InputError(f"{args.collection}: no graph files")
    try:
        graphs = [load_graph(p) for p in files]
    except ParseError as exc:
        raise InputError(f"{args.collection}: {exc}") from exc
    report = compute_metrics(graphs, args.title_property)
    _emit(args, report.to_text(), report.to_dict())
    return EXIT_OK


def _load_report(path: str) -> MetricsReport:
    try:
        return MetricsReport.from_dict(json.loads(_read(path)))
    except (ValueError, AttributeError, TypeError) as exc:
        raise InputError(f"{path}: not a metrics report ({exc})") from exc


def cmd_compare(args) -> int:
    report = compare(_load_report(args.control), _load_report(args.test))
    _emit(args, report.to_text(), report.to_dict())
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="provforge",
                                description="Seeded, constraint-driven PROV graph generator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help="write output to this file instead of stdout"):
        sp.add_argument("--json", action="store_true", help="machine-readable JSON output")
        sp.add_argument("--out", help=out_help)

    g = sub.add_parser("generate", help="generate a collection of graphs")
    g.add_argument("--seed", required=True, help="seed trace (PROV-N)")
    g.add_argument("--constraints", help="constraint file")
    g.add_argument("--graphs", type=int, default=1)
    g.add_argument("--max-nodes", type=int, default=100)
    g.add_argument("--max-edges", type=int, default=150)
    g.add_argument("--max-height", type=int)
    g.add_argument("--max-width", type=int)
    g.add_argument("--rng-seed", type=lambda s: int(s, 0),
                   help=f"master seed (default: ${SEED_ENV}, else {DEFAULT_SEED})")
    g.add_argument("--format", choices=FORMATS, default="provn")
    g.add_argument("--parallel", type=int, default=1, help="worker processes")
    g.add_argument("--json", action="store_true", help="print totals as JSON")
    g.add_argument("--out", default="out", help="output directory (default: out)")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", help="check graphs (or constraint files)")
    v.add_argument("paths", nargs="+")
    common(v)
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("compile", help="emit openCypher for rules, or a CREATE script")
    c.add_argument("--seed", help="seed trace whose rules are compiled")
    c.add_argument("--constraints", help="merge these constraints into the rule queries")
    c.add_argument("--dialect", choices=DIALECTS, default="compact")
    c.add_argument("--graph", help="export this graph as a CREATE script instead")
    common(c)
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("stats", help="summary statistics of a collection")
    s.add_argument("--collection", required=True, help="directory (or single graph file)")
    s.add_argument("--title-property", default=DEFAULT_TITLE)
    common(s)
    s.set_defaults(func=cmd_stats)

    m = sub.add_parser("compare", help="control vs test metrics deltas")
    m.add_argument("control")
    m.add_argument("test")
    common(m)
    m.set_defaults(func=cmd_compare)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if getattr(args, "parallel", 1) < 1:
        parser.error("--parallel must be >= 1")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"provforge: {exc}", file=sys.stderr)
    except ProvForgeError as exc:
        print(f"provforge: {type(exc).__name__}: {exc}", file=sys.stderr)
        for v in getattr(exc, "violations", []):
            print(f"  {v.code}: {v.subject}: {v.message}", file=sys.stderr)
    except OSError as exc:
        print(f"provforge: {exc}", file=sys.stderr)
    return EXIT_INPUT


def main() -> None:
    sys.exit(run())
