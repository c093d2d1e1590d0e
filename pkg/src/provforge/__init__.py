"""Synthetic PROV graph generation from a seed trace and cardinality constraints."""

__version__ = "0.1.0"

from .constraints import Constraint, parse_constraint, parse_constraints, render  # noqa: E402
from .cypher import compile_constraint, compile_merged, compile_rule, export_create_script  # noqa: E402
from .engine import (  # noqa: E402
    ExecutionParams,
    GenerationReport,
    HaltReason,
    apply,
    candidates,
    generate,
    halting_reason,
)
from .metrics import compare, compute_metrics  # noqa: E402
from .model import NodeKind, ProvGraph, RelationKind, validate  # noqa: E402
from .provn import derive_rules, parse_graph, parse_seed  # noqa: E402
from .rng import Rng  # noqa: E402

__all__ = [
    "Constraint", "ExecutionParams", "GenerationReport", "HaltReason", "NodeKind",
    "ProvGraph", "RelationKind", "Rng", "apply", "candidates", "compare",
    "compile_constraint", "compile_merged", "compile_rule", "compute_metrics",
    "derive_rules", "export_create_script", "generate", "halting_reason",
    "parse_constraint", "parse_constraints", "parse_graph", "parse_seed", "render",
    "validate",
]
