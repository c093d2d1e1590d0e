"""The atomic rewrite rules: three variants per relation kind."""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

from .model import NodeKind, PropValue, RelationKind


class Variant(str, Enum):
    GROW_SOURCE = "GrowSource"  # existing target, new source node
    GROW_TARGET = "GrowTarget"  # existing source, new target node
    CONNECT_EXISTING = "ConnectExisting"  # two existing nodes, new edge only

    @property
    def creates_node(self) -> bool:
        return self is not Variant.CONNECT_EXISTING


@dataclass(frozen=True)
class NodeTemplate:
    kind: NodeKind
    props: Tuple[Tuple[str, PropValue], ...] = ()
    start: Optional[_dt.datetime] = None
    end: Optional[_dt.datetime] = None


@dataclass(frozen=True)
class RewriteRule:
    relation: RelationKind
    variant: Variant
    src_kind: NodeKind
    dst_kind: NodeKind
    edge_props: Tuple[Tuple[str, PropValue], ...] = ()
    edge_time: Optional[_dt.datetime] = None
    src_template: NodeTemplate = field(default=None)  # type: ignore[assignment]
    dst_template: NodeTemplate = field(default=None)  # type: ignore[assignment]

    @property
    def id(self) -> str:
        return f"{self.relation.value}.{self.variant.value}"

    @property
    def new_node_template(self) -> Optional[NodeTemplate]:
        if self.variant is Variant.GROW_SOURCE:
            return self.src_template
        if self.variant is Variant.GROW_TARGET:
            return self.dst_template
        return None

    def edge_props_dict(self) -> Dict[str, PropValue]:
        return dict(self.edge_props)

    def __str__(self) -> str:
        return self.id
