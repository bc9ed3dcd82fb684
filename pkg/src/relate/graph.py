"""Heterogeneous temporal graph built from foreign-key joins.

One node per row. Every non-missing FK cell yields a directed edge from
the referencing row to the referenced row, typed "table.column→target",
plus the mirrored edge typed with the "~rev" suffix so 2-hop neighborhoods
reach parent rows. Dangling FK values are counted, never fatal; real
exports contain them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .database import RelationalDatabase

REVERSE_SUFFIX = "~rev"


def edge_type_name(table: str, column: str, target: str) -> str:
    return f"{table}.{column}→{target}"


def reverse_edge_type(edge_type: str) -> str:
    if edge_type.endswith(REVERSE_SUFFIX):
        return edge_type[: -len(REVERSE_SUFFIX)]
    return edge_type + REVERSE_SUFFIX


@dataclass
class DanglingReport:
    table: str
    column: str
    count: int

    def to_dict(self) -> dict:
        return {"table": self.table, "column": self.column, "count": self.count}


@dataclass
class HeteroTemporalGraph:
    node_counts: dict[str, int] = field(default_factory=dict)
    node_time: dict[str, list] = field(default_factory=dict)
    # edge type -> (src node type, dst node type)
    edge_endpoints: dict[str, tuple[str, str]] = field(default_factory=dict)
    edges: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    # per node type, per node: outgoing (edge_type, dst_type, dst_index)
    out_adj: dict[str, list[list[tuple[str, str, int]]]] = field(default_factory=dict)
    dangling: list[DanglingReport] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return sum(self.node_counts.values())

    @property
    def n_edges(self) -> int:
        return sum(len(pairs) for pairs in self.edges.values())

    def time_of(self, node_type: str, index: int):
        times = self.node_time.get(node_type)
        return None if times is None else times[index]


def build_graph(db: RelationalDatabase) -> HeteroTemporalGraph:
    g = HeteroTemporalGraph()
    for spec in db.manifest.tables:
        table = db.tables[spec.name]
        g.node_counts[spec.name] = table.n_rows
        if spec.time_column is not None:
            g.node_time[spec.name] = list(table.columns[spec.time_column])
        else:
            g.node_time[spec.name] = [None] * table.n_rows
        g.out_adj[spec.name] = [[] for _ in range(table.n_rows)]

    # primary-key value -> row index, per table
    pk_index: dict[str, dict[str, int]] = {}
    for spec in db.manifest.tables:
        pk = spec.primary_key
        if pk is None:
            continue
        index: dict[str, int] = {}
        for i, value in enumerate(db.tables[spec.name].columns[pk]):
            if value is not None and value not in index:
                index[value] = i
        pk_index[spec.name] = index

    for spec in db.manifest.tables:
        table = db.tables[spec.name]
        for fk in spec.foreign_keys:
            etype = edge_type_name(spec.name, fk.name, fk.fk_target)
            rtype = reverse_edge_type(etype)
            g.edge_endpoints[etype] = (spec.name, fk.fk_target)
            g.edge_endpoints[rtype] = (fk.fk_target, spec.name)
            forward = g.edges.setdefault(etype, [])
            backward = g.edges.setdefault(rtype, [])
            target_index = pk_index.get(fk.fk_target, {})
            dangling = 0
            for src, value in enumerate(table.columns[fk.name]):
                if value is None:
                    continue
                dst = target_index.get(value)
                if dst is None:
                    dangling += 1
                    continue
                forward.append((src, dst))
                backward.append((dst, src))
                g.out_adj[spec.name][src].append((etype, fk.fk_target, dst))
                g.out_adj[fk.fk_target][dst].append((rtype, spec.name, src))
            g.dangling.append(DanglingReport(table=spec.name, column=fk.name, count=dangling))
    return g
