"""Minimal typed message-passing head over sampled subgraphs.

Per layer and node: messages are the per-edge-type mean of incoming
neighbor states, summed across edge types, then
h <- h + relu((h + msg) @ W + b) with weights shared across node types.
Batches of subgraphs run as one disjoint union: a database node appearing
in several subgraphs occupies one instance row per subgraph, so no
information leaks between seeds with different time cutoffs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .params import ParameterStore
from .sampling import NodeRef, Subgraph


@dataclass(frozen=True)
class GnnConfig:
    layers: int = 2
    channels: int = 128
    neighbor_cap: int = 128

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        if self.channels < 1 or self.neighbor_cap < 1:
            raise ValueError("channels and neighbor_cap must be >= 1")


@dataclass
class GnnBatch:
    """Disjoint union of subgraphs, flattened to per-type instance rows."""

    # per node type: distinct database rows to encode, in first-seen order
    distinct_rows: dict[str, list[int]] = field(default_factory=dict)
    # per node type: for each instance row, its index into distinct_rows
    gather_index: dict[str, list[int]] = field(default_factory=dict)
    # per edge type: (src_type, dst_type, mean matrix over instance rows)
    mean_mats: dict[str, tuple[str, str, np.ndarray]] = field(default_factory=dict)
    # (target type, instance row) of every seed, in subgraph order
    seed_rows: list[tuple[str, int]] = field(default_factory=list)

    def n_instances(self, node_type: str) -> int:
        return len(self.gather_index.get(node_type, []))


def build_batch(subgraphs: list[Subgraph]) -> GnnBatch:
    batch = GnnBatch()
    distinct_pos: dict[str, dict[int, int]] = {}
    instance_pos: dict[tuple[int, str, int], int] = {}

    for sg_id, sg in enumerate(subgraphs):
        for ntype, idx in sg.nodes:
            pos_map = distinct_pos.setdefault(ntype, {})
            if idx not in pos_map:
                pos_map[idx] = len(pos_map)
                batch.distinct_rows.setdefault(ntype, []).append(idx)
            rows = batch.gather_index.setdefault(ntype, [])
            instance_pos[(sg_id, ntype, idx)] = len(rows)
            rows.append(pos_map[idx])

    # incoming edges per (etype, dst instance), for mean normalization
    groups: dict[str, dict[int, list[int]]] = {}
    endpoints: dict[str, tuple[str, str]] = {}
    for sg_id, sg in enumerate(subgraphs):
        for etype, (st, si), (dt, di) in sg.message_edges:
            endpoints[etype] = (st, dt)
            src_row = instance_pos[(sg_id, st, si)]
            dst_row = instance_pos[(sg_id, dt, di)]
            groups.setdefault(etype, {}).setdefault(dst_row, []).append(src_row)

    for etype, by_dst in groups.items():
        st, dt = endpoints[etype]
        mat = np.zeros((batch.n_instances(dt), batch.n_instances(st)))
        for dst_row, src_rows in by_dst.items():
            w = 1.0 / len(src_rows)
            for src_row in src_rows:
                mat[dst_row, src_row] += w
        batch.mean_mats[etype] = (st, dt, mat)

    for sg_id, sg in enumerate(subgraphs):
        ntype, idx = sg.seed
        batch.seed_rows.append((ntype, instance_pos[(sg_id, ntype, idx)]))
    return batch


class TypedMeanGnn:
    def __init__(self, store: ParameterStore, in_dim: int, config: GnnConfig, rng: np.random.Generator):
        self.config = config
        self.store = store
        ch = config.channels
        store.register("gnn.input.w", rng.standard_normal((in_dim, ch)) / np.sqrt(in_dim))
        store.register("gnn.input.b", np.zeros(ch))
        for layer in range(config.layers):
            store.register(f"gnn.layer{layer}.w", rng.standard_normal((ch, ch)) / np.sqrt(ch))
            store.register(f"gnn.layer{layer}.b", np.zeros(ch))

    def forward(self, batch: GnnBatch, encoded: dict[str, Tensor]) -> Tensor:
        """encoded[type] holds (len(distinct_rows[type]), in_dim); returns (B, channels)."""
        h: dict[str, Tensor] = {}
        for ntype, gather_idx in batch.gather_index.items():
            rows = ad.gather_rows(encoded[ntype], gather_idx)
            h[ntype] = ad.add(ad.matmul(rows, self.store["gnn.input.w"]), self.store["gnn.input.b"])
        for layer in range(self.config.layers):
            w = self.store[f"gnn.layer{layer}.w"]
            b = self.store[f"gnn.layer{layer}.b"]
            msgs: dict[str, Tensor] = {}
            for etype, (st, dt, mat) in batch.mean_mats.items():
                m = ad.matmul(ad.constant(mat), h[st])
                msgs[dt] = ad.add(msgs[dt], m) if dt in msgs else m
            new_h: dict[str, Tensor] = {}
            for ntype, state in h.items():
                u = ad.add(state, msgs[ntype]) if ntype in msgs else state
                new_h[ntype] = ad.add(state, ad.relu(ad.add(ad.matmul(u, w), b)))
            h = new_h
        # one output row per seed, in subgraph order
        by_type: dict[str, list[int]] = {}
        for ntype, row in batch.seed_rows:
            by_type.setdefault(ntype, []).append(row)
        if len(by_type) == 1:
            ((ntype, rows),) = by_type.items()
            return ad.gather_rows(h[ntype], rows)
        parts = []
        for ntype, row in batch.seed_rows:
            parts.append(ad.gather_rows(h[ntype], [row]))
        return ad.concat_rows(parts)


def gnn_forward(gnn: TypedMeanGnn, subgraph: Subgraph, node_embeddings: dict[NodeRef, np.ndarray]) -> np.ndarray:
    """Single-subgraph convenience wrapper over the batched forward."""
    batch = build_batch([subgraph])
    encoded = {}
    for ntype, rows in batch.distinct_rows.items():
        encoded[ntype] = ad.constant(np.stack([np.asarray(node_embeddings[(ntype, i)], dtype=np.float64) for i in rows]))
    out = gnn.forward(batch, encoded)
    return out.data[0]
