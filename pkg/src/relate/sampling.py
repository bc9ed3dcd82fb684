"""Temporal neighbor sampling around a seed node.

Breadth-limited expansion over the typed adjacency: an edge is admissible
only when both endpoint timestamps (where present) are at or before the
seed time, and each node keeps at most neighbor_cap neighbors, chosen
uniformly without replacement. Recorded message edges point from the
discovered neighbor back toward the expanding node, so message passing
flows inward to the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import HeteroTemporalGraph, reverse_edge_type

NodeRef = tuple[str, int]


@dataclass
class Subgraph:
    seed: NodeRef
    seed_time: int | None
    nodes: list[NodeRef] = field(default_factory=list)
    # (edge type, src node, dst node) with messages flowing src -> dst
    message_edges: list[tuple[str, NodeRef, NodeRef]] = field(default_factory=list)


def _admissible(graph: HeteroTemporalGraph, node: NodeRef, seed_time) -> bool:
    if seed_time is None:
        return True
    t = graph.time_of(*node)
    return t is None or t <= seed_time


def sample_subgraph(
    graph: HeteroTemporalGraph,
    seed: NodeRef,
    seed_time: int | None,
    config,
    rng: np.random.Generator,
) -> Subgraph:
    """config needs .layers (hop count) and .neighbor_cap."""
    sg = Subgraph(seed=seed, seed_time=seed_time, nodes=[seed])
    visited = {seed}
    edge_seen: set[tuple[str, NodeRef, NodeRef]] = set()
    frontier = [seed]
    for _ in range(config.layers):
        next_frontier: list[NodeRef] = []
        for node in frontier:
            ntype, idx = node
            if not _admissible(graph, node, seed_time):
                continue
            candidates = [
                (etype, (dst_type, dst_idx))
                for etype, dst_type, dst_idx in graph.out_adj[ntype][idx]
                if _admissible(graph, (dst_type, dst_idx), seed_time)
            ]
            if len(candidates) > config.neighbor_cap:
                chosen = rng.choice(len(candidates), size=config.neighbor_cap, replace=False)
                candidates = [candidates[i] for i in sorted(chosen)]
            for etype, neighbor in candidates:
                edge = (reverse_edge_type(etype), neighbor, node)
                if edge not in edge_seen:
                    edge_seen.add(edge)
                    sg.message_edges.append(edge)
                if neighbor not in visited:
                    visited.add(neighbor)
                    sg.nodes.append(neighbor)
                    next_frontier.append(neighbor)
        frontier = next_frontier
    return sg


def assert_temporal_safety(subgraphs: list[Subgraph], graph: HeteroTemporalGraph) -> None:
    """Every sampled edge must respect its subgraph's seed-time cutoff."""
    for sg in subgraphs:
        if sg.seed_time is None:
            continue
        for _, src, dst in sg.message_edges:
            for node in (src, dst):
                t = graph.time_of(*node)
                if t is not None and t > sg.seed_time:
                    raise AssertionError(
                        f"temporal safety violation: node {node} at time {t} sampled for seed time {sg.seed_time}"
                    )
