"""Temporal neighbor sampling and the typed mean-aggregation head."""

import numpy as np
import pytest

from relate import autodiff as ad
from relate.gnn import GnnConfig, TypedMeanGnn, build_batch, gnn_forward
from relate.graph import build_graph
from relate.params import ParameterStore
from relate.sampling import Subgraph, assert_temporal_safety, sample_subgraph
from relate.synth import SyntheticDbSpec, generate_synthetic_db


@pytest.fixture(scope="module")
def demo_graph():
    db, _ = generate_synthetic_db(SyntheticDbSpec(seed=31, n_users=20, n_products=4))
    return db, build_graph(db)


class TestSampling:
    def test_future_neighbors_excluded_entirely(self, demo_graph):
        db, graph = demo_graph
        # seed time before every order timestamp: the user stays alone
        earliest = min(t for t in graph.node_time["orders"] if t is not None)
        sg = sample_subgraph(graph, ("users", 0), earliest - 1, GnnConfig(channels=8), np.random.default_rng(0))
        assert sg.nodes == [("users", 0)]
        assert sg.message_edges == []

    def test_under_cap_keeps_all_neighbors(self, demo_graph):
        db, graph = demo_graph
        cfg = GnnConfig(channels=8, neighbor_cap=128)
        sg = sample_subgraph(graph, ("users", 0), None, cfg, np.random.default_rng(0))
        expected_orders = sum(1 for uid in db.table("orders").columns["user_id"] if uid == "u0000")
        got_orders = {n for n in sg.nodes if n[0] == "orders"}
        assert len(got_orders) == expected_orders

    def test_two_hops_reach_products(self, demo_graph):
        _, graph = demo_graph
        sg = sample_subgraph(graph, ("users", 0), None, GnnConfig(channels=8), np.random.default_rng(0))
        assert any(n[0] == "products" for n in sg.nodes)

    def test_cap_enforced_and_uniform(self):
        """Fan-out 40, cap 8: inclusion frequencies stay inside 3-sigma binomial bounds."""
        from relate.database import RelationalDatabase, Table
        from relate.schema import ColumnSpec, SchemaManifest, TableSpec

        n_children = 40
        manifest = SchemaManifest(
            tables=(
                TableSpec("parent", (ColumnSpec("id", "primary_key"), ColumnSpec("v", "numerical"))),
                TableSpec(
                    "child",
                    (ColumnSpec("id", "primary_key"), ColumnSpec("parent_id", "foreign_key", fk_target="parent")),
                ),
            )
        )
        tables = {
            "parent": Table(manifest.tables[0], {"id": ["p"], "v": [1.0]}, 1),
            "child": Table(
                manifest.tables[1],
                {"id": [f"c{i}" for i in range(n_children)], "parent_id": ["p"] * n_children},
                n_children,
            ),
        }
        graph = build_graph(RelationalDatabase(manifest, tables))
        cfg = GnnConfig(layers=1, channels=8, neighbor_cap=8)
        rng = np.random.default_rng(123)
        trials = 4000
        hits = np.zeros(n_children)
        for _ in range(trials):
            sg = sample_subgraph(graph, ("parent", 0), None, cfg, rng)
            for ntype, idx in sg.nodes:
                if ntype == "child":
                    hits[idx] += 1
            assert sum(1 for n in sg.nodes if n[0] == "child") == 8
        p = 8 / n_children
        sigma = np.sqrt(trials * p * (1 - p))
        assert np.all(np.abs(hits - trials * p) <= 3 * sigma)

    def test_temporal_safety_assertion_fires(self, demo_graph):
        _, graph = demo_graph
        latest = max(t for t in graph.node_time["orders"] if t is not None)
        order_idx = graph.node_time["orders"].index(latest)
        bad = Subgraph(
            seed=("users", 0),
            seed_time=latest - 1,
            nodes=[("users", 0), ("orders", order_idx)],
            message_edges=[("orders.user_id→users", ("orders", order_idx), ("users", 0))],
        )
        with pytest.raises(AssertionError, match="temporal"):
            assert_temporal_safety([bad], graph)

    def test_deterministic_given_rng(self, demo_graph):
        _, graph = demo_graph
        cfg = GnnConfig(channels=8, neighbor_cap=2)
        a = sample_subgraph(graph, ("users", 3), None, cfg, np.random.default_rng(5))
        b = sample_subgraph(graph, ("users", 3), None, cfg, np.random.default_rng(5))
        assert a.nodes == b.nodes and a.message_edges == b.message_edges


class TestGnn:
    def _gnn(self, in_dim=4, channels=4, layers=2, seed=0):
        store = ParameterStore()
        gnn = TypedMeanGnn(store, in_dim, GnnConfig(layers=layers, channels=channels, neighbor_cap=8), np.random.default_rng(seed))
        return store, gnn

    def test_isolated_seed_uses_own_embedding_only(self):
        store, gnn = self._gnn()
        sg = Subgraph(seed=("t", 0), seed_time=None, nodes=[("t", 0)], message_edges=[])
        emb = {("t", 0): np.array([1.0, 2.0, 3.0, 4.0])}
        out = gnn_forward(gnn, sg, emb)
        h = emb[("t", 0)] @ store["gnn.input.w"].data + store["gnn.input.b"].data
        for layer in range(2):
            w, b = store[f"gnn.layer{layer}.w"].data, store[f"gnn.layer{layer}.b"].data
            h = h + np.maximum(h @ w + b, 0.0)
        np.testing.assert_allclose(out, h, atol=1e-12)

    def test_mean_aggregation_idempotent_on_identical_neighbors(self):
        _, gnn = self._gnn()
        base_nodes = [("t", 0), ("s", 0)]
        one = Subgraph(
            seed=("t", 0),
            seed_time=None,
            nodes=base_nodes,
            message_edges=[("e", ("s", 0), ("t", 0))],
        )
        two = Subgraph(
            seed=("t", 0),
            seed_time=None,
            nodes=[("t", 0), ("s", 0), ("s", 1)],
            message_edges=[("e", ("s", 0), ("t", 0)), ("e", ("s", 1), ("t", 0))],
        )
        v = np.array([0.5, -1.0, 2.0, 0.0])
        emb_one = {("t", 0): np.ones(4), ("s", 0): v}
        emb_two = {("t", 0): np.ones(4), ("s", 0): v, ("s", 1): v.copy()}
        np.testing.assert_allclose(gnn_forward(gnn, one, emb_one), gnn_forward(gnn, two, emb_two), atol=1e-12)

    def test_three_node_path_matches_explicit_arithmetic(self):
        """a -> b -> seed with hand-set weights, worked through by hand."""
        store, gnn = self._gnn(in_dim=2, channels=2, layers=2)
        store["gnn.input.w"].data[...] = np.eye(2)
        store["gnn.input.b"].data[...] = 0.0
        for layer in range(2):
            store[f"gnn.layer{layer}.w"].data[...] = np.array([[1.0, 0.0], [0.0, -1.0]])
            store[f"gnn.layer{layer}.b"].data[...] = np.array([0.1, 0.2])
        sg = Subgraph(
            seed=("t", 0),
            seed_time=None,
            nodes=[("t", 0), ("m", 0), ("s", 0)],
            message_edges=[("e2", ("s", 0), ("m", 0)), ("e1", ("m", 0), ("t", 0))],
        )
        emb = {("t", 0): np.array([1.0, 1.0]), ("m", 0): np.array([2.0, 0.0]), ("s", 0): np.array([0.0, 3.0])}
        w = np.array([[1.0, 0.0], [0.0, -1.0]])
        b = np.array([0.1, 0.2])
        h = {k: v.copy() for k, v in emb.items()}
        for _ in range(2):
            msg = {("t", 0): h[("m", 0)], ("m", 0): h[("s", 0)], ("s", 0): np.zeros(2)}
            h = {k: h[k] + np.maximum((h[k] + msg[k]) @ w + b, 0.0) for k in h}
        out = gnn_forward(gnn, sg, emb)
        np.testing.assert_allclose(out, h[("t", 0)], atol=1e-12)

    def test_batched_union_equals_per_subgraph(self, demo_graph):
        db, graph = demo_graph
        store, gnn = self._gnn(in_dim=3, channels=5, seed=2)
        rng = np.random.default_rng(0)
        emb = {
            (t, i): rng.standard_normal(3)
            for t, count in graph.node_counts.items()
            for i in range(count)
        }
        cfg = GnnConfig(channels=5, neighbor_cap=128)
        subgraphs = [sample_subgraph(graph, ("users", u), None, cfg, np.random.default_rng(u)) for u in range(6)]
        batch = build_batch(subgraphs)
        encoded = {
            t: ad.constant(np.stack([emb[(t, i)] for i in rows])) for t, rows in batch.distinct_rows.items()
        }
        batched = gnn.forward(batch, encoded).data
        for j, sg in enumerate(subgraphs):
            single = gnn_forward(gnn, sg, emb)
            np.testing.assert_allclose(batched[j], single, atol=1e-12)

    def test_gradients_flow_to_gnn_weights(self):
        store, gnn = self._gnn()
        sg = Subgraph(
            seed=("t", 0),
            seed_time=None,
            nodes=[("t", 0), ("s", 0)],
            message_edges=[("e", ("s", 0), ("t", 0))],
        )
        batch = build_batch([sg])
        encoded = {
            "t": ad.constant(np.ones((1, 4))),
            "s": ad.constant(np.full((1, 4), 0.5)),
        }
        out = gnn.forward(batch, encoded)
        ad.backward(ad.sum_all(out))
        assert np.any(store["gnn.input.w"].grad != 0)
        assert np.any(store["gnn.layer0.w"].grad != 0)
