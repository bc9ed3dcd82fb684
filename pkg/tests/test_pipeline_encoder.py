"""RelateEncoder end to end over a real database."""

import numpy as np
import pytest

from relate.encoder import RelateEncoder
from relate.params import ParameterStore
from relate.perceiver import EmptyNodeError, PerceiverConfig
from relate.schema import ColumnSpec, SchemaManifest, TableSpec
from relate.synth import SyntheticDbSpec, generate_synthetic_db

from conftest import SMALL_PERCEIVER


def build_encoder(db, token_table, seed=0, **kw):
    store = ParameterStore()
    enc = RelateEncoder(
        store,
        db.manifest,
        token_table,
        config=kw.pop("config", SMALL_PERCEIVER),
        vocab_size=kw.pop("vocab_size", 128),
        rng=np.random.default_rng(seed),
        **kw,
    )
    return store, enc


class TestEncodeRows:
    def test_shapes_per_table(self, small_db_task, tiny_token_table):
        db, _ = small_db_task
        _, enc = build_encoder(db, tiny_token_table)
        for table, n in (("users", 3), ("products", 2), ("orders", 4)):
            out = enc.encode_rows(db, table, list(range(n)))
            assert out.shape == (n, 16)
            assert np.all(np.isfinite(out.data))

    def test_deterministic(self, small_db_task, tiny_token_table):
        db, _ = small_db_task
        _, enc = build_encoder(db, tiny_token_table)
        a = enc.encode_rows(db, "users", [0, 1, 2]).data
        b = enc.encode_rows(db, "users", [0, 1, 2]).data
        assert np.array_equal(a, b)

    def test_column_permutation_leaves_embeddings_stable(self, small_db_task, tiny_token_table):
        db, _ = small_db_task
        _, enc = build_encoder(db, tiny_token_table)
        rng = np.random.default_rng(0)
        names = enc.feature_columns("users")
        base = enc.encode_rows(db, "users", [0, 1, 2, 3]).data
        for _ in range(5):
            order = [names[i] for i in rng.permutation(len(names))]
            permuted = enc.encode_rows(db, "users", [0, 1, 2, 3], column_order=order).data
            assert np.max(np.abs(permuted - base)) <= 1e-9

    def test_exclude_columns(self, small_db_task, tiny_token_table):
        db, _ = small_db_task
        _, enc = build_encoder(db, tiny_token_table, exclude_columns=frozenset({("users", "label")}))
        assert "label" not in enc.feature_columns("users")
        out = enc.encode_rows(db, "users", [0])
        assert out.shape == (1, 16)

    def test_schema_growth_adds_no_parameters(self, tiny_token_table):
        small = generate_synthetic_db(SyntheticDbSpec(seed=1, n_users=5, n_products=3))[0]
        store_a, _ = build_encoder(small, tiny_token_table, seed=5)
        wide_manifest = SchemaManifest(
            tables=small.manifest.tables
            + (
                TableSpec(
                    "extra",
                    (
                        ColumnSpec("id", "primary_key"),
                        ColumnSpec("x1", "numerical"),
                        ColumnSpec("x2", "categorical"),
                        ColumnSpec("x3", "textual"),
                        ColumnSpec("x4", "timestamp"),
                    ),
                ),
            )
        )
        store_b = ParameterStore()
        RelateEncoder(
            store_b,
            wide_manifest,
            tiny_token_table,
            config=SMALL_PERCEIVER,
            vocab_size=128,
            rng=np.random.default_rng(5),
        )
        assert store_a.names() == store_b.names()
        assert store_a.total_count() == store_b.total_count()

    def test_full_sa_variant_runs(self, small_db_task, tiny_token_table):
        db, _ = small_db_task
        _, enc = build_encoder(db, tiny_token_table, variant="full_sa")
        out = enc.encode_rows(db, "users", [0, 1])
        assert out.shape == (2, 16)


class TestEmptyNodePolicy:
    def _key_only_db(self):
        manifest = SchemaManifest(
            tables=(
                TableSpec("things", (ColumnSpec("id", "primary_key"), ColumnSpec("v", "numerical"))),
                TableSpec(
                    "links",
                    (ColumnSpec("id", "primary_key"), ColumnSpec("thing_id", "foreign_key", fk_target="things")),
                ),
            )
        )
        from relate.database import RelationalDatabase, Table

        tables = {
            "things": Table(manifest.tables[0], {"id": ["t1"], "v": [1.0]}, 1),
            "links": Table(manifest.tables[1], {"id": ["l1"], "thing_id": ["t1"]}, 1),
        }
        return RelationalDatabase(manifest, tables)

    def test_error_policy(self, tiny_token_table):
        db = self._key_only_db()
        _, enc = build_encoder(db, tiny_token_table)
        with pytest.raises(EmptyNodeError):
            enc.encode_rows(db, "links", [0])

    def test_missing_token_policy(self, tiny_token_table):
        db = self._key_only_db()
        _, enc = build_encoder(db, tiny_token_table, empty_node_policy="missing_token")
        out = enc.encode_rows(db, "links", [0])
        assert out.shape == (1, 16)
        assert np.all(np.isfinite(out.data))


class TestMissingFuzz:
    def test_heavy_missing_rows_stay_finite(self, tiny_token_table):
        spec = SyntheticDbSpec(seed=9, n_users=60, n_products=10, missing_rate=0.5)
        db, _ = generate_synthetic_db(spec)
        _, enc = build_encoder(db, tiny_token_table)
        for table in ("users", "products", "orders"):
            n = db.table(table).n_rows
            out = enc.encode_rows(db, table, list(range(n))).data
            assert np.isnan(out).sum() == 0
            assert np.all(np.isfinite(out))
