"""End-to-end node encoder: cells -> conditioning -> latent aggregation.

Column-metadata vectors are computed once per column at construction and
treated as constants; no gradient flows into the frozen text table. The
assembly order of column embeddings defaults to manifest order but is
overridable, which is how the permutation-invariance checks drive it.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .conditioning import Conditioner
from .database import RelationalDatabase
from .encoders import DEFAULT_VOCAB_SIZE, CellEncoders
from .features import TIME_FEATURE_DIM, FoneConfig
from .params import ParameterStore
from .perceiver import (
    EmptyNodeError,
    FullSelfAttentionAggregator,
    PerceiverAggregator,
    PerceiverConfig,
)
from .schema import CATEGORICAL, NUMERICAL, TEXTUAL, TIMESTAMP, SchemaManifest
from .text import TokenTable

EMPTY_NODE_POLICIES = ("error", "missing_token")
VARIANTS = ("cross", "full_sa")


class RelateEncoder:
    """Schema-agnostic encoder: one parameter set for any manifest."""

    def __init__(
        self,
        store: ParameterStore,
        manifest: SchemaManifest,
        token_table: TokenTable,
        config: PerceiverConfig = PerceiverConfig(),
        fone: FoneConfig = FoneConfig(),
        vocab_size: int = DEFAULT_VOCAB_SIZE,
        rng: np.random.Generator | None = None,
        variant: str = "cross",
        empty_node_policy: str = "error",
        exclude_columns: frozenset[tuple[str, str]] = frozenset(),
    ):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
        if empty_node_policy not in EMPTY_NODE_POLICIES:
            raise ValueError(f"empty_node_policy must be one of {EMPTY_NODE_POLICIES}, got {empty_node_policy!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.manifest = manifest
        self.config = config
        self.variant = variant
        self.empty_node_policy = empty_node_policy
        self.exclude_columns = frozenset(exclude_columns)
        raw_dims = {
            NUMERICAL: fone.dim,
            TIMESTAMP: TIME_FEATURE_DIM,
            TEXTUAL: token_table.dim,
        }
        self.conditioner = Conditioner(store, config.d, raw_dims, meta_dim=token_table.dim, rng=rng)
        self.cells = CellEncoders(store, self.conditioner, token_table, rng, fone=fone, vocab_size=vocab_size)
        if variant == "cross":
            self.aggregator = PerceiverAggregator(store, config, rng)
        else:
            self.aggregator = FullSelfAttentionAggregator(store, config, rng)
        # frozen per-column metadata vectors, keyed (table, column)
        self._meta: dict[tuple[str, str], np.ndarray] = {}
        for table in manifest.tables:
            for col in table.feature_columns:
                self._meta[(table.name, col.name)] = token_table.embed_column_metadata(
                    table.name, col.name, col.description
                )

    @property
    def output_dim(self) -> int:
        return self.config.d

    def feature_columns(self, table_name: str) -> list[str]:
        table = self.manifest.table(table_name)
        return [c.name for c in table.feature_columns if (table_name, c.name) not in self.exclude_columns]

    def encode_column(self, db: RelationalDatabase, table_name: str, column_name: str, rows: list[int]) -> Tensor:
        """Conditioned embeddings, one row per requested db row: (B, d)."""
        table = self.manifest.table(table_name)
        col = table.column(column_name)
        if col is None:
            raise ValueError(f"unknown column {table_name}.{column_name}")
        values = [db.table(table_name).columns[column_name][i] for i in rows]
        meta = self._meta[(table_name, column_name)]
        if col.modality == NUMERICAL:
            return self.cells.encode_numeric_column(values, meta)
        if col.modality == TIMESTAMP:
            return self.cells.encode_timestamp_column(values, meta)
        if col.modality == CATEGORICAL:
            return self.cells.encode_categorical_column(values, table_name, column_name)
        if col.modality == TEXTUAL:
            return self.cells.encode_text_column(values, meta)
        raise ValueError(f"column {table_name}.{column_name} has non-feature modality {col.modality!r}")

    def assemble(
        self,
        db: RelationalDatabase,
        table_name: str,
        rows: list[int],
        column_order: list[str] | None = None,
    ) -> Tensor:
        """Stack conditioned column embeddings into (B, C, d)."""
        names = column_order if column_order is not None else self.feature_columns(table_name)
        if not names:
            if self.empty_node_policy == "error":
                raise EmptyNodeError(f"table {table_name!r} has no feature columns")
            token = self.cells.missing_token("categorical")
            return ad.expand_batch(token, len(rows))
        parts = []
        for name in names:
            emb = self.encode_column(db, table_name, name, rows)
            parts.append(ad.reshape(emb, (emb.shape[0], 1, emb.shape[1])))
        return ad.concat_rows(parts)

    def encode_rows(
        self,
        db: RelationalDatabase,
        table_name: str,
        rows: list[int],
        training: bool = False,
        rng: np.random.Generator | None = None,
        column_order: list[str] | None = None,
    ) -> Tensor:
        """(B, d) node embeddings for the given rows of one table."""
        if not rows:
            raise ValueError("encode_rows needs at least one row")
        x = self.assemble(db, table_name, rows, column_order=column_order)
        return self.aggregator.encode(x, training=training, rng=rng)
