"""Schema-specific baseline encoder and the parameter audit.

The baseline gives every feature column its own projection over the same
raw features the shared encoder sees, concatenates in manifest order, and
runs one backbone MLP per node type. Sharing is therefore the only
difference the audit measures. Missing cells contribute a zero block.

The audit instantiates both encoders on a schema and reports trainable
counts plus the universal/standard ratio; closed-form counters document
the expected totals and the tests hold both routes equal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .database import RelationalDatabase
from .encoder import RelateEncoder
from .features import TIME_FEATURE_DIM, FoneConfig, number_features, time_features
from .params import ParameterStore
from .perceiver import PerceiverConfig
from .schema import CATEGORICAL, NUMERICAL, TEXTUAL, TIMESTAMP, SchemaError, SchemaManifest
from .text import TokenTable, fnv1a_64

DEFAULT_COLUMN_VOCAB = 64
BACKBONE_WIDTH = 128


@dataclass(frozen=True)
class StandardConfig:
    d: int = 128
    column_vocab: int = DEFAULT_COLUMN_VOCAB
    backbone_width: int = BACKBONE_WIDTH
    fone: FoneConfig = field(default_factory=FoneConfig)


class StandardEncoder:
    """One encoder per column, one backbone per node type."""

    def __init__(
        self,
        store: ParameterStore,
        manifest: SchemaManifest,
        token_table: TokenTable,
        config: StandardConfig = StandardConfig(),
        rng: np.random.Generator | None = None,
        exclude_columns: frozenset[tuple[str, str]] = frozenset(),
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.manifest = manifest
        self.config = config
        self.store = store
        self.token_table = token_table
        self.exclude_columns = frozenset(exclude_columns)
        raw_dim = {
            NUMERICAL: config.fone.dim,
            TIMESTAMP: TIME_FEATURE_DIM,
            TEXTUAL: token_table.dim,
        }
        d = config.d
        for table in manifest.tables:
            cols = self._columns(table.name)
            for col in cols:
                base = f"std.{table.name}.col.{col.name}"
                if col.modality == CATEGORICAL:
                    store.register(f"{base}.table", rng.standard_normal((config.column_vocab, d)) / np.sqrt(d))
                else:
                    r = raw_dim[col.modality]
                    store.register(f"{base}.w", rng.standard_normal((r, d)) / np.sqrt(r))
                    store.register(f"{base}.b", np.zeros(d))
            if cols:
                concat_dim = len(cols) * d
                base = f"std.{table.name}.backbone"
                w = config.backbone_width
                store.register(f"{base}.w1", rng.standard_normal((concat_dim, w)) / np.sqrt(concat_dim))
                store.register(f"{base}.b1", np.zeros(w))
                store.register(f"{base}.w2", rng.standard_normal((w, d)) / np.sqrt(w))
                store.register(f"{base}.b2", np.zeros(d))

    @property
    def output_dim(self) -> int:
        return self.config.d

    def _columns(self, table_name: str):
        table = self.manifest.table(table_name)
        return [c for c in table.feature_columns if (table_name, c.name) not in self.exclude_columns]

    def feature_columns(self, table_name: str) -> list[str]:
        return [c.name for c in self._columns(table_name)]

    def _encode_column(self, db: RelationalDatabase, table_name: str, col, rows: list[int]) -> Tensor:
        values = [db.table(table_name).columns[col.name][i] for i in rows]
        base = f"std.{table_name}.col.{col.name}"
        d = self.config.d
        if col.modality == CATEGORICAL:
            present = np.array([v is not None for v in values], dtype=np.float64).reshape(-1, 1)
            idx = [
                fnv1a_64(str(v).encode("utf-8")) % self.config.column_vocab if v is not None else 0 for v in values
            ]
            rows_t = ad.gather_rows(self.store[f"{base}.table"], idx)
            return ad.elemwise_mul(rows_t, ad.constant(present))
        if col.modality == NUMERICAL:
            arr = np.array([v if v is not None else np.nan for v in values], dtype=np.float64)
            present = np.isfinite(arr)
            raw = number_features(np.where(present, arr, 0.0), self.config.fone)
        elif col.modality == TIMESTAMP:
            present = np.array([v is not None for v in values])
            raw = time_features(np.array([v if v is not None else 0 for v in values], dtype=np.int64))
        elif col.modality == TEXTUAL:
            vecs = [self.token_table.embed_text(v) if v is not None else np.zeros(self.token_table.dim) for v in values]
            present = np.array([v is not None for v in values])
            raw = np.stack(vecs)
        else:
            raise SchemaError(f"column {table_name}.{col.name} is not a feature column")
        projected = ad.add(ad.matmul(ad.constant(raw), self.store[f"{base}.w"]), self.store[f"{base}.b"])
        mask = ad.constant(present.astype(np.float64).reshape(-1, 1))
        return ad.elemwise_mul(projected, mask)

    def encode_rows(
        self,
        db: RelationalDatabase,
        table_name: str,
        rows: list[int],
        training: bool = False,
        rng: np.random.Generator | None = None,
        column_order: list[str] | None = None,
    ) -> Tensor:
        self.manifest.table(table_name)  # raises SchemaError for unknown node types
        cols = self._columns(table_name)
        if not cols:
            raise SchemaError(f"table {table_name!r} has no feature columns for the standard encoder")
        by_name = {c.name: c for c in cols}
        order = column_order if column_order is not None else [c.name for c in cols]
        parts = [self._encode_column(db, table_name, by_name[name], rows) for name in order]
        concat = ad.concat_cols(parts)
        base = f"std.{table_name}.backbone"
        h = ad.relu(ad.add(ad.matmul(concat, self.store[f"{base}.w1"]), self.store[f"{base}.b1"]))
        return ad.add(ad.matmul(h, self.store[f"{base}.w2"]), self.store[f"{base}.b2"])


# ---------------------------------------------------------------------------
# parameter audit


@dataclass
class ParamAuditReport:
    schema_name: str
    n_tables: int
    n_feature_columns: int
    standard_total: int
    universal_total: int
    breakdown_standard: dict[str, int]
    breakdown_universal: dict[str, int]

    @property
    def ratio_pct(self) -> float:
        return 100.0 * self.universal_total / self.standard_total if self.standard_total else float("inf")

    def to_dict(self) -> dict:
        return {
            "schema": self.schema_name,
            "tables": self.n_tables,
            "feature_columns": self.n_feature_columns,
            "standard_params": self.standard_total,
            "universal_params": self.universal_total,
            "universal_over_standard_pct": self.ratio_pct,
            "breakdown": {"standard": self.breakdown_standard, "universal": self.breakdown_universal},
        }


def _group_counts(store: ParameterStore, depth: int = 2) -> dict[str, int]:
    groups: dict[str, int] = {}
    for name, tensor in store.trainable_items():
        key = ".".join(name.split(".")[:depth])
        groups[key] = groups.get(key, 0) + tensor.size
    return dict(sorted(groups.items()))


def audit_parameters(
    manifest: SchemaManifest,
    token_table: TokenTable,
    relate_config: PerceiverConfig = PerceiverConfig(),
    standard_config: StandardConfig | None = None,
    fone: FoneConfig = FoneConfig(),
    vocab_size: int = 65536,
    schema_name: str = "schema",
) -> ParamAuditReport:
    """Instantiate both encoders for the schema and count trainable scalars."""
    standard_config = standard_config or StandardConfig(d=relate_config.d, fone=fone)
    rng = np.random.default_rng(0)
    universal_store = ParameterStore()
    RelateEncoder(universal_store, manifest, token_table, config=relate_config, fone=fone, vocab_size=vocab_size, rng=rng)
    standard_store = ParameterStore()
    StandardEncoder(standard_store, manifest, token_table, config=standard_config, rng=np.random.default_rng(0))
    n_feature_columns = sum(len(t.feature_columns) for t in manifest.tables)
    return ParamAuditReport(
        schema_name=schema_name,
        n_tables=len(manifest.tables),
        n_feature_columns=n_feature_columns,
        standard_total=standard_store.total_count(),
        universal_total=universal_store.total_count(),
        breakdown_standard=_group_counts(standard_store),
        breakdown_universal=_group_counts(universal_store),
    )


def relate_count_formula(
    config: PerceiverConfig,
    fone: FoneConfig,
    text_dim: int,
    vocab_size: int,
) -> int:
    """Closed-form trainable count of the shared encoder (schema-free)."""
    d = config.d
    conditioning = (fone.dim + TIME_FEATURE_DIM + text_dim) * d  # per-modality W_shared
    conditioning += text_dim * d  # metadata projection
    conditioning += d * d + d + d * d + d  # two-layer MLP
    cells = vocab_size * d + 4 * d  # shared vocab + missing tokens
    latents = config.latents * d
    attention = config.layers * 8 * d * d  # cross + self, each wq/wk/wv/wo
    return conditioning + cells + latents + attention


def standard_count_formula(manifest: SchemaManifest, config: StandardConfig, text_dim: int) -> int:
    """Closed-form trainable count of the per-column/per-type baseline."""
    d = config.d
    raw = {NUMERICAL: config.fone.dim, TIMESTAMP: TIME_FEATURE_DIM, TEXTUAL: text_dim}
    total = 0
    for table in manifest.tables:
        cols = table.feature_columns
        for col in cols:
            if col.modality == CATEGORICAL:
                total += config.column_vocab * d
            else:
                total += raw[col.modality] * d + d
        if cols:
            total += len(cols) * d * config.backbone_width + config.backbone_width
            total += config.backbone_width * d + d
    return total


def format_report_table(reports: list[ParamAuditReport]) -> str:
    """Aligned text table: schema, sizes, both counts, and the ratio."""
    headers = ["Schema", "#Tables", "#Features", "Std. Encoder (#params)", "Universal (#params)", "Universal / Std (%)"]
    rows = [
        [
            r.schema_name,
            str(r.n_tables),
            str(r.n_feature_columns),
            str(r.standard_total),
            str(r.universal_total),
            f"{r.ratio_pct:.2f}",
        ]
        for r in reports
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)


def report_to_json(reports: list[ParamAuditReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)
