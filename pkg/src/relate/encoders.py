"""Shared per-modality cell encoders.

Every column of a given modality flows through the same parameters, so
the ParameterStore gains no entries when a schema adds columns. Hashed
categoricals index one shared vocabulary; the hash covers the fully
qualified column name plus the value, which separates identical values
appearing under different columns. Missing cells of any modality resolve
to one learnable token per modality and bypass projection entirely.
"""

from __future__ import annotations

import logging

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .conditioning import Conditioner
from .features import FoneConfig, number_features, time_features
from .params import ParameterStore
from .text import TokenTable, fnv1a_64

logger = logging.getLogger(__name__)

DEFAULT_VOCAB_SIZE = 65536
MODALITY_TOKENS = ("numerical", "timestamp", "categorical", "textual")


def hash_index(table: str, column: str, value: str, vocab_size: int) -> int:
    """Shared-vocabulary index for one categorical cell.

    FNV-1a over "<table>.<column>" ++ 0x00 ++ value bytes, mod vocab size;
    the qualifier realizes per-column conditioning of the hash.
    """
    data = f"{table}.{column}".encode("utf-8") + b"\x00" + value.encode("utf-8")
    return fnv1a_64(data) % vocab_size


class CellEncoders:
    def __init__(
        self,
        store: ParameterStore,
        conditioner: Conditioner,
        token_table: TokenTable,
        rng: np.random.Generator,
        fone: FoneConfig = FoneConfig(),
        vocab_size: int = DEFAULT_VOCAB_SIZE,
    ):
        if vocab_size <= 0:
            raise ValueError(f"vocab_size must be positive, got {vocab_size}")
        d = conditioner.d
        self.d = d
        self.fone = fone
        self.vocab_size = vocab_size
        self.store = store
        self.conditioner = conditioner
        self.token_table = token_table
        store.register("vocab.table", rng.standard_normal((vocab_size, d)) / np.sqrt(d))
        for modality in MODALITY_TOKENS:
            store.register(f"missing.{modality}", rng.standard_normal((1, d)) / np.sqrt(d))

    def missing_token(self, modality: str) -> Tensor:
        return self.store[f"missing.{modality}"]

    # ------------------------------------------------------------------
    # single-cell encoders (projection only, no metadata conditioning)

    def encode_number(self, x) -> Tensor:
        """FoNE features projected to d; Missing or NaN hits the missing token."""
        if x is None or not np.isfinite(x):
            if x is not None and np.isinf(x):
                logger.warning("encode_number: infinite value treated as Missing")
            return self.missing_token("numerical")
        raw = number_features([float(x)], self.fone)
        return self.conditioner.project_cells(ad.constant(raw), "numerical")

    def encode_timestamp(self, t) -> Tensor:
        if t is None:
            return self.missing_token("timestamp")
        raw = time_features([int(t)])
        return self.conditioner.project_cells(ad.constant(raw), "timestamp")

    def encode_categorical(self, value, table: str, column: str) -> Tensor:
        if value is None:
            return self.missing_token("categorical")
        idx = hash_index(table, column, str(value), self.vocab_size)
        return ad.gather_rows(self.store["vocab.table"], [idx])

    def encode_text_cell(self, text) -> Tensor:
        if text is None:
            return self.missing_token("textual")
        raw = self.token_table.embed_text(text)
        if not np.any(raw):
            # nothing tokenized or resolved: same as a missing cell
            return self.missing_token("textual")
        return self.conditioner.project_cells(ad.constant(raw.reshape(1, -1)), "textual")

    # ------------------------------------------------------------------
    # batched, metadata-conditioned column encoders (the pipeline path)

    def _blend_missing(self, conditioned: Tensor, present: np.ndarray, modality: str) -> Tensor:
        """Rows flagged missing are replaced by the modality's learnable token."""
        if present.all():
            return conditioned
        mask = ad.constant(present.astype(np.float64).reshape(-1, 1))
        inv = ad.constant((1.0 - present).astype(np.float64).reshape(-1, 1))
        kept = ad.elemwise_mul(conditioned, mask)
        filled = ad.elemwise_mul(self.missing_token(modality), inv)
        return ad.add(kept, filled)

    def encode_numeric_column(self, values: list, meta_vec: np.ndarray) -> Tensor:
        arr = np.array([v if v is not None else np.nan for v in values], dtype=np.float64)
        present = np.isfinite(arr)
        n_inf = int(np.isinf(arr).sum())
        if n_inf:
            logger.warning("numeric column: %d infinite cells treated as Missing", n_inf)
        raw = number_features(np.where(present, arr, 0.0), self.fone)
        conditioned = self.conditioner.additive(raw, meta_vec, "numerical")
        return self._blend_missing(conditioned, present, "numerical")

    def encode_timestamp_column(self, values: list, meta_vec: np.ndarray) -> Tensor:
        present = np.array([v is not None for v in values])
        filled = np.array([v if v is not None else 0 for v in values], dtype=np.int64)
        raw = time_features(filled)
        conditioned = self.conditioner.gated(raw, meta_vec)
        return self._blend_missing(conditioned, present, "timestamp")

    def encode_categorical_column(self, values: list, table: str, column: str) -> Tensor:
        present = np.array([v is not None for v in values])
        idx = [hash_index(table, column, str(v), self.vocab_size) if v is not None else 0 for v in values]
        rows = ad.gather_rows(self.store["vocab.table"], idx)
        return self._blend_missing(self.conditioner.hashed(rows), present, "categorical")

    def encode_text_column(self, values: list, meta_vec: np.ndarray) -> Tensor:
        raws = []
        present = np.empty(len(values), dtype=bool)
        for i, v in enumerate(values):
            vec = self.token_table.embed_text(v) if v is not None else np.zeros(self.token_table.dim)
            present[i] = v is not None and bool(np.any(vec))
            raws.append(vec)
        conditioned = self.conditioner.additive(np.stack(raws), meta_vec, "textual")
        return self._blend_missing(conditioned, present, "textual")
