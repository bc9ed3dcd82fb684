"""Column-metadata conditioning of cell embeddings.

One parameter set serves every column of every table: per-modality shared
projections of the raw cell features, a single bias-free metadata
projection shared by the additive and gated paths, and one two-layer ReLU
MLP. Adding tables or columns to a schema must not add entries here.

Numeric and text cells: Z = raw @ W_shared + ColProj(meta), output
Z + MLP(Z). Time cells: output (raw @ W_shared) * sigmoid(ColProj(meta)).
Hashed categorical rows pass through untouched.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .params import ParameterStore

PROJECTED_MODALITIES = ("numerical", "timestamp", "textual")


class Conditioner:
    def __init__(
        self,
        store: ParameterStore,
        d: int,
        raw_dims: dict[str, int],
        meta_dim: int,
        rng: np.random.Generator,
        d_ff: int | None = None,
    ):
        missing = set(PROJECTED_MODALITIES) - set(raw_dims)
        if missing:
            raise ValueError(f"raw_dims missing modalities: {sorted(missing)}")
        self.d = d
        self.d_ff = d_ff if d_ff is not None else d
        self.raw_dims = dict(raw_dims)
        self.meta_dim = meta_dim
        self.store = store
        for modality in PROJECTED_MODALITIES:
            r = raw_dims[modality]
            store.register(f"shared.proj.{modality}", rng.standard_normal((r, d)) / np.sqrt(r))
        store.register("shared.colproj", rng.standard_normal((meta_dim, d)) / np.sqrt(meta_dim))
        store.register("shared.mlp.w1", rng.standard_normal((d, self.d_ff)) / np.sqrt(d))
        store.register("shared.mlp.b1", np.zeros(self.d_ff))
        store.register("shared.mlp.w2", rng.standard_normal((self.d_ff, d)) / np.sqrt(self.d_ff))
        store.register("shared.mlp.b2", np.zeros(d))

    def project_cells(self, raw: Tensor, modality: str) -> Tensor:
        if modality not in self.raw_dims:
            raise ValueError(f"no shared projection for modality {modality!r}")
        expected = self.raw_dims[modality]
        if raw.shape[-1] != expected:
            raise ad.ShapeError(f"{modality} raw features have width {raw.shape[-1]}, expected {expected}")
        return ad.matmul(raw, self.store[f"shared.proj.{modality}"])

    def project_meta(self, meta_vec: np.ndarray) -> Tensor:
        meta = ad.constant(np.asarray(meta_vec, dtype=np.float64).reshape(1, -1))
        if meta.shape[-1] != self.meta_dim:
            raise ad.ShapeError(f"metadata vector has width {meta.shape[-1]}, expected {self.meta_dim}")
        return ad.matmul(meta, self.store["shared.colproj"])

    def _mlp(self, z: Tensor) -> Tensor:
        h = ad.relu(ad.add(ad.matmul(z, self.store["shared.mlp.w1"]), self.store["shared.mlp.b1"]))
        return ad.add(ad.matmul(h, self.store["shared.mlp.w2"]), self.store["shared.mlp.b2"])

    def additive(self, raw, meta_vec: np.ndarray, modality: str) -> Tensor:
        """Residual-MLP conditioning for numerical and textual cells."""
        raw_t = raw if isinstance(raw, Tensor) else ad.constant(np.atleast_2d(raw))
        x = self.project_cells(raw_t, modality)
        z = ad.add(x, self.project_meta(meta_vec))
        return ad.add(z, self._mlp(z))

    def gated(self, raw, meta_vec: np.ndarray) -> Tensor:
        """Sigmoid-gate conditioning for time cells."""
        raw_t = raw if isinstance(raw, Tensor) else ad.constant(np.atleast_2d(raw))
        x = self.project_cells(raw_t, "timestamp")
        gate = ad.sigmoid(self.project_meta(meta_vec))
        return ad.elemwise_mul(x, gate)

    @staticmethod
    def hashed(cat_embedding: Tensor) -> Tensor:
        """Hashed categorical rows carry their column identity already."""
        return cat_embedding
