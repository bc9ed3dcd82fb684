"""Latent cross-attention aggregation of variable-length column sets.

A fixed set of learnable latent tokens queries the node's column
embeddings, then self-attends; both carry residual connections and no
normalization. Because each latent attends over the column set through a
row-symmetric softmax, the pooled output is invariant to column order.
Cost per node scales with latents * columns instead of columns squared;
the full self-attention variant exists for the ablation harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .params import ParameterStore

POOLING_MODES = ("mean", "first")


class EmptyNodeError(ValueError):
    """A node with zero feature columns reached the aggregator."""


@dataclass(frozen=True)
class PerceiverConfig:
    d: int = 128
    latents: int = 8
    heads: int = 4
    layers: int = 4
    dropout: float = 0.2
    pooling: str = "mean"
    # one initial cross-attention followed by layers of self-attention,
    # instead of interleaving cross+self per layer
    single_cross: bool = False

    def __post_init__(self):
        if self.d % self.heads != 0:
            raise ValueError(f"d={self.d} not divisible by heads={self.heads}")
        if self.latents < 1 or self.layers < 1:
            raise ValueError("latents and layers must be >= 1")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}")

    @property
    def head_dim(self) -> int:
        return self.d // self.heads


class ScoreCounter:
    """Counts attention-score entries computed against input tokens."""

    def __init__(self):
        self.entries = 0

    def add(self, n: int) -> None:
        self.entries += n

    def reset(self) -> None:
        self.entries = 0


def _multihead(
    queries: Tensor,
    keys_values: Tensor,
    w_q: Tensor,
    w_k: Tensor,
    w_v: Tensor,
    w_o: Tensor,
    heads: int,
    dropout_p: float,
    training: bool,
    rng: np.random.Generator | None,
) -> Tensor:
    """Scaled dot-product attention, heads recombined through w_o.

    Head loop keeps every intermediate at rank <= 3 even for batched input.
    Dropout, when training, acts on the attention probabilities.
    """
    d = w_q.shape[-1]
    dk = d // heads
    inv_sqrt_dk = 1.0 / np.sqrt(dk)
    q = ad.matmul(queries, w_q)
    k = ad.matmul(keys_values, w_k)
    v = ad.matmul(keys_values, w_v)
    contexts = []
    for h in range(heads):
        lo, hi = h * dk, (h + 1) * dk
        q_h = ad.slice_cols(q, lo, hi)
        k_h = ad.slice_cols(k, lo, hi)
        v_h = ad.slice_cols(v, lo, hi)
        scores = ad.scale(ad.matmul(q_h, ad.transpose_last2(k_h)), inv_sqrt_dk)
        probs = ad.softmax_rows(scores)
        if training and dropout_p > 0.0:
            probs = ad.dropout(probs, dropout_p, training, rng)
        contexts.append(ad.matmul(probs, v_h))
    return ad.matmul(ad.concat_cols(contexts), w_o)


class PerceiverAggregator:
    """Cross-attention from shared latents, self-attention on the latents."""

    def __init__(self, store: ParameterStore, config: PerceiverConfig, rng: np.random.Generator, prefix: str = "perceiver"):
        self.config = config
        self.store = store
        self.prefix = prefix
        self.counter = ScoreCounter()
        d = config.d
        store.register("latents.z0", rng.standard_normal((config.latents, d)) / np.sqrt(d))
        for layer in range(config.layers):
            for block in ("cross", "self"):
                for w in ("wq", "wk", "wv", "wo"):
                    store.register(f"{prefix}.layer{layer}.{block}.{w}", rng.standard_normal((d, d)) / np.sqrt(d))

    def _weights(self, layer: int, block: str) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        base = f"{self.prefix}.layer{layer}.{block}"
        return (
            self.store[f"{base}.wq"],
            self.store[f"{base}.wk"],
            self.store[f"{base}.wv"],
            self.store[f"{base}.wo"],
        )

    def cross_attend(self, z: Tensor, x: Tensor, layer: int, training: bool = False, rng=None) -> Tensor:
        cfg = self.config
        n_cols = x.shape[-2]
        if n_cols < 1:
            raise EmptyNodeError("cross-attention needs at least one column embedding")
        batch = x.shape[0] if x.ndim == 3 else 1
        self.counter.add(batch * cfg.heads * z.shape[-2] * n_cols)
        attn = _multihead(z, x, *self._weights(layer, "cross"), cfg.heads, cfg.dropout, training, rng)
        return ad.add(z, attn)

    def latent_self_attend(self, z: Tensor, layer: int, training: bool = False, rng=None) -> Tensor:
        cfg = self.config
        attn = _multihead(z, z, *self._weights(layer, "self"), cfg.heads, cfg.dropout, training, rng)
        return ad.add(z, attn)

    def encode(self, x: Tensor, training: bool = False, rng=None) -> Tensor:
        """(B, C, d) or (C, d) column embeddings -> (B, d) or (d,) node embedding."""
        cfg = self.config
        squeeze = x.ndim == 2
        if squeeze:
            x = ad.reshape(x, (1,) + x.shape)
        z = ad.expand_batch(self.store["latents.z0"], x.shape[0])
        if cfg.single_cross:
            z = self.cross_attend(z, x, 0, training, rng)
            for layer in range(cfg.layers):
                z = self.latent_self_attend(z, layer, training, rng)
        else:
            for layer in range(cfg.layers):
                z = self.cross_attend(z, x, layer, training, rng)
                z = self.latent_self_attend(z, layer, training, rng)
        pooled = self._pool(z)
        return ad.reshape(pooled, (pooled.shape[-1],)) if squeeze else pooled

    def _pool(self, z: Tensor) -> Tensor:
        if self.config.pooling == "first":
            first = ad.slice_rows(z, 0, 1)
            return ad.reshape(first, (first.shape[0], first.shape[-1]))
        return ad.mean_rows(z)


class FullSelfAttentionAggregator:
    """Ablation variant: full self-attention over the column tokens."""

    def __init__(self, store: ParameterStore, config: PerceiverConfig, rng: np.random.Generator, prefix: str = "fullsa"):
        self.config = config
        self.store = store
        self.prefix = prefix
        self.counter = ScoreCounter()
        d = config.d
        for layer in range(config.layers):
            for w in ("wq", "wk", "wv", "wo"):
                store.register(f"{prefix}.layer{layer}.self.{w}", rng.standard_normal((d, d)) / np.sqrt(d))

    def encode(self, x: Tensor, training: bool = False, rng=None) -> Tensor:
        cfg = self.config
        squeeze = x.ndim == 2
        if squeeze:
            x = ad.reshape(x, (1,) + x.shape)
        n_cols = x.shape[-2]
        if n_cols < 1:
            raise EmptyNodeError("self-attention needs at least one column embedding")
        tokens = x
        for layer in range(cfg.layers):
            base = f"{self.prefix}.layer{layer}.self"
            weights = (self.store[f"{base}.wq"], self.store[f"{base}.wk"], self.store[f"{base}.wv"], self.store[f"{base}.wo"])
            self.counter.add(tokens.shape[0] * cfg.heads * n_cols * n_cols)
            attn = _multihead(tokens, tokens, *weights, cfg.heads, cfg.dropout, training, rng)
            tokens = ad.add(tokens, attn)
        pooled = ad.mean_rows(tokens)
        return ad.reshape(pooled, (pooled.shape[-1],)) if squeeze else pooled
