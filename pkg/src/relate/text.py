"""Frozen static text embeddings: token table plus mean pooling.

Stands in for a pretrained sentence model. Nothing here registers
parameters; every output is a deterministic function of the loaded table,
so column-metadata vectors can be cached as constants.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

import numpy as np

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

DEMO_TABLE_RESOURCE = "demo_token_table.txt"
DEFAULT_FALLBACK_BUCKETS = 1024
FALLBACK_SEED = 42


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


class TokenTable:
    """dim-sized vectors for known tokens plus hashed fallback buckets.

    Unknown tokens map to one of B frozen bucket vectors via
    FNV-1a-64 mod B, so unseen schema vocabulary still embeds
    deterministically. B = 0 disables the fallback (unknowns are skipped).
    """

    def __init__(
        self,
        dim: int,
        entries: dict[str, np.ndarray],
        fallback_buckets: int = DEFAULT_FALLBACK_BUCKETS,
    ):
        if dim <= 0:
            raise ValueError(f"dim must be positive, got {dim}")
        if fallback_buckets < 0:
            raise ValueError(f"fallback_buckets must be >= 0, got {fallback_buckets}")
        self.dim = dim
        self.entries: dict[str, np.ndarray] = {}
        for token, vec in entries.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (dim,):
                raise ValueError(f"token {token!r}: vector shape {arr.shape} != ({dim},)")
            self.entries[token.lower()] = arr
        self.fallback_buckets = fallback_buckets
        if fallback_buckets > 0:
            rng = np.random.default_rng(FALLBACK_SEED)
            self._fallback = rng.standard_normal((fallback_buckets, dim)) / np.sqrt(dim)
        else:
            self._fallback = np.zeros((0, dim))

    def __len__(self) -> int:
        return len(self.entries)

    def vector(self, token: str) -> np.ndarray | None:
        vec = self.entries.get(token)
        if vec is not None:
            return vec
        if self.fallback_buckets > 0:
            bucket = fnv1a_64(token.encode("utf-8")) % self.fallback_buckets
            return self._fallback[bucket]
        return None

    def embed_text(self, text: str) -> np.ndarray:
        """Mean of resolved token vectors; zero vector when nothing resolves."""
        vecs = [v for v in (self.vector(tok) for tok in tokenize(text)) if v is not None]
        if not vecs:
            return np.zeros(self.dim)
        return np.mean(vecs, axis=0)

    def embed_column_metadata(self, table_name: str, column_name: str, description: str | None = None) -> np.ndarray:
        if not table_name or not column_name:
            raise ValueError("table and column names must be nonempty")
        return self.embed_text(f"{table_name} | {column_name} | {description or ''}")

    @classmethod
    def from_word2vec(cls, path, fallback_buckets: int = DEFAULT_FALLBACK_BUCKETS) -> "TokenTable":
        """word2vec text format: "vocab dim" header, then token + dim floats per line."""
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}: first line must be 'vocab_size dim'")
            vocab_size, dim = int(header[0]), int(header[1])
            entries: dict[str, np.ndarray] = {}
            for line_no, line in enumerate(fh, start=2):
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise ValueError(f"{path}:{line_no}: expected token + {dim} values, got {len(parts)} fields")
                entries[parts[0].lower()] = np.array([float(x) for x in parts[1:]])
        if len(entries) != vocab_size:
            raise ValueError(f"{path}: header promises {vocab_size} tokens, file has {len(entries)}")
        return cls(dim=dim, entries=entries, fallback_buckets=fallback_buckets)


_demo_cache: TokenTable | None = None


def load_demo_table() -> TokenTable:
    """The bundled 64-dim demo table (cached; it is immutable)."""
    global _demo_cache
    if _demo_cache is None:
        with resources.as_file(resources.files("relate.assets").joinpath(DEMO_TABLE_RESOURCE)) as path:
            _demo_cache = TokenTable.from_word2vec(path)
    return _demo_cache
