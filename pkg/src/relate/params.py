"""Named trainable tensors, shared by every encoder in one model.

All learnable state lives in one flat namespace of dotted names so that
parameter audits, serialization, and the optimizer see a single source of
truth. Entries are registered exactly once; schema growth must never add
entries for the shared encoder (that is the property the audits check).
"""

from __future__ import annotations

import struct
from typing import Iterator

import numpy as np

from .autodiff import Tensor

MAGIC = b"RELATEPS"
FORMAT_VERSION = 1


class ParameterStore:
    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def register(self, name: str, value, trainable: bool = True) -> Tensor:
        if name in self._entries:
            raise ValueError(f"parameter {name!r} already registered")
        t = Tensor(value, trainable=trainable, name=name)
        if t.grad is None:
            # invariant: gradient buffer always matches the value shape
            t.grad = np.zeros_like(t.data)
        self._entries[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._entries.items())

    def trainable_items(self) -> list[tuple[str, Tensor]]:
        return [(n, t) for n, t in self._entries.items() if t.trainable]

    def total_count(self, prefix: str = "") -> int:
        """Total trainable scalar count, optionally restricted to a dotted prefix."""
        return sum(
            t.size
            for n, t in self._entries.items()
            if t.trainable and (not prefix or n == prefix or n.startswith(prefix + "."))
        )

    def zero_grads(self) -> None:
        for t in self._entries.values():
            if t.grad is not None:
                t.grad.fill(0.0)

    # ------------------------------------------------------------------
    # flat binary serialization

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", FORMAT_VERSION, len(self._entries)))
            for name, t in self._entries.items():
                raw = name.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)))
                fh.write(raw)
                fh.write(struct.pack("<B", t.data.ndim))
                for dim in t.data.shape:
                    fh.write(struct.pack("<Q", dim))
                fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())

    def load(self, path, subset_ok: bool = False) -> None:
        """Fill existing entries from a file written by save().

        Names and shapes must match; with subset_ok the file may carry
        extra entries (e.g. a training head this store does not build),
        but every store entry must still be present in the file.
        """
        loaded = read_parameter_file(path)
        missing = set(loaded) - set(self._entries)
        extra = set(self._entries) - set(loaded)
        if extra or (missing and not subset_ok):
            raise ValueError(f"parameter name mismatch: file-only {sorted(missing)}, store-only {sorted(extra)}")
        for name, entry in self._entries.items():
            arr = loaded[name]
            if arr.shape != entry.data.shape:
                raise ValueError(f"shape mismatch for {name!r}: file {arr.shape} vs store {entry.data.shape}")
            entry.data[...] = arr


def read_parameter_file(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"not a parameter file (bad magic {magic!r})")
        version, count = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported parameter file version {version}")
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", fh.read(1))
            dims = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(rank))
            n = int(np.prod(dims)) if dims else 1
            arr = np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(dims).astype(np.float64)
            out[name] = arr
    return out
