"""AdamW with decoupled weight decay, operating on a ParameterStore."""

from __future__ import annotations

import numpy as np

from .params import ParameterStore


class AdamW:
    """Bias-corrected Adam plus decoupled decay.

    The decay term theta <- theta - lr * wd * theta is applied directly to
    the parameter and never enters the moment estimates. Moment buffers are
    allocated lazily at zero. step() zeroes all gradients afterwards, so
    gradient accumulation windows end exactly at the optimizer step.

    lr = 0 is a valid null step (used by frozen-training runs); only a
    negative lr is rejected.
    """

    def __init__(
        self,
        store: ParameterStore,
        lr: float = 5e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        if not np.isfinite(lr) or lr < 0:
            raise ValueError(f"lr must be a finite non-negative number, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got ({beta1}, {beta2})")
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        if weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {weight_decay}")
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_index = 0

    def step(self) -> None:
        self.step_index += 1
        t = self.step_index
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.store.trainable_items():
            g = p.grad
            m = self._m.get(name)
            if m is None:
                m = self._m[name] = np.zeros_like(p.data)
                self._v[name] = np.zeros_like(p.data)
            v = self._v[name]
            if self.weight_decay:
                p.data -= self.lr * self.weight_decay * p.data
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        self.store.zero_grads()
