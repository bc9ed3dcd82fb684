"""Independent reference implementations used as test oracles.

Everything here is deliberately naive (plain loops, textbook formulas)
and shares no code with the package paths it checks.
"""

from __future__ import annotations

import math

import numpy as np


def matmul_triple_loop(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def softmax_vec(v):
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(v - v.max())
    return e / e.sum()


def attention_naive(queries, keys_values, w_q, w_k, w_v, w_o, heads):
    """Multi-head scaled dot-product attention, one score at a time."""
    q_in = np.asarray(queries, dtype=np.float64)
    kv_in = np.asarray(keys_values, dtype=np.float64)
    d = w_q.shape[1]
    dk = d // heads
    n_q, n_kv = q_in.shape[0], kv_in.shape[0]
    q = q_in @ w_q
    k = kv_in @ w_k
    v = kv_in @ w_v
    concat = np.zeros((n_q, d))
    for h in range(heads):
        lo, hi = h * dk, (h + 1) * dk
        for i in range(n_q):
            scores = np.array([np.dot(q[i, lo:hi], k[j, lo:hi]) / math.sqrt(dk) for j in range(n_kv)])
            probs = softmax_vec(scores)
            for j in range(n_kv):
                concat[i, lo:hi] += probs[j] * v[j, lo:hi]
    return concat @ w_o


def adamw_scalar_step(theta, g, m, v, t, lr, beta1, beta2, eps, weight_decay):
    """One AdamW step on a single scalar, by the textbook formulas."""
    theta = theta - lr * weight_decay * theta
    m = beta1 * m + (1 - beta1) * g
    v = beta2 * v + (1 - beta2) * g * g
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
    return theta, m, v


def auc_pairwise(scores, labels):
    """O(n^2) pairwise AUC: concordant plus half ties over all pos/neg pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    assert len(pos) and len(neg)
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


_DAYS_IN_MONTH = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)


def _is_leap(year):
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def epoch_seconds(year, month, day, hour=0, minute=0, second=0):
    """Seconds since 1970-01-01T00:00:00Z by plain calendar arithmetic."""
    days = 0
    for y in range(1970, year):
        days += 366 if _is_leap(y) else 365
    for m in range(1, month):
        days += _DAYS_IN_MONTH[m - 1] + (1 if m == 2 and _is_leap(year) else 0)
    days += day - 1
    return ((days * 24 + hour) * 60 + minute) * 60 + second


def central_difference(f, x0, epsilon=1e-5):
    """Gradient of scalar f at flat vector x0 by central differences."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += epsilon
        xm[i] -= epsilon
        grad[i] = (f(xp) - f(xm)) / (2 * epsilon)
    return grad
