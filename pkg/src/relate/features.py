"""Raw per-modality feature extraction (no parameters, pure numpy).

Numbers become cos/sin pairs at decimal-scale periods 10^k, so no
normalization statistics are needed: each pair reads off one decimal
scale of the value. Timestamps decompose into calendar components with
cyclic pairs plus absolute sinusoids over fractional days since epoch.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

TWO_PI = 2.0 * np.pi

# supported civil-time window (seconds since epoch)
MIN_TIMESTAMP = int(datetime(1677, 1, 1, tzinfo=timezone.utc).timestamp())
MAX_TIMESTAMP = int(datetime(2262, 12, 31, 23, 59, 59, tzinfo=timezone.utc).timestamp())

# cyclic calendar components: (period, zero-based offset)
_CYCLIC = (
    ("month", 12, 1),
    ("day", 31, 1),
    ("weekday", 7, 0),
    ("hour", 24, 0),
    ("minute", 60, 0),
    ("second", 60, 0),
)
ABSOLUTE_PAIRS = 8
ABSOLUTE_BASE_DAYS = 365.25
TIME_FEATURE_DIM = 2 * len(_CYCLIC) + 2 * ABSOLUTE_PAIRS


class TimestampRangeError(ValueError):
    """Timestamp outside the supported 1677..2262 window."""


@dataclass(frozen=True)
class FoneConfig:
    """Decimal-scale Fourier features: one cos/sin pair per exponent k."""

    k_min: int = -2
    k_max: int = 4

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise ValueError(f"k_min {self.k_min} > k_max {self.k_max}")

    @property
    def exponents(self) -> range:
        return range(self.k_min, self.k_max + 1)

    @property
    def dim(self) -> int:
        return 2 * (self.k_max - self.k_min + 1)


def number_features(values, config: FoneConfig = FoneConfig()) -> np.ndarray:
    """(B,) values -> (B, config.dim) with pairs (cos, sin) per exponent.

    Each pair is periodic in the value with period 10^k. Callers handle
    Missing before this point; inputs must be finite.
    """
    x = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if not np.all(np.isfinite(x)):
        raise ValueError("number_features requires finite inputs")
    out = np.empty((x.shape[0], config.dim))
    for i, k in enumerate(config.exponents):
        phase = TWO_PI * x / (10.0**k)
        out[:, 2 * i] = np.cos(phase)
        out[:, 2 * i + 1] = np.sin(phase)
    return out


def time_features(timestamps) -> np.ndarray:
    """(B,) epoch seconds -> (B, TIME_FEATURE_DIM).

    Layout: cyclic (cos, sin) pairs for month, day, weekday, hour, minute,
    second, then absolute pairs over days-since-epoch at periods
    365.25 * 2^j days, j = 0..7. Decomposition is in UTC.
    """
    ts = np.atleast_1d(np.asarray(timestamps, dtype=np.int64))
    out = np.empty((ts.shape[0], TIME_FEATURE_DIM))
    for row, t in enumerate(ts):
        t = int(t)
        if not (MIN_TIMESTAMP <= t <= MAX_TIMESTAMP):
            raise TimestampRangeError(f"timestamp {t} outside supported range [{MIN_TIMESTAMP}, {MAX_TIMESTAMP}]")
        dt = datetime.fromtimestamp(t, tz=timezone.utc)
        components = (dt.month, dt.day, dt.weekday(), dt.hour, dt.minute, dt.second)
        col = 0
        for (_, period, offset), value in zip(_CYCLIC, components):
            phase = TWO_PI * (value - offset) / period
            out[row, col] = np.cos(phase)
            out[row, col + 1] = np.sin(phase)
            col += 2
        frac_days = t / 86400.0
        for j in range(ABSOLUTE_PAIRS):
            phase = TWO_PI * frac_days / (ABSOLUTE_BASE_DAYS * (2.0**j))
            out[row, col] = np.cos(phase)
            out[row, col + 1] = np.sin(phase)
            col += 2
    return out
