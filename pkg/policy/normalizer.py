"""
Per-dimension min/max scaling into [-1, 1].
"""
from dataclasses import dataclass

import numpy as np

from core import DimensionError

MIN_RANGE = 1e-6


@dataclass(frozen=True, eq=False)
class MinMaxNormalizer:
    low: np.ndarray
    high: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "MinMaxNormalizer":
        """Fit on (..., D) samples; dataset extremes map to exactly -1 and 1."""
        data = np.asarray(data, dtype=np.float64)
        flat = data.reshape(-1, data.shape[-1])
        return cls(flat.min(axis=0), flat.max(axis=0))

    @property
    def dim(self) -> int:
        return int(self.low.size)

    @property
    def _span(self) -> np.ndarray:
        # degenerate dimensions keep a unit span so they map to -1
        span = self.high - self.low
        return np.where(span < MIN_RANGE, 1.0, span)

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"normalizer fitted on {self.dim} dims, got trailing extent {x.shape[-1]}")
        return x

    def normalize(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        return 2.0 * (x - self.low) / self._span - 1.0

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        return (x + 1.0) * 0.5 * self._span + self.low
