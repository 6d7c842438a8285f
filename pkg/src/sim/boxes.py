"""
Axis-aligned boxes: sets of initial conditions, containment regions, supports
"""

from dataclasses import dataclass
from itertools import product
from typing import List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class Box:
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) == 0:
            raise ValueError(f"box bounds must be nonempty and of equal length: {self.lo} / {self.hi}")
        for a, b in zip(self.lo, self.hi):
            if not (np.isfinite(a) and np.isfinite(b)) or a > b:
                raise ValueError(f"box axis [{a}, {b}] is empty or unbounded")

    @classmethod
    def from_bounds(cls, bounds: Sequence[Sequence[float]]) -> "Box":
        """[[lo_1, hi_1], ..., [lo_n, hi_n]]"""
        return cls(tuple(float(b[0]) for b in bounds), tuple(float(b[1]) for b in bounds))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lo_array(self) -> np.ndarray:
        return np.array(self.lo, dtype=float)

    @property
    def hi_array(self) -> np.ndarray:
        return np.array(self.hi, dtype=float)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo_array + self.hi_array)

    def side_lengths(self) -> np.ndarray:
        return self.hi_array - self.lo_array

    def inflate(self, margin) -> "Box":
        """Grow every axis by margin on both sides (scalar or per-axis)"""
        m = np.broadcast_to(np.asarray(margin, dtype=float), (self.dim,))
        if np.any(m < 0):
            raise ValueError(f"inflation margin must be nonnegative, got {margin}")
        return Box(tuple(self.lo_array - m), tuple(self.hi_array + m))

    def scale(self, factor: float) -> "Box":
        """Grow every axis by factor * side/2 on both sides"""
        return self.inflate(factor * 0.5 * self.side_lengths())

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo_array - tol) and np.all(x <= self.hi_array + tol))

    def contains_rows(self, xs, tol: float = 0.0) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return np.all((xs >= self.lo_array - tol) & (xs <= self.hi_array + tol), axis=-1)

    def corners(self) -> List[np.ndarray]:
        return [np.array(c, dtype=float) for c in product(*zip(self.lo, self.hi))]

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo_array, self.hi_array)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo_array, self.hi_array, size=(n, self.dim))

    def as_bounds(self) -> List[List[float]]:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]

    @classmethod
    def bounding(cls, points) -> "Box":
        pts = np.asarray(points, dtype=float)
        return cls(tuple(pts.min(axis=0)), tuple(pts.max(axis=0)))
