"""Running extremes and cluster-set coverage of a normalized trajectory."""
from __future__ import annotations

import math

import numpy as np

COVERAGE_TOL = 0.05
GRID_SIZE = 101


class RunningExtremes:
    """Running max/min of appended values plus a coverage grid over [-1, 1].

    A grid point counts as visited once some appended value lies within
    ``tol`` of it.  Non-finite values are rejected.
    """

    def __init__(self, grid_size: int = GRID_SIZE, tol: float = COVERAGE_TOL):
        self.grid = np.linspace(-1.0, 1.0, grid_size)
        self.tol = tol
        self.visited = np.zeros(grid_size, dtype=bool)
        self.running_max = -math.inf
        self.running_min = math.inf
        self.count = 0

    def append(self, value: float) -> None:
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"non-finite trajectory value {value!r}")
        self.running_max = max(self.running_max, value)
        self.running_min = min(self.running_min, value)
        self.visited |= np.abs(self.grid - value) <= self.tol + 1e-12
        self.count += 1

    def extend(self, values) -> None:
        for v in values:
            self.append(v)

    @property
    def coverage(self) -> float:
        return float(self.visited.mean())

    def histogram(self) -> list[int]:
        """0/1 visit indicator per grid point, for persistence."""
        return self.visited.astype(int).tolist()

    def as_dict(self) -> dict:
        return {
            "running_max": self.running_max,
            "running_min": self.running_min,
            "count": self.count,
            "coverage": self.coverage,
            "coverage_tol": self.tol,
            "coverage_grid_size": len(self.grid),
            "coverage_visited": self.histogram(),
        }

    def __repr__(self):
        return (f"RunningExtremes(max={self.running_max:.4g}, min={self.running_min:.4g}, "
                f"count={self.count}, coverage={self.coverage:.3f})")
