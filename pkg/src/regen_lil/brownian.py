"""Discretized Brownian motion and the two kernel integrals built on it.

For a path B on the grid ``x_k = k * step``:

* ``convolve_bm`` approximates ``int_0^t B(t - x) f'(x) dx`` in Stieltjes
  form, ``sum_k (B(t - x_k) + B(t - x_{k+1})) / 2 * (f(x_{k+1}) - f(x_k))``,
  which stays well defined when ``f'`` blows up at 0 (alpha < 1).
* ``weighted_ito_integral`` is the left-point sum of
  ``(t - x_k)^alpha (B(x_{k+1}) - B(x_k))``.

For ``f(x) = x^alpha`` the two agree up to discretization error:
``alpha * int B(t - x) x^{alpha - 1} dx = int (t - x)^alpha dB(x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .extremes import RunningExtremes
from .special_math import QuadratureConfig, integrate_adaptive

DEFAULT_MAX_POINTS = 50_000_000


class MemoryCapError(ValueError):
    pass


@dataclass(frozen=True)
class BrownianPath:
    step: float
    values: np.ndarray  # B(k * step), k = 0..N

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if len(self.values) == 0 or self.values[0] != 0.0:
            raise ValueError("a Brownian path starts at 0")

    @property
    def horizon(self) -> float:
        return (len(self.values) - 1) * self.step

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def scaled(self, c: float) -> "BrownianPath":
        return BrownianPath(self.step, c * self.values)


def simulate_bm(T: float, step: float, rng: np.random.Generator,
                max_points: int = DEFAULT_MAX_POINTS) -> BrownianPath:
    """Partial sums of iid Normal(0, step) increments on [0, T]."""
    if not (T > 0 and step > 0):
        raise ValueError("T and step must be positive")
    n = int(round(T / step))
    if n > max_points:
        raise MemoryCapError(f"T/step = {n} exceeds the cap of {max_points} grid points")
    dB = rng.standard_normal(n) * math.sqrt(step)
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(dB, out=values[1:])
    return BrownianPath(step, values)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel ``f`` with ``f'`` regularly varying of index ``alpha - 1``.

    Built-ins: ``"power"`` is ``x^alpha``; ``"power_log"`` is
    ``x^alpha (1 + log(1 + x))``.  ``"custom"`` takes callables.
    ``t0`` is a point beyond which ``f > 0``.
    """

    alpha: float
    kind: str = "power"
    t0: float = 0.0
    func: Callable | None = field(default=None, compare=False)
    deriv: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.kind not in ("power", "power_log", "custom"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "custom" and (self.func is None or self.deriv is None):
            raise ValueError("custom kernels need func and deriv")

    @classmethod
    def power(cls, alpha: float) -> "KernelSpec":
        return cls(alpha, "power")

    @classmethod
    def power_log(cls, alpha: float) -> "KernelSpec":
        return cls(alpha, "power_log")

    def f(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            return x ** self.alpha
        if self.kind == "power_log":
            return x ** self.alpha * (1.0 + np.log1p(x))
        return self.func(x)

    def fprime(self, x):
        x = np.asarray(x, dtype=float)
        a = self.alpha
        if self.kind == "power":
            return a * x ** (a - 1.0)
        if self.kind == "power_log":
            return a * x ** (a - 1.0) * (1.0 + np.log1p(x)) + x ** a / (1.0 + x)
        return self.deriv(x)


def _grid_index(path: BrownianPath, t: float) -> int:
    if t < 0:
        raise ValueError("t must be nonnegative")
    k = int(round(t / path.step))
    if k > len(path.values) - 1 or t > path.horizon * (1 + 1e-12):
        raise ValueError(f"t={t} is beyond the path horizon {path.horizon}")
    if abs(k * path.step - t) > 1e-9 * max(1.0, t):
        raise ValueError(f"t={t} is not a grid point of step {path.step}")
    return k


def convolve_bm(path: BrownianPath, kernel: KernelSpec, t: float) -> float:
    """Trapezoid-Stieltjes approximation of int_0^t B(t - x) f'(x) dx."""
    k = _grid_index(path, t)
    if k == 0:
        return 0.0
    x = np.arange(k + 1) * path.step
    df = np.diff(kernel.f(x))
    b = path.values[k::-1]  # B(t - x_j), j = 0..k
    return float(np.dot(0.5 * (b[:-1] + b[1:]), df))


def weighted_ito_integral(path: BrownianPath, alpha: float, t: float) -> float:
    """Left-point sum of (t - x_k)^alpha dB over grid points below t."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    k = _grid_index(path, t)
    if k == 0:
        return 0.0
    w = (t - np.arange(k) * path.step) ** alpha
    return float(np.dot(w, path.values[1:k + 1] - path.values[:k]))


def convolution_variance(kernel: KernelSpec, t: float) -> float:
    """Var of int_0^t B(t - x) f'(x) dx, i.e. int_0^t (f(u) - f(0))^2 du."""
    f0 = float(kernel.f(0.0))
    cfg = QuadratureConfig(abs_tol=1e-13, rel_tol=1e-11)
    return integrate_adaptive(lambda u: (kernel.f(u) - f0) ** 2, 0.0, t, cfg)


def lil_normalizer(kernel: KernelSpec, t: float) -> float:
    """sqrt(2 (2 alpha + 1)^{-1} t log log t) f(t)."""
    return math.sqrt(2.0 / (2.0 * kernel.alpha + 1.0) * t * math.log(math.log(t))) * float(kernel.f(t))


def lil_trajectory_stat(samples: Iterable, kernel: KernelSpec,
                        extremes: RunningExtremes | None = None) -> RunningExtremes:
    """Feed normalized values of (t, value) pairs into running extremes."""
    ext = extremes if extremes is not None else RunningExtremes()
    floor = max(math.e, kernel.t0)
    for t, value in samples:
        if not t > floor:
            raise ValueError(f"t={t} must exceed max(e, t0) = {floor}")
        ext.append(value / lil_normalizer(kernel, t))
    return ext


def geometric_checkpoints(t_start: float, T: float, step: float, ratio: float = 1.05) -> np.ndarray:
    """Grid-aligned points t_start * ratio^j up to T, duplicates removed."""
    if not (ratio > 1 and t_start > 0 and T >= t_start):
        raise ValueError("need ratio > 1 and 0 < t_start <= T")
    n = int(math.floor(math.log(T / t_start) / math.log(ratio))) + 1
    pts = t_start * ratio ** np.arange(n)
    k = np.unique(np.ceil(pts / step - 1e-9).astype(np.int64))
    k = k[k * step <= T * (1 + 1e-12)]
    return k * step


def bm_lil_trajectory(kernel: KernelSpec, T: float, step: float, rng: np.random.Generator,
                      ratio: float = 1.05, t_start: float | None = None,
                      max_points: int = DEFAULT_MAX_POINTS):
    """One path, evaluated at geometric checkpoints.

    Returns ``(samples, extremes)`` where samples are ``(t, value, normalized)``
    with ``value = convolve_bm(path, kernel, t)``.
    """
    if t_start is None:
        t_start = max(10.0, 1.01 * kernel.t0)
    path = simulate_bm(T, step, rng, max_points)
    ext = RunningExtremes()
    samples = []
    for t in geometric_checkpoints(t_start, T, step, ratio):
        t = float(t)
        value = convolve_bm(path, kernel, t)
        lil_trajectory_stat([(t, value)], kernel, ext)
        samples.append((t, value, value / lil_normalizer(kernel, t)))
    return samples, ext
