"""Special functions and adaptive quadrature.

The polygamma family is evaluated by upward recurrence into the asymptotic
regime followed by the Stirling-type series.  Integrals go through an adaptive
21-point Gauss-Kronrod scheme with QUADPACK-style error estimates; semi-infinite
ranges are mapped onto a finite interval before subdivision.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

EULER_GAMMA = 0.57721566490153286060651209008240243

# Kronrod 21-point abscissae (nonnegative half) and weights; Gauss 10-point
# weights sit on the odd-indexed abscissae.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600885449025,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(21)
_GW[1:10:2] = _WG
_GW[11:20:2] = _WG[::-1]

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and domain handling for :func:`integrate_adaptive`.

    ``transform`` applies only when ``b`` is infinite.  ``"exp_tail"`` maps
    ``x = a - tail_scale * log(1 - u)``, which suits integrands decaying like
    ``exp(-x / tail_scale)``; ``"none"`` uses the rational map
    ``x = a + u / (1 - u)`` and tolerates algebraic decay.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000
    transform: str = "exp_tail"
    tail_scale: float = 1.0

    def __post_init__(self):
        if not self.abs_tol > 0 or not self.rel_tol > 0:
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.transform not in ("none", "exp_tail"):
            raise ValueError(f"unknown transform {self.transform!r}")
        if not self.tail_scale > 0:
            raise ValueError("tail_scale must be positive")


DEFAULT_QUAD = QuadratureConfig()


class QuadratureError(ArithmeticError):
    """Raised when the subdivision budget runs out before convergence."""

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate!r}, error bound={error!r})")
        self.estimate = estimate
        self.error = error


def _gk21(f, lo, hi):
    half = 0.5 * (hi - lo)
    center = 0.5 * (hi + lo)
    fx = np.asarray(f(center + half * _NODES), dtype=float)
    # fx has shape (21,) or (21, k) for vector-valued integrands
    kw = _KW.reshape((21,) + (1,) * (fx.ndim - 1))
    gw = _GW.reshape(kw.shape)
    resk = (kw * fx).sum(axis=0) * half
    resg = (gw * fx).sum(axis=0) * half
    habs = abs(half)
    resabs = (kw * np.abs(fx)).sum(axis=0) * habs
    mean = resk / (2.0 * half) if half != 0 else resk
    resasc = (kw * np.abs(fx - mean)).sum(axis=0) * habs
    err = np.abs(resk - resg)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    err = np.where(resabs > _TINY / (50 * _EPS), np.maximum(50 * _EPS * resabs, err), err)
    if not np.all(np.isfinite(resk)):
        raise QuadratureError("non-finite integrand value", float(np.ravel(resk)[0]), math.inf)
    return resk, err, resabs


def gk_adaptive(f, breaks, abs_tol, rel_tol, limit):
    """Adaptive bisection over the panels delimited by ``breaks``.

    ``f`` is evaluated on arrays of nodes and may return one value per node or
    a row of values per node (vector-valued integrand).  Returns
    ``(integral, error_bound)`` with the same trailing shape as ``f``.
    Convergence is required componentwise.
    """
    heap = []
    total = None
    total_err = None
    count = 0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi == lo:
            continue
        res, err, rabs = _gk21(f, lo, hi)
        total = res if total is None else total + res
        total_err = err if total_err is None else total_err + err
        heap.append([0.0, count, lo, hi, res, err, rabs])
        count += 1
    if total is None:
        return 0.0, 0.0

    def score(err, tol):
        return float(np.max(err / tol))

    def tol_of(total):
        return np.maximum(abs_tol, rel_tol * np.abs(total))

    tol = tol_of(total)
    for item in heap:
        item[0] = -score(item[5], tol)
    heapq.heapify(heap)
    nsub = len(heap)
    while np.any(total_err > tol):
        if nsub >= limit or not heap:
            raise QuadratureError("maximum subdivisions reached",
                                  _scalar(total), _scalar(total_err))
        _, _, lo, hi, res, err, rabs = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if (not (lo < mid < hi) or (hi - lo) <= 4 * _EPS * max(abs(lo), abs(hi), 1e-300)
                or np.all(err <= 100 * _EPS * rabs)):
            # roundoff-limited or unsplittable panel: keep its contribution as is
            total_err = total_err - err
            continue
        r1, e1, a1 = _gk21(f, lo, mid)
        r2, e2, a2 = _gk21(f, mid, hi)
        total = total + (r1 + r2 - res)
        total_err = total_err + (e1 + e2 - err)
        tol = tol_of(total)
        heapq.heappush(heap, [-score(e1, tol), count, lo, mid, r1, e1, a1])
        heapq.heappush(heap, [-score(e2, tol), count + 1, mid, hi, r2, e2, a2])
        count += 2
        nsub += 1
    return _scalar(total), _scalar(np.abs(total_err))


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def integrate_adaptive(f: Callable, a: float, b: float,
                       cfg: QuadratureConfig = DEFAULT_QUAD,
                       points: Sequence[float] = ()) -> float:
    """Integrate ``f`` over ``(a, b)``; ``b`` may be ``math.inf``.

    ``f`` must accept a numpy array of abscissae.  ``points`` are interior
    breakpoints (kinks, near-singular layers) that seed the initial panels.
    Raises :class:`QuadratureError` carrying the best estimate and error
    bound when the subdivision budget is exhausted.
    """
    if math.isinf(a):
        raise ValueError("lower limit must be finite")
    if b == a:
        return 0.0
    if b < a:
        return -integrate_adaptive(f, b, a, cfg, points)
    pts = sorted(p for p in points if a < p < b)
    if math.isfinite(b):
        breaks = [a, *pts, b]
        g = f
    else:
        if cfg.transform == "exp_tail":
            s = cfg.tail_scale

            def g(u):
                u = np.minimum(u, 1.0 - _EPS)
                x = a - s * np.log1p(-u)
                return np.asarray(f(x), dtype=float) * (s / (1.0 - u))

            to_u = [-math.expm1(-(p - a) / s) for p in pts]
        else:
            def g(u):
                u = np.minimum(u, 1.0 - _EPS)
                x = a + u / (1.0 - u)
                return np.asarray(f(x), dtype=float) / (1.0 - u) ** 2

            to_u = [(p - a) / (1.0 + p - a) for p in pts]
        breaks = [0.0, *to_u, 1.0]
    value, _ = gk_adaptive(g, breaks, cfg.abs_tol, cfg.rel_tol, cfg.max_subdivisions)
    return value


# --- polygamma -------------------------------------------------------------

_SHIFT = 8.0
# Bernoulli numbers B_2 .. B_14
_B2K = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def _asymptotic(k, s):
    inv = 1.0 / s
    inv2 = inv * inv
    if k == 0:
        acc = np.log(s) - 0.5 * inv
        p = inv2
        for j, b in enumerate(_B2K, start=1):
            acc = acc - b / (2 * j) * p
            p = p * inv2
        return acc
    if k == 1:
        acc = inv + 0.5 * inv2
        p = inv2 * inv
        for b in _B2K:
            acc = acc + b * p
            p = p * inv2
        return acc
    acc = -inv2 - inv2 * inv
    p = inv2 * inv2
    for j, b in enumerate(_B2K, start=1):
        acc = acc - (2 * j + 1) * b * p
        p = p * inv2
    return acc


def polygamma(k: int, s):
    """Digamma (k=0), trigamma (k=1) or tetragamma (k=2) at ``s > 0``.

    Accepts scalars or arrays.
    """
    if k not in (0, 1, 2):
        raise ValueError(f"polygamma order must be 0, 1 or 2, got {k!r}")
    arr = np.asarray(s, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("polygamma requires s > 0")
    x = arr.copy()
    corr = np.zeros_like(x)
    while True:
        low = x < _SHIFT
        if not np.any(low):
            break
        xl = x[low]
        if k == 0:
            corr[low] -= 1.0 / xl
        elif k == 1:
            corr[low] += 1.0 / (xl * xl)
        else:
            corr[low] -= 2.0 / (xl * xl * xl)
        x[low] = xl + 1.0
    out = _asymptotic(k, x) + corr
    return float(out) if out.ndim == 0 else out


def digamma(s):
    return polygamma(0, s)


def digamma_increment(x: float, n: int) -> float:
    """psi(x + n) - psi(x) for integer ``n >= 0``, without cancellation."""
    if n <= 0:
        return 0.0
    if n <= 2048:
        return math.fsum(1.0 / (x + j) for j in range(n))
    return polygamma(0, x + n) - polygamma(0, x)


def log_beta(a: float, b: float) -> float:
    """log B(a, b) for positive ``a`` and ``b``."""
    if not (a > 0 and b > 0):
        raise ValueError("log_beta requires positive arguments")
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def log_binom(n, m):
    """Elementwise log C(n, m)."""
    return gammaln(np.asarray(n) + 1.0) - gammaln(np.asarray(m) + 1.0) - gammaln(np.asarray(n) - np.asarray(m) + 1.0)
