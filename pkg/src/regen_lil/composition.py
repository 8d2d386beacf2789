"""Regenerative compositions of n and their block counts.

Two exact samplers draw the first block of the composition of ``r`` from the
decrement row ``q(r, .)`` and recurse on the remainder:

* ``method="mixture"`` (default) uses the representation
  ``q(r, m) = int P{Bin(r, y) = m | Bin >= 1} rho_r(dy)``, where ``rho_r`` is
  nu pushed through ``y = 1 - e^{-x}`` and tilted by ``1 - (1 - y)^r``.  Each
  block costs O(1) random draws.
* ``method="row"`` inverts the row CDF, building entries lazily in chunks.

The pathwise sampler simulates the range of the subordinator with jumps below
``eps`` discarded and counts occupied gaps directly.
"""
from __future__ import annotations

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betaln, gammaln

from . import levy_models as lm
from .levy_models import LevyModel, ModelError
from .special_math import QuadratureConfig, gk_adaptive, integrate_adaptive, log_binom

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Composition:
    blocks: tuple
    n: int

    def __post_init__(self):
        if sum(self.blocks) != self.n or any(b < 1 for b in self.blocks):
            raise ValueError(f"blocks {self.blocks} do not form a composition of {self.n}")

    @property
    def K(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class DecrementRow:
    n: int
    q: np.ndarray  # q[m-1] = P{first block = m}

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.q)


# --- decrement rows -----------------------------------------------------------

# cancellation factor (sum |terms| / |result|) above which the alternating
# Frullani sum is abandoned for quadrature
_MAX_CANCELLATION = 1e3


def _gamma_frullani(a: float, m: int):
    """sum_{j=1}^m C(m,j) (-1)^{j+1} log(1 + j/a) and its cancellation factor."""
    j = np.arange(1, m + 1)
    lc = log_binom(m, j)
    terms = np.exp(lc) * np.log1p(j / a) * np.where(j % 2 == 1, 1.0, -1.0)
    val = math.fsum(terms)
    mag = float(np.abs(terms).sum())
    return val, (mag / abs(val) if val != 0 else math.inf)


def _gamma_log_beta_integral(n: int, m: np.ndarray, lam: float) -> np.ndarray:
    """log of int_0^inf B(m + 1, n - m + lam + s) ds (gamma measure, I(n, m)/theta)."""
    out = np.empty(len(m))
    for i, mi in enumerate(np.asarray(m, dtype=float)):
        a = n - mi + lam
        # integrand relative to its value at s=0 decays roughly like
        # (1 + s/a)^{-(m+1)}, so scale the rational map by a/(m+1)
        c = a / (mi + 1.0)
        base = gammaln(a) - gammaln(mi + 1.0 + a)

        def g(u, a=a, mi=mi, c=c, base=base):
            u = np.minimum(u, 1.0 - 1e-16)
            s = c * u / (1.0 - u)
            r = np.exp(gammaln(a + s) - gammaln(mi + 1.0 + a + s) - base)
            return r * c / (1.0 - u) ** 2

        val, _ = gk_adaptive(g, [0.0, 0.5, 0.9, 0.99, 1.0], 1e-300, 1e-14, 2000)
        out[i] = math.log(val) + base + gammaln(mi + 1.0)
    return out


def _log_entries(model: LevyModel, n: int, m: np.ndarray) -> np.ndarray:
    """log(C(n, m) I(n, m)) for an array of m in 1..n."""
    m = np.asarray(m, dtype=np.int64)
    lc = log_binom(n, m)
    if model.kind == lm.GAMMA_LIKE:
        return lc + math.log(model.theta) + betaln(m, n - m + model.lam)
    if model.kind == lm.GAMMA:
        out = np.empty(len(m))
        slow = []
        for i, mi in enumerate(m):
            a = n - mi + model.lam
            if mi <= 40:
                val, canc = _gamma_frullani(a, int(mi))
                if canc <= _MAX_CANCELLATION and val > 0:
                    out[i] = math.log(val)
                    continue
                log.debug("alternating sum for I(%d,%d) loses %.1f digits; using quadrature",
                          n, mi, math.log10(canc) if canc > 0 else 0.0)
            slow.append(i)
        if slow:
            idx = np.array(slow)
            out[idx] = _gamma_log_beta_integral(n, m[idx], model.lam)
        return lc + math.log(model.theta) + out
    j = model.jump
    if j.kind == "exp":
        return lc + math.log(j.rate) + betaln(m + 1.0, n - m + j.rate)
    atoms = np.array([j.value]) if j.kind == "det" else np.array(j.values)
    probs = np.array([1.0]) if j.kind == "det" else np.array(j.probs)
    # E[(1 - e^{-xi})^m e^{-(n-m) xi}]
    ly = np.log(-np.expm1(-atoms))[:, None]
    terms = np.log(probs)[:, None] + m[None, :] * ly - (n - m)[None, :] * atoms[:, None]
    mx = terms.max(axis=0)
    return lc + mx + np.log(np.exp(terms - mx).sum(axis=0))


def decrement_entries(model: LevyModel, n: int, m) -> np.ndarray:
    """q(n, m) for an array of block sizes ``m`` in 1..n."""
    m = np.atleast_1d(np.asarray(m, dtype=np.int64))
    if n < 1 or np.any((m < 1) | (m > n)):
        raise ValueError("need 1 <= m <= n")
    return np.exp(_log_entries(model, n, m) - math.log(lm.laplace_exponent_int(model, n)))


def decrement_row(model: LevyModel, n: int) -> DecrementRow:
    """Distribution of the first block size of the composition of ``n``."""
    if n < 1:
        raise ValueError("decrement_row requires n >= 1")
    return DecrementRow(n, decrement_entries(model, n, np.arange(1, n + 1)))


def decrement_row_quadrature(model: LevyModel, n: int) -> DecrementRow:
    """Same row, built by direct quadrature of I(n, m) against nu.

    Independent of the closed forms; used to cross-check them.
    """
    q = np.empty(n)
    cfg = None if model.is_cp else QuadratureConfig(abs_tol=1e-300, rel_tol=1e-12,
                                                    tail_scale=1.0 / model.lam)
    for m in range(1, n + 1):
        def g(x, m=m):
            lx = m * np.log(-np.expm1(-x)) - (n - m) * x + float(log_binom(n, m))
            return np.exp(lx)
        q[m - 1] = lm.integrate_nu(model, g, cfg=cfg, knee=1.0 / n)
    return DecrementRow(n, q / lm.laplace_exponent_int(model, n))


# --- samplers -----------------------------------------------------------------

@lru_cache(maxsize=16)
def _harmonic_table(lam: float, size: int) -> np.ndarray:
    # c[J] = sum_{j<J} 1/(lam + j)
    return np.concatenate([[0.0], np.cumsum(1.0 / (lam + np.arange(size)))])


def _table_for(lam: float, r: int) -> np.ndarray:
    size = 1024
    while size < r:
        size *= 4
    return _harmonic_table(lam, size)


def _tilted_jump(model: LevyModel, r: int, rng: np.random.Generator) -> float:
    """A draw from nu(dx) (1 - e^{-r x}) / Phi_L(r)."""
    if model.kind == lm.GAMMA:
        # 1/x = int e^{-sx} ds turns the tilted measure into a mixture of
        # Exp(lam + s) laws with log(lam + s) uniform on [log lam, log(lam + r)]
        rate = model.lam * math.exp(rng.random() * math.log1p(r / model.lam))
        return rng.standard_exponential() / rate
    if model.kind == lm.GAMMA_LIKE:
        # (1 - e^{-rx}) / (1 - e^{-x}) = sum_{j<r} e^{-jx}: mixture of Exp(lam + j)
        c = _table_for(model.lam, r)
        u = rng.random() * c[r]
        j = min(int(np.searchsorted(c, u, side="right")) - 1, r - 1)
        return rng.standard_exponential() / (model.lam + max(j, 0))
    jump = model.jump
    if jump.kind == "exp":
        # density proportional to e^{-rate x} - e^{-(rate + r) x}: hypoexponential
        return (rng.standard_exponential() / jump.rate
                + rng.standard_exponential() / (jump.rate + r))
    if jump.kind == "det":
        return jump.value
    vals = np.array(jump.values)
    w = np.array(jump.probs) * -np.expm1(-r * vals)
    return float(vals[min(int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), "right")),
                          len(vals) - 1)])


def _first_block_mixture(model: LevyModel, r: int, rng: np.random.Generator) -> int:
    x = _tilted_jump(model, r, rng)
    y = -math.expm1(-x)
    # index of the first hit among r trials, conditioned on at least one hit
    tail = math.log1p(rng.random() * math.expm1(-r * x))
    first = min(int(tail / -x), r - 1) if x > 0 else 0
    rest = r - 1 - first
    return 1 + (int(rng.binomial(rest, y)) if rest > 0 else 0)


@lru_cache(maxsize=4096)
def _row_cdf(model: LevyModel, r: int) -> np.ndarray:
    return np.cumsum(decrement_row(model, r).q)


def _first_block_row(model: LevyModel, r: int, rng: np.random.Generator) -> int:
    u = rng.random()
    if r <= 4096:
        return min(int(np.searchsorted(_row_cdf(model, r), u, side="right")) + 1, r)
    # large rows: entries built lazily, mass sits mostly at small m
    acc = 0.0
    lo = 1
    chunk = 64
    while lo <= r:
        hi = min(r, lo + chunk - 1)
        c = acc + np.cumsum(decrement_entries(model, r, np.arange(lo, hi + 1)))
        k = int(np.searchsorted(c, u, side="right"))
        if k < len(c):
            return lo + k
        if c[-1] > 1.0 - 1e-14:
            break
        acc = float(c[-1])
        lo = hi + 1
        chunk *= 4
    # u fell in the rounding slack above the last cumulative value
    return min(hi, r)


_FIRST_BLOCK = {"mixture": _first_block_mixture, "row": _first_block_row}


def sample_composition(model: LevyModel, n: int, rng: np.random.Generator,
                       method: str = "mixture") -> Composition:
    """Regenerative composition of ``n`` by the first-block recursion."""
    if n < 1:
        raise ValueError("sample_composition requires n >= 1")
    draw = _FIRST_BLOCK[method]
    blocks = []
    r = n
    while r > 0:
        m = 1 if r == 1 else draw(model, r, rng)
        blocks.append(m)
        r -= m
    return Composition(tuple(blocks), n)


def sample_block_count(model: LevyModel, n: int, rng: np.random.Generator,
                       method: str = "mixture") -> int:
    """K_n only; same random stream consumption as :func:`sample_composition`."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    draw = _FIRST_BLOCK[method]
    k = 0
    r = n
    while r > 0:
        r -= 1 if r == 1 else draw(model, r, rng)
        k += 1
    return k


def sample_Kn_poissonized(model: LevyModel, t: float, rng: np.random.Generator):
    """(N, K_N) with N ~ Poisson(t)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    count = int(rng.poisson(t)) if t > 0 else 0
    return count, sample_block_count(model, count, rng)


def block_count_distribution(model: LevyModel, n_max: int) -> np.ndarray:
    """Exact laws of K_0..K_{n_max} by the first-block recursion.

    Row ``r`` of the result holds P{K_r = k} for k = 0..n_max.
    """
    p = np.zeros((n_max + 1, n_max + 1))
    p[0, 0] = 1.0
    for r in range(1, n_max + 1):
        q = decrement_row(model, r).q
        prev = p[r - 1::-1][:r]  # rows K_{r-1}, ..., K_0 for m = 1..r
        p[r, 1:] = q @ prev[:, :-1]
    return p


# --- pathwise sampler ---------------------------------------------------------

class JumpSampler:
    """Jumps of size >= eps from nu restricted to [eps, inf), normalised.

    Gamma families use rejection from a piecewise envelope (c/x on [eps, 1),
    c e^{-lam x} beyond); draws come in fixed batches so that the sequence of
    jumps depends only on the stream.
    """

    def __init__(self, model: LevyModel, eps: float):
        self.model = model
        self.eps = float(eps)
        if model.is_cp:
            if eps < 0:
                raise ModelError("eps must be nonnegative")
            if eps > 0 and float(model.jump.survival(eps)) == 0.0:
                raise ModelError(f"eps={eps} exceeds every jump size: nu([eps, inf)) = 0")
            return
        if not eps > 0:
            raise ModelError("infinite Levy measure: eps must be positive")
        lam = model.lam
        if model.kind == lm.GAMMA:
            self._c = 1.0
        else:
            self._c = 1.0 / -math.expm1(-1.0)
        if eps < 1.0:
            w_a = math.log(1.0 / eps)
            w_b = math.exp(-lam) / lam
        else:
            w_a = 0.0
            w_b = math.exp(-lam * eps) / lam
        self._p_a = w_a / (w_a + w_b)

    def _accept_prob(self, x, piece_a):
        lam = self.model.lam
        if self.model.kind == lm.GAMMA:
            if self.eps >= 1.0:
                return self.eps / x
            return np.where(piece_a, np.exp(-lam * x), 1.0 / x)
        ratio = x / -np.expm1(-x)
        if self.eps >= 1.0:
            return -math.expm1(-self.eps) / -np.expm1(-x)
        c = self._c
        return np.where(piece_a, np.exp(-lam * x) * ratio / c, 1.0 / (c * -np.expm1(-x)))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        model = self.model
        if model.is_cp:
            out = []
            have = 0
            while have < size:
                x = model.jump.sample(rng, size)
                if self.eps > 0:
                    x = x[x >= self.eps]
                out.append(x)
                have += len(x)
            return np.concatenate(out)[:size]
        out = []
        have = 0
        lo = max(self.eps, 1.0)
        while have < size:
            batch = 2 * size
            piece_a = rng.random(batch) < self._p_a
            u = rng.random(batch)
            xa = self.eps * np.exp(u * math.log(1.0 / self.eps)) if self.eps < 1.0 else u
            xb = lo + rng.standard_exponential(batch) / model.lam
            x = np.where(piece_a, xa, xb)
            keep = rng.random(batch) < self._accept_prob(x, piece_a)
            out.append(x[keep])
            have += int(keep.sum())
        return np.concatenate(out)[:size]


class PathwiseTrajectory:
    """Coupled trajectory n -> K_n on one realisation of the truncated range.

    Sample points and jumps come from two independent child streams, and jumps
    are generated in fixed batches, so incremental :meth:`extend` calls and a
    single :meth:`advance_to` call produce identical trajectories.  Not safe
    for concurrent mutation.
    """

    def __init__(self, model: LevyModel, eps: float, rng: np.random.Generator,
                 jump_batch: int = 256):
        self.jumps = JumpSampler(model, eps)
        self._jump_rng, self._point_rng = rng.spawn(2)
        self._batch = jump_batch
        self.levels = np.zeros(1)
        self._occupied = set()
        self.n = 0
        self.K = 0

    def _cover(self, x: float):
        while self.levels[-1] <= x:
            steps = self.jumps.sample(self._jump_rng, self._batch)
            self.levels = np.concatenate([self.levels, self.levels[-1] + np.cumsum(steps)])

    def extend(self) -> int:
        """Add one sample point and return the updated K."""
        e = float(self._point_rng.standard_exponential())
        self._cover(e)
        gap = bisect_right(self.levels, e)
        if gap not in self._occupied:
            self._occupied.add(gap)
            self.K += 1
        self.n += 1
        return self.K

    def advance_to(self, n_max: int) -> np.ndarray:
        """Add points up to ``n_max``; returns K_n for n = (current + 1)..n_max."""
        k = n_max - self.n
        if k <= 0:
            return np.zeros(0, dtype=np.int64)
        e = self._point_rng.standard_exponential(k)
        self._cover(float(e.max()))
        gaps = np.searchsorted(self.levels, e, side="right")
        _, first = np.unique(gaps, return_index=True)
        new = np.zeros(k, dtype=bool)
        new[first] = True
        occ = self._occupied
        if occ:
            new &= ~np.isin(gaps, np.fromiter(occ, dtype=np.int64, count=len(occ)))
        occ.update(gaps[new].tolist())
        out = self.K + np.cumsum(new)
        self.K = int(out[-1])
        self.n = n_max
        return out


def sample_Kn_pathwise(model: LevyModel, n: int, eps: float, rng: np.random.Generator) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    traj = PathwiseTrajectory(model, eps, rng)
    return int(traj.advance_to(n)[-1])


def truncation_bias_bound(model: LevyModel, n: int, eps: float) -> float:
    """int_{(0, eps)} (1 - exp(-n (1 - e^{-x}))) nu(dx)."""
    if eps <= 0:
        return 0.0

    def g(x):
        return -np.expm1(-n * -np.expm1(-x))

    cfg = None if model.is_cp else QuadratureConfig(abs_tol=1e-14, rel_tol=1e-10)
    return lm.integrate_nu(model, g, upper=eps, knee=1.0 / max(n, 1), cfg=cfg)


def occupancy_bias_bound(model: LevyModel, n: int, eps: float) -> float:
    """Rigorous bound on E K_n - E K_n(eps): n int_{(0,eps)} (1 - e^{-x}) nu(dx) / Phi_L(1).

    A gap of width x opened at level s is occupied with probability at most
    n e^{-s} (1 - e^{-x}); integrating against the renewal measure U of the
    subordinator, whose Laplace transform is 1/Phi_L, gives the factor
    1/Phi_L(1).  :func:`truncation_bias_bound` lacks this occupation-time
    factor and can understate the bias when mu is small.
    """
    if eps <= 0:
        return 0.0

    def g(x):
        return -np.expm1(-x)

    cfg = None if model.is_cp else QuadratureConfig(abs_tol=1e-16, rel_tol=1e-10)
    mass = lm.integrate_nu(model, g, upper=eps, knee=min(eps, 1.0), cfg=cfg)
    return n * mass / lm.laplace_exponent_int(model, 1)


def choose_epsilon(model: LevyModel, n: int, target: float = 0.5, bound=None) -> float:
    """Largest eps (to 1% in log scale) with ``bound(model, n, eps) <= target``.

    ``bound`` defaults to :func:`occupancy_bias_bound`.
    """
    if model.is_cp:
        return 0.0
    bound = bound or occupancy_bias_bound
    lo, hi = -60.0, 0.0  # natural-log bracket
    if bound(model, n, math.exp(hi)) <= target:
        return 1.0
    while hi - lo > 0.01:
        mid = 0.5 * (lo + hi)
        if bound(model, n, math.exp(mid)) <= target:
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


# --- compound-Poisson approximation sum ----------------------------------------

def cp_block_count_approx(jump: lm.JumpDist, t: float, rng: np.random.Generator) -> int:
    """sum_k 1{xi_1 + ... + xi_{k-1} + |log(1 - e^{-xi_k})| <= t}."""
    if t <= 0:
        return 0
    chunk = max(64, int(1.1 * t / jump.mean) + 64)
    count = 0
    base = 0.0
    while base <= t:
        xi = np.asarray(jump.sample(rng, chunk), dtype=float)
        csum = base + np.cumsum(xi)
        before = np.concatenate([[base], csum[:-1]])
        eta = -np.log(-np.expm1(-xi))
        live = before <= t
        count += int(np.count_nonzero(live & (before + eta <= t)))
        base = float(csum[-1])
    return count


# --- inverse subordinator and A_1 -----------------------------------------------

@dataclass(frozen=True)
class InversePath:
    """S^<-(y) on a grid of levels.

    ``kind="step"``: right-continuous, equal to ``values[k]`` on
    ``[grid[k], grid[k+1])``.  ``kind="linear"``: linear interpolation.  In
    both cases ``values[0]`` is an atom of dS^<- at ``grid[0]``.
    """

    grid: np.ndarray
    values: np.ndarray
    eps: float = 0.0
    kind: str = "step"
    upper: float | None = None  # right end of the levels the path is valid on

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape or g.ndim != 1 or len(g) == 0:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be increasing")
        if v[0] < 0 or np.any(np.diff(v) < 0):
            raise ValueError("values must be nonnegative and nondecreasing")
        if self.kind not in ("step", "linear"):
            raise ValueError(f"unknown path kind {self.kind!r}")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if self.upper is None:
            object.__setattr__(self, "upper", float(g[-1]))


def simulate_inverse_path(model: LevyModel, eps: float, y_max: float,
                          rng: np.random.Generator) -> InversePath:
    """Step path of S^<- on [0, y_max] for the eps-truncated subordinator."""
    sampler = JumpSampler(model, eps)
    rate = lm.tail_mass(model, eps)
    jump_rng, time_rng = rng.spawn(2)
    levels = [0.0]
    times = []
    t = 0.0
    while levels[-1] <= y_max:
        steps = sampler.sample(jump_rng, 256)
        gaps = time_rng.standard_exponential(256) / rate
        for s, dt in zip(steps, gaps):
            t += dt
            times.append(t)
            levels.append(levels[-1] + s)
            if levels[-1] > y_max:
                break
    # S^<-(y) = time of the first jump carrying the level above y
    return InversePath(np.array(levels[:-1]), np.array(times), eps=eps, kind="step",
                       upper=levels[-1])


def conditional_mean_A1(model: LevyModel, t: float, path: InversePath) -> float:
    """int_{[0, t]} phi(t - x) dS^<-(x) against the given path."""
    g, v = path.grid, path.values
    if path.upper < t:
        raise ValueError(f"path covers levels up to {path.upper}, not t={t}")
    if t < g[0]:
        return 0.0
    mass0 = v[0] * lm.phi_of_log(model, t - g[0])
    if path.kind == "step":
        idx = np.nonzero(g <= t)[0]
        inc = np.diff(v)[idx[1:] - 1] if len(idx) > 1 else np.zeros(0)
        terms = [mass0] + [d * lm.phi_of_log(model, t - g[k]) for d, k in zip(inc, idx[1:]) if d != 0]
        return math.fsum(terms)
    cfg = QuadratureConfig(abs_tol=1e-12, rel_tol=1e-12)

    def f(y):
        return np.array([lm.phi_of_log(model, t - float(yy)) for yy in np.atleast_1d(y)])

    terms = [mass0]
    for k in range(len(g) - 1):
        lo, hi = g[k], min(g[k + 1], t)
        if lo >= t:
            break
        slope = (v[k + 1] - v[k]) / (g[k + 1] - g[k])
        if slope != 0:
            terms.append(slope * integrate_adaptive(f, lo, hi, cfg))
    return math.fsum(terms)

