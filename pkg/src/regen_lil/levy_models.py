"""Levy-measure models and the functionals built on them.

Three families are supported: compound Poisson (finite measure, normalised to
the law of a single jump), the gamma measure ``theta * exp(-lam x) / x`` and
the gamma-like measure ``theta * exp(-lam x) / (1 - exp(-x))``.
"""
from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .special_math import (
    EULER_GAMMA,
    QuadratureConfig,
    digamma_increment,
    integrate_adaptive,
    polygamma,
)

GAMMA = "gamma"
GAMMA_LIKE = "gammalike"
COMPOUND_POISSON = "cp"
KINDS = (GAMMA, GAMMA_LIKE, COMPOUND_POISSON)


class ModelError(ValueError):
    """Operation not defined for the given model or argument."""


@dataclass(frozen=True)
class JumpDist:
    """Law of a compound-Poisson jump.

    ``kind`` is ``"exp"`` (rate), ``"det"`` (a point mass at ``value``) or
    ``"table"`` (finitely many atoms ``values`` with weights ``probs``).
    """

    kind: str
    rate: float = 1.0
    value: float = 1.0
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind == "exp":
            if not self.rate > 0:
                raise ModelError("exponential jump rate must be positive")
        elif self.kind == "det":
            if not self.value > 0:
                raise ModelError("deterministic jump size must be positive")
        elif self.kind == "table":
            if len(self.values) == 0 or len(self.values) != len(self.probs):
                raise ModelError("table jump needs matching values and probs")
            if min(self.values) <= 0 or min(self.probs) < 0:
                raise ModelError("table jump values must be positive, probs nonnegative")
            if abs(math.fsum(self.probs) - 1.0) > 1e-12:
                raise ModelError("table jump probs must sum to 1")
        else:
            raise ModelError(f"unknown jump distribution {self.kind!r}")

    @classmethod
    def exponential(cls, rate=1.0):
        return cls("exp", rate=float(rate))

    @classmethod
    def deterministic(cls, value):
        return cls("det", value=float(value))

    @classmethod
    def table(cls, values, probs):
        return cls("table", values=tuple(float(v) for v in values),
                   probs=tuple(float(p) for p in probs))

    @property
    def mean(self) -> float:
        if self.kind == "exp":
            return 1.0 / self.rate
        if self.kind == "det":
            return self.value
        return math.fsum(v * p for v, p in zip(self.values, self.probs))

    @property
    def second_moment(self) -> float:
        if self.kind == "exp":
            return 2.0 / self.rate ** 2
        if self.kind == "det":
            return self.value ** 2
        return math.fsum(v * v * p for v, p in zip(self.values, self.probs))

    @property
    def variance(self) -> float:
        if self.kind == "exp":
            return 1.0 / self.rate ** 2
        return max(self.second_moment - self.mean ** 2, 0.0)

    def expect(self, g: Callable, upper: float = math.inf, points: Sequence[float] = (),
               cfg: QuadratureConfig | None = None) -> float:
        """E[g(xi); xi < upper] with ``g`` vectorised."""
        if self.kind == "exp":
            r = self.rate
            cfg = cfg or QuadratureConfig(tail_scale=1.0 / r)
            return integrate_adaptive(lambda x: r * np.exp(-r * x) * g(x), 0.0, upper, cfg,
                                      points=points)
        if self.kind == "det":
            return float(g(np.array([self.value]))[0]) if self.value < upper else 0.0
        vals = np.array(self.values)
        probs = np.array(self.probs)
        keep = vals < upper
        if not keep.any():
            return 0.0
        return math.fsum(probs[keep] * g(vals[keep]))

    def survival(self, x):
        """P{xi >= x}, vectorised."""
        x = np.asarray(x, dtype=float)
        if self.kind == "exp":
            return np.exp(-self.rate * np.maximum(x, 0.0))
        if self.kind == "det":
            return (self.value >= x).astype(float)
        vals = np.array(self.values)[:, None]
        probs = np.array(self.probs)[:, None]
        return (probs * (vals >= x.reshape(1, -1))).sum(axis=0).reshape(x.shape)

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "exp":
            return rng.standard_exponential(size) / self.rate
        if self.kind == "det":
            return np.full(size, self.value) if size is not None else self.value
        return rng.choice(np.array(self.values), size=size, p=np.array(self.probs))

    def describe(self) -> str:
        if self.kind == "exp":
            return f"jump=exp rate={self.rate!r}"
        if self.kind == "det":
            return f"jump=det value={self.value!r}"
        vals = ",".join(repr(v) for v in self.values)
        probs = ",".join(repr(p) for p in self.probs)
        return f"jump=table values={vals} probs={probs}"


@dataclass(frozen=True)
class ModelMoments:
    mu: float
    sigma2: float


@dataclass(frozen=True)
class LevyModel:
    """Parametric Levy measure.  Build with the classmethod constructors."""

    kind: str
    theta: float = 1.0
    lam: float = 1.0
    jump: JumpDist | None = None
    beta: float | None = None
    _ell: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}")
        if self.kind == COMPOUND_POISSON:
            if self.jump is None:
                raise ModelError("compound Poisson model needs a jump distribution")
        else:
            if not (self.theta > 0 and self.lam > 0):
                raise ModelError("theta and lambda must be positive")
            if self.beta is None:
                object.__setattr__(self, "beta", 1.0)

    @classmethod
    def gamma(cls, theta=1.0, lam=1.0):
        return cls(GAMMA, float(theta), float(lam))

    @classmethod
    def gamma_like(cls, theta=1.0, lam=1.0):
        return cls(GAMMA_LIKE, float(theta), float(lam))

    @classmethod
    def compound_poisson(cls, jump: JumpDist):
        return cls(COMPOUND_POISSON, jump=jump)

    @property
    def is_cp(self) -> bool:
        return self.kind == COMPOUND_POISSON

    def ell_at(self, t):
        """Slowly varying factor of phi; constant theta for both gamma families."""
        self.require_beta()
        if self._ell is not None:
            return self._ell(t)
        return self.theta

    def require_beta(self):
        if self.is_cp:
            raise ModelError("compound Poisson models have no regular-variation index")

    def describe(self) -> str:
        if self.is_cp:
            return f"kind=cp {self.jump.describe()}"
        return f"kind={self.kind} theta={self.theta!r} lambda={self.lam!r}"

    def with_theta(self, theta: float) -> "LevyModel":
        return LevyModel(self.kind, float(theta), self.lam, self.jump)


def parse_model(desc: str) -> LevyModel:
    """Parse ``kind=gamma theta=1 lambda=1`` style descriptors."""
    fields = {}
    for tok in shlex.split(desc):
        if "=" not in tok:
            raise ModelError(f"malformed model token {tok!r}")
        k, v = tok.split("=", 1)
        fields[k.strip().lower()] = v.strip()
    kind = fields.pop("kind", None)
    try:
        if kind in (GAMMA, GAMMA_LIKE):
            theta = float(fields.pop("theta", 1.0))
            lam = float(fields.pop("lambda", 1.0))
            model = LevyModel(kind, theta, lam)
        elif kind == COMPOUND_POISSON:
            jk = fields.pop("jump", "exp")
            if jk == "exp":
                jump = JumpDist.exponential(float(fields.pop("rate", 1.0)))
            elif jk == "det":
                jump = JumpDist.deterministic(float(fields.pop("value")))
            elif jk == "table":
                vals = [float(x) for x in fields.pop("values").split(",")]
                probs = [float(x) for x in fields.pop("probs").split(",")]
                jump = JumpDist.table(vals, probs)
            else:
                raise ModelError(f"unknown jump distribution {jk!r}")
            model = LevyModel.compound_poisson(jump)
        else:
            raise ModelError(f"unknown model kind {kind!r}")
    except KeyError as exc:
        raise ModelError(f"missing model field {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"bad numeric value in model descriptor: {exc}") from None
    if fields:
        raise ModelError(f"unexpected model fields: {', '.join(sorted(fields))}")
    return model


# --- densities and quadrature against nu ------------------------------------

def nu_density(model: LevyModel, x):
    """Density of the Levy measure at ``x > 0`` (gamma families only)."""
    if model.is_cp:
        raise ModelError("compound Poisson models expose jump_dist, not a density")
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise ModelError("nu_density requires x > 0")
    if model.kind == GAMMA:
        out = model.theta * np.exp(-model.lam * xa) / xa
    else:
        out = model.theta * np.exp(-model.lam * xa) / -np.expm1(-xa)
    return float(out) if out.ndim == 0 else out


def _knee_points(scale: float) -> list[float]:
    """Decade breakpoints from ``scale`` up to 1, used where the integrand
    switches behaviour near ``x ~ scale``."""
    if not scale < 1:
        return [1.0]
    pts = []
    p = scale
    while p < 1.0:
        pts.append(p)
        p *= 10.0
    pts.append(1.0)
    return pts


def integrate_nu(model: LevyModel, g: Callable, upper: float = math.inf,
                 knee: float = 1.0, cfg: QuadratureConfig | None = None,
                 lower: float = 0.0) -> float:
    """Integral of ``g`` against nu over ``(lower, upper)``.

    ``g`` must be vectorised.  ``knee`` marks the scale at which ``g`` changes
    regime, which seeds geometric breakpoints below it.
    """
    pts = [p for p in _knee_points(knee) if lower < p < upper]
    if model.is_cp:
        if lower > 0:
            return (model.jump.expect(g, upper=upper, points=pts, cfg=cfg)
                    - model.jump.expect(g, upper=lower, points=pts, cfg=cfg))
        return model.jump.expect(g, upper=upper, points=pts, cfg=cfg)
    cfg = cfg or QuadratureConfig(tail_scale=1.0 / model.lam)
    theta, lam = model.theta, model.lam
    if model.kind == GAMMA:
        def f(x):
            return g(x) * (theta * np.exp(-lam * x) / x)
    else:
        def f(x):
            return g(x) * (theta * np.exp(-lam * x) / -np.expm1(-x))
    return integrate_adaptive(f, lower, upper, cfg, points=pts)


def tail_mass(model: LevyModel, eps: float) -> float:
    """nu([eps, inf)), the rate of jumps of size at least ``eps``."""
    if model.is_cp:
        return float(model.jump.survival(eps)) if eps > 0 else 1.0
    if not eps > 0:
        return math.inf
    return integrate_nu(model, np.ones_like, lower=eps)


# --- Phi and friends ----------------------------------------------------------

def phi(model: LevyModel, t: float) -> float:
    """Phi(t) = int (1 - exp(-t (1 - e^{-x}))) nu(dx), by quadrature."""
    if t < 0:
        raise ModelError("Phi requires t >= 0")
    if t == 0:
        return 0.0

    def g(x):
        return -np.expm1(-t * -np.expm1(-x))

    return integrate_nu(model, g, knee=1.0 / t)


def phi_of_log(model: LevyModel, u: float) -> float:
    """phi(u) = Phi(e^u)."""
    return phi(model, math.exp(u))


def phi_prime(model: LevyModel, t: float) -> float:
    """Phi'(t) = int (1 - e^{-x}) exp(-t (1 - e^{-x})) nu(dx)."""
    if t < 0:
        raise ModelError("Phi' requires t >= 0")

    def g(x):
        y = -np.expm1(-x)
        return y * np.exp(-t * y)

    return integrate_nu(model, g, knee=1.0 / t if t > 0 else 1.0)


def phi_log_derivative(model: LevyModel, t: float) -> float:
    """d/dt Phi(e^t) = e^t Phi'(e^t)."""
    u = math.exp(t)
    return u * phi_prime(model, u)


def phi_asymptotic(model: LevyModel, t: float, euler_shift: bool = False) -> float:
    """Two-term large-t expansion of Phi for the gamma families.

    Gamma: theta (log t - log lam); gamma-like: theta (log t - psi(lam)).
    Both have error O(1/t).  ``euler_shift=True`` adds theta * EULER_GAMMA to
    the gamma case, the form of the expansion that is sometimes quoted; it
    does not match the quadrature (see tests).
    """
    model.require_beta()
    if model.kind == GAMMA:
        shift = EULER_GAMMA if euler_shift else 0.0
        return model.theta * (math.log(t) + shift - math.log(model.lam))
    return model.theta * (math.log(t) - polygamma(0, model.lam))


def moments(model: LevyModel) -> ModelMoments:
    """Closed-form mean and variance of S(1)."""
    if model.kind == GAMMA:
        return ModelMoments(model.theta / model.lam, model.theta / model.lam ** 2)
    if model.kind == GAMMA_LIKE:
        return ModelMoments(model.theta * polygamma(1, model.lam),
                            -model.theta * polygamma(2, model.lam))
    j = model.jump
    return ModelMoments(j.mean, j.second_moment)


def moments_quadrature(model: LevyModel) -> ModelMoments:
    """Mean and variance of S(1) by direct quadrature of x nu(dx), x^2 nu(dx)."""
    cfg = None
    if not model.is_cp:
        cfg = QuadratureConfig(abs_tol=1e-13, rel_tol=1e-12, tail_scale=1.0 / model.lam)
    mu = integrate_nu(model, lambda x: x, cfg=cfg)
    s2 = integrate_nu(model, lambda x: x * x, cfg=cfg)
    return ModelMoments(mu, s2)


def laplace_exponent_int(model: LevyModel, n: int) -> float:
    """int (1 - e^{-n x}) nu(dx) at a nonnegative integer ``n``."""
    if n < 0:
        raise ModelError("n must be nonnegative")
    if n == 0:
        return 0.0
    if model.kind == GAMMA:
        return model.theta * math.log1p(n / model.lam)
    if model.kind == GAMMA_LIKE:
        # sum over the geometric expansion of 1/(1-e^{-x}): theta * sum_k 1/(lam+k)
        return model.theta * digamma_increment(model.lam, n)
    j = model.jump
    if j.kind == "exp":
        return n / (n + j.rate)
    return j.expect(lambda x: -np.expm1(-n * x))


def centering(model: LevyModel, n: float) -> float:
    """mu^{-1} int_1^n Phi(x)/x dx, integrated as mu^{-1} int_0^{log n} phi(u) du."""
    if n < 1:
        raise ModelError("centering requires n >= 1")
    if n == 1:
        return 0.0
    mu = moments(model).mu
    cfg = QuadratureConfig(abs_tol=1e-9, rel_tol=1e-11)

    def f(u):
        return np.array([phi_of_log(model, float(v)) for v in np.atleast_1d(u)])

    return integrate_adaptive(f, 0.0, math.log(n), cfg) / mu


LIL = "LIL"
CLT = "CLT"


def theorem_normalization(model: LevyModel, n: float, variant: str = LIL) -> float:
    """Normalising sequence of the main LIL (variant LIL) or the CLT (variant CLT)."""
    model.require_beta()
    m = moments(model)
    scale = m.sigma2 / m.mu ** 3
    if variant == LIL:
        if not n > math.exp(math.e):
            raise ModelError("LIL normalization needs n > e^e")
        lll = math.log(math.log(math.log(n)))
        inner = 2.0 * scale / (2.0 * model.beta + 1.0) * math.log(n) * lll
    elif variant == CLT:
        if not n > 1:
            raise ModelError("CLT normalization needs n > 1")
        inner = scale * math.log(n)
    else:
        raise ModelError(f"unknown variant {variant!r}")
    return math.sqrt(inner) * phi(model, n)


def corollary_centering(model: LevyModel, n: float) -> float:
    """Leading-order centering (log n)^2 / (2 mu / theta) for the gamma families."""
    model.require_beta()
    ln = math.log(n)
    if model.kind == GAMMA:
        return model.lam / 2.0 * ln * ln
    return ln * ln / (2.0 * polygamma(1, model.lam))


def corollary_normalization(model: LevyModel, n: float, printed: bool = True) -> float:
    """Closed-form LIL normalization for the gamma families.

    ``printed=True`` returns the constant as stated for the two families
    (``2 lam (log n)^3 logloglog n`` under the root for the gamma case);
    ``printed=False`` returns what the general formula gives after inserting
    Phi(n) ~ theta log n, which carries the extra factor 1/(2 beta + 1) = 1/3.
    """
    model.require_beta()
    ln = math.log(n)
    lll = math.log(math.log(ln))
    if model.kind == GAMMA:
        c = model.lam
    else:
        c = abs(polygamma(2, model.lam)) / polygamma(1, model.lam) ** 3
    inner = 2.0 * c * ln ** 3 * lll
    if not printed:
        inner /= 2.0 * model.beta + 1.0
    return math.sqrt(inner)


CONSTANT_NOTE = (
    "Closed-form LIL normalizations for the gamma and gamma-like families omit the "
    "factor (2*beta+1)^-1 = 1/3 that the general normalization carries; the general "
    "formula (2 sigma^2 mu^-3 (2 beta+1)^-1 log n logloglog n)^(1/2) Phi(n) is used here "
    "and the two differ by sqrt(3) asymptotically."
)


# --- compound-Poisson approximation sum ---------------------------------------

def cp_centering(jump: JumpDist, t: float) -> float:
    """m^{-1} int_0^t P{|log(1 - e^{-xi})| <= x} dx with m = E xi."""
    if t <= 0:
        return 0.0

    def p(x):
        # |log(1-e^{-xi})| <= x  <=>  xi >= -log(1 - e^{-x})
        return jump.survival(-np.log(-np.expm1(-x)))

    if jump.kind == "exp":
        cfg = QuadratureConfig(abs_tol=1e-11, rel_tol=1e-12)
        val = integrate_adaptive(p, 0.0, t, cfg, points=[p_ for p_ in (1.0, 10.0) if p_ < t])
    else:
        # piecewise constant in x: jumps where -log(1-e^{-x}) crosses an atom
        atoms = [jump.value] if jump.kind == "det" else list(jump.values)
        probs = [1.0] if jump.kind == "det" else list(jump.probs)
        # atom a contributes on x >= -log(1 - e^{-a})
        val = math.fsum(pr * max(0.0, t + math.log(-math.expm1(-a))) for a, pr in zip(atoms, probs))
    return val / jump.mean


def cp_normalization(jump: JumpDist, t: float, variant: str = LIL) -> float:
    s2 = jump.variance
    m = jump.mean
    if variant == LIL:
        if not t > math.e:
            raise ModelError("LIL normalization needs t > e")
        return math.sqrt(2.0 * s2 / m ** 3 * t * math.log(math.log(t)))
    return math.sqrt(s2 / m ** 3 * t)


# --- de Haan check -------------------------------------------------------------

@dataclass
class DeHaanReport:
    """Rows of (factor, t, increment ratio, log factor) and (t, derivative ratio)."""

    increments: list = field(default_factory=list)
    derivatives: list = field(default_factory=list)

    def max_increment_gap(self) -> float:
        return max((abs(r - lc) for _, _, r, lc in self.increments), default=0.0)

    def max_derivative_gap(self) -> float:
        return max((abs(r - 1.0) for _, r in self.derivatives), default=0.0)


def check_de_haan(model: LevyModel, factors: Sequence[float], t_grid: Sequence[float]) -> DeHaanReport:
    model.require_beta()
    t_grid = list(t_grid)
    if any(t <= math.e for t in t_grid) or any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ModelError("t_grid must be increasing with entries > e")
    if any(c <= 0 for c in factors):
        raise ModelError("factors must be positive")
    rep = DeHaanReport()
    b = model.beta
    for t in t_grid:
        lt = math.log(t)
        denom = b * lt ** (b - 1.0) * model.ell_at(lt)
        base = phi(model, t)
        for c in factors:
            diff = 0.0 if c == 1 else phi(model, c * t) - base
            rep.increments.append((c, t, diff / denom, math.log(c)))
        rep.derivatives.append((t, phi_log_derivative(model, lt) / denom))
    return rep
