import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from regen_lil import levy_models as lm
from regen_lil.special_math import EULER_GAMMA

GAMMA = lm.LevyModel.gamma()
GAMMA_LIKE = lm.LevyModel.gamma_like()
CP_EXP = lm.LevyModel.compound_poisson(lm.JumpDist.exponential(1.0))


def mp_phi_gamma(t, theta=1, lam=1):
    """High-precision Phi for the gamma measure, y = 1 - e^{-x} substitution."""
    mpmath.mp.dps = 30
    f = lambda y: (1 - mpmath.exp(-t * y)) * (1 - y) ** (lam - 1) / -mpmath.log1p(-y)
    pts = sorted({0, min(1 / mpmath.mpf(t), 0.5), 0.5, 1})
    return float(theta * mpmath.quad(f, pts))


# --- construction and parsing ----------------------------------------------------

def test_family_invariants():
    for m in (GAMMA, GAMMA_LIKE):
        assert m.beta == 1.0 and m.ell_at(123.0) == m.theta
    with pytest.raises(lm.ModelError):
        lm.LevyModel.gamma(theta=0)
    with pytest.raises(lm.ModelError):
        lm.LevyModel.gamma_like(lam=-1)
    with pytest.raises(lm.ModelError):
        CP_EXP.require_beta()
    with pytest.raises(lm.ModelError):
        lm.theorem_normalization(CP_EXP, 1e4)


@pytest.mark.parametrize("desc,kind", [
    ("kind=gamma theta=1.0 lambda=1.0", lm.GAMMA),
    ("kind=gammalike theta=2 lambda=0.5", lm.GAMMA_LIKE),
    ("kind=cp jump=exp rate=1.0", lm.COMPOUND_POISSON),
    ("kind=cp jump=det value=0.7", lm.COMPOUND_POISSON),
    ("kind=cp jump=table values=0.5,2 probs=0.25,0.75", lm.COMPOUND_POISSON),
])
def test_parse_model_roundtrip(desc, kind):
    m = lm.parse_model(desc)
    assert m.kind == kind
    assert lm.parse_model(m.describe()) == m


@pytest.mark.parametrize("desc", ["kind=weibull", "kind=gamma theta=x", "kind=gamma shape=2",
                                  "kind=cp jump=det", "gamma", "kind=cp jump=table values=1 probs=0.5"])
def test_parse_model_rejects(desc):
    with pytest.raises(lm.ModelError):
        lm.parse_model(desc)


def test_jump_tables():
    j = lm.JumpDist.table([0.5, 2.0], [0.25, 0.75])
    assert j.mean == pytest.approx(1.625)
    assert j.second_moment == pytest.approx(0.25 * 0.25 + 0.75 * 4)
    assert np.allclose(j.survival(np.array([0.1, 1.0, 3.0])), [1.0, 0.75, 0.0])
    x = j.sample(np.random.default_rng(0), 20000)
    assert set(np.unique(x)) == {0.5, 2.0}
    assert np.mean(x == 2.0) == pytest.approx(0.75, abs=0.015)


# --- nu density ------------------------------------------------------------------

def test_nu_density_examples():
    assert lm.nu_density(GAMMA, 1.0) == pytest.approx(0.3678794, abs=1e-7)
    assert lm.nu_density(GAMMA_LIKE, 1.0) == pytest.approx(0.5819767, abs=1e-7)
    with pytest.raises(lm.ModelError):
        lm.nu_density(GAMMA, 0.0)
    with pytest.raises(lm.ModelError):
        lm.nu_density(CP_EXP, 1.0)


@given(st.floats(min_value=1e-6, max_value=50))
@settings(max_examples=100, deadline=None)
def test_nu_density_ratio(x):
    r = lm.nu_density(GAMMA_LIKE, x) / lm.nu_density(GAMMA, x)
    assert r == pytest.approx(x / -math.expm1(-x), rel=1e-12)
    assert r >= 1.0


# --- Phi ---------------------------------------------------------------------------

def test_phi_zero():
    for m in (GAMMA, GAMMA_LIKE, CP_EXP):
        assert lm.phi(m, 0.0) == 0.0
    with pytest.raises(lm.ModelError):
        lm.phi(GAMMA, -1.0)


@pytest.mark.parametrize("t", [0.5, 10.0, 1e3, 1e6])
def test_phi_gamma_against_high_precision(t):
    assert lm.phi(GAMMA, t) == pytest.approx(mp_phi_gamma(t), abs=1e-9)


def test_phi_gamma_at_1e6_is_log_t():
    # the quadrature value; log 1e6 + EULER_GAMMA = 14.39273 is off by gamma
    val = lm.phi(GAMMA, 1e6)
    assert val == pytest.approx(13.81551, abs=1e-3)
    assert abs(val - (math.log(1e6) + EULER_GAMMA)) > 0.5


def test_phi_gamma_like_at_1e6():
    assert lm.phi(GAMMA_LIKE, 1e6) == pytest.approx(14.39273, abs=1e-3)


@pytest.mark.parametrize("theta,lam", [(1, 1), (2, 3), (0.5, 0.7)])
def test_phi_gamma_like_scipy_oracle(theta, lam):
    m = lm.LevyModel.gamma_like(theta, lam)
    t = 250.0
    f = lambda y: theta * (1 - math.exp(-t * y)) * (1 - y) ** (lam - 1) / y
    ref, _ = integrate.quad(f, 0, 1, points=[1 / t], limit=200, epsabs=1e-13, epsrel=1e-12)
    assert lm.phi(m, t) == pytest.approx(ref, rel=1e-9)


def test_phi_compound_poisson_exp():
    # E[1 - exp(-t(1 - e^{-xi}))], xi ~ Exp(1): 1 - (1 - e^{-t})/t
    for t in (0.3, 4.0, 90.0):
        assert lm.phi(CP_EXP, t) == pytest.approx(1 - (-math.expm1(-t)) / t, abs=1e-10)


def test_phi_asymptotic_expansions_converge():
    ts = [1e2, 1e3, 1e4, 1e5, 1e6]
    for m in (GAMMA, GAMMA_LIKE, lm.LevyModel.gamma(2, 3)):
        gaps = [abs(lm.phi(m, t) - lm.phi_asymptotic(m, t)) for t in ts]
        assert all(b < a or b < 1e-12 for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-4
    assert lm.phi_asymptotic(GAMMA, 1e6, euler_shift=True) == pytest.approx(14.39273, abs=1e-5)


def test_phi_monotone_concave():
    for m in (GAMMA, GAMMA_LIKE, CP_EXP):
        u = np.linspace(0, 30, 61)
        w = np.array([lm.phi(m, t) for t in u])
        assert np.all(np.diff(w) >= 0)
        assert np.all(np.diff(w, 2) <= 1e-9)


# --- derivatives -------------------------------------------------------------------

def test_phi_log_derivative_examples():
    assert abs(lm.phi_log_derivative(GAMMA, 20.0) - 1) < 0.05
    for t in (-3.0, 0.0, 2.0, 15.0):
        assert lm.phi_log_derivative(GAMMA_LIKE, t) >= 0
    h = 1e-4
    fd = (lm.phi_of_log(GAMMA, 5 + h) - lm.phi_of_log(GAMMA, 5 - h)) / (2 * h)
    assert lm.phi_log_derivative(GAMMA, 5.0) == pytest.approx(fd, abs=1e-6)


# --- moments -------------------------------------------------------------------------

def test_moment_examples():
    m = lm.moments(lm.LevyModel.gamma(2, 3))
    assert (m.mu, m.sigma2) == pytest.approx((2 / 3, 2 / 9))
    m = lm.moments(GAMMA_LIKE)
    assert (m.mu, m.sigma2) == pytest.approx((1.6449341, 2.4041138), abs=1e-7)
    m = lm.moments(CP_EXP)
    assert (m.mu, m.sigma2) == (1.0, 2.0)


@pytest.mark.parametrize("theta,lam", [(1, 1), (2, 3), (0.5, 0.7)])
def test_moments_quadrature(theta, lam):
    for m in (lm.LevyModel.gamma(theta, lam), lm.LevyModel.gamma_like(theta, lam)):
        a, b = lm.moments(m), lm.moments_quadrature(m)
        assert b.mu == pytest.approx(a.mu, abs=1e-8)
        assert b.sigma2 == pytest.approx(a.sigma2, abs=1e-8)


# --- integer Laplace exponent ---------------------------------------------------------

def test_laplace_exponent_examples():
    assert lm.laplace_exponent_int(GAMMA, 0) == 0.0
    assert lm.laplace_exponent_int(GAMMA, 1) == pytest.approx(math.log(2), abs=1e-12)
    assert lm.laplace_exponent_int(GAMMA_LIKE, 1) == pytest.approx(1.0, abs=1e-14)
    assert lm.laplace_exponent_int(CP_EXP, 4) == pytest.approx(0.8)


@pytest.mark.parametrize("model", [GAMMA, GAMMA_LIKE, lm.LevyModel.gamma_like(2, 0.3),
                                   lm.LevyModel.compound_poisson(lm.JumpDist.deterministic(0.4))])
@pytest.mark.parametrize("n", [1, 3, 40])
def test_laplace_exponent_quadrature(model, n):
    ref = lm.integrate_nu(model, lambda x: -np.expm1(-n * x))
    assert lm.laplace_exponent_int(model, n) == pytest.approx(ref, rel=1e-9)


# --- centering and normalizations -----------------------------------------------------

def test_centering_examples():
    assert lm.centering(GAMMA, 1.0) == 0.0
    assert lm.centering(GAMMA, 1.0 + 1e-12) == pytest.approx(0.0, abs=1e-9)
    c = lm.centering(GAMMA, 1e4)
    assert abs(c / 42.42 - 1) < 0.05
    vals = [lm.centering(GAMMA_LIKE, n) for n in (2, 10, 100, 1e3)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_centering_leading_order():
    for n, tol in ((1e3, 0.10), (1e6, 0.03), (1e9, 0.01)):
        assert abs(lm.centering(GAMMA, n) / (math.log(n) ** 2 / 2) - 1) < tol


def test_theorem_normalization():
    n = 1e6
    clt = lm.theorem_normalization(GAMMA, n, lm.CLT)
    assert clt == pytest.approx(math.sqrt(math.log(n)) * lm.phi(GAMMA, n), rel=1e-12)
    # composition of the moment and Phi oracles: 3.7169 * 13.8155
    assert clt == pytest.approx(51.35, abs=0.01)
    lil = lm.theorem_normalization(GAMMA, n, lm.LIL)
    assert lil / clt == pytest.approx(math.sqrt(2 / 3 * math.log(math.log(math.log(n)))), rel=1e-12)
    for m in (GAMMA, GAMMA_LIKE):
        for k in (16, 1e3, 1e8):
            assert lm.theorem_normalization(m, k, lm.LIL) > 0
    with pytest.raises(lm.ModelError):
        lm.theorem_normalization(GAMMA, 15.0, lm.LIL)
    with pytest.raises(lm.ModelError):
        lm.theorem_normalization(GAMMA, 1.0, lm.CLT)


def test_corollary_constants():
    n = 1e12
    general = lm.theorem_normalization(GAMMA, n, lm.LIL)
    with_factor = lm.corollary_normalization(GAMMA, n, printed=False)
    as_stated = lm.corollary_normalization(GAMMA, n, printed=True)
    assert as_stated / with_factor == pytest.approx(math.sqrt(3), rel=1e-12)
    assert with_factor == pytest.approx(general, rel=1e-3)
    assert "1/3" in lm.CONSTANT_NOTE


def test_cp_centering_and_normalization():
    j = lm.JumpDist.exponential(1.0)
    for t in (0.5, 10.0, 300.0):
        assert lm.cp_centering(j, t) == pytest.approx(t - 1 + math.exp(-t), abs=1e-9)
    assert lm.cp_centering(j, -1.0) == 0.0
    assert lm.cp_normalization(j, 100.0, lm.CLT) == pytest.approx(10.0)
    d = lm.JumpDist.deterministic(1.0)
    # eta = -log(1 - e^{-1}) deterministic; centering is (t - eta)^+
    eta = -math.log(-math.expm1(-1.0))
    assert lm.cp_centering(d, 5.0) == pytest.approx(5.0 - eta)


# --- de Haan ----------------------------------------------------------------------------

def test_de_haan_examples():
    rep = lm.check_de_haan(GAMMA, [1.0, 2.0], [1e8])
    (c1, _, r1, _), (c2, _, r2, lc2) = rep.increments
    assert r1 == 0.0
    assert abs(r2 - math.log(2)) < 1e-3
    rep = lm.check_de_haan(GAMMA_LIKE, [math.e], [1e8])
    assert abs(rep.increments[0][2] - 1) < 1e-3
    assert rep.max_derivative_gap() < 1e-3
    with pytest.raises(lm.ModelError):
        lm.check_de_haan(GAMMA, [2.0], [2.0])
    with pytest.raises(lm.ModelError):
        lm.check_de_haan(GAMMA, [2.0], [1e5, 1e4])
