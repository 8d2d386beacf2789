"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one ``CRITERION k PASS|FAIL`` line (collected into the
pytest terminal summary) and then asserts.  Criteria that are not attainable
as stated are still run verbatim and fail.

Run alone with ``pytest tests/test_acceptance.py -v`` or as a script:
``python3 tests/test_acceptance.py``.
"""
import math
import sys

import numpy as np
import pytest

from regen_lil import brownian as bl
from regen_lil import composition as ce
from regen_lil import levy_models as lm
from regen_lil import special_math as sm
from regen_lil.extremes import RunningExtremes
from regen_lil.harness import experiments as ex
from regen_lil.harness import records as rec
from regen_lil.harness.stats import ks_statistic
from regen_lil.validation import CLT_TREND_BANDS

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # script mode outside the tests directory
    ACCEPTANCE_LINES = []

GAMMA = lm.LevyModel.gamma()
GAMMA_LIKE = lm.LevyModel.gamma_like()
EXP1 = lm.JumpDist.exponential(1.0)
CP_EXP = lm.LevyModel.compound_poisson(EXP1)
T_GRID = [1e2, 1e3, 1e4, 1e5, 1e6]


def report(k, ok, detail):
    line = f"CRITERION {k:<2} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def tv(emp, law):
    return 0.5 * np.abs(emp - law).sum()


# 1 ---------------------------------------------------------------------------------------------

def test_criterion_01_gamma_phi_expansion():
    """Stated form log t + Euler-gamma; fails because the quadrature value is log t + O(1/t)."""
    gaps = [abs(lm.phi(GAMMA, t) - (math.log(t) + sm.EULER_GAMMA)) for t in T_GRID]
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    ok = gaps[-1] <= 1e-3 and decreasing
    corrected = [abs(lm.phi(GAMMA, t) - lm.phi_asymptotic(GAMMA, t)) for t in T_GRID]
    report(1, ok, f"|Phi - (log t + gamma)| at 1e6 = {gaps[-1]:.3e} (tol 1e-3), decreasing={decreasing}; "
                  f"against log t - log lambda: {corrected[-1]:.1e}")
    assert ok


def test_criterion_01_companion_corrected_expansion():
    gaps = [abs(lm.phi(GAMMA, t) - lm.phi_asymptotic(GAMMA, t)) for t in T_GRID]
    assert gaps[-1] <= 1e-3
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


# 2 ---------------------------------------------------------------------------------------------

def test_criterion_02_gamma_like_phi_expansion():
    gaps = {}
    for lam in (1.0, 2.0):
        m = lm.LevyModel.gamma_like(1.0, lam)
        gaps[lam] = abs(lm.phi(m, 1e6) - m.theta * (math.log(1e6) - sm.digamma(lam)))
    ok = max(gaps.values()) <= 1e-3
    report(2, ok, "  ".join(f"lambda={k:g}: {v:.2e}" for k, v in gaps.items()) + " (tol 1e-3)")
    assert ok


# 3 ---------------------------------------------------------------------------------------------

def _zeta_series(s, terms=100_000):
    # partial sum plus Euler-Maclaurin tail
    n = float(terms)
    head = math.fsum(k ** -s for k in range(1, terms + 1))
    tail = n ** (1 - s) / (s - 1) - 0.5 * n ** -s + s * n ** (-s - 1) / 12
    return head + tail


def test_criterion_03_moments():
    worst = 0.0
    for th, la in ((1.0, 1.0), (2.0, 3.0), (0.5, 0.7)):
        g = lm.moments_quadrature(lm.LevyModel.gamma(th, la))
        worst = max(worst, abs(g.mu - th / la), abs(g.sigma2 - th / la ** 2))
        gl = lm.moments_quadrature(lm.LevyModel.gamma_like(th, la))
        worst = max(worst, abs(gl.mu - th * sm.polygamma(1, la)), abs(gl.sigma2 + th * sm.polygamma(2, la)))
    e1 = abs(sm.polygamma(1, 1.0) - _zeta_series(2))
    e2 = abs(sm.polygamma(2, 1.0) + 2 * _zeta_series(3))
    e_pi = abs(_zeta_series(2) - math.pi ** 2 / 6)
    ok = worst <= 1e-8 and max(e1, e2, e_pi) <= 1e-10
    report(3, ok, f"moments max error {worst:.1e} (tol 1e-8); psi'(1) {e1:.1e}, psi''(1) {e2:.1e} (tol 1e-10)")
    assert ok


# 4 ---------------------------------------------------------------------------------------------

def test_criterion_04_decrement_rows():
    models = [GAMMA, GAMMA_LIKE, lm.LevyModel.gamma(2.0, 0.5), lm.LevyModel.gamma_like(0.7, 3.0), CP_EXP,
              lm.LevyModel.compound_poisson(lm.JumpDist.deterministic(0.3))]
    worst_sum = 0.0
    for m in models:
        for n in list(range(1, 60)) + list(range(60, 501, 20)) + [500]:
            worst_sum = max(worst_sum, abs(ce.decrement_row(m, n).q.sum() - 1))
    worst_closed = max(np.max(np.abs(ce.decrement_row(GAMMA_LIKE, n).q - ce.decrement_row_quadrature(GAMMA_LIKE, n).q))
                       for n in (1, 2, 5, 10, 25, 50, 75, 100))
    l3 = math.log(3)
    row2 = ce.decrement_row(GAMMA, 2).q
    e2 = np.max(np.abs(row2 - [2 * math.log(1.5) / l3, math.log(4 / 3) / l3]))
    ok = worst_sum <= 1e-12 and worst_closed <= 1e-8 and e2 <= 1e-10
    report(4, ok, f"row sums {worst_sum:.1e} (1e-12); closed vs quadrature {worst_closed:.1e} (1e-8); "
                  f"gamma n=2 {e2:.1e} (1e-10)")
    assert ok


# 5 ---------------------------------------------------------------------------------------------

def test_criterion_05_sampler_cross_validation():
    reps, n = 100_000, 10
    g = np.random.default_rng(505)
    dec = np.array([ce.sample_block_count(CP_EXP, n, g) for _ in range(reps)])
    path = np.array([ce.sample_Kn_pathwise(CP_EXP, n, 0.0, g) for _ in range(reps)])
    d_tv = tv(np.bincount(dec, minlength=n + 1) / reps, np.bincount(path, minlength=n + 1) / reps)

    n2, eps, reps2 = 50, 1e-6, 20_000
    a = np.array([ce.sample_block_count(GAMMA_LIKE, n2, g) for _ in range(reps2)])
    b = np.array([ce.sample_Kn_pathwise(GAMMA_LIKE, n2, eps, g) for _ in range(reps2)])
    se = math.sqrt(a.var(ddof=1) / reps2 + b.var(ddof=1) / reps2)
    bound = ce.truncation_bias_bound(GAMMA_LIKE, n2, eps)
    gap = abs(a.mean() - b.mean())
    ok = d_tv <= 0.02 and gap <= bound + 3 * se
    report(5, ok, f"CP TV {d_tv:.4f} (<= 0.02); gamma-like mean gap {gap:.4f} <= bound {bound:.1e} + 3SE {3 * se:.4f}")
    assert ok


# 6 ---------------------------------------------------------------------------------------------

def test_criterion_06_gaussian_variance_identities():
    reps, step = 10_000, 1e-4
    g = np.random.default_rng(606)
    alphas = (0.5, 1.0, 2.0)
    vals = {a: np.empty(reps) for a in alphas}
    for i in range(reps):
        p = bl.simulate_bm(1.0, step, g)
        for a in alphas:
            vals[a][i] = bl.weighted_ito_integral(p, a, 1.0)
    var_ok = True
    parts = []
    for a in alphas:
        target = 1 / (2 * a + 1)
        se = target * math.sqrt(2 / (reps - 1))
        v = vals[a].var(ddof=1)
        var_ok &= abs(v - target) <= 3 * se
        parts.append(f"alpha={a:g}: {v:.4f} vs {target:.4f} (3SE {3 * se:.4f})")

    fine = bl.simulate_bm(1.0, 1e-4, np.random.default_rng(607))
    dec_ok = True
    for a in alphas:
        kern = bl.KernelSpec.power(a)
        errs = []
        for stride in (100, 10, 1):
            p = bl.BrownianPath(1e-4 * stride, fine.values[::stride])
            errs.append(abs(bl.convolve_bm(p, kern, 1.0) - bl.weighted_ito_integral(p, a, 1.0)))
        dec_ok &= errs[0] > errs[1] > errs[2]
        parts.append(f"identity errors alpha={a:g}: " + "/".join(f"{e:.1e}" for e in errs))
    ok = var_ok and dec_ok
    report(6, ok, "; ".join(parts))
    assert ok


# 7 ---------------------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def clt_run():
    bands = CLT_TREND_BANDS
    grid = ",".join(str(n) for n in bands["n_grid"])
    manifest = rec.ExperimentManifest.for_model("clt", lm.parse_model(bands["model"]), grid,
                                                bands["replicates"], master_seed=7)
    return ex.run_clt_experiment(manifest)


def test_criterion_07_clt_trend(clt_run):
    bands = CLT_TREND_BANDS
    per_n = clt_run.metadata["per_n"]
    mean_last = per_n[-1]["mean"]
    ok_i = abs(mean_last) <= bands["mean_abs_max_at_n_max"]
    ks = [row["ks_distance"] for row in per_n]
    inversions = sum(b > a for a, b in zip(ks, ks[1:]))
    ok_ii = inversions <= bands["ks_max_inversions"]
    tc = bands["theta_check"]
    theta = ex.theta_invariance_check(GAMMA_LIKE, tc["n"], tc["replicates"], master_seed=7)
    ok_iii = theta["p_value"] > tc["level"]
    ok = ok_i and ok_ii and ok_iii
    means = "/".join(f"{row['mean']:.3f}" for row in per_n)
    report(7, ok, f"(i) mean at 1e6 {mean_last:.4f} (|.| <= 0.15) {'ok' if ok_i else 'FAIL'}; "
                  f"(ii) KS {'/'.join(f'{d:.3f}' for d in ks)} inversions {inversions} {'ok' if ok_ii else 'FAIL'}; "
                  f"(iii) theta KS p={theta['p_value']:.3f} {'ok' if ok_iii else 'FAIL'}; means {means}")
    assert ok


# 8 ---------------------------------------------------------------------------------------------

def test_criterion_08_cp_clt_scale():
    res = ex.cp_approx_experiment(EXP1, 1e4, 10_000, master_seed=808)
    ok = res["relative_error"] <= 0.2
    report(8, ok, f"variance {res['variance']:.4f} vs s^2 m^-3 = {res['target_variance']:g} "
                  f"(rel error {res['relative_error']:.3f}, tol 0.2)")
    assert ok


# 9 ---------------------------------------------------------------------------------------------

def test_criterion_09_lil_diagnostics():
    checks = {}
    runs = []
    for model, n_max in ((GAMMA, 100_000), (GAMMA_LIKE, 100_000), (CP_EXP, 100_000)):
        m = rec.ExperimentManifest.for_model("lil", model, ex.lil_grid(n_max), 2, 909)
        runs.append(ex.run_lil_experiment(m))
    runs.append(ex.run_experiment(rec.ExperimentManifest("bm_lil", "power", "1e6", 1, 909, alpha=1.0, step=1.0)))

    mono = True
    for r in runs:
        for i, stored in enumerate(r.metadata["running_extremes"]):
            ext = RunningExtremes()
            prev = (math.inf, -math.inf)
            for x in (z.normalized for z in r.records if z.replicate == i):
                ext.append(x)
                mono &= ext.running_min <= prev[0] and ext.running_max >= prev[1]
                prev = (ext.running_min, ext.running_max)
            mono &= ext.as_dict() == stored
    checks["extremes monotone and reproduced"] = mono
    checks["outputs finite and recorded"] = all(r.metadata["all_finite"] and r.records for r in runs)
    checks["coverage histogram emitted"] = all(
        len(e["coverage_visited"]) == e["coverage_grid_size"] for r in runs for e in r.metadata["running_extremes"])
    checks["diagnostic flag"] = all(r.metadata["diagnostic"] is True for r in runs)
    checks["corollary constant note"] = all("corollary_constant_note" in r.metadata and
                                            "normalizations_at_n_max" in r.metadata for r in runs[:2])
    ok = all(checks.values())
    maxes = "/".join(f"{r.metadata['running_extremes'][0]['running_max']:.2f}" for r in runs)
    report(9, ok, "; ".join(f"{k}: {'ok' if v else 'FAIL'}" for k, v in checks.items()) + f"; running max {maxes}")
    assert ok


# 10 --------------------------------------------------------------------------------------------

def test_criterion_10_worker_invariance(tmp_path):
    manifests = [
        rec.ExperimentManifest.for_model("clt", GAMMA, "100,1000,10000", 64, 1010),
        rec.ExperimentManifest.for_model("lil", GAMMA_LIKE, ex.lil_grid(20_000), 8, 1010),
        rec.ExperimentManifest("bm_lil", "power_log", "1e4", 8, 1010, alpha=0.5, step=1.0),
    ]
    same = []
    for k, m in enumerate(manifests):
        for w in (1, 8):
            ex.run_experiment(m, workers=w).persist(tmp_path / f"{k}-{w}")
        same.append((tmp_path / f"{k}-1" / "results.csv").read_bytes() ==
                    (tmp_path / f"{k}-8" / "results.csv").read_bytes())
    ok = all(same)
    report(10, ok, f"byte-identical CSVs with 1 and 8 workers: clt={same[0]} lil={same[1]} bm_lil={same[2]}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
