"""Monte Carlo experiments: CLT ensembles, coupled LIL trajectories, Brownian LIL.

Every replicate draws from its own stream (see :mod:`.streams`) and the
per-replicate work runs through :func:`.pool.map_replicates`, so outputs
are identical for any worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import brownian as bm
from .. import composition as comp
from .. import levy_models as lm
from ..extremes import RunningExtremes
from .pool import map_replicates
from .records import (ExperimentManifest, ManifestError, ResultRecord, parse_int_grid,
                      parse_number_list, persist)
from .stats import ks_statistic, ks_two_sample, sample_summary
from .streams import make_stream, stream_id

BIAS_TARGET = 0.5
LIL_CHECKPOINT_RATIO = 1.05

M_NOTE = ("compound-Poisson normalizations take m = E[xi], the mean jump size; "
          "this identification is an assumption recorded with every such run")
RENEWAL_LIL_NOTE = ("the S^<- diagnostic is scaled by sigma * mu^(-3/2), the renewal-theory "
               "LIL constant; the alternative sigma / mu^3 is not used")
CP_APPROX_NOTE = ("compound-Poisson CLT-scale checks use the approximation sum "
                  "cp_block_count_approx at time t instead of exact K at n = e^t")


class ExperimentError(ValueError):
    pass


@dataclass
class ExperimentResult:
    manifest: ExperimentManifest
    records: list
    metadata: dict = field(default_factory=dict)

    def persist(self, path) -> None:
        persist(self.manifest, self.records, path, self.metadata)


def centering_grid(model: lm.LevyModel, ns, tol: float = 1e-10) -> list[float]:
    """centering(n) for many n at once.

    phi is smooth on [0, log n_max], so a Chebyshev interpolant (degree
    doubled until the integrals settle to ``tol``) replaces one quadrature
    per grid point.
    """
    ns = list(ns)
    if any(n < 1 for n in ns):
        raise ExperimentError("centering needs n >= 1")
    top = math.log(max(ns))
    if top == 0:
        return [0.0] * len(ns)
    mu = lm.moments(model).mu
    us = np.log(np.asarray(ns, dtype=float))

    def f(u):
        return np.array([lm.phi_of_log(model, float(v)) for v in np.atleast_1d(u)])

    prev = None
    for deg in (32, 64, 128, 256):
        cheb = np.polynomial.Chebyshev.interpolate(f, deg, domain=[0.0, top])
        vals = cheb.integ(lbnd=0.0)(us)
        if prev is not None and np.max(np.abs(vals - prev)) <= tol * max(1.0, np.max(np.abs(vals))):
            break
        prev = vals
    else:
        raise ExperimentError("Chebyshev centering did not settle")
    return [float(v) / mu for v in vals]


# --- CLT ---------------------------------------------------------------------

def _clt_replicate(i, model, ns, master_seed, kind):
    rng = make_stream(master_seed, kind, i)
    return [comp.sample_block_count(model, n, rng) for n in ns]


def sample_kn_ensemble(model, ns, replicates, master_seed, kind="clt", workers=None):
    """K_n for every n in ``ns`` and every replicate: array (len(ns), replicates)."""
    rows = map_replicates(_clt_replicate, replicates, (model, list(ns), master_seed, kind), workers)
    return np.array(rows, dtype=np.int64).T


def run_clt_experiment(manifest: ExperimentManifest, workers: int | None = None) -> ExperimentResult:
    manifest.validate()
    if manifest.kind != "clt":
        raise ManifestError(f"expected a clt manifest, got {manifest.kind!r}")
    model = manifest.levy_model()
    if model.is_cp:
        raise ManifestError("the CLT experiment needs a gamma-type model (regular-variation index)")
    ns = parse_int_grid(manifest.n_grid)
    if ns[0] < 10:
        raise ManifestError("clt n_grid entries must be >= 10")
    cent = centering_grid(model, ns)
    norm = [lm.theorem_normalization(model, n, lm.CLT) for n in ns]
    ks = sample_kn_ensemble(model, ns, manifest.replicates, manifest.master_seed, "clt", workers)
    ids = [stream_id("clt", i) for i in range(manifest.replicates)]
    if len(set(ids)) != len(ids):
        raise RuntimeError("stream reuse across replicates")
    limit_var = 1.0 / (2.0 * model.beta + 1.0)
    records = []
    per_n = []
    for j, n in enumerate(ns):
        z = []
        for i in range(manifest.replicates):
            rec = ResultRecord.build(n, int(ks[j, i]), cent[j], norm[j], i, ids[i])
            records.append(rec)
            z.append(rec.normalized)
        row = {"n": n, **sample_summary(z), "centering": cent[j], "normalization": norm[j]}
        if len(z) >= 20 and np.ptp(z) > 0:
            d, ok = ks_statistic(z, limit_var)
            row.update(ks_distance=d, ks_pass_1pct=ok)
        per_n.append(row)
    meta = {
        "experiment": "clt",
        "model": model.describe(),
        "limit_variance": limit_var,
        "sampler": "exact first-block recursion (mixture representation)",
        "per_n": per_n,
        "diagnostic": False,
    }
    return ExperimentResult(manifest, records, meta)


def theta_invariance_check(model: lm.LevyModel, n: int, replicates: int, master_seed: int,
                           factor: float = 2.0, workers: int | None = None) -> dict:
    """Two-sample KS between K_n under theta and under factor * theta.

    The second ensemble uses a different stream family, so the comparison is
    between independent samples.
    """
    a = sample_kn_ensemble(model, [n], replicates, master_seed, "clt", workers)[0]
    b = sample_kn_ensemble(model.with_theta(factor * model.theta), [n], replicates,
                           master_seed, "theta_check", workers)[0]
    d, p, ok = ks_two_sample(a, b)
    return {"n": n, "replicates": replicates, "ks_distance": d, "p_value": p, "pass_1pct": ok,
            "mean_a": float(a.mean()), "mean_b": float(b.mean())}


# --- LIL (coupled trajectories) ------------------------------------------------

def lil_grid(n_max: int, n_min: int = 16, ratio: float = LIL_CHECKPOINT_RATIO) -> str:
    """Geometric checkpoint grid (as a ``geo:`` string) for coupled trajectories."""
    if n_max <= n_min:
        raise ExperimentError(f"n_max must exceed {n_min}")
    k = int(math.ceil(math.log(n_max / n_min) / math.log(ratio))) + 1
    return f"geo:{n_min}:{n_max}:{k}"


def resolve_epsilon(model: lm.LevyModel, n_max: int, eps: float | None) -> tuple[float, dict]:
    """Pick or vet the jump truncation for coupled trajectories.

    Refuses an ``eps`` whose occupancy bias bound exceeds BIAS_TARGET
    expected blocks at ``n_max`` and suggests one that passes.
    """
    if model.is_cp and eps is None:
        eps = 0.0
    elif eps is None or (eps == 0 and not model.is_cp):
        eps = comp.choose_epsilon(model, n_max, BIAS_TARGET)
    bound = comp.occupancy_bias_bound(model, n_max, eps)
    if bound > BIAS_TARGET:
        suggestion = comp.choose_epsilon(model, n_max, BIAS_TARGET)
        raise ExperimentError(
            f"epsilon={eps!r} gives occupancy bias bound {bound:.3g} > {BIAS_TARGET} at "
            f"n={n_max}; use epsilon <= {suggestion:.3g}")
    return eps, {"occupancy_bias_bound": bound,
                 "truncation_bias_bound": comp.truncation_bias_bound(model, n_max, eps)}


def _lil_replicate(i, model, eps, ns, master_seed):
    traj = comp.PathwiseTrajectory(model, eps, make_stream(master_seed, "lil", i))
    return [int(traj.advance_to(n)[-1]) for n in ns]


def lil_sequences(model: lm.LevyModel, ns) -> tuple[list, list]:
    """Centering and LIL normalization along ``ns``.

    Gamma families use the general theorem; compound Poisson works on the
    log scale t = log n with m = E[xi].
    """
    if model.is_cp:
        ts = [math.log(n) for n in ns]
        return ([lm.cp_centering(model.jump, t) for t in ts],
                [lm.cp_normalization(model.jump, t, lm.LIL) for t in ts])
    return centering_grid(model, ns), [lm.theorem_normalization(model, n, lm.LIL) for n in ns]


def run_lil_experiment(manifest: ExperimentManifest, workers: int | None = None) -> ExperimentResult:
    manifest.validate()
    if manifest.kind != "lil":
        raise ManifestError(f"expected a lil manifest, got {manifest.kind!r}")
    model = manifest.levy_model()
    ns = parse_int_grid(manifest.n_grid)
    if ns[0] <= math.exp(math.e):
        raise ManifestError("lil n_grid entries must exceed e^e ~ 15.2")
    eps, bound = resolve_epsilon(model, ns[-1], manifest.epsilon)
    cent, norm = lil_sequences(model, ns)
    ks = map_replicates(_lil_replicate, manifest.replicates,
                        (model, eps, ns, manifest.master_seed), workers)
    records = []
    extremes = []
    for i, kk in enumerate(ks):
        ext = RunningExtremes()
        sid = stream_id("lil", i)
        for j, n in enumerate(ns):
            rec = ResultRecord.build(n, kk[j], cent[j], norm[j], i, sid)
            ext.append(rec.normalized)
            records.append(rec)
        extremes.append(ext.as_dict())
    meta = {
        "experiment": "lil",
        "model": model.describe(),
        "diagnostic": True,
        "diagnostic_reason": ("LIL limits act on loglog / logloglog scales; values at "
                              "simulated n are recorded, not asserted"),
        "epsilon": eps,
        "bias_bounds_at_n_max": bound,
        "running_extremes": extremes,
        "all_finite": all(math.isfinite(r.normalized) for r in records),
    }
    n_max = ns[-1]
    if model.is_cp:
        meta["m_assumption"] = M_NOTE
        meta["scale"] = "t = log n"
    else:
        meta["corollary_constant_note"] = lm.CONSTANT_NOTE
        meta["normalizations_at_n_max"] = {
            "n": n_max,
            "general": lm.theorem_normalization(model, n_max, lm.LIL),
            "closed_form_as_stated": lm.corollary_normalization(model, n_max, printed=True),
            "closed_form_with_factor": lm.corollary_normalization(model, n_max, printed=False),
        }
        meta["renewal_lil_constant_note"] = RENEWAL_LIL_NOTE
        meta["inverse_subordinator"] = inverse_subordinator_diagnostic(
            model, eps, np.geomspace(20.0, 1000.0, 9), manifest.master_seed)
    return ExperimentResult(manifest, records, meta)


def inverse_subordinator_diagnostic(model: lm.LevyModel, eps: float, y_grid, master_seed: int,
                                    replicate: int = 0) -> list[dict]:
    """(S^<-(y) - y/mu) / (sigma mu^{-3/2} (2 y loglog y)^{1/2}) along one path."""
    y_grid = [float(y) for y in y_grid]
    if y_grid[0] <= math.e:
        raise ExperimentError("y_grid entries must exceed e")
    m = lm.moments(model)
    path = comp.simulate_inverse_path(model, eps, y_grid[-1],
                                      make_stream(master_seed, "sinv", replicate))
    scale = math.sqrt(m.sigma2) * m.mu ** -1.5
    out = []
    for y in y_grid:
        k = int(np.searchsorted(path.grid, y, side="right")) - 1
        s_inv = float(path.values[k])
        out.append({"y": y, "s_inverse": s_inv,
                    "normalized": (s_inv - y / m.mu) / (scale * math.sqrt(2 * y * math.log(math.log(y))))})
    return out


# --- compound-Poisson approximation sum ------------------------------------------

def _cp_approx_replicate(i, jump, t, master_seed):
    return comp.cp_block_count_approx(jump, t, make_stream(master_seed, "cp_approx", i))


def cp_approx_experiment(jump: lm.JumpDist, t: float, replicates: int, master_seed: int,
                         workers: int | None = None) -> dict:
    """Variance of (approximation sum - centering) / sqrt(t) against s^2 m^-3."""
    counts = map_replicates(_cp_approx_replicate, replicates, (jump, t, master_seed), workers)
    c = lm.cp_centering(jump, t)
    z = (np.asarray(counts, dtype=float) - c) / math.sqrt(t)
    target = jump.variance / jump.mean ** 3
    return {"t": t, "replicates": replicates, "centering": c, "mean": float(z.mean()),
            "variance": float(z.var(ddof=1)), "target_variance": target,
            "relative_error": float(abs(z.var(ddof=1) - target) / target),
            "m_assumption": M_NOTE, "note": CP_APPROX_NOTE}


# --- Brownian LIL ------------------------------------------------------------------

def _bm_replicate(i, kernel, T, step, master_seed):
    samples, ext = bm.bm_lil_trajectory(kernel, T, step, make_stream(master_seed, "bm_lil", i),
                                        ratio=LIL_CHECKPOINT_RATIO)
    return samples, ext.as_dict()


def run_bm_lil_experiment(manifest: ExperimentManifest, workers: int | None = None) -> ExperimentResult:
    manifest.validate()
    if manifest.kind != "bm_lil":
        raise ManifestError(f"expected a bm_lil manifest, got {manifest.kind!r}")
    kernel = bm.KernelSpec(manifest.alpha, manifest.model)
    T = parse_number_list(manifest.n_grid)[-1]
    out = map_replicates(_bm_replicate, manifest.replicates,
                         (kernel, T, manifest.step, manifest.master_seed), workers)
    records = []
    extremes = []
    for i, (samples, ext) in enumerate(out):
        sid = stream_id("bm_lil", i)
        for t, value, _ in samples:
            records.append(ResultRecord.build(t, value, 0.0, bm.lil_normalizer(kernel, t), i, sid))
        extremes.append(ext)
    meta = {
        "experiment": "bm_lil",
        "kernel": {"kind": kernel.kind, "alpha": kernel.alpha},
        "horizon": T,
        "step": manifest.step,
        "checkpoint_ratio": LIL_CHECKPOINT_RATIO,
        "diagnostic": True,
        "diagnostic_reason": "the loglog normalization is not reachable at simulated horizons",
        "running_extremes": extremes,
        "all_finite": all(math.isfinite(r.normalized) for r in records),
    }
    return ExperimentResult(manifest, records, meta)


def run_experiment(manifest: ExperimentManifest, workers: int | None = None) -> ExperimentResult:
    runners = {"clt": run_clt_experiment, "lil": run_lil_experiment,
               "bm_lil": run_bm_lil_experiment}
    if manifest.kind not in runners:
        raise ManifestError(f"no runner for experiment kind {manifest.kind!r}")
    return runners[manifest.kind](manifest, workers)
