"""Goodness-of-fit helpers built on scipy.stats."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats

KS_CRIT_1PCT = 1.628


def ks_statistic(sample, variance: float) -> tuple[float, bool]:
    """KS distance to Normal(0, variance) and the asymptotic 1% decision."""
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1 or len(x) < 20:
        raise ValueError("ks_statistic needs a 1-d sample of size >= 20")
    if not variance > 0:
        raise ValueError("variance must be positive")
    if np.ptp(x) == 0:
        raise ValueError("degenerate sample: zero variance")
    d = float(stats.kstest(x, stats.norm(scale=math.sqrt(variance)).cdf).statistic)
    return d, d <= KS_CRIT_1PCT / math.sqrt(len(x))


def ks_two_sample(a, b, level: float = 0.01) -> tuple[float, float, bool]:
    """Two-sample KS: (D, p-value, passes at ``level``)."""
    res = stats.ks_2samp(np.asarray(a), np.asarray(b))
    return float(res.statistic), float(res.pvalue), bool(res.pvalue > level)


def sample_summary(values) -> dict:
    x = np.asarray(values, dtype=float)
    return {"count": int(len(x)), "mean": float(x.mean()),
            "variance": float(x.var(ddof=1)) if len(x) > 1 else 0.0}
