"""Estimator utilities for the experiment harness: replicate-level
covariance with jackknife standard errors, log-log scaling fits, and the
Kolmogorov-Smirnov statistic with its asymptotic critical values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, InsufficientReplicates

# Asymptotic critical values of sqrt(N) * D under the null.
KS_CRITICAL = {0.10: 1.224, 0.05: 1.358, 0.01: 1.628}


def covariance_estimate(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unbiased sample covariance across replicate rows plus leave-one-out
    jackknife standard errors, entrywise.

    `samples` is (replicates, cells); SEs come from the spread of the
    R leave-one-replicate-out covariance estimates.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsufficientReplicates("covariance needs a (replicates >= 2, cells) matrix")
    r = x.shape[0]
    cov = np.cov(x, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    if r == 2:
        return cov, np.full_like(cov, np.nan)

    sums = x.sum(axis=0)
    prods = x.T @ x
    loo = np.empty((r,) + cov.shape)
    for k in range(r):
        s = sums - x[k]
        p = prods - np.outer(x[k], x[k])
        m = r - 1
        loo[k] = (p - np.outer(s, s) / m) / (m - 1)
    mean_loo = loo.mean(axis=0)
    se = np.sqrt((r - 1) / r * ((loo - mean_loo) ** 2).sum(axis=0))
    return cov, se


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    stderr: float  # standard error of the slope


def scaling_fit(pairs) -> ScalingFit:
    """Least squares of log(variance) on log(n)."""
    pts = [(float(n), float(v)) for n, v in pairs]
    if len(pts) < 3:
        raise DegenerateInput(f"scaling fit needs >= 3 scales, got {len(pts)}")
    if any(v <= 0 for _, v in pts):
        raise DegenerateInput("scaling fit needs positive variances")
    lx = np.log([n for n, _ in pts])
    ly = np.log([v for _, v in pts])
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(a, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    dof = len(pts) - 2
    if dof > 0:
        resid = ly - a @ coef
        s2 = float(resid @ resid) / dof
        sxx = float(((lx - lx.mean()) ** 2).sum())
        stderr = math.sqrt(s2 / sxx)
    else:
        stderr = 0.0
    return ScalingFit(slope=slope, intercept=intercept, stderr=stderr)


@dataclass(frozen=True)
class KsResult:
    distance: float
    n_samples: int
    critical: dict  # alpha -> critical distance at this sample size

    def exceeds(self, alpha: float) -> bool:
        return self.distance > self.critical[alpha]


def ks_statistic(samples, cdf) -> KsResult:
    """Sup-norm distance between the empirical CDF and `cdf`.

    Critical values are the asymptotic Kolmogorov points scaled by
    1/sqrt(N); they calibrate i.i.d. samples against a fully specified
    continuous CDF.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 100:
        raise DegenerateInput(f"KS statistic needs >= 100 samples, got {n}")
    f = np.asarray([cdf(v) for v in x], dtype=float)
    i = np.arange(1, n + 1)
    d = float(np.max(np.maximum(f - (i - 1) / n, i / n - f)))
    crit = {a: c / math.sqrt(n) for a, c in KS_CRITICAL.items()}
    return KsResult(distance=d, n_samples=n, critical=crit)
