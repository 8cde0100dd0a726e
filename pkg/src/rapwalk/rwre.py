"""Walks in a fixed environment: exact quenched distributions and the
scaled quenched-mean processes.

Quenched means are always computed from exact pmf propagation, never from
sampled paths, so the covariance experiments carry no within-environment
noise.  An exhaustive-enumeration mode for finite-mixture laws makes the
variance identities

    E[(E^w X_n - nV)^2] = sigma_D^2 G_{n-1}(0,0)
    E[({E^w X^x_n - x} - {E^w X^y_n - y})^2]
        = 2 sigma_D^2 (G_{n-1}(0,0) - G_{n-1}(x-y,0))

machine-checkable to 1e-12 against the Green tables.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import engines
from .environment import DOMAIN_ENV, DOMAIN_PATH, SeededEnvironment, TableEnvironment, uniforms_for_row
from .errors import CapacityError, TimeUnderflow, UnsupportedLaw
from .green import PerturbedWalk, green_table
from .weights import FiniteMixture, WeightLaw, drift_moments

MASS_TOL = 1e-12


@dataclass(frozen=True)
class QuenchedDistribution:
    """Exact law P^w(X_k = .) of one walk in one environment."""

    start: tuple[int, int]      # (site, time level)
    steps: int
    direction: str
    base: int                   # lattice coordinate of pmf[0]
    pmf: np.ndarray

    def mass(self) -> float:
        return float(self.pmf.sum())

    def mean(self) -> float:
        i = self.start[0]
        d = np.arange(self.pmf.size) + (self.base - i)
        return i + float(self.pmf @ d.astype(float))

    def support(self) -> np.ndarray:
        return np.arange(self.base, self.base + self.pmf.size)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)


def _row_time(level: int, step: int, direction: str) -> int:
    return level - step if direction == "backward" else level + step


def propagate(env, start: tuple[int, int], steps: int, direction: str = "backward") -> QuenchedDistribution:
    """k sequential row applications of the environment; exact support.

    Backward walks from (i, tau) read rows tau, tau-1, ..., tau-k+1 and
    need tau >= k so they stop at level >= 0.
    """
    i, tau = start
    if direction not in ("backward", "forward"):
        raise ValueError(f"direction must be 'backward' or 'forward', got {direction!r}")
    if direction == "backward" and tau < steps:
        raise TimeUnderflow(f"backward walk from level {tau} cannot take {steps} steps")
    m = env.law.range_m
    width = 2 * m * steps + 1
    pmf = np.zeros(width)
    base = i - m * steps
    pmf[i - base] = 1.0
    lo = hi = i - base
    for s in range(steps):
        t = _row_time(tau, s, direction)
        row = env.row(t, base + lo, base + hi)
        new = np.zeros(width)
        for j in range(-m, m + 1):
            w = row.vectors[:, j + m]
            new[lo + j : hi + 1 + j] += pmf[lo : hi + 1] * w
        pmf = new
        lo, hi = lo - m, hi + m
    dist = QuenchedDistribution(start=start, steps=steps, direction=direction, base=base, pmf=pmf)
    drift = abs(dist.mass() - 1.0)
    assert drift <= MASS_TOL, f"pmf mass drifted by {drift:.3e} after {steps} steps"
    return dist


def quenched_mean_by_drifts(env, start: tuple[int, int], steps: int, direction: str = "backward") -> float:
    """Independent route to E^w X_k: start + sum over steps of the local
    drifts of the occupied rows weighted by the current pmf."""
    i, tau = start
    m = env.law.range_m
    offsets = np.arange(-m, m + 1, dtype=float)
    width = 2 * m * steps + 1
    pmf = np.zeros(width)
    base = i - m * steps
    pmf[i - base] = 1.0
    lo = hi = i - base
    total = float(i)
    for s in range(steps):
        t = _row_time(tau, s, direction)
        row = env.row(t, base + lo, base + hi)
        drifts = row.vectors @ offsets
        total += float(pmf[lo : hi + 1] @ drifts)
        new = np.zeros(width)
        for j in range(-m, m + 1):
            new[lo + j : hi + 1 + j] += pmf[lo : hi + 1] * row.vectors[:, j + m]
        pmf = new
        lo, hi = lo - m, hi + m
    return total


@dataclass(frozen=True)
class ScaledProcessPoint:
    n: int
    t: float
    r: float
    value: float


def y_n(env, n: int, t: float, r: float, ybar: float = 0.0) -> ScaledProcessPoint:
    """Backward quenched-mean process: walk from level floor(nt) at site
    floor(n ybar) + floor(r sqrt n) + floor(nt b), scaled by n^{-1/4}."""
    mom = drift_moments(env.law)
    b = -mom.V
    nt = math.floor(n * t)
    anchor = math.floor(n * ybar) + math.floor(r * math.sqrt(n))
    start = anchor + math.floor(n * t * b)
    dist = propagate(env, (start, nt), nt, "backward")
    val = n ** (-0.25) * (dist.mean() - anchor)
    return ScaledProcessPoint(n=n, t=t, r=r, value=val)


def a_n(env, n: int, t: float, r: float) -> ScaledProcessPoint:
    """Forward quenched-mean process: walk from level 0 at floor(r sqrt n),
    centered by the annealed displacement floor(nt) V."""
    mom = drift_moments(env.law)
    nt = math.floor(n * t)
    start = math.floor(r * math.sqrt(n))
    dist = propagate(env, (start, 0), nt, "forward")
    val = n ** (-0.25) * (dist.mean() - start - nt * mom.V)
    return ScaledProcessPoint(n=n, t=t, r=r, value=val)


def y_n_samples(law: WeightLaw, n: int, points, seeds, ybar: float = 0.0,
                trim: float = engines.DEFAULT_TRIM) -> np.ndarray:
    """(len(seeds), len(points)) matrix of y_n values over independent
    environments: the batched engine where the law supports it, exact
    per-environment propagation otherwise."""
    mom = drift_moments(law)
    b = -mom.V
    seeds = np.asarray(seeds, dtype=np.uint64)
    out = np.empty((seeds.size, len(points)))
    if engines.fast_path_params(law) is None:
        for row, s in enumerate(seeds):
            env = SeededEnvironment(int(s), law)
            for col, (t, r) in enumerate(points):
                out[row, col] = y_n(env, n, t, r, ybar).value
        return out
    by_t: dict[float, list[int]] = {}
    for idx, (t, _) in enumerate(points):
        by_t.setdefault(t, []).append(idx)
    sqn = math.sqrt(n)
    for t, idxs in by_t.items():
        nt = math.floor(n * t)
        anchors = [math.floor(n * ybar) + math.floor(points[i][1] * sqn) for i in idxs]
        starts = [a + math.floor(n * t * b) for a in anchors]
        means, masses = engines.quenched_mean_batch(law, seeds, starts, nt, nt, "backward", trim)
        assert np.all(np.abs(masses - 1.0) <= MASS_TOL)
        for col, (i, a) in enumerate(zip(idxs, anchors)):
            out[:, i] = n ** (-0.25) * (means[:, col] - a)
    return out


def a_n_samples(law: WeightLaw, n: int, points, seeds,
                trim: float = engines.DEFAULT_TRIM) -> np.ndarray:
    """(len(seeds), len(points)) matrix of a_n values over independent
    environments."""
    mom = drift_moments(law)
    seeds = np.asarray(seeds, dtype=np.uint64)
    out = np.empty((seeds.size, len(points)))
    if engines.fast_path_params(law) is None:
        for row, s in enumerate(seeds):
            env = SeededEnvironment(int(s), law)
            for col, (t, r) in enumerate(points):
                out[row, col] = a_n(env, n, t, r).value
        return out
    by_t: dict[float, list[int]] = {}
    for idx, (t, _) in enumerate(points):
        by_t.setdefault(t, []).append(idx)
    sqn = math.sqrt(n)
    for t, idxs in by_t.items():
        nt = math.floor(n * t)
        starts = [math.floor(points[i][1] * sqn) for i in idxs]
        means, masses = engines.quenched_mean_batch(law, seeds, starts, 0, nt, "forward", trim)
        assert np.all(np.abs(masses - 1.0) <= MASS_TOL)
        for col, (i, st) in enumerate(zip(idxs, starts)):
            out[:, i] = n ** (-0.25) * (means[:, col] - st - nt * mom.V)
    return out


# ---------------------------------------------------------------------------
# exhaustive enumeration over finite-mixture environments

def _light_cone(starts, steps: int, m: int):
    """Site list [(x, tau)] a backward walk from level `steps` can read."""
    sites = []
    for s in range(steps):
        tau = steps - s
        xs = set()
        for i in starts:
            xs.update(range(i - s * m, i + s * m + 1))
        sites.extend((x, tau) for x in sorted(xs))
    return sites


def _exhaustive_quenched_means(law: FiniteMixture, starts, steps: int, budget: int):
    """All environment assignments over the light cone: returns
    (weights per assignment, E^w X per (assignment, start))."""
    if not isinstance(law, FiniteMixture):
        raise UnsupportedLaw("exhaustive mode needs a FiniteMixture law")
    if steps > 6:
        raise CapacityError(f"exhaustive mode is limited to n <= 6 steps, got {steps}")
    m = law.range_m
    sites = _light_cone(starts, steps, m)
    k = len(law.components)
    n_env = k ** len(sites)
    if n_env > budget:
        raise CapacityError(
            f"exhaustive mode needs {k}^{len(sites)} = {n_env:.3e} environments, budget {budget:.3e}"
        )
    comp_w = law._weights
    comp_v = law._vectors
    digits = np.array(list(itertools.product(range(k), repeat=len(sites))), dtype=np.int8)
    probs = np.prod(comp_w[digits], axis=1)
    site_index = {xt: j for j, xt in enumerate(sites)}

    means = np.empty((n_env, len(starts)))
    for col, i0 in enumerate(starts):
        width = 2 * m * steps + 1
        base = i0 - m * steps
        pmf = np.zeros((n_env, width))
        pmf[:, i0 - base] = 1.0
        lo = hi = i0 - base
        for s in range(steps):
            tau = steps - s
            cols = [site_index[(base + kk, tau)] for kk in range(lo, hi + 1)]
            vecs = comp_v[digits[:, cols]]  # (n_env, occupied, 2m+1)
            new = np.zeros_like(pmf)
            for j in range(-m, m + 1):
                new[:, lo + j : hi + 1 + j] += pmf[:, lo : hi + 1] * vecs[:, :, j + m]
            pmf = new
            lo, hi = lo - m, hi + m
        d = np.arange(width) + (base - i0)
        means[:, col] = i0 + pmf @ d.astype(float)
    return probs, means


def _quenched_means_over_seeds(law, seeds, starts, level, steps, trim) -> np.ndarray:
    """E^w X per (seed, start) for backward walks: batched engine when the
    law has a fast path, exact per-environment propagation otherwise."""
    if engines.fast_path_params(law) is not None:
        means, masses = engines.quenched_mean_batch(law, seeds, starts, level, steps,
                                                    "backward", trim)
        assert np.all(np.abs(masses - 1.0) <= MASS_TOL)
        return means
    out = np.empty((len(seeds), len(starts)))
    for row, s in enumerate(seeds):
        env = SeededEnvironment(int(s), law)
        for col, start in enumerate(starts):
            out[row, col] = propagate(env, (start, level), steps).mean()
    return out


@dataclass(frozen=True)
class VarianceEstimate:
    estimate: float
    std_err: float
    mode: str
    replicates: int


def quenched_mean_variance(
    law: WeightLaw,
    n: int,
    replicates: int = 0,
    mode: str = "monte_carlo",
    seed: int = 0,
    exhaustive_budget: int = 2**24,
    trim: float = engines.DEFAULT_TRIM,
) -> VarianceEstimate:
    """E[(E^w X_n - nV)^2]: Monte Carlo over environments, or exact
    enumeration (finite mixtures, tiny n)."""
    mom = drift_moments(law)
    if mode == "exhaustive":
        probs, means = _exhaustive_quenched_means(law, [0], n, exhaustive_budget)
        dev = means[:, 0] - n * mom.V
        return VarianceEstimate(float(probs @ dev**2), 0.0, "exhaustive", len(probs))
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    seeds = np.arange(replicates, dtype=np.uint64) + np.uint64(seed)
    means = _quenched_means_over_seeds(law, seeds, [0], n, n, trim)
    dev2 = (means[:, 0] - n * mom.V) ** 2
    est = float(dev2.mean())
    se = float(dev2.std(ddof=1) / math.sqrt(replicates))
    return VarianceEstimate(est, se, "monte_carlo", replicates)


@dataclass(frozen=True)
class DifferenceVarianceReport:
    estimate: float
    std_err: float
    theory: float
    mode: str
    replicates: int

    @property
    def abs_error(self) -> float:
        return abs(self.estimate - self.theory)


def difference_variance_check(
    law: WeightLaw,
    n: int,
    x: int,
    y: int,
    replicates: int = 0,
    mode: str = "monte_carlo",
    seed: int = 0,
    exhaustive_budget: int = 2**24,
    trim: float = engines.DEFAULT_TRIM,
) -> DifferenceVarianceReport:
    """E[({E^w X^x_n - x} - {E^w X^y_n - y})^2] against the exact
    Green-function value 2 sigma_D^2 (G_{n-1}(0,0) - G_{n-1}(x-y,0))."""
    mom = drift_moments(law)
    gt = green_table(PerturbedWalk.for_law(law), n - 1)
    theory = 2.0 * mom.sigma_D2 * (gt.value(0) - gt.value(x - y))
    if x == y:
        theory = 0.0
    if mode == "exhaustive":
        probs, means = _exhaustive_quenched_means(law, [x, y], n, exhaustive_budget)
        dev = (means[:, 0] - x) - (means[:, 1] - y)
        return DifferenceVarianceReport(float(probs @ dev**2), 0.0, theory, "exhaustive", len(probs))
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    seeds = np.arange(replicates, dtype=np.uint64) + np.uint64(seed)
    means = _quenched_means_over_seeds(law, seeds, [x, y], n, n, trim)
    dev2 = ((means[:, 0] - x) - (means[:, 1] - y)) ** 2
    est = float(dev2.mean())
    se = float(dev2.std(ddof=1) / math.sqrt(replicates))
    return DifferenceVarianceReport(est, se, theory, "monte_carlo", replicates)


def moderate_deviation_probe(
    env: SeededEnvironment,
    n: int,
    c: float,
    gamma: float,
    paths: int = 10_000,
    start: tuple[int, int] | None = None,
) -> float:
    """MC estimate of P^w{max_{k<=n} (X_k - i - kV) >= c n^{1/2+gamma}} for
    one fixed environment; path noise is drawn from the dedicated stream.

    The walk has bounded steps, so thresholds above (M - V) n give exactly 0.
    """
    law = env.law
    m = law.range_m
    mom = drift_moments(law)
    threshold = c * n ** (0.5 + gamma)
    if threshold > (m - mom.V) * n:
        return 0.0
    i0, tau = start if start is not None else (0, n)
    if tau < n:
        raise TimeUnderflow(f"backward probe from level {tau} cannot take {n} steps")
    pos = np.full(paths, i0, dtype=np.int64)
    running = np.zeros(paths)
    hit = np.zeros(paths, dtype=bool)
    path_ids = np.arange(paths, dtype=np.int64)
    d = law.uniforms_per_site
    for s in range(n):
        t = tau - s
        if d == 0:
            vecs = law.vectors_from_uniforms(np.empty((paths, 0)))
        else:
            u_env = uniforms_for_row(env.seed, DOMAIN_ENV, t, pos, d)
            vecs = law.vectors_from_uniforms(u_env)
        u_step = uniforms_for_row(env.seed, DOMAIN_PATH, s, path_ids, 1)[:, 0]
        cum = np.cumsum(vecs, axis=1)
        j = (u_step[:, None] > cum).sum(axis=1) - m
        pos = pos + j
        centered = pos - i0 - (s + 1) * mom.V
        running = np.maximum(running, centered)
        hit |= running >= threshold
    return float(hit.mean())
