"""The acceptance gates: one function per criterion, each returning a
pass/fail verdict with the measured quantities.

The gates mix exact oracle identities (beta triangle, Green identities,
kernel cross-checks, determinism) with statistical checks at fixed scale
(covariance limits within 3 jackknife SEs, scaling slopes, KS distances).
`run_all` executes them in order and is what `rapwalk selftest` and the
acceptance test module call.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import engines
from .analytics import (
    CovParams,
    beta_quadrature,
    beta_two_point,
    constants_for,
    forward_mean_coefficient,
    gamma_0,
    gamma_0_integral,
    gamma_q,
    gamma_q_integral,
    rap_covariance,
    stationary_temporal_covariance,
)
from .green import PerturbedWalk, green_table, green_asymptotics_report, beta_via_potential
from .harness import ExperimentConfig, run
from .rap import InitProfile, ObservationGrid, invariance_test, z_n_batch
from .rwre import (
    a_n_samples,
    difference_variance_check,
    quenched_mean_variance,
    y_n_samples,
)
from .stats import covariance_estimate, scaling_fit
from .weights import Deterministic, DirichletWindow, FiniteMixture, TwoPointBeta, drift_moments


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"ACCEPTANCE {self.number:2d} [{status}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _result(number, name, passed, detail, t0) -> CriterionResult:
    return CriterionResult(number, name, bool(passed), detail, time.time() - t0)


def criterion_1() -> CriterionResult:
    """beta consistency triangle."""
    t0 = time.time()
    law = TwoPointBeta(2, 1)
    bq = beta_quadrature(law, tol=1e-10)
    b2 = beta_two_point(law)
    bp = beta_via_potential(law)
    e_quad = abs(bq - 2.0 / 3.0)
    e_closed = max(abs(b2 - 2.0 / 3.0), abs(bp - 2.0 / 3.0))
    dlaw = DirichletWindow((1.0, 1.0, 1.0))
    dq = beta_quadrature(dlaw, tol=1e-9)
    dp = beta_via_potential(dlaw, tol=1e-8)
    e_dir = abs(dq - dp)
    elapsed = time.time() - t0
    ok = e_quad <= 1e-6 and e_closed <= 1e-10 and e_dir <= 1e-6 and elapsed < 10.0
    detail = (f"two-point: quad err {e_quad:.2e} (<=1e-6), closed err {e_closed:.2e} (<=1e-10); "
              f"dirichlet: |quad-potential| {e_dir:.2e} (<=1e-6); runtime < 10 s")
    return _result(1, "beta consistency triangle", ok, detail, t0)


def criterion_2(n: int = 10_000) -> CriterionResult:
    """Green asymptotics at n = 1e4."""
    t0 = time.time()
    law = TwoPointBeta(2, 1)
    c = constants_for(law)
    rep = green_asymptotics_report(PerturbedWalk.for_law(law), c, n, (0.0,))
    scaled = rep.rows[0].scaled
    limit = rep.origin_limit  # 3/sqrt(pi) for this law
    rel = abs(scaled - limit) / limit
    ratio_err = abs(rep.ratio_origin - c.beta)
    elapsed = time.time() - t0
    ok = rel <= 0.03 and ratio_err <= 2e-2 and elapsed < 60.0
    detail = (f"n^-1/2 G_n(0,0) = {scaled:.5f} vs {limit:.5f} (rel {rel:.3%} <= 3%); "
              f"Gbar/G = {rep.ratio_origin:.5f} vs beta {c.beta:.5f} (err {ratio_err:.2e} <= 2e-2); "
              f"runtime < 60 s")
    return _result(2, "Green asymptotics", ok, detail, t0)


def criterion_3() -> CriterionResult:
    """Exact variance identities by exhaustive enumeration."""
    t0 = time.time()
    mix = FiniteMixture(((0.5, (1.0, 0.0, 0.0)), (0.5, (0.0, 1.0, 0.0))))
    mom = drift_moments(mix)
    errs = []
    for n in (3, 4):
        est = quenched_mean_variance(mix, n, mode="exhaustive")
        gt = green_table(PerturbedWalk.for_law(mix), n - 1)
        errs.append(abs(est.estimate - mom.sigma_D2 * gt.value(0)))
    rep = difference_variance_check(mix, 3, 1, 0, mode="exhaustive")
    errs.append(rep.abs_error)
    worst = max(errs)
    elapsed = time.time() - t0
    ok = worst <= 1e-12 and elapsed < 5.0
    detail = (f"worst |exhaustive - sigma_D^2 Green| = {worst:.2e} (<= 1e-12) over n=3,4 "
              f"and difference n=3; runtime < 5 s")
    return _result(3, "exact variance identities", ok, detail, t0)


def criterion_4(replicates: int = 10_000, scales=(100, 316, 1000, 3162, 10_000),
                seed: int = 41_000) -> CriterionResult:
    """Quenched-mean variance scaling slope."""
    t0 = time.time()
    law = TwoPointBeta(2, 1)
    pairs = []
    for i, n in enumerate(scales):
        est = quenched_mean_variance(law, n, replicates=replicates, mode="monte_carlo",
                                     seed=seed + i * replicates)
        pairs.append((n, est.estimate))
    fit = scaling_fit(pairs)
    ok = 0.45 <= fit.slope <= 0.55
    detail = (f"log-log slope {fit.slope:.4f} in [0.45, 0.55], replicates={replicates}, "
              f"variances={[f'{v:.3f}' for _, v in pairs]}")
    return _result(4, "quenched-mean scaling", ok, detail, t0)


def criterion_5() -> CriterionResult:
    """Gamma kernel numerics: integral vs closed form, PSD Gram matrices."""
    t0 = time.time()
    law = TwoPointBeta(2, 1)
    c = constants_for(law)
    pts = [(0.25, -1.0), (0.5, 0.3), (1.0, 0.0), (1.5, -0.4), (2.0, 1.2)]
    worst = 0.0
    for s, q in pts:
        for t, r in pts:
            dq = abs(gamma_q(s, q, t, r, c) - gamma_q_integral(s, q, t, r, c, tol=1e-10))
            d0 = abs(gamma_0(s, q, t, r, c.sigma_a2) - gamma_0_integral(s, q, t, r, c.sigma_a2, tol=1e-10))
            worst = max(worst, dq, d0)
    params = CovParams(rho_bar=1.0, v_bar=0.5)
    grid = [(0.3, -0.7), (0.3, 0.4), (0.9, 0.0), (1.4, 1.0), (2.0, -1.2), (2.0, 0.8)]
    gram = np.array([[rap_covariance(s, q, t, r, params, c) for (t, r) in grid] for (s, q) in grid])
    min_eig = float(np.linalg.eigvalsh(gram).min())
    ok = worst <= 1e-8 and min_eig >= -1e-9
    detail = f"max |integral - closed| = {worst:.2e} (<= 1e-8); Gram min eig = {min_eig:.2e} (>= -1e-9)"
    return _result(5, "Gamma kernel numerics", ok, detail, t0)


def criterion_6(n: int = 2500, replicates: int = 1000, seed: int = 61_000) -> CriterionResult:
    """Backward quenched-mean covariance -> Gamma_q; forward variance -> c_a sqrt(t)."""
    t0 = time.time()
    law = TwoPointBeta(2, 1)
    c = constants_for(law)
    points = [(t, r) for t in (0.5, 1.0) for r in (0.0, 1.0)]
    seeds = np.arange(replicates, dtype=np.uint64) + np.uint64(seed)
    ys = y_n_samples(law, n, points, seeds)
    cov, se = covariance_estimate(ys)
    worst_z = 0.0
    for i in range(len(points)):
        for j in range(i, len(points)):
            th = gamma_q(points[i][0], points[i][1], points[j][0], points[j][1], c)
            worst_z = max(worst_z, abs((cov[i, j] - th) / se[i, j]))
    aa = a_n_samples(law, n, points, seeds)
    ca = forward_mean_coefficient(c)
    worst_za = 0.0
    for j, (t, r) in enumerate(points):
        v = aa[:, j]
        est = float(v.var(ddof=1))
        se_v = est * math.sqrt(2.0 / (replicates - 1))
        worst_za = max(worst_za, abs((est - ca * math.sqrt(t)) / se_v))
    ok = worst_z <= 3.0 and worst_za <= 3.0
    detail = (f"max |z| vs Gamma_q = {worst_z:.2f} (<= 3); "
              f"max |z| of Var a_n vs c_a sqrt(t) = {worst_za:.2f} (<= 3); R={replicates}, n={n}")
    return _result(6, "RWRE covariance limit", ok, detail, t0)


def criterion_7(n: int = 2500, replicates: int = 2000, seed: int = 71_000) -> CriterionResult:
    """RAP fluctuation covariance with gaussian initial data + duality."""
    t0 = time.time()
    law = TwoPointBeta(2, 1)
    c = constants_for(law)
    profile = InitProfile.gaussian(1.0, 0.5)
    params = CovParams(rho_bar=1.0, v_bar=0.5)
    points = tuple((t, r) for t in (0.5, 1.0) for r in (0.0, 1.0))
    obs = ObservationGrid(n=n, points=points, ybar=0.0)
    seeds = np.arange(replicates, dtype=np.uint64) + np.uint64(seed)
    zs, dual_err = z_n_batch(law, profile, obs, seeds, duality_tau=100)
    cov, se = covariance_estimate(zs)
    worst_z = 0.0
    for i in range(len(points)):
        for j in range(i, len(points)):
            th = rap_covariance(points[i][0], points[i][1], points[j][0], points[j][1], params, c)
            worst_z = max(worst_z, abs((cov[i, j] - th) / se[i, j]))
    ok = worst_z <= 3.0 and dual_err <= 1e-9
    detail = (f"max |z| vs rho^2 Gamma_q + v Gamma_0 = {worst_z:.2f} (<= 3); "
              f"duality max rel err = {dual_err:.2e} (<= 1e-9); R={replicates}, n={n}")
    return _result(7, "RAP fluctuation covariance", ok, detail, t0)


def criterion_8(n: int = 2500, replicates: int = 2000, seed: int = 81_000) -> CriterionResult:
    """Stationary gamma start: temporal covariance is the Hurst-1/4 form."""
    t0 = time.time()
    law = TwoPointBeta(2, 1)
    c = constants_for(law)
    profile = InitProfile.gamma(2.0, 1.0)     # rho = 2, v = 2 = kappa rho^2
    rho = 2.0
    times = (0.5, 1.0, 2.0)
    points = tuple((t, 0.0) for t in times)
    obs = ObservationGrid(n=n, points=points, ybar=0.0)
    seeds = np.arange(replicates, dtype=np.uint64) + np.uint64(seed)
    zs, _ = z_n_batch(law, profile, obs, seeds, duality_tau=100)
    cov, se = covariance_estimate(zs)
    cells = {(0.5, 1.0): (0, 1), (1.0, 1.0): (1, 1), (0.5, 2.0): (0, 2)}
    worst_z = 0.0
    details = []
    for (s, t), (i, j) in cells.items():
        th = stationary_temporal_covariance(s, t, rho, c)
        z = (cov[i, j] - th) / se[i, j]
        worst_z = max(worst_z, abs(z))
        details.append(f"(s={s},t={t}): est {cov[i,j]:.4f} th {th:.4f} z {z:+.2f}")
    ok = worst_z <= 3.0
    detail = f"max |z| = {worst_z:.2f} (<= 3); " + "; ".join(details)
    return _result(8, "fractional Brownian marginal", ok, detail, t0)


def criterion_9(steps: int = 1000, samples: int = 10_000, seed: int = 91_000) -> CriterionResult:
    """Gamma invariant distributions for the two-point dynamics."""
    t0 = time.time()
    cases = ((2, 1, 1.0), (3, 1, 2.0), (4, 2, 1.0))
    worst_ks_ratio = 0.0
    worst_moment_z = 0.0
    details = []
    for k, (m, j, lam) in enumerate(cases):
        rep = invariance_test(m, j, lam, n_sites=samples + steps, steps=steps,
                              samples=samples, seed=seed + k)
        ratio = rep.ks_distance / rep.ks_critical_1pct
        worst_ks_ratio = max(worst_ks_ratio, ratio)
        worst_moment_z = max(worst_moment_z, abs(rep.mean_z), abs(rep.variance_z))
        details.append(f"({m},{j},{lam}): KS/crit1% = {ratio:.2f}")
    ok = worst_ks_ratio <= 1.5 and worst_moment_z <= 4.0
    detail = (f"max KS ratio {worst_ks_ratio:.2f} (<= 1.5), max moment |z| {worst_moment_z:.2f} "
              f"(<= 4); " + "; ".join(details))
    return _result(9, "gamma invariant distribution", ok, detail, t0)


def criterion_10(tmp_dir: str | None = None) -> CriterionResult:
    """Determinism: identical outputs for 1 vs 8 threads."""
    t0 = time.time()
    import json
    import tempfile

    base = {
        "kind": "rwre-cov",
        "law": {"variant": "two_point_beta", "m": 2, "j": 1},
        "n": 200,
        "replicates": 64,
        "grid_t": [0.5, 1.0],
        "grid_r": [0.0],
        "seed": 12345,
    }
    outputs = []
    with tempfile.TemporaryDirectory(dir=tmp_dir) as td:
        for threads in (1, 8):
            cfg = ExperimentConfig.from_dict({**base, "threads": threads})
            res = run(cfg)
            payload = json.dumps(res.to_json_dict()["results"], sort_keys=True)
            csv_bytes = b""
            for p in sorted(res.write(f"{td}/t{threads}")):
                if p.suffix == ".csv":
                    body = p.read_bytes().split(b"\n", 1)[1]  # skip config echo
                    csv_bytes += body
            outputs.append((payload, csv_bytes))
    ok = outputs[0] == outputs[1]
    detail = "results and CSV bytes identical across thread counts" if ok else "outputs differ"
    return _result(10, "determinism across thread counts", ok, detail, t0)


ALL_CRITERIA = (
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
)

QUICK_OVERRIDES = {
    4: dict(replicates=400, scales=(100, 316, 1000)),
    6: dict(n=400, replicates=300),
    7: dict(n=400, replicates=400),
    8: dict(n=400, replicates=400),
    9: dict(steps=200, samples=4000),
}


def run_all(quick: bool = False, only=None) -> list[CriterionResult]:
    """Run the acceptance gates in order, printing one line per criterion.

    `quick` shrinks the Monte Carlo sizes for a smoke run; the official
    gates are the full sizes.
    """
    results = []
    for idx, fn in enumerate(ALL_CRITERIA, start=1):
        if only and idx not in only:
            continue
        kwargs = QUICK_OVERRIDES.get(idx, {}) if quick else {}
        res = fn(**kwargs)
        print(res.line(), flush=True)
        results.append(res)
    return results
