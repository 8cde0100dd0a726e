"""The height-field dynamics: random convex averaging of neighbor values.

Heights sigma_tau(k) = sum_j u_tau(k,j) sigma_{tau-1}(k+j) evolve over a
finite window that shrinks by the step range M on each side per step
(exact light cone, no truncation).  The module builds independent-increment
initial conditions with prescribed mean/variance profiles, records the
n^{1/4}-scaled fluctuation field along the characteristic, exposes the
two-point increment dynamics with its invariant-distribution test, and
cross-checks everything against the dual backward walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from . import engines
from .environment import DOMAIN_INIT, SITE_K, SeededEnvironment, mix64, row_root, stream_root, _u64
from .errors import ProfileError, UnsupportedLaw, WindowExhausted
from .rwre import ScaledProcessPoint, propagate
from .weights import TwoPointBeta, WeightLaw, drift_moments

_U53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# initial conditions

def _as_fn(f) -> Callable[[float], float]:
    return f if callable(f) else (lambda _x, _c=float(f): _c)


@dataclass(frozen=True)
class InitProfile:
    """Law of the independent initial increments eta_0(i): mean rho(i/n),
    variance v(i/n); family fixes the marginal shape."""

    family: str                      # gaussian | gamma | deterministic
    rho: Callable[[float], float]
    v: Callable[[float], float]
    gamma_shape: float = 0.0
    gamma_rate: float = 0.0

    @classmethod
    def gaussian(cls, rho, v) -> "InitProfile":
        return cls(family="gaussian", rho=_as_fn(rho), v=_as_fn(v))

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "InitProfile":
        if shape <= 0 or rate <= 0:
            raise ProfileError(f"gamma profile needs shape, rate > 0, got ({shape}, {rate})")
        mean, var = shape / rate, shape / rate**2
        return cls(
            family="gamma", rho=_as_fn(mean), v=_as_fn(var), gamma_shape=shape, gamma_rate=rate
        )

    @classmethod
    def deterministic(cls, rho) -> "InitProfile":
        return cls(family="deterministic", rho=_as_fn(rho), v=_as_fn(0.0))

    @property
    def draws_per_site(self) -> int:
        return 0 if self.family == "deterministic" else 1

    def profile_arrays(self, sites: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
        x = sites.astype(float) / n
        rho = np.array([self.rho(v) for v in x])
        var = np.array([self.v(v) for v in x])
        if np.any(var < 0):
            raise ProfileError("variance profile is negative on the requested window")
        return rho, var

    def increments_batch(self, sites: np.ndarray, n: int, u: np.ndarray) -> np.ndarray:
        """(B, len(sites)) increment values from (B, len(sites)) uniforms;
        the mean/variance profiles are evaluated once per site."""
        rho, var = self.profile_arrays(sites, n)
        if self.family == "deterministic":
            return np.broadcast_to(rho, u.shape).copy()
        if self.family == "gamma":
            return special.gammaincinv(self.gamma_shape, u) / self.gamma_rate
        return rho[None, :] + np.sqrt(var)[None, :] * special.ndtri(u)

    def increments(self, sites: np.ndarray, n: int, u: np.ndarray) -> np.ndarray:
        """Increment values at the given lattice sites from their uniforms."""
        return self.increments_batch(sites, n, u[None, :])[0]


def named_profile(name: str, **kw) -> InitProfile:
    """Presets for the CLI: constant, linear, quadratic, gamma."""
    if name == "constant":
        rho = kw.get("rho", 1.0)
        v = kw.get("v", 0.0)
        return InitProfile.gaussian(rho, v) if v else InitProfile.deterministic(rho)
    if name == "linear":
        a = kw.get("slope", 1.0)
        v = kw.get("v", 0.0)
        fn = lambda x: a * x
        return InitProfile.gaussian(fn, v) if v else InitProfile.deterministic(fn)
    if name == "quadratic":
        v = kw.get("v", 0.0)
        fn = lambda x: x * x
        return InitProfile.gaussian(fn, v) if v else InitProfile.deterministic(fn)
    if name == "gamma":
        return InitProfile.gamma(kw.get("shape", 2.0), kw.get("rate", 1.0))
    raise ProfileError(f"unknown profile preset {name!r}")


@dataclass
class HeightWindow:
    """sigma_tau over a contiguous window; heights[k] sits at base + k."""

    base: int
    heights: np.ndarray
    tau: int

    @property
    def hi(self) -> int:
        return self.base + self.heights.size - 1

    def value(self, x: int) -> float:
        if not self.base <= x <= self.hi:
            raise WindowExhausted(f"site {x} outside surviving window [{self.base}, {self.hi}]")
        return float(self.heights[x - self.base])

    def increments(self) -> tuple[int, np.ndarray]:
        """(base+1, eta) with eta[k] = sigma(base+1+k) - sigma(base+k)."""
        return self.base + 1, np.diff(self.heights)


def init_increment_uniforms(seeds: np.ndarray, sites: np.ndarray) -> np.ndarray:
    """(len(seeds), len(sites)) uniforms from the initial-data stream
    (one draw per site, time slot 0)."""
    roots = np.array([row_root(stream_root(int(s), DOMAIN_INIT), 0) for s in seeds], dtype=np.uint64)
    h = roots[:, None] + _u64(np.asarray(sites)) [None, :] * SITE_K
    z = mix64(h)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def init_heights(profile: InitProfile, n: int, window: tuple[int, int], seed: int) -> HeightWindow:
    """Heights over [lo, hi]: cumulative independent increments anchored by
    sigma_0(0) = 0; the window must contain the anchor site 0."""
    lo, hi = window
    if not lo <= 0 <= hi:
        raise ProfileError(f"window [{lo}, {hi}] must contain the anchor site 0")
    sites = np.arange(lo + 1, hi + 1, dtype=np.int64)
    if profile.draws_per_site:
        u = init_increment_uniforms(np.array([seed]), sites)[0]
    else:
        u = np.empty(sites.size)
    eta = profile.increments(sites, n, u)
    heights = np.concatenate([[0.0], np.cumsum(eta)])
    heights -= heights[-lo]
    return HeightWindow(base=lo, heights=heights, tau=0)


# ---------------------------------------------------------------------------
# evolution

def _evolve_step(h: HeightWindow, env) -> HeightWindow:
    m = env.law.range_m
    if h.heights.size <= 2 * m:
        raise WindowExhausted(f"window of width {h.heights.size} cannot absorb a step of range {m}")
    tau = h.tau + 1
    lo, hi = h.base + m, h.hi - m
    width = hi - lo + 1
    row = env.row(tau, lo, hi)
    new = np.zeros(width)
    for j in range(-m, m + 1):
        new += row.vectors[:, j + m] * h.heights[j + m : j + m + width]
    return HeightWindow(base=lo, heights=new, tau=tau)


def evolve(heights: HeightWindow, env, steps: int) -> HeightWindow:
    """Apply the averaging dynamics `steps` times; the window loses M sites
    per side per step."""
    h = heights
    for _ in range(steps):
        h = _evolve_step(h, env)
    return h


def dual_height(env, heights0: HeightWindow, site: int, tau: int) -> float:
    """sigma_tau(site) through the dual backward walk:
    E^w[sigma_0(X^{site,tau}_tau)]."""
    dist = propagate(env, (site, tau), tau, "backward")
    nz = np.nonzero(dist.pmf)[0]
    lo, hi = dist.base + nz[0], dist.base + nz[-1]
    if lo < heights0.base or hi > heights0.hi:
        raise WindowExhausted("initial window does not cover the dual walk's support")
    sl = heights0.heights[lo - heights0.base : hi - heights0.base + 1]
    return float(dist.pmf[nz[0] : nz[-1] + 1] @ sl)


# ---------------------------------------------------------------------------
# fluctuation field

@dataclass(frozen=True)
class ObservationGrid:
    """Space-time points (t_j, r_j) observed at scale n along the
    characteristic through ybar."""

    n: int
    points: tuple[tuple[float, float], ...]
    ybar: float = 0.0

    def __post_init__(self):
        if any(t < 0 for t, _ in self.points):
            raise ValueError("observation times must be >= 0")


def _grid_geometry(obs: ObservationGrid, b: float, m: int):
    """(tau_j, obs site, base site) per point plus the initial window."""
    n = obs.n
    sqn = math.sqrt(n)
    taus, sites, bases = [], [], []
    for t, r in obs.points:
        anchor = math.floor(n * obs.ybar) + math.floor(r * sqn)
        taus.append(math.floor(n * t))
        sites.append(anchor + math.floor(n * t * b))
        bases.append(anchor)
    t_max = max(taus) if taus else 0
    need = sites + bases + [0]
    lo = min(need) - m * t_max - 1
    hi = max(need) + m * t_max + 1
    return taus, sites, bases, t_max, (lo, hi)


def z_n(
    obs: ObservationGrid,
    profile: InitProfile,
    env,
    with_split: bool = False,
):
    """The scaled fluctuation field along the characteristic:
    n^{-1/4} (sigma_{nt}(obs site) - sigma_0(base site)) per grid point.

    With `with_split`, also returns per point the decomposition into the
    initial-noise part Y (centered increments against the dual walk's tail
    probabilities) and the dynamical part H (the mean profile against the
    same tails); Y + H reassembles the height difference exactly.
    """
    n = obs.n
    mom = drift_moments(env.law)
    taus, sites, bases, t_max, window = _grid_geometry(obs, -mom.V, env.law.range_m)
    h0 = init_heights(profile, n, window, env.seed)
    values = []
    splits = []
    order = np.argsort(taus, kind="stable")
    h = h0
    snapshots = {}
    for idx in order:
        target = taus[idx]
        h = evolve(h, env, target - h.tau)
        snapshots[target] = h
    scale = n ** (-0.25)
    for j, (t, r) in enumerate(obs.points):
        sig_t = snapshots[taus[j]].value(sites[j])
        sig_0 = h0.value(bases[j])
        values.append(ScaledProcessPoint(n=n, t=t, r=r, value=scale * (sig_t - sig_0)))
        if with_split:
            splits.append(_split_point(env, h0, profile, n, taus[j], sites[j], bases[j]))
    return (values, splits) if with_split else values


def _split_point(env, h0: HeightWindow, profile: InitProfile, n, tau, site, base):
    """(Y, H): centered-increment and mean-profile parts of the height
    difference, via the dual walk's tail probabilities."""
    if tau == 0:
        return 0.0, 0.0
    dist = propagate(env, (site, tau), tau, "backward")
    s0 = dist.base
    s_last = s0 + dist.pmf.size - 1
    cdf = dist.cdf()
    lo_i = min(s0, base) + 1
    hi_i = max(s_last, base)
    i_sites = np.arange(lo_i, hi_i + 1)
    # P(X <= i-1): 0 left of the support, cdf inside, 1 beyond
    idx = np.clip(i_sites - 1 - s0, -1, dist.pmf.size - 1)
    cdf_im1 = np.where(idx < 0, 0.0, np.concatenate([[0.0], cdf])[idx + 1])
    p_ge = 1.0 - cdf_im1
    # zeta(i) = P(X >= i) for i > base, -P(X < i) for i <= base
    zeta = np.where(i_sites > base, p_ge, p_ge - 1.0)
    eta_base, eta = h0.increments()
    eta_sl = eta[(lo_i - eta_base) : (hi_i - eta_base + 1)]
    rho, _ = profile.profile_arrays(i_sites, n)
    y = float((eta_sl - rho) @ zeta)
    h = float(rho @ zeta)
    return y, h


def z_n_batch(
    law: WeightLaw,
    profile: InitProfile,
    obs: ObservationGrid,
    seeds,
    duality_tau: int = 100,
    chunk: int = 512,
):
    """z_n over independent replicates with the batched two-point engine.

    Each replicate draws its own environment and initial data (streams
    keyed by seed), evolves the full window, and verifies the dual-walk
    identity at level `duality_tau` before its values are accepted.
    Returns (values (B, n_points), max relative duality error).
    """
    n = obs.n
    mom = drift_moments(law)
    m = law.range_m
    taus, sites, bases, t_max, (lo, hi) = _grid_geometry(obs, -mom.V, m)
    seeds = np.asarray(seeds, dtype=np.uint64)
    obs_list = [(taus[j], sites[j]) for j in range(len(taus))]
    chk_tau = min(duality_tau, t_max)
    chk_site = sites[int(np.argmax(taus))]
    width = hi - lo + 1
    out = np.empty((seeds.size, len(obs_list)))
    max_rel = 0.0
    scale = n ** (-0.25)
    site_arr = np.arange(lo + 1, hi + 1, dtype=np.int64)
    for c0 in range(0, seeds.size, chunk):
        batch = seeds[c0 : c0 + chunk]
        if profile.draws_per_site:
            u = init_increment_uniforms(batch, site_arr)
        else:
            u = np.empty((batch.size, site_arr.size))
        eta = profile.increments_batch(site_arr, n, u)
        heights = np.empty((batch.size, width))
        heights[:, 0] = 0.0
        np.cumsum(eta, axis=1, out=heights[:, 1:])
        heights -= heights[:, [0 - lo]]
        sigma0_at_base = np.stack([heights[:, b_ - lo] for b_ in bases], axis=1)
        h0_chunk = heights.copy() if chk_tau > 0 else None
        vals, chk_vals = engines.rap_evolve_batch(
            law, batch, heights, lo, t_max, obs_list,
            chk=(chk_tau, chk_site) if chk_tau > 0 else None,
        )
        if chk_tau > 0:
            for b in range(batch.size):
                env_b = SeededEnvironment(int(batch[b]), law)
                h0w = HeightWindow(base=lo, heights=h0_chunk[b], tau=0)
                dual = dual_height(env_b, h0w, chk_site, chk_tau)
                rel = abs(dual - chk_vals[b]) / max(1.0, abs(dual))
                max_rel = max(max_rel, rel)
        out[c0 : c0 + batch.size] = scale * (vals - sigma0_at_base)
    return out, max_rel


# ---------------------------------------------------------------------------
# two-point increment dynamics

@dataclass
class IncrementWindow:
    base: int
    values: np.ndarray


def increment_step_two_point(eta: IncrementWindow, row) -> IncrementWindow:
    """eta'(k) = u(k,0) eta(k) + u(k-1,-1) eta(k-1); valid output shrinks by
    one site on the left.  The environment row must cover the input sites."""
    i0 = eta.base
    i1 = i0 + eta.values.size - 1
    vecs = row.vectors
    m = (vecs.shape[1] - 1) // 2
    if m != 1 or np.any(vecs[:, 2] != 0.0):
        raise UnsupportedLaw("two-point increment step needs weights supported on {-1, 0}")
    if row.base > i0 or row.base + vecs.shape[0] - 1 < i1:
        raise ValueError("environment row does not cover the increment window")
    off = i0 - row.base
    u_m1 = vecs[off : off + eta.values.size, 0]   # u(k, -1)
    u_0 = vecs[off : off + eta.values.size, 1]    # u(k, 0)
    new = u_0[1:] * eta.values[1:] + u_m1[:-1] * eta.values[:-1]
    return IncrementWindow(base=i0 + 1, values=new)


@dataclass(frozen=True)
class InvarianceReport:
    m: int
    j: int
    rate: float
    steps: int
    samples: int
    ks_distance: float
    ks_critical_1pct: float
    mean: float
    mean_z: float
    variance: float
    variance_z: float


def invariance_test(
    m: int,
    j: int,
    lam: float,
    n_sites: int,
    steps: int,
    samples: int | None = None,
    seed: int = 0,
) -> InvarianceReport:
    """Start i.i.d. Gamma(m, lam) increments, run the two-point Beta(j, m-j)
    dynamics, and compare the time-T marginal with Gamma(m, lam).

    The product gamma law is invariant for these dynamics, so at time T the
    retained sites are again i.i.d. and the standard KS calibration applies.
    """
    if n_sites <= steps:
        raise ValueError("need n_sites > steps so sites survive the shrinking window")
    law = TwoPointBeta(m, j)
    env = SeededEnvironment(seed, law)
    profile = InitProfile.gamma(m, lam)
    sites = np.arange(1, n_sites + 1, dtype=np.int64)
    u = init_increment_uniforms(np.array([seed]), sites)[0]
    eta = IncrementWindow(base=1, values=profile.increments(sites, max(n_sites, 1), u))
    for s in range(steps):
        row = env.row(s + 1, eta.base, eta.base + eta.values.size - 1)
        eta = increment_step_two_point(eta, row)
    final = eta.values
    if samples is not None:
        final = final[:samples]
    nsamp = final.size
    xs = np.sort(final)
    theory = special.gammainc(m, lam * xs)
    i = np.arange(1, nsamp + 1)
    d = float(np.max(np.maximum(theory - (i - 1) / nsamp, i / nsamp - theory)))
    crit1 = 1.628 / math.sqrt(nsamp)
    mean_t, var_t = m / lam, m / lam**2
    mean_hat = float(final.mean())
    var_hat = float(final.var(ddof=1))
    se_mean = math.sqrt(var_t / nsamp)
    se_var = math.sqrt(var_t**2 * (2.0 + 6.0 / m) / nsamp)
    return InvarianceReport(
        m=m, j=j, rate=lam, steps=steps, samples=nsamp,
        ks_distance=d, ks_critical_1pct=crit1,
        mean=mean_hat, mean_z=(mean_hat - mean_t) / se_mean,
        variance=var_hat, variance_z=(var_hat - var_t) / se_var,
    )
