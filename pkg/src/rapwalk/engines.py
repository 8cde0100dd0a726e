"""Batched replicate engines: numba fast paths and numpy references.

The Monte Carlo experiments propagate exact quenched pmfs or evolve full
height fields over thousands of independent environments.  For two-point
laws whose weight needs a single uniform (Beta(j, m-j) with j == 1 or
m - j == 1, or a fixed two-point vector) a numba kernel regenerates the
environment inline from the same counter-based stream as
`environment.uniforms_for_row` and runs one replicate per parallel lane.
Replicates write only their own output slots and reductions happen in
index order afterwards, so results are bit-identical for any thread count.

Every kernel has a numpy twin implementing the same arithmetic in the
same order; the twins serve as references in the tests and as the engine
for laws outside the fast-path family.

Truncation: lanes keep an active pmf range and trim outermost cells below
`trim` (mass is dropped, total drift stays below ~n * trim per walk, far
under the 1e-12 mass budget at the default 1e-22).  `trim=0` disables
truncation and reproduces the exact light-cone propagation.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from . import environment as env_mod
from .errors import UnsupportedLaw
from .weights import Deterministic, TwoPointBeta, WeightLaw

_U53 = 1.0 / 9007199254740992.0
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_DK = np.uint64(0xA24BAED4963EE407)
_TK = np.uint64(0xC2B2AE3D27D4EB4F)
_XK = np.uint64(0xD1342543DE82EF95)

DEFAULT_TRIM = 1e-22

# fast-path transforms of the single uniform into u = u(., -1)
KIND_IDENTITY = 0     # Beta(1,1)
KIND_ONE_MINUS_POW = 1  # Beta(1, b): u = 1 - (1-U)^(1/b)
KIND_POW = 2          # Beta(a, 1): u = U^(1/a)
KIND_CONST = 3        # deterministic two-point vector


def fast_path_params(law: WeightLaw):
    """(kind, param) when the numba kernel supports the law, else None."""
    if isinstance(law, TwoPointBeta):
        if law.m == 2 and law.j == 1:
            return KIND_IDENTITY, 0.0
        if law.j == 1:
            return KIND_ONE_MINUS_POW, 1.0 / (law.m - 1)
        if law.m - law.j == 1:
            return KIND_POW, 1.0 / law.j
        return None
    if isinstance(law, Deterministic) and law.range_m == 1:
        p = law.annealed()
        if p[2] == 0.0:  # support inside {-1, 0}
            return KIND_CONST, float(p[0])
    return None


@nb.njit(nb.uint64(nb.uint64), inline="always", cache=True)
def _mix64(z):
    z = (z ^ (z >> 30)) * nb.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> 27)) * nb.uint64(0x94D049BB133111EB)
    return z ^ (z >> 31)


@nb.njit(inline="always", cache=True)
def _u_transform(z, kind, param):
    u = (np.float64(z >> nb.uint64(11)) + 0.5) * _U53
    if kind == 0:
        return u
    if kind == 1:
        return 1.0 - (1.0 - u) ** param
    return u**param


@nb.njit(parallel=True, cache=True)
def _qmean_kernel(seeds, starts, level, steps, drow, kind, param, trim):
    B = seeds.shape[0]
    S = starts.shape[0]
    means = np.empty((B, S))
    masses = np.empty((B, S))
    L = steps + 3
    for lane in nb.prange(B * S):
        b = lane // S
        s_i = lane % S
        start = starts[s_i]
        base = start - steps - 1  # lattice coordinate of index 0
        h0 = _mix64(_mix64(seeds[b] + nb.uint64(0x9E3779B97F4A7C15)))
        pmf = np.zeros(L)
        new = np.zeros(L)
        pmf[steps + 1] = 1.0
        lo = steps + 1
        hi = steps + 1
        for s in range(steps):
            tau = level + s * drow
            hrow = _mix64(h0 ^ (nb.uint64(tau) * nb.uint64(0xC2B2AE3D27D4EB4F)))
            nlo = lo - 1
            if kind == 3:
                u = param
                for k in range(nlo, hi + 1):
                    a = pmf[k] * (1.0 - u) if k >= lo else 0.0
                    c = pmf[k + 1] * u if k + 1 <= hi else 0.0
                    new[k] = a + c
            else:
                # uniforms for occupied sites k-1..hi feed u(k) and u(k+1) reads
                for k in range(nlo, hi + 1):
                    a = 0.0
                    if k >= lo:
                        x = base + k
                        z = _mix64(hrow + nb.uint64(x) * nb.uint64(0xD1342543DE82EF95))
                        a = pmf[k] * (1.0 - _u_transform(z, kind, param))
                    c = 0.0
                    if k + 1 <= hi:
                        x1 = base + k + 1
                        z1 = _mix64(hrow + nb.uint64(x1) * nb.uint64(0xD1342543DE82EF95))
                        c = pmf[k + 1] * _u_transform(z1, kind, param)
                    new[k] = a + c
            lo2 = nlo
            hi2 = hi
            if trim > 0.0:
                while lo2 < hi2 and new[lo2] < trim:
                    new[lo2] = 0.0
                    lo2 += 1
                while hi2 > lo2 and new[hi2] < trim:
                    new[hi2] = 0.0
                    hi2 -= 1
            for k in range(nlo, hi + 1):
                pmf[k] = 0.0
            tmp = pmf
            pmf = new
            new = tmp
            lo = lo2
            hi = hi2
        m = 0.0
        tot = 0.0
        for k in range(lo, hi + 1):
            d = np.float64(base + k - start)
            m += pmf[k] * d
            tot += pmf[k]
        means[b, s_i] = np.float64(start) + m
        masses[b, s_i] = tot
    return means, masses


def _qmean_numpy(seeds, starts, level, steps, drow, kind, param, trim):
    """Numpy twin of `_qmean_kernel`: same stream, same update order."""
    B, S = len(seeds), len(starts)
    means = np.empty((B, S))
    masses = np.empty((B, S))
    L = steps + 3
    for b in range(B):
        h0 = env_mod.mix64(env_mod.mix64((int(seeds[b]) + int(_GOLD)) & ((1 << 64) - 1)))
        for s_i in range(S):
            start = int(starts[s_i])
            base = start - steps - 1
            pmf = np.zeros(L)
            pmf[steps + 1] = 1.0
            lo = hi = steps + 1
            for s in range(steps):
                tau = level + s * drow
                hrow = env_mod.row_root(h0, tau)
                nlo = lo - 1
                k_idx = np.arange(nlo, hi + 1)
                if kind == KIND_CONST:
                    u = np.full(k_idx.size + 1, param)
                else:
                    x = env_mod._u64(np.arange(base + nlo, base + hi + 2, dtype=np.int64))
                    z = env_mod.mix64(hrow + x * _XK)
                    u = ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
                    if kind == KIND_ONE_MINUS_POW:
                        u = 1.0 - (1.0 - u) ** param
                    elif kind == KIND_POW:
                        u = u**param
                a = np.where(k_idx >= lo, pmf[nlo : hi + 1] * (1.0 - u[: k_idx.size]), 0.0)
                c = np.where(k_idx + 1 <= hi, pmf[nlo + 1 : hi + 2] * u[1:], 0.0)
                new = np.zeros(L)
                new[nlo : hi + 1] = a + c
                lo2, hi2 = nlo, hi
                if trim > 0.0:
                    while lo2 < hi2 and new[lo2] < trim:
                        new[lo2] = 0.0
                        lo2 += 1
                    while hi2 > lo2 and new[hi2] < trim:
                        new[hi2] = 0.0
                        hi2 -= 1
                pmf = new
                lo, hi = lo2, hi2
            # sequential reduction in index order, matching the kernel
            m = 0.0
            tot = 0.0
            for k in range(lo, hi + 1):
                m += pmf[k] * float(base + k - start)
                tot += pmf[k]
            means[b, s_i] = float(start) + m
            masses[b, s_i] = tot
    return means, masses


def quenched_mean_batch(
    law: WeightLaw,
    seeds,
    starts,
    level: int,
    steps: int,
    direction: str = "backward",
    trim: float = DEFAULT_TRIM,
    force_numpy: bool = False,
):
    """E^omega X per (environment seed, start site): (B, S) means.

    Backward walks read rows level, level-1, ...; forward walks read rows
    level, level+1, ....  Raises UnsupportedLaw outside the fast-path
    family when force_numpy is False and no twin applies.
    """
    fp = fast_path_params(law)
    if fp is None:
        raise UnsupportedLaw(
            "batched engine supports single-uniform two-point laws; "
            "use rwre.propagate per environment for this law"
        )
    kind, param = fp
    seeds_u = np.asarray(seeds, dtype=np.uint64)
    starts_i = np.asarray(starts, dtype=np.int64)
    drow = -1 if direction == "backward" else 1
    if steps == 0:
        means = np.tile(starts_i.astype(float), (len(seeds_u), 1))
        return means, np.ones_like(means)
    fn = _qmean_numpy if force_numpy else _qmean_kernel
    return fn(seeds_u, starts_i, level, steps, drow, kind, param, trim)


@nb.njit(parallel=True, cache=True)
def _rap_kernel(seeds, heights, base, T, kind, param, obs_tau, obs_idx, chk_tau, chk_idx):
    B = heights.shape[0]
    W = heights.shape[1]
    K = obs_tau.shape[0]
    out = np.empty((B, K))
    chk = np.empty(B)
    for b in nb.prange(B):
        h = heights[b]
        h0 = _mix64(_mix64(seeds[b] + nb.uint64(0x9E3779B97F4A7C15)))
        # time-0 observations come off the buffer before it is mutated
        for o in range(K):
            if obs_tau[o] == 0:
                out[b, o] = h[obs_idx[o]]
        if chk_tau == 0:
            chk[b] = h[chk_idx]
        for tau in range(1, T + 1):
            hrow = _mix64(h0 ^ (nb.uint64(tau) * nb.uint64(0xC2B2AE3D27D4EB4F)))
            lo = tau
            hi = W - 1 - tau
            # in-place right-to-left: h[k] reads old h[k-1], h[k]
            for k in range(hi, lo - 1, -1):
                if kind == 3:
                    u = param
                else:
                    x = base + k
                    z = _mix64(hrow + nb.uint64(x) * nb.uint64(0xD1342543DE82EF95))
                    u = _u_transform(z, kind, param)
                h[k] = u * h[k - 1] + (1.0 - u) * h[k]
            for o in range(K):
                if obs_tau[o] == tau:
                    out[b, o] = h[obs_idx[o]]
            if chk_tau == tau:
                chk[b] = h[chk_idx]
    return out, chk


def rap_evolve_batch(
    law: WeightLaw,
    seeds,
    heights: np.ndarray,
    base: int,
    T: int,
    obs: list[tuple[int, int]],
    chk: tuple[int, int] | None = None,
):
    """Evolve B height windows T steps in their own environments and record
    the heights at the requested (tau, lattice site) observation points.

    `heights` is (B, W) with heights[b][k] the height at lattice site
    base + k; it is consumed (evolved in place).  Returns (obs values
    (B, len(obs)), duality-check values (B,) or None).
    """
    fp = fast_path_params(law)
    if fp is None:
        raise UnsupportedLaw("rap_evolve_batch supports single-uniform two-point laws")
    kind, param = fp
    seeds_u = np.asarray(seeds, dtype=np.uint64)
    obs_tau = np.array([t for t, _ in obs], dtype=np.int64)
    obs_idx = np.array([x - base for _, x in obs], dtype=np.int64)
    W = heights.shape[1]
    for t, x in obs:
        k = x - base
        if not (t <= k <= W - 1 - t):
            raise ValueError(f"observation (tau={t}, x={x}) outside the surviving window")
    if chk is None:
        chk_tau, chk_idx = -1, 0
    else:
        chk_tau, chk_idx = chk[0], chk[1] - base
    out, chk_vals = _rap_kernel(
        seeds_u, heights, base, T, kind, param, obs_tau, obs_idx, chk_tau, chk_idx
    )
    return out, (chk_vals if chk is not None else None)


def set_threads(n: int):
    """Cap numba's thread pool; per-replicate output slots keep results
    identical for any setting."""
    nb.set_num_threads(max(1, min(n, nb.config.NUMBA_NUM_THREADS)))
