"""Deterministic space-time environment: (seed, x, tau) -> probability vector.

The i.i.d. field of weight vectors is realized by a counter-based stream:
a splitmix64-style finalizer applied to a keyed fold of (seed, domain, tau,
x, draw).  Every site is addressable in O(1), so multiple walks and a full
height-field evolution can share one quenched environment without
materializing the lattice, and query order or thread count cannot change
the values.

Domains keep independent uses of one seed from colliding: the environment
itself, the initial height increments, and path-sampling noise draw from
disjoint streams.  Changing the law changes how many uniforms a site
consumes, so seeds are not portable across laws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .weights import WeightLaw

# Fold constants: splitmix64 increment plus three fixed odd 64-bit multipliers.
GOLD = np.uint64(0x9E3779B97F4A7C15)
DOMAIN_K = np.uint64(0xA24BAED4963EE407)
TIME_K = np.uint64(0xC2B2AE3D27D4EB4F)
SITE_K = np.uint64(0xD1342543DE82EF95)

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / 9007199254740992.0  # 2**-53

DOMAIN_ENV = 0
DOMAIN_INIT = 1
DOMAIN_PATH = 2

_MASK = (1 << 64) - 1


def _u64(v) -> np.uint64:
    """Two's-complement cast of a python int / int64 array to uint64."""
    if isinstance(v, np.ndarray):
        return v.astype(np.int64).view(np.uint64)
    return np.uint64(int(v) & _MASK)


def _mix64_int(z: int) -> int:
    # scalar splitmix64 finalizer in masked python ints (numpy scalar
    # uint64 arithmetic warns on the intended wraparound)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def mix64(z):
    """splitmix64 finalizer; accepts uint64 scalars or arrays."""
    if isinstance(z, np.ndarray):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))
    return np.uint64(_mix64_int(int(z) & _MASK))


def stream_root(seed: int, domain: int) -> np.uint64:
    seed_u = int(seed) & _MASK
    dom_u = int(domain) & _MASK
    h = _mix64_int((seed_u + int(GOLD)) & _MASK)
    return np.uint64(_mix64_int(h ^ (dom_u * int(DOMAIN_K) & _MASK)))


def row_root(root, tau: int) -> np.uint64:
    tau_u = int(tau) & _MASK
    return np.uint64(_mix64_int(int(root) ^ (tau_u * int(TIME_K) & _MASK)))

def uniforms_for_row(seed: int, domain: int, tau: int, x: np.ndarray, ndraws: int) -> np.ndarray:
    """(len(x), ndraws) array of (0,1) uniforms, bit-reproducible per site."""
    hrow = row_root(stream_root(seed, domain), tau)
    hsite = hrow + _u64(np.asarray(x)) * SITE_K
    out = np.empty((hsite.size, ndraws))
    for i in range(ndraws):
        z = mix64(hsite + np.uint64((i * int(GOLD)) & _MASK))
        out[:, i] = ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
    return out


@dataclass(frozen=True)
class EnvRow:
    """Contiguous slice of one time level: vectors[k] = u_tau(base + k, .)."""

    tau: int
    base: int
    vectors: np.ndarray  # (n_sites, 2M+1)

    def vector(self, x: int) -> np.ndarray:
        return self.vectors[x - self.base]


class SeededEnvironment:
    """The quenched environment omega as a pure function of (seed, x, tau)."""

    def __init__(self, seed: int, law: WeightLaw):
        self.seed = int(seed)
        self.law = law

    def row(self, tau: int, x_lo: int, x_hi: int) -> EnvRow:
        if x_lo > x_hi:
            raise ValueError(f"row: need x_lo <= x_hi, got {x_lo} > {x_hi}")
        x = np.arange(x_lo, x_hi + 1, dtype=np.int64)
        d = self.law.uniforms_per_site
        if d == 0:
            vecs = self.law.vectors_from_uniforms(np.empty((x.size, 0)))
        else:
            u = uniforms_for_row(self.seed, DOMAIN_ENV, tau, x, d)
            vecs = self.law.vectors_from_uniforms(u)
        return EnvRow(tau=tau, base=x_lo, vectors=vecs)

    def vector_at(self, x: int, tau: int) -> np.ndarray:
        return self.row(tau, x, x).vectors[0]


class TableEnvironment:
    """Explicit environment over a finite set of sites; used by the
    exhaustive-enumeration oracles where every assignment is visited."""

    def __init__(self, law: WeightLaw, table: dict[tuple[int, int], np.ndarray]):
        self.law = law
        self.table = table

    def row(self, tau: int, x_lo: int, x_hi: int) -> EnvRow:
        width = 2 * self.law.range_m + 1
        vecs = np.empty((x_hi - x_lo + 1, width))
        for k, x in enumerate(range(x_lo, x_hi + 1)):
            vecs[k] = self.table[(x, tau)]
        return EnvRow(tau=tau, base=x_lo, vectors=vecs)

    def vector_at(self, x: int, tau: int) -> np.ndarray:
        return np.asarray(self.table[(x, tau)])
