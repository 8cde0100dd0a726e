"""Exact kernels and Green functions of the two-walk difference chain.

Two independent walks in a common environment differ by a Markov chain
whose step law is homogeneous (qbar, the symmetrized annealed step) away
from the origin and perturbed (q, built from the weight second moments)
at the origin.  Green functions of this chain are computed exactly by
convolution over the full support (no windowing), and give three
independent routes to beta plus the n^{-1/2} scaling limits that the
Monte Carlo experiments are checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytics import Constants, psi
from .errors import CapacityError, NoConvergence
from .weights import WeightLaw

DEFAULT_CELL_BUDGET = 2_000_000_000


@dataclass(frozen=True)
class LatticeKernel:
    """Symmetric pmf over offsets [-halfwidth, halfwidth]."""

    pmf: np.ndarray
    halfwidth: int = field(init=False)

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=float)
        object.__setattr__(self, "pmf", p)
        object.__setattr__(self, "halfwidth", (p.size - 1) // 2)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.halfwidth, self.halfwidth + 1)

    def prob(self, y: int) -> float:
        if abs(y) > self.halfwidth:
            return 0.0
        return float(self.pmf[y + self.halfwidth])

    def variance(self) -> float:
        x = self.offsets.astype(float)
        m = float(x @ self.pmf)
        return float(((x - m) ** 2) @ self.pmf)

    def support_halfwidth(self, tol: float = 0.0) -> int:
        nz = np.nonzero(self.pmf > tol)[0]
        hw = self.halfwidth
        return int(max(abs(nz[0] - hw), abs(nz[-1] - hw)))


def q_kernels(law: WeightLaw) -> tuple[LatticeKernel, LatticeKernel]:
    """(q, qbar): origin-perturbed and homogeneous difference-step laws.

    q(0,y) = sum_z E[u(z) u(z+y)], qbar(0,y) = sum_z p(0,z) p(0,z+y).
    """
    s = law.second_moment_matrix()
    p = law.annealed()
    q = LatticeKernel(s.autocorrelation())
    qbar = LatticeKernel(np.convolve(p, p[::-1]))
    return q, qbar


@dataclass(frozen=True)
class PerturbedWalk:
    origin: LatticeKernel  # step law at the origin
    off: LatticeKernel     # step law everywhere else

    @classmethod
    def for_law(cls, law: WeightLaw) -> "PerturbedWalk":
        q, qbar = q_kernels(law)
        return cls(origin=q, off=qbar)

    @classmethod
    def homogeneous(cls, kernel: LatticeKernel) -> "PerturbedWalk":
        return cls(origin=kernel, off=kernel)


@dataclass
class GreenTable:
    """G_n(x, 0) = sum_{k<=n} q^k(x, 0) over the exact support window."""

    horizon: int
    lo: int                      # lattice coordinate of values[0]
    values: np.ndarray           # G_n(x, 0), x = lo..lo+len-1
    origin_history: np.ndarray   # G_k(0, 0) for k = 0..n
    checkpoints: list            # (k, G_k(0,0), max increment) rows

    def value(self, x: int) -> float:
        i = x - self.lo
        if i < 0 or i >= self.values.size:
            return 0.0
        return float(self.values[i])

    def max_increment(self) -> float:
        return float(np.max(np.abs(np.diff(self.values))))


def _step(f: np.ndarray, lo: int, walk: PerturbedWalk) -> tuple[np.ndarray, int]:
    """One backward-transition step of f_k(x) = q^k(x, 0):
    f'(x) = sum_d kern_x(d) f(x + d), kern = origin row at x = 0."""
    off = walk.off.pmf
    fn = np.convolve(f, off[::-1])
    nlo = lo - walk.off.halfwidth
    i0 = -nlo
    if 0 <= i0 < fn.size:
        ori = walk.origin.pmf
        hw = walk.origin.halfwidth
        acc = 0.0
        for d in range(-hw, hw + 1):
            j = d - lo
            if 0 <= j < f.size:
                acc += ori[d + hw] * f[j]
        fn[i0] = acc
    return fn, nlo


def green_table(
    walk: PerturbedWalk,
    n: int,
    checkpoints: tuple[int, ...] = (),
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> GreenTable:
    """Exact Green table by n convolution steps with full support tracking.

    The G accumulation across k uses compensated summation; each G_n(x,0)
    is a sum of n+1 like-signed terms.
    """
    if n < 0:
        raise ValueError("horizon must be >= 0")
    hw = max(walk.off.halfwidth, walk.origin.halfwidth)
    cells = (n + 1) * (n * hw + 1)  # upper bound on accumulated support cells
    if cells > cell_budget:
        raise CapacityError(f"green_table needs ~{cells:.2e} cells, budget {cell_budget:.2e}")

    final_lo = -n * walk.off.halfwidth
    width = 2 * (-final_lo) + 1
    g = np.zeros(width)
    comp = np.zeros(width)  # Kahan compensation
    f = np.array([1.0])
    lo = 0
    origin_hist = np.empty(n + 1)
    rows = []
    ckset = set(checkpoints)

    def accumulate(fk, flo):
        i = flo - final_lo
        y = fk - comp[i : i + fk.size]
        t = g[i : i + fk.size] + y
        comp[i : i + fk.size] = (t - g[i : i + fk.size]) - y
        g[i : i + fk.size] = t

    accumulate(f, lo)
    origin_hist[0] = 1.0
    for k in range(1, n + 1):
        f, lo = _step(f, lo, walk)
        accumulate(f, lo)
        origin_hist[k] = g[-final_lo]
        if k in ckset:
            rows.append((k, float(g[-final_lo]), float(np.max(np.abs(np.diff(g))))))
    return GreenTable(
        horizon=n, lo=final_lo, values=g, origin_history=origin_hist, checkpoints=rows
    )


# ---------------------------------------------------------------------------
# potential kernel

class _GreenDifferenceAccumulator:
    """Incremental d_n(x) = Gbar_n(0,0) - Gbar_n(x,0) for a homogeneous
    kernel; differences are accumulated directly so no large-value
    cancellation enters."""

    def __init__(self, kernel: LatticeKernel, xs):
        self.xs = list(xs)
        self.rev = kernel.pmf[::-1]
        self.hw = kernel.halfwidth
        self.f = np.array([1.0])
        self.lo = 0
        self.k = 0
        self.acc = np.array([1.0 - (1.0 if x == 0 else 0.0) for x in self.xs])

    def advance_to(self, horizon: int) -> np.ndarray:
        while self.k < horizon:
            self.f = np.convolve(self.f, self.rev)
            self.lo -= self.hw
            self.k += 1
            f0 = self.f[-self.lo]
            for m, x in enumerate(self.xs):
                j = x - self.lo
                fx = self.f[j] if 0 <= j < self.f.size else 0.0
                self.acc[m] += f0 - fx
        return self.acc.copy()


def _richardson(values: np.ndarray, hs: np.ndarray, exponents=(1, 3, 5, 7)) -> np.ndarray:
    """Eliminate the known error powers of h = n^{-1/2} from a sequence of
    approximations at geometrically shrinking h.  Returns the triangle's
    last column (one extrapolated value per usable tail length)."""
    vals = [values.astype(float).copy()]
    cur = values.astype(float).copy()
    for lvl, p in enumerate(exponents):
        if len(cur) < 2:
            break
        nxt = np.empty(len(cur) - 1)
        for i in range(len(cur) - 1):
            rp = (hs[i + lvl + 1] / hs[i + lvl]) ** p
            nxt[i] = (cur[i + 1] - rp * cur[i]) / (1.0 - rp)
        cur = nxt
        vals.append(cur)
    return cur


def potential_kernel_table(
    kernel: LatticeKernel,
    xs,
    n_max: int = 32768,
    tol: float = 1e-8,
    n0: int = 256,
) -> np.ndarray:
    """abar(x) = lim_n {Gbar_n(0,0) - Gbar_n(x,0)} for each x in xs.

    The raw differences converge like abar - c1 n^{-1/2} - c2 n^{-3/2} - ...,
    far too slowly to meet tol directly, so the sequence at doubling
    horizons is Richardson-extrapolated in h = n^{-1/2} (odd powers only,
    by the symmetric local expansion of the return probabilities).
    Convergence is declared when the last two extrapolated values agree
    within tol at three successive horizons.
    """
    xs = [int(x) for x in xs]
    if kernel.support_halfwidth() <= 1:
        # nearest-neighbor symmetric walk: exact closed form |x| / Var(qbar)
        v = kernel.variance()
        return np.array([abs(x) / v for x in xs])
    if n0 * 4 > n_max:
        raise ValueError("n_max too small for extrapolation; need >= 3 doubling horizons")
    acc = _GreenDifferenceAccumulator(kernel, xs)
    horizons: list[int] = []
    rows: list[np.ndarray] = []
    ests: list[np.ndarray] = []
    n = n0
    while n <= n_max:
        horizons.append(n)
        rows.append(acc.advance_to(n))
        hs = 1.0 / np.sqrt(np.array(horizons, dtype=float))
        d = np.stack(rows)
        ests.append(
            np.array([_richardson(d[:, m], hs)[-1] for m in range(len(xs))])
        )
        if len(ests) >= 3:
            d1 = np.abs(ests[-1] - ests[-2])
            d2 = np.abs(ests[-2] - ests[-3])
            if np.all(d1 < tol) and np.all(d2 < tol):
                out = ests[-1].copy()
                out[[m for m, x in enumerate(xs) if x == 0]] = 0.0
                return out
        n *= 2
    worst = int(np.argmax(np.abs(ests[-1] - ests[-2])))
    raise NoConvergence(
        f"potential kernel at x={xs[worst]} did not stabilize to {tol} by n={horizons[-1]}",
        last_two=(float(ests[-2][worst]), float(ests[-1][worst])),
    )


def potential_kernel(kernel: LatticeKernel, x: int, n_max: int = 32768, tol: float = 1e-8) -> float:
    return float(potential_kernel_table(kernel, [x], n_max=n_max, tol=tol)[0])


def beta_from_potential(q: LatticeKernel, abar) -> float:
    """beta = sum_x q(0,x) abar(x)."""
    total = 0.0
    for y in q.offsets:
        p = q.prob(int(y))
        if p > 0:
            total += p * abar(int(y))
    return total


def beta_via_potential(law: WeightLaw, n_max: int = 32768, tol: float = 1e-8) -> float:
    """The Green-function route to beta: potential kernel of qbar summed
    against the perturbed kernel q."""
    q, qbar = q_kernels(law)
    ys = [int(y) for y in q.offsets if q.prob(int(y)) > 0]
    table = potential_kernel_table(qbar, ys, n_max=n_max, tol=tol)
    lookup = dict(zip(ys, table))
    return beta_from_potential(q, lambda y: lookup[y])


def perturbed_difference_diagnostic(law: WeightLaw, x: int, n: int) -> tuple[float, float]:
    """Diagnostic only: (G_n(0,0) - G_n(x,0), abar(x)/beta).

    The difference converges to abar(x)/beta, but with no usable rate, so
    this is not gated anywhere; it exists to eyeball the perturbed chain's
    potential-kernel behaviour."""
    walk = PerturbedWalk.for_law(law)
    table = green_table(walk, n)
    q, qbar = q_kernels(law)
    abar = potential_kernel(qbar, x)
    from .analytics import beta_two_point, beta_quadrature
    from .errors import UnsupportedLaw

    try:
        beta = beta_two_point(law)
    except UnsupportedLaw:
        beta = beta_quadrature(law)
    return table.value(0) - table.value(x), abar / beta


# ---------------------------------------------------------------------------
# asymptotics report

@dataclass(frozen=True)
class GreenAsymptoticsRow:
    x: float
    x_n: int
    green: float
    scaled: float      # n^{-1/2} G_n(x_n, 0)
    limit: float
    rel_err: float


@dataclass(frozen=True)
class GreenAsymptoticsReport:
    n: int
    rows: tuple[GreenAsymptoticsRow, ...]
    origin_limit: float          # 1 / (beta sqrt(pi sigma_a^2))
    max_increment: float
    increment_checkpoints: tuple  # (k, G_k(0,0), max increment)
    ratio_origin: float          # Gbar_n(0,0) / G_n(0,0), converges to beta


def green_asymptotics_report(
    walk: PerturbedWalk,
    c: Constants,
    n: int,
    x_points,
    checkpoints: tuple[int, ...] = (),
) -> GreenAsymptoticsReport:
    """Scaled Green values against the local-limit prediction
    n^{-1/2} G_n(x sqrt n, 0) -> Psi_{2 sigma_a^2}(|x|) / (beta sigma_a^2),
    whose x = 0 value is 1/(beta sqrt(pi sigma_a^2))."""
    table = green_table(walk, n, checkpoints=checkpoints)
    bar = green_table(PerturbedWalk.homogeneous(walk.off), n)
    sqn = math.sqrt(n)
    rows = []
    for x in x_points:
        x_n = int(round(x * sqn))
        g = table.value(x_n)
        limit = psi(abs(x), 2.0 * c.sigma_a2) / (c.beta * c.sigma_a2)
        scaled = g / sqn
        rows.append(
            GreenAsymptoticsRow(
                x=float(x), x_n=x_n, green=g, scaled=scaled, limit=limit,
                rel_err=abs(scaled - limit) / limit,
            )
        )
    return GreenAsymptoticsReport(
        n=n,
        rows=tuple(rows),
        origin_limit=1.0 / (c.beta * math.sqrt(math.pi * c.sigma_a2)),
        max_increment=table.max_increment(),
        increment_checkpoints=tuple(table.checkpoints),
        ratio_origin=bar.value(0) / table.value(0),
    )
