"""Laws of the random probability vectors driving the averaging dynamics.

Four families with closed-form first and second moments: a fixed vector,
a two-point Beta law on steps {-1, 0}, a Dirichlet vector over a symmetric
window, and a finite mixture of fixed vectors.  Every downstream constant
(drift, variances, beta, kappa, covariance kernels) is derived from the
exact moment queries here, so no estimator noise enters the analytics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .errors import InvalidLaw

PROB_TOL = 1e-12


def _as_prob_vector(values, what: str) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size % 2 != 1:
        raise InvalidLaw(f"{what}: need an odd-length 1-d vector over offsets -M..M, got shape {v.shape}")
    if np.any(v < -PROB_TOL) or np.any(v > 1 + PROB_TOL):
        raise InvalidLaw(f"{what}: entries outside [0,1]")
    s = v.sum()
    if abs(s - 1.0) > PROB_TOL:
        raise InvalidLaw(f"{what}: entries sum to {s!r}, deficit exceeds {PROB_TOL}")
    v = np.clip(v, 0.0, None)
    return v / v.sum()


@dataclass(frozen=True)
class SecondMomentMatrix:
    """Exact S(x,y) = E[u(x)u(y)] over the support window [-M, M]."""

    range_m: int
    matrix: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.range_m, self.range_m + 1)

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def autocorrelation(self) -> np.ndarray:
        """c(d) = sum_z S(z, z+d) for d in [-2M, 2M]; the one-step law of the
        difference of two walks sharing the environment."""
        k = self.matrix.shape[0]
        out = np.zeros(2 * k - 1)
        for d in range(-(k - 1), k):
            out[d + k - 1] = np.trace(self.matrix, offset=d)
        return out


class WeightLaw:
    """Base class; concrete variants implement the moment and sampling API."""

    range_m: int

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.range_m, self.range_m + 1)

    def annealed(self) -> np.ndarray:
        raise NotImplementedError

    def second_moment_matrix(self) -> SecondMomentMatrix:
        raise NotImplementedError

    @property
    def uniforms_per_site(self) -> int:
        raise NotImplementedError

    def vectors_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Map an (n, uniforms_per_site) array of (0,1) uniforms to (n, 2M+1)
        probability vectors.  The map is the law's fixed inverse-CDF
        construction, so equal uniforms give bit-equal vectors."""
        raise NotImplementedError

    def is_elliptic(self) -> bool:
        """Whether P{max_j u(j) < 1} > 0."""
        raise NotImplementedError

    def config_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Deterministic(WeightLaw):
    """Non-random weights: u == probs always."""

    probs: tuple[float, ...]
    range_m: int = field(init=False)
    _vector: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = _as_prob_vector(self.probs, "Deterministic")
        object.__setattr__(self, "probs", tuple(float(x) for x in v))
        object.__setattr__(self, "range_m", (v.size - 1) // 2)
        object.__setattr__(self, "_vector", v)

    def annealed(self) -> np.ndarray:
        return self._vector.copy()

    def second_moment_matrix(self) -> SecondMomentMatrix:
        return SecondMomentMatrix(self.range_m, np.outer(self._vector, self._vector))

    @property
    def uniforms_per_site(self) -> int:
        return 0

    def vectors_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        n = u.shape[0]
        return np.broadcast_to(self._vector, (n, self._vector.size)).copy()

    def is_elliptic(self) -> bool:
        return float(self._vector.max()) < 1.0

    def config_dict(self) -> dict:
        return {"variant": "deterministic", "probs": list(self.probs)}


@dataclass(frozen=True)
class TwoPointBeta(WeightLaw):
    """u(-1) ~ Beta(j, m-j), u(0) = 1 - u(-1); support hard-coded to {-1, 0}.

    Requires integers m > j >= 1.  Sampling uses the inverse CDF on a single
    uniform when j == 1 or m - j == 1, and the two-gamma construction
    (each gamma by inverse CDF) otherwise, so the draw count per site is fixed.
    """

    m: int
    j: int
    range_m: int = field(init=False)

    def __post_init__(self):
        if not (isinstance(self.m, int) and isinstance(self.j, int)):
            raise InvalidLaw("TwoPointBeta: m and j must be integers")
        if not self.m > self.j >= 1:
            raise InvalidLaw(f"TwoPointBeta: need m > j >= 1, got m={self.m}, j={self.j}")
        object.__setattr__(self, "range_m", 1)

    def beta_moments(self) -> tuple[float, float]:
        """(E[u], E[u^2]) for u = u(-1) ~ Beta(j, m-j)."""
        m, j = self.m, self.j
        return j / m, j * (j + 1) / (m * (m + 1))

    def annealed(self) -> np.ndarray:
        mu, _ = self.beta_moments()
        return np.array([mu, 1.0 - mu, 0.0])

    def second_moment_matrix(self) -> SecondMomentMatrix:
        mu, m2 = self.beta_moments()
        # E[u(1-u)] = mu - m2, E[(1-u)^2] = 1 - 2 mu + m2
        s = np.zeros((3, 3))
        s[0, 0] = m2
        s[0, 1] = s[1, 0] = mu - m2
        s[1, 1] = 1.0 - 2.0 * mu + m2
        return SecondMomentMatrix(1, s)

    @property
    def uniforms_per_site(self) -> int:
        return 1 if (self.j == 1 or self.m - self.j == 1) else 2

    def u_minus1_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        m, j = self.m, self.j
        if m == 2 and j == 1:
            return u[:, 0]
        if j == 1:
            return 1.0 - (1.0 - u[:, 0]) ** (1.0 / (m - 1))
        if m - j == 1:
            return u[:, 0] ** (1.0 / j)
        g1 = special.gammaincinv(j, u[:, 0])
        g2 = special.gammaincinv(m - j, u[:, 1])
        return g1 / (g1 + g2)

    def vectors_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        w = self.u_minus1_from_uniforms(u)
        out = np.zeros((w.size, 3))
        out[:, 0] = w
        out[:, 1] = 1.0 - w
        return out

    def is_elliptic(self) -> bool:
        return True  # Beta puts no mass on {0, 1}

    def config_dict(self) -> dict:
        return {"variant": "two_point_beta", "m": self.m, "j": self.j}


@dataclass(frozen=True)
class DirichletWindow(WeightLaw):
    """u ~ Dirichlet(alpha) over the 2M+1 offsets; sampled as normalized
    inverse-CDF gammas (one uniform per slot)."""

    alpha: tuple[float, ...]
    range_m: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 1 or a.size % 2 != 1 or a.size < 3:
            raise InvalidLaw("DirichletWindow: alpha must be odd-length with at least 3 slots")
        if np.any(a <= 0):
            raise InvalidLaw("DirichletWindow: all concentrations must be positive")
        object.__setattr__(self, "alpha", tuple(float(x) for x in a))
        object.__setattr__(self, "range_m", (a.size - 1) // 2)

    def annealed(self) -> np.ndarray:
        a = np.asarray(self.alpha)
        return a / a.sum()

    def second_moment_matrix(self) -> SecondMomentMatrix:
        a = np.asarray(self.alpha)
        a0 = a.sum()
        s = np.outer(a, a) / (a0 * (a0 + 1.0))
        s[np.diag_indices_from(s)] = a * (a + 1.0) / (a0 * (a0 + 1.0))
        return SecondMomentMatrix(self.range_m, s)

    @property
    def uniforms_per_site(self) -> int:
        return len(self.alpha)

    def vectors_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        a = np.asarray(self.alpha)
        g = special.gammaincinv(a[None, :], u)
        return g / g.sum(axis=1, keepdims=True)

    def is_elliptic(self) -> bool:
        return True  # Dirichlet density lives on the open simplex

    def config_dict(self) -> dict:
        return {"variant": "dirichlet", "alpha": list(self.alpha)}


@dataclass(frozen=True)
class FiniteMixture(WeightLaw):
    """u equals fixed vector v_k with probability p_k (one uniform per site)."""

    components: tuple[tuple[float, tuple[float, ...]], ...]
    range_m: int = field(init=False)
    _weights: np.ndarray = field(init=False, repr=False, compare=False)
    _vectors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.components:
            raise InvalidLaw("FiniteMixture: need at least one component")
        w = np.array([c[0] for c in self.components], dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > PROB_TOL:
            raise InvalidLaw("FiniteMixture: component probabilities must be >= 0 and sum to 1")
        w = w / w.sum()
        vecs = [_as_prob_vector(c[1], f"FiniteMixture component {i}") for i, c in enumerate(self.components)]
        sizes = {v.size for v in vecs}
        if len(sizes) != 1:
            raise InvalidLaw("FiniteMixture: all component vectors must share one support window")
        v = np.stack(vecs)
        object.__setattr__(
            self, "components", tuple((float(a), tuple(float(x) for x in b)) for a, b in zip(w, v))
        )
        object.__setattr__(self, "range_m", (v.shape[1] - 1) // 2)
        object.__setattr__(self, "_weights", w)
        object.__setattr__(self, "_vectors", v)

    def annealed(self) -> np.ndarray:
        return self._weights @ self._vectors

    def second_moment_matrix(self) -> SecondMomentMatrix:
        s = np.einsum("k,ki,kj->ij", self._weights, self._vectors, self._vectors)
        return SecondMomentMatrix(self.range_m, s)

    @property
    def uniforms_per_site(self) -> int:
        return 1

    def component_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self._weights)
        return np.searchsorted(cum, u[:, 0], side="right").clip(0, len(self._weights) - 1)

    def vectors_from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return self._vectors[self.component_from_uniforms(u)]

    def is_elliptic(self) -> bool:
        return any(w > 0 and max(v) < 1.0 for w, v in zip(self._weights, self._vectors))

    def config_dict(self) -> dict:
        return {
            "variant": "mixture",
            "components": [{"weight": w, "probs": list(v)} for w, v in self.components],
        }


@dataclass(frozen=True)
class DriftMoments:
    V: float
    sigma_D2: float
    sigma_a2: float


def annealed_vector(law: WeightLaw) -> np.ndarray:
    """p(0, .) = E[u(0, .)] over offsets -M..M."""
    return law.annealed()


def second_moments(law: WeightLaw) -> SecondMomentMatrix:
    return law.second_moment_matrix()


def drift_moments(law: WeightLaw) -> DriftMoments:
    """Mean drift V, drift variance sigma_D^2, annealed step variance sigma_a^2."""
    p = law.annealed()
    x = law.offsets.astype(float)
    v = float(x @ p)
    s = law.second_moment_matrix().matrix
    e_d2 = float(x @ s @ x)
    sigma_d2 = max(e_d2 - v * v, 0.0)
    sigma_a2 = float(((x - v) ** 2) @ p)
    return DriftMoments(V=v, sigma_D2=sigma_d2, sigma_a2=sigma_a2)


def support_span(p: np.ndarray, offsets: np.ndarray, tol: float = 1e-15) -> int:
    """Lattice span of the support of p: gcd of offsets relative to the
    leftmost support point.  0 means single-point support (no step at all)."""
    supp = offsets[np.asarray(p) > tol]
    if supp.size <= 1:
        return 0
    base = supp[0]
    g = 0
    for z in supp[1:]:
        g = math.gcd(g, int(z - base))
    return g


@dataclass(frozen=True)
class LawDiagnostics:
    span: int
    elliptic: bool
    moments: DriftMoments
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures


def validate(law: WeightLaw) -> LawDiagnostics:
    """Check the standing assumptions (span 1, ellipticity, sigma_a^2 > 0).

    Returns a report with a failure list; never raises.
    """
    p = law.annealed()
    mom = drift_moments(law)
    span = support_span(p, law.offsets)
    elliptic = law.is_elliptic()
    failures = []
    if span != 1:
        failures.append(f"span: annealed support has lattice span {span}, need 1")
    if not elliptic:
        failures.append("ellipticity: P{max_j u(j) < 1} = 0, no genuine averaging")
    if mom.sigma_a2 <= 0:
        failures.append("variance: annealed step variance is zero")
    return LawDiagnostics(span=span, elliptic=elliptic, moments=mom, failures=tuple(failures))


def law_from_config(spec: dict) -> WeightLaw:
    """Build a law from its config mapping (see README for the schema)."""
    if not isinstance(spec, dict) or "variant" not in spec:
        raise InvalidLaw("law spec must be a mapping with a 'variant' key")
    kind = spec["variant"]
    extra = {k: v for k, v in spec.items() if k != "variant"}
    try:
        if kind == "deterministic":
            return Deterministic(probs=tuple(extra.pop("probs")), **extra)
        if kind == "two_point_beta":
            return TwoPointBeta(m=int(extra.pop("m")), j=int(extra.pop("j")), **extra)
        if kind == "dirichlet":
            return DirichletWindow(alpha=tuple(extra.pop("alpha")), **extra)
        if kind == "mixture":
            comps = tuple((c["weight"], tuple(c["probs"])) for c in extra.pop("components"))
            return FiniteMixture(components=comps, **extra)
    except (KeyError, TypeError) as exc:
        raise InvalidLaw(f"law spec for variant {kind!r} is malformed: {exc}") from exc
    raise InvalidLaw(f"unknown law variant {kind!r}")
