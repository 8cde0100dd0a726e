"""Closed-form constants and limiting covariance kernels.

Everything here is deterministic arithmetic on the exact moments of a
weight law: the drift V and variances sigma_D^2 / sigma_a^2, the
characteristic-function pair (lambda, lambda_bar), the ratio integral
defining beta, the combined constant kappa = sigma_D^2 / (beta sigma_a^2),
the Gaussian antiderivative helper Psi, and the two covariance kernels
Gamma_q (dynamical noise) and Gamma_0 (initial noise) whose weighted sum
is the limiting fluctuation covariance along the characteristic.

Each kernel ships in two forms: the Psi closed form (returned to callers)
and the direct integral form (quadrature reference used by the tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, InvalidLaw, QuadratureFailure, SpanViolation, UnsupportedLaw
from .weights import WeightLaw, drift_moments, support_span, validate

_SQRT2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# quadrature

def adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 50) -> float:
    """Adaptive Simpson with interval bisection to absolute tolerance.

    Accepts each panel when the Richardson error estimate |S2 - S1|/15 is
    below the panel's tolerance share; raises QuadratureFailure past
    max_depth bisections.
    """
    if a == b:
        return 0.0

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, tol, depth):
        xm = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + xm)
        xr = 0.5 * (xm + x2)
        fl, fr = f(xl), f(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        err = left + right - whole
        if abs(err) <= 15.0 * tol:
            return left + right + err / 15.0
        if depth >= max_depth:
            raise QuadratureFailure(
                f"adaptive Simpson exceeded depth {max_depth} on [{x0}, {x2}]"
            )
        return recurse(x0, xm, f0, fl, f1, left, 0.5 * tol, depth + 1) + recurse(
            xm, x2, f1, fr, f2, right, 0.5 * tol, depth + 1
        )

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


# ---------------------------------------------------------------------------
# characteristic functions and beta

def _autocorrelations(law: WeightLaw):
    """(c_q, c_qbar) over separations d = -2M..2M: the one-step laws of the
    difference of two walks in a shared / in independent environments."""
    s = law.second_moment_matrix()
    c_q = s.autocorrelation()
    p = law.annealed()
    c_qb = np.convolve(p, p[::-1])
    return c_q, c_qb


def char_lambdas(law: WeightLaw, t: float) -> tuple[float, float]:
    """lambda(t) = E|phi^omega(t)|^2 and lambda_bar(t) = |E phi^omega(t)|^2."""
    c_q, c_qb = _autocorrelations(law)
    m2 = len(c_q) // 2
    d = np.arange(-m2, m2 + 1)
    cos = np.cos(t * d)
    return float(c_q @ cos), float(c_qb @ cos)


def beta_integrand_limit(law: WeightLaw) -> float:
    """Limit of (1 - lambda)/(1 - lambda_bar) as t -> 0.

    Second-order expansion: 1 - lambda(t) ~ (sigma_a^2 - sigma_D^2) t^2 and
    1 - lambda_bar(t) ~ sigma_a^2 t^2, because the two kernels are the step
    laws of walk differences with variances 2(sigma_a^2 - sigma_D^2) and
    2 sigma_a^2.
    """
    mom = drift_moments(law)
    return 1.0 - mom.sigma_D2 / mom.sigma_a2


def beta_integrand(law: WeightLaw):
    """The ratio (1-lambda)/(1-lambda_bar) on (0, pi], with the removable
    singularity at t = 0 filled by its analytic limit.

    Both differences are evaluated as 4 sum_{d>=1} c(d) sin^2(td/2), which
    is free of cancellation for small t.
    """
    c_q, c_qb = _autocorrelations(law)
    m2 = len(c_q) // 2
    d = np.arange(1, m2 + 1)
    aq = c_q[m2 + 1 :]
    ab = c_qb[m2 + 1 :]
    limit = beta_integrand_limit(law)

    def f(t: float) -> float:
        if t == 0.0:
            return limit
        s2 = np.sin(0.5 * t * d) ** 2
        num = 4.0 * float(aq @ s2)
        den = 4.0 * float(ab @ s2)
        return num / den

    return f


def beta_quadrature(law: WeightLaw, tol: float = 1e-10) -> float:
    """beta = (1/2pi) Int_{-pi}^{pi} (1-lambda)/(1-lambda_bar) dt.

    The integrand is even, so integrate [0, pi] and scale by 1/pi.
    Requires span 1; otherwise the denominator vanishes inside (0, pi].
    """
    diag = validate(law)
    if diag.span != 1:
        raise SpanViolation(f"beta is defined only for span-1 laws, got span {diag.span}")
    f = beta_integrand(law)
    return adaptive_simpson(f, 0.0, math.pi, tol * math.pi / 2.0) / math.pi


def beta_two_point(law: WeightLaw) -> float:
    """Closed form E[u(0)u(-1)] / sigma_a^2 for laws supported on {-1, 0}."""
    p = law.annealed()
    off = law.offsets
    outside = (off != -1) & (off != 0)
    if np.any(p[outside] > 0):
        raise UnsupportedLaw("beta_two_point needs annealed support inside {-1, 0}")
    s = law.second_moment_matrix()
    m = law.range_m
    e_cross = float(s.matrix[m + 0, m - 1])  # E[u(0) u(-1)]
    return e_cross / drift_moments(law).sigma_a2


# ---------------------------------------------------------------------------
# constants

@dataclass(frozen=True)
class Constants:
    """The model constants of the limit theory for one weight law."""

    V: float
    b: float
    sigma_D2: float
    sigma_a2: float
    beta: float
    kappa: float

    @property
    def sigma_a(self) -> float:
        return math.sqrt(self.sigma_a2)

    def to_dict(self) -> dict:
        return {
            "V": self.V,
            "b": self.b,
            "sigma_D2": self.sigma_D2,
            "sigma_a2": self.sigma_a2,
            "beta": self.beta,
            "kappa": self.kappa,
        }


def constants_for(law: WeightLaw, beta_tol: float = 1e-12) -> Constants:
    """Compute all constants; beta by closed form for two-point supports,
    by quadrature otherwise."""
    diag = validate(law)
    if not diag.ok:
        raise InvalidLaw("law fails standing assumptions: " + "; ".join(diag.failures))
    mom = diag.moments
    try:
        beta = beta_two_point(law)
    except UnsupportedLaw:
        beta = beta_quadrature(law, tol=beta_tol)
    kappa = mom.sigma_D2 / (beta * mom.sigma_a2)
    return Constants(
        V=mom.V, b=-mom.V, sigma_D2=mom.sigma_D2, sigma_a2=mom.sigma_a2, beta=beta, kappa=kappa
    )


# ---------------------------------------------------------------------------
# Gaussian helpers

def gauss_pdf(x: float, var: float) -> float:
    if var < 0:
        raise DomainError(f"variance must be >= 0, got {var}")
    if var == 0:
        raise DomainError("density of the zero-variance Gaussian is undefined")
    return math.exp(-0.5 * x * x / var) / math.sqrt(2.0 * math.pi * var)


def gauss_cdf(x: float, var: float) -> float:
    # erfc from libm: correctly rounded to a few ulps, well inside the
    # 1e-12 relative accuracy the Psi tail differences need
    if var < 0:
        raise DomainError(f"variance must be >= 0, got {var}")
    if var == 0:
        return 1.0 if x >= 0 else 0.0
    return 0.5 * math.erfc(-x / math.sqrt(2.0 * var))


def gauss_sf(x: float, var: float) -> float:
    if var < 0:
        raise DomainError(f"variance must be >= 0, got {var}")
    if var == 0:
        return 0.0 if x >= 0 else 1.0
    return 0.5 * math.erfc(x / math.sqrt(2.0 * var))


def psi(x: float, var: float) -> float:
    """Psi_var(x) = var phi_var(x) - x (1 - Phi_var(x)); an antiderivative of
    Phi_var - 1 in x and of phi_var(x)/2 in var.  Psi_0(x) = max(-x, 0)."""
    if var < 0:
        raise DomainError(f"variance must be >= 0, got {var}")
    if var == 0:
        return max(-x, 0.0)
    return var * gauss_pdf(x, var) - x * gauss_sf(x, var)


def gaussian_helpers(x: float, var: float) -> tuple[float, float, float]:
    """(pdf, cdf, Psi) at (x, var); var must be positive for the pdf."""
    return gauss_pdf(x, var), gauss_cdf(x, var), psi(x, var)


# ---------------------------------------------------------------------------
# covariance kernels

def _check_times(s: float, t: float):
    if s < 0 or t < 0:
        raise DomainError(f"times must be >= 0, got ({s}, {t})")


def gamma_q(s: float, q: float, t: float, r: float, c: Constants) -> float:
    """Dynamical-noise kernel: kappa [Psi_{sa2(t+s)}(|q-r|) - Psi_{sa2|t-s|}(|q-r|)]."""
    _check_times(s, t)
    if s == 0.0 or t == 0.0:
        return 0.0
    d = abs(q - r)
    sa2 = c.sigma_a2
    return c.kappa * (psi(d, sa2 * (t + s)) - psi(d, sa2 * abs(t - s)))


def gamma_q_integral(s, q, t, r, c: Constants, tol: float = 1e-10) -> float:
    """Reference form: (kappa/2) Int_{sa2|t-s|}^{sa2(t+s)} phi_v(q-r) dv.

    Integrated in w = sqrt(v), where the integrand is bounded and smooth,
    so the v -> 0 endpoint at q = r needs no special handling.
    """
    _check_times(s, t)
    if s == 0.0 or t == 0.0:
        return 0.0
    d = q - r
    sa2 = c.sigma_a2
    w0, w1 = math.sqrt(sa2 * abs(t - s)), math.sqrt(sa2 * (t + s))

    def f(w):
        if w == 0.0:
            return 0.0 if d != 0.0 else 2.0 / _SQRT2PI
        return (2.0 / _SQRT2PI) * math.exp(-0.5 * d * d / (w * w))

    return 0.5 * c.kappa * adaptive_simpson(f, w0, w1, tol)


def gamma_0(s: float, q: float, t: float, r: float, sigma_a2: float) -> float:
    """Initial-noise kernel: Psi_{sa2 s} + Psi_{sa2 t} - Psi_{sa2(s+t)} at |q-r|."""
    _check_times(s, t)
    if s == 0.0 or t == 0.0:
        return 0.0
    d = abs(q - r)
    return psi(d, sigma_a2 * s) + psi(d, sigma_a2 * t) - psi(d, sigma_a2 * (s + t))


def gamma_0_integral(s, q, t, r, sigma_a2: float, tol: float = 1e-10) -> float:
    """Reference form: the four Brownian tail-probability integrals.

    P[sigma_a B(s) > x - q] = 1 - Phi_{sa2 s}(x - q) etc.; the two infinite
    integrals are truncated 12 standard deviations past q v r / q ^ r,
    where the integrand is below 1e-30.
    """
    _check_times(s, t)
    if s == 0.0 or t == 0.0:
        return 0.0
    vs, vt = sigma_a2 * s, sigma_a2 * t
    cut = 12.0 * math.sqrt(max(vs, vt))
    hi, lo = max(q, r), min(q, r)

    def up(x):
        return gauss_sf(x - q, vs) * gauss_sf(x - r, vt)

    def down(x):
        return gauss_cdf(x - q, vs) * gauss_cdf(x - r, vt)

    total = adaptive_simpson(up, hi, hi + cut, tol / 4)
    total += adaptive_simpson(down, lo - cut, lo, tol / 4)
    if r > q:
        total -= adaptive_simpson(lambda x: gauss_sf(x - q, vs) * gauss_cdf(x - r, vt), q, r, tol / 4)
    elif q > r:
        total -= adaptive_simpson(lambda x: gauss_cdf(x - q, vs) * gauss_sf(x - r, vt), r, q, tol / 4)
    return total


@dataclass(frozen=True)
class CovParams:
    """Local initial-condition data at the base point of the characteristic:
    mean increment rho_bar = rho(ybar) and variance v_bar = v(ybar)."""

    rho_bar: float
    v_bar: float

    def __post_init__(self):
        if self.v_bar < 0:
            raise DomainError(f"v_bar must be >= 0, got {self.v_bar}")


def rap_covariance(s, q, t, r, p: CovParams, c: Constants) -> float:
    """Limiting fluctuation covariance: rho_bar^2 Gamma_q + v_bar Gamma_0."""
    return p.rho_bar**2 * gamma_q(s, q, t, r, c) + p.v_bar * gamma_0(s, q, t, r, c.sigma_a2)


def rap_covariance_temporal(s: float, t: float, p: CovParams, c: Constants) -> float:
    """Fixed-location specialization (q = r): the sqrt form in |t - s|."""
    _check_times(s, t)
    sa = c.sigma_a
    dyn = c.kappa * sa / _SQRT2PI * p.rho_bar**2 * (math.sqrt(s + t) - math.sqrt(abs(t - s)))
    ini = sa / _SQRT2PI * p.v_bar * (math.sqrt(s) + math.sqrt(t) - math.sqrt(s + t))
    return dyn + ini


def forward_mean_coefficient(c: Constants) -> float:
    """c_a with Var a(t, r) = c_a sqrt(t): sigma_D^2 / (beta sqrt(pi sigma_a^2))."""
    return c.sigma_D2 / (c.beta * math.sqrt(math.pi * c.sigma_a2))


def stationary_temporal_covariance(s: float, t: float, rho: float, c: Constants) -> float:
    """Fixed-location covariance in the stationary two-point case
    (v = kappa rho^2): the Hurst-1/4 fractional Brownian motion form
    (sigma_a kappa rho^2 / sqrt(2 pi)) (sqrt s + sqrt t - sqrt|t-s|)."""
    _check_times(s, t)
    coef = c.sigma_a * c.kappa * rho * rho / _SQRT2PI
    return coef * (math.sqrt(s) + math.sqrt(t) - math.sqrt(abs(t - s)))
