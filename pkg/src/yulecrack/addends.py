"""The infinitely divisible jump law: a subordinator stopped at an
independent exponential time.

With X ~ Exp(xi) and A the subordinator of a Bernstein family g, the jump
law is A(X).  Its survival function solves the relaxation equation
D u = -xi u under the convolution-type derivative of the family, which
relaxation_residual verifies on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from . import numeric
from .specfun import DEFAULT_CONTROL, mittag_leffler, mittag_leffler_log
from .subordinators import (
    GammaSub,
    Linear,
    PoissonSub,
    Stable,
    TemperedStable,
    _effective,
    laplace_exponent,
    sample_subordinator_many,
)


@dataclass(frozen=True)
class AddendLaw:
    """Jump law A(X) with X ~ Exp(xi) for a given Bernstein family."""

    family: object
    xi: float

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError("AddendLaw: xi must be positive")


def _gamma_density_log_integrand(t, x, b, xi):
    return t * math.log(b) - special.gammaln(t) + (t - 1.0) * math.log(x) - xi * t - b * x


def _gamma_density_quad(x, b, xi):
    """Shape-parameter quadrature of the gamma-family jump density.

    The integrand over the shape t is unimodal; its peak solves
    digamma(t) = log(b x) - xi, and the upper limit is pushed until the
    integrand falls 45 e-folds below the peak.
    """
    target = math.log(b * x) - xi

    def dlog(t):
        return special.digamma(t) - target

    hi = max(10.0, 4.0 * math.exp(target))
    while dlog(hi) < 0:
        hi *= 2.0
    t_peak = optimize.brentq(dlog, 1e-12, hi)
    log_peak = _gamma_density_log_integrand(max(t_peak, 1e-300), x, b, xi)
    upper = t_peak + 10.0
    while _gamma_density_log_integrand(upper, x, b, xi) > log_peak - 45.0:
        upper *= 1.5

    def integrand(t):
        return math.exp(_gamma_density_log_integrand(t, x, b, xi))

    val, _ = integrate.quad(
        integrand, 0.0, upper, points=[t_peak], limit=200, epsabs=0.0, epsrel=1e-10
    )
    return xi * val


def addend_density(law, x, ctrl=None):
    """Density of the jump law at x > 0 (continuous families only)."""
    ctrl = ctrl or DEFAULT_CONTROL
    if not x > 0:
        raise ValueError("addend_density: x must be positive")
    fam = _effective(law.family)
    xi = law.xi
    if isinstance(fam, PoissonSub):
        raise ValueError("addend_density: Poisson family is a discrete law; use addend_pmf")
    if isinstance(fam, Linear):
        return xi * math.exp(-xi * x)
    if isinstance(fam, Stable):
        a = fam.alpha
        return xi * x ** (a - 1.0) * mittag_leffler(a, a, -xi * x ** a, ctrl)
    if isinstance(fam, TemperedStable):
        a, mu = fam.alpha, fam.mu
        arg = -(xi - mu ** a) * x ** a
        if arg <= 0:
            ml = mittag_leffler(a, a, arg, ctrl)
            return xi * math.exp(-mu * x) * x ** (a - 1.0) * ml
        # strongly tempered regime xi < mu**alpha: the series grows, the
        # exp(-mu x) prefactor dominates; combine in log space
        lg = math.log(xi) - mu * x + (a - 1.0) * math.log(x) + mittag_leffler_log(a, a, arg, ctrl)
        return math.exp(lg)
    if isinstance(fam, GammaSub):
        return _gamma_density_quad(x, fam.b, xi)
    raise TypeError(f"unknown family {fam!r}")


def addend_pmf(law, k):
    """Geometric pmf of the Poisson-family jump law at integer k >= 0."""
    fam = _effective(law.family)
    if not isinstance(fam, PoissonSub):
        raise ValueError("addend_pmf is defined for the Poisson family only")
    if k < 0 or k != int(k):
        raise ValueError("addend_pmf: k must be a nonnegative integer")
    p = law.xi / (fam.kappa + law.xi)
    return p * (fam.kappa / (fam.kappa + law.xi)) ** int(k)


def _tempered_survival_quad(law, x, ctrl):
    fam = _effective(law.family)
    hi = x + 10.0 / min(law.xi, fam.mu)
    while addend_density(law, hi, ctrl) > 1e-15 and hi < 1e6:
        hi *= 1.5
    val, _ = integrate.quad(
        lambda y: addend_density(law, y, ctrl), x, hi, limit=300, epsabs=1e-12, epsrel=1e-10
    )
    return val


def _gamma_survival(xi, b, x):
    """xi * int_0^inf Q(z, b x) e^{-xi z} dz, the stopped-subordinator tail."""
    c = b * x

    def integrand(w):
        return special.gammaincc(np.maximum(w / xi, 1e-300), c) * np.exp(-w)

    pts = [min(xi * c, 50.0)] if xi * c > 0 else None
    val, _ = integrate.quad(integrand, 0.0, 60.0, points=pts, limit=300,
                            epsabs=1e-13, epsrel=1e-11)
    return val


def addend_survival(law, x, ctrl=None):
    """Survival function P{A(X) >= x}; equals 1 at x = 0 for every family."""
    ctrl = ctrl or DEFAULT_CONTROL
    if x < 0:
        raise ValueError("addend_survival: x must be >= 0")
    if x == 0:
        return 1.0
    fam = _effective(law.family)
    xi = law.xi
    if isinstance(fam, Linear):
        return math.exp(-xi * x)
    if isinstance(fam, Stable):
        return mittag_leffler(fam.alpha, 1.0, -xi * x ** fam.alpha, ctrl)
    if isinstance(fam, TemperedStable):
        return _tempered_survival_quad(law, x, ctrl)
    if isinstance(fam, GammaSub):
        return _gamma_survival(xi, fam.b, x)
    if isinstance(fam, PoissonSub):
        return (fam.kappa / (fam.kappa + xi)) ** math.ceil(x)
    raise TypeError(f"unknown family {fam!r}")


def addend_laplace_exponent(law, theta):
    """psi(theta) = log(1 + g(theta)/xi); zero at theta = 0."""
    g = laplace_exponent(law.family, theta)
    return np.log1p(g / law.xi) if not np.isscalar(theta) else float(math.log1p(g / law.xi))


def sample_addends(law, size, rng):
    """Vector of independent jump draws: Exp(xi) times fed to the subordinator."""
    times = rng.generator.exponential(1.0 / law.xi, size)
    return sample_subordinator_many(law.family, times, rng)


def sample_addend(law, rng):
    """One draw of the jump law."""
    return float(sample_addends(law, 1, rng)[0])


def relaxation_residual(law, grid, ctrl=None):
    """Max residual of D u + xi u = 0 for u = addend_survival on the grid.

    The pure-drift family (and Stable with alpha = 1) uses the plain central
    first derivative; all other families go through the product-integration
    convolution derivative.  A small initial layer is excluded for the
    singular-kernel families, where the survival function has a cusp at 0
    that no scheme resolves pointwise.
    """
    if isinstance(grid, numeric.GridFunction):
        nodes = grid.nodes
    else:
        nodes = np.asarray(grid, dtype=float)
    if nodes.size < 8:
        raise ValueError("relaxation_residual: grid too coarse (< 8 points)")
    ctrl = ctrl or DEFAULT_CONTROL
    u = np.array([addend_survival(law, float(x), ctrl) for x in nodes])
    fam = _effective(law.family)
    if isinstance(fam, Linear):
        d = numeric.first_derivative_nodes(nodes, u)
        resid = d + law.xi * u
        return float(np.max(np.abs(resid[1:-1])))
    d = numeric.conv_derivative_nodes(nodes, u, fam)
    resid = d + law.xi * u
    if isinstance(fam, PoissonSub):
        return float(np.max(np.abs(resid[1:])))
    return float(np.max(np.abs(resid[4:])))
