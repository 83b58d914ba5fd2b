"""Bernstein-function families, tail measures and exact subordinator samplers.

Five families are supported, identified by small frozen dataclasses:
pure drift (Linear), one-sided stable, exponentially tempered stable, gamma
and Poisson.  Each provides its Laplace exponent g (so E exp(-theta A(t)) =
exp(-g(theta) t)), the tail of its Levy measure (the kernel of the
convolution-type derivative) and an exact draw of A(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special


@dataclass(frozen=True)
class Linear:
    """Pure unit drift: A(t) = t, g(theta) = theta."""


@dataclass(frozen=True)
class Stable:
    """One-sided alpha-stable subordinator, g(theta) = theta**alpha.

    alpha = 1 is accepted and degenerates to the pure drift; every operation
    dispatches it to the Linear formulas so the reduction is exact.
    """

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("Stable: alpha must lie in (0, 1]")


@dataclass(frozen=True)
class TemperedStable:
    """Tempered stable subordinator, g(theta) = (mu+theta)**alpha - mu**alpha."""

    alpha: float
    mu: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("TemperedStable: alpha must lie in (0, 1)")
        if not self.mu > 0:
            raise ValueError("TemperedStable: mu must be positive")


@dataclass(frozen=True)
class GammaSub:
    """Gamma subordinator with rate b, g(theta) = log(1 + theta/b)."""

    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("GammaSub: b must be positive")


@dataclass(frozen=True)
class PoissonSub:
    """Unit-jump Poisson subordinator of intensity kappa, g = kappa(1-e^-theta).

    The intensity is deliberately named kappa, not lambda: the birth rate of
    the compound process is an independent parameter even though the two are
    often set equal.
    """

    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("PoissonSub: kappa must be positive")


# any of the five family tags
BernsteinFamily = Linear | Stable | TemperedStable | GammaSub | PoissonSub

_TEMPERED_MAX_ROUNDS = 10 ** 6


@dataclass
class RngStream:
    """Reproducible random stream: identical (seed, stream_id) => identical draws."""

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def split(self, n):
        """Derive n deterministic child streams (for fan-out MC work)."""
        base = self.stream_id * 1000003
        return [RngStream(self.seed, base + i + 1) for i in range(n)]


def _effective(family):
    """Collapse Stable(alpha=1) onto Linear so the reduction is exact."""
    if isinstance(family, Stable) and family.alpha == 1.0:
        return Linear()
    return family


def laplace_exponent(family, theta):
    """Bernstein function g(theta) of the family; scalar or ndarray theta."""
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0):
        raise ValueError("laplace_exponent: theta must be >= 0")
    family = _effective(family)
    if isinstance(family, Linear):
        out = th.copy()
    elif isinstance(family, Stable):
        out = th ** family.alpha
    elif isinstance(family, TemperedStable):
        out = (family.mu + th) ** family.alpha - family.mu ** family.alpha
    elif isinstance(family, GammaSub):
        out = np.log1p(th / family.b)
    elif isinstance(family, PoissonSub):
        out = family.kappa * (-np.expm1(-th))
    else:
        raise TypeError(f"unknown family {family!r}")
    return float(out) if np.isscalar(theta) else out


def levy_tail(family, s):
    """Tail Levy measure nu(s) = integral of the Levy measure over (s, inf).

    This is the memory kernel of the convolution-type derivative.  The pure
    drift has no jump part, so its tail is identically zero.
    """
    sv = np.asarray(s, dtype=float)
    if np.any(sv <= 0):
        raise ValueError("levy_tail: s must be positive")
    family = _effective(family)
    if isinstance(family, Linear):
        out = np.zeros_like(sv)
    elif isinstance(family, Stable):
        a = family.alpha
        out = sv ** (-a) / math.gamma(1.0 - a)
    elif isinstance(family, TemperedStable):
        a, mu = family.alpha, family.mu
        x = mu * sv
        # Gamma(-a; x) = (x^-a e^-x - Gamma(1-a; x)) / a, recursed once so
        # scipy's regularized Q(1-a, .) applies
        upper = x ** (-a) * np.exp(-x) - math.gamma(1.0 - a) * special.gammaincc(1.0 - a, x)
        out = mu ** a * upper / math.gamma(1.0 - a)
    elif isinstance(family, GammaSub):
        out = special.exp1(family.b * sv)
    elif isinstance(family, PoissonSub):
        out = np.where(sv <= 1.0, family.kappa, 0.0)
    else:
        raise TypeError(f"unknown family {family!r}")
    return float(out) if np.isscalar(s) else out


def _stable_standard(alpha, gen, size):
    """Kanter draw of the standard positive alpha-stable law, LT exp(-theta^alpha)."""
    u = gen.uniform(0.0, math.pi, size)
    e = gen.standard_exponential(size)
    ratio = np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
    return ratio * (np.sin((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha)


def _tempered_at_times(alpha, mu, t, gen):
    """Exponentially tilted stable draws by rejection: accept x w.p. exp(-mu x)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    todo = np.flatnonzero(t > 0)
    for _ in range(_TEMPERED_MAX_ROUNDS):
        if todo.size == 0:
            return out
        x = t[todo] ** (1.0 / alpha) * _stable_standard(alpha, gen, todo.size)
        accept = gen.random(todo.size) < np.exp(-mu * x)
        out[todo[accept]] = x[accept]
        todo = todo[~accept]
    raise RuntimeError(
        "tempered-stable rejection sampler exhausted its attempt budget; "
        "mu**alpha * t is too large for tilting-by-rejection"
    )


def sample_subordinator_many(family, t, rng, size=None):
    """Vector of independent draws of A(t); t may be a scalar or one time per draw."""
    gen = rng.generator
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("sample_subordinator: t must be >= 0")
    if t_arr.ndim == 0:
        if size is None:
            raise ValueError("size is required when t is a scalar")
        t_arr = np.full(size, float(t_arr))
    family = _effective(family)
    if isinstance(family, Linear):
        return t_arr.copy()
    if isinstance(family, Stable):
        a = family.alpha
        draws = t_arr ** (1.0 / a) * _stable_standard(a, gen, t_arr.size)
        return np.where(t_arr > 0, draws, 0.0)
    if isinstance(family, TemperedStable):
        return _tempered_at_times(family.alpha, family.mu, t_arr, gen)
    if isinstance(family, GammaSub):
        out = np.zeros(t_arr.shape)
        pos = t_arr > 0
        out[pos] = gen.gamma(shape=t_arr[pos], scale=1.0 / family.b)
        return out
    if isinstance(family, PoissonSub):
        return gen.poisson(family.kappa * t_arr).astype(float)
    raise TypeError(f"unknown family {family!r}")


def sample_subordinator(family, t, rng):
    """One exact draw of the subordinator A(t)."""
    return float(sample_subordinator_many(family, t, rng, size=1)[0])


def sample_inverse_subordinator(family, x, rng, step=None):
    """One draw of the inverse L(x) = inf{s : A(s) > x}.

    Pure drift and the stable family are exact (the stable case via
    L_alpha(x) =d (x / S)^alpha with S standard positive stable); the other
    families simulate the first crossing of a discretized path with step h,
    which carries an O(h) upward bias.
    """
    if x < 0:
        raise ValueError("sample_inverse_subordinator: x must be >= 0")
    family = _effective(family)
    if isinstance(family, Linear):
        return float(x)
    if x == 0.0:
        return 0.0
    if isinstance(family, Stable):
        s = _stable_standard(family.alpha, rng.generator, 1)[0]
        return float((x / s) ** family.alpha)
    h = step if step is not None else max(1e-3 * x, 1e-12)
    gen = rng.generator
    level = 0.0
    elapsed = 0.0
    chunk = 1024
    while True:
        incs = sample_subordinator_many(family, h, rng, size=chunk)
        cum = level + np.cumsum(incs)
        hit = np.flatnonzero(cum > x)
        if hit.size:
            return elapsed + (hit[0] + 1) * h
        level = cum[-1]
        elapsed += chunk * h
