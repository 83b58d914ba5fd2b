"""The Yule birth process and the compound cumulative-damage process on top
of it: exact samplers, closed-form marginal laws and transform identities.

One progenitor is always present, so the population count at time t is
geometric on {1, 2, ...} with success probability exp(-lam t) and the
cumulative value at t = 0 is a single jump, not zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .addends import AddendLaw, sample_addends
from .numeric import laplace_invert
from .specfun import DEFAULT_CONTROL, SeriesControl, mittag_leffler, mittag_leffler_log
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

_PROFILE_CONTROL = SeriesControl(abs_tol=1e-12)
_MAX_EXPECTED_EVENTS = 1e7


@dataclass(frozen=True)
class CompoundBirthModel:
    """Birth rate lam plus the jump law of the individual damages."""

    lam: float
    law: AddendLaw

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("CompoundBirthModel: lam must be positive")


@dataclass
class PathSample:
    """One trajectory: the progenitor's jump at time 0 plus later birth events."""

    initial_jump: float
    event_times: np.ndarray
    jump_sizes: np.ndarray
    horizon: float

    def __post_init__(self):
        self.event_times = np.asarray(self.event_times, dtype=float)
        self.jump_sizes = np.asarray(self.jump_sizes, dtype=float)
        if self.event_times.size != self.jump_sizes.size:
            raise ValueError("PathSample: event and jump lists must align")
        if self.event_times.size:
            if np.any(np.diff(self.event_times) <= 0):
                raise ValueError("PathSample: event times must increase strictly")
            if self.event_times[-1] > self.horizon:
                raise ValueError("PathSample: events beyond the horizon")

    def count_at(self, t):
        """Population size at time t (progenitor included)."""
        return 1 + int(np.searchsorted(self.event_times, t, side="right"))

    def value_at(self, t):
        """Cumulative damage at time t."""
        k = np.searchsorted(self.event_times, t, side="right")
        return float(self.initial_jump + self.jump_sizes[:k].sum())


def _require_linear(model, op):
    if not isinstance(_effective(model.law.family), Linear):
        raise ValueError(f"{op} is defined for the exponential-jump (Linear) model")


def yule_pmf(model, n, t):
    """P{B(t) = n | B(0) = 1} = e^{-lam t} (1 - e^{-lam t})^{n-1}."""
    if n < 1 or n != int(n):
        raise ValueError("yule_pmf: n must be a positive integer")
    if t < 0:
        raise ValueError("yule_pmf: t must be >= 0")
    p = math.exp(-model.lam * t)
    return p * (1.0 - p) ** (int(n) - 1)


def sample_birth_count(model, t, rng, size=None):
    """Exact draw(s) of the birth count at time t via its geometric law."""
    if t < 0:
        raise ValueError("sample_birth_count: t must be >= 0")
    p = math.exp(-model.lam * t)
    if p * _MAX_EXPECTED_EVENTS < 1.0:
        raise ValueError("sample_birth_count: expected population too large")
    draws = rng.generator.geometric(p, size=size if size is not None else 1)
    return int(draws[0]) if size is None else draws


def sample_value(model, t, rng, size=None):
    """Draw(s) of the cumulative value at time t (count draw + jump sums)."""
    n = 1 if size is None else int(size)
    counts = sample_birth_count(model, t, rng, size=n)
    total = int(counts.sum())
    if total > 2e8:
        raise ValueError("sample_value: total jump budget too large")
    draws = sample_addends(model.law, total, rng)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    sums = np.add.reduceat(draws, starts)
    return float(sums[0]) if size is None else sums


def _birth_epochs(lam, horizon, gen):
    """Birth times of the Yule process on [0, horizon]; k alive => rate k lam."""
    times = []
    t = 0.0
    k = 1
    while True:
        t += gen.exponential(1.0 / (k * lam))
        if t > horizon:
            return np.asarray(times)
        times.append(t)
        k += 1


def sample_path(model, horizon, rng):
    """One full trajectory up to the horizon."""
    if horizon < 0:
        raise ValueError("sample_path: horizon must be >= 0")
    if math.exp(model.lam * horizon) > _MAX_EXPECTED_EVENTS:
        raise ValueError("sample_path: horizon too large")
    epochs = _birth_epochs(model.lam, horizon, rng.generator)
    jumps = sample_addends(model.law, epochs.size + 1, rng)
    return PathSample(
        initial_jump=float(jumps[0]),
        event_times=epochs,
        jump_sizes=jumps[1:],
        horizon=float(horizon),
    )


def pdf_value(model, y, t, ctrl=None):
    """Marginal density (pmf for the Poisson family) of the value at time t."""
    ctrl = ctrl or DEFAULT_CONTROL
    if t < 0:
        raise ValueError("pdf_value: t must be >= 0")
    fam = _effective(model.law.family)
    xi = model.law.xi
    s = xi * math.exp(-model.lam * t)
    if isinstance(fam, PoissonSub):
        if y < 0 or y != int(y):
            raise ValueError("pdf_value: Poisson family needs integer y >= 0")
        k = fam.kappa
        return s * k ** int(y) / (s + k) ** (int(y) + 1)
    if not y > 0:
        raise ValueError("pdf_value: y must be positive")
    if isinstance(fam, Linear):
        return s * math.exp(-s * y)
    if isinstance(fam, Stable):
        a = fam.alpha
        return s * y ** (a - 1.0) * mittag_leffler(a, a, -s * y ** a, ctrl)
    if isinstance(fam, TemperedStable):
        a, mu = fam.alpha, fam.mu
        arg = -(s - mu ** a) * y ** a
        if arg <= 0:
            return s * math.exp(-mu * y) * y ** (a - 1.0) * mittag_leffler(a, a, arg, ctrl)
        lg = math.log(s) - mu * y + (a - 1.0) * math.log(y) + mittag_leffler_log(a, a, arg, ctrl)
        return math.exp(lg)
    if isinstance(fam, GammaSub):
        b = fam.b
        return laplace_invert(lambda p: s / (s + np.log(1.0 + p / b)), y)
    raise TypeError(f"unknown family {fam!r}")


def pdf_values(model, y_array, t, ctrl=None):
    """pdf_value over an array of points (plain loop; exact per point)."""
    return np.array([pdf_value(model, float(y), t, ctrl) for y in np.asarray(y_array)])


def gamma_value_cdf(model, y, t):
    """P{value <= y} for the gamma family, by inverting F(theta)/theta.

    The head of this law is only logarithmically light, so mass accounting
    must go through the distribution function rather than density quadrature.
    """
    fam = _effective(model.law.family)
    if not isinstance(fam, GammaSub):
        raise ValueError("gamma_value_cdf is for the gamma family")
    s = model.law.xi * math.exp(-model.lam * t)
    b = fam.b
    return laplace_invert(lambda p: s / (s + np.log(1.0 + p / b)) / p, y)


def poisson_value_pmf(model, y_values, t):
    """Vectorized geometric pmf of the Poisson-family value at time t."""
    fam = _effective(model.law.family)
    if not isinstance(fam, PoissonSub):
        raise ValueError("poisson_value_pmf is for the Poisson family")
    y = np.asarray(y_values, dtype=float)
    s = model.law.xi * math.exp(-model.lam * t)
    k = fam.kappa
    return s * k ** y / (s + k) ** (y + 1.0)


def laplace_pdf(model, theta, t):
    """Transform of the marginal law: s / (s + g(theta)), s = xi e^{-lam t}."""
    if t < 0:
        raise ValueError("laplace_pdf: t must be >= 0")
    s = model.law.xi * math.exp(-model.lam * t)
    g = laplace_exponent(model.law.family, theta)
    return s / (s + g)


def _density_smooth_profile(model, t, y_max, n_grid=4001):
    """Split the marginal density as f(y) = y^(a-1) * phi(y) with phi smooth.

    Returns (a, phi) where phi is a fast vectorized callable on [0, y_max]
    backed by a dense interpolation table (continuous families only).  Used
    by the grid residual machinery, where millions of evaluations are needed
    at tolerances far looser than the scalar path provides.
    """
    fam = _effective(model.law.family)
    xi = model.law.xi
    s = xi * math.exp(-model.lam * t)
    if isinstance(fam, Linear):
        return 1.0, lambda y: s * np.exp(-s * np.asarray(y, dtype=float))
    if isinstance(fам := fam, Stable) or isinstance(fam, TemperedStable):
        a = fam.alpha
        if isinstance(fam, TemperedStable):
            c = s - fam.mu ** a
            mu = fam.mu
        else:
            c = s
            mu = 0.0
        w_grid = np.linspace(0.0, y_max ** a, n_grid)
        table = np.array(
            [mittag_leffler(a, a, -c * w, _PROFILE_CONTROL) for w in w_grid]
        )

        def phi(y):
            y = np.asarray(y, dtype=float)
            e = np.interp(y ** a, w_grid, table)
            return s * np.exp(-mu * y) * e

        return a, phi
    raise ValueError(f"no smooth-profile split for family {fam!r}")


def time_change_check(model, t, n_samples, rng):
    """Two-sample KS statistic between the direct sampler and the
    subordinated exponential-jump process sampled at the same time."""
    direct = sample_value(model, t, rng, size=n_samples)
    base = CompoundBirthModel(model.lam, AddendLaw(Linear(), model.law.xi))
    inner = sample_value(base, t, rng, size=n_samples)
    changed = sample_subordinator_many(model.law.family, inner, rng)
    return float(stats.ks_2samp(direct, changed).statistic)
