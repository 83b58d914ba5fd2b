"""Scalar special functions behind the closed-form laws of the package.

The two workhorses are the two-parameter Mittag-Leffler function and the
Fox-Wright generalized hypergeometric series.  Both are alternating series
whose float64 partial sums can lose every significant digit long before the
terms stop mattering, so evaluation is staged:

* plain float64 summation with running-maximum term tracking;
* on the negative axis, a contour-collapsed spectral integral once the
  running maximum signals catastrophic cancellation (0 < beta < 1);
* arbitrary-precision summation as a last resort, with the working precision
  sized from the recorded maximum term;
* the standard algebraic expansion far out on the negative axis.

Incomplete gamma functions and the exponential integral are thin wrappers
around scipy with the domain checks the rest of the package relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate, special


class ConvergenceError(RuntimeError):
    """A series or quadrature could not reach the requested tolerance."""


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for series evaluation.

    abs_tol           absolute truncation target
    max_terms         hard cap on the number of summed terms
    asymptotic_switch |z| beyond which the negative-axis expansion takes over
    """

    abs_tol: float = 1e-14
    max_terms: int = 10000
    asymptotic_switch: float = 50.0

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")
        if not self.asymptotic_switch > 0:
            raise ValueError("asymptotic_switch must be positive")


DEFAULT_CONTROL = SeriesControl()

# float64 unit roundoff with a small crowd factor; used to estimate how much
# of an alternating sum survived cancellation
_CANCEL_UNIT = 5e-16
_MAX_MP_DIGITS = 3000


@dataclass(frozen=True)
class FoxWrightParams:
    """Parameter pairs of a pPsi_q Fox-Wright series.

    upper: (a_l, alpha_l) pairs, lower: (b_j, beta_j) pairs.  Construction
    enforces the convergence condition sum(beta_j) - sum(alpha_l) > -1.
    """

    upper: tuple
    lower: tuple

    def __post_init__(self):
        upper = tuple((float(a), float(al)) for a, al in self.upper)
        lower = tuple((float(b), float(bl)) for b, bl in self.lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "lower", lower)
        margin = sum(bl for _, bl in lower) - sum(al for _, al in upper)
        if not margin > -1.0:
            raise ValueError(
                "divergent Fox-Wright parameters: sum(beta) - sum(alpha) = "
                f"{margin:g} <= -1"
            )


def _validate_ml_args(beta, gamma, z):
    if not (beta > 0 and math.isfinite(beta)):
        raise ValueError("mittag_leffler: beta must be a positive real")
    if not (gamma > 0 and math.isfinite(gamma)):
        raise ValueError("mittag_leffler: gamma must be a positive real")
    if not math.isfinite(z):
        raise ValueError("mittag_leffler: z must be finite")


def _ml_series_f64(beta, gamma, z, ctrl):
    """Float64 Taylor sum of E_{beta,gamma}(z).

    Returns (value, max_log_term, ok) where ok is False when the sum either
    failed to converge within ctrl.max_terms or is judged unreliable from the
    running-maximum cancellation estimate.
    """
    log_az = math.log(abs(z))
    neg = z < 0
    total = 0.0
    max_lg = -math.inf
    j_max = 0
    overflowed = False
    small_streak = 0
    for j in range(ctrl.max_terms):
        lg = j * log_az - special.gammaln(beta * j + gamma)
        if lg > max_lg:
            max_lg = lg
            j_max = j
        if lg > 709.0:
            overflowed = True
        else:
            term = math.exp(lg)
            if neg and (j % 2 == 1):
                term = -term
            total += term
            if abs(term) < 0.01 * ctrl.abs_tol and j > j_max:
                small_streak += 1
                if small_streak >= 2:
                    err = math.exp(max_lg) * _CANCEL_UNIT * math.sqrt(j + 1.0)
                    tol = max(ctrl.abs_tol, abs(total) * 1e-14)
                    return total, max_lg, (not overflowed) and err <= tol
            else:
                small_streak = 0
    return total, max_lg, False


def _ml_series_mp(beta, gamma, z, ctrl, extra_log):
    """Arbitrary-precision Taylor sum; precision sized from the term peak."""
    digits = int(max(0.0, extra_log) / math.log(10.0)) + 30
    if digits > _MAX_MP_DIGITS:
        raise ConvergenceError(
            "mittag_leffler series did not converge: cancellation needs "
            f"~{digits} digits (beta={beta:g}, gamma={gamma:g}, z={z:g})"
        )
    with mpmath.workdps(digits):
        zm = mpmath.mpf(z)
        total = mpmath.mpf(0)
        peak = mpmath.mpf(0)
        power = mpmath.mpf(1)
        tol = mpmath.mpf(ctrl.abs_tol) * mpmath.mpf(10) ** (-5)
        for j in range(ctrl.max_terms):
            term = power / mpmath.gamma(beta * j + gamma)
            total += term
            at = abs(term)
            if at > peak:
                peak = at
            elif at < tol and j > 2:
                return float(total)
            power *= zm
    raise ConvergenceError(
        f"mittag_leffler series did not converge within {ctrl.max_terms} terms"
    )


def _ml_asymptotic(beta, gamma, z, ctrl):
    """Negative-axis algebraic expansion E ~ -sum_k z^-k / Gamma(gamma-beta*k).

    Terms are added while they keep shrinking; the first omitted term bounds
    the remainder.  Pole-killed terms (1/Gamma = 0) are skipped.
    """
    total = 0.0
    zk = 1.0
    best = math.inf
    seen_nonzero = False
    for k in range(1, 400):
        zk /= z
        coeff = float(special.rgamma(gamma - beta * k))
        term = -zk * coeff
        if term == 0.0:
            if k >= 8 and not seen_nonzero:
                # every coefficient hits a Gamma pole: the expansion is
                # identically zero and the true value is exponentially small
                return 0.0
            continue
        at = abs(term)
        if at > best:
            if best <= ctrl.abs_tol:
                return total
            raise ConvergenceError(
                "mittag_leffler asymptotic expansion stalled at remainder "
                f"~{best:.2e} for z={z:g}"
            )
        total += term
        seen_nonzero = True
        best = at
        if at <= 0.1 * ctrl.abs_tol:
            return total
    return total


def _ml_spectral(beta, gamma, z, ctrl):
    """Spectral-integral form of E_{beta,gamma}(z) for z < 0, 0 < beta < 1.

    Contour-collapsed Bromwich integral; requires gamma <= 1 so that no
    residue term is picked up at the origin (callers reduce gamma first).
    """
    s1 = math.sin(math.pi * (1.0 - gamma))
    s2 = math.sin(math.pi * (1.0 - gamma + beta))
    cc = math.cos(math.pi * beta)
    p = (1.0 - gamma) / beta
    pref = 1.0 / (math.pi * beta)

    def kern(r):
        num = r * s1 - z * s2
        den = r * (r - 2.0 * z * cc) + z * z
        rp = r ** p if p != 0.0 else 1.0
        return pref * rp * math.exp(-(r ** (1.0 / beta))) * num / den

    upper = max(10.0, 2.0 * abs(z), 42.0 ** beta)
    pts = [abs(z)] if abs(z) < upper else None
    val, _ = integrate.quad(
        kern, 0.0, upper, limit=400, points=pts,
        epsabs=min(ctrl.abs_tol, 1e-13), epsrel=1e-12,
    )
    return val


def _ml_negative_robust(beta, gamma, z, ctrl):
    """Cancellation-free route for z < 0, 0 < beta < 1, any gamma > 0.

    Reduces gamma into (0, 1] with E_{b,g}(z) = 1/Gamma(g) + z E_{b,g+b}(z),
    evaluates the spectral integral there and climbs back up.
    """
    steps = 0
    g = gamma
    while g > 1.0 + 1e-12:
        g -= beta
        steps += 1
    if g <= 0.0:
        g += beta
        steps -= 1
    val = _ml_spectral(beta, g, z, ctrl)
    for _ in range(steps):
        val = (val - special.rgamma(g)) / z
        g += beta
    return val


def mittag_leffler(beta, gamma, z, ctrl=None):
    """Two-parameter Mittag-Leffler function E_{beta,gamma}(z), real z.

    E_{beta,gamma}(z) = sum_{j>=0} z^j / Gamma(beta*j + gamma).

    Evaluation is accurate to roughly ctrl.abs_tol (absolute), floored at
    float64 relative precision of the result.  Raises ConvergenceError when
    no regime can certify the tolerance.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    _validate_ml_args(beta, gamma, z)
    if z == 0.0:
        return float(special.rgamma(gamma))
    if z < 0.0 and -z >= ctrl.asymptotic_switch and beta < 2.0:
        return _ml_asymptotic(beta, gamma, z, ctrl)

    if z < 0.0 and 0.0 < beta < 1.0:
        # the term peak sits near j* = beta * |z|^(1/beta); skip the doomed
        # float pass when it cannot even fit in the term budget
        peak_j = beta * abs(z) ** (1.0 / beta)
        if peak_j > 0.5 * ctrl.max_terms:
            return _ml_negative_robust(beta, gamma, z, ctrl)

    val, max_lg, ok = _ml_series_f64(beta, gamma, z, ctrl)
    if ok:
        return val
    if z > 0.0:
        if max_lg > 700.0:
            # genuinely huge value; hand back the float limit
            lg = mittag_leffler_log(beta, gamma, z, ctrl)
            return math.exp(lg) if lg <= 709.0 else math.inf
        return _ml_series_mp(beta, gamma, z, ctrl, max_lg)
    if 0.0 < beta < 1.0:
        return _ml_negative_robust(beta, gamma, z, ctrl)
    return _ml_series_mp(beta, gamma, z, ctrl, max_lg)


def mittag_leffler_log(beta, gamma, z, ctrl=None):
    """log E_{beta,gamma}(z) for z >= 0, summed in log space (no overflow)."""
    ctrl = ctrl or DEFAULT_CONTROL
    _validate_ml_args(beta, gamma, z)
    if z < 0.0:
        raise ValueError("mittag_leffler_log requires z >= 0")
    if z == 0.0:
        return -float(special.gammaln(gamma))
    log_z = math.log(z)
    total = -math.inf
    peak = -math.inf
    for j in range(ctrl.max_terms):
        lg = j * log_z - special.gammaln(beta * j + gamma)
        total = np.logaddexp(total, lg)
        if lg > peak:
            peak = lg
        elif lg < total + math.log(0.01 * ctrl.abs_tol):
            return float(total)
    raise ConvergenceError("mittag_leffler_log series did not converge")


def one_minus_mittag_leffler(beta, w, ctrl=None):
    """1 - E_{beta,1}(-w) for w >= 0, accurate in absolute AND relative terms.

    For small w the direct complement loses all digits; the subtracted series
    sum_{j>=1} -(-w)^j / Gamma(beta*j + 1) is used instead.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    if w < 0:
        raise ValueError("one_minus_mittag_leffler requires w >= 0")
    if w == 0.0:
        return 0.0
    if w > 0.75:
        return 1.0 - mittag_leffler(beta, 1.0, -w, ctrl)
    total = 0.0
    term_sign = 1.0
    lw = math.log(w)
    for j in range(1, ctrl.max_terms):
        term = term_sign * math.exp(j * lw - special.gammaln(beta * j + 1.0))
        total += term
        if abs(term) < 1e-18 * max(total, w):
            return total
        term_sign = -term_sign
    raise ConvergenceError("one_minus_mittag_leffler did not converge")


def _fox_wright_mp(params, x, ctrl, extra_log):
    digits = int(max(0.0, extra_log) / math.log(10.0)) + 30
    if digits > _MAX_MP_DIGITS:
        raise ConvergenceError(
            f"fox_wright series needs ~{digits} digits at x={x:g}; "
            "treat as non-convergent"
        )
    with mpmath.workdps(digits):
        xm = mpmath.mpf(x)
        total = mpmath.mpf(0)
        peak = mpmath.mpf(0)
        power = mpmath.mpf(1)
        tol = mpmath.mpf(ctrl.abs_tol) * mpmath.mpf(10) ** (-5)
        for l in range(ctrl.max_terms):
            term = power / mpmath.factorial(l)
            for a, al in params.upper:
                term *= mpmath.gamma(a + al * l)
            for b, bl in params.lower:
                term /= mpmath.gamma(b + bl * l)
            total += term
            at = abs(term)
            if at > peak:
                peak = at
            elif at < tol and l > 2:
                return float(total)
            power *= xm
    raise ConvergenceError(
        f"fox_wright series did not converge within {ctrl.max_terms} terms"
    )


def fox_wright(params, x, ctrl=None):
    """Fox-Wright series pPsi_q at real x.

    sum_l x^l / l! * prod Gamma(a + alpha*l) / prod Gamma(b + beta*l),
    accumulated as log-magnitudes with explicit sign tracking so that the
    Gamma ratios never overflow.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    if not isinstance(params, FoxWrightParams):
        params = FoxWrightParams(*params)
    if x == 0.0:
        lg = 0.0
        sg = 1.0
        for a, _ in params.upper:
            lg += special.gammaln(a)
            sg *= special.gammasgn(a)
        for b, _ in params.lower:
            lg -= special.gammaln(b)
            sg *= special.gammasgn(b)
        return sg * math.exp(lg)

    log_ax = math.log(abs(x))
    neg = x < 0.0
    total = 0.0
    max_lg = -math.inf
    l_max = 0
    overflowed = False
    for l in range(ctrl.max_terms):
        lg = l * log_ax - special.gammaln(l + 1.0)
        sg = -1.0 if (neg and l % 2 == 1) else 1.0
        dead = False
        for a, al in params.upper:
            arg = a + al * l
            if special.rgamma(arg) == 0.0:
                raise ValueError(
                    "fox_wright: numerator Gamma pole at term "
                    f"{l} (argument {arg:g})"
                )
            lg += special.gammaln(arg)
            sg *= special.gammasgn(arg)
        for b, bl in params.lower:
            arg = b + bl * l
            rg = special.rgamma(arg)
            if rg == 0.0:
                dead = True
                break
            lg -= special.gammaln(arg)
            sg *= special.gammasgn(arg)
        if dead:
            continue
        if lg > max_lg:
            max_lg = lg
            l_max = l
        if lg > 709.0:
            overflowed = True
            continue
        term = sg * math.exp(lg)
        total += term
        if abs(term) < 0.01 * ctrl.abs_tol and l > l_max:
            err = math.exp(max_lg) * _CANCEL_UNIT * math.sqrt(l + 1.0)
            if not overflowed and err <= max(ctrl.abs_tol, abs(total) * 1e-14):
                return total
            return _fox_wright_mp(params, x, ctrl, max_lg)
    raise ConvergenceError(
        f"fox_wright series did not converge within {ctrl.max_terms} terms"
    )


def gamma_lower_reg(a, x):
    """Regularized lower incomplete gamma P(a, x) = gamma(a; x) / Gamma(a)."""
    if not a > 0:
        raise ValueError("gamma_lower_reg: shape a must be positive")
    if x < 0:
        raise ValueError("gamma_lower_reg: x must be nonnegative")
    return float(special.gammainc(a, x))


def gamma_upper_reg(a, x):
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if not a > 0:
        raise ValueError("gamma_upper_reg: shape a must be positive")
    if x < 0:
        raise ValueError("gamma_upper_reg: x must be nonnegative")
    return float(special.gammaincc(a, x))


def exp_integral_e1(x):
    """Exponential integral E1(x) = int_x^inf exp(-t)/t dt, x > 0."""
    if not x > 0:
        raise ValueError("exp_integral_e1: x must be positive")
    return float(special.exp1(x))
