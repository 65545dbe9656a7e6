# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""Certified power series for the special functions behind every exact law.

All of the generalized Wright, Mittag-Leffler and Bessel series are sums of
terms whose coefficients are ratios of gamma functions. Terms are evaluated as
``exp(sum of log-gamma)`` with the sign tracked separately, summed with
``math.fsum`` and cut off once a geometric bound on the remaining tail drops
below the tolerance. When an alternating sum cancels so badly that double
precision cannot deliver the tolerance, the same terms are re-summed with
``mpmath`` at a working precision derived from the size of the largest term.
"""

import fractions
import logging
import math
from collections import namedtuple

import mpmath
import numpy as np
from scipy import integrate, special

from poisson_fields import config
from poisson_fields.exceptions import InvalidParams, NonConvergence

log = logging.getLogger(__name__)

BLOCK = 64
EPS = np.finfo(float).eps
LOG_FLOAT_MAX = 700.0
MAX_SLOPE_DENOMINATOR = 64


SeriesResult = namedtuple("SeriesResult", ["value", "terms_used", "truncation_bound"])
SeriesResult.__doc__ = """Value of a truncated series.

:param value: the partial sum
:param terms_used: number of terms summed (0 when a quadrature was used)
:param truncation_bound: bound on the omitted tail plus the rounding error
"""


class WrightParams(namedtuple("WrightParams", ["upper", "lower"])):
    """Parameter pairs of the generalized Wright function 2Psi2.

    :param upper: two ``(a, alpha)`` pairs, numerator gamma arguments
    :param lower: two ``(b, beta)`` pairs, denominator gamma arguments
    """

    __slots__ = ()

    def validate(self):
        if len(self.upper) != 2 or len(self.lower) != 2:
            raise InvalidParams(
                "2Psi2 needs exactly two upper and two lower pairs, got {} and {}".format(
                    len(self.upper), len(self.lower)
                )
            )
        for a, alpha in self.upper:
            if alpha == 0:
                raise InvalidParams("upper slope must be non-zero, got ({}, {})".format(a, alpha))
        for b, beta in self.lower:
            if beta == 0:
                raise InvalidParams("lower slope must be non-zero, got ({}, {})".format(b, beta))
        return self


def _is_pole(z):
    return (z <= 0) & (z == np.floor(z))


def fox_wright_coefficient(upper, lower, constant=0.0, strict_lower=False):
    """Build the log-coefficient function of a gamma-ratio power series.

    The coefficient of ``x**r`` is ``exp(constant) * prod(Gamma(a + alpha*r)) /
    prod(Gamma(b + beta*r))``. No ``r!`` is implied; callers add ``(1, 1)`` to
    ``lower`` when they need it.

    :param upper: iterable of ``(a, alpha)`` pairs
    :param lower: iterable of ``(b, beta)`` pairs
    :param constant: additive log constant
    :param strict_lower: raise on a denominator pole instead of treating the
        reciprocal gamma as zero
    :returns: a function mapping an integer array ``r`` to ``(log|c_r|, sign(c_r))``
    """
    upper = [(float(a), float(alpha)) for a, alpha in upper]
    lower = [(float(b), float(beta)) for b, beta in lower]

    def coefficient(r):
        r = np.asarray(r, dtype=float)
        logabs = np.full(r.shape, float(constant))
        sign = np.ones(r.shape)
        for a, alpha in upper:
            z = a + alpha * r
            if np.any(_is_pole(z)):
                raise InvalidParams("Gamma pole in numerator at argument {}".format(z[_is_pole(z)][0]))
            logabs += special.gammaln(z)
            sign *= special.gammasgn(z)
        zero = np.zeros(r.shape, dtype=bool)
        for b, beta in lower:
            z = b + beta * r
            pole = _is_pole(z)
            if strict_lower and np.any(pole):
                raise InvalidParams("Gamma pole in denominator at argument {}".format(z[pole][0]))
            zero |= pole
            safe = np.where(pole, 1.0, z)
            logabs -= special.gammaln(safe)
            sign *= special.gammasgn(safe)
        logabs[zero] = -np.inf
        sign[zero] = 0.0
        return logabs, sign

    return coefficient


def _rational(value):
    """``value`` as a fraction when a small denominator reproduces the float exactly, else ``None``."""
    ratio = fractions.Fraction(float(value)).limit_denominator(MAX_SLOPE_DENOMINATOR)
    return ratio if float(ratio) == value else None


def _mp_number(value):
    ratio = _rational(value)
    if ratio is None:
        return mpmath.mpf(value)
    return mpmath.mpf(ratio.numerator) / ratio.denominator


def _gamma_run(a, slope, count):
    """``Gamma(a + slope r)`` for ``r = 0 .. count - 1`` at the working precision.

    Parameters that are small-denominator fractions are taken exactly. A positive
    slope ``p/q`` with a positive base then only needs ``q`` gamma evaluations;
    every later value is the one ``q`` places back times the rising factorial
    ``(z)_p``.
    """
    base, step = _mp_number(a), _mp_number(slope)
    ratio = _rational(slope)
    if not (a > 0 and slope > 0 and ratio is not None):
        return [mpmath.gamma(base + step * r) for r in range(count)]
    p, q = ratio.numerator, ratio.denominator
    values = []
    for r in range(count):
        if r < q:
            values.append(mpmath.gamma(base + step * r))
        else:
            z = base + step * (r - q)
            values.append(values[r - q] * mpmath.fprod(z + i for i in range(p)))
    return values


def fox_wright_mp_coefficient(upper, lower, scale=1):
    """Extended-precision counterpart of :func:`fox_wright_coefficient`.

    :param scale: constant factor, or a callable evaluated at the working precision
    :returns: a function mapping a count to the signed ``mpmath.mpf`` coefficients
        of ``r = 0 .. count - 1``
    """

    def coefficients(count):
        values = [mpmath.mpf(scale() if callable(scale) else scale)] * count
        for a, alpha in upper:
            values = [v * g for v, g in zip(values, _gamma_run(a, alpha, count))]
        for b, beta in lower:
            if b > 0 and beta > 0:
                values = [v / g for v, g in zip(values, _gamma_run(b, beta, count))]
            else:
                base, step = _mp_number(b), _mp_number(beta)
                run = [mpmath.rgamma(base + step * r) for r in range(count)]
                values = [v * g for v, g in zip(values, run)]
        return values

    return coefficients


def _certified_cut(log_terms, limit_ratio, tol):
    """Find the first index after which the tail is provably below ``tol``.

    :returns: ``(index, tail_bound)`` or ``(None, None)``
    """
    n = len(log_terms)
    if n < 4:
        return None, None
    idx = np.arange(3, n)
    with np.errstate(invalid="ignore"):
        diff = np.diff(log_terms)
        last, prev, prev2 = diff[idx - 1], diff[idx - 2], diff[idx - 3]
        finite = np.isfinite(last) & np.isfinite(prev) & np.isfinite(prev2)
        decreasing = (last < 0) & (prev < 0) & (prev2 < 0)
        settled = (last <= prev) & (prev <= prev2)
        log_q = last
        if limit_ratio:
            log_limit = math.log(limit_ratio)
            settled |= last <= log_limit
            log_q = np.maximum(last, log_limit)
        q = np.exp(np.minimum(log_q, 0.0))
        log_bound = log_terms[idx] + log_q - np.log1p(-np.minimum(q, 1.0 - EPS))
        ok = finite & decreasing & settled & (log_q < 0) & (log_bound < math.log(tol))
    hits = np.flatnonzero(ok)
    if not hits.size:
        return None, None
    first = hits[0]
    return int(idx[first]), float(np.exp(log_bound[first]))


def power_series(
    coefficient, x, tol=None, max_terms=None, limit_ratio=0.0, mp_coefficient=None, tail_tol=None
):
    """Sum ``sum_r c_r x**r`` with a certified error bound.

    Half of ``tol`` goes to the tail and half to rounding. The rounding bound is
    the condition of the sum: every term carries the error of its exponent,
    ``EPS * (1 + |log c_r| + r |log x|)`` relative, weighted by ``|t_r|``. Same-sign
    series therefore stay in double precision; only real cancellation is re-summed
    with ``mp_coefficient``.

    :param coefficient: vectorized ``r -> (log|c_r|, sign(c_r))``
    :param x: real argument
    :param tol: absolute tolerance for the tail plus rounding
    :param max_terms: hard cap on the number of terms
    :param limit_ratio: asymptotic ``|t_{r+1}/t_r|``, 0 for entire series
    :param mp_coefficient: ``count -> [mpmath.mpf]`` used when double precision cancels
    :param tail_tol: tighter tolerance for the tail alone, defaults to ``tol / 2``
    :returns: SeriesResult
    :raises NonConvergence: when the cap is hit or cancellation cannot be repaired
    """
    tol = config.tol if tol is None else tol
    max_terms = config.max_terms if max_terms is None else max_terms
    if not tol > 0:
        raise InvalidParams("tolerance must be positive, got {}".format(tol))
    tail_tol = tol / 2 if tail_tol is None else min(tail_tol, tol / 2)
    if not tail_tol > 0:
        raise InvalidParams("tail tolerance must be positive, got {}".format(tail_tol))

    if x == 0:
        logabs, sign = coefficient(np.zeros(1))
        value = float(sign[0] * np.exp(logabs[0])) if sign[0] else 0.0
        return SeriesResult(value, 1, 0.0)

    log_x = math.log(abs(x))
    x_sign = -1.0 if x < 0 else 1.0
    log_blocks, sign_blocks = [], []
    start, cut, tail = 0, None, None
    while cut is None:
        if start >= max_terms:
            raise NonConvergence(
                "series did not reach tolerance {} within {} terms at x={}".format(tol, max_terms, x)
            )
        r = np.arange(start, min(start + BLOCK, max_terms))
        logabs, sign = coefficient(r)
        log_blocks.append(logabs + r * log_x)
        sign_blocks.append(sign * x_sign ** r)
        start = int(r[-1]) + 1
        cut, tail = _certified_cut(np.concatenate(log_blocks), limit_ratio, tail_tol)

    log_terms = np.concatenate(log_blocks)[: cut + 1]
    signs = np.concatenate(sign_blocks)[: cut + 1]
    r = np.arange(cut + 1)
    live = signs != 0
    peak = float(np.max(log_terms[live])) if np.any(live) else -np.inf

    rounding = np.inf
    if peak < LOG_FLOAT_MAX:
        terms = np.where(live, signs * np.exp(np.where(live, log_terms, 0.0)), 0.0)
        value = math.fsum(terms)
        weight = 1.0 + np.abs(log_terms - r * log_x) + r * abs(log_x)
        rounding = 2 * EPS * float(np.sum(np.abs(terms) * np.where(live, weight, 0.0)))

    if rounding > tol / 2:
        if mp_coefficient is None:
            raise NonConvergence(
                "cancellation at x={} exceeds tolerance {} in double precision".format(x, tol)
            )
        dps = int(math.ceil((peak - math.log(tol)) / math.log(10))) + 15
        log.debug("re-summing {} terms at {} digits, x={}".format(cut + 1, dps, x))
        with mpmath.workdps(dps):
            xm = mpmath.mpf(x)
            power, products = mpmath.mpf(1), []
            for c in mp_coefficient(cut + 1):
                products.append(c * power)
                power *= xm
            value = float(mpmath.fsum(products))
        # the sum is exact to the working precision; only the final rounding remains
        rounding = EPS * abs(value)

    return SeriesResult(value, cut + 1, tail + rounding)


def wright_radius(params):
    """Radius of convergence of the 2Psi2 series.

    :param params: WrightParams
    :returns: ``inf`` for entire series, ``0`` for divergent ones
    """
    delta = 1.0 + sum(beta for _, beta in params.lower) - sum(alpha for _, alpha in params.upper)
    if delta > 1e-12:
        return math.inf
    if delta < -1e-12:
        return 0.0
    radius = 1.0
    for _, alpha in params.upper:
        radius *= abs(alpha) ** -abs(alpha) if alpha > 0 else abs(alpha) ** alpha
    for _, beta in params.lower:
        radius *= abs(beta) ** beta
    return radius


def wright_2psi2(params, x, tol=None, max_terms=None):
    """Generalized Wright function 2Psi2.

    ``sum_r Gamma(a1 + alpha1 r) Gamma(a2 + alpha2 r) /
    (Gamma(b1 + beta1 r) Gamma(b2 + beta2 r)) x**r / r!``

    :param params: WrightParams
    :param x: real argument
    :param tol: absolute tolerance
    :param max_terms: term cap
    :returns: SeriesResult
    :raises InvalidParams: for malformed pairs or gamma poles
    :raises NonConvergence: outside the disc of convergence or at the term cap
    """
    params = WrightParams(*params).validate()
    radius = wright_radius(params)
    if x != 0 and abs(x) >= radius:
        raise NonConvergence(
            "2Psi2 series diverges at |x|={} (radius of convergence {})".format(abs(x), radius)
        )
    lower = list(params.lower) + [(1.0, 1.0)]
    coefficient = fox_wright_coefficient(params.upper, lower, strict_lower=True)
    limit_ratio = 0.0 if math.isinf(radius) else abs(x) / radius
    return power_series(
        coefficient,
        x,
        tol=tol,
        max_terms=max_terms,
        limit_ratio=limit_ratio,
        mp_coefficient=fox_wright_mp_coefficient(params.upper, lower),
    )


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise InvalidParams("fractional order must lie in (0, 1], got {}".format(alpha))


def _mittag_leffler_integral(alpha, x, tol):
    """E_alpha(x) for x < 0 and 0 < alpha < 1 by its Laplace-type integral."""
    y = (-x) ** (1.0 / alpha)
    sin_a, cos_a = math.sin(alpha * math.pi), math.cos(alpha * math.pi)

    def kernel(r):
        return sin_a / (math.pi * (r ** (2 * alpha) + 2 * r ** alpha * cos_a + 1)) * math.exp(-r * y)

    head, head_err = integrate.quad(
        kernel, 0.0, 1.0, weight="alg", wvar=(alpha - 1.0, 0.0), epsabs=tol / 4, epsrel=0.0, limit=200
    )
    body, body_err = integrate.quad(
        lambda r: kernel(r) * r ** (alpha - 1.0), 1.0, np.inf, epsabs=tol / 4, epsrel=0.0, limit=200
    )
    bound = head_err + body_err
    if bound > tol:
        raise NonConvergence(
            "Mittag-Leffler quadrature at x={} reached only {}".format(x, bound)
        )
    return SeriesResult(head + body, 0, bound)


def mittag_leffler(alpha, x, tol=None):
    """One-parameter Mittag-Leffler function ``sum_r x**r / Gamma(alpha r + 1)``.

    Negative arguments with ``alpha < 1`` fall back to the integral
    representation when the alternating series cancels beyond the tolerance.
    """
    _check_alpha(alpha)
    tol = config.tol if tol is None else tol
    coefficient = fox_wright_coefficient([], [(1.0, alpha)])
    # negative arguments below order one go to the integral instead
    repairable = alpha == 1 or x >= 0
    mp_coefficient = fox_wright_mp_coefficient([], [(1.0, alpha)]) if repairable else None
    try:
        return power_series(coefficient, x, tol=tol, mp_coefficient=mp_coefficient)
    except NonConvergence:
        if x >= 0 or alpha == 1:
            raise
        log.debug("Mittag-Leffler series cancels at x={}, using quadrature".format(x))
        return _mittag_leffler_integral(alpha, x, tol)


def mittag_leffler_3(alpha, beta, gamma, x, tol=None):
    """Three-parameter (Prabhakar) Mittag-Leffler function.

    ``sum_r Gamma(gamma + r) x**r / (Gamma(gamma) Gamma(alpha r + beta) r!)``
    """
    if not alpha > 0:
        raise InvalidParams("alpha must be positive, got {}".format(alpha))
    if _is_pole(np.float64(gamma)):
        raise InvalidParams("gamma must not be a non-positive integer, got {}".format(gamma))
    constant = -special.gammaln(gamma)
    lower = [(beta, alpha), (1.0, 1.0)]
    base = fox_wright_coefficient([(gamma, 1.0)], lower, constant=constant)
    gamma_sign = special.gammasgn(gamma)

    def coefficient(r):
        logabs, sign = base(r)
        return logabs, sign * gamma_sign

    return power_series(
        coefficient,
        x,
        tol=tol,
        mp_coefficient=fox_wright_mp_coefficient(
            [(gamma, 1.0)], lower, scale=lambda: mpmath.rgamma(gamma)
        ),
    )


def bessel_i(nu, x, tol=None):
    """Modified Bessel function of the first kind ``I_nu(x)`` for ``x >= 0``.

    The inner series ``sum_r (x^2/4)**r / (r! Gamma(nu + r + 1))`` has positive
    terms, so its tail is also cut relative to the leading term ``1/Gamma(nu + 1)``.
    Small values keep full relative precision whatever the absolute ``tol``.
    """
    if nu < 0:
        raise InvalidParams("order must be non-negative, got {}".format(nu))
    if x < 0:
        raise InvalidParams("argument must be non-negative, got {}".format(x))
    tol = config.tol if tol is None else tol
    if x == 0:
        return SeriesResult(1.0 if nu == 0 else 0.0, 1, 0.0)
    scale = (x / 2.0) ** nu
    lower = [(1.0, 1.0), (nu + 1.0, 1.0)]
    leading = math.exp(-special.gammaln(nu + 1.0))
    inner = power_series(
        fox_wright_coefficient([], lower),
        x * x / 4.0,
        tol=tol / scale if scale > 0 else tol,
        mp_coefficient=fox_wright_mp_coefficient([], lower),
        tail_tol=EPS * leading / 4 if leading > 0 else None,
    )
    return SeriesResult(scale * inner.value, inner.terms_used, scale * inner.truncation_bound)


def caputo_term_derivative(p, beta):
    """Coefficient ``c`` with ``D^beta t**p = c t**(p - beta)`` (Caputo).

    :param p: non-negative exponent
    :param beta: order in (0, 1]
    :returns: ``Gamma(p + 1) / Gamma(p - beta + 1)``, or 0 for constants
    """
    _check_alpha(beta)
    if p < 0:
        raise InvalidParams("exponent must be non-negative, got {}".format(p))
    if p == 0:
        return 0.0
    if _is_pole(np.float64(p - beta + 1)):
        raise InvalidParams("Gamma pole at p - beta + 1 = {}".format(p - beta + 1))
    return math.exp(special.gammaln(p + 1) - special.gammaln(p - beta + 1))
