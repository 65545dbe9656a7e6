# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""Exact laws, generating functions and moments of the Poisson-family fields.

Covers the Poisson random field, the generalized field where batches of
``j = 1..k`` points arrive together with rate ``lambda_j``, its time change by
two independent inverse stable subordinators, and the generalized Skellam
field built from differences of such fields.
"""

import functools
import logging
import math
from collections import namedtuple

import numpy as np
import pandas as pd
from scipy import integrate, special

from poisson_fields import config
from poisson_fields.exceptions import InvalidParams, NonConvergence, QuadratureFailure
from poisson_fields.partitions import (
    adaptive_signed_cap,
    enumerate_theta,
    enumerate_theta_signed,
)
from poisson_fields.specfun import WrightParams, bessel_i, wright_2psi2

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
MAX_SUPPORT = 100000


class RateVector(tuple):
    """Positive rates ``(lambda_1, ..., lambda_k)``; ``lambda_j`` drives batches of size ``j``."""

    def __new__(cls, rates):
        if isinstance(rates, RateVector):
            return rates
        if isinstance(rates, (int, float)):
            rates = [rates]
        try:
            values = tuple(float(r) for r in rates)
        except (TypeError, ValueError):
            raise InvalidParams("rates must be a sequence of numbers, got {!r}".format(rates))
        if not values:
            raise InvalidParams("at least one rate is required")
        for j, rate in enumerate(values, start=1):
            if not (rate > 0 and math.isfinite(rate)):
                raise InvalidParams("rate lambda_{} must be positive, got {}".format(j, rate))
        return super(RateVector, cls).__new__(cls, values)

    @classmethod
    def parse(cls, text):
        """Parse a comma separated list such as ``"1,0.5"``."""
        return cls(part for part in text.split(",") if part.strip())

    @property
    def k(self):
        return len(self)

    @property
    def total(self):
        return math.fsum(self)

    @property
    def first_moment(self):
        """``sum(j * lambda_j)``, the mean count per unit measure."""
        return math.fsum(j * rate for j, rate in enumerate(self, start=1))

    @property
    def second_moment(self):
        """``sum(j**2 * lambda_j)``, the variance per unit measure."""
        return math.fsum(j * j * rate for j, rate in enumerate(self, start=1))


class Window(object):
    """Axis-aligned box with non-negative coordinates.

    Anchored windows are ``[0, x]``; in two dimensions an increment window is
    ``(s, s'] x (t, t']``.

    :param bounds: one ``(low, high)`` pair per dimension
    """

    def __init__(self, bounds):
        bounds = tuple((float(low), float(high)) for low, high in bounds)
        if not bounds:
            raise InvalidParams("a window needs at least one dimension")
        for low, high in bounds:
            if low < 0 or high < low:
                raise InvalidParams("invalid window side ({}, {})".format(low, high))
        self.bounds = bounds

    @classmethod
    def anchored(cls, *corner):
        return cls([(0.0, x) for x in corner])

    @classmethod
    def increment(cls, s, s_end, t, t_end):
        return cls([(s, s_end), (t, t_end)])

    @property
    def dimension(self):
        return len(self.bounds)

    @property
    def measure(self):
        return float(np.prod([high - low for low, high in self.bounds]))

    @property
    def is_anchored(self):
        return all(low == 0 for low, _ in self.bounds)

    @property
    def corner(self):
        return tuple(high for _, high in self.bounds)

    def intersection_measure(self, other):
        if self.dimension != other.dimension:
            raise InvalidParams(
                "windows of dimension {} and {} cannot be intersected".format(
                    self.dimension, other.dimension
                )
            )
        measure = 1.0
        for (low, high), (other_low, other_high) in zip(self.bounds, other.bounds):
            measure *= max(0.0, min(high, other_high) - max(low, other_low))
        return measure

    def contains(self, point):
        return all(low <= x <= high for x, (low, high) in zip(point, self.bounds))

    def __eq__(self, other):
        return isinstance(other, Window) and self.bounds == other.bounds

    def __hash__(self):
        return hash(self.bounds)

    def __repr__(self):
        return "Window({})".format(self.bounds)


class FracOrders(namedtuple("FracOrders", ["alpha", "beta"])):
    """Orders of the two inverse stable clocks; ``(1, 1)`` is the unchanged field."""

    __slots__ = ()

    def __new__(cls, alpha=1.0, beta=1.0):
        for name, value in (("alpha", alpha), ("beta", beta)):
            if not 0 < value <= 1:
                raise InvalidParams("{} must lie in (0, 1], got {}".format(name, value))
        return super(FracOrders, cls).__new__(cls, float(alpha), float(beta))

    @property
    def classical(self):
        return self.alpha == 1 and self.beta == 1

    def clock(self, s, t):
        """``s**alpha * t**beta``, the mean-free scale of ``L(s) L(t)``."""
        return s ** self.alpha * t ** self.beta

    def product_mean(self, s, t):
        """``E[L(s) L(t)]`` for independent clocks."""
        return self.clock(s, t) / (special.gamma(self.alpha + 1) * special.gamma(self.beta + 1))

    def product_variance(self, s, t):
        """``Var[L(s) L(t)]`` for independent clocks."""
        a, b = self.alpha, self.beta
        return self.clock(s, t) ** 2 * (
            4.0 / (special.gamma(2 * a + 1) * special.gamma(2 * b + 1))
            - 1.0 / (special.gamma(a + 1) ** 2 * special.gamma(b + 1) ** 2)
        )


class SkellamRates(namedtuple("SkellamRates", ["plus", "minus"])):
    """Rates of the positive and negative generalized fields of a two-sided process."""

    __slots__ = ()

    def __new__(cls, plus, minus):
        plus, minus = RateVector(plus), RateVector(minus)
        if plus.k != minus.k:
            raise InvalidParams(
                "plus and minus rates must share k, got {} and {}".format(plus.k, minus.k)
            )
        return super(SkellamRates, cls).__new__(cls, plus, minus)

    @property
    def k(self):
        return self.plus.k

    @property
    def total(self):
        return self.plus.total + self.minus.total

    @property
    def first_moment(self):
        return self.plus.first_moment - self.minus.first_moment

    @property
    def second_moment(self):
        return self.plus.second_moment + self.minus.second_moment


def index_rates(rates):
    """Normalize a SkellamRates or a ``{index: rates}`` mapping to ``{index: RateVector}``."""
    if isinstance(rates, SkellamRates):
        return {1: rates.plus, -1: rates.minus}
    try:
        items = dict(rates).items()
    except (TypeError, ValueError):
        raise InvalidParams("expected SkellamRates or an index -> rates mapping")
    if not items:
        raise InvalidParams("the index set must not be empty")
    mapped = {}
    for index, vector in items:
        if index == 0:
            raise InvalidParams("index 0 is not allowed")
        mapped[index] = RateVector(vector)
    if len({vector.k for vector in mapped.values()}) != 1:
        raise InvalidParams("every index must carry the same number of rates")
    return mapped


class PmfTable(object):
    """Probabilities on a contiguous integer support with a bound on the mass outside it.

    :param start: first integer of the support
    :param probs: probabilities for ``start, start + 1, ...``
    :param tail_mass_bound: bound on the probability mass not listed
    """

    def __init__(self, start, probs, tail_mass_bound):
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < -EPS) or np.any(probs > 1 + EPS):
            raise InvalidParams("probabilities must lie in [0, 1]")
        if tail_mass_bound < 0:
            raise InvalidParams("tail mass bound must be non-negative")
        self.start = int(start)
        self.probs = np.clip(probs, 0.0, 1.0)
        self.tail_mass_bound = float(tail_mass_bound)

    @property
    def stop(self):
        return self.start + len(self.probs)

    @property
    def support(self):
        return np.arange(self.start, self.stop)

    def __len__(self):
        return len(self.probs)

    def __getitem__(self, n):
        if self.start <= n < self.stop:
            return float(self.probs[n - self.start])
        return 0.0

    def __iter__(self):
        return zip(self.support.tolist(), self.probs.tolist())

    @property
    def total(self):
        return math.fsum(self.probs)

    def mean(self):
        return math.fsum(self.support * self.probs)

    def variance(self):
        centered = self.support - self.mean()
        return math.fsum(centered * centered * self.probs)

    def pgf(self, z):
        """``sum(z**n * p(n))`` over the support."""
        return math.fsum(np.power(float(z), self.support.astype(float)) * self.probs)

    def to_frame(self):
        """Rows ``n, probability, tail_bound`` as a pandas DataFrame."""
        return pd.DataFrame(
            {
                "n": self.support,
                "probability": self.probs,
                "tail_bound": np.full(len(self.probs), self.tail_mass_bound),
            },
            columns=["n", "probability", "tail_bound"],
        )

    def __repr__(self):
        return "PmfTable(start={}, size={}, tail_mass_bound={:.3g})".format(
            self.start, len(self.probs), self.tail_mass_bound
        )


def _check_area(area):
    if not (area > 0 and math.isfinite(area)):
        raise InvalidParams("area must be positive, got {}".format(area))


def _check_count(n):
    if int(n) != n:
        raise InvalidParams("n must be an integer, got {}".format(n))
    return int(n)


def _check_sides(s, t):
    if not (s > 0 and t > 0):
        raise InvalidParams("s and t must be positive, got s={} t={}".format(s, t))


def _check_ordered(s, t, s_end, t_end):
    _check_sides(s, t)
    if s_end < s or t_end < t:
        raise InvalidParams(
            "need (s, t) <= (s', t') coordinatewise, got ({}, {}) and ({}, {})".format(
                s, t, s_end, t_end
            )
        )


@functools.lru_cache(maxsize=1024)
def theta_array(k, n):
    parts = [composition.parts for composition in enumerate_theta(k, n)]
    return np.array(parts, dtype=np.int64).reshape(len(parts), k)


def _grow_table(pmf, tol, start=0):
    """Extend ``pmf(start), pmf(start + 1), ...`` until the mass reaches ``1 - tol``."""
    values, errors = [], []
    n = start
    while True:
        value, error = pmf(n)
        values.append(value)
        errors.append(error)
        if math.fsum(values) >= 1 - tol:
            break
        n += 1
        if n - start > MAX_SUPPORT:
            raise NonConvergence("pmf mass did not reach 1 - {} within {} values".format(tol, MAX_SUPPORT))
    tail = max(0.0, 1.0 - math.fsum(values)) + math.fsum(errors)
    return PmfTable(start, values, tail)


def _grow_two_sided(pmf, tol):
    """Extend a pmf on the integers symmetrically around 0."""
    center, center_error = pmf(0)
    left, right = [], []
    errors = [center_error]
    radius = 0
    while math.fsum([center] + left + right) < 1 - tol:
        radius += 1
        if radius > MAX_SUPPORT:
            raise NonConvergence("pmf mass did not reach 1 - {} within radius {}".format(tol, MAX_SUPPORT))
        for side, n in ((left, -radius), (right, radius)):
            value, error = pmf(n)
            side.append(value)
            errors.append(error)
    values = left[::-1] + [center] + right
    tail = max(0.0, 1.0 - math.fsum(values)) + math.fsum(errors)
    return PmfTable(-radius, values, tail)


# -- generalized Poisson random field ---------------------------------------


def gprf_pmf(rates, area, n):
    """Probability that the generalized field puts ``n`` points in a set of measure ``area``.

    Sums ``prod_j (lambda_j |A|)**n_j exp(-lambda_j |A|) / n_j!`` over Theta(k, n),
    each term in log space. Negative ``n`` has probability 0.
    """
    rates = RateVector(rates)
    _check_area(area)
    n = _check_count(n)
    if n < 0:
        return 0.0
    parts = theta_array(rates.k, n)
    log_scaled = np.log(np.asarray(rates) * area)
    log_terms = parts @ log_scaled - special.gammaln(parts + 1).sum(axis=1) - rates.total * area
    return math.fsum(np.exp(log_terms))


def gprf_pmf_table(rates, area, tol=None):
    """Adaptive PmfTable of :func:`gprf_pmf`."""
    rates = RateVector(rates)
    _check_area(area)
    tol = config.tol if tol is None else tol
    table = _grow_table(lambda n: (gprf_pmf(rates, area, n), 4 * EPS), tol)
    log.debug("gprf table over {} values, tail {}".format(len(table), table.tail_mass_bound))
    return table


def panjer_pmf_table(rates, area, tol=None):
    """Compound-Poisson recursion for the generalized field.

    ``p(0) = exp(-Lambda |A|)`` and ``p(n) = (|A| / n) sum_j j lambda_j p(n - j)``.
    """
    rates = RateVector(rates)
    _check_area(area)
    tol = config.tol if tol is None else tol
    weights = np.arange(1, rates.k + 1) * np.asarray(rates) * area
    probs = [math.exp(-rates.total * area)]
    while math.fsum(probs) < 1 - tol:
        n = len(probs)
        if n > MAX_SUPPORT:
            raise NonConvergence("Panjer recursion did not reach 1 - {}".format(tol))
        lags = [probs[n - j] if n - j >= 0 else 0.0 for j in range(1, rates.k + 1)]
        probs.append(math.fsum(weights * np.asarray(lags)) / n)
    return PmfTable(0, probs, max(0.0, 1.0 - math.fsum(probs)) + 4 * EPS * len(probs))


def gprf_pgf(rates, area, z):
    """``exp(sum_j lambda_j |A| (z**j - 1))``."""
    rates = RateVector(rates)
    if area < 0:
        raise InvalidParams("area must be non-negative, got {}".format(area))
    if abs(z) > 1:
        raise InvalidParams("z must lie in [-1, 1], got {}".format(z))
    exponent = math.fsum(rate * area * (z ** j - 1) for j, rate in enumerate(rates, start=1))
    return math.exp(exponent)


def gprf_moments(rates, area):
    rates = RateVector(rates)
    return rates.first_moment * area, rates.second_moment * area


def gprf_cov(rates, a, b):
    """``sum(j**2 lambda_j) |A intersect B|`` for two windows of equal dimension."""
    rates = RateVector(rates)
    return rates.second_moment * a.intersection_measure(b)


def gprf_increment_pmf(rates, window, n):
    """Law of the rectangular increment; depends on the window through its measure only."""
    return gprf_pmf(rates, window.measure, n)


def capacity_functional(rates, window, frac=None, tol=None):
    """Probability that the window holds at least one point.

    :param window: a Window, or a plain measure in the unchanged case
    :param frac: FracOrders; non-classical orders need a two-dimensional anchored window
    """
    rates = RateVector(rates)
    frac = FracOrders() if frac is None else frac
    if not frac.classical:
        if not isinstance(window, Window) or window.dimension != 2 or not window.is_anchored:
            raise InvalidParams("fractional capacity needs a two-dimensional anchored window")
        s, t = window.corner
        x = -rates.total * frac.clock(s, t)
        return 1.0 - wright_2psi2(_pgf_params(frac), x, tol=tol).value
    area = window.measure if isinstance(window, Window) else float(window)
    if area < 0:
        raise InvalidParams("area must be non-negative, got {}".format(area))
    return -math.expm1(-rates.total * area)


def integral_moments(rates, s, t):
    """Mean and variance of the integral of the anchored field over ``[0, s] x [0, t]``."""
    rates = RateVector(rates)
    if s < 0 or t < 0:
        raise InvalidParams("s and t must be non-negative, got s={} t={}".format(s, t))
    area = s * t
    return rates.first_moment * area ** 2 / 4.0, rates.second_moment * area ** 3 / 9.0


# -- time-changed field ------------------------------------------------------


def _pgf_params(frac):
    return WrightParams(((1.0, 1.0), (1.0, 1.0)), ((1.0, frac.alpha), (1.0, frac.beta)))


@functools.lru_cache(maxsize=4096)
def _wright_factor(size, alpha, beta, x, tol):
    params = WrightParams(
        ((size + 1.0, 1.0), (size + 1.0, 1.0)),
        ((alpha * size + 1.0, alpha), (beta * size + 1.0, beta)),
    )
    return wright_2psi2(params, x, tol=tol)


def _factor_tol(size, scale, tol):
    # the batch weights of total size N sum to at most scale**N / N!
    log_tol = math.log(tol) + special.gammaln(size + 1) - size * math.log(scale)
    log_tol -= math.log((size + 1.0) * (size + 2.0))
    return math.exp(min(log_tol, 690.0))


def wright_factor(size, frac, scale, tol=None):
    """``E[(XY)**N exp(-scale XY)]`` with ``X, Y`` the clocks at time 1, as a SeriesResult.

    The tolerance is normalized so that summing the factor against batch weights
    with total ``scale**N / N!`` loses at most ``tol / ((N + 1)(N + 2))``.
    """
    tol = config.tol if tol is None else tol
    return _wright_factor(int(size), frac.alpha, frac.beta, -scale, _factor_tol(size, scale, tol))


def _fgprf_value(rates, frac, s, t, n, tol):
    clock = frac.clock(s, t)
    scale = rates.total * clock
    parts = theta_array(rates.k, int(n))
    sizes = parts.sum(axis=1)
    log_weights = parts @ np.log(np.asarray(rates) * clock) - special.gammaln(parts + 1).sum(axis=1)
    value, error = [], []
    for size in np.unique(sizes):
        weight = math.fsum(np.exp(log_weights[sizes == size]))
        factor = wright_factor(size, frac, scale, tol)
        value.append(weight * factor.value)
        error.append(weight * factor.truncation_bound)
    return max(0.0, math.fsum(value)), math.fsum(error)


def fgprf_pmf(rates, frac, s, t, n, tol=None):
    """Probability of ``n`` points in ``[0, L(s)] x [0, L(t)]`` for independent inverse stable clocks.

    Sums over Theta(k, n) of ``prod_j (lambda_j s^a t^b)**n_j / n_j!`` times the
    2Psi2 factor with parameters shifted by ``N = sum(n_j)`` and argument
    ``-Lambda s^a t^b``. The factor depends on the composition only through
    ``N``, so compositions are grouped by ``N``.
    """
    rates = RateVector(rates)
    frac = FracOrders(*frac)
    _check_sides(s, t)
    tol = config.tol if tol is None else tol
    n = _check_count(n)
    if n < 0:
        return 0.0
    return _fgprf_value(rates, frac, s, t, n, tol)[0]


def fgprf_pmf_table(rates, frac, s, t, tol=None):
    rates = RateVector(rates)
    frac = FracOrders(*frac)
    _check_sides(s, t)
    tol = config.tol if tol is None else tol
    return _grow_table(lambda n: _fgprf_value(rates, frac, s, t, n, tol / 10), tol)


def fgprf_pgf(rates, frac, s, t, z, tol=None):
    """``2Psi2[(1,1),(1,1);(1,a),(1,b) | s^a t^b sum_j lambda_j (z**j - 1)]``."""
    rates = RateVector(rates)
    frac = FracOrders(*frac)
    _check_sides(s, t)
    if abs(z) > 1:
        raise InvalidParams("z must lie in [-1, 1], got {}".format(z))
    x = frac.clock(s, t) * math.fsum(rate * (z ** j - 1) for j, rate in enumerate(rates, start=1))
    return wright_2psi2(_pgf_params(frac), x, tol=tol).value


def fgprf_moments(rates, frac, s, t):
    rates = RateVector(rates)
    frac = FracOrders(*frac)
    mean_clock = frac.product_mean(s, t)
    mean = rates.first_moment * mean_clock
    variance = rates.second_moment * mean_clock + rates.first_moment ** 2 * frac.product_variance(s, t)
    return mean, variance


def _clock_cross_moment(order, s, s_end, tol):
    """``E[L(s) L(s')]`` for one inverse stable clock, ``s <= s'``.

    The substitution ``x = s u**(1/order)`` turns ``x**(order-1) dx`` into
    ``s**order / order du``.
    """
    if s == 0:
        return 0.0

    def integrand(u):
        x = s * u ** (1.0 / order)
        return (s_end - x) ** order + max(s - x, 0.0) ** order

    result = integrate.quad(integrand, 0.0, 1.0, epsabs=tol, epsrel=0.0, limit=200, full_output=1)
    value, error = result[0], result[1]
    if len(result) > 3 or error > tol:
        raise QuadratureFailure(
            "clock cross moment at order={} s={} s'={} reached only {}".format(order, s, s_end, error)
        )
    return s ** order / order * value / (special.gamma(order + 1) * special.gamma(order))


def inverse_subordinator_product_moments(frac, s, t, s_end, t_end, tol=1e-10):
    """Mean of ``L(s) L(t)`` and its covariance with ``L(s') L(t')``.

    :returns: ``(mean_st, cov)``
    :raises QuadratureFailure: when a clock integral misses ``tol``
    """
    frac = FracOrders(*frac)
    _check_ordered(s, t, s_end, t_end)
    cross_s = _clock_cross_moment(frac.alpha, s, s_end, tol)
    cross_t = _clock_cross_moment(frac.beta, t, t_end, tol)
    mean_st = frac.product_mean(s, t)
    cov = cross_s * cross_t - mean_st * frac.product_mean(s_end, t_end)
    return mean_st, cov


def fgprf_cov(rates, frac, s, t, s_end, t_end, tol=1e-10):
    rates = RateVector(rates)
    mean_st, cov = inverse_subordinator_product_moments(frac, s, t, s_end, t_end, tol)
    return mean_st * rates.second_moment + cov * rates.first_moment ** 2


# -- generalized Skellam field -----------------------------------------------


@functools.lru_cache(maxsize=4096)
def _log_bessel(order, x, tol):
    return math.log(bessel_i(order, x, tol=tol).value)


def skellam_pmf(rates, area, n, tol=None):
    """Probability that the two-sided field equals ``n`` on a set of measure ``area``.

    ``exp(-(Lambda+ + Lambda-)|A|)`` times the sum over the signed index set of
    ``prod_j (lambda+_j / lambda-_j)**(n_j/2) I_|n_j|(2 |A| sqrt(lambda+_j lambda-_j))``,
    truncated at the smallest box whose dropped mass is below ``tol / 10``.
    """
    if not isinstance(rates, SkellamRates):
        raise InvalidParams("skellam_pmf needs SkellamRates")
    _check_area(area)
    tol = config.tol if tol is None else tol
    n = _check_count(n)
    W = adaptive_signed_cap(rates, area, tol, n)
    plus, minus = np.asarray(rates.plus), np.asarray(rates.minus)
    log_ratio = 0.5 * np.log(plus / minus)
    arguments = 2 * area * np.sqrt(plus * minus)
    log_bessel = np.array(
        [[_log_bessel(order, float(x), tol * 1e-3) for order in range(W + 1)] for x in arguments]
    )
    parts = np.array(
        [composition.parts for composition in enumerate_theta_signed(rates.k, n, W)], dtype=np.int64
    ).reshape(-1, rates.k)
    if not len(parts):
        return 0.0
    columns = np.arange(rates.k)
    log_terms = parts @ log_ratio + log_bessel[columns, np.abs(parts)].sum(axis=1)
    return math.fsum(np.exp(log_terms - rates.total * area))


def skellam_pmf_table(rates, area, tol=None):
    _check_area(area)
    tol = config.tol if tol is None else tol
    return _grow_two_sided(lambda n: (skellam_pmf(rates, area, n, tol / 10), 4 * EPS), tol)


def skellam_moments(rates, area):
    return rates.first_moment * area, rates.second_moment * area


def gspp_mgf(rates, area, u):
    """``exp(|A| sum_i sum_j lambda^(i)_j (exp(i j u) - 1))``."""
    mapped = index_rates(rates)
    if area < 0:
        raise InvalidParams("area must be non-negative, got {}".format(area))
    exponent = math.fsum(
        rate * area * math.expm1(index * j * u)
        for index, vector in mapped.items()
        for j, rate in enumerate(vector, start=1)
    )
    return math.exp(exponent)


def gspp_moments(rates, area):
    mapped = index_rates(rates)
    mean = math.fsum(index * vector.first_moment * area for index, vector in mapped.items())
    variance = math.fsum(index * index * vector.second_moment * area for index, vector in mapped.items())
    return mean, variance


def gspp_pmf_table(rates, area, tol=None):
    """Law of ``sum_i i M_i(A)`` for integer indices, by convolving stretched field laws."""
    mapped = index_rates(rates)
    _check_area(area)
    tol = config.tol if tol is None else tol
    for index in mapped:
        if int(index) != index:
            raise InvalidParams("pmf tables need integer indices, got {}".format(index))
    start, probs, tail = 0, np.ones(1), 0.0
    for index, vector in sorted(mapped.items()):
        table = gprf_pmf_table(vector, area, tol / len(mapped))
        index = int(index)
        stretched = np.zeros(abs(index) * (len(table) - 1) + 1)
        stretched[:: abs(index)] = table.probs if index > 0 else table.probs[::-1]
        offset = index * (len(table) - 1) if index < 0 else 0
        probs = np.convolve(probs, stretched)
        start += offset
        tail += table.tail_mass_bound
    return PmfTable(start, np.clip(probs, 0.0, 1.0), tail)


# -- time-changed Skellam field ----------------------------------------------


@functools.lru_cache(maxsize=256)
def _size_cutoff(total, alpha, beta, clock, tol):
    """Largest total batch count needed so the remaining mixed-Poisson mass is below ``tol``."""
    frac = FracOrders(alpha, beta)
    scale = total * clock
    mass, errors, size = [], [], 0
    while True:
        factor = wright_factor(size, frac, scale, tol)
        log_weight = size * math.log(scale) - special.gammaln(size + 1)
        mass.append(math.exp(log_weight) * factor.value)
        errors.append(math.exp(log_weight) * factor.truncation_bound)
        tail = 1.0 - math.fsum(mass)
        if tail < tol:
            return size, max(tail, 0.0) + math.fsum(errors)
        size += 1
        if size > config.max_terms:
            raise NonConvergence("total batch count did not settle for scale {}".format(scale))


def _fgspp_value(rates, frac, s, t, n, tol):
    clock = frac.clock(s, t)
    scale = rates.total * clock
    cutoff, cutoff_tail = _size_cutoff(rates.total, frac.alpha, frac.beta, clock, tol / 2)
    W = max(cutoff, abs(n), 1)
    plus, minus = np.asarray(rates.plus), np.asarray(rates.minus)
    log_ratio = 0.5 * np.log(plus / minus)
    log_geo = np.log(np.sqrt(plus * minus) * clock)

    coordinate_cache = {}

    def coordinate(j, n_j):
        # coefficients of x**(2m + |n_j|), m >= 0, up to x**cutoff
        key = (j, n_j)
        if key not in coordinate_cache:
            poly = np.zeros(cutoff + 1)
            m = np.arange((cutoff - abs(n_j)) // 2 + 1)
            exponents = abs(n_j) + 2 * m
            log_coef = (
                n_j * log_ratio[j]
                + exponents * log_geo[j]
                - special.gammaln(abs(n_j) + m + 1)
                - special.gammaln(m + 1)
            )
            poly[exponents] = np.exp(log_coef)
            coordinate_cache[key] = poly
        return coordinate_cache[key]

    weights = np.zeros(cutoff + 1)
    for composition in enumerate_theta_signed(rates.k, n, W):
        if sum(abs(n_j) for n_j in composition.parts) > cutoff:
            continue
        poly = np.ones(1)
        for j, n_j in enumerate(composition.parts):
            poly = np.convolve(poly, coordinate(j, n_j))[: cutoff + 1]
        weights[: len(poly)] += poly

    value, error = [], [cutoff_tail]
    for size in np.flatnonzero(weights):
        factor = wright_factor(size, frac, scale, tol / 2)
        value.append(weights[size] * factor.value)
        error.append(weights[size] * factor.truncation_bound)
    return max(0.0, math.fsum(value)), math.fsum(error)


def fgspp_pmf(rates, frac, s, t, n, tol=None):
    """Probability that the time-changed two-sided field equals ``n``.

    Each pair ``(n_j, m_j)`` of the signed composition and its inner index
    contributes ``2 m_j + |n_j|`` batches, and the 2Psi2 factor depends only on
    the total ``N``. Coefficients are therefore collected into a polynomial in
    ``N`` per composition, and ``N`` is cut where the mixed-Poisson law of the
    total batch count has less than ``tol / 2`` mass left.
    """
    if not isinstance(rates, SkellamRates):
        raise InvalidParams("fgspp_pmf needs SkellamRates")
    frac = FracOrders(*frac)
    _check_sides(s, t)
    tol = config.tol if tol is None else tol
    return _fgspp_value(rates, frac, s, t, _check_count(n), tol)[0]


def fgspp_pmf_table(rates, frac, s, t, tol=None):
    if not isinstance(rates, SkellamRates):
        raise InvalidParams("fgspp_pmf_table needs SkellamRates")
    frac = FracOrders(*frac)
    _check_sides(s, t)
    tol = config.tol if tol is None else tol
    return _grow_two_sided(lambda n: _fgspp_value(rates, frac, s, t, n, tol / 10), tol)


def fgspp_pgf(rates, frac, s, t, z, tol=None):
    """``2Psi2[(1,1),(1,1);(1,a),(1,b) | -phi(z) s^a t^b]`` for ``z`` in ``(0, 1]``."""
    if not isinstance(rates, SkellamRates):
        raise InvalidParams("fgspp_pgf needs SkellamRates")
    frac = FracOrders(*frac)
    _check_sides(s, t)
    if not 0 < z <= 1:
        raise InvalidParams("z must lie in (0, 1], got {}".format(z))
    phi = math.fsum(
        plus * (1 - z ** j) + minus * (1 - z ** -j)
        for j, (plus, minus) in enumerate(zip(rates.plus, rates.minus), start=1)
    )
    return wright_2psi2(_pgf_params(frac), -phi * frac.clock(s, t), tol=tol).value


def fgspp_moments(rates, frac, s, t):
    frac = FracOrders(*frac)
    mean = rates.first_moment * frac.product_mean(s, t)
    variance = (
        rates.second_moment * frac.product_mean(s, t)
        + rates.first_moment ** 2 * frac.product_variance(s, t)
    )
    return mean, variance


def fgspp_cov(rates, frac, s, t, s_end, t_end, tol=1e-10):
    mean_st, cov = inverse_subordinator_product_moments(frac, s, t, s_end, t_end, tol)
    return mean_st * rates.second_moment + cov * rates.first_moment ** 2
