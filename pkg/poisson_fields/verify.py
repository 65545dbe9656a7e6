# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""Goodness of fit, oracle comparisons and equation residuals."""

import logging
import math
from collections import namedtuple

import mpmath
import numpy as np
from scipy import stats

from poisson_fields import config
from poisson_fields.exceptions import DegenerateBins, InvalidParams
from poisson_fields.model import (
    FracOrders,
    PmfTable,
    RateVector,
    SkellamRates,
    fgprf_pmf,
    gprf_pgf,
    gprf_pmf,
    gprf_pmf_table,
    skellam_pmf,
    theta_array,
    wright_factor,
)
from poisson_fields.specfun import (
    caputo_term_derivative,
    fox_wright_coefficient,
    fox_wright_mp_coefficient,
    power_series,
)

log = logging.getLogger(__name__)

MIN_EXPECTED = 5.0

GofReport = namedtuple(
    "GofReport",
    ["statistic", "dof", "p_value", "samples", "bins", "covariance", "covariance_se"],
    defaults=(None, None),
)

ResidualReport = namedtuple("ResidualReport", ["lhs", "rhs", "residual", "step", "truncation"])

MomentReport = namedtuple(
    "MomentReport",
    ["mean", "expected_mean", "mean_se", "variance", "expected_variance", "variance_se", "within"],
)


def _merge_bins(probs, samples, min_expected):
    """Greedy left-to-right merge so every bin expects at least ``min_expected`` counts.

    :returns: list of ``(first, last)`` index pairs into ``probs``
    """
    bins, first, acc = [], 0, 0.0
    for i, p in enumerate(probs):
        acc += p * samples
        if acc >= min_expected:
            bins.append([first, i])
            first, acc = i + 1, 0.0
    if first < len(probs):
        if bins:
            bins[-1][1] = len(probs) - 1
        else:
            bins.append([first, len(probs) - 1])
    return bins


def chi_square_gof(samples, pmf, min_expected=MIN_EXPECTED):
    """Pearson chi-square of integer samples against a PmfTable.

    The outermost bins are open-ended so the mass outside the table is
    absorbed by the edges; bins are merged until each expects ``min_expected``.

    :raises DegenerateBins: when fewer than two bins remain
    """
    samples = np.asarray(samples)
    n = len(samples)
    if n < 1000:
        raise InvalidParams("chi-square needs at least 1000 samples, got {}".format(n))
    bins = _merge_bins(pmf.probs, n, min_expected)
    if len(bins) < 2:
        raise DegenerateBins("only {} bin left after merging".format(len(bins)))
    expected = np.array([pmf.probs[first : last + 1].sum() for first, last in bins])
    expected[-1] = max(1.0 - expected[:-1].sum(), 0.0)
    expected *= n
    # index of the bin each sample falls in; values past the edges go to the edge bins
    uppers = np.array([pmf.start + last for _, last in bins])
    owner = np.minimum(np.searchsorted(uppers, samples, side="left"), len(bins) - 1)
    observed = np.bincount(owner, minlength=len(bins))
    statistic = float(np.sum((observed - expected) ** 2 / expected))
    dof = len(bins) - 1
    labels = ["{}..{}".format(pmf.start + first, pmf.start + last) for first, last in bins]
    labels[0] = "..{}".format(pmf.start + bins[0][1])
    labels[-1] = "{}..".format(pmf.start + bins[-1][0])
    return GofReport(statistic, dof, float(stats.chi2.sf(statistic, dof)), n, labels)


def _margin_edges(values, min_count):
    """Upper edges of merged value classes, each holding at least ``min_count`` samples."""
    support, counts = np.unique(values, return_counts=True)
    edges, acc = [], 0
    for value, count in zip(support, counts):
        acc += count
        if acc >= min_count:
            edges.append(value)
            acc = 0
    if acc and edges:
        edges[-1] = support[-1]
    elif not edges:
        edges.append(support[-1])
    return np.asarray(edges)


def independence_check(pairs, min_expected=MIN_EXPECTED):
    """Chi-square test of independence on binned pairs, with the sample covariance.

    Each margin is merged into classes of at least ``sqrt(min_expected * n)``
    samples so every cell of the contingency table expects ``min_expected``.
    """
    pairs = np.asarray(pairs)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise InvalidParams("pairs must have shape (n, 2)")
    n = len(pairs)
    if n < 10000:
        raise InvalidParams("independence check needs at least 10000 pairs, got {}".format(n))
    min_count = math.ceil(math.sqrt(min_expected * n))
    x, y = pairs[:, 0], pairs[:, 1]
    x_edges, y_edges = _margin_edges(x, min_count), _margin_edges(y, min_count)
    if len(x_edges) < 2 or len(y_edges) < 2:
        raise DegenerateBins("a margin collapsed to a single class")
    rows = np.minimum(np.searchsorted(x_edges, x, side="left"), len(x_edges) - 1)
    cols = np.minimum(np.searchsorted(y_edges, y, side="left"), len(y_edges) - 1)
    table = np.zeros((len(x_edges), len(y_edges)))
    np.add.at(table, (rows, cols), 1)
    statistic, p_value, dof, _ = stats.chi2_contingency(table, correction=False)

    dx, dy = x - x.mean(), y - y.mean()
    products = dx * dy
    covariance = float(products.sum() / (n - 1))
    covariance_se = float(products.std(ddof=1) / math.sqrt(n))
    bins = "{}x{}".format(len(x_edges), len(y_edges))
    return GofReport(float(statistic), int(dof), float(p_value), n, bins, covariance, covariance_se)


def ks_uniformity(p_values):
    """Kolmogorov-Smirnov test that p-values are uniform on [0, 1]."""
    p_values = np.asarray(p_values, dtype=float)
    result = stats.kstest(p_values, "uniform")
    return GofReport(float(result.statistic), 0, float(result.pvalue), len(p_values), "continuous")


def moment_check(samples, mean, variance, width=3.0):
    """Sample mean and variance against closed forms, each within ``width`` standard errors."""
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    if n < 2:
        raise InvalidParams("need at least two samples")
    sample_mean = float(samples.mean())
    centered = samples - sample_mean
    sample_variance = float(centered.var(ddof=1))
    mean_se = math.sqrt(sample_variance / n)
    fourth = float(np.mean(centered ** 4))
    variance_se = math.sqrt(max(fourth - sample_variance ** 2, 0.0) / n)
    within = abs(sample_mean - mean) <= width * mean_se and abs(sample_variance - variance) <= width * variance_se
    return MomentReport(sample_mean, mean, mean_se, sample_variance, variance, variance_se, bool(within))


def total_variation(samples, pmf):
    """Half the L1 distance between the empirical law of ``samples`` and a PmfTable."""
    values, counts = np.unique(np.asarray(samples), return_counts=True)
    empirical = dict(zip(values.tolist(), (counts / counts.sum()).tolist()))
    support = set(empirical) | set(pmf.support.tolist())
    return 0.5 * math.fsum(abs(empirical.get(n, 0.0) - pmf[n]) for n in support)


def table_distance(first, second):
    """Total variation distance between two PmfTables over the union of their supports."""
    low, high = min(first.start, second.start), max(first.stop, second.stop)
    return 0.5 * math.fsum(abs(first[n] - second[n]) for n in range(low, high))


def lattice_pmf_table(lattice, s, t, radius=200):
    """Exact law of a lattice field with a shared cell row, on ``[-radius, radius]``.

    The cell law is raised to the number of cells by repeated squaring; each
    product is cut back to the window, which only drops far-tail mass.
    """
    if not lattice.uniform:
        raise InvalidParams("exact lattice laws need a shared cell probability row")
    cells = int(math.floor(lattice.n * s)) * int(math.floor(lattice.n * t))
    width = 2 * radius + 1
    cell = np.zeros(width)
    cell[radius] = 1.0 - lattice.probs.sum()
    for value, p in zip(lattice.values, lattice.probs):
        cell[radius + value] += p

    def product(a, b):
        return np.convolve(a, b)[radius : radius + width]

    law = np.zeros(width)
    law[radius] = 1.0
    power = cell
    while cells:
        if cells & 1:
            law = product(law, power)
        cells >>= 1
        if cells:
            power = product(power, power)
    law = np.clip(law, 0.0, 1.0)
    return PmfTable(-radius, law, max(0.0, 1.0 - math.fsum(law)))


def pgf_duality_check(pgf_value, table, z):
    """``|pgf(z) - sum(z**n p(n))|`` over the table support."""
    return abs(pgf_value - table.pgf(z))


def skellam_oracle_check(rates, area, n_range, tol=None):
    """Largest gap between the Bessel formula and the convolution of the two field laws."""
    if not isinstance(rates, SkellamRates):
        raise InvalidParams("skellam_oracle_check needs SkellamRates")
    tol = config.tol if tol is None else tol
    if not tol > 0:
        raise InvalidParams("tolerance must be positive, got {}".format(tol))
    plus = gprf_pmf_table(rates.plus, area, tol / 10)
    minus = gprf_pmf_table(rates.minus, area, tol / 10)
    # difference law on -(len(minus) - 1) .. len(plus) - 1
    difference = np.convolve(plus.probs, minus.probs[::-1])
    offset = -(len(minus) - 1)
    gap = 0.0
    for n in n_range:
        index = n - offset
        oracle = difference[index] if 0 <= index < len(difference) else 0.0
        gap = max(gap, abs(skellam_pmf(rates, area, n, tol) - oracle))
    return gap


# -- equation residuals ------------------------------------------------------


def ode_residual(rates, s, t, n, h=1e-5):
    """Central difference in ``s`` of the pmf against the forward equation in ``s``.

    ``d/ds p(n) = -Lambda t p(n) + sum_j lambda_j t p(n - j)``
    """
    rates = RateVector(rates)
    if not s > h > 0:
        raise InvalidParams("need s > h > 0, got s={} h={}".format(s, h))
    lhs = (gprf_pmf(rates, (s + h) * t, n) - gprf_pmf(rates, (s - h) * t, n)) / (2 * h)
    rhs = -rates.total * t * gprf_pmf(rates, s * t, n) + math.fsum(
        rate * t * gprf_pmf(rates, s * t, n - j) for j, rate in enumerate(rates, start=1)
    )
    return ResidualReport(lhs, rhs, abs(lhs - rhs), h, 0.0)


def pgf_pde_residual(rates, s, t, z, h=1e-4):
    """Mixed central difference of the pgf against its second-order equation.

    The rate derivative on the right is ``s t (z - 1) G``.
    """
    rates = RateVector(rates)
    if not (s > h > 0 and t > h):
        raise InvalidParams("need s, t > h > 0, got s={} t={} h={}".format(s, t, h))

    def pgf(a, b):
        return gprf_pgf(rates, a * b, z)

    lhs = (pgf(s + h, t + h) - pgf(s + h, t - h) - pgf(s - h, t + h) + pgf(s - h, t - h)) / (4 * h * h)
    value = pgf(s, t)
    rate_derivative = s * t * (z - 1) * value
    first = math.fsum(rate * (z ** j - 1) for j, rate in enumerate(rates, start=1)) * value
    second = math.fsum(
        rate * other * math.fsum(z ** (j + i - r) - z ** (i - r) for r in range(1, i + 1))
        for j, rate in enumerate(rates, start=1)
        for i, other in enumerate(rates, start=1)
    )
    rhs = first + second * rate_derivative
    return ResidualReport(lhs, rhs, abs(lhs - rhs), h, 0.0)


def _caputo_log(order, powers):
    values = np.array([caputo_term_derivative(p, order) for p in powers])
    with np.errstate(divide="ignore"):
        return np.log(values)


def _fractional_lhs_series(size, frac, scale, tol):
    """Caputo derivatives in both clocks of ``sum_r c(N, r) x**r u**(N + r)``, divided by ``u**(N-1)``.

    Every monomial ``u**m = s**(a m) t**(b m)`` maps to
    ``C_a(m) C_b(m) u**(m - 1)``, so the result is again a power series in
    ``x = -Lambda u``.
    """
    alpha, beta = frac
    base = fox_wright_coefficient(
        [(size + 1.0, 1.0), (size + 1.0, 1.0)],
        [(alpha * size + 1.0, alpha), (beta * size + 1.0, beta), (1.0, 1.0)],
    )

    def coefficient(r):
        logabs, sign = base(r)
        powers = size + np.asarray(r, dtype=float)
        logabs = logabs + _caputo_log(alpha, alpha * powers) + _caputo_log(beta, beta * powers)
        sign = np.where(np.isfinite(logabs), sign, 0.0)
        return np.where(sign != 0, logabs, -np.inf), sign

    # the Caputo factors cancel Gamma(a m + 1) and Gamma(b m + 1), leaving Gamma(a m - a + 1)
    mp_base = fox_wright_mp_coefficient(
        [(size + 1.0, 1.0), (size + 1.0, 1.0)],
        [(alpha * (size - 1.0) + 1.0, alpha), (beta * (size - 1.0) + 1.0, beta), (1.0, 1.0)],
    )

    def mp_coefficient(count):
        values = mp_base(count)
        if size == 0 and values:
            values[0] = mpmath.mpf(0)
        return values

    return power_series(coefficient, -scale, tol=tol, mp_coefficient=mp_coefficient)


def _rate_derivative(rates, frac, s, t, n, tol):
    """``d/d lambda_1`` of the time-changed pmf, term by term.

    With ``u = s^a t^b`` and ``Psi_N(x)`` the shifted Wright factor,
    ``p = sum W u**N Psi_N(-Lambda u)`` and ``Psi_N' = Psi_{N+1}``, hence
    ``dp = sum W u**N ((n_1 / lambda_1) Psi_N - u Psi_{N+1})``.
    """
    if n < 0:
        return 0.0, 0.0
    clock = frac.clock(s, t)
    scale = rates.total * clock
    parts = theta_array(rates.k, int(n))
    values, errors = [], []
    for composition in parts:
        size = int(composition.sum())
        log_weight = float(
            np.dot(composition, np.log(np.asarray(rates) * clock))
            - sum(math.lgamma(p + 1) for p in composition)
        )
        weight = math.exp(log_weight)
        current = wright_factor(size, frac, scale, tol)
        following = wright_factor(size + 1, frac, scale, tol)
        values.append(weight * (composition[0] / rates[0] * current.value - clock * following.value))
        errors.append(weight * (composition[0] / rates[0] * current.truncation_bound
                                + clock * following.truncation_bound))
    return math.fsum(values), math.fsum(errors)


def fractional_system_residual(rates, frac, s, t, n, truncation=None):
    """Residual of the fractional difference-differential system at an interior point.

    Left: Caputo derivatives of order ``alpha`` in ``s`` and ``beta`` in ``t``
    applied term by term to the series of the pmf. Right:
    ``-sum_j lambda_j (Q(n) - Q(n - j))`` with
    ``Q(m) = p(m) + sum_j' lambda_j' sum_{r=1..j'} dp(m - j' + r)`` and ``dp``
    the analytic rate derivative of the pmf.
    """
    rates = RateVector(rates)
    frac = FracOrders(*frac)
    if not (s > 0 and t > 0):
        raise InvalidParams("the system is checked at interior points only, got s={} t={}".format(s, t))
    tol = config.tol if truncation is None else truncation
    clock = frac.clock(s, t)
    scale = rates.total * clock

    parts = theta_array(rates.k, int(n))
    sizes = parts.sum(axis=1)
    lhs_terms, lhs_errors = [], []
    for size in np.unique(sizes):
        group = parts[sizes == size]
        weight = math.fsum(
            math.exp(float(np.dot(c, np.log(np.asarray(rates)))) - sum(math.lgamma(p + 1) for p in c))
            for c in group
        )
        factor = weight * clock ** (size - 1.0)
        series = _fractional_lhs_series(int(size), frac, scale, tol / max(factor, 1e-300) / len(parts))
        lhs_terms.append(factor * series.value)
        lhs_errors.append(factor * series.truncation_bound)
    lhs = math.fsum(lhs_terms)

    pmf_cache, derivative_cache = {}, {}

    def pmf(m):
        if m not in pmf_cache:
            pmf_cache[m] = fgprf_pmf(rates, frac, s, t, m, tol) if m >= 0 else 0.0
        return pmf_cache[m]

    def derivative(m):
        if m not in derivative_cache:
            derivative_cache[m] = _rate_derivative(rates, frac, s, t, m, tol)
        return derivative_cache[m]

    def q(m):
        shifted = math.fsum(
            other * derivative(m - i + r)[0]
            for i, other in enumerate(rates, start=1)
            for r in range(1, i + 1)
        )
        return pmf(m) + shifted

    rhs = -math.fsum(rate * (q(n) - q(n - j)) for j, rate in enumerate(rates, start=1))
    rhs_error = math.fsum(error for _, error in derivative_cache.values()) * rates.total * rates.total
    truncation_bound = math.fsum(lhs_errors) + rhs_error + 2 * tol * rates.total * len(pmf_cache)
    log.debug("fractional residual n={} lhs={} rhs={}".format(n, lhs, rhs))
    return ResidualReport(lhs, rhs, abs(lhs - rhs), None, truncation_bound)
