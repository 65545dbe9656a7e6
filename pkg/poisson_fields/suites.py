# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""Named groups of checks run by ``poisson_fields verify``.

Each suite returns a list of :data:`Check` entries. Monte Carlo checks use
fixed stream ids under the given seed, so a suite is reproducible.
"""

import logging
import math
from collections import OrderedDict, namedtuple

import numpy as np
from scipy import special, stats

from poisson_fields import model, sim, specfun, verify
from poisson_fields.model import FracOrders, RateVector, SkellamRates, Window

log = logging.getLogger(__name__)

P_THRESHOLD = 1e-3
MC_SAMPLES = 20000
PATTERN_SAMPLES = 10000

Check = namedtuple("Check", ["name", "passed", "statistic", "tolerance"])


def _below(name, value, tolerance):
    return Check(name, bool(value < tolerance), float(value), tolerance)


def _gof(name, report):
    return Check(name, bool(report.p_value > P_THRESHOLD), report.p_value, P_THRESHOLD)


def _moments(name, report):
    gap = abs(report.mean - report.expected_mean) / report.mean_se if report.mean_se else 0.0
    return Check(name, report.within, gap, 3.0)


def _covariance(name, report):
    gap = abs(report.covariance) / report.covariance_se if report.covariance_se else 0.0
    return Check(name, bool(gap <= 3.0), gap, 3.0)


def reductions(seed):
    """Identities where the general formulas collapse to classical ones."""
    checks = []
    gap = max(
        abs(model.gprf_pmf([2.0], area, n) - stats.poisson.pmf(n, 2.0 * area))
        for area in (0.5, 1.0, 2.5, 5.0)
        for n in range(31)
    )
    checks.append(_below("gprf k=1 equals Poisson", gap, 1e-12))

    rates, unit = RateVector([1.0, 1.0]), FracOrders(1.0, 1.0)
    gap = max(abs(model.fgprf_pmf(rates, unit, 1.5, 2.0, n) - model.gprf_pmf(rates, 3.0, n)) for n in range(21))
    checks.append(_below("fgprf at unit orders equals gprf", gap, 1e-8))

    skellam = SkellamRates([0.5, 0.5], [0.4, 0.6])
    gap = max(
        abs(model.fgspp_pmf(skellam, unit, 1.0, 1.0, n) - model.skellam_pmf(skellam, 1.0, n))
        for n in range(-6, 7)
    )
    checks.append(_below("fgspp at unit orders equals skellam", gap, 1e-8))

    mean, variance = model.fgprf_moments(rates, unit, 2.0, 1.5)
    expected = model.gprf_moments(rates, 3.0)
    checks.append(_below("fgprf moments at unit orders", abs(mean - expected[0]) + abs(variance - expected[1]), 1e-12))

    cov = model.fgprf_cov(rates, unit, 1.0, 1.0, 2.0, 1.5)
    expected = model.gprf_cov(rates, Window.anchored(1.0, 1.0), Window.anchored(2.0, 1.5))
    checks.append(_below("fgprf covariance at unit orders", abs(cov - expected), 1e-8))

    ones = specfun.WrightParams(((1, 1), (1, 1)), ((1, 1), (1, 1)))
    checks.append(_below("2Psi2 reduces to exp", abs(specfun.wright_2psi2(ones, 1.0).value - math.e), 1e-12))
    checks.append(
        _below("Mittag-Leffler at order 1 is exp", abs(specfun.mittag_leffler(1.0, 2.0).value - math.exp(2.0)), 1e-11)
    )
    return checks


def thinning(seed):
    """Thinned fields keep the reduced-rate laws and split into independent parts."""
    checks = []
    counts = sim.sample_prf(4.0, 1.0, sim.RngStream(seed, 100), size=MC_SAMPLES)
    kept, removed = sim.thin_prf(counts, 0.25, sim.RngStream(seed, 101))
    checks.append(_gof("thinned PRF kept law", verify.chi_square_gof(kept, model.gprf_pmf_table([1.0], 1.0))))
    checks.append(_gof("thinned PRF independence", verify.independence_check(np.column_stack([kept, removed]))))

    rates = RateVector([1.0, 2.0])
    components = sim.sample_gprf_components(rates, 1.0, sim.RngStream(seed, 102), size=MC_SAMPLES)
    kept, removed = sim.thin_gprf(components, [0.5, 0.25], sim.RngStream(seed, 103))
    checks.append(_gof("thinned GPRF kept law", verify.chi_square_gof(kept, model.gprf_pmf_table([0.5, 0.5], 1.0))))
    checks.append(
        _gof("thinned GPRF removed law", verify.chi_square_gof(removed, model.gprf_pmf_table([0.5, 1.5], 1.0)))
    )
    checks.append(_gof("thinned GPRF independence", verify.independence_check(np.column_stack([kept, removed]))))

    rng = sim.RngStream(seed, 104)
    window = Window.anchored(2.0, 2.0)
    pairs = []
    for _ in range(PATTERN_SAMPLES):
        pattern = sim.sample_marked_pattern(rates, window, rng)
        pairs.append(
            (
                sim.pattern_increment(pattern, 0.0, 0.0, 1.0, 1.0),
                sim.pattern_increment(pattern, 1.0, 1.0, 2.0, 2.0),
            )
        )
    report = verify.independence_check(np.array(pairs))
    checks.append(_covariance("disjoint increments uncorrelated", report))
    checks.append(_gof("disjoint increments independent", report))
    return checks


def representations(seed):
    """Superposition, compound and integral representations agree with the exact laws."""
    checks = []
    for rates in ([1.0, 1.0], [0.5, 0.25, 0.1], [2.0, 0.3, 0.7]):
        table = model.gprf_pmf_table(rates, 1.5)
        panjer = model.panjer_pmf_table(rates, 1.5)
        convolution = np.ones(1)
        for j, rate in enumerate(rates, start=1):
            poisson = stats.poisson.pmf(np.arange(41), rate * 1.5)
            stretched = np.zeros(j * 40 + 1)
            stretched[::j] = poisson
            convolution = np.convolve(convolution, stretched)[:41]
        gap_panjer = max(abs(table[n] - panjer[n]) for n in range(41))
        gap_convolution = max(abs(model.gprf_pmf(rates, 1.5, n) - convolution[n]) for n in range(41))
        label = ",".join(str(r) for r in rates)
        checks.append(_below("gprf vs compound recursion ({})".format(label), gap_panjer, 1e-10))
        checks.append(_below("gprf vs superposition ({})".format(label), gap_convolution, 1e-10))

    rates = RateVector([1.0, 1.0])
    table = model.gprf_pmf_table(rates, 1.0)
    for i, method in enumerate(("superposition", "compound")):
        draws = sim.sample_gprf(rates, 1.0, sim.RngStream(seed, 200 + i), method=method, size=MC_SAMPLES)
        checks.append(_gof("sample_gprf {} law".format(method), verify.chi_square_gof(draws, table)))

    draws = sim.sample_gprf_integral([1.0], 1.0, 1.0, sim.RngStream(seed, 210), size=MC_SAMPLES)
    mean, variance = model.integral_moments([1.0], 1.0, 1.0)
    checks.append(_moments("integral moments", verify.moment_check(draws, mean, variance)))

    index = {2: [0.4], -3: [0.3]}
    draws = sim.sample_compound_gspp(index, 1.0, sim.RngStream(seed, 211), size=MC_SAMPLES)
    mean, variance = model.gspp_moments(index, 1.0)
    checks.append(_moments("compound GSPP moments", verify.moment_check(draws, mean, variance)))
    return checks


def odes(seed):
    """Finite-difference residuals of the governing equations of the unchanged field."""
    checks = []
    for rates, n in (([1.0, 1.0], 3), ([1.0], 2), ([0.5, 0.25, 0.1], 0)):
        report = verify.ode_residual(rates, 1.0, 1.0, n, h=1e-5)
        checks.append(_below("forward equation in s, rates {} n={}".format(rates, n), report.residual, 1e-6))
    for rates, z in (([1.0], 0.5), ([1.0, 2.0], 0.3)):
        report = verify.pgf_pde_residual(rates, 1.0, 1.0, z, h=1e-4)
        checks.append(_below("pgf equation, rates {} z={}".format(rates, z), report.residual, 1e-6))
    return checks


def fractional(seed):
    """The time-changed field: system residuals, law and clock moments."""
    checks = []
    cases = (
        ([0.5], (0.5, 0.5), 0.7, 0.7, (0, 1, 2, 3)),
        ([0.3, 0.2], (0.6, 0.8), 1.0, 1.0, (0, 1, 2, 3)),
    )
    for rates, frac, s, t, ns in cases:
        for n in ns:
            report = verify.fractional_system_residual(rates, frac, s, t, n)
            name = "fractional system, rates {} orders {} n={}".format(rates, frac, n)
            checks.append(_below(name, report.residual, 1e-5))

    rates, frac = RateVector([1.0]), FracOrders(0.6, 0.8)
    draws = sim.sample_fgprf(rates, frac, 1.0, 1.0, sim.RngStream(seed, 300), size=MC_SAMPLES)
    checks.append(_gof("sample_fgprf law", verify.chi_square_gof(draws, model.fgprf_pmf_table(rates, frac, 1.0, 1.0))))
    mean, variance = model.fgprf_moments(rates, frac, 1.0, 1.0)
    checks.append(_moments("fgprf moments", verify.moment_check(draws, mean, variance)))

    clocks = sim.sample_inverse_stable(0.5, 1.0, sim.RngStream(seed, 301), size=MC_SAMPLES)
    mean = 1.0 / special.gamma(1.5)
    variance = 2.0 / special.gamma(2.0) - mean ** 2
    checks.append(_moments("inverse stable clock mean", verify.moment_check(clocks, mean, variance)))

    frac = FracOrders(0.5, 0.5)
    grid = [1.0, 2.0]
    path_s = sim.sample_inverse_stable_path(0.5, grid, sim.RngStream(seed, 302), size=MC_SAMPLES).values
    path_t = sim.sample_inverse_stable_path(0.5, grid, sim.RngStream(seed, 303), size=MC_SAMPLES).values
    near, far = path_s[:, 0] * path_t[:, 0], path_s[:, 1] * path_t[:, 1]
    _, cov = model.inverse_subordinator_product_moments(frac, 1.0, 1.0, 2.0, 2.0)
    products = (near - near.mean()) * (far - far.mean())
    gap = abs(products.mean() - cov) / (products.std(ddof=1) / math.sqrt(len(products)))
    checks.append(Check("clock product covariance", bool(gap <= 3.0), float(gap), 3.0))
    return checks


def skellam(seed):
    """Two-sided fields against convolution oracles and simulation."""
    checks = []
    symmetric = SkellamRates([1.0], [1.0])
    checks.append(_below("skellam k=1 oracle", verify.skellam_oracle_check(symmetric, 1.0, range(-20, 21)), 1e-10))
    rates = SkellamRates([0.5, 0.5], [0.4, 0.6])
    checks.append(_below("skellam k=2 oracle", verify.skellam_oracle_check(rates, 1.0, range(-20, 21)), 1e-9))
    gap = max(abs(model.skellam_pmf(symmetric, 1.0, n) - model.skellam_pmf(symmetric, 1.0, -n)) for n in range(10))
    checks.append(_below("symmetric skellam pmf is even", gap, 1e-14))

    draws = sim.sample_gspp(symmetric, 1.0, sim.RngStream(seed, 400), size=MC_SAMPLES)
    checks.append(_gof("sample_gspp law", verify.chi_square_gof(draws, model.skellam_pmf_table(symmetric, 1.0))))

    half = SkellamRates([0.5], [0.5])
    frac = FracOrders(0.6, 0.8)
    draws = sim.sample_fgspp(half, frac, 1.0, 1.0, sim.RngStream(seed, 401), size=MC_SAMPLES)
    mean, variance = model.fgspp_moments(half, frac, 1.0, 1.0)
    checks.append(_moments("fgspp moments", verify.moment_check(draws, mean, variance)))
    checks.append(_gof("sample_fgspp law", verify.chi_square_gof(draws, model.fgspp_pmf_table(half, frac, 1.0, 1.0))))
    return checks


def convergence(seed):
    """Bernoulli lattices approach the limiting laws."""
    checks = []
    rates = RateVector([1.0, 1.0])
    target = model.gprf_pmf_table(rates, 1.0)
    distances = []
    for n in (32, 128, 512):
        lattice = sim.LatticeConfig.gprf(n, rates)
        distances.append(verify.table_distance(verify.lattice_pmf_table(lattice, 1.0, 1.0), target))
    checks.append(Check("exact lattice distance decreases", bool(distances[0] > distances[1] > distances[2]), distances[2], distances[1]))

    lattice = sim.LatticeConfig.gprf(512, rates)
    draws = sim.sample_lattice_field(lattice, 1.0, 1.0, sim.RngStream(seed, 500), size=MC_SAMPLES)
    checks.append(_below("GPRF lattice sample distance", verify.total_variation(draws, target), 0.03))

    skellam_rates = SkellamRates([1.0], [1.0])
    lattice = sim.LatticeConfig.skellam(512, skellam_rates)
    draws = sim.sample_lattice_field(lattice, 1.0, 1.0, sim.RngStream(seed, 501), size=MC_SAMPLES)
    checks.append(
        _below("Skellam lattice sample distance", verify.total_variation(draws, model.skellam_pmf_table(skellam_rates, 1.0)), 0.03)
    )
    return checks


SUITES = OrderedDict(
    [
        ("reductions", reductions),
        ("thinning", thinning),
        ("representations", representations),
        ("odes", odes),
        ("fractional", fractional),
        ("skellam", skellam),
        ("convergence", convergence),
    ]
)


def run_suite(name, seed):
    """Run one suite, or every suite for ``all``.

    :returns: list of Check
    """
    names = list(SUITES) if name == "all" else [name]
    checks = []
    for suite in names:
        log.info("running suite {}".format(suite))
        results = SUITES[suite](seed)
        failed = [check.name for check in results if not check.passed]
        log.info("suite {}: {} checks, {} failed {}".format(suite, len(results), len(failed), failed or ""))
        checks.extend(results)
    return checks
