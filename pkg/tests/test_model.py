# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import math

import mpmath
import numpy as np
import pytest
from scipy import special, stats

from poisson_fields import model
from poisson_fields.exceptions import InvalidParams, NonConvergence
from poisson_fields.model import FracOrders, PmfTable, RateVector, SkellamRates, Window

UNIT = FracOrders(1.0, 1.0)


@pytest.fixture
def skellam_rates():
    return SkellamRates([0.5, 0.5], [0.4, 0.6])


def test_rate_vector_parse():
    rates = RateVector.parse("1, 0.5,0.25")
    assert rates == (1.0, 0.5, 0.25)
    assert rates.k == 3
    assert rates.first_moment == pytest.approx(1 + 1 + 0.75)
    assert rates.second_moment == pytest.approx(1 + 2 + 2.25)


@pytest.mark.parametrize("rates", [[], [1.0, 0.0], [-1.0], ["x"]])
def test_rate_vector_rejects(rates):
    with pytest.raises(InvalidParams):
        RateVector(rates)


@pytest.mark.parametrize("alpha,beta", [(0.0, 0.5), (0.5, 1.2)])
def test_frac_orders_rejects(alpha, beta):
    with pytest.raises(InvalidParams):
        FracOrders(alpha, beta)


def test_skellam_rates_share_k():
    with pytest.raises(InvalidParams):
        SkellamRates([1.0], [1.0, 2.0])


def test_window_measures():
    anchored = Window.anchored(2.0, 3.0)
    increment = Window.increment(1.0, 2.0, 0.5, 3.0)
    assert anchored.measure == 6.0
    assert anchored.is_anchored
    assert increment.measure == 2.5
    assert not increment.is_anchored
    assert anchored.intersection_measure(increment) == pytest.approx(2.5)
    assert Window.anchored(1.0, 1.0).intersection_measure(Window.increment(1.0, 2.0, 1.0, 2.0)) == 0.0


def test_window_rejects_bad_sides():
    with pytest.raises(InvalidParams):
        Window([(2.0, 1.0)])
    with pytest.raises(InvalidParams):
        Window.anchored(-1.0)
    with pytest.raises(InvalidParams):
        Window.anchored(1.0).intersection_measure(Window.anchored(1.0, 1.0))


def test_pmf_table_outside_support_is_zero():
    table = PmfTable(2, [0.25, 0.5, 0.25], 0.0)
    assert table[1] == 0.0
    assert table[3] == 0.5
    assert table.mean() == pytest.approx(3.0)
    assert table.variance() == pytest.approx(0.5)
    frame = table.to_frame()
    assert list(frame.columns) == ["n", "probability", "tail_bound"]
    assert frame["n"].tolist() == [2, 3, 4]


def test_pmf_table_rejects_bad_probabilities():
    with pytest.raises(InvalidParams):
        PmfTable(0, [1.5], 0.0)
    with pytest.raises(InvalidParams):
        PmfTable(0, [0.5], -1.0)


# generalized Poisson random field


def test_gprf_k1_is_poisson():
    assert model.gprf_pmf([2.0], 1.0, 3) == pytest.approx(0.180447044315484, abs=1e-12)


@pytest.mark.parametrize("area", [0.5, 1.0, 2.5, 5.0, 10.0])
def test_gprf_k1_poisson_grid(area):
    for n in range(31):
        assert abs(model.gprf_pmf([1.0], area, n) - stats.poisson.pmf(n, area)) < 1e-12


def test_gprf_zero_is_void_probability():
    rates = [0.5, 0.25, 0.1]
    assert model.gprf_pmf(rates, 4.0, 0) == pytest.approx(math.exp(-0.85 * 4.0), rel=1e-14)
    assert model.gprf_pmf(rates, 4.0, 0) == pytest.approx(1 - model.capacity_functional(rates, 4.0), rel=1e-14)


def test_gprf_two_batch_sizes():
    assert model.gprf_pmf([1.0, 1.0], 1.0, 2) == pytest.approx(1.5 * math.exp(-2.0), rel=1e-14)


def test_gprf_negative_n():
    assert model.gprf_pmf([1.0], 1.0, -1) == 0.0


@pytest.mark.parametrize(
    "pmf",
    [
        lambda n: model.gprf_pmf([1.0], 1.0, n),
        lambda n: model.skellam_pmf(SkellamRates([1.0], [1.0]), 1.0, n),
        lambda n: model.fgprf_pmf([1.0], UNIT, 1.0, 1.0, n),
        lambda n: model.fgspp_pmf(SkellamRates([1.0], [1.0]), UNIT, 1.0, 1.0, n),
    ],
)
def test_pmf_rejects_fractional_count(pmf):
    assert pmf(2.0) == pytest.approx(pmf(2))
    with pytest.raises(InvalidParams):
        pmf(2.5)


def test_gprf_rejects_area():
    with pytest.raises(InvalidParams):
        model.gprf_pmf([1.0], 0.0, 1)


@pytest.mark.parametrize("rates", [[1.0, 1.0], [0.5, 0.25, 0.1], [2.0, 0.3, 0.7]])
def test_gprf_matches_superposition_and_compound(rates):
    area = 1.5
    convolution = np.ones(1)
    for j, rate in enumerate(rates, start=1):
        stretched = np.zeros(j * 40 + 1)
        stretched[::j] = stats.poisson.pmf(np.arange(41), rate * area)
        convolution = np.convolve(convolution, stretched)[:41]
    panjer = model.panjer_pmf_table(rates, area)
    for n in range(41):
        value = model.gprf_pmf(rates, area, n)
        assert abs(value - convolution[n]) < 1e-10
        assert abs(value - panjer[n]) < 1e-10


@pytest.mark.parametrize("rates,area", [([1.0, 1.0], 1.0), ([2.0, 2.0, 2.0], 2.0), ([0.5], 4.0)])
def test_gprf_table_normalized(rates, area):
    table = model.gprf_pmf_table(rates, area)
    assert abs(table.total + table.tail_mass_bound - 1.0) < 1e-8
    mean, variance = model.gprf_moments(rates, area)
    assert table.mean() == pytest.approx(mean, rel=1e-8)
    assert table.variance() == pytest.approx(variance, rel=1e-8)


def test_gprf_pgf():
    rates = [1.0, 2.0]
    assert model.gprf_pgf(rates, 0.5, 1.0) == 1.0
    assert model.gprf_pgf(rates, 0.5, 0.0) == pytest.approx(model.gprf_pmf(rates, 0.5, 0))
    table = model.gprf_pmf_table(rates, 0.5)
    assert abs(model.gprf_pgf(rates, 0.5, 0.3) - table.pgf(0.3)) < 1e-10


def test_gprf_pgf_rejects_z():
    with pytest.raises(InvalidParams):
        model.gprf_pgf([1.0], 1.0, 1.5)


@pytest.mark.parametrize(
    "rates,area,expected",
    [([3.0], 2.0, (6.0, 6.0)), ([1.0, 1.0], 1.0, (3.0, 5.0)), ([0.5, 0.25, 0.1], 4.0, (5.2, 9.6))],
)
def test_gprf_moments(rates, area, expected):
    assert model.gprf_moments(rates, area) == pytest.approx(expected)


def test_gprf_cov():
    rates = [1.0, 1.0]
    a, b = Window.anchored(1.0, 1.0), Window.anchored(2.0, 0.5)
    assert model.gprf_cov(rates, a, b) == pytest.approx(2.5)
    assert model.gprf_cov(rates, a, a) == pytest.approx(model.gprf_moments(rates, a.measure)[1])
    disjoint = Window.increment(1.0, 2.0, 1.0, 2.0)
    assert model.gprf_cov(rates, a, disjoint) == 0.0


def test_gprf_increment_pmf_depends_on_measure():
    window = Window.increment(1.0, 3.0, 0.5, 1.0)
    assert model.gprf_increment_pmf([1.0, 0.5], window, 2) == pytest.approx(model.gprf_pmf([1.0, 0.5], 1.0, 2))


def test_capacity_functional():
    assert model.capacity_functional([1.0], 1.0) == pytest.approx(1 - math.exp(-1.0))
    assert model.capacity_functional([1.0], 1e-12) < 1e-11
    assert model.capacity_functional([1.0], Window.anchored(1.0, 1.0), FracOrders(1.0, 1.0)) == pytest.approx(
        1 - math.exp(-1.0)
    )


def test_capacity_functional_fractional():
    # 1 - sum_r (-0.3)**r r! / Gamma(r/2 + 1)**2
    window = Window.anchored(0.5, 0.5)
    expected = 1 - math.fsum(
        (-0.3) ** r * math.factorial(r) / special.gamma(r / 2 + 1) ** 2 for r in range(120)
    )
    value = model.capacity_functional([0.6], window, FracOrders(0.5, 0.5))
    assert value == pytest.approx(expected, abs=1e-10)


def test_capacity_functional_fractional_needs_plane():
    with pytest.raises(InvalidParams):
        model.capacity_functional([1.0], Window.anchored(1.0), FracOrders(0.5, 0.5))


def test_capacity_functional_outside_radius():
    with pytest.raises(NonConvergence):
        model.capacity_functional([1.0], Window.anchored(1.0, 1.0), FracOrders(0.5, 0.5))


def test_integral_moments():
    assert model.integral_moments([1.0], 1.0, 1.0) == pytest.approx((0.25, 1.0 / 9.0))
    assert model.integral_moments([1.0, 2.0], 0.0, 1.0) == (0.0, 0.0)


# time-changed field


@pytest.mark.parametrize("rates", [[1.0], [1.0, 1.0], [0.5, 0.25, 0.1]])
def test_fgprf_unit_orders_reduce_to_gprf(rates):
    for n in range(31):
        assert abs(model.fgprf_pmf(rates, UNIT, 1.5, 2.0, n) - model.gprf_pmf(rates, 3.0, n)) < 1e-10


def test_fgprf_k1_matches_fractional_poisson_field():
    # single sum over the clock mixture of a Poisson law
    alpha, beta, rate, n = 0.6, 0.8, 1.0, 2

    def oracle():
        with mpmath.workdps(50):
            total = mpmath.mpf(0)
            for r in range(200):
                size = n + r
                total += (
                    mpmath.mpf(-rate) ** r
                    * mpmath.mpf(rate) ** n
                    * mpmath.factorial(size) ** 2
                    / (mpmath.factorial(n) * mpmath.factorial(r))
                    * mpmath.rgamma(alpha * size + 1)
                    * mpmath.rgamma(beta * size + 1)
                )
            return float(total)

    assert model.fgprf_pmf([rate], FracOrders(alpha, beta), 1.0, 1.0, n) == pytest.approx(oracle(), abs=1e-10)


def test_fgprf_table_normalized():
    table = model.fgprf_pmf_table([0.4, 0.3], FracOrders(0.6, 0.8), 1.0, 1.0)
    assert abs(table.total + table.tail_mass_bound - 1.0) < 1e-8
    mean, variance = model.fgprf_moments([0.4, 0.3], FracOrders(0.6, 0.8), 1.0, 1.0)
    assert table.mean() == pytest.approx(mean, rel=1e-6)
    assert table.variance() == pytest.approx(variance, rel=1e-6)


@pytest.mark.slow
def test_fgprf_table_normalized_at_grid_corner():
    rates, frac = [2.0, 2.0, 2.0], FracOrders(0.6, 0.8)
    table = model.fgprf_pmf_table(rates, frac, 2.0, 2.0)
    assert abs(table.total + table.tail_mass_bound - 1.0) < 1e-8
    mean, _ = model.fgprf_moments(rates, frac, 2.0, 2.0)
    assert table.mean() == pytest.approx(mean, rel=1e-5)


def test_fgprf_pgf():
    frac = FracOrders(0.5, 0.5)
    assert model.fgprf_pgf([0.4], frac, 1.0, 1.0, 1.0) == pytest.approx(1.0)
    assert model.fgprf_pgf([1.0, 1.0], UNIT, 1.0, 2.0, 0.3) == pytest.approx(model.gprf_pgf([1.0, 1.0], 2.0, 0.3))
    table = model.fgprf_pmf_table([0.4], frac, 1.0, 1.0)
    assert abs(model.fgprf_pgf([0.4], frac, 1.0, 1.0, 0.5) - table.pgf(0.5)) < 1e-9


def test_fgprf_moments():
    assert model.fgprf_moments([1.0], FracOrders(0.5, 0.5), 1.0, 1.0)[0] == pytest.approx(4 / math.pi)
    assert model.fgprf_moments([1.0, 1.0], UNIT, 2.0, 1.5) == pytest.approx(model.gprf_moments([1.0, 1.0], 3.0))


def test_fgprf_rejects_sides():
    with pytest.raises(InvalidParams):
        model.fgprf_pmf([1.0], FracOrders(0.5, 0.5), 0.0, 1.0, 1)


def test_product_moments_unit_orders():
    mean_st, cov = model.inverse_subordinator_product_moments(UNIT, 1.0, 2.0, 3.0, 4.0)
    assert mean_st == pytest.approx(2.0)
    assert cov == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("alpha,beta", [(0.5, 0.5), (0.6, 0.8)])
def test_product_moments_equal_points_give_variance(alpha, beta):
    frac = FracOrders(alpha, beta)
    _, cov = model.inverse_subordinator_product_moments(frac, 1.2, 0.7, 1.2, 0.7)
    assert cov == pytest.approx(frac.product_variance(1.2, 0.7), rel=1e-8)


def test_product_moments_rejects_order():
    with pytest.raises(InvalidParams):
        model.inverse_subordinator_product_moments(UNIT, 2.0, 1.0, 1.0, 1.0)


def test_fgprf_cov():
    rates = [1.0, 1.0]
    unit = model.fgprf_cov(rates, UNIT, 1.0, 1.0, 2.0, 1.5)
    assert unit == pytest.approx(model.gprf_cov(rates, Window.anchored(1.0, 1.0), Window.anchored(2.0, 1.5)))
    frac = FracOrders(0.6, 0.8)
    same = model.fgprf_cov(rates, frac, 1.0, 1.0, 1.0, 1.0)
    assert same == pytest.approx(model.fgprf_moments(rates, frac, 1.0, 1.0)[1], rel=1e-8)


# two-sided fields


def test_skellam_k1_value():
    rates = SkellamRates([1.0], [1.0])
    assert model.skellam_pmf(rates, 1.0, 0) == pytest.approx(0.308508322553671, abs=1e-12)


def test_skellam_symmetric():
    rates = SkellamRates([1.0], [1.0])
    for n in range(1, 8):
        assert model.skellam_pmf(rates, 1.5, n) == pytest.approx(model.skellam_pmf(rates, 1.5, -n), abs=1e-15)


def test_skellam_k1_is_scipy_skellam():
    rates = SkellamRates([1.2], [0.7])
    for n in range(-8, 9):
        assert abs(model.skellam_pmf(rates, 2.0, n) - stats.skellam.pmf(n, 2.4, 1.4)) < 1e-12


def test_skellam_rejects_rate_vector():
    with pytest.raises(InvalidParams):
        model.skellam_pmf(RateVector([1.0]), 1.0, 0)


def test_skellam_table_moments(skellam_rates):
    table = model.skellam_pmf_table(skellam_rates, 1.0)
    assert abs(table.total + table.tail_mass_bound - 1.0) < 1e-8
    mean, variance = model.skellam_moments(skellam_rates, 1.0)
    assert table.mean() == pytest.approx(mean, abs=1e-8)
    assert table.variance() == pytest.approx(variance, rel=1e-8)


def test_gspp_mgf(skellam_rates):
    assert model.gspp_mgf(skellam_rates, 1.0, 0.0) == 1.0
    u = 0.3
    expected = math.exp(
        sum(
            plus * (math.exp(j * u) - 1) + minus * (math.exp(-j * u) - 1)
            for j, (plus, minus) in enumerate(zip(skellam_rates.plus, skellam_rates.minus), start=1)
        )
        * 2.0
    )
    assert model.gspp_mgf(skellam_rates, 2.0, u) == pytest.approx(expected)


def test_gspp_general_index_set():
    index = {2: [0.4], -3: [0.3]}
    mean, variance = model.gspp_moments(index, 1.0)
    assert mean == pytest.approx(0.8 - 0.9)
    assert variance == pytest.approx(4 * 0.4 + 9 * 0.3)
    table = model.gspp_pmf_table(index, 1.0)
    assert table.mean() == pytest.approx(mean, abs=1e-8)
    # 2a - 3b = -3 for a = 0, 3, 6, ... and b = (2a + 3) / 3
    expected = math.fsum(
        stats.poisson.pmf(a, 0.4) * stats.poisson.pmf((2 * a + 3) // 3, 0.3) for a in range(0, 40, 3)
    )
    assert table[-3] == pytest.approx(expected, rel=1e-10)


def test_index_rates_rejects_zero_index():
    with pytest.raises(InvalidParams):
        model.gspp_moments({0: [1.0]}, 1.0)


def test_fgspp_unit_orders_reduce_to_skellam(skellam_rates):
    for n in range(-6, 7):
        assert abs(model.fgspp_pmf(skellam_rates, UNIT, 1.0, 1.0, n) - model.skellam_pmf(skellam_rates, 1.0, n)) < 1e-8


def test_fgspp_k1_matches_single_sum():
    # one clock-mixed sum over the total batch count for k = 1
    alpha, beta, plus, minus, n = 0.6, 0.8, 0.5, 0.5, 1
    total = plus + minus
    frac = FracOrders(alpha, beta)
    value = 0.0
    for m in range(40):
        size = abs(n) + 2 * m
        weight = (plus / minus) ** (n / 2.0) * math.sqrt(plus * minus) ** size / (
            math.factorial(abs(n) + m) * math.factorial(m)
        )
        value += weight * model.wright_factor(size, frac, total).value
    assert model.fgspp_pmf(SkellamRates([plus], [minus]), frac, 1.0, 1.0, n) == pytest.approx(value, abs=1e-10)


def test_fgspp_pgf():
    rates = SkellamRates([0.5], [0.5])
    frac = FracOrders(0.6, 0.6)
    assert model.fgspp_pgf(rates, frac, 1.0, 1.0, 1.0) == pytest.approx(1.0)
    table = model.fgspp_pmf_table(rates, frac, 1.0, 1.0)
    assert abs(model.fgspp_pgf(rates, frac, 1.0, 1.0, 0.7) - table.pgf(0.7)) < 1e-8
    assert abs(table.total + table.tail_mass_bound - 1.0) < 1e-8


def test_fgspp_pgf_unit_orders():
    rates = SkellamRates([0.5], [0.3])
    z = 0.6
    phi = 0.5 * (1 - z) + 0.3 * (1 - 1 / z)
    assert model.fgspp_pgf(rates, UNIT, 1.0, 2.0, z) == pytest.approx(math.exp(-phi * 2.0))


def test_fgspp_pgf_rejects_z():
    with pytest.raises(InvalidParams):
        model.fgspp_pgf(SkellamRates([0.5], [0.5]), UNIT, 1.0, 1.0, 0.0)


def test_fgspp_moments_and_cov(skellam_rates):
    frac = FracOrders(0.7, 0.9)
    mean, variance = model.fgspp_moments(skellam_rates, frac, 2.0, 1.0)
    assert mean == pytest.approx(skellam_rates.first_moment * frac.product_mean(2.0, 1.0))
    assert model.fgspp_cov(skellam_rates, frac, 2.0, 1.0, 2.0, 1.0) == pytest.approx(variance, rel=1e-8)
    assert model.fgspp_moments(skellam_rates, UNIT, 1.0, 2.0) == pytest.approx(model.skellam_moments(skellam_rates, 2.0))
