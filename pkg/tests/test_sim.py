# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import math

import numpy as np
import pytest
from scipy import special

from poisson_fields import model, sim, verify
from poisson_fields.exceptions import InvalidParams, ResourceLimit
from poisson_fields.model import FracOrders, RateVector, SkellamRates, Window
from poisson_fields.sim import LatticeConfig, RngStream

SEED = 20250917
N = 20000


@pytest.fixture
def rng():
    return RngStream(SEED, 1)


def test_rng_stream_replays():
    first = RngStream(SEED, 3).generator.random(5)
    second = RngStream(SEED, 3).generator.random(5)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, RngStream(SEED, 4).generator.random(5))
    assert not np.array_equal(first, RngStream(SEED, 3).spawn(0).generator.random(5))


def test_sample_prf_scalar_and_array(rng):
    assert np.ndim(sim.sample_prf(2.0, 1.0, rng)) == 0
    assert sim.sample_prf(2.0, 1.0, rng, size=7).shape == (7,)


def test_sample_prf_points_inside_window(rng):
    window = Window.anchored(2.0, 3.0)
    pattern = sim.sample_prf(5.0, window, rng, with_points=True)
    assert np.all(pattern.points[:, 0] <= 2.0)
    assert np.all(pattern.points[:, 1] <= 3.0)
    assert pattern.total == len(pattern)


def test_sample_prf_rejects_rate(rng):
    with pytest.raises(InvalidParams):
        sim.sample_prf(0.0, 1.0, rng)


@pytest.mark.parametrize("method", ["superposition", "compound"])
def test_sample_gprf_law(method):
    rates = RateVector([1.0, 1.0])
    draws = sim.sample_gprf(rates, 1.0, RngStream(SEED, 10), method=method, size=N)
    report = verify.chi_square_gof(draws, model.gprf_pmf_table(rates, 1.0))
    assert report.p_value > 1e-3


def test_sample_gprf_rejects_method(rng):
    with pytest.raises(InvalidParams):
        sim.sample_gprf([1.0], 1.0, rng, method="grid")


def test_marked_pattern_counts(rng):
    rates = RateVector([1.0, 2.0, 0.5])
    window = Window.anchored(1.0, 1.0)
    pattern = sim.sample_marked_pattern(rates, window, rng)
    assert pattern.counts(3).sum() == len(pattern)
    assert sim.pattern_count(pattern, (1.0, 1.0)) == pattern.total
    assert sim.pattern_increment(pattern, 0.0, 0.0, 1.0, 1.0) == pattern.total


def test_pattern_increments_add_up(rng):
    pattern = sim.sample_marked_pattern(RateVector([1.0, 2.0, 0.5]), Window.anchored(2.0, 2.0), rng)
    cuts = [0.0, 0.3, 0.8, 1.25, 2.0]
    for s, s_end in zip(cuts, cuts[1:]):
        for t, t_end in zip(cuts, cuts[1:]):
            corners = (
                sim.pattern_count(pattern, (s_end, t_end))
                - sim.pattern_count(pattern, (s, t_end))
                - sim.pattern_count(pattern, (s_end, t))
                + sim.pattern_count(pattern, (s, t))
            )
            assert corners == sim.pattern_increment(pattern, s, t, s_end, t_end) >= 0
    grid = [[sim.pattern_count(pattern, (s, t)) for t in cuts] for s in cuts]
    assert np.all(np.diff(grid, axis=0) >= 0)
    assert np.all(np.diff(grid, axis=1) >= 0)


def test_pattern_integral_mean():
    rates = RateVector([1.0])
    window = Window.anchored(1.0, 1.0)
    rng = RngStream(SEED, 11)
    values = [sim.pattern_integral(sim.sample_marked_pattern(rates, window, rng), 1.0, 1.0) for _ in range(5000)]
    mean, variance = model.integral_moments(rates, 1.0, 1.0)
    assert verify.moment_check(values, mean, variance).within


def test_point_pattern_rejects_outside_points():
    with pytest.raises(InvalidParams):
        sim.PointPattern(Window.anchored(1.0), [[2.0]], [1])


def test_thin_prf_laws():
    counts = sim.sample_prf(4.0, 1.0, RngStream(SEED, 12), size=N)
    kept, removed = sim.thin_prf(counts, 0.25, RngStream(SEED, 13))
    assert np.array_equal(kept + removed, counts)
    assert verify.chi_square_gof(kept, model.gprf_pmf_table([1.0], 1.0)).p_value > 1e-3
    assert verify.chi_square_gof(removed, model.gprf_pmf_table([3.0], 1.0)).p_value > 1e-3
    assert verify.independence_check(np.column_stack([kept, removed])).p_value > 1e-3


def test_thin_prf_pattern(rng):
    pattern = sim.sample_prf(10.0, Window.anchored(1.0, 1.0), rng, with_points=True)
    kept, removed = sim.thin_prf(pattern, 0.5, rng)
    assert kept + removed == len(pattern)


def test_thin_prf_rejects_probability(rng):
    with pytest.raises(InvalidParams):
        sim.thin_prf(3, 1.0, rng)


def test_thin_gprf_laws():
    rates = RateVector([1.0, 2.0])
    components = sim.sample_gprf_components(rates, 1.0, RngStream(SEED, 14), size=N)
    kept, removed = sim.thin_gprf(components, [0.5, 0.25], RngStream(SEED, 15))
    assert verify.chi_square_gof(kept, model.gprf_pmf_table([0.5, 0.5], 1.0)).p_value > 1e-3
    assert verify.chi_square_gof(removed, model.gprf_pmf_table([0.5, 1.5], 1.0)).p_value > 1e-3
    assert verify.independence_check(np.column_stack([kept, removed])).p_value > 1e-3


def test_thin_gprf_needs_one_probability_per_size(rng):
    with pytest.raises(InvalidParams):
        sim.thin_gprf(np.array([1, 2]), [0.5], rng)


def test_multinomial_thinning(rng):
    split = sim.sample_multinomial_thinning(100, [0.2, 0.3, 0.5], rng)
    assert split.sum() == 100
    with pytest.raises(InvalidParams):
        sim.sample_multinomial_thinning(10, [0.5, 0.6], rng)


def test_inverse_stable_mean():
    alpha, t = 0.7, 2.0
    draws = sim.sample_inverse_stable(alpha, t, RngStream(SEED, 16), size=N)
    mean = t ** alpha / special.gamma(alpha + 1)
    variance = t ** (2 * alpha) * (2 / special.gamma(2 * alpha + 1) - 1 / special.gamma(alpha + 1) ** 2)
    assert verify.moment_check(draws, mean, variance).within


def test_stable_subordinator_laplace_transform():
    # E exp(-u H(t)) = exp(-t u**alpha)
    alpha, t, u = 0.5, 1.0, 0.8
    draws = sim.sample_stable_subordinator(alpha, t, RngStream(SEED, 17), size=N)
    values = np.exp(-u * draws)
    se = values.std(ddof=1) / math.sqrt(N)
    assert abs(values.mean() - math.exp(-t * u ** alpha)) < 4 * se


def test_inverse_stable_identity_clock(rng):
    assert np.all(sim.sample_inverse_stable(1.0, 2.5, rng, size=4) == 2.5)


def test_inverse_stable_rejects_order(rng):
    with pytest.raises(InvalidParams):
        sim.sample_inverse_stable(1.5, 1.0, rng)
    with pytest.raises(InvalidParams):
        sim.sample_stable_subordinator(1.0, 1.0, rng)


def test_exact_path_marginals_and_monotone():
    alpha = 0.6
    path = sim.sample_inverse_stable_path(alpha, [0.5, 1.0, 2.0], RngStream(SEED, 18), size=N)
    assert path.values.shape == (N, 3)
    assert np.all(np.diff(path.values, axis=1) >= 0)
    for i, t in enumerate(path.grid):
        mean = t ** alpha / special.gamma(alpha + 1)
        variance = t ** (2 * alpha) * (2 / special.gamma(2 * alpha + 1) - 1 / special.gamma(alpha + 1) ** 2)
        assert verify.moment_check(path.values[:, i], mean, variance).within


def test_exact_path_cross_moment():
    alpha = 0.5
    frac = FracOrders(alpha, 1.0)
    path = sim.sample_inverse_stable_path(alpha, [1.0, 2.0], RngStream(SEED, 19), size=N)
    products = path.values[:, 0] * path.values[:, 1]
    # with the second clock the identity, E[L(1) L(2)] is the product mean plus the covariance
    mean_st, cov = model.inverse_subordinator_product_moments(frac, 1.0, 1.0, 2.0, 1.0)
    expected = cov + mean_st * frac.product_mean(2.0, 1.0)
    se = products.std(ddof=1) / math.sqrt(N)
    assert abs(products.mean() - expected) < 4 * se


def test_grid_path_close_to_exact_mean():
    alpha = 0.7
    path = sim.sample_inverse_stable_path(alpha, [1.0], RngStream(SEED, 20), method="grid", size=500)
    mean = 1.0 / special.gamma(alpha + 1)
    assert abs(path.values[:, 0].mean() - mean) < 0.1


def test_path_rejects_grid(rng):
    with pytest.raises(InvalidParams):
        sim.sample_inverse_stable_path(0.5, [1.0, 0.5], rng)
    with pytest.raises(InvalidParams):
        sim.sample_inverse_stable_path(0.5, [1.0], rng, method="euler")


def test_subordinator_path_rejects_decreasing():
    with pytest.raises(InvalidParams):
        sim.SubordinatorPath([1.0, 2.0], [1.0, 0.5], 0.5)


@pytest.mark.parametrize(
    "stream,rates,frac,s,t",
    [
        (21, [1.0], (0.6, 0.8), 1.0, 1.0),
        (31, [0.4, 0.3], (0.6, 0.8), 1.0, 1.0),
        (32, [1.0, 0.5], (0.7, 0.9), 1.5, 1.0),
    ],
)
def test_sample_fgprf_law(stream, rates, frac, s, t):
    rates, frac = RateVector(rates), FracOrders(*frac)
    draws = sim.sample_fgprf(rates, frac, s, t, RngStream(SEED, stream), size=N)
    assert verify.chi_square_gof(draws, model.fgprf_pmf_table(rates, frac, s, t)).p_value > 1e-3


def test_sample_fgprf_moments():
    rates = RateVector([1.0, 1.0])
    frac = FracOrders(0.7, 0.9)
    draws = sim.sample_fgprf(rates, frac, 2.0, 1.0, RngStream(SEED, 22), size=N)
    mean, variance = model.fgprf_moments(rates, frac, 2.0, 1.0)
    assert verify.moment_check(draws, mean, variance).within


def test_fractional_capacity_monte_carlo():
    rates = RateVector([0.6])
    frac = FracOrders(0.5, 0.5)
    draws = sim.sample_fgprf(rates, frac, 0.5, 0.5, RngStream(SEED, 23), size=N)
    hit = (draws > 0).astype(float)
    expected = model.capacity_functional(rates, Window.anchored(0.5, 0.5), frac)
    assert abs(hit.mean() - expected) < 4 * math.sqrt(expected * (1 - expected) / N)


@pytest.mark.parametrize(
    "stream,rates,area",
    [
        (24, SkellamRates([1.0], [1.0]), 1.0),
        (33, SkellamRates([0.5, 0.3], [0.2, 0.6]), 1.5),
        (34, SkellamRates([2.0], [0.5]), 1.0),
    ],
)
def test_sample_gspp_law(stream, rates, area):
    draws = sim.sample_gspp(rates, area, RngStream(SEED, stream), size=N)
    assert verify.chi_square_gof(draws, model.skellam_pmf_table(rates, area)).p_value > 1e-3


def test_compound_gspp_moments():
    index = {2: [0.4], -3: [0.3]}
    draws = sim.sample_compound_gspp(index, 1.0, RngStream(SEED, 25), size=N)
    mean, variance = model.gspp_moments(index, 1.0)
    assert verify.moment_check(draws, mean, variance).within


def test_gspp_mgf_monte_carlo():
    index = {2: [0.4], -3: [0.3]}
    draws = sim.sample_gspp(index, 1.0, RngStream(SEED, 26), size=N)
    values = np.exp(0.1 * draws)
    se = values.std(ddof=1) / math.sqrt(N)
    assert abs(values.mean() - model.gspp_mgf(index, 1.0, 0.1)) < 4 * se


@pytest.mark.parametrize(
    "stream,rates,frac,s,t",
    [
        (27, SkellamRates([0.5], [0.5]), (0.6, 0.8), 1.0, 1.0),
        (35, SkellamRates([0.4, 0.2], [0.3, 0.3]), (0.7, 0.9), 1.0, 1.0),
        (36, SkellamRates([1.0], [0.5]), (0.8, 0.6), 1.0, 0.8),
    ],
)
def test_sample_fgspp_law(stream, rates, frac, s, t):
    frac = FracOrders(*frac)
    draws = sim.sample_fgspp(rates, frac, s, t, RngStream(SEED, stream), size=N)
    mean, variance = model.fgspp_moments(rates, frac, s, t)
    assert verify.moment_check(draws, mean, variance).within
    assert verify.chi_square_gof(draws, model.fgspp_pmf_table(rates, frac, s, t)).p_value > 1e-3


def test_sample_gprf_integral_moments():
    rates = RateVector([1.0, 2.0])
    draws = sim.sample_gprf_integral(rates, 2.0, 0.5, RngStream(SEED, 28), size=N)
    mean, variance = model.integral_moments(rates, 2.0, 0.5)
    assert verify.moment_check(draws, mean, variance).within


def test_sample_gprf_integral_empty_window(rng):
    assert np.all(sim.sample_gprf_integral([1.0], 0.0, 1.0, rng, size=3) == 0)


def test_lattice_config_probabilities():
    lattice = LatticeConfig.gprf(32, [1.0, 2.0])
    assert lattice.uniform
    assert lattice.probs.tolist() == pytest.approx([1.0 / 1024, 2.0 / 1024])
    with pytest.raises(InvalidParams):
        LatticeConfig.gprf(1, [1.0, 2.0])
    skellam = LatticeConfig.skellam(16, SkellamRates([1.0], [0.5]))
    assert skellam.values.tolist() == [1, -1]


def test_lattice_field_law():
    rates = RateVector([1.0, 1.0])
    lattice = LatticeConfig.gprf(512, rates)
    draws = sim.sample_lattice_field(lattice, 1.0, 1.0, RngStream(SEED, 29), size=N)
    assert verify.total_variation(draws, model.gprf_pmf_table(rates, 1.0)) < 0.03


def test_lattice_explicit_cells(rng):
    probs = np.full((4, 4, 1), 0.25)
    lattice = LatticeConfig(4, [1], probs)
    assert not lattice.uniform
    draws = sim.sample_lattice_field(lattice, 1.0, 1.0, rng, size=2000)
    assert abs(draws.mean() - 4.0) < 0.2
    with pytest.raises(InvalidParams):
        sim.sample_lattice_field(lattice, 2.0, 1.0, rng)


def test_lattice_cell_cap(monkeypatch, rng):
    monkeypatch.setattr("poisson_fields.config.lattice_cell_cap", 100)
    with pytest.raises(ResourceLimit):
        sim.sample_lattice_field(LatticeConfig.gprf(32, [1.0]), 1.0, 1.0, rng)


def test_run_batches_independent_of_workers():
    def sampler(stream, size):
        return sim.sample_gprf([1.0, 0.5], 1.0, stream, size=size)

    single = sim.run_batches(sampler, 2500, seed=5, batch_size=1000, workers=1)
    threaded = sim.run_batches(sampler, 2500, seed=5, batch_size=1000, workers=3)
    assert len(single) == 2500
    assert np.array_equal(single, threaded)
    assert not np.array_equal(single, sim.run_batches(sampler, 2500, seed=6, batch_size=1000))


def test_run_batches_rejects_samples():
    with pytest.raises(InvalidParams):
        sim.run_batches(lambda stream, size: np.zeros(size), 0)


@pytest.mark.slow
@pytest.mark.parametrize("method", ["superposition", "compound"])
@pytest.mark.parametrize("rates", [[1.0, 1.0], [0.5, 0.25, 0.1], [2.0, 0.3]])
def test_sample_gprf_law_full_size(method, rates):
    draws = sim.sample_gprf(rates, 1.0, RngStream(SEED, 100), method=method, size=100000)
    assert verify.chi_square_gof(draws, model.gprf_pmf_table(rates, 1.0)).p_value > 1e-3


@pytest.mark.slow
def test_fgprf_cov_monte_carlo_full_size():
    frac = FracOrders(0.5, 0.5)
    rates = RateVector([1.0])
    n = 1000000
    path_s = sim.sample_inverse_stable_path(0.5, [1.0, 2.0], RngStream(SEED, 101), size=n).values
    path_t = sim.sample_inverse_stable_path(0.5, [1.0, 2.0], RngStream(SEED, 102), size=n).values
    areas = path_s * path_t
    gen = RngStream(SEED, 103).generator
    near = gen.poisson(areas[:, 0])
    far = near + gen.poisson(areas[:, 1] - areas[:, 0])
    products = (near - near.mean()) * (far - far.mean())
    se = products.std(ddof=1) / math.sqrt(n)
    assert abs(products.mean() - model.fgprf_cov(rates, frac, 1.0, 1.0, 2.0, 2.0)) < 3 * se
