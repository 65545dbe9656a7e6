# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""Seeded samplers for the Poisson-family fields and their representations.

Every sampler takes an :class:`RngStream` and follows numpy's ``size``
convention: ``size=None`` returns a scalar draw, an integer returns an array.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from poisson_fields import config
from poisson_fields.exceptions import InvalidParams, ResourceLimit
from poisson_fields.model import FracOrders, RateVector, SkellamRates, Window, index_rates

log = logging.getLogger(__name__)


class RngStream(object):
    """Counter-based random stream identified by ``(seed, stream_id)``.

    Streams with different ids are independent; the same pair always replays
    the same sequence.

    :param seed: 64-bit seed
    :param stream_id: integer or tuple of integers naming the stream
    """

    def __init__(self, seed=None, stream_id=0):
        self.seed = config.seed if seed is None else int(seed)
        if isinstance(stream_id, tuple):
            self.stream_id = tuple(int(i) for i in stream_id)
        else:
            self.stream_id = (int(stream_id),)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def spawn(self, i):
        """Child stream, independent of this one and of its other children."""
        return RngStream(self.seed, self.stream_id + (int(i),))

    def __repr__(self):
        return "RngStream(seed={}, stream_id={})".format(self.seed, self.stream_id)


class PointPattern(object):
    """Realized points of a field inside a window, each carrying a batch mark ``j``.

    :param window: the Window
    :param points: array of shape ``(m, d)``
    :param marks: integer array of shape ``(m,)``
    """

    def __init__(self, window, points, marks):
        points = np.asarray(points, dtype=float).reshape(-1, window.dimension)
        marks = np.asarray(marks, dtype=np.int64).reshape(-1)
        if len(points) != len(marks):
            raise InvalidParams("got {} points but {} marks".format(len(points), len(marks)))
        for low_high, column in zip(window.bounds, points.T):
            if np.any(column < low_high[0]) or np.any(column > low_high[1]):
                raise InvalidParams("point outside {}".format(window))
        self.window = window
        self.points = points
        self.marks = marks

    def __len__(self):
        return len(self.marks)

    def counts(self, k):
        """Number of points with each mark ``1..k``."""
        return np.bincount(self.marks, minlength=k + 1)[1 : k + 1]

    @property
    def total(self):
        return int(self.marks.sum())


class SubordinatorPath(object):
    """Values of an inverse stable clock on a time grid.

    ``values`` has the grid's length for one path, or shape ``(paths, len(grid))``.
    """

    def __init__(self, grid, values, alpha):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.alpha = alpha
        if np.any(np.diff(self.values, axis=-1) < 0) or np.any(self.values < 0):
            raise InvalidParams("inverse subordinator path must be non-negative and non-decreasing")


class LatticeConfig(object):
    """Bernoulli-type lattice on cells of side ``1/n``.

    Each cell independently takes value ``values[c]`` with probability
    ``probs[..., c]`` and 0 otherwise. ``probs`` is either one row shared by all
    cells or an array of shape ``(rows, cols, len(values))``.
    """

    def __init__(self, n, values, probs):
        if int(n) != n or n < 1:
            raise InvalidParams("lattice scale must be a positive integer, got {}".format(n))
        self.n = int(n)
        self.values = np.asarray(values, dtype=np.int64)
        self.probs = np.asarray(probs, dtype=float)
        if self.probs.shape[-1] != len(self.values):
            raise InvalidParams("need one probability per cell value")
        if np.any(self.probs <= 0) or np.any(self.probs >= 1):
            raise InvalidParams("cell probabilities must lie in (0, 1)")
        if np.any(self.probs.sum(axis=-1) >= 1):
            raise InvalidParams("cell probabilities must sum below 1")

    @property
    def uniform(self):
        return self.probs.ndim == 1

    @classmethod
    def gprf(cls, n, rates):
        """Cells take value ``j`` with probability ``lambda_j / n**2``."""
        rates = RateVector(rates)
        if n * n <= rates.total:
            raise InvalidParams("need n**2 > {} for valid cell probabilities, got n={}".format(rates.total, n))
        return cls(n, np.arange(1, rates.k + 1), np.asarray(rates) / float(n * n))

    @classmethod
    def skellam(cls, n, rates):
        """Cells take value ``i * j`` with probability ``lambda^(i)_j / n**2`` for ``i`` in ``{1, -1}``."""
        if not isinstance(rates, SkellamRates):
            raise InvalidParams("Skellam lattice needs SkellamRates")
        if n * n <= rates.total:
            raise InvalidParams("need n**2 > {} for valid cell probabilities, got n={}".format(rates.total, n))
        j = np.arange(1, rates.k + 1)
        values = np.concatenate([j, -j])
        probs = np.concatenate([np.asarray(rates.plus), np.asarray(rates.minus)]) / float(n * n)
        return cls(n, values, probs)


def _measure(window):
    if isinstance(window, Window):
        return window.measure
    if window < 0:
        raise InvalidParams("area must be non-negative, got {}".format(window))
    return float(window)


def _scalar(draws, size):
    return draws[0] if size is None else draws


def _batch_sum(sample_index, values, size):
    return np.bincount(sample_index, weights=values, minlength=size)


# -- Poisson and generalized Poisson fields ---------------------------------


def sample_prf(rate, window, rng, with_points=False, size=None):
    """Count of a Poisson field with rate ``rate`` in ``window``, or its PointPattern."""
    if not rate > 0:
        raise InvalidParams("rate must be positive, got {}".format(rate))
    gen = rng.generator
    if with_points:
        if not isinstance(window, Window):
            raise InvalidParams("point patterns need a Window")
        if size is not None:
            raise InvalidParams("point patterns are drawn one at a time")
        count = gen.poisson(rate * window.measure)
        return PointPattern(window, _uniform_points(window, count, gen), np.ones(count))
    counts = gen.poisson(rate * _measure(window), size=1 if size is None else size)
    return _scalar(counts, size)


def _uniform_points(window, count, gen):
    low = np.array([b[0] for b in window.bounds])
    high = np.array([b[1] for b in window.bounds])
    return low + (high - low) * gen.random((count, window.dimension))


def sample_gprf_components(rates, window, rng, size=None):
    """Independent batch counts ``N_j ~ Poisson(lambda_j |A|)``, shape ``(k,)`` or ``(size, k)``."""
    rates = RateVector(rates)
    shape = (1 if size is None else size, rates.k)
    draws = rng.generator.poisson(np.asarray(rates) * _measure(window), size=shape)
    return _scalar(draws, size)


def sample_gprf(rates, window, rng, method="superposition", size=None):
    """Count of the generalized field in ``window``.

    ``superposition`` sums ``j N_j`` over independent Poisson batch counts;
    ``compound`` draws ``N ~ Poisson(Lambda |A|)`` batches with sizes ``j``
    chosen with probability ``lambda_j / Lambda``.
    """
    rates = RateVector(rates)
    area = _measure(window)
    n_samples = 1 if size is None else size
    gen = rng.generator
    if method == "superposition":
        components = gen.poisson(np.asarray(rates) * area, size=(n_samples, rates.k))
        totals = components @ np.arange(1, rates.k + 1)
    elif method == "compound":
        batches = gen.poisson(rates.total * area, size=n_samples)
        sizes = gen.choice(rates.k, size=int(batches.sum()), p=np.asarray(rates) / rates.total) + 1
        owner = np.repeat(np.arange(n_samples), batches)
        totals = _batch_sum(owner, sizes, n_samples).astype(np.int64)
    else:
        raise InvalidParams("unknown method {!r}, use superposition or compound".format(method))
    return _scalar(totals, size)


def sample_marked_pattern(rates, window, rng):
    """PointPattern of the generalized field: one point per batch, marked with its size."""
    rates = RateVector(rates)
    if not isinstance(window, Window):
        raise InvalidParams("point patterns need a Window")
    gen = rng.generator
    counts = gen.poisson(np.asarray(rates) * window.measure)
    marks = np.repeat(np.arange(1, rates.k + 1), counts)
    return PointPattern(window, _uniform_points(window, len(marks), gen), marks)


def pattern_count(pattern, corner):
    """Anchored count ``M([0, corner])`` of a realized pattern."""
    inside = np.all(pattern.points <= np.asarray(corner, dtype=float), axis=1)
    return int(pattern.marks[inside].sum())


def pattern_increment(pattern, s, t, s_end, t_end):
    """Count in ``(s, s'] x (t, t']`` of a two-dimensional pattern."""
    a, b = pattern.points[:, 0], pattern.points[:, 1]
    inside = (a > s) & (a <= s_end) & (b > t) & (b <= t_end)
    return int(pattern.marks[inside].sum())


def pattern_integral(pattern, s, t):
    """``int_0^t int_0^s M(x, y) dx dy`` for a realized two-dimensional pattern."""
    a, b = pattern.points[:, 0], pattern.points[:, 1]
    weight = np.clip(s - a, 0.0, None) * np.clip(t - b, 0.0, None)
    return math.fsum(pattern.marks * weight)


# -- thinning ----------------------------------------------------------------


def thin_prf(count_or_pattern, p, rng):
    """Keep each point independently with probability ``p``.

    :returns: ``(kept, removed)`` counts
    """
    if not 0 < p < 1:
        raise InvalidParams("retention probability must lie in (0, 1), got {}".format(p))
    gen = rng.generator
    if isinstance(count_or_pattern, PointPattern):
        keep = gen.random(len(count_or_pattern)) < p
        return int(keep.sum()), int((~keep).sum())
    count = np.asarray(count_or_pattern)
    kept = gen.binomial(count, p)
    return kept, count - kept


def thin_gprf(component_counts, p, rng):
    """Keep each batch of size ``j`` with probability ``p_j``.

    :param component_counts: batch counts ``N_j``, shape ``(k,)`` or ``(size, k)``
    :returns: ``(kept, removed)`` point counts
    """
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or np.any(p >= 1):
        raise InvalidParams("retention probabilities must lie in (0, 1)")
    counts = np.asarray(component_counts)
    if counts.shape[-1] != len(p):
        raise InvalidParams("need one retention probability per batch size")
    sizes = np.arange(1, len(p) + 1)
    kept_batches = rng.generator.binomial(counts, p)
    return kept_batches @ sizes, (counts - kept_batches) @ sizes


def sample_multinomial_thinning(count, probs, rng):
    """Split ``count`` points into components by iid categorical marks."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, rel_tol=1e-12):
        raise InvalidParams("component probabilities must be non-negative and sum to 1")
    return rng.generator.multinomial(count, probs)


# -- subordinators -----------------------------------------------------------


def _check_stable_order(alpha):
    if not 0 < alpha < 1:
        raise InvalidParams("stable order must lie in (0, 1), got {}".format(alpha))


def _positive_stable(alpha, gen, n):
    """Standard positive stable variates with Laplace transform ``exp(-u**alpha)``."""
    u = gen.uniform(0.0, math.pi, size=n)
    e = gen.standard_exponential(size=n)
    return (
        np.sin(alpha * u)
        / np.sin(u) ** (1.0 / alpha)
        * (np.sin((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha)
    )


def sample_stable_subordinator(alpha, t, rng, size=None):
    """``H(t) = t**(1/alpha) S`` with ``S`` standard positive stable."""
    _check_stable_order(alpha)
    if not t > 0:
        raise InvalidParams("t must be positive, got {}".format(t))
    draws = t ** (1.0 / alpha) * _positive_stable(alpha, rng.generator, 1 if size is None else size)
    return _scalar(draws, size)


def sample_inverse_stable(alpha, t, rng, size=None):
    """``L(t) = (t / S)**alpha``; the clock is the identity when ``alpha == 1``."""
    if not 0 < alpha <= 1:
        raise InvalidParams("order must lie in (0, 1], got {}".format(alpha))
    if t < 0:
        raise InvalidParams("t must be non-negative, got {}".format(t))
    n = 1 if size is None else size
    if alpha == 1:
        draws = np.full(n, float(t))
    else:
        draws = (t / _positive_stable(alpha, rng.generator, n)) ** alpha
    return _scalar(draws, size)


def _size_biased_stable(alpha, gen, n):
    """Variates with density proportional to ``x**(-alpha) g(x)``, ``g`` the stable density."""
    exponent = (1.0 - alpha) / alpha
    peak = alpha ** -alpha * (1.0 - alpha) ** -(1.0 - alpha)
    angles = np.empty(n)
    filled = 0
    while filled < n:
        u = gen.uniform(0.0, math.pi, size=2 * (n - filled) + 8)
        weight = np.sin(u) / (np.sin(alpha * u) ** alpha * np.sin((1.0 - alpha) * u) ** (1.0 - alpha))
        accepted = u[gen.random(len(u)) * peak < weight][: n - filled]
        angles[filled : filled + len(accepted)] = accepted
        filled += len(accepted)
    kernel = (
        np.sin(alpha * angles) ** (alpha / (1.0 - alpha))
        * np.sin((1.0 - alpha) * angles)
        / np.sin(angles) ** (1.0 / (1.0 - alpha))
    )
    shape = gen.gamma(2.0 - alpha, size=n)
    return (kernel / shape) ** exponent


def _first_passage(alpha, level, gen):
    """Passage time, undershoot and overshoot jump of a fresh subordinator over ``level``."""
    n = len(level)
    undershoot = level * gen.beta(alpha, 1.0 - alpha, size=n)
    passage = (undershoot / _size_biased_stable(alpha, gen, n)) ** alpha
    jump = (level - undershoot) * gen.random(n) ** (-1.0 / alpha)
    return passage, undershoot + jump


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or not len(grid):
        raise InvalidParams("grid must be a non-empty one-dimensional sequence")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise InvalidParams("grid must be non-negative and strictly increasing")
    return grid


def sample_inverse_stable_path(alpha, grid, rng, method="exact", step=None, size=None):
    """Joint values of one inverse stable clock at the grid times.

    ``exact`` walks the first passages of the subordinator over each grid time
    using the strong Markov property; ``grid`` simulates the subordinator on a
    regular grid of its own argument with spacing ``step`` and inverts it.
    """
    if not 0 < alpha <= 1:
        raise InvalidParams("order must lie in (0, 1], got {}".format(alpha))
    grid = _check_grid(grid)
    n = 1 if size is None else size
    if alpha == 1:
        values = np.tile(grid, (n, 1))
    elif method == "exact":
        values = _exact_path(alpha, grid, rng.generator, n)
    elif method == "grid":
        values = _grid_path(alpha, grid, rng.generator, n, step)
    else:
        raise InvalidParams("unknown method {!r}, use exact or grid".format(method))
    return SubordinatorPath(grid, values[0] if size is None else values, alpha)


def _exact_path(alpha, grid, gen, n):
    clock = np.zeros(n)
    level = np.zeros(n)
    values = np.empty((n, len(grid)))
    for i, t in enumerate(grid):
        behind = level < t
        if np.any(behind):
            passage, climb = _first_passage(alpha, t - level[behind], gen)
            clock[behind] += passage
            level[behind] += climb
        values[:, i] = clock
    return values


def _grid_path(alpha, grid, gen, n, step):
    horizon = grid[-1]
    step = horizon ** alpha / 2000.0 if step is None else step
    if not step > 0:
        raise InvalidParams("step must be positive, got {}".format(step))
    values = np.empty((n, len(grid)))
    chunk = 4096
    for row in range(n):
        heights = np.empty(0)
        top = 0.0
        while top < horizon:
            increments = step ** (1.0 / alpha) * _positive_stable(alpha, gen, chunk)
            heights = np.concatenate([heights, top + np.cumsum(increments)])
            top = heights[-1]
        values[row] = (np.searchsorted(heights, grid, side="left") + 1) * step
        values[row, grid == 0] = 0.0
    return values


# -- time-changed and two-sided fields ---------------------------------------


def _clock_pair(frac, s, t, rng, n):
    frac = FracOrders(*frac)
    return (
        sample_inverse_stable(frac.alpha, s, rng, size=n),
        sample_inverse_stable(frac.beta, t, rng, size=n),
    )


def sample_fgprf(rates, frac, s, t, rng, size=None):
    """Generalized field count on ``[0, L(s)] x [0, L(t)]`` with independent clocks."""
    rates = RateVector(rates)
    n = 1 if size is None else size
    clock_s, clock_t = _clock_pair(frac, s, t, rng, n)
    area = (clock_s * clock_t)[:, None]
    counts = rng.generator.poisson(area * np.asarray(rates)[None, :])
    return _scalar(counts @ np.arange(1, rates.k + 1), size)


def _indexed_sum(mapped, areas, gen):
    total = np.zeros(len(areas))
    for index, vector in sorted(mapped.items()):
        counts = gen.poisson(areas[:, None] * np.asarray(vector)[None, :])
        total = total + index * (counts @ np.arange(1, vector.k + 1))
    if all(int(index) == index for index in mapped):
        total = total.astype(np.int64)
    return total


def sample_gspp(rates, window, rng, size=None):
    """``sum_i i M_i(A)`` over independent generalized fields."""
    mapped = index_rates(rates)
    areas = np.full(1 if size is None else size, _measure(window))
    return _scalar(_indexed_sum(mapped, areas, rng.generator), size)


def sample_compound_gspp(rates, window, rng, size=None):
    """Compound representation: ``N ~ Poisson(sum of all rates |A|)`` jumps ``i * j``."""
    mapped = index_rates(rates)
    n = 1 if size is None else size
    jump_values, jump_rates = [], []
    for index, vector in sorted(mapped.items()):
        for j, rate in enumerate(vector, start=1):
            jump_values.append(index * j)
            jump_rates.append(rate)
    jump_rates = np.asarray(jump_rates)
    total = jump_rates.sum()
    gen = rng.generator
    batches = gen.poisson(total * _measure(window), size=n)
    picks = gen.choice(len(jump_values), size=int(batches.sum()), p=jump_rates / total)
    owner = np.repeat(np.arange(n), batches)
    sums = _batch_sum(owner, np.asarray(jump_values, dtype=float)[picks], n)
    if all(int(value) == value for value in jump_values):
        sums = np.rint(sums).astype(np.int64)
    return _scalar(sums, size)


def sample_fgspp(rates, frac, s, t, rng, size=None):
    """Two-sided field on ``[0, L(s)] x [0, L(t)]`` with independent clocks."""
    mapped = index_rates(rates)
    n = 1 if size is None else size
    clock_s, clock_t = _clock_pair(frac, s, t, rng, n)
    return _scalar(_indexed_sum(mapped, clock_s * clock_t, rng.generator), size)


def sample_gprf_integral(rates, s, t, rng, size=None):
    """``s t sum_{r <= N} X_r U_r V_r`` with ``N ~ Poisson(Lambda s t)`` and uniform ``U, V``."""
    rates = RateVector(rates)
    if s < 0 or t < 0:
        raise InvalidParams("s and t must be non-negative, got s={} t={}".format(s, t))
    n = 1 if size is None else size
    area = s * t
    if area == 0:
        return _scalar(np.zeros(n), size)
    gen = rng.generator
    batches = gen.poisson(rates.total * area, size=n)
    m = int(batches.sum())
    jumps = gen.choice(rates.k, size=m, p=np.asarray(rates) / rates.total) + 1
    weights = jumps * gen.random(m) * gen.random(m)
    owner = np.repeat(np.arange(n), batches)
    return _scalar(area * _batch_sum(owner, weights, n), size)


# -- lattice approximations --------------------------------------------------


def sample_lattice_field(lattice, s, t, rng, size=None):
    """Sum over the ``floor(n s) * floor(n t)`` cells of independent cell values.

    A shared probability row is sampled through one multinomial draw per
    sample; explicit per-cell arrays are sampled cell by cell.
    """
    rows, cols = int(math.floor(lattice.n * s)), int(math.floor(lattice.n * t))
    cells = rows * cols
    if cells > config.lattice_cell_cap:
        raise ResourceLimit(
            "lattice of {} cells exceeds the cap of {}".format(cells, config.lattice_cell_cap)
        )
    n = 1 if size is None else size
    gen = rng.generator
    if lattice.uniform:
        probs = np.append(lattice.probs, 1.0 - lattice.probs.sum())
        counts = gen.multinomial(cells, probs, size=n)[:, :-1]
        return _scalar(counts @ lattice.values, size)
    if lattice.probs.shape[0] < rows or lattice.probs.shape[1] < cols:
        raise InvalidParams(
            "explicit lattice holds {} cells, need {}x{}".format(lattice.probs.shape[:2], rows, cols)
        )
    cumulative = np.cumsum(lattice.probs[:rows, :cols].reshape(cells, -1), axis=1)
    values = np.append(lattice.values, 0)
    totals = np.empty(n, dtype=np.int64)
    for i in range(n):
        u = gen.random(cells)
        category = (u[:, None] >= cumulative).sum(axis=1)
        totals[i] = values[category].sum()
    return _scalar(totals, size)


# -- batch driver ------------------------------------------------------------


def run_batches(sampler, samples, seed=None, batch_size=None, workers=None):
    """Draw ``samples`` values through ``sampler(rng, size)`` over independent streams.

    Batch ``i`` always uses stream ``i`` and results are concatenated in batch
    order, so the output does not depend on ``workers``.
    """
    if samples < 1:
        raise InvalidParams("samples must be at least 1, got {}".format(samples))
    seed = config.seed if seed is None else seed
    batch_size = config.batch_size if batch_size is None else batch_size
    workers = config.workers if workers is None else workers
    sizes = [batch_size] * (samples // batch_size)
    if samples % batch_size:
        sizes.append(samples % batch_size)

    def run(job):
        stream_id, size = job
        return np.asarray(sampler(RngStream(seed, stream_id), size))

    log.info("drawing {} samples in {} batches on {} workers".format(samples, len(sizes), workers))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        parts = list(executor.map(run, enumerate(sizes)))
    return np.concatenate(parts)
