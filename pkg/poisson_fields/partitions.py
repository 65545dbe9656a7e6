# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""Index sets of the batch-size sums.

``Theta(k, n)`` holds the non-negative vectors ``(n_1, ..., n_k)`` with
``sum(j * n_j) == n``; its signed analogue allows negative entries and is
infinite, so it is enumerated inside a box ``|n_j| <= W``.
"""

import logging
from collections import namedtuple

from scipy import stats

from poisson_fields import config
from poisson_fields.exceptions import InvalidParams, ResourceLimit

log = logging.getLogger(__name__)


class Composition(namedtuple("Composition", ["parts"])):
    """One element ``(n_1, ..., n_k)`` of Theta(k, n)."""

    __slots__ = ()

    @property
    def weight(self):
        return sum(j * n_j for j, n_j in enumerate(self.parts, start=1))

    @property
    def size(self):
        """Total number of batches, ``sum(n_j)``."""
        return sum(self.parts)


class SignedComposition(namedtuple("SignedComposition", ["parts", "weight_bound"])):
    """One element of the signed index set inside the box ``|n_j| <= weight_bound``."""

    __slots__ = ()

    @property
    def weight(self):
        return sum(j * n_j for j, n_j in enumerate(self.parts, start=1))


def _check_kn(k, n):
    if int(k) != k or k < 1:
        raise InvalidParams("k must be a positive integer, got {}".format(k))
    if int(n) != n:
        raise InvalidParams("n must be an integer, got {}".format(n))


def restricted_partition_count(k, n):
    """Number of partitions of ``n`` into parts no larger than ``k``.

    Dynamic programming over part sizes, exact integer arithmetic.
    """
    _check_kn(k, n)
    if n < 0:
        return 0
    ways = [1] + [0] * n
    for part in range(1, k + 1):
        for total in range(part, n + 1):
            ways[total] += ways[total - part]
    return ways[n]


def _descend(j, remaining, prefix):
    # prefix holds (n_k, ..., n_{j+1}); n_j runs ascending
    if j == 1:
        yield prefix + (remaining,)
        return
    for n_j in range(remaining // j + 1):
        for parts in _descend(j - 1, remaining - j * n_j, prefix + (n_j,)):
            yield parts


def enumerate_theta(k, n, cap=None):
    """Yield every Composition of Theta(k, n) exactly once.

    Order is lexicographic on ``(n_k, ..., n_1)``.

    :param k: largest batch size
    :param n: total weight
    :param cap: cardinality limit, defaults to ``config.cardinality_cap``
    :raises ResourceLimit: when the set is larger than the cap
    """
    _check_kn(k, n)
    if n < 0:
        raise InvalidParams("n must be non-negative, got {}".format(n))
    cap = config.cardinality_cap if cap is None else cap
    count = restricted_partition_count(k, n)
    if count > cap:
        raise ResourceLimit(
            "Theta({}, {}) has {} elements, over the cap of {}".format(k, n, count, cap)
        )
    for reversed_parts in _descend(k, n, ()):
        yield Composition(tuple(reversed(reversed_parts)))


def enumerate_theta_signed(k, n, W, cap=None):
    """Yield every SignedComposition with ``sum(j * n_j) == n`` and ``max|n_j| <= W``.

    Order is lexicographic on ``(n_k, ..., n_1)``.

    :raises InvalidParams: when ``W < |n|``
    :raises ResourceLimit: when the box holds more candidates than the cap
    """
    _check_kn(k, n)
    if int(W) != W or W < 1:
        raise InvalidParams("W must be a positive integer, got {}".format(W))
    if W < abs(n):
        raise InvalidParams("W={} must be at least |n|={}".format(W, abs(n)))
    cap = config.cardinality_cap if cap is None else cap
    candidates = (2 * W + 1) ** (k - 1)
    if candidates > cap:
        raise ResourceLimit(
            "signed box of width {} in {} coordinates has {} candidates, over the cap of {}".format(
                W, k, candidates, cap
            )
        )

    def outer(j, remaining, prefix):
        if j == 1:
            if abs(remaining) <= W:
                yield prefix + (remaining,)
            return
        # the parts below j can reach at most W * (1 + ... + j-1) in absolute value
        reach = W * j * (j - 1) // 2
        for n_j in range(-W, W + 1):
            rest = remaining - j * n_j
            if abs(rest) <= reach:
                for parts in outer(j - 1, rest, prefix + (n_j,)):
                    yield parts

    for reversed_parts in outer(k, n, ()):
        yield SignedComposition(tuple(reversed(reversed_parts)), W)


def signed_truncation_bound(rates, area, W):
    """Upper bound on the Skellam pmf mass dropped by the box ``|n_j| <= W``.

    Each ``n_j`` is a difference of independent Poisson counts with means
    ``plus[j] * area`` and ``minus[j] * area``; ``|n_j| > W`` needs one of them
    above ``W``, so a union bound over the Poisson upper tails applies.

    :param rates: object with ``plus`` and ``minus`` rate sequences
    :param area: window measure
    :param W: coordinate cap
    """
    if not area > 0:
        raise InvalidParams("area must be positive, got {}".format(area))
    if W < 1:
        raise InvalidParams("W must be at least 1, got {}".format(W))
    bound = 0.0
    for plus, minus in zip(rates.plus, rates.minus):
        bound += stats.poisson.sf(W, plus * area) + stats.poisson.sf(W, minus * area)
    return float(min(bound, 1.0))


def adaptive_signed_cap(rates, area, tol, n=0):
    """Smallest ``W >= max(|n|, 1)`` whose truncation bound is below ``tol / 10``."""
    W = max(abs(n), 1)
    while signed_truncation_bound(rates, area, W) >= tol / 10:
        W += 1
    log.debug("signed cap W={} for area={} tol={}".format(W, area, tol))
    return W
