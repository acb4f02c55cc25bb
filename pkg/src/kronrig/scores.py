"""Coordinate scores over product index sets, threshold sets, and fill counts.

An index of the product space is a tuple x with x_i in [1, d_i].  Its
score is the weighted count of coordinates sitting at their maximum:

    s(x) = sum_i w(d_i) * [x_i == d_i]

High-score column tuples and low-score row tuples get peeled off into
the low-rank part of a split; everything here computes the relevant
cardinalities exactly (Fractions end to end), without enumerating the
product space unless a mask over concrete indices is requested.
"""

import itertools
import math
from collections import Counter, defaultdict
from fractions import Fraction

import numpy as np

from .matrix import all_digits

# Budget for weight-class subset-pattern enumeration; past this the
# exact fill computation refuses rather than grinding.
COMBO_BUDGET = 200_000


class CountBudgetError(ValueError):
    """Exact counting would exceed the enumeration budget."""


class WeightScheme:
    """Positive rational weight attached to each factor order."""

    def __init__(self, mapping=None):
        self._map = {}
        for d, v in (mapping or {}).items():
            w = Fraction(v)
            if w <= 0:
                raise ValueError(f"weight for order {d} must be positive, got {w}")
            self._map[int(d)] = w

    @classmethod
    def uniform(cls):
        return cls()

    def weight(self, d):
        return self._map.get(int(d), Fraction(1))

    def items(self):
        return dict(self._map)

    def __eq__(self, other):
        return isinstance(other, WeightScheme) and self._map == other._map

    def __repr__(self):
        if not self._map:
            return "WeightScheme(uniform)"
        return f"WeightScheme({self._map})"


def score_of_tuple(x, dims, weights=None):
    weights = weights or WeightScheme.uniform()
    s = Fraction(0)
    for xi, di in zip(x, dims):
        if not 1 <= xi <= di:
            raise ValueError(f"digit {xi} out of [1, {di}]")
        if xi == di:
            s += weights.weight(di)
    return s


def mean_score(dims, weights=None):
    """Expected score of a uniform random tuple."""
    weights = weights or WeightScheme.uniform()
    return sum((weights.weight(d) / d for d in dims), Fraction(0))


def variance_bound(dims, weights=None):
    weights = weights or WeightScheme.uniform()
    return sum((weights.weight(d) ** 2 * (d - 1) / d**2 for d in dims), Fraction(0))


def score_distribution(dims, weights=None):
    """Exact map score -> number of tuples attaining it."""
    weights = weights or WeightScheme.uniform()
    dist = {Fraction(0): 1}
    for d in dims:
        w = weights.weight(d)
        new = defaultdict(int)
        for s, c in dist.items():
            new[s] += c * (d - 1)
            new[s + w] += c
        dist = dict(new)
    return dist


def threshold_counts(dims, weights, offset):
    """(|high columns|, |low rows|) for the symmetric offset around the mean.

    High set: score >= mean + offset (inclusive).  Low set: score <=
    mean - offset (inclusive).  Their complements are strict.
    """
    offset = Fraction(offset)
    if offset < 0:
        raise ValueError("offset must be nonnegative")
    m = mean_score(dims, weights)
    dist = score_distribution(dims, weights)
    hi = sum(c for s, c in dist.items() if s >= m + offset)
    lo = sum(c for s, c in dist.items() if s <= m - offset)
    return hi, lo


def _weight_classes(dims, weights):
    """Coordinates grouped by (weight, order); sorted for determinism."""
    cnt = Counter((weights.weight(d), int(d)) for d in dims)
    return [(w, d, j) for (w, d), j in sorted(cnt.items())]


def _count_weighted_subsets(classes, avail, bound, dim_mult):
    """Subsets U of the available coordinates with total weight < bound.

    Picking u from class v contributes C(avail_v, u) choices, times
    (d_v - 1)**u when each chosen coordinate additionally ranges over
    the d_v - 1 non-top values.
    """
    acc = {Fraction(0): 1}
    for (w, d, _), a in zip(classes, avail):
        if a == 0:
            continue
        mult = [math.comb(a, u) * ((d - 1) ** u if dim_mult else 1)
                for u in range(a + 1)]
        new = defaultdict(int)
        for s, c in acc.items():
            for u in range(a + 1):
                ns = s + u * w
                if ns < bound:
                    new[ns] += c * mult[u]
        acc = dict(new)
        if not acc:
            break
    return sum(c for s, c in acc.items() if s < bound)


def neighborhood_counts(dims, weights, offset):
    """Exact residual fill (max_col_fill, max_row_fill) of a split.

    After removing rows in the low set and columns in the high set from
    the compatibility pattern (y_i in {x_i, d_i} for all i), this is the
    largest number of surviving entries in any column resp. row.  The
    maxima range over surviving columns/rows only; if none survive the
    count is 0.
    """
    offset = Fraction(offset)
    if offset < 0:
        raise ValueError("offset must be nonnegative")
    classes = _weight_classes(dims, weights)
    combos = 1
    for _, _, j in classes:
        combos *= j + 1
    if combos > COMBO_BUDGET:
        raise CountBudgetError(
            f"{combos} top-set patterns across {len(classes)} weight classes "
            f"exceeds the budget of {COMBO_BUDGET}")
    m = mean_score(dims, weights)
    lo = m - offset          # rows survive iff score > lo
    hi = m + offset          # columns survive iff score < hi
    max_row = 0
    max_col = 0
    for t_vec in itertools.product(*[range(j + 1) for _, _, j in classes]):
        s_top = sum((t * w for t, (w, _, _) in zip(t_vec, classes)), Fraction(0))
        if s_top > lo:
            # surviving row: entries sit at supersets of its top set
            avail = [j - t for t, (_, _, j) in zip(t_vec, classes)]
            cnt = _count_weighted_subsets(classes, avail, hi - s_top, dim_mult=False)
            if cnt > max_row:
                max_row = cnt
        if s_top < hi:
            # surviving column: entries drop subsets of its top set
            cnt = _count_weighted_subsets(classes, list(t_vec), s_top - lo,
                                          dim_mult=True)
            if cnt > max_col:
                max_col = cnt
    return max_col, max_row


def threshold_masks(dims, weights, offset):
    """Boolean masks (high_cols, low_rows) over all flat indices, exact.

    Materializes the digit table, so only valid for products small
    enough to index explicitly.
    """
    offset = Fraction(offset)
    weights = weights or WeightScheme.uniform()
    w = [weights.weight(d) for d in dims]
    scale = 1
    for wi in w:
        scale = scale * wi.denominator // math.gcd(scale, wi.denominator)
    W = np.array([int(wi * scale) for wi in w], dtype=np.int64)
    digits = all_digits(dims)
    top = digits == np.asarray(dims, dtype=np.int64)
    s_int = top @ W
    m = mean_score(dims, weights)
    hi = (m + offset) * scale
    lo = (m - offset) * scale
    max_s = int(W.sum())
    if max_s * max(hi.denominator, lo.denominator) < 2**62:
        high = s_int * hi.denominator >= hi.numerator
        low = s_int * lo.denominator <= lo.numerator
    else:
        s_obj = s_int.astype(object)
        high = np.array([v * hi.denominator >= hi.numerator for v in s_obj])
        low = np.array([v * lo.denominator <= lo.numerator for v in s_obj])
    return high, low


def delta_grid(eps, d_max, points=64):
    """Geometric grid of margin rates in [eps/(100*d_max), 1/d_max)."""
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    lo = eps / (100.0 * d_max)
    hi = 1.0 / d_max
    ratio = hi / lo
    return [lo * ratio ** (i / points) for i in range(points)]


def bernstein_tail(d, k, delta):
    """One-sided tail bound exp(-delta^2 * d * k / 3), valid for delta < 1/d."""
    if not 0 < delta < 1 / d:
        raise ValueError(f"delta must lie in (0, 1/{d})")
    return math.exp(-(delta * delta) * d * k / 3.0)


def binom_sum_bound(n, k):
    """Upper bound (e*n/k)**k on the number of subsets of size at most k."""
    if k < 0 or k > n:
        raise ValueError("need 0 <= k <= n")
    if k == 0:
        return 1.0
    return (math.e * n / k) ** k
