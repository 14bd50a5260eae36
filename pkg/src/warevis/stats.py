"""Small statistics helpers used by evaluation and comparisons."""

from __future__ import annotations

import math
from math import comb


def mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


def stdev(xs) -> float:
    """Sample standard deviation (n-1 denominator)."""
    xs = list(xs)
    n = len(xs)
    if n < 2:
        return 0.0
    m = mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (n - 1))


def binomial_cdf(k: int, n: int, p: float = 0.5) -> float:
    return sum(comb(n, i) * p ** i * (1 - p) ** (n - i) for i in range(0, k + 1))


def sign_test(xs, ys) -> tuple[int, int, int, float]:
    """Exact two-sided paired sign test.

    Returns (wins_x, wins_y, ties, p) where wins_x counts pairs with
    x < y (x "better" for a cost metric).  Ties are dropped, as usual.
    """
    wins_x = sum(1 for x, y in zip(xs, ys) if x < y)
    wins_y = sum(1 for x, y in zip(xs, ys) if y < x)
    n = wins_x + wins_y
    ties = len(list(xs)) - n if hasattr(xs, "__len__") else 0
    if n == 0:
        return wins_x, wins_y, ties, 1.0
    k = min(wins_x, wins_y)
    p = min(1.0, 2.0 * binomial_cdf(k, n))
    return wins_x, wins_y, ties, p


def least_squares_slope(ys) -> float:
    """Slope of the least-squares line through (0, y0), (1, y1), ..."""
    ys = list(ys)
    n = len(ys)
    if n < 2:
        return 0.0
    mx = (n - 1) / 2.0
    my = mean(ys)
    sxy = sum((i - mx) * (y - my) for i, y in enumerate(ys))
    sxx = sum((i - mx) ** 2 for i in range(n))
    return sxy / sxx
