"""Brute-force reference computations, deliberately independent of the fast paths."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def longest_zero_runs_all_words(n: int) -> np.ndarray:
    """Longest zero block of every binary word of length n (word w has bit c = (w >> c) & 1)."""
    if n == 0:
        return np.zeros(1, dtype=np.int64)
    words = np.arange(1 << n, dtype=np.int64)
    run = np.zeros_like(words)
    best = np.zeros_like(words)
    for c in range(n):
        zero = ((words >> c) & 1) == 0
        run = np.where(zero, run + 1, 0)
        np.maximum(best, run, out=best)
    return best


def brute_force_avoidance_counts(n: int, r_max: int) -> dict[int, int]:
    """{r: number of length-n words without r consecutive zeros} for r = 1..r_max."""
    v = longest_zero_runs_all_words(n)
    return {r: int(np.count_nonzero(v < r)) for r in range(1, r_max + 1)}


def cylinder_length(digits) -> Fraction:
    """Lebesgue length 1 / (q_n (q_n + q_{n-1})) of the continued-fraction cylinder."""
    q_prev, q = 0, 1
    for a in digits:
        q_prev, q = q, a * q + q_prev
    return Fraction(1, q * (q + q_prev))


def etilde_lebesgue_by_cylinders(n: int, k: int) -> Fraction:
    """lambda{x : a_1(x), ..., a_n(x) all < k}, summing cylinders over (k-1)^n digit words."""
    return sum((cylinder_length(w) for w in itertools.product(range(1, k), repeat=n)), Fraction(0))


def cylinder_interval(digits) -> tuple[Fraction, Fraction]:
    """Endpoints of the cylinder {a_1..a_n = digits} as (lo, hi)."""
    p_prev, p, q_prev, q = 1, 0, 0, 1
    for a in digits:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
    x, y = Fraction(p, q), Fraction(p + p_prev, q + q_prev)
    return (x, y) if x < y else (y, x)
