"""Fair-coin Bernoulli shift with run-length targets B_m = {x[0..r_m-1] = 0}.

T^i x lies in B_m exactly when a block of r_m zeros starts at coordinate i,
so x is in E_{n,m} iff the word x[1..n+r_m-1] contains no factor 0^{r_m}.
Exact measures come from counting binary words that avoid 0^r.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import lfilter

from .errors import CapExceeded, ScheduleError
from .schedules import Kind, TargetSchedule

DEFAULT_CAP = 10**6

__all__ = [
    "RunAvoidanceTable",
    "RunStatistic",
    "run_avoidance_count",
    "exact_nonhit",
    "exact_nonhit_probability",
    "window_discrepancy",
    "avoidance_probabilities",
    "fs_run_probability",
    "halving_approx",
    "enm_exponential_approx",
    "sample_word",
    "longest_zero_run",
]


def _check_cap(n: int, cap: int | None):
    cap = DEFAULT_CAP if cap is None else cap
    if n > cap:
        raise CapExceeded(f"word length {n} exceeds cap {cap}")


def _avoidance_counts(r: int):
    """Yield c_0, c_1, ... where c_n counts words of length n with no 0^r.

    A word of length n >= r that avoids 0^r ends in 1 0^j with j < r, after
    a valid prefix of length n-j-1; summing over j gives
    c_n = c_{n-1} + ... + c_{n-r}, i.e. c_n = 2 c_{n-1} - c_{n-1-r}.
    """
    window = deque(maxlen=r + 1)
    for n in range(r):
        c = 1 << n
        window.append(c)
        yield c
    c = (1 << r) - 1
    window.append(c)
    yield c
    while True:
        c = 2 * window[-1] - window[0]
        window.append(c)
        yield c


def run_avoidance_count(n: int, r: int, cap: int | None = None) -> int:
    """Number of binary words of length ``n`` with no ``r`` consecutive zeros."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    _check_cap(n, cap)
    if n < r:
        return 1 << n
    for i, c in enumerate(_avoidance_counts(r)):
        if i == n:
            return c
    raise AssertionError("unreachable")


@dataclass
class RunAvoidanceTable:
    """Exact counts c_0..c_{n_max} for one run length ``r``."""

    r: int
    counts: list[int]

    @classmethod
    def build(cls, r: int, n_max: int, cap: int | None = None) -> "RunAvoidanceTable":
        if r < 1:
            raise ValueError("r must be >= 1")
        _check_cap(n_max, cap)
        gen = _avoidance_counts(r)
        return cls(r, [next(gen) for _ in range(n_max + 1)])

    @property
    def n_max(self) -> int:
        return len(self.counts) - 1

    def probability(self, n: int) -> Fraction:
        """P(V_n < r): a uniform word of length n has no 0^r."""
        return Fraction(self.counts[n], 1 << n)

    def nonhit(self, n: int) -> Fraction:
        """mu(E_{n,m}) when r_m = r."""
        return self.probability(n + self.r - 1)


def exact_nonhit(n: int, r: int, cap: int | None = None) -> Fraction:
    """mu(E_{n,m}) for a target with r_m = r, as an exact rational."""
    if n < 0:
        raise ValueError("n must be >= 0")
    L = n + r - 1
    return Fraction(run_avoidance_count(L, r, cap), 1 << L)


def exact_nonhit_probability(n: int, s: TargetSchedule, m: int, cap: int | None = None) -> Fraction:
    if s.kind is not Kind.BERNOULLI:
        raise ScheduleError("exact_nonhit_probability needs a Bernoulli schedule")
    return exact_nonhit(n, int(s.param(m)), cap)


def window_discrepancy(n: int, r: int, cap: int | None = None) -> Fraction:
    """mu({V_{n+r-1} < r}) - mu({V_{n+r} < r}).

    Mass of words whose only 0^r block starts at coordinate n+1; this is the
    gap between the exact window n+r-1 and the window n+r used in the
    asymptotic statement.
    """
    L = n + r - 1
    _check_cap(L + 1, cap)
    t = RunAvoidanceTable.build(r, L + 1, cap)
    return t.probability(L) - t.probability(L + 1)


def avoidance_probabilities(L_max: int, r: int) -> np.ndarray:
    """Float P(V_L < r) for L = 0..L_max via the recurrence as an IIR filter.

    p_L = p_{L-1} - 2^{-(r+1)} p_{L-1-r} for L > r; the initial segment is
    injected as a finite input so that lfilter reproduces p exactly up to
    rounding.
    """
    p0 = np.array([1.0] * r + [1.0 - math.ldexp(1.0, -r)])
    a = np.zeros(r + 2)
    a[0], a[1], a[-1] = 1.0, -1.0, math.ldexp(1.0, -(r + 1))
    x = np.zeros(L_max + 1)
    head = min(r + 1, L_max + 1)
    # x_L = p_L - p_{L-1} + 2^{-(r+1)} p_{L-1-r} for L <= r, with p_{<0} = 0
    for L in range(head):
        x[L] = p0[L] - (p0[L - 1] if L >= 1 else 0.0)
    return lfilter([1.0], a, x)


@dataclass(frozen=True)
class RunStatistic:
    n: int
    h: int
    a_n: Fraction

    @classmethod
    def of(cls, n: int, r: int) -> "RunStatistic":
        e = n.bit_length() - 1
        return cls(n, r - e, Fraction(n, 1 << e))


def fs_run_probability(n: int, r: int) -> tuple[float, float]:
    """Asymptotic P(V_n < r) = exp(-a(n) 2^{-h-1}) and its budget log(n)/sqrt(n)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    st = RunStatistic.of(n, r)
    value = math.exp(-float(st.a_n) * math.ldexp(1.0, -st.h - 1))
    return value, math.log(n) / math.sqrt(n)


def halving_approx(n: int, r: int) -> float:
    """exp(-(n/2) 2^{-r})."""
    return math.exp(-n * math.ldexp(1.0, -r - 1))


def enm_exponential_approx(n: int, s: TargetSchedule, m: int) -> float:
    """exp(-(n/2) mu(B_m)); pair with the budget log(n)/sqrt(n)."""
    return math.exp(-0.5 * n * s.measure(m))


def sample_word(length: int, rng: np.random.Generator, cap: int | None = None) -> np.ndarray:
    """``length`` i.i.d. fair bits as uint8."""
    _check_cap(length, cap)
    return rng.integers(0, 2, size=length, dtype=np.uint8)


def longest_zero_run(word) -> int:
    """Length of the longest block of zeros; accepts '0101' strings or 0/1 arrays."""
    if isinstance(word, str):
        return max((len(b) for b in word.split("1")), default=0)
    w = np.asarray(word)
    if w.size == 0:
        return 0
    # pad with ones so every zero block has a start and an end edge
    edges = np.diff(np.concatenate(([1], (w != 0).astype(np.int8), [1])))
    starts = np.flatnonzero(edges == -1)
    ends = np.flatnonzero(edges == 1)
    return int((ends - starts).max()) if starts.size else 0
