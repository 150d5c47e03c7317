"""Finite disjoint unions of subintervals of [0, 1] with rational endpoints."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

_ONE = Fraction(1)
_ZERO = Fraction(0)


@dataclass(frozen=True, order=True)
class Interval:
    lo: Fraction
    hi: Fraction
    lo_closed: bool = False
    hi_closed: bool = False

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def __str__(self):
        return f"{'[' if self.lo_closed else '('}{self.lo}, {self.hi}{']' if self.hi_closed else ')'}"


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class IntervalUnion:
    """Sorted, pairwise disjoint intervals in [0, 1].

    Endpoint openness is carried along but never affects a measure. Touching
    intervals are merged when at least one of the touching endpoints is
    closed (then the union is an interval).
    """

    __slots__ = ("_ivs",)

    def __init__(self, intervals: Iterable[Interval] = ()):
        self._ivs = _canonical(intervals)

    # constructors
    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls()

    @classmethod
    def full(cls) -> "IntervalUnion":
        return cls([Interval(_ZERO, _ONE, True, True)])

    @classmethod
    def interval(cls, lo, hi, lo_closed: bool = False, hi_closed: bool = False) -> "IntervalUnion":
        return cls([Interval(_frac(lo), _frac(hi), lo_closed, hi_closed)])

    @classmethod
    def parse(cls, text: str) -> "IntervalUnion":
        """Parse ``"[0,1/2] u (2/3,1)"``; a bare ``"a:b"`` means the closed interval."""
        parts = [p.strip() for p in text.replace("U", "u").split("u") if p.strip()]
        ivs = []
        for p in parts:
            if ":" in p and p[0] not in "[(":
                a, b = p.split(":")
                ivs.append(Interval(Fraction(a.strip()), Fraction(b.strip()), True, True))
                continue
            if p[0] not in "[(" or p[-1] not in "])" or "," not in p:
                raise ValueError(f"cannot parse interval {p!r}")
            a, b = p[1:-1].split(",")
            ivs.append(Interval(Fraction(a.strip()), Fraction(b.strip()), p[0] == "[", p[-1] == "]"))
        return cls(ivs)

    # container protocol
    def __iter__(self) -> Iterator[Interval]:
        return iter(self._ivs)

    def __len__(self) -> int:
        return len(self._ivs)

    def __bool__(self) -> bool:
        return bool(self._ivs)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalUnion) and self._ivs == other._ivs

    def __hash__(self):
        return hash(self._ivs)

    def __repr__(self) -> str:
        if not self._ivs:
            return "IntervalUnion(∅)"
        return "IntervalUnion(" + " ∪ ".join(map(str, self._ivs)) + ")"

    @property
    def intervals(self) -> tuple[Interval, ...]:
        return self._ivs

    # measures
    def lebesgue(self) -> Fraction:
        return sum((iv.length for iv in self._ivs), _ZERO)

    def gauss_measure(self) -> float:
        """Gauss measure, summed per interval as log1p((hi-lo)/(1+lo)) / log 2."""
        return math.fsum(math.log1p(float(iv.length / (1 + iv.lo))) for iv in self._ivs) / math.log(2.0)

    def contains(self, x) -> bool:
        x = _frac(x)
        for iv in self._ivs:
            if iv.lo < x < iv.hi or (x == iv.lo and iv.lo_closed) or (x == iv.hi and iv.hi_closed):
                return True
        return False

    def bit_size(self) -> int:
        return sum(
            e.numerator.bit_length() + e.denominator.bit_length()
            for iv in self._ivs
            for e in (iv.lo, iv.hi)
        )

    # set operations
    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        i = j = 0
        a, b = self._ivs, other._ivs
        while i < len(a) and j < len(b):
            x, y = a[i], b[j]
            lo, lo_c = _max_lo(x, y)
            hi, hi_c = _min_hi(x, y)
            if lo < hi:
                out.append(Interval(lo, hi, lo_c, hi_c))
            if (x.hi, x.hi_closed) < (y.hi, y.hi_closed):
                i += 1
            else:
                j += 1
        return IntervalUnion(out)

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(self._ivs + other._ivs)

    def complement(self) -> "IntervalUnion":
        out = []
        cur, cur_closed = _ZERO, True
        for iv in self._ivs:
            if iv.lo > cur:
                out.append(Interval(cur, iv.lo, cur_closed, not iv.lo_closed))
            cur, cur_closed = iv.hi, not iv.hi_closed
        if cur < 1:
            out.append(Interval(cur, _ONE, cur_closed, True))
        return IntervalUnion(out)

    def round_outward(self, bits: int) -> tuple["IntervalUnion", Fraction]:
        """Snap endpoints outward to multiples of 2**-bits; returns the superset
        and the Lebesgue measure it added."""
        scale = 1 << bits
        out = []
        for iv in self._ivs:
            lo = Fraction(math.floor(iv.lo * scale), scale)
            hi = Fraction(math.ceil(iv.hi * scale), scale)
            out.append(Interval(lo, hi, True, True))
        rounded = IntervalUnion(out)
        return rounded, rounded.lebesgue() - self.lebesgue()


def _max_lo(x: Interval, y: Interval):
    if x.lo != y.lo:
        return (x.lo, x.lo_closed) if x.lo > y.lo else (y.lo, y.lo_closed)
    return x.lo, x.lo_closed and y.lo_closed


def _min_hi(x: Interval, y: Interval):
    if x.hi != y.hi:
        return (x.hi, x.hi_closed) if x.hi < y.hi else (y.hi, y.hi_closed)
    return x.hi, x.hi_closed and y.hi_closed


def _canonical(intervals: Iterable[Interval]) -> tuple[Interval, ...]:
    ivs = []
    for iv in intervals:
        if not isinstance(iv.lo, Fraction) or not isinstance(iv.hi, Fraction):
            iv = Interval(_frac(iv.lo), _frac(iv.hi), iv.lo_closed, iv.hi_closed)
        if iv.lo < 0 or iv.hi > 1:
            raise ValueError(f"interval {iv} not inside [0, 1]")
        if iv.lo < iv.hi:
            ivs.append(iv)
    ivs.sort(key=lambda iv: (iv.lo, not iv.lo_closed))
    out: list[Interval] = []
    for iv in ivs:
        if out:
            last = out[-1]
            touching = iv.lo == last.hi and (last.hi_closed or iv.lo_closed)
            if iv.lo < last.hi or touching:
                if (iv.hi, iv.hi_closed) > (last.hi, last.hi_closed):
                    out[-1] = Interval(last.lo, iv.hi, last.lo_closed, iv.hi_closed)
                continue
        out.append(iv)
    return tuple(out)
