"""Deterministic evaluation of Gauss-map pushforwards of smooth densities.

For a Lebesgue density rho on [0, 1] and a digit set S, the pushforward of
rho restricted to {a_1 in S} under T is

    (L_S rho)(y) = sum_{i in S} rho(1 / (i + y)) / (i + y)^2.

Iterating L with per-step digit sets gives the measure of any event that
constrains the first few continued-fraction digits, as the integral of the
final density. Densities are held as Chebyshev interpolants on [0, 1]; every
intermediate density is analytic on a neighbourhood of [0, 1], so a moderate
degree reaches double precision. Infinite digit tails are summed with the
Hurwitz zeta function after a local polynomial fit of rho near 0.

This only applies the operator; nothing here computes its spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as P
from scipy.special import zeta

from .intervals import IntervalUnion

LOG2 = math.log(2.0)
DEGREE = 48
DIRECT_TERMS = 48
TAIL_DEGREE = 14


@dataclass(frozen=True)
class DigitRange:
    """Allowed values lo..hi (inclusive) of one continued-fraction digit; hi=None means unbounded."""

    lo: int = 1
    hi: int | None = None

    def __post_init__(self):
        if self.lo < 1 or (self.hi is not None and self.hi < self.lo):
            raise ValueError(f"empty digit range [{self.lo}, {self.hi}]")

    @property
    def unrestricted(self) -> bool:
        return self.lo == 1 and self.hi is None

    def intersect(self, other: "DigitRange") -> "DigitRange | None":
        lo = max(self.lo, other.lo)
        his = [h for h in (self.hi, other.hi) if h is not None]
        hi = min(his) if his else None
        if hi is not None and hi < lo:
            return None
        return DigitRange(lo, hi)


class Density:
    """Chebyshev interpolant of a function on [0, 1]."""

    __slots__ = ("coef",)

    def __init__(self, coef: np.ndarray):
        self.coef = coef

    @classmethod
    def from_function(cls, f, degree: int = DEGREE) -> "Density":
        return cls(C.chebinterpolate(lambda x: f(0.5 * (x + 1.0)), degree))

    def __call__(self, t):
        return C.chebval(2.0 * np.asarray(t, dtype=float) - 1.0, self.coef)

    def integral(self, lo: float = 0.0, hi: float = 1.0) -> float:
        anti = C.chebint(self.coef, lbnd=-1.0) * 0.5
        return float(C.chebval(2.0 * hi - 1.0, anti) - C.chebval(2.0 * lo - 1.0, anti))

    def integral_over(self, u: IntervalUnion) -> float:
        anti = C.chebint(self.coef, lbnd=-1.0) * 0.5
        los = np.array([2.0 * float(iv.lo) - 1.0 for iv in u])
        his = np.array([2.0 * float(iv.hi) - 1.0 for iv in u])
        if los.size == 0:
            return 0.0
        return math.fsum(C.chebval(his, anti) - C.chebval(los, anti))


def gauss_density() -> Density:
    return Density.from_function(lambda t: 1.0 / (LOG2 * (1.0 + t)))


def _tail_sum(rho: Density, start: int, y: np.ndarray) -> np.ndarray:
    """sum_{i >= start} rho(1/(i+y)) / (i+y)^2 for y in [0, 1]."""
    direct = np.zeros_like(y)
    for i in range(start, start + DIRECT_TERMS):
        s = i + y
        direct += rho(1.0 / s) / (s * s)
    s0 = start + DIRECT_TERMS
    delta = 1.0 / s0
    # rho(t) ~ sum_j e_j (t/delta)^j on [0, delta]; then
    # sum_{i >= s0} (t_i/delta)^j t_i^2 = delta^-j * zeta(j + 2, s0 + y)
    nodes = 0.5 * (1.0 - np.cos(np.pi * (np.arange(TAIL_DEGREE + 1) + 0.5) / (TAIL_DEGREE + 1)))
    e = P.polyfit(nodes, rho(nodes * delta), TAIL_DEGREE)
    tail = np.zeros_like(y)
    for j, ej in enumerate(e):
        tail += ej * delta ** (-j) * zeta(j + 2.0, s0 + y)
    return direct + tail


def _range_sum(rho: Density, r: DigitRange, y: np.ndarray) -> np.ndarray:
    if r.hi is not None and r.hi - r.lo < 4 * DIRECT_TERMS:
        out = np.zeros_like(y)
        for i in range(r.lo, r.hi + 1):
            s = i + y
            out += rho(1.0 / s) / (s * s)
        return out
    out = _tail_sum(rho, r.lo, y)
    if r.hi is not None:
        out = out - _tail_sum(rho, r.hi + 1, y)
    return out


def transfer(rho: Density, r: DigitRange = DigitRange(), degree: int = DEGREE) -> Density:
    """L_S rho for the digit set S = r."""
    return Density.from_function(lambda y: _range_sum(rho, r, y), degree)


def constrained_measure(
    digit_ranges: list[DigitRange],
    final: IntervalUnion | None = None,
    start: Density | None = None,
) -> float:
    """mu({x : a_t(x) in digit_ranges[t-1] for all t, and T^D x in final}).

    ``D = len(digit_ranges)``; ``final=None`` means no constraint on T^D x.
    Unconstrained digits can be passed as ``DigitRange()``.
    """
    rho = gauss_density() if start is None else start
    for r in digit_ranges:
        rho = transfer(rho, r)
    if final is None:
        return rho.integral()
    return rho.integral_over(final)
