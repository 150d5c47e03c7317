"""Nested target families B_1 ⊃ B_2 ⊃ ... and the loglog threshold tests.

A schedule is described by its parameter sequence:

* ``BERNOULLI``: run lengths r_m >= 1 (non-decreasing), mu(B_m) = 2**-r_m;
* ``GAUSS``: digit bounds k_m >= 1 (non-decreasing), B_m = [0, 1/k_m] and
  mu(B_m) = log(1 + 1/k_m) / log 2;
* ``ABSTRACT``: the measures mu(B_m) themselves (non-increasing).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    MonotonicityViolation,
    ScheduleError,
    ScheduleUndefined,
    ThresholdDomainError,
)

LOG2 = math.log(2.0)
MIN_THRESHOLD_M = 16
STRICT_MARGIN = 1e-6


class Kind(str, enum.Enum):
    BERNOULLI = "bernoulli"
    GAUSS = "gauss"
    ABSTRACT = "abstract"


class Prediction(str, enum.Enum):
    FULL = "FullMeasure"
    ZERO = "ZeroMeasure"
    INDETERMINATE = "Indeterminate"


class NullityViolation(ScheduleError):
    reason = "nullity-violation"


def gauss_target_measure(k: int) -> float:
    """mu([0, 1/k]) for the Gauss measure."""
    return math.log1p(1.0 / k) / LOG2


@dataclass(frozen=True)
class TargetSchedule:
    """Parameter sequence of a shrinking target family.

    ``table[m-1]`` gives the parameter for ``m <= len(table)``; beyond the
    table the closed form ``tail`` is used. Without a tail, queries past the
    table raise :class:`ScheduleUndefined`.
    """

    kind: Kind
    table: tuple = ()
    tail: Callable[[int], float] | None = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "table", tuple(self.table))
        prev = None
        for i, v in enumerate(self.table, start=1):
            self._validate(v, i)
            if prev is not None:
                self._check_order(prev, v, i)
            prev = v

    # -- construction helpers -------------------------------------------------
    @classmethod
    def bernoulli(cls, r: Callable[[int], int] | Sequence[int], label: str = "") -> "TargetSchedule":
        return cls._make(Kind.BERNOULLI, r, label)

    @classmethod
    def gauss(cls, k: Callable[[int], int] | Sequence[int], label: str = "") -> "TargetSchedule":
        return cls._make(Kind.GAUSS, k, label)

    @classmethod
    def abstract(cls, mu: Callable[[int], float] | Sequence[float], label: str = "") -> "TargetSchedule":
        return cls._make(Kind.ABSTRACT, mu, label)

    @classmethod
    def _make(cls, kind, spec, label):
        if callable(spec):
            return cls(kind, tail=spec, label=label)
        return cls(kind, table=tuple(spec), label=label)

    # -- access ---------------------------------------------------------------
    def _validate(self, v, m):
        if self.kind is Kind.ABSTRACT:
            if not 0 <= v <= 1:
                raise ScheduleError(f"mu(B_{m}) = {v} outside [0, 1]")
        else:
            if int(v) != v or v < 1:
                raise ScheduleError(f"parameter at m={m} must be an integer >= 1, got {v}")

    def _check_order(self, prev, v, m):
        if self.kind is Kind.ABSTRACT:
            if v > prev:
                raise MonotonicityViolation(f"mu(B_m) increased at m={m}: {prev} -> {v}")
        elif v < prev:
            raise MonotonicityViolation(f"parameter decreased at m={m}: {prev} -> {v}")

    def _raw(self, m: int):
        if m <= len(self.table):
            return self.table[m - 1]
        if self.tail is None:
            raise ScheduleUndefined(f"schedule {self.label or self.kind.value} undefined at m={m}")
        try:
            v = self.tail(m)
        except ConfigError as exc:
            raise ScheduleUndefined(str(exc)) from None
        if self.kind is not Kind.ABSTRACT:
            if isinstance(v, float):
                if not v.is_integer():
                    raise ScheduleError(f"parameter at m={m} is not an integer: {v}")
                v = int(v)
        self._validate(v, m)
        return v

    def param(self, m: int):
        """Parameter at ``m`` (r_m, k_m or mu(B_m)); monotonicity checked against m-1."""
        if m < 1:
            raise ScheduleUndefined(f"m must be >= 1, got {m}")
        v = self._raw(m)
        if m > 1 and m > len(self.table):
            self._check_order(self._raw(m - 1), v, m)
        return v

    def params(self, m_max: int, m_min: int = 1) -> np.ndarray:
        """Parameters for m = m_min..m_max with a full monotonicity check."""
        if m_min < 1:
            raise ScheduleUndefined(f"m must be >= 1, got {m_min}")
        cast = float if self.kind is Kind.ABSTRACT else int
        vals = [cast(self._raw(m)) for m in range(m_min, m_max + 1)]
        arr = np.asarray(vals, dtype=float if self.kind is Kind.ABSTRACT else np.int64)
        if arr.size > 1:
            d = np.diff(arr)
            bad = np.flatnonzero(d > 0 if self.kind is Kind.ABSTRACT else d < 0)
            if bad.size:
                i = int(bad[0])
                self._check_order(arr[i], arr[i + 1], m_min + i + 1)
        return arr

    def measure(self, m: int) -> float:
        """mu(B_m) as a float."""
        v = self.param(m)
        if self.kind is Kind.BERNOULLI:
            return math.ldexp(1.0, -int(v))
        if self.kind is Kind.GAUSS:
            return gauss_target_measure(int(v))
        return float(v)

    def measure_exact(self, m: int) -> Fraction:
        """Exact mu(B_m). Only defined for Bernoulli and abstract schedules."""
        v = self.param(m)
        if self.kind is Kind.BERNOULLI:
            return Fraction(1, 2 ** int(v))
        if self.kind is Kind.ABSTRACT:
            return Fraction(v)
        raise ScheduleError("Gauss target measures are transcendental; use measure()")

    def measures(self, m_max: int, m_min: int = 1) -> np.ndarray:
        """mu(B_m) for m = m_min..m_max."""
        p = self.params(m_max, m_min)
        if self.kind is Kind.BERNOULLI:
            return np.ldexp(1.0, -p)
        if self.kind is Kind.GAUSS:
            return np.log1p(1.0 / p) / LOG2
        return p


def target_measure(s: TargetSchedule, m: int) -> float:
    return s.measure(m)


def threshold_loglog(m: int, C: float) -> float:
    """C * log(log m) / m, defined for m >= 16."""
    if m < MIN_THRESHOLD_M:
        raise ThresholdDomainError(f"threshold needs m >= {MIN_THRESHOLD_M}, got {m}")
    return C * math.log(math.log(m)) / m


def loglog_schedule(kind: Kind | str, C: float, side: str = "above") -> TargetSchedule:
    """Schedule tracking mu(B_m) ~ C loglog m / m.

    ``side="above"`` rounds the integer parameter so that the target measure
    stays >= C loglog m / m; ``side="below"`` keeps it <= the threshold.
    Indices below 16 reuse the value at 16.
    """
    kind = Kind(kind)
    if C <= 0:
        raise ScheduleError("C must be positive")
    if side not in ("above", "below"):
        raise ScheduleError(f"side must be 'above' or 'below', got {side!r}")
    above = side == "above"

    def t(m):
        m = max(m, MIN_THRESHOLD_M)
        return C * math.log(math.log(m)) / m

    if kind is Kind.ABSTRACT:
        def tail(m):
            return min(1.0, t(m))
    elif kind is Kind.BERNOULLI:
        def tail(m):
            # 2**-r >= t  <=>  r <= -log2 t
            x = -math.log2(t(m))
            r = math.floor(x) if above else math.ceil(x)
            return max(1, r)
    else:
        def tail(m):
            # log(1 + 1/k) >= t  <=>  k <= 1/expm1(t)
            x = 1.0 / math.expm1(t(m))
            k = math.floor(x) if above else math.ceil(x)
            return max(1, k)

    return TargetSchedule(kind, tail=tail, label=f"loglog:C={C:g},side={side}")


# -- classification -----------------------------------------------------------

_CUTOFF = {Kind.ABSTRACT: 1.0, Kind.BERNOULLI: 2.0, Kind.GAUSS: 1.0}


@dataclass
class Classification:
    prediction: Prediction
    fitted_low: float
    fitted_high: float
    cutoff: float
    m_range: tuple[int, int]
    notes: list[str] = field(default_factory=list)


def loglog_ratios(s: TargetSchedule, m_lo: int, m_hi: int) -> np.ndarray:
    """m * g(B_m) / loglog m on [m_lo, m_hi], g = mu for product/Bernoulli,
    g = log(1 + 1/k_m) for the Gauss map."""
    ms = np.arange(m_lo, m_hi + 1, dtype=float)
    mu = s.measures(m_hi, m_lo)
    if s.kind is Kind.GAUSS:
        mu = mu * LOG2
    return ms * mu / np.log(np.log(ms))


def classify_schedule(s: TargetSchedule, horizon: int, burn_in: int = MIN_THRESHOLD_M) -> Classification:
    """Decide which loglog branch (full or zero measure) the schedule follows on [max(16, burn_in), horizon]."""
    if horizon < 32:
        raise ScheduleError("horizon must be >= 32")
    m_lo = max(MIN_THRESHOLD_M, burn_in)
    if m_lo >= horizon:
        raise ScheduleError("burn-in leaves nothing to check")
    if s.measure(horizon) >= s.measure(m_lo):
        raise NullityViolation("target measures do not shrink over the horizon")
    ratios = loglog_ratios(s, m_lo, horizon)
    lo, hi = float(ratios.min()), float(ratios.max())
    cut = _CUTOFF[s.kind]
    if lo > cut + STRICT_MARGIN:
        pred = Prediction.FULL
    elif s.kind is Kind.GAUSS and hi < cut - STRICT_MARGIN:
        pred = Prediction.ZERO
    elif s.kind is not Kind.GAUSS and hi <= cut + STRICT_MARGIN:
        pred = Prediction.ZERO
    else:
        pred = Prediction.INDETERMINATE
    return Classification(pred, lo, hi, cut, (m_lo, horizon))


# -- mixing profiles ------------------------------------------------------------

@dataclass(frozen=True)
class MixingProfile:
    """Gap function F(m) >= 0 and tolerance eta(m) in [0, 1] of a long-term independence condition.

    ``delta`` is the exponent in the growth bound
    F(m) <= 1 / ((log m)^(1+delta) * mu(B_m)).
    """

    gap: Callable[[int], int]
    tolerance: Callable[[int], float]
    delta: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ScheduleError("delta must be positive")

    def growth_bound(self, s: TargetSchedule, m: int) -> float:
        if m < 2:
            return math.inf
        return 1.0 / (math.log(m) ** (1.0 + self.delta) * s.measure(m))

    def growth_violations(self, s: TargetSchedule, m_lo: int, m_hi: int) -> list[int]:
        """Indices m in [m_lo, m_hi] where F(m) exceeds the growth bound."""
        return [m for m in range(max(1, m_lo), m_hi + 1) if self.gap(m) > self.growth_bound(s, m)]

    def tolerance_settles(self, after: int, m_hi: int) -> bool:
        """eta stays in [0, 1] and is non-increasing on [after, m_hi]."""
        vals = [self.tolerance(m) for m in range(after, m_hi + 1)]
        if any(not 0.0 <= v <= 1.0 for v in vals):
            return False
        return all(b <= a for a, b in zip(vals, vals[1:]))
