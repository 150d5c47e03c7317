"""Series diagnostics, lacunary index sequences, deviation norms and the
long-term independence checker.

Finite data cannot decide convergence, so every series routine returns
partial sums at dyadic checkpoints together with the least-squares slope of
S_{2^t} against t over the last few checkpoints: a slope near 0 points to
convergence, a slope bounded away from 0 to divergence. It is advice, not proof.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .bernoulli import exact_nonhit
from .errors import NullEvent, ShrinkError
from .schedules import Kind, MixingProfile, TargetSchedule
from .transfer import DigitRange, constrained_measure

SLOPE_POINTS = 5
MAX_ENUMERATION_BITS = 20


class LacunaryOverflow(ShrinkError, OverflowError):
    reason = "overflow-at-j"


class UndefinedMeasure(ShrinkError, ValueError):
    reason = "undefined-measure-in-range"


class ZeroDenominator(ShrinkError, ValueError):
    reason = "zero-denominator"


# -- series ---------------------------------------------------------------------------

@dataclass
class SeriesReport:
    partial_sum: float
    checkpoints: list[tuple[int, float]]
    slope: float
    #: propagated one-sigma error of the partial sum (0 for exact terms)
    stderr: float = 0.0
    flags: list[str] = field(default_factory=list)


def dyadic_slope(checkpoints: Sequence[tuple[int, float]], points: int = SLOPE_POINTS) -> float:
    """Slope of the partial sum per doubling of the index, over the last ``points`` checkpoints."""
    tail = [(math.log2(n), s) for n, s in checkpoints if n >= 2][-points:]
    if len(tail) < 2:
        return 0.0
    t, s = np.array(tail).T
    return float(np.polyfit(t, s, 1)[0])


def _dyadic_report(terms: np.ndarray, first_index: int, variances: np.ndarray | None = None) -> SeriesReport:
    """Partial sums of terms[i] (index first_index + i) at every power-of-two index and at the end.

    Each checkpoint is a math.fsum of the whole prefix (correctly rounded),
    so the result does not depend on chunking or summation order. Checkpoints
    double, so the total work stays linear.
    """
    last = first_index + len(terms) - 1
    marks = [1 << t for t in range(0, max(last, 1).bit_length()) if first_index <= (1 << t) <= last]
    if not marks or marks[-1] != last:
        marks.append(last)
    checkpoints = [(n, math.fsum(terms[: n - first_index + 1])) for n in marks]
    total = checkpoints[-1][1] if checkpoints else 0.0
    se = math.sqrt(math.fsum(variances)) if variances is not None else 0.0
    return SeriesReport(total, checkpoints, dyadic_slope([c for c in checkpoints if c[0] & (c[0] - 1) == 0]), se)


def _values(f, indices: np.ndarray) -> np.ndarray:
    if callable(f):
        try:
            return np.asarray(f(indices), dtype=float)
        except (TypeError, ValueError):
            return np.array([f(int(i)) for i in indices], dtype=float)
    arr = np.asarray(f, dtype=float)
    return arr[indices]


def series_partial_sum(e_measures, eps: float, N: int) -> SeriesReport:
    """S_N = sum_{n=2}^N mu(E_n)^(1-eps) / n.

    ``e_measures`` is a callable n -> mu(E_n) (vectorised or scalar) or an
    array indexed by n.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    if N < 2:
        raise ValueError("N must be >= 2")
    n = np.arange(2, N + 1)
    mu = _values(e_measures, n)
    if np.any((mu < 0) | (mu > 1)):
        raise ValueError("mu(E_n) outside [0, 1]")
    terms = np.power(mu, 1.0 - eps) / n
    return _dyadic_report(terms, 2)


# -- lacunary sequences -------------------------------------------------------------------

def lacunary_mj(k: int, j: int, max_bits: int = 1 << 16) -> int:
    """m_j = k * floor(((k+1)/k)^(j/2)) in integer arithmetic.

    floor(sqrt(A/B)) = isqrt(A // B), so odd j needs no floating point.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if j < 0:
        raise ValueError("j must be >= 0")
    if j * math.log2(k + 1) > max_bits:
        raise LacunaryOverflow(f"(k+1)^j exceeds {max_bits} bits at j={j}")
    return k * math.isqrt((k + 1) ** j // k**j)


def geometric_mj(b: float | Fraction, j: int) -> int:
    """floor(b^j) with exact rational arithmetic on the given b."""
    b = Fraction(b)
    if b <= 1:
        raise ValueError("b must be > 1")
    p = b**j
    return p.numerator // p.denominator


@dataclass(frozen=True)
class LacunarySequence:
    """m_j = k * floor(((k+1)/k)^(j/2)), or floor(b^j) when ``base`` is given."""

    k: int = 2
    base: Fraction | None = None

    def __call__(self, j: int) -> int:
        if self.base is not None:
            return geometric_mj(self.base, j)
        return lacunary_mj(self.k, j)

    def values(self, j_lo: int, j_hi: int) -> list[int]:
        return [self(j) for j in range(j_lo, j_hi + 1)]

    def min_ratio(self, j_lo: int, j_hi: int) -> Fraction:
        """min m_{j+1}/m_j over j in [j_lo, j_hi]."""
        v = self.values(j_lo, j_hi + 1)
        if any(x == 0 for x in v):
            raise ValueError("sequence vanishes in range")
        return min(Fraction(b, a) for a, b in zip(v, v[1:]))

    def step_defect(self, j: int) -> int:
        """k n_{j+1} - (k+1) n_{j-1} with n_j = m_j / k."""
        n = lambda i: self(i) // self.k
        return self.k * n(j + 1) - (self.k + 1) * n(j - 1)


def dyadic_argmax_mj(e_measures, j: int) -> int:
    """Smallest n in [2^j, 2^{j+1}) maximising mu(E_n)."""
    best_n, best = None, -math.inf
    for n in range(1 << j, 1 << (j + 1)):
        try:
            v = e_measures(n) if callable(e_measures) else e_measures[n]
        except (KeyError, IndexError, ShrinkError) as exc:
            raise UndefinedMeasure(f"mu(E_{n}) undefined: {exc}") from None
        if v is None or not math.isfinite(v):
            raise UndefinedMeasure(f"mu(E_{n}) undefined")
        if v > best:
            best_n, best = n, v
    return best_n


def kelmer_partial_sum(seq: Callable[[int], int], joint: Callable[[int, int], float], J: int,
                       j0: int = 1) -> SeriesReport:
    """sum_{j=j0}^J mu(E_{m_{j-1}, m_j}).

    ``joint(n, m)`` may return a float or a (value, stderr) pair; stderrs are
    combined in quadrature into the report.
    """
    terms, var = [], []
    for j in range(j0, J + 1):
        v = joint(seq(j - 1), seq(j))
        if isinstance(v, tuple):
            v, se = v
            var.append(se * se)
        terms.append(float(v))
    return _dyadic_report(np.array(terms), j0, np.array(var) if var else None)


# -- deviation norms ----------------------------------------------------------------------

@dataclass
class DeviationEstimate:
    estimate: float
    stderr: float
    samples: int


def deviation_norm(indicators: np.ndarray, q: Sequence[float], N: int) -> DeviationEstimate:
    """Monte Carlo estimate of E[(sum_{j<=N} 1_j / sum_{j<=N} q_j - 1)^2].

    ``indicators`` has one row per sample and one column per event.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    ind = np.asarray(indicators)[:, :N]
    S = ind.shape[0]
    if S < 100:
        raise ValueError("at least 100 samples are required")
    Q = math.fsum(q[:N])
    if Q <= 0:
        raise ZeroDenominator("sum of q_j is zero")
    d2 = (ind.sum(axis=1) / Q - 1.0) ** 2
    return DeviationEstimate(float(d2.mean()), float(d2.std(ddof=1) / math.sqrt(S)), S)


def deviation_norm_product(mu: Sequence[float], ms: Sequence[int]) -> float:
    """Exact E[(sum 1_{E_{m_j}} / sum q_j - 1)^2] for a product system.

    ``mu[m-1] = mu(B_m)``; with s <= t, mu(E_{m_s} ∩ E_{m_t}) =
    (1 - mu_s)^{m_s} (1 - mu_t)^{m_t - m_s}.
    """
    lg = [math.log1p(-mu[m - 1]) if mu[m - 1] < 1 else -math.inf for m in ms]
    q = [math.exp(m * l) for m, l in zip(ms, lg)]
    Q = math.fsum(q)
    if Q <= 0:
        raise ZeroDenominator("sum of q_j is zero")
    second = []
    for a in range(len(ms)):
        for b in range(len(ms)):
            s, t = (a, b) if ms[a] <= ms[b] else (b, a)
            second.append(math.exp(ms[s] * lg[s] + (ms[t] - ms[s]) * lg[t]) if lg[t] > -math.inf else 0.0)
    return math.fsum(second) / (Q * Q) - 1.0


def fit_pair_hypothesis(q: Sequence[float], joint: np.ndarray, v: Sequence[float], eps: float = 0.0) -> float:
    """Smallest K with joint[s, t] <= (1+eps) q_s q_t^{1-2^{s-t+2}} + K q_s v_t for all s < t.

    Indices are 0-based positions in ``q``; returns 0 when the first term alone suffices.
    """
    K = 0.0
    n = len(q)
    for s in range(n):
        for t in range(s + 1, n):
            main = (1.0 + eps) * q[s] * q[t] ** (1.0 - 2.0 ** (s - t + 2))
            excess = joint[s, t] - main
            if excess > 0:
                denom = q[s] * v[t]
                K = math.inf if denom == 0 else max(K, excess / denom)
    return K


def decay_bound_check(q: Sequence[float], N: int | None = None, min_lag: int = 1) -> float:
    """R = sum_{n<m<=N, m-n >= min_lag} (q_n q_m^{1-2^{n-m+2}} - q_n q_m) / sum_{n<=N} q_n."""
    q = np.asarray(q, dtype=float)
    N = len(q) if N is None else N
    q = q[:N]
    if np.any((q <= 0) | (q >= 1)):
        raise ValueError("q must lie in (0, 1)")
    if N < 2:
        return 0.0
    total = []
    for lag in range(max(1, min_lag), N):
        a, b = q[:-lag], q[lag:]
        total.append(np.sum(a * (b ** (1.0 - 2.0 ** (2 - lag)) - b)))
    return math.fsum(total) / math.fsum(q)


# -- independence condition -------------------------------------------------------------------

@dataclass(frozen=True)
class CylinderSpec:
    """Constraints (time j >= 1, target i, member) meaning T^j x in B_i (or not),
    declared inside the algebra generated by T^-j B_i with j <= n, i <= m."""

    constraints: tuple[tuple[int, int, bool], ...]
    n: int
    m: int

    def __post_init__(self):
        cs = tuple((int(j), int(i), bool(b)) for j, i, b in self.constraints)
        object.__setattr__(self, "constraints", cs)
        for j, i, _ in cs:
            if not (1 <= j <= self.n and 1 <= i <= self.m):
                raise ValueError(f"constraint (j={j}, i={i}) outside the declared ({self.n}, {self.m})")

    def shifted(self, by: int) -> list[tuple[int, int, bool]]:
        return [(j + by, i, b) for j, i, b in self.constraints]


@dataclass
class IndependenceResult:
    deviation: float
    eta: float
    gap: int
    mu_a: float
    mu_b: float
    joint: float
    exact: bool
    passed: bool


def _per_time(constraints) -> dict[int, tuple[int, int]]:
    """Fold constraints at each time to (deepest member index, shallowest non-member index)."""
    out: dict[int, list[int]] = {}
    for j, i, member in constraints:
        lo, hi = out.get(j, [0, math.inf])
        if member:
            lo = max(lo, i)
        else:
            hi = min(hi, i)
        out[j] = [lo, hi]
    return {j: (lo, hi) for j, (lo, hi) in out.items()}


def _product_measure(constraints, s: TargetSchedule) -> Fraction:
    p = Fraction(1)
    for lo, hi in _per_time(constraints).values():
        top = s.measure_exact(lo) if lo > 0 else Fraction(1)
        bot = s.measure_exact(hi) if hi != math.inf else Fraction(0)
        p *= max(Fraction(0), top - bot)
    return p


def _bernoulli_measure(constraints, s: TargetSchedule) -> Fraction:
    """Exact measure by enumerating the coordinates the constraints read."""
    folded = _per_time(constraints)
    if not folded:
        return Fraction(1)
    lengths = {j: (int(s.param(lo)) if lo > 0 else 0, int(s.param(hi)) if hi != math.inf else None)
               for j, (lo, hi) in folded.items()}
    first = min(folded)
    last = max(j + max(a, b or 0) - 1 for j, (a, b) in lengths.items())
    width = last - first + 1
    if width > MAX_ENUMERATION_BITS:
        raise ShrinkError(f"window of {width} coordinates is too wide to enumerate")
    words = ((np.arange(1 << width)[:, None] >> np.arange(width)) & 1).astype(np.uint8)
    z = np.zeros_like(words, dtype=np.int64)
    run = np.zeros(words.shape[0], dtype=np.int64)
    for c in range(width - 1, -1, -1):
        run = np.where(words[:, c] == 0, run + 1, 0)
        z[:, c] = run
    ok = np.ones(words.shape[0], bool)
    for j, (need, forbid) in lengths.items():
        zj = z[:, j - first]
        if need:
            ok &= zj >= need
        if forbid is not None:
            ok &= zj < forbid
    return Fraction(int(ok.sum()), 1 << width)


def _gauss_measure(constraints, s: TargetSchedule) -> float:
    """T^j x in B_i iff a_{j+1}(x) >= k_i: fold into one digit range per position."""
    folded = _per_time(constraints)
    if not folded:
        return 1.0
    ranges = []
    for pos in range(1, max(folded) + 2):
        j = pos - 1
        if j not in folded:
            ranges.append(DigitRange())
            continue
        lo, hi = folded[j]
        dlo = int(s.param(lo)) if lo > 0 else 1
        dhi = int(s.param(hi)) - 1 if hi != math.inf else None
        if dhi is not None and dhi < dlo:
            return 0.0
        ranges.append(DigitRange(dlo, dhi))
    return constrained_measure(ranges)


def event_measure(system: str, constraints, s: TargetSchedule):
    if system == "product":
        return _product_measure(constraints, s)
    if system == "bernoulli":
        if s.kind is not Kind.BERNOULLI:
            raise ValueError("bernoulli system needs a run-length schedule")
        return _bernoulli_measure(constraints, s)
    if system == "gauss":
        if s.kind is not Kind.GAUSS:
            raise ValueError("gauss system needs a digit schedule")
        return _gauss_measure(constraints, s)
    raise ValueError(f"unknown system {system!r}")


def check_independence_condition(system: str, s: TargetSchedule, A: CylinderSpec, B: CylinderSpec,
                                 profile: MixingProfile) -> IndependenceResult:
    """|mu(A ∩ T^-(n+F(m)) B) / (mu(A) mu(B)) - 1| against eta(m).

    Product and Bernoulli measures are exact rationals; the Gauss map uses
    the deterministic transfer-operator evaluation.
    """
    if A.n > A.m:
        raise ValueError("A must satisfy n <= m")
    if B.n != B.m or B.m != A.m:
        raise ValueError("B must lie in the algebra with n = m equal to A's m")
    m = A.m
    gap = A.n + profile.gap(m)
    mu_a = event_measure(system, A.constraints, s)
    mu_b = event_measure(system, B.constraints, s)
    if mu_a == 0 or mu_b == 0:
        raise NullEvent("A or B has measure zero")
    joint = event_measure(system, list(A.constraints) + B.shifted(gap), s)
    exact = system != "gauss"
    if exact:
        dev = abs(Fraction(joint) / (Fraction(mu_a) * Fraction(mu_b)) - 1)
    else:
        dev = abs(joint / (mu_a * mu_b) - 1.0)
    eta = profile.tolerance(m)
    return IndependenceResult(float(dev), eta, profile.gap(m), float(mu_a), float(mu_b), float(joint),
                              exact, dev <= eta)


def atoms(n: int, m: int, targets: Sequence[int] | None = None):
    """All atoms of the algebra generated by T^-j B_i (j <= n, i in targets) that nestedness allows:
    at each time the orbit sits at some depth 0..len(targets)."""
    targets = list(range(1, m + 1)) if targets is None else list(targets)
    depth_choices = range(len(targets) + 1)
    for depths in itertools.product(depth_choices, repeat=n):
        cons = []
        for j, d in enumerate(depths, start=1):
            for idx, i in enumerate(targets):
                cons.append((j, i, idx < d))
        yield CylinderSpec(tuple(cons), n, m)


# -- summability --------------------------------------------------------------------------------

@dataclass
class SummabilityReport:
    series: SeriesReport
    k: int
    threshold: int
    below_threshold: bool


def summability_weights(profile: MixingProfile, s: TargetSchedule, seq: Callable[[int], int]) -> Callable[[int], float]:
    """j -> w_j = F(m_j) mu(B_{m_j})."""
    return lambda j: profile.gap(seq(j)) * s.measure(seq(j))


def summability_check(w: Callable[[int], float], k: int, delta: float, J: int, j0: int = 1) -> SummabilityReport:
    """Partial sums of w_j^{k/(k+1)}; flags k below ceil(2/delta) but still computes."""
    thr = math.ceil(2.0 / delta)
    terms = np.array([w(j) for j in range(j0, J + 1)], dtype=float)
    if np.any(terms < 0):
        raise ValueError("weights must be non-negative")
    rep = _dyadic_report(terms ** (k / (k + 1.0)), j0)
    below = k < thr
    if below:
        rep.flags.append("k-below-threshold")
    return SummabilityReport(rep, k, thr, below)


# -- power law for Bernoulli non-hitting measures --------------------------------------------------

def bernoulli_power_gap(n: int, k: int, r: int) -> tuple[Fraction, Fraction, float]:
    """(|mu(E_{kn}) - mu(E_n)^k|, mu(E_n)^k, allowed slack k r 2^-r + 0.05 mu(E_n)^k) for run length r."""
    a = exact_nonhit(k * n, r)
    b = exact_nonhit(n, r) ** k
    return abs(a - b), b, k * r * 2.0**-r + 0.05 * float(b)
