"""Gauss map T(x) = 1/x mod 1 with digit targets B_m = [0, 1/k_m].

The exact engine builds Etilde_{n} = B^c ∩ T^{-1} B^c ∩ ... ∩ T^{-(n-1)} B^c
as a union of intervals with rational endpoints, one restricted preimage
step at a time; since E_{n,m} = T^{-1} Etilde_{n,m} and mu is invariant,
mu(E_{n,m}) = mu(Etilde_{n,m}).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BranchBudgetExceeded, NullEvent
from .intervals import Interval, IntervalUnion
from .transfer import Density, DigitRange, gauss_density, transfer

log = logging.getLogger(__name__)

LOG2 = math.log(2.0)
DEFAULT_BRANCH_CAP = 10**6
DEFAULT_BIT_BUDGET = 1 << 20
ROUNDING_BITS = 96
#: lambda(I)/D0 <= mu(I) <= D0 * lambda(I) for every interval I
DENSITY_D0 = 9 / LOG2


def gauss_map(x):
    """T(x) = 1/x - floor(1/x), with T(0) = 0. Exact for Fraction input."""
    if x == 0:
        return type(x)(0)
    y = 1 / x
    return y - math.floor(y)


def gauss_measure(u: IntervalUnion) -> float:
    return u.gauss_measure()


def complement_of_target(k: int) -> IntervalUnion:
    """B^c = (1/k, 1]."""
    return IntervalUnion([Interval(Fraction(1, k), Fraction(1), False, True)])


def preimage_restricted(u: IntervalUnion, k: int, branch_cap: int = DEFAULT_BRANCH_CAP) -> IntervalUnion:
    """T^{-1}(u) ∩ (1/k, 1], through the branches x = 1/(i + y), i = 1..k-1."""
    if k < 2:
        raise ValueError("k must be >= 2 (k = 1 leaves an empty complement)")
    if (k - 1) * len(u) > branch_cap:
        raise BranchBudgetExceeded(f"{(k - 1) * len(u)} branches exceed cap {branch_cap}")
    out = []
    for iv in u:
        a, b = iv.lo, iv.hi
        for i in range(1, k):
            # y in (a, b)  <=>  x in (1/(i+b), 1/(i+a)); y = 1 has no preimage on branch i
            lo = Fraction(b.denominator, i * b.denominator + b.numerator)
            hi = Fraction(a.denominator, i * a.denominator + a.numerator)
            out.append(Interval(lo, hi, iv.hi_closed and b < 1, iv.lo_closed))
    return IntervalUnion(out).intersect(complement_of_target(k))


@dataclass
class EtildeResult:
    n: int
    k: int
    union: IntervalUnion
    lebesgue: Fraction
    mu: float
    branch_count: int
    budget_hit: bool = False
    #: bound on lebesgue(union) - lambda(Etilde) once outward rounding kicked in
    width_error: Fraction = Fraction(0)

    @property
    def exact(self) -> bool:
        return not self.budget_hit


def etilde_steps(n_max: int, k: int, branch_cap: int = DEFAULT_BRANCH_CAP,
                 bit_budget: int = DEFAULT_BIT_BUDGET):
    """Yield EtildeResult for n = 1..n_max."""
    if k < 2:
        raise ValueError("k must be >= 2")
    u = complement_of_target(k)
    budget_hit = False
    err = Fraction(0)
    # preimage of a set of Lebesgue measure w through branches i < k has measure <= w * pi^2/6
    lip = Fraction(1645, 1000)
    for n in range(1, n_max + 1):
        if n > 1:
            u = preimage_restricted(u, k, branch_cap)
            err *= lip
        if u.bit_size() > bit_budget:
            if not budget_hit:
                log.warning("bit budget exceeded at n=%d, k=%d; rounding endpoints outward", n, k)
            budget_hit = True
            u, added = u.round_outward(ROUNDING_BITS)
            err += added
        yield EtildeResult(n, k, u, u.lebesgue(), u.gauss_measure(), len(u), budget_hit, err)


def exact_Etilde(n: int, k: int, branch_cap: int = DEFAULT_BRANCH_CAP,
                 bit_budget: int = DEFAULT_BIT_BUDGET) -> EtildeResult:
    if n < 1:
        raise ValueError("n must be >= 1")
    res = None
    for res in etilde_steps(n, k, branch_cap, bit_budget):
        pass
    return res


def gauss_nonhit(n: int, k: int, **kw) -> float:
    """mu(E_{n,m}) for k_m = k (k = 1 means B_m is everything)."""
    if n == 0:
        return 1.0
    if k == 1:
        return 0.0
    return exact_Etilde(n, k, **kw).mu


@dataclass
class RatioCheck:
    k: int
    ratios: list[Fraction]
    c_fit: float


def recurrence_ratio_check(n_max: int, k: int) -> RatioCheck:
    """rho_n = lambda(Etilde_n)/lambda(Etilde_{n-1}) against 1 - 1/k.

    ``c_fit = max_n |rho_n - (1 - 1/k)| * k^2`` over n = 1..n_max, with
    lambda(Etilde_0) = 1.
    """
    prev = Fraction(1)
    ratios = []
    for res in etilde_steps(n_max, k):
        assert res.lebesgue > 0, "Etilde cannot be null for k >= 2"
        ratios.append(res.lebesgue / prev)
        prev = res.lebesgue
    target = 1 - Fraction(1, k)
    c_fit = max(float(abs(r - target)) * k * k for r in ratios)
    return RatioCheck(k, ratios, c_fit)


# -- power-law envelopes for lambda(E~) ---------------------------------------------

def sandwich_bounds(n: int, k: int, C: float, D: float) -> tuple[float, float]:
    """Lower/upper envelope (1 - log2*mu -/+ C mu^2)^n scaled by 1/D and D.

    A negative lower base is clipped to 0 (the bound is then trivial).
    """
    mu = math.log1p(1.0 / k) / LOG2
    lo_base = max(0.0, 1.0 - LOG2 * mu - C * mu * mu)
    hi_base = 1.0 - LOG2 * mu + C * mu * mu
    return lo_base**n / D, D * hi_base**n


def fit_sandwich_C(cells, D: float) -> float:
    """Smallest C for which sandwich_bounds(n, k, C, D) contains every mu(E_{n}) in ``cells``.

    ``cells`` maps (n, k) to mu(E_{n,m}) with k_m = k.
    """
    C = 0.0
    for (n, k), mu_e in cells.items():
        b = math.log1p(1.0 / k) / LOG2
        lower = (1.0 - LOG2 * b - (D * mu_e) ** (1.0 / n)) / (b * b)
        upper = ((mu_e / D) ** (1.0 / n) - 1.0 + LOG2 * b) / (b * b)
        C = max(C, lower, upper)
    return C


def loglog_envelope_applies(k: int, C: float, eps: float) -> bool:
    """Whether the target [0, 1/k] is small enough for the sandwich with constant C
    to imply the (1 - mu)^{m log2 (1 +/- eps)} envelope."""
    mu = math.log1p(1.0 / k) / LOG2
    lo_ok = (1.0 - mu) ** (LOG2 * (1 + eps)) <= 1.0 - LOG2 * mu - C * mu * mu
    hi_ok = 1.0 - LOG2 * mu + C * mu * mu <= (1.0 - mu) ** (LOG2 * (1 - eps))
    return lo_ok and hi_ok


def loglog_envelope_bounds(m: int, k: int, eps: float, D: float) -> tuple[float, float]:
    """(1 - mu)^{m log2 (1+eps)} / D and D (1 - mu)^{m log2 (1-eps)}."""
    mu = math.log1p(1.0 / k) / LOG2
    base = math.log1p(-mu)
    return math.exp(base * m * LOG2 * (1 + eps)) / D, D * math.exp(base * m * LOG2 * (1 - eps))


# -- sampling ---------------------------------------------------------------------------

def sample_gauss_points(rng: np.random.Generator, size: int) -> np.ndarray:
    """Inverse-CDF draws from the Gauss measure: 2**u - 1."""
    return np.exp2(rng.random(size)) - 1.0


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def float_digits(x: np.ndarray, n: int) -> tuple[np.ndarray, int]:
    """First ``n`` digits of each x by iterating T in float64.

    Digits come back as float64 (exact integers up to 2**53). An iterate
    that leaves (0, 1) through rounding is reset to the golden-mean point
    and counted as an escape. Returns (digits of shape (len(x), n), escapes).
    """
    x = np.array(x, dtype=float)
    out = np.empty((x.size, n), dtype=np.float64)
    escapes = 0
    for j in range(n):
        bad = ~((x > 0.0) & (x < 1.0))
        if bad.any():
            escapes += int(bad.sum())
            x = np.where(bad, GOLDEN, x)
        inv = 1.0 / x
        a = np.floor(inv)
        out[:, j] = a
        x = inv - a
    return out, escapes


def chain_digits(y: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Advance the natural-extension digit chain.

    ``y`` holds the backward variables [0; a_n, ..., a_1] of each orbit and
    ``u`` a (orbits, steps) array of uniforms in [0, 1). Given y, the next
    digit has P(a = j | y) = (1+y) / ((j+y)(j+1+y)), so inverse-CDF sampling
    gives a = floor((1+y) u / (1-u)) + 1 and y' = 1/(a + y). The backward
    map contracts, so rounding errors do not grow along the orbit.
    Starting from y ~ Gauss measure gives the stationary digit process;
    y = 0 gives the digits of a Lebesgue-uniform point.
    Returns (float64 digits, final y).
    """
    y = np.array(y, dtype=float)
    out = np.empty(u.shape, dtype=np.float64)
    for j in range(u.shape[1]):
        v = u[:, j]
        a = np.floor((1.0 + y) * v / (1.0 - v)) + 1.0
        out[:, j] = a
        y = 1.0 / (a + y)
    return out, y


def chain_position(y: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Draw T^n x given the backward variable y: conditional CDF (1+y)t/(1+ty)."""
    return u / (1.0 + y - u * y)


# -- mixing -----------------------------------------------------------------------------

@dataclass
class MixingEstimate:
    gap: int
    joint: float
    mu_a: float
    mu_b: float
    deviation: float
    method: str
    stderr: float = 0.0
    flags: list[str] = field(default_factory=list)


def _cylinder_image(digits: Sequence[int], b: IntervalUnion) -> IntervalUnion:
    """{x in cylinder(digits) : T^n x in b} as an exact interval union."""
    u = b
    for d in reversed(digits):
        out = []
        for iv in u:
            lo = Fraction(iv.hi.denominator, d * iv.hi.denominator + iv.hi.numerator)
            hi = Fraction(iv.lo.denominator, d * iv.lo.denominator + iv.lo.numerator)
            out.append(Interval(lo, hi, iv.hi_closed, iv.lo_closed))
        u = IntervalUnion(out)
    return u


def cylinder_measure(digits: Sequence[int]) -> float:
    """mu({a_1 = d_1, ..., a_n = d_n})."""
    return _cylinder_image(digits, IntervalUnion.full()).gauss_measure()


def mixing_eta_estimate(
    cylinder_digits: Sequence[int],
    B: IntervalUnion,
    gap: int,
    method: str = "auto",
    samples: int = 10**6,
    rng: np.random.Generator | None = None,
) -> MixingEstimate:
    """|mu(A ∩ T^{-n-gap} B) / (mu(A) mu(B)) - 1| for the cylinder A = {a_1..a_n = digits}.

    ``method``: ``exact`` (gap 0 only: the event is an interval union with
    rational endpoints), ``transfer`` (deterministic pushforward of the
    density through n + gap Gauss-map steps), ``mc`` (Monte Carlo through
    the digit chain), ``auto`` (exact for gap 0, transfer otherwise).
    """
    digits = list(cylinder_digits)
    if any(d < 1 for d in digits):
        raise ValueError("digits must be >= 1")
    if gap < 0:
        raise ValueError("gap must be >= 0")
    mu_b = B.gauss_measure()
    if mu_b <= 0:
        raise NullEvent("B has measure zero")
    mu_a = cylinder_measure(digits)
    if method == "auto":
        method = "exact" if gap == 0 else "transfer"

    if method == "exact":
        if gap != 0:
            raise ValueError("the exact route needs gap 0; T^{-gap} has infinitely many branches")
        joint = _cylinder_image(digits, B).gauss_measure()
        return MixingEstimate(gap, joint, mu_a, mu_b, abs(joint / (mu_a * mu_b) - 1), "exact")

    if method == "transfer":
        rho = gauss_density()
        for d in digits:
            rho = transfer(rho, DigitRange(d, d))
        # iterate only the mean-zero part so the error scales with the deviation
        f = gauss_density()
        centred = Density(rho.coef - mu_a * _padded(f.coef, rho.coef.size))
        for _ in range(gap):
            centred = transfer(centred)
        excess = centred.integral_over(B)
        joint = mu_a * mu_b + excess
        return MixingEstimate(gap, joint, mu_a, mu_b, abs(excess / (mu_a * mu_b)), "transfer")

    if method == "mc":
        rng = np.random.default_rng() if rng is None else rng
        joint, se = _mc_joint(digits, B, gap, samples, rng)
        dev = abs(joint / (mu_a * mu_b) - 1)
        return MixingEstimate(gap, joint, mu_a, mu_b, dev, "mc", se / (mu_a * mu_b))
    raise ValueError(f"unknown method {method!r}")


def _padded(c: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size)
    out[: min(size, c.size)] = c[:size]
    return out


def _mc_joint(digits, B, gap, samples, rng, block=1 << 16):
    n = len(digits)
    steps = n + gap
    want = np.asarray(digits, dtype=np.int64)
    lo = np.array([float(iv.lo) for iv in B])
    hi = np.array([float(iv.hi) for iv in B])
    hits = 0
    done = 0
    while done < samples:
        size = min(block, samples - done)
        y0 = sample_gauss_points(rng, size)
        a, y = chain_digits(y0, rng.random((size, steps)))
        pos = chain_position(y, rng.random(size))
        in_a = np.all(a[:, :n] == want, axis=1) if n else np.ones(size, bool)
        in_b = np.any((pos[:, None] >= lo) & (pos[:, None] <= hi), axis=1)
        hits += int(np.count_nonzero(in_a & in_b))
        done += size
    p = hits / samples
    return p, math.sqrt(p * (1 - p) / samples)


def fit_mixing_rate(gaps: Sequence[int], deviations: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit deviation ~ c * lam**sqrt(gap); returns (c, lam)."""
    g = np.sqrt(np.asarray(gaps, dtype=float))
    d = np.log(np.asarray(deviations, dtype=float))
    slope, icept = np.polyfit(g, d, 1)
    return float(math.exp(icept)), float(math.exp(slope))
