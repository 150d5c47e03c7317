"""Product systems: one fresh i.i.d. coordinate per time step, B_n = {x[0] in A_n}.

Everything is in closed form here because distinct coordinates are
independent, which makes this system the ground truth for the analysis
routines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapExceeded
from .schedules import TargetSchedule

DEFAULT_CAP = 10**7


@dataclass(frozen=True)
class ProductSystem:
    schedule: TargetSchedule

    def measure(self, m: int) -> float:
        return self.schedule.measure(m)

    def measure_table(self, m_max: int) -> np.ndarray:
        mu = self.schedule.measures(m_max)
        if np.any(np.diff(mu) > 0):
            raise ValueError("target measures must be non-increasing")
        return mu


def product_exact_nonhit(n: int, m: int, s: ProductSystem | TargetSchedule) -> float:
    """mu(E_{n,m}) = (1 - mu(B_m))^n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    mu = s.measure(m)
    if mu >= 1.0:
        return 0.0 if n > 0 else 1.0
    return math.exp(n * math.log1p(-mu))


def product_exact_nonhit_fraction(n: int, mu: Fraction) -> Fraction:
    return (1 - Fraction(mu)) ** n


def levels_from_uniforms(u: np.ndarray, mu_table: np.ndarray) -> np.ndarray:
    """l(n) = max{l : u_n < mu(B_l)} (0 if none), by binary search in the non-increasing table."""
    return np.searchsorted(-mu_table, -u, side="left")


def hits_from_levels(levels: np.ndarray) -> np.ndarray:
    """h[m] = 1 iff max_{n <= m} l(n) >= m, along the last axis (index 0 is m = 1)."""
    best = np.maximum.accumulate(levels, axis=-1)
    return best >= np.arange(1, levels.shape[-1] + 1)


def product_sample_orbit_hits(
    s: ProductSystem | TargetSchedule,
    horizon: int,
    rng: np.random.Generator,
    cap: int = DEFAULT_CAP,
) -> np.ndarray:
    """Hit record h[1..horizon] of one random orbit, returned as a bool array (index 0 is m = 1)."""
    if horizon > cap:
        raise CapExceeded(f"horizon {horizon} exceeds cap {cap}")
    sched = s.schedule if isinstance(s, ProductSystem) else s
    mu = sched.measures(horizon)
    u = rng.random(horizon)
    return hits_from_levels(levels_from_uniforms(u, mu))


def pair_nonhit(s: ProductSystem | TargetSchedule, ms: int, mt: int) -> float:
    """mu(E_{ms} ∩ E_{mt}) for ms <= mt, using nestedness B_mt ⊂ B_ms:
    times 1..ms avoid B_ms, times ms+1..mt avoid B_mt."""
    if ms > mt:
        ms, mt = mt, ms
    a, b = s.measure(ms), s.measure(mt)
    return math.exp(ms * math.log1p(-a) + (mt - ms) * math.log1p(-b)) if a < 1 and b < 1 else 0.0
