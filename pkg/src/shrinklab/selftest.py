"""Exhaustive small-instance checks of the exact engines against brute force."""

from __future__ import annotations

from fractions import Fraction

from .analysis import lacunary_mj
from .bernoulli import exact_nonhit, run_avoidance_count
from .gauss import exact_Etilde, preimage_restricted
from .intervals import IntervalUnion
from .oracles import brute_force_avoidance_counts, etilde_lebesgue_by_cylinders
from .product import product_exact_nonhit_fraction


def _bernoulli_counts():
    bad = [(n, r) for n in range(0, 15)
           for r, c in brute_force_avoidance_counts(n, 5).items() if c != run_avoidance_count(n, r)]
    return not bad, f"{len(bad)} mismatches for n <= 14, r <= 5"


def _bernoulli_nonhit():
    ok = exact_nonhit(1, 1) == Fraction(1, 2) and exact_nonhit(2, 2) == Fraction(5, 8)
    return ok, "hand values mu(E_1) for r=1 and mu(E_2) for r=2"


def _etilde_cylinders():
    bad = [(n, k) for n in range(1, 4) for k in range(2, 5)
           if exact_Etilde(n, k).lebesgue != etilde_lebesgue_by_cylinders(n, k)]
    return not bad, f"{len(bad)} mismatches for n <= 3, k <= 4"


def _etilde_hand():
    r = exact_Etilde(2, 2)
    pre = preimage_restricted(IntervalUnion.parse("(1/2,1]"), 2)
    ok = r.lebesgue == Fraction(1, 6) and pre == IntervalUnion.interval(Fraction(1, 2), Fraction(2, 3))
    return ok, "lambda(Etilde_2) = 1/6 for k = 2"


def _lacunary():
    vals = [lacunary_mj(2, j) for j in (2, 4, 6)]
    return vals == [2, 4, 6], f"m_2, m_4, m_6 = {vals}"


def _product():
    ok = product_exact_nonhit_fraction(3, Fraction(1, 2)) == Fraction(1, 8)
    return ok, "(1 - 1/2)^3 = 1/8"


CHECKS = {
    "bernoulli-brute-force": _bernoulli_counts,
    "bernoulli-hand-values": _bernoulli_nonhit,
    "gauss-cylinder-enumeration": _etilde_cylinders,
    "gauss-hand-values": _etilde_hand,
    "lacunary-prefix": _lacunary,
    "product-closed-form": _product,
}


def run_checks():
    for name, fn in CHECKS.items():
        ok, detail = fn()
        yield name, bool(ok), detail
