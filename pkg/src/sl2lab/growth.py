"""Product-set growth, bounded generation, and congruence coverage searches.

Group sets are deduplicated packed-code arrays over a fixed pair modulus;
the expensive searches (incremental powering, divisor sweeps) keep only a
frontier layer plus the accumulated union, trading recompute for memory.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .factored import FactoredModulus, divides, exact_divisors, frac_power, radical
from .packed import (
    PairContext,
    congruence_subgroup_codes,
    full_pair_codes,
    isin_sorted,
    mul_codes,
)
from .sl2 import IntPair, PairElement, reduce_pair

SET_CAP = 10_000_000


@dataclass(frozen=True)
class GroupSet:
    """A finite subset of SL2(Z/q1) x SL2(Z/q2) in canonical packed form."""

    q1: FactoredModulus
    q2: FactoredModulus
    codes: np.ndarray  # sorted, deduplicated int64

    def __post_init__(self):
        if self.codes.size and np.any(np.diff(self.codes) <= 0):
            raise ValueError("codes must be sorted and deduplicated")

    @property
    def ctx(self) -> PairContext:
        return PairContext(self.q1.value, self.q2.value)

    def __len__(self) -> int:
        return int(self.codes.size)

    def contains(self, other: "GroupSet") -> bool:
        if (self.q1, self.q2) != (other.q1, other.q2):
            raise ValueError("modulus mismatch")
        return bool(np.all(isin_sorted(other.codes, self.codes)))

    def union(self, other: "GroupSet") -> "GroupSet":
        return GroupSet(self.q1, self.q2, np.union1d(self.codes, other.codes))

    def elements(self) -> list[PairElement]:
        return [self.ctx.decode_element(int(c), self.q1, self.q2) for c in self.codes]

    @staticmethod
    def from_elements(
        q1: FactoredModulus, q2: FactoredModulus, elements: Sequence[PairElement]
    ) -> "GroupSet":
        ctx = PairContext(q1.value, q2.value)
        codes = np.unique(
            np.array([ctx.encode_element(x) for x in elements], dtype=np.int64)
        )
        return GroupSet(q1, q2, codes)

    @staticmethod
    def from_intpairs(
        q1: FactoredModulus, q2: FactoredModulus, gens: Sequence[IntPair]
    ) -> "GroupSet":
        return GroupSet.from_elements(q1, q2, [reduce_pair(g, q1, q2) for g in gens])

    @staticmethod
    def full_group(q1: FactoredModulus, q2: FactoredModulus) -> "GroupSet":
        return GroupSet(q1, q2, full_pair_codes(q1.value, q2.value))

    def reduce_to(self, q1: FactoredModulus, q2: FactoredModulus) -> "GroupSet":
        if not (divides(q1, self.q1) and divides(q2, self.q2)):
            raise ValueError("target moduli must divide the current moduli")
        tgt = PairContext(q1.value, q2.value)
        return GroupSet(q1, q2, np.unique(self.ctx.reduce_codes(self.codes, tgt)))

    def project(self, side: int) -> "GroupSet":
        """P_1 or P_2 as a single-factor set (modulus pair (q_side, 1))."""
        from .factored import ONE

        digits = self.ctx.decode(self.codes)
        if side == 1:
            q = self.q1
            part = digits[:4]
        elif side == 2:
            q = self.q2
            part = digits[4:]
        else:
            raise ValueError("side must be 1 or 2")
        tgt = PairContext(q.value, 1)
        z = np.zeros_like(part[0])
        codes = np.unique(tgt.encode(list(part) + [z, z, z, z]))
        return GroupSet(q, ONE, codes)

    def inverse_set(self) -> "GroupSet":
        return GroupSet(self.q1, self.q2, np.sort(self.ctx.inv(self.codes)))


def product_set(
    a: GroupSet, b: GroupSet, cap: int = SET_CAP, work_cap: int = 200_000_000
) -> GroupSet:
    """{x*y : x in a, y in b}, deduplicated."""
    if (a.q1, a.q2) != (b.q1, b.q2):
        raise ValueError("modulus mismatch")
    order = a.ctx.order
    if len(a) + len(b) > order:
        # pigeonhole: A meets g B^{-1} for every g, so the product is everything
        if order > cap:
            raise ValueError(f"product set size {order} exceeds cap {cap}")
        return GroupSet.full_group(a.q1, a.q2)
    if len(a) * len(b) > work_cap:
        raise ValueError(f"product needs {len(a) * len(b)} multiplications > {work_cap}")
    codes = mul_codes(a.ctx, a.codes, b.codes)
    if codes.size > cap:
        raise ValueError(f"product set size {codes.size} exceeds cap {cap}")
    return GroupSet(a.q1, a.q2, codes)


@dataclass
class GrowthReport:
    size: int
    size_triple: int
    exponent: float  # log|AAA| / log|A|; NaN when |A| = 1
    delta: Optional[float] = None
    grows: Optional[bool] = None
    trajectory: list[int] = field(default_factory=list)


def tripling(a: GroupSet, delta: Optional[float] = None, cap: int = SET_CAP) -> GrowthReport:
    """Exact |A*A*A| and the tripling exponent, with an optional growth flag."""
    aa = product_set(a, a, cap)
    aaa = product_set(aa, a, cap)
    n, n3 = len(a), len(aaa)
    exponent = math.nan if n <= 1 else math.log(n3) / math.log(n)
    grows = None
    if delta is not None and n > 1:
        grows = n3 > n ** (1 + delta)
    return GrowthReport(n, n3, exponent, delta, grows, trajectory=[n, len(aa), n3])


def power_trajectory(a: GroupSet, l_max: int, cap: int = SET_CAP) -> list[int]:
    """|A^l| for l = 1..l_max, by incremental frontier powering."""
    sizes = [len(a)]
    cur = a
    for _ in range(l_max - 1):
        cur = product_set(cur, a, cap)
        sizes.append(len(cur))
    return sizes


def triple_product_chain_holds(sizes: Sequence[int]) -> bool:
    """|A^l| <= (|A^3| / |A|)^{l-2} |A| for every l >= 3 in the trajectory."""
    if len(sizes) < 3:
        return True
    n, n3 = sizes[0], sizes[2]
    for l in range(3, len(sizes) + 1):
        if sizes[l - 1] > (n3 / n) ** (l - 2) * n + 1e-9:
            return False
    return True


def covers_congruence(
    x: GroupSet, q1p: FactoredModulus, q2p: FactoredModulus, cap: int = SET_CAP
) -> bool:
    """True iff x contains the full congruence subgroup pair at (q1p, q2p)."""
    if not (divides(q1p, x.q1) and divides(q2p, x.q2)):
        raise ValueError("q1p, q2p must divide the ambient moduli")
    order1 = _kernel_order(x.q1, q1p)
    order2 = _kernel_order(x.q2, q2p)
    if order1 * order2 > cap:
        raise ValueError(f"congruence subgroup size {order1 * order2} exceeds cap {cap}")
    sub = congruence_subgroup_codes(x.q1.value, x.q2.value, q1p.value, q2p.value)
    return bool(np.all(isin_sorted(sub, x.codes)))


def _kernel_order(q: FactoredModulus, d: FactoredModulus) -> int:
    from .sl2 import group_order

    return group_order(q) // group_order(d)


@dataclass
class BoundedGenerationResult:
    found: bool
    k: Optional[int] = None
    q1p: Optional[FactoredModulus] = None
    q2p: Optional[FactoredModulus] = None
    sizes: list[int] = field(default_factory=list)


def _divisor_pairs(q1: FactoredModulus, q2: FactoredModulus):
    # the fully trivial pair (q1, q2) asserts only {1} <= A^k; exclude it
    pairs = [
        (d1, d2)
        for d1 in exact_divisors(q1)
        for d2 in exact_divisors(q2)
        if not (d1 == q1 and d2 == q2)
    ]
    pairs.sort(key=lambda p: (p[0].value * p[1].value, p[0].value))
    return pairs


def bounded_generation_search(
    a: GroupSet,
    k_max: int = 12,
    delta: float = 0.04,
    cap: int = SET_CAP,
) -> BoundedGenerationResult:
    """Smallest k <= k_max and strongest exact-divisor pair with A^k covering
    the congruence subgroup at (q1p, q2p); incremental powering.

    The size hypothesis |A| > (q1 q2)^{3 - delta} is advisory: violations
    warn and the search proceeds.
    """
    qq = a.q1.value * a.q2.value
    if qq > 1 and len(a) <= qq ** (3 - delta):
        warnings.warn(
            f"|A| = {len(a)} is below the size hypothesis (q1 q2)^(3-delta) = {qq ** (3 - delta):.1f}",
            stacklevel=2,
        )
    pairs = _divisor_pairs(a.q1, a.q2)
    pairs = [p for p in pairs if _kernel_order(a.q1, p[0]) * _kernel_order(a.q2, p[1]) <= cap]
    # strongest pair first (ascending (q1p*q2p, q1p)), smallest power within;
    # powers are materialized incrementally and shared across pair attempts
    powers = [a]
    sizes = [len(a)]
    stabilized = False
    for d1, d2 in pairs:
        for k in range(1, k_max + 1):
            while len(powers) < k and not stabilized:
                nxt = product_set(powers[-1], a, cap)
                if nxt.codes.size == powers[-1].codes.size and np.array_equal(
                    nxt.codes, powers[-1].codes
                ):
                    stabilized = True
                    break
                powers.append(nxt)
                sizes.append(len(nxt))
            power = powers[min(k, len(powers)) - 1]
            if covers_congruence(power, d1, d2, cap):
                return BoundedGenerationResult(True, min(k, len(powers)), d1, d2, sizes)
            if stabilized and k >= len(powers):
                break
    return BoundedGenerationResult(False, sizes=sizes)


def kernel_filter(a: GroupSet, q_l: FactoredModulus, cap: int = SET_CAP) -> GroupSet:
    """(A*A) intersected with the congruence kernel at the radical of q_l,
    componentwise on the pair."""
    q0 = radical(q_l)
    if not (divides(q0, a.q1) and divides(q0, a.q2)):
        raise ValueError(f"radical {q0.value} must divide both moduli")
    aa = product_set(a, a, cap)
    if q0.is_one():
        return aa
    digits = aa.ctx.decode(aa.codes)
    d = q0.value
    keep = np.ones(aa.codes.size, dtype=bool)
    for idx, arr in enumerate(digits):
        target = 1 if idx in (0, 3, 4, 7) else 0
        keep &= arr % d == target
    return GroupSet(a.q1, a.q2, aa.codes[keep])


def congruence_coverage_search(
    a0: GroupSet,
    side: int,
    q_l: FactoredModulus,
    c_max: int = 12,
    rho_grid: Sequence = (1, 0.75, 0.5),
    cap: int = SET_CAP,
) -> list[dict]:
    """For each exact divisor q' of q_l (largest first) and each rho, the
    smallest C <= c_max with P_side(A0)^C containing Lambda(q'^rho)/Lambda(q')."""
    from fractions import Fraction
    from .factored import ONE

    proj = a0.project(side)
    rows = []
    for qp in sorted(exact_divisors(q_l), key=lambda d: -d.value):
        if qp.is_one():
            continue
        base = proj.reduce_to(qp, ONE)
        for rho in rho_grid:
            depth = frac_power(qp, Fraction(rho).limit_denominator(1000))
            if _kernel_order(qp, depth) > cap:
                continue
            power = base
            found_c = None
            for c in range(1, c_max + 1):
                if c > 1:
                    power = product_set(power, base, cap)
                if covers_congruence(power, depth, ONE, cap):
                    found_c = c
                    break
            rows.append(
                {
                    "q_prime": qp.value,
                    "rho": float(rho),
                    "depth_modulus": depth.value,
                    "C": found_c,
                }
            )
    return rows
