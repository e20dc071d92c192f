"""Vectorized pair-group engine: elements packed into int64 radix codes.

An element ((a1,b1),(c1,d1)) x ((a2,b2),(c2,d2)) of SL2(Z/q1) x SL2(Z/q2)
is packed as a single int64 in radix (q1,q1,q1,q1,q2,q2,q2,q2).  Group sets
are sorted code arrays; multiplication by a fixed element, inversion and
membership are all numpy-vectorized.  Single-factor groups are the q2 = 1
special case.  Safe for (q1*q2)**4 < 2**63, far beyond desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

from .factored import FactoredModulus
from .sl2 import PairElement, SL2Residue, _ext_gcd, group_order


@dataclass(frozen=True)
class PairContext:
    """Packing context for the pair modulus (q1, q2)."""

    q1: int
    q2: int

    def __post_init__(self):
        if self.q1 < 1 or self.q2 < 1:
            raise ValueError("moduli must be >= 1")
        if (self.q1 * self.q2) ** 4 >= 2**63:
            raise ValueError(f"moduli ({self.q1}, {self.q2}) too large to pack")

    @property
    def order(self) -> int:
        return group_order(FactoredModulus.of(self.q1)) * group_order(
            FactoredModulus.of(self.q2)
        )

    def encode(self, digits) -> np.ndarray:
        """Pack 8 digit arrays (a1,b1,c1,d1,a2,b2,c2,d2) into codes."""
        a1, b1, c1, d1, a2, b2, c2, d2 = (np.asarray(x, dtype=np.int64) for x in digits)
        left = ((a1 * self.q1 + b1) * self.q1 + c1) * self.q1 + d1
        right = ((a2 * self.q2 + b2) * self.q2 + c2) * self.q2 + d2
        return left * self.q2**4 + right

    def decode(self, codes: np.ndarray) -> tuple[np.ndarray, ...]:
        codes = np.asarray(codes, dtype=np.int64)
        right, out = codes % self.q2**4, []
        left = codes // self.q2**4
        for base, chunk in ((self.q2, right), (self.q1, left)):
            for _ in range(4):
                out.append(chunk % base)
                chunk = chunk // base
        d2, c2, b2, a2, d1, c1, b1, a1 = out
        return a1, b1, c1, d1, a2, b2, c2, d2

    def identity_code(self) -> int:
        one1 = 1 % self.q1
        one2 = 1 % self.q2
        return int(self.encode([one1, 0, 0, one1, one2, 0, 0, one2])[()])

    def encode_element(self, x: PairElement) -> int:
        e = x.left.entries + x.right.entries
        return int(self.encode([np.int64(v) for v in e])[()])

    def decode_element(
        self, code: int, q1: FactoredModulus, q2: FactoredModulus
    ) -> PairElement:
        vals = [int(v[0]) for v in self.decode(np.array([code], dtype=np.int64))]
        return PairElement(SL2Residue(q1, *vals[:4]), SL2Residue(q2, *vals[4:]))

    def mul_const(self, codes: np.ndarray, g: tuple[int, ...], side: str) -> np.ndarray:
        """Codes of g*x (side='left') or x*g (side='right') for all packed x."""
        a1, b1, c1, d1, a2, b2, c2, d2 = self.decode(codes)
        ga1, gb1, gc1, gd1, ga2, gb2, gc2, gd2 = (int(v) for v in g)
        if side == "left":
            na1 = (ga1 * a1 + gb1 * c1) % self.q1
            nb1 = (ga1 * b1 + gb1 * d1) % self.q1
            nc1 = (gc1 * a1 + gd1 * c1) % self.q1
            nd1 = (gc1 * b1 + gd1 * d1) % self.q1
            na2 = (ga2 * a2 + gb2 * c2) % self.q2
            nb2 = (ga2 * b2 + gb2 * d2) % self.q2
            nc2 = (gc2 * a2 + gd2 * c2) % self.q2
            nd2 = (gc2 * b2 + gd2 * d2) % self.q2
        elif side == "right":
            na1 = (a1 * ga1 + b1 * gc1) % self.q1
            nb1 = (a1 * gb1 + b1 * gd1) % self.q1
            nc1 = (c1 * ga1 + d1 * gc1) % self.q1
            nd1 = (c1 * gb1 + d1 * gd1) % self.q1
            na2 = (a2 * ga2 + b2 * gc2) % self.q2
            nb2 = (a2 * gb2 + b2 * gd2) % self.q2
            nc2 = (c2 * ga2 + d2 * gc2) % self.q2
            nd2 = (c2 * gb2 + d2 * gd2) % self.q2
        else:
            raise ValueError("side must be 'left' or 'right'")
        return self.encode([na1, nb1, nc1, nd1, na2, nb2, nc2, nd2])

    def inv(self, codes: np.ndarray) -> np.ndarray:
        a1, b1, c1, d1, a2, b2, c2, d2 = self.decode(codes)
        return self.encode(
            [
                d1,
                (-b1) % self.q1,
                (-c1) % self.q1,
                a1,
                d2,
                (-b2) % self.q2,
                (-c2) % self.q2,
                a2,
            ]
        )

    def element_tuple(self, code: int) -> tuple[int, ...]:
        return tuple(int(v[0]) for v in self.decode(np.array([code], dtype=np.int64)))

    def reduce_codes(self, codes: np.ndarray, target: "PairContext") -> np.ndarray:
        """Reduce packed elements to divisor moduli (t.q1 | q1, t.q2 | q2)."""
        if self.q1 % target.q1 or self.q2 % target.q2:
            raise ValueError("target moduli must divide the current moduli")
        digits = self.decode(codes)
        red = [d % target.q1 for d in digits[:4]] + [d % target.q2 for d in digits[4:]]
        return target.encode(red)


def isin_sorted(values: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Boolean membership of ``values`` in the sorted code array ``table``."""
    if table.size == 0:
        return np.zeros(values.shape, dtype=bool)
    idx = np.searchsorted(table, values)
    idx = np.minimum(idx, table.size - 1)
    return table[idx] == values


def index_sorted(values: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Indices of ``values`` in sorted ``table``; raises if any is missing."""
    idx = np.searchsorted(table, values)
    if np.any(idx >= table.size) or np.any(table[np.minimum(idx, table.size - 1)] != values):
        raise KeyError("element not present in the enumerated set")
    return idx


def sl2_codes(q: int) -> np.ndarray:
    """Sorted codes of the full SL2(Z/q), packed in the (q, 1) context.

    Unimodular rows (a, b) are completed via Bezout; the solution set over
    (c, d) is the coset (c0 + t*a, d0 + t*b).
    """
    ctx = PairContext(q, 1)
    if q == 1:
        return np.array([ctx.identity_code()], dtype=np.int64)
    rows = []
    t = np.arange(q, dtype=np.int64)
    for a in range(q):
        for b in range(q):
            if gcd(gcd(a, b), q) != 1:
                continue
            g0, u, v = _ext_gcd(a, b)
            inv_g0 = pow(g0, -1, q)
            d0 = u * inv_g0 % q
            c0 = -v * inv_g0 % q
            c = (c0 + t * a) % q
            d = (d0 + t * b) % q
            rows.append(
                ctx.encode(
                    [
                        np.full(q, a, dtype=np.int64),
                        np.full(q, b, dtype=np.int64),
                        c,
                        d,
                        np.zeros(q, dtype=np.int64),
                        np.zeros(q, dtype=np.int64),
                        np.zeros(q, dtype=np.int64),
                        np.zeros(q, dtype=np.int64),
                    ]
                )
            )
    out = np.sort(np.concatenate(rows))
    return out


def full_pair_codes(q1: int, q2: int) -> np.ndarray:
    """Sorted codes of the full product group SL2(Z/q1) x SL2(Z/q2)."""
    left = sl2_codes(q1)  # packed with q2' = 1, so codes are the left radix part
    right = sl2_codes(q2)
    codes = (left[:, None] * np.int64(q2**4) + right[None, :]).ravel()
    return np.sort(codes)


def generated_subgroup(
    ctx: PairContext, gens: list[tuple[int, ...]], cap: int = 10_000_000
) -> np.ndarray:
    """Sorted codes of the subgroup generated by ``gens`` (8-digit tuples).

    Breadth-first closure under right multiplication; symmetric generator
    lists make this the full generated subgroup.
    """
    visited = np.array([ctx.identity_code()], dtype=np.int64)
    frontier = visited
    while frontier.size:
        nxt = np.unique(
            np.concatenate([ctx.mul_const(frontier, g, "right") for g in gens])
        )
        nxt = nxt[~isin_sorted(nxt, visited)]
        if visited.size + nxt.size > cap:
            raise ValueError(f"generated subgroup exceeds cap {cap}")
        visited = np.sort(np.concatenate([visited, nxt]))
        frontier = nxt
    return visited


def congruence_kernel_codes(q: int, d: int) -> np.ndarray:
    """Sorted codes (context (q, 1)) of {x in SL2(Z/q): x = 1 mod d}."""
    ctx = PairContext(q, 1)
    codes = sl2_codes(q)
    if d == 1:
        return codes
    a1, b1, c1, d1 = ctx.decode(codes)[:4]
    keep = (a1 % d == 1 % d) & (b1 % d == 0) & (c1 % d == 0) & (d1 % d == 1 % d)
    return codes[keep]


def congruence_subgroup_codes(q1: int, q2: int, d1: int, d2: int) -> np.ndarray:
    """Sorted codes of Lambda(d1)/Lambda(q1) x Lambda(d2)/Lambda(q2)."""
    left = congruence_kernel_codes(q1, d1)
    right = congruence_kernel_codes(q2, d2)
    return np.sort((left[:, None] * np.int64(q2**4) + right[None, :]).ravel())


def mul_codes(
    ctx: PairContext, a: np.ndarray, b: np.ndarray, flush: int = 8_000_000
) -> np.ndarray:
    """All pairwise products a_i * b_j, deduplicated and sorted."""
    if a.size == 0 or b.size == 0:
        return np.array([], dtype=np.int64)
    acc = None
    chunks: list[np.ndarray] = []
    buffered = 0
    for code in b:
        chunks.append(ctx.mul_const(a, ctx.element_tuple(int(code)), "right"))
        buffered += a.size
        if buffered >= flush:
            parts = chunks if acc is None else chunks + [acc]
            acc = np.unique(np.concatenate(parts))
            chunks, buffered = [], 0
    parts = chunks if acc is None else chunks + [acc]
    return np.unique(np.concatenate(parts))
