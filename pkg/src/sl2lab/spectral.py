"""The Cayley averaging operator, its second eigenvalue, and Cheeger constants.

The operator acts matrix-free through per-generator permutation arrays over
an enumerated group; the dense oracle route goes through the in-repo
symmetric eigensolver in :mod:`sl2lab.eigen`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .eigen import lanczos_extreme, symmetric_eigenvalues
from .factored import FactoredModulus
from .packed import PairContext, generated_subgroup, index_sorted
from .sl2 import IntPair, symmetrize

DENSE_THRESHOLD = 2048
GROUP_CAP = 10_000_000


def intpair_digits(g: IntPair, q1: int, q2: int) -> tuple[int, ...]:
    """Reduce an integral pair to the 8-digit tuple of a PairContext."""
    from .sl2 import reduce_pair

    p = reduce_pair(g, FactoredModulus.of(q1), FactoredModulus.of(q2))
    return p.left.entries + p.right.entries


@dataclass
class CayleyOperator:
    """Normalized adjacency operator of Cay(G, S): (Tv)(x) = mean_s v(s^{-1} x)."""

    ctx: PairContext
    codes: np.ndarray  # sorted element codes; index space of the operator
    gens: list[tuple[int, ...]]  # symmetric generator multiset, 8-digit tuples
    perms: list[np.ndarray]  # perms[s][i] = index of gens[s]^{-1} * x_i

    @property
    def n(self) -> int:
        return int(self.codes.size)

    @property
    def degree(self) -> int:
        return len(self.gens)

    @staticmethod
    def build(
        ctx: PairContext,
        gens: Sequence[tuple[int, ...]],
        codes: Optional[np.ndarray] = None,
        cap: int = GROUP_CAP,
    ) -> "CayleyOperator":
        """Construct over the given vertex codes, or over <gens> if codes is None.

        The generator multiset is used as given (duplicates kept); it must be
        closed under inverse for the operator to be self-adjoint.
        """
        gens = [tuple(int(v) for v in g) for g in gens]
        if codes is None:
            codes = generated_subgroup(ctx, gens, cap=cap)
        perms = []
        for g in gens:
            g_inv = ctx.element_tuple(int(ctx.inv(ctx.encode([np.int64(v) for v in g]))[()]))
            moved = ctx.mul_const(codes, g_inv, "left")
            perms.append(index_sorted(moved, codes).astype(np.int64))
        return CayleyOperator(ctx, codes, gens, perms)

    def apply(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.n,):
            raise ValueError(f"vector length {v.shape} does not match N={self.n}")
        out = np.zeros(self.n)
        for perm in self.perms:
            out += v[perm]
        out /= self.degree
        return out

    def dense_matrix(self) -> np.ndarray:
        """The N x N operator matrix; oracle use only (N <= DENSE_THRESHOLD)."""
        if self.n > DENSE_THRESHOLD:
            raise ValueError(f"N={self.n} too large for the dense route")
        m = np.zeros((self.n, self.n))
        rows = np.arange(self.n)
        for perm in self.perms:
            np.add.at(m, (rows, perm), 1.0 / self.degree)
        return m

    def neighbor_table(self) -> list[list[int]]:
        """neighbors[i] = indices of s * x_i over the generator multiset."""
        out = [[] for _ in range(self.n)]
        for g in self.gens:
            moved = index_sorted(self.ctx.mul_const(self.codes, g, "left"), self.codes)
            for i, j in enumerate(moved):
                out[i].append(int(j))
        return out


def cayley_for_sl2_pair(
    gens: Sequence[IntPair],
    q1: int,
    q2: int,
    generated: bool = True,
    cap: int = GROUP_CAP,
) -> CayleyOperator:
    """Cayley operator for integral pair generators reduced mod (q1, q2).

    ``generated=True`` takes the vertex set to be the subgroup the reduced
    generators actually generate (the graph is then connected by construction);
    otherwise the full product group is enumerated.
    """
    gens = symmetrize(list(gens))
    ctx = PairContext(q1, q2)
    digit_gens = [intpair_digits(g, q1, q2) for g in gens]
    if generated:
        return CayleyOperator.build(ctx, digit_gens, cap=cap)
    from .packed import full_pair_codes

    if ctx.order > cap:
        raise ValueError(f"group order {ctx.order} exceeds cap {cap}")
    return CayleyOperator.build(ctx, digit_gens, codes=full_pair_codes(q1, q2))


@dataclass
class SpectralReport:
    lambda2: float
    iterations: int
    residual: float
    cheeger_lower: float
    cheeger_upper: float
    exact_cheeger: Optional[Fraction] = None
    converged: bool = True
    method: str = "iterative"
    n: int = 0
    degree: int = 0

    def __post_init__(self):
        if self.cheeger_lower > self.cheeger_upper + 1e-12:
            raise ValueError("cheeger bounds are inverted")


def cheeger_bounds(lambda2: float, degree: int) -> tuple[float, float]:
    """Discrete Cheeger inequalities for a degree-regular multigraph."""
    if not -1 - 1e-9 <= lambda2 <= 1 + 1e-9:
        raise ValueError(f"lambda2={lambda2} outside [-1, 1]")
    gap = max(0.0, 1.0 - lambda2)
    return degree * gap / 2.0, degree * float(np.sqrt(2.0 * gap))


def dense_lambda2(op: CayleyOperator) -> float:
    """Second eigenvalue via the in-repo dense eigensolver (oracle route)."""
    vals = symmetric_eigenvalues(op.dense_matrix())
    # remove one copy of the trivial eigenvalue (the constant eigenvector)
    drop = int(np.argmin(np.abs(vals - 1.0)))
    rest = np.delete(vals, drop)
    return float(rest.max())


def lambda2(
    op: CayleyOperator,
    tol: float = 1e-10,
    max_iter: int = 4000,
    seed: int = 0,
    method: str = "auto",
) -> SpectralReport:
    """Largest eigenvalue of T on mean-zero functions, with Cheeger bounds.

    method='auto' uses the dense solver for N <= DENSE_THRESHOLD and Lanczos
    above; 'iterative' forces the matrix-free route (the path the dense
    oracle certifies), 'dense' forces the oracle route.
    """
    if op.n < 2:
        raise ValueError("lambda2 needs N >= 2")
    if method == "auto":
        method = "dense" if op.n <= DENSE_THRESHOLD else "iterative"
    if method == "dense":
        lam = dense_lambda2(op)
        iters, resid, conv = 0, 0.0, True
    elif method == "iterative":
        lam, iters, resid, conv, ritz = lanczos_extreme(
            op.apply, op.n, seed=seed, tol=tol, max_iter=max_iter
        )
        if ritz is not None:
            r = op.apply(ritz) - lam * ritz
            resid = float(np.sqrt(r @ r))
    else:
        raise ValueError(f"unknown method {method!r}")
    lam = min(1.0, max(-1.0, lam))
    lo, hi = cheeger_bounds(lam, op.degree)
    return SpectralReport(
        lambda2=lam,
        iterations=iters,
        residual=resid,
        cheeger_lower=lo,
        cheeger_upper=hi,
        converged=conv,
        method=method,
        n=op.n,
        degree=op.degree,
    )


def cheeger_exact(op: CayleyOperator, max_n: int = 22) -> Fraction:
    """Exact min |boundary A| / |A| over 0 < |A| <= N/2, edges with multiplicity.

    Exhaustive sweep over subsets containing vertex 0 (valid by vertex
    transitivity of Cayley graphs), Gray-code incremental boundary updates.
    """
    n = op.n
    if n > max_n:
        raise ValueError(f"N={n} exceeds the exhaustive cap {max_n}")
    if n < 2:
        raise ValueError("need at least two vertices")
    nb = op.neighbor_table()
    in_a = [False] * n
    in_a[0] = True
    size = 1
    boundary = sum(1 for u in nb[0] if u != 0)
    best = Fraction(boundary, 1)

    def toggle(v: int):
        nonlocal size, boundary
        if not in_a[v]:
            delta = 0
            for u in nb[v]:
                if u == v:
                    continue
                delta += -1 if in_a[u] else 1
            boundary += delta
            in_a[v] = True
            size += 1
        else:
            in_a[v] = False
            size -= 1
            delta = 0
            for u in nb[v]:
                if u == v:
                    continue
                delta += -1 if in_a[u] else 1
            boundary -= delta

    total = 1 << (n - 1)
    for g in range(1, total):
        v = 1 + (g & -g).bit_length() - 1
        toggle(v)
        if 0 < size * 2 <= n:
            ratio = Fraction(boundary, size)
            if ratio < best:
                best = ratio
    return best


def gap_sweep(
    gens: Sequence[IntPair],
    moduli: Sequence[int],
    pair: bool = True,
    tol: float = 1e-8,
    seed: int = 0,
    cap: int = GROUP_CAP,
    method: str = "auto",
    exact_cheeger_max: int = 22,
) -> list[dict]:
    """lambda2 and Cheeger data per modulus; the table behind the CLI CSV."""
    rows = []
    for q in moduli:
        t0 = time.perf_counter()
        op = cayley_for_sl2_pair(gens, q, q if pair else 1, generated=True, cap=cap)
        rep = lambda2(op, tol=tol, seed=seed, method=method)
        exact = None
        if op.n <= exact_cheeger_max:
            exact = cheeger_exact(op)
        rows.append(
            {
                "q": q,
                "N": op.n,
                "degree": op.degree,
                "lambda2": rep.lambda2,
                "residual": rep.residual,
                "h_lower": rep.cheeger_lower,
                "h_upper": rep.cheeger_upper,
                "h_exact": exact,
                "seconds": time.perf_counter() - t0,
            }
        )
    return rows


def standard_dense_pair_generators() -> list[IntPair]:
    """The lab's stock Zariski-dense symmetric generator set.

    Left factor: the unipotents [[1,2],[0,1]], [[1,0],[2,1]].  Right factor:
    conjugates of them by two inequivalent elements, chosen so the pair group
    reduces onto the full product SL2(Z/q) x SL2(Z/q) at the odd primes
    (verified for q in {5, 7, 11, 13}).
    """
    from .sl2 import imat_inv, imat_mul

    g1 = ((1, 2), (0, 1))
    g2 = ((1, 0), (2, 1))

    def conj(c, g):
        return imat_mul(imat_mul(c, g), imat_inv(c))

    h1 = conj(((1, 0), (1, 1)), g1)
    h2 = conj(((1, 2), (2, 5)), g2)
    base = [(g1, h1), (g2, h2)]
    return base + [(imat_inv(a), imat_inv(b)) for a, b in base]


def unit_dense_pair_generators() -> list[IntPair]:
    """A Zariski-dense symmetric pair set with large 2-power reductions.

    The left factor generates all of SL2(Z); the right factor uses mixed
    words, so the pair group reduces onto the full product at 2, 3 and 5
    and onto large subgroups of the 2-power quotients (18432 of the 147456
    elements mod 8), where the stock set above collapses.
    """
    from .sl2 import imat_inv, imat_mul

    u1 = ((1, 1), (0, 1))
    u2 = ((1, 0), (1, 1))
    base = [(u1, imat_mul(u2, u1)), (u2, imat_mul(u1, imat_mul(u1, u2)))]
    return base + [(imat_inv(a), imat_inv(b)) for a, b in base]
