"""In-repo symmetric eigensolvers used as the dense spectral oracle.

The primary dense path is Householder tridiagonalization followed by
implicit-shift QL on the tridiagonal; a classical cyclic Jacobi sweep is
kept as an independent cross-check for small matrices.  No LAPACK calls
anywhere on the oracle path.
"""

from __future__ import annotations

import numpy as np


def tridiagonalize(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Householder reduction of a symmetric matrix to (diag, offdiag)."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return np.diag(A).copy(), np.zeros(0)
    e = np.zeros(n - 1)
    for k in range(n - 2):
        x = A[k + 1 :, k]
        nx = float(np.sqrt((x * x).sum()))
        if nx == 0.0:
            e[k] = 0.0
            continue
        alpha = -nx if x[0] >= 0 else nx
        v = x.copy()
        v[0] -= alpha
        vnorm2 = float((v * v).sum())
        if vnorm2 == 0.0:
            e[k] = alpha
            continue
        S = A[k + 1 :, k + 1 :]
        w = S @ v * (2.0 / vnorm2)
        w -= ((v @ w) / vnorm2) * v
        S -= np.outer(w, v)
        S -= np.outer(v, w)
        e[k] = alpha
    e[n - 2] = A[n - 1, n - 2]
    return np.diag(A).copy(), e


def tridiag_eigvals(d: np.ndarray, e: np.ndarray, max_iter: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL."""
    d = np.array(d, dtype=float)
    n = d.size
    ee = np.zeros(n)
    ee[: n - 1] = e
    eps = np.finfo(float).eps
    # absolute deflation floor: clustered zero eigenvalues make the relative
    # test unreachable; dropping |e| <= eps*|A| perturbs eigenvalues by <= n*eps*|A|
    floor = eps * max(np.abs(d).max(initial=0.0), np.abs(ee).max(initial=0.0), 1e-300)
    for l in range(n):
        for _ in range(max_iter):
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(ee[m]) <= max(eps * dd, floor):
                    break
                m += 1
            if m == l:
                break
            g = (d[l + 1] - d[l]) / (2.0 * ee[l])
            r = float(np.hypot(g, 1.0))
            g = d[m] - d[l] + ee[l] / (g + (r if g >= 0 else -r))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * ee[i]
                b = c * ee[i]
                r = float(np.hypot(f, g))
                ee[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    ee[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
            if not underflow:
                d[l] -= p
                ee[l] = g
                ee[m] = 0.0
        else:
            raise RuntimeError("QL iteration failed to converge")
    return np.sort(d)


def tridiag_eigh(d: np.ndarray, e: np.ndarray, max_iter: int = 100):
    """Eigenvalues and eigenvectors of a symmetric tridiagonal matrix (QL)."""
    d = np.array(d, dtype=float)
    n = d.size
    ee = np.zeros(n)
    ee[: n - 1] = e
    z = np.eye(n)
    eps = np.finfo(float).eps
    floor = eps * max(np.abs(d).max(initial=0.0), np.abs(ee).max(initial=0.0), 1e-300)
    for l in range(n):
        for _ in range(max_iter):
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(ee[m]) <= max(eps * dd, floor):
                    break
                m += 1
            if m == l:
                break
            g = (d[l + 1] - d[l]) / (2.0 * ee[l])
            r = float(np.hypot(g, 1.0))
            g = d[m] - d[l] + ee[l] / (g + (r if g >= 0 else -r))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * ee[i]
                b = c * ee[i]
                r = float(np.hypot(f, g))
                ee[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    ee[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                # accumulate the rotation into the eigenvector matrix
                col_i = z[:, i].copy()
                col_i1 = z[:, i + 1].copy()
                z[:, i + 1] = s * col_i + c * col_i1
                z[:, i] = c * col_i - s * col_i1
            if not underflow:
                d[l] -= p
                ee[l] = g
                ee[m] = 0.0
        else:
            raise RuntimeError("QL iteration failed to converge")
    order = np.argsort(d)
    return d[order], z[:, order]


def symmetric_eigenvalues(A: np.ndarray) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, sorted ascending."""
    d, e = tridiagonalize(A)
    return tridiag_eigvals(d, e)


def jacobi_eigenvalues(A: np.ndarray, tol: float = 1e-13, max_sweeps: int = 60) -> np.ndarray:
    """Cyclic Jacobi with threshold; independent cross-check for small N."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    for sweep in range(max_sweeps):
        off = float(np.sqrt(max(0.0, (A * A).sum() - (np.diag(A) ** 2).sum())))
        if off <= tol:
            break
        thresh = off / n if sweep < 3 else 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= thresh or apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + float(np.hypot(tau, 1.0)))
                c = 1.0 / float(np.hypot(t, 1.0))
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
    return np.sort(np.diag(A))


def lanczos_extreme(
    matvec,
    n: int,
    seed: int = 0,
    tol: float = 1e-10,
    max_iter: int = 2000,
    store_basis_budget: int = 30_000_000,
    deflate_constants: bool = True,
):
    """Largest (signed) eigenvalue of a symmetric operator on mean-zero vectors.

    Full reorthogonalization whenever the basis fits in ``store_basis_budget``
    floats; otherwise plain three-term Lanczos, which still resolves the
    extreme eigenvalue of gapped operators.  Deterministic for a fixed seed.

    Returns (value, iterations, residual, converged, ritz_vector_or_None).
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    v = rng.standard_normal(n)
    if deflate_constants:
        v -= v.mean()
    nv = float(np.sqrt(v @ v))
    if nv == 0.0:
        raise ValueError("degenerate start vector")
    v /= nv

    max_basis = min(max_iter, n - 1 if deflate_constants else n)
    keep_basis = n * max_basis <= store_basis_budget
    basis = [v.copy()] if keep_basis else None
    v_prev = np.zeros(n)
    alphas: list[float] = []
    betas: list[float] = []
    beta = 0.0
    best = (0.0, 0, float("inf"), False)
    check_every = 5

    for k in range(1, max_basis + 1):
        w = matvec(v)
        if deflate_constants:
            w -= w.mean()
        alpha = float(v @ w)
        alphas.append(alpha)
        w -= alpha * v + beta * v_prev
        if keep_basis:
            B = np.asarray(basis).T
            w -= B @ (B.T @ w)
            w -= B @ (B.T @ w)
        beta = float(np.sqrt(w @ w))
        if k % check_every == 0 or beta <= tol * 1e-3 or k == max_basis:
            d = np.array(alphas)
            e = np.array(betas)
            vals, vecs = tridiag_eigh(d, e)
            top = int(np.argmax(vals))
            resid = abs(beta * vecs[-1, top])
            best = (float(vals[top]), k, resid, resid <= tol)
            if resid <= tol or beta <= 1e-14:
                ritz = None
                if keep_basis:
                    ritz = np.asarray(basis).T @ vecs[:, top]
                    rn = float(np.sqrt(ritz @ ritz))
                    if rn > 0:
                        ritz /= rn
                return best[0], k, best[2], True, ritz
        if beta <= 1e-14:
            break
        betas.append(beta)
        v_prev = v
        v = w / beta
        if keep_basis:
            basis.append(v.copy())

    d = np.array(alphas)
    e = np.array(betas[: len(alphas) - 1])
    vals, vecs = tridiag_eigh(d, e)
    top = int(np.argmax(vals))
    resid = abs(beta * vecs[-1, top]) if len(betas) >= len(alphas) else 0.0
    ritz = None
    if keep_basis:
        ritz = np.asarray(basis).T[:, : len(alphas)] @ vecs[:, top]
        rn = float(np.sqrt(ritz @ ritz))
        if rn > 0:
            ritz /= rn
    converged = resid <= tol
    return float(vals[top]), len(alphas), resid, converged, ritz
