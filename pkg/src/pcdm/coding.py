"""Sparse coding against a fixed dictionary.

``omp_encode`` is the default greedy coder; ``alm_encode`` solves

    min ||J||_* + lam ||E||_1   s.t.  Y = D X + E,  X = J,  E >= 0

by inexact ALM with a growing penalty.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

OMP_CHUNK = 2048


def _atoms(d) -> np.ndarray:
    return d.atoms if hasattr(d, "atoms") else np.asarray(d, dtype=np.float64)


@dataclass
class SparseCode:
    coefficients: np.ndarray  # (K, N)
    n_selected: np.ndarray  # atoms selected per column
    means: np.ndarray | None = None  # per-column means removed before encoding
    kind: str = ""
    sparsity: int = 0
    residual_tol: float = 0.0

    @property
    def nnz(self) -> np.ndarray:
        return np.count_nonzero(self.coefficients, axis=0)


@dataclass
class LowRankSolution:
    J: np.ndarray
    X: np.ndarray
    E: np.ndarray
    mu_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    means: np.ndarray | None = None

    @property
    def coefficients(self) -> np.ndarray:
        return self.X


def column_center(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Subtract column means, returning (centred, means).

    The mean is taken relative to each column's first entry, so a constant
    column centres to exact zeros and its mean is exactly that constant.
    """
    ref = Y[:1]
    d = Y - ref
    means = ref[0] + d.mean(axis=0)
    return d - (means - ref[0])[None, :], means


def _solve_batched(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(gram, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return np.einsum("mij,mj->mi", np.linalg.pinv(gram), rhs)


def _omp_chunk(Y, D, G, sparsity, tol, l1):
    # row-major per signal: dty[m] and X[m] are the m-th column's correlations/codes
    K = D.shape[1]
    n_cols = Y.shape[1]
    dty = Y.T @ D
    norms2 = np.einsum("ij,ij->j", Y, Y)
    res2 = norms2.copy()
    support = np.zeros((n_cols, sparsity), dtype=np.intp)
    coef = np.zeros((n_cols, sparsity))
    count = np.zeros(n_cols, dtype=np.intp)
    X = np.zeros((n_cols, K))
    active = np.sqrt(np.maximum(res2, 0.0)) > tol
    for k in range(sparsity):
        cols = np.flatnonzero(active)
        if cols.size == 0:
            break
        rows = np.arange(cols.size)
        corr = dty[cols] - X[cols] @ G if k else dty[cols]
        c = np.abs(corr)
        if k:
            c[rows[:, None], support[cols, :k]] = -1.0
        j = np.argmax(c, axis=1)  # first maximum -> lowest atom index on ties
        best = c[rows, j]
        dead = best <= 1e-12 * np.sqrt(norms2[cols])
        S = np.concatenate([support[cols, :k], j[:, None]], axis=1)
        gram = G[S[:, :, None], S[:, None, :]]
        b = dty[cols[:, None], S]
        x = _solve_batched(gram, b)
        new_res2 = norms2[cols] - np.einsum("mj,mj->m", b, x)
        ok = ~dead & (new_res2 < res2[cols])
        acc = cols[ok]
        support[acc, :k + 1] = S[ok]
        coef[acc, :k + 1] = x[ok]
        count[acc] = k + 1
        res2[acc] = new_res2[ok]
        active[cols[~ok]] = False
        active[acc] = np.sqrt(np.maximum(new_res2[ok], 0.0)) > tol
        X[acc[:, None], S[ok]] = x[ok]
    if l1 > 0:
        coef = _l1_refit(G, dty, support, coef, count, l1)
        X[:] = 0.0
        for k in range(sparsity):
            sel = count > k
            X[np.flatnonzero(sel), support[sel, k]] = coef[sel, k]
    return X.T, count


def _l1_refit(G, dty, support, coef, count, l1):
    """Minimize ||y - D_S x||^2 + l1 ||x||_1 on the chosen support, keeping the
    least-squares signs; coefficients whose sign would flip are zeroed."""
    out = coef.copy()
    for k in range(1, support.shape[1] + 1):
        cols = np.flatnonzero(count == k)
        if cols.size == 0:
            continue
        S = support[cols, :k]
        gram = G[S[:, :, None], S[:, None, :]]
        sign = np.sign(coef[cols, :k])
        x = _solve_batched(gram, dty[cols[:, None], S] - 0.5 * l1 * sign)
        x[np.sign(x) != sign] = 0.0
        out[cols, :k] = x
    return out


def omp_encode(Y: np.ndarray, D, sparsity: int = 8, residual_tol: float = 1e-6,
               l1: float = 0.0, center: bool = False, kind: str = "") -> SparseCode:
    """Orthogonal matching pursuit on every column of ``Y``.

    Each step picks the atom with the largest absolute correlation to the
    residual, then refits all active coefficients by least squares. A column
    stops after ``sparsity`` atoms, once its residual norm is <= residual_tol,
    or when a step fails to reduce the residual. ``l1 > 0`` shrinks the final
    coefficients on the selected support. ``center`` removes column means
    first; :func:`reconstruct` adds them back.
    """
    A = _atoms(D)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if A.shape[0] != Y.shape[0]:
        raise ValueError(f"dictionary has {A.shape[0]} rows, signals have {Y.shape[0]}")
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    means = None
    if center:
        Y, means = column_center(Y)
    sparsity = min(sparsity, A.shape[1])
    G = A.T @ A
    X = np.zeros((A.shape[1], Y.shape[1]))
    count = np.zeros(Y.shape[1], dtype=np.intp)
    for s in range(0, Y.shape[1], OMP_CHUNK):
        X[:, s:s + OMP_CHUNK], count[s:s + OMP_CHUNK] = _omp_chunk(
            Y[:, s:s + OMP_CHUNK], A, G, sparsity, residual_tol, l1)
    return SparseCode(X, count, means, kind or getattr(D, "kind", ""), sparsity, residual_tol)


def svt(M: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding, the proximal map of tau * nuclear norm."""
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    r = int(np.count_nonzero(s))
    if r == 0:
        return np.zeros_like(M)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def alm_encode(Y: np.ndarray, D, lam: float, X0: np.ndarray | None = None,
               tol: float = 1e-7, max_iter: int = 500, rho: float = 1.1,
               mu_max: float = 1e10, nonneg: bool = True,
               center: bool = False) -> LowRankSolution:
    if lam <= 0:
        raise ValueError("lam must be positive")
    A = _atoms(D)
    Y = np.asarray(Y, dtype=np.float64)
    if A.shape[0] != Y.shape[0]:
        raise ValueError(f"dictionary has {A.shape[0]} rows, signals have {Y.shape[0]}")
    means = None
    if center:
        Y, means = column_center(Y)
    n, N = Y.shape
    K = A.shape[1]
    X = np.zeros((K, N)) if X0 is None else np.array(X0, dtype=np.float64)
    J = X.copy()
    E = np.zeros((n, N))
    spec = np.linalg.norm(Y, 2) if Y.size else 0.0
    if spec == 0.0 and not np.any(X):
        return LowRankSolution(J, X, E, [], 0, True, means)
    mu = 1.25 / spec if spec > 0 else 1.0
    L1 = np.zeros((n, N))
    L2 = np.zeros((K, N))
    inv = np.linalg.inv(np.eye(K) + A.T @ A)
    mu_trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = svt(X + L2 / mu, 1.0 / mu)
        X = inv @ (A.T @ (Y - E + L1 / mu) + J - L2 / mu)
        V = Y - A @ X + L1 / mu
        if nonneg:
            E = np.maximum(V - lam / mu, 0.0)
        else:
            E = np.sign(V) * np.maximum(np.abs(V) - lam / mu, 0.0)
        r1 = Y - A @ X - E
        r2 = X - J
        mu_trace.append(mu)
        if max(np.abs(r1).max(), np.abs(r2).max()) < tol:
            converged = True
            break
        L1 += mu * r1
        L2 += mu * r2
        mu = min(mu_max, rho * mu)
    if not converged:
        log.warning("inexact ALM stopped at the iteration cap (%d) without converging", max_iter)
    return LowRankSolution(J, X, E, mu_trace, it, converged, means)


def reconstruct(D, code: SparseCode | LowRankSolution) -> np.ndarray:
    """Signals D @ X, with encode-time column means added back. Any noise
    term of a low-rank solution is left out."""
    A = _atoms(D)
    X = code.coefficients
    if A.shape[1] != X.shape[0]:
        raise ValueError(f"dictionary has {A.shape[1]} atoms, code has {X.shape[0]} rows")
    out = A @ X
    if code.means is not None:
        out += code.means[None, :]
    return out
