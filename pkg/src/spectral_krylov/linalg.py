"""Dense/sparse primitives and small-block factorizations.

Everything in here operates on plain numpy arrays or scipy CSR matrices.
The factorizations are the ones the Lanczos kernels need on s-by-s blocks:
QR with a nonnegative-diagonal convention, a one-sided Jacobi SVD and a
pivoted LU split used to normalise the biorthogonal pair.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

# Dense kron products beyond this many entries are refused.
DENSE_ENTRY_BUDGET = 2**28


class QRResult(NamedTuple):
    Q: np.ndarray
    R: np.ndarray
    rank: int


class SVDResult(NamedTuple):
    P: np.ndarray
    D: np.ndarray
    Q: np.ndarray


class LUSplit(NamedTuple):
    L: np.ndarray
    U: np.ndarray
    row_perm: np.ndarray
    col_perm: np.ndarray
    rank: int


class LinearOperator:
    """Square matrix wrapper exposing ``A @ X`` and ``A.T @ X`` on blocks.

    Column applications of ``A`` and ``A.T`` are counted separately in
    :attr:`n_apply` and :attr:`n_apply_t`.

    Parameters
    ----------
    matrix : ndarray or scipy sparse matrix
        Backing store. Sparse input is converted to CSR.
    threads : int
        Row-chunk parallelism for the matvec. With one thread (default) the
        result is bitwise reproducible.
    """

    def __init__(self, matrix, threads: int = 1):
        if sp.issparse(matrix):
            matrix = sp.csr_matrix(matrix, dtype=float)
            matrix.sort_indices()
            data = matrix.data
        else:
            matrix = np.asarray(matrix, dtype=float)
            data = matrix
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"operator must be square, got shape {matrix.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("operator has non-finite entries")
        self.matrix = matrix
        self.n = matrix.shape[0]
        self.threads = max(1, int(threads))
        self.n_apply = 0
        self.n_apply_t = 0
        self._mt = None

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    @property
    def shape(self):
        return self.matrix.shape

    def _matmul(self, M, X):
        if self.threads == 1 or self.n < 2 * self.threads:
            return np.asarray(M @ X)
        bounds = np.linspace(0, self.n, self.threads + 1).astype(int)
        with ThreadPoolExecutor(self.threads) as pool:
            parts = pool.map(lambda ab: np.asarray(M[ab[0]:ab[1]] @ X),
                             zip(bounds[:-1], bounds[1:]))
            return np.concatenate(list(parts), axis=0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        self.n_apply += 1 if X.ndim == 1 else X.shape[1]
        return self._matmul(self.matrix, X)

    def apply_transpose(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        self.n_apply_t += 1 if X.ndim == 1 else X.shape[1]
        if self._mt is None:
            self._mt = self.matrix.T.tocsr() if self.is_sparse else self.matrix.T
        return self._matmul(self._mt, X)

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz) if self.is_sparse else int(np.count_nonzero(self.matrix))

    def reset_counters(self) -> None:
        self.n_apply = 0
        self.n_apply_t = 0

    def todense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.array(self.matrix)

    def frobenius_norm(self) -> float:
        return frobenius_norm(self.matrix)


def as_operator(A, threads: int = 1) -> LinearOperator:
    """Wrap ``A`` in a :class:`LinearOperator` unless it already is one."""
    if isinstance(A, LinearOperator):
        return A
    return LinearOperator(A, threads=threads)


def frobenius_norm(M) -> float:
    """Frobenius norm of a dense array, sparse matrix or operator."""
    if isinstance(M, LinearOperator):
        M = M.matrix
    if sp.issparse(M):
        return float(np.linalg.norm(M.data))
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M.ravel()))


def qr_factor(M: np.ndarray, tol: float = 1e-10) -> QRResult:
    """Thin Householder QR with ``diag(R) >= 0``.

    ``rank`` counts the diagonal entries of ``R`` above ``tol * ||M||_F``;
    rank deficiency is reported, not raised.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    n, s = M.shape
    if n < s:
        raise ValueError(f"qr_factor needs n >= s, got {n} < {s}")
    Q, R = np.linalg.qr(M, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs
    R = signs[:, None] * R
    scale = frobenius_norm(M)
    rank = int(np.sum(np.abs(np.diag(R)) > tol * scale)) if scale > 0 else 0
    return QRResult(Q, R, rank)


def svd_small(M: np.ndarray, max_sweeps: int = 60) -> SVDResult:
    """One-sided Jacobi SVD of a small square matrix, ``M = P diag(D) Q^T``.

    Singular values come back sorted in descending order.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("svd_small expects a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("svd_small: non-finite input")
    s = M.shape[0]
    U = M.copy()
    V = np.eye(s)
    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        rotated = False
        for i in range(s - 1):
            for j in range(i + 1, s):
                a = U[:, i] @ U[:, i]
                b = U[:, j] @ U[:, j]
                g = U[:, i] @ U[:, j]
                if abs(g) <= eps * np.sqrt(a * b) or g == 0.0:
                    continue
                rotated = True
                zeta = (b - a) / (2.0 * g)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                sn = c * t
                ui, uj = U[:, i].copy(), U[:, j]
                U[:, i] = c * ui - sn * uj
                U[:, j] = sn * ui + c * uj
                vi, vj = V[:, i].copy(), V[:, j]
                V[:, i] = c * vi - sn * vj
                V[:, j] = sn * vi + c * vj
        if not rotated:
            break

    D = np.linalg.norm(U, axis=0)
    order = np.argsort(-D, kind="stable")
    D, U, V = D[order], U[:, order], V[:, order]

    P = np.zeros((s, s))
    big = D > eps * max(D[0] if s else 0.0, np.finfo(float).tiny) * s
    P[:, big] = U[:, big] / D[big]
    nbig = int(big.sum())
    if nbig < s:
        # complete the left factor to an orthonormal basis
        D[~big] = 0.0
        basis, _ = np.linalg.qr(np.hstack([P[:, :nbig], np.eye(s)]))
        P[:, nbig:] = basis[:, nbig:s]
    return SVDResult(P, D, V)


def lu_biorth_split(M: np.ndarray, tol: float = 1e-14,
                    pivoting: str = "partial") -> LUSplit:
    """Pivoted LU of a small square matrix.

    Returns ``L`` unit lower triangular and ``U`` upper triangular with
    ``M[row_perm][:, col_perm] == L @ U``.

    ``pivoting="partial"`` is row partial pivoting (``col_perm`` is the
    identity). ``pivoting="diagonal"`` picks the largest remaining diagonal
    entry and permutes rows and columns symmetrically, so a symmetric
    positive semidefinite ``M`` factors as ``L D L^T`` up to the permutation.

    Pivots with modulus at most ``tol * ||M||_F`` are zeroed and lower
    ``rank``; the factorization itself never raises on singular input.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("lu_biorth_split expects a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("lu_biorth_split: non-finite input")
    if pivoting not in ("partial", "diagonal"):
        raise ValueError(f"unknown pivoting mode {pivoting!r}")
    s = M.shape[0]
    A = M.copy()
    rp = np.arange(s)
    cp = np.arange(s)
    L = np.eye(s)
    thresh = tol * frobenius_norm(M)
    rank = 0
    for k in range(s):
        if pivoting == "partial":
            p = k + int(np.argmax(np.abs(A[k:, k])))
            if p != k:
                A[[k, p]] = A[[p, k]]
                L[[k, p], :k] = L[[p, k], :k]
                rp[[k, p]] = rp[[p, k]]
        else:
            p = k + int(np.argmax(np.abs(np.diag(A)[k:])))
            if p != k:
                A[[k, p]] = A[[p, k]]
                A[:, [k, p]] = A[:, [p, k]]
                L[[k, p], :k] = L[[p, k], :k]
                rp[[k, p]] = rp[[p, k]]
                cp[[k, p]] = cp[[p, k]]
        piv = A[k, k]
        if abs(piv) <= thresh or piv == 0.0:
            A[k, k] = 0.0
            continue
        rank += 1
        mult = A[k + 1:, k] / piv
        L[k + 1:, k] = mult
        A[k + 1:, k:] -= np.outer(mult, A[k, k:])
        A[k + 1:, k] = 0.0
    return LUSplit(L, np.triu(A), rp, cp, rank)


def kron(A, B):
    """Kronecker product; sparse if either operand is sparse."""
    ra, ca = A.shape
    rb, cb = B.shape
    if sp.issparse(A) or sp.issparse(B):
        return sp.kron(sp.csr_matrix(A), sp.csr_matrix(B), format="csr")
    if ra * rb * ca * cb > DENSE_ENTRY_BUDGET:
        raise MemoryError(
            f"dense kron of size {ra * rb}x{ca * cb} exceeds the entry budget")
    return np.kron(np.asarray(A, dtype=float), np.asarray(B, dtype=float))
