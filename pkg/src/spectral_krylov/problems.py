"""Test problems with known spectra, and Matrix Market exchange."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import LinearOperator

log = logging.getLogger(__name__)

# Dense generators refuse problems larger than this.
MAX_DENSE_N = 8000


@dataclass
class GeneratedProblem:
    operator: LinearOperator
    exact_spectrum: np.ndarray | None
    description: str
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.operator.n


def gen_spaced_diagonalizable(n: int, lambda_max: float = 10.0, lambda_min: float = 1.0,
                              seed: int = 0, max_cond: float = 1e8) -> GeneratedProblem:
    """Dense ``A = Q diag(d) Q^{-1}`` with ``d`` evenly spaced from
    ``lambda_max`` down to ``lambda_min`` and ``Q`` standard normal.

    ``Q`` is redrawn with ``seed + 1, seed + 2, ...`` while its 1-norm
    condition number exceeds ``max_cond``; the seed actually used is kept
    in the result.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > MAX_DENSE_N:
        raise MemoryError(f"n={n} exceeds the dense budget ({MAX_DENSE_N})")
    if n == 1:
        return GeneratedProblem(LinearOperator(np.array([[float(lambda_max)]])),
                                np.array([float(lambda_max)]),
                                "spaced diagonalizable n=1", seed)
    if not lambda_max > lambda_min:
        raise ValueError("need lambda_max > lambda_min")
    d = np.linspace(lambda_max, lambda_min, n)
    used = seed
    for attempt in range(100):
        used = seed + attempt
        Q = np.random.default_rng(used).standard_normal((n, n))
        try:
            Qinv = np.linalg.inv(Q)
        except np.linalg.LinAlgError:
            continue
        cond = np.linalg.norm(Q, 1) * np.linalg.norm(Qinv, 1)
        if cond <= max_cond:
            break
        log.info("seed %d: cond(Q) = %.3e, redrawing", used, cond)
    else:
        raise RuntimeError("could not draw a well-conditioned Q")
    A = (Q * d) @ Qinv
    return GeneratedProblem(LinearOperator(A), d,
                            f"spaced diagonalizable n={n} [{lambda_max}..{lambda_min}]", used)


def gen_laplacian2d(N: int, scaled: bool = False) -> GeneratedProblem:
    """Five-point Laplacian on an ``N x N`` interior grid (CSR, ``n = N^2``).

    Unscaled entries are the stencil values 4 and -1; ``scaled`` multiplies
    by ``(N + 1)^2``.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    n = N * N
    idx = np.arange(n).reshape(N, N)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [np.full(n, 4.0)]
    for a, b in ((idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])):
        rows += [a.ravel(), b.ravel()]
        cols += [b.ravel(), a.ravel()]
        vals += [np.full(a.size, -1.0)] * 2
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    A.sort_indices()
    spec = laplacian_exact_eigs(N, n)
    if scaled:
        h2 = float((N + 1) ** 2)
        A = A * h2
        spec = spec * h2
    return GeneratedProblem(LinearOperator(A), spec,
                            f"2D Laplacian N={N}{' scaled' if scaled else ''}")


def laplacian_exact_eigs(N: int, count: int | None = None) -> np.ndarray:
    """Largest ``count`` eigenvalues of the unscaled five-point Laplacian,
    descending, with multiplicity."""
    n = N * N
    count = n if count is None else count
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}]")
    c = 2.0 * np.cos(np.arange(1, N + 1) * math.pi / (N + 1))
    vals = (4.0 - c[:, None] - c[None, :]).ravel()
    return np.sort(vals)[::-1][:count]


class MatrixMarketError(ValueError):
    pass


def write_matrix_market(path, matrix, symmetric: bool = False) -> None:
    """Write ``matrix`` as coordinate real general (or symmetric: lower
    triangle only). Values use 17 significant digits."""
    if isinstance(matrix, LinearOperator):
        matrix = matrix.matrix
    M = sp.coo_matrix(matrix)
    if symmetric:
        keep = M.row >= M.col
        r, c, v = M.row[keep], M.col[keep], M.data[keep]
    else:
        r, c, v = M.row, M.col, M.data
    order = np.lexsort((r, c))
    kind = "symmetric" if symmetric else "general"
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {kind}\n")
        fh.write(f"{M.shape[0]} {M.shape[1]} {len(v)}\n")
        for i in order:
            fh.write(f"{r[i] + 1} {c[i] + 1} {v[i]:.17g}\n")


def read_matrix_market(path, threads: int = 1) -> LinearOperator:
    """Read a coordinate real general/symmetric file into a CSR operator."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError(f"{path}: empty file")
    header = lines[0].split()
    if (len(header) != 5 or header[0] != "%%MatrixMarket"
            or [h.lower() for h in header[1:4]] != ["matrix", "coordinate", "real"]
            or header[4].lower() not in ("general", "symmetric")):
        raise MatrixMarketError(f"{path}: unsupported header {lines[0]!r}")
    symmetric = header[4].lower() == "symmetric"
    body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise MatrixMarketError(f"{path}: missing size line")
    try:
        nr, nc, nnz = (int(t) for t in body[0].split())
    except ValueError:
        raise MatrixMarketError(f"{path}: bad size line {body[0]!r}") from None
    entries = body[1:]
    if len(entries) != nnz:
        raise MatrixMarketError(f"{path}: expected {nnz} entries, found {len(entries)}")
    rows = np.empty(nnz, int)
    cols = np.empty(nnz, int)
    vals = np.empty(nnz)
    for t, ln in enumerate(entries):
        parts = ln.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"{path}: bad entry line {ln!r}")
        i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        if not (1 <= i <= nr and 1 <= j <= nc):
            raise MatrixMarketError(f"{path}: index ({i}, {j}) out of bounds (1-based)")
        if symmetric and j > i:
            raise MatrixMarketError(f"{path}: symmetric file has upper-triangle entry ({i}, {j})")
        rows[t], cols[t], vals[t] = i - 1, j - 1, v
    keys = rows * nc + cols
    if len(np.unique(keys)) != nnz:
        raise MatrixMarketError(f"{path}: duplicate entries")
    if symmetric:
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    M = sp.csr_matrix((vals, (rows, cols)), shape=(nr, nc))
    M.sort_indices()
    return LinearOperator(M, threads=threads)
