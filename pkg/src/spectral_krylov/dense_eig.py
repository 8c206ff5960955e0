"""Dense real nonsymmetric eigensolver.

Householder reduction to Hessenberg form, Francis implicit double-shift QR
for the eigenvalues (real arithmetic, complex pairs read off 2x2 blocks),
and shifted inverse iteration for the eigenvectors that are asked for.
Used for the projected block-tridiagonal problem and as the desk-scale
oracle in the tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


class ConvergenceError(RuntimeError):
    """Francis QR hit its sweep cap; ``partial`` holds what did deflate."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass
class Spectrum:
    """Eigenvalues sorted by :func:`sort_eigenvalues`, optionally with vectors.

    ``vectors[:, i]`` pairs with ``values[i]``; ``flagged[i]`` marks vectors
    whose inverse iteration did not reach the residual target (defective or
    badly clustered eigenvalues), with the achieved residual in
    ``residuals[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray | None = None
    residuals: np.ndarray | None = None
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    def __len__(self):
        return len(self.values)


def sort_eigenvalues(values) -> np.ndarray:
    """Indices ordering ``values`` by descending real part, then imaginary."""
    values = np.asarray(values, dtype=complex)
    return np.lexsort((-values.imag, -values.real))


def hessenberg(M: np.ndarray):
    """Orthogonal reduction ``U.T @ M @ U = H`` with ``H`` upper Hessenberg."""
    H = np.array(M, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("hessenberg expects a square matrix")
    m = H.shape[0]
    U = np.eye(m)
    for k in range(m - 2):
        x = H[k + 1:, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        alpha = -np.copysign(np.hypot(x[0], tail), x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        H[k + 1:, k:] -= 2.0 * np.outer(v, v @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v)
        U[:, k + 1:] -= 2.0 * np.outer(U[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
        H[k + 1, k] = alpha
    return H, U


def francis_qr(H: np.ndarray, max_sweeps: int | None = None) -> np.ndarray:
    """Eigenvalues of an upper Hessenberg matrix by implicit double-shift QR.

    Returns a complex array sorted with :func:`sort_eigenvalues`. Raises
    :class:`ConvergenceError` after ``30 * m`` double-shift sweeps.
    """
    a = np.array(H, dtype=float)
    m = a.shape[0]
    if m == 0:
        return np.zeros(0, complex)
    if max_sweeps is None:
        max_sweeps = 30 * m
    wr = np.zeros(m)
    wi = np.zeros(m)
    anorm = np.abs(np.triu(a, -1)).sum()
    nn = m - 1
    t = 0.0
    sweeps = 0
    its = 0
    while nn >= 0:
        # find the bottom of the unreduced block
        l = nn
        while l >= 1:
            s = abs(a[l - 1, l - 1]) + abs(a[l, l])
            if s == 0.0:
                s = anorm
            if abs(a[l, l - 1]) <= _EPS * s:
                a[l, l - 1] = 0.0
                break
            l -= 1
        x = a[nn, nn]
        if l == nn:
            wr[nn] = x + t
            nn -= 1
            its = 0
            continue
        y = a[nn - 1, nn - 1]
        w = a[nn, nn - 1] * a[nn - 1, nn]
        if l == nn - 1:
            p = 0.5 * (y - x)
            q = p * p + w
            z = np.sqrt(abs(q))
            x += t
            if q >= 0.0:
                z = p + np.copysign(z, p)
                wr[nn - 1] = wr[nn] = x + z
                if z != 0.0:
                    wr[nn] = x - w / z
                wi[nn - 1] = wi[nn] = 0.0
            else:
                wr[nn - 1] = wr[nn] = x + p
                wi[nn - 1] = z
                wi[nn] = -z
            nn -= 2
            its = 0
            continue

        if sweeps >= max_sweeps:
            done = np.arange(nn + 1, m)
            partial = (wr[done] + 1j * wi[done])
            raise ConvergenceError(
                f"Francis QR did not converge in {max_sweeps} sweeps "
                f"({m - nn - 1} of {m} eigenvalues found)", partial)
        if its > 0 and its % 10 == 0:
            # exceptional shift
            t += x
            idx = np.arange(nn + 1)
            a[idx, idx] -= x
            s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
            x = y = 0.75 * s
            w = -0.4375 * s * s
        its += 1
        sweeps += 1

        # look for two consecutive small subdiagonals
        mm = nn - 2
        while mm >= l:
            z = a[mm, mm]
            r = x - z
            s = y - z
            p = (r * s - w) / a[mm + 1, mm] + a[mm, mm + 1]
            q = a[mm + 1, mm + 1] - z - r - s
            r = a[mm + 2, mm + 1]
            s = abs(p) + abs(q) + abs(r)
            p /= s
            q /= s
            r /= s
            if mm == l:
                break
            u = abs(a[mm, mm - 1]) * (abs(q) + abs(r))
            v = abs(p) * (abs(a[mm - 1, mm - 1]) + abs(z) + abs(a[mm + 1, mm + 1]))
            if u <= _EPS * v:
                break
            mm -= 1
        for i in range(mm + 2, nn + 1):
            a[i, i - 2] = 0.0
            if i != mm + 2:
                a[i, i - 3] = 0.0

        # double-shift bulge chase on rows/cols l..nn
        for k in range(mm, nn):
            if k != mm:
                p = a[k, k - 1]
                q = a[k + 1, k - 1]
                r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                x = abs(p) + abs(q) + abs(r)
                if x != 0.0:
                    p /= x
                    q /= x
                    r /= x
            s = np.copysign(np.sqrt(p * p + q * q + r * r), p)
            if s == 0.0:
                continue
            if k == mm:
                if l != mm:
                    a[k, k - 1] = -a[k, k - 1]
            else:
                a[k, k - 1] = -s * x
            p += s
            x = p / s
            y = q / s
            z = r / s
            q /= p
            r /= p
            three = k != nn - 1
            cols = slice(k, nn + 1)
            if three:
                pr = a[k, cols] + q * a[k + 1, cols] + r * a[k + 2, cols]
                a[k + 2, cols] -= pr * z
            else:
                pr = a[k, cols] + q * a[k + 1, cols]
            a[k + 1, cols] -= pr * y
            a[k, cols] -= pr * x
            rows = slice(l, min(nn, k + 3) + 1)
            if three:
                pc = x * a[rows, k] + y * a[rows, k + 1] + z * a[rows, k + 2]
                a[rows, k + 2] -= pc * r
            else:
                pc = x * a[rows, k] + y * a[rows, k + 1]
            a[rows, k + 1] -= pc * q
            a[rows, k] -= pc

    vals = wr + 1j * wi
    return vals[sort_eigenvalues(vals)]


def _phase_normalise(z: np.ndarray) -> np.ndarray:
    z = z / np.linalg.norm(z)
    tol = 1e-8 * np.max(np.abs(z))
    first = np.flatnonzero(np.abs(z) > tol)[0]
    ph = z[first] / abs(z[first])
    z = z / ph
    z[first] = abs(z[first])
    return z


def eig_vectors(M: np.ndarray, values, seed: int = 0, n_iter: int = 3,
                cluster_tol: float = 1e-8):
    """Unit eigenvectors for ``values`` by shifted inverse iteration.

    Real eigenvalues get real vectors; a value whose conjugate was already
    handled reuses the conjugated vector. Repeated values (within
    ``cluster_tol * ||M||_F``) are iterated against the vectors already found
    for the cluster so a semisimple eigenvalue yields independent vectors;
    a defective one shows up as a flagged duplicate.

    Returns ``(Z, residuals, flagged)``.
    """
    M = np.asarray(M, dtype=float)
    m = M.shape[0]
    values = np.asarray(values, dtype=complex)
    k = len(values)
    norm = max(np.linalg.norm(M), np.finfo(float).tiny)
    pert = 1e-10 * norm
    target = 1e-8 * norm
    rng = np.random.default_rng(seed)
    start = rng.standard_normal(m)
    start /= np.linalg.norm(start)

    Z = np.zeros((m, k), complex)
    res = np.zeros(k)
    flagged = np.zeros(k, bool)
    factors = {}
    for i, lam in enumerate(values):
        done = None
        for j in range(i):
            if values[j] == np.conj(lam) and lam.imag != 0 and not flagged[j]:
                done = j
                break
        if done is not None:
            Z[:, i] = np.conj(Z[:, done])
            res[i] = res[done]
            continue

        real = lam.imag == 0.0
        dtype = float if real else complex
        cluster = [j for j in range(i) if abs(values[j] - lam) <= cluster_tol * norm]
        key = (lam.real, lam.imag)
        if key not in factors:
            shift = lam + pert
            factors[key] = sla.lu_factor(M.astype(dtype) - shift * np.eye(m),
                                         check_finite=False)
        lu = factors[key]
        x = start.astype(dtype)
        if cluster:
            x = x + rng.standard_normal(m)
        for _ in range(n_iter):
            x = sla.lu_solve(lu, x, check_finite=False)
            for j in cluster:
                zj = Z[:, j] if not real else Z[:, j].real
                x = x - zj * (np.vdot(zj, x))
            nx = np.linalg.norm(x)
            if not np.isfinite(nx) or nx == 0.0:
                break
            x = x / nx
            r = np.linalg.norm(M @ x - lam * x)
            if r <= 1e-3 * target:
                break
        nx = np.linalg.norm(x)
        if not np.isfinite(nx) or nx == 0.0:
            x = start.astype(complex)
            flagged[i] = True
        z = _phase_normalise(np.asarray(x, complex))
        Z[:, i] = z
        res[i] = np.linalg.norm(M @ z - lam * z)
        if res[i] > target:
            flagged[i] = True
        if cluster:
            # a duplicate that collapsed onto an earlier vector is not new
            prev = np.column_stack([Z[:, j] for j in cluster] + [z])
            sv = np.linalg.svd(prev, compute_uv=False)
            if sv[-1] < 1e-6:
                flagged[i] = True
    if flagged.any():
        log.debug("eig_vectors: %d flagged vectors", int(flagged.sum()))
    return Z, res, flagged


def eigvals_dense(M: np.ndarray) -> np.ndarray:
    """Sorted eigenvalues of a dense square matrix."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] == 1:
        return M[0].astype(complex)
    H, _ = hessenberg(M)
    return francis_qr(H)


def eig_dense(M: np.ndarray, vectors: bool = True, count: int | None = None,
              seed: int = 0) -> Spectrum:
    """Eigenvalues (and, for the first ``count`` of them, eigenvectors)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("eig_dense expects a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("eig_dense: non-finite input")
    vals = eigvals_dense(M)
    if not vectors:
        return Spectrum(vals)
    count = len(vals) if count is None else min(count, len(vals))
    Z, res, flagged = eig_vectors(M, vals[:count], seed=seed)
    return Spectrum(vals, Z, res, flagged)
