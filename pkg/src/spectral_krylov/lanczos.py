"""Block biorthogonal Lanczos kernels and Ritz extraction.

Two ways of building the block tridiagonal projection ``T`` with
``A @ [V_1..V_k] = [V_1..V_{k+1}] @ T_tilde``:

* :func:`block_lanczos` normalises each new pair with a pivoted LU split of
  ``W_hat^T V_hat``.
* :func:`able` orthonormalises both new blocks by QR and restores
  ``W^T V = I`` with an SVD rescaling, recomputing the coupling blocks
  from the fresh products every step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dense_eig import eig_vectors, eigvals_dense
from .linalg import (LinearOperator, as_operator, frobenius_norm, lu_biorth_split,
                     qr_factor, svd_small)

log = logging.getLogger(__name__)


class LanczosError(ValueError):
    """Invalid input to a Lanczos kernel."""


@dataclass
class BlockTridiagonal:
    """Blocks of ``T_tilde``: ``diag[j]`` is A_{j+1}, ``sup[j]``/``sub[j]``
    couple blocks j and j+1, ``trailing`` is the closing sub-diagonal block."""

    s: int
    diag: list = field(default_factory=list)
    sup: list = field(default_factory=list)
    sub: list = field(default_factory=list)
    trailing: np.ndarray | None = None

    @property
    def k(self) -> int:
        return len(self.diag)

    def assemble(self, with_trailing: bool = False) -> np.ndarray:
        k, s = self.k, self.s
        if len(self.sup) != max(k - 1, 0) or len(self.sub) != max(k - 1, 0):
            raise ValueError("inconsistent block counts")
        rows = (k + 1) * s if with_trailing else k * s
        T = np.zeros((rows, k * s))
        for j, Aj in enumerate(self.diag):
            T[j * s:(j + 1) * s, j * s:(j + 1) * s] = Aj
        for j, (B, C) in enumerate(zip(self.sup, self.sub)):
            T[j * s:(j + 1) * s, (j + 1) * s:(j + 2) * s] = B
            T[(j + 1) * s:(j + 2) * s, j * s:(j + 1) * s] = C
        if with_trailing and k:
            trailing = self.trailing if self.trailing is not None else np.zeros((s, s))
            T[k * s:, (k - 1) * s:] = trailing
        return T


def assemble(tridiag: BlockTridiagonal, with_trailing: bool = False) -> np.ndarray:
    return tridiag.assemble(with_trailing)


@dataclass
class Breakdown:
    step: int
    smallest: float
    kind: str  # "invariant" or "serious"


@dataclass
class LanczosDecomposition:
    V: list
    W: list
    tridiag: BlockTridiagonal
    steps_completed: int
    breakdown: Breakdown | None = None
    recoveries: list = field(default_factory=list)
    deflations: list = field(default_factory=list)
    method: str = "block-lanczos"

    @property
    def s(self) -> int:
        return self.tridiag.s

    def basis(self, which: str = "V", closing: bool = False) -> np.ndarray:
        blocks = self.V if which == "V" else self.W
        k = self.steps_completed + (1 if closing else 0)
        return np.hstack(blocks[:k])

    def T(self, with_trailing: bool = False) -> np.ndarray:
        return self.tridiag.assemble(with_trailing)


@dataclass
class RitzSet:
    values: np.ndarray
    coef_vectors: np.ndarray
    ritz_vectors: np.ndarray
    block_residual_estimate: float
    per_pair_residuals: np.ndarray
    all_values: np.ndarray


def _check_start(op: LinearOperator, V1, W1, m):
    V1 = np.array(V1, dtype=float, ndmin=2)
    W1 = np.array(W1, dtype=float, ndmin=2)
    if V1.shape != W1.shape or V1.shape[0] != op.n:
        raise LanczosError(f"start blocks must both be {op.n} x s")
    s = V1.shape[1]
    if m < 1 or m * s > op.n:
        raise LanczosError(f"need 1 <= m and m*s <= n (m={m}, s={s}, n={op.n})")
    err = frobenius_norm(W1.T @ V1 - np.eye(s))
    if err > 1e-10:
        raise LanczosError(f"start blocks not biorthogonal: ||W1^T V1 - I|| = {err:.3e}")
    return V1, W1, s


def _two_sided_reorth(Vh, Wh, V, W):
    for _ in range(2):
        for Vi, Wi in zip(V, W):
            Vh = Vh - Vi @ (Wi.T @ Vh)
            Wh = Wh - Wi @ (Vi.T @ Wh)
    return Vh, Wh


def _balanced_split(M, tol):
    """``M = B @ C`` from a pivoted LU with the pivot magnitudes shared
    evenly, so a symmetric positive semidefinite ``M`` gives ``C = B.T``."""
    s = M.shape[0]
    symmetric = frobenius_norm(M - M.T) <= 1e-12 * frobenius_norm(M)
    split = lu_biorth_split(M, tol, "diagonal" if symmetric else "partial")
    if split.rank < s and symmetric:
        split = lu_biorth_split(M, tol, "partial")
    dU = np.diag(split.U)
    smallest = float(np.min(np.abs(dU))) if s else 0.0
    if split.rank < s:
        return None, None, smallest
    root = np.sqrt(np.abs(dU))
    U1 = split.U / dU[:, None]
    Pr = np.eye(s)[split.row_perm]  # Pr @ M @ Pc.T = L U
    Pc = np.eye(s)[split.col_perm]
    B = Pr.T @ (split.L * root)
    C = (np.sign(dU) * root)[:, None] * U1 @ Pc
    return B, C, smallest


def block_lanczos(op, V1, W1, m: int, breakdown_tol: float = 1e-10,
                  full_reorth: bool = False, local_pass: bool = True) -> LanczosDecomposition:
    """Biorthogonal block Lanczos with an LU-normalised coupling.

    ``local_pass`` repeats the projection against the two most recent block
    pairs once (corrections folded into ``A_j`` and ``B_j``); this is local
    and cheap, not a reorthogonalisation against the whole basis.

    Stops early (soft) when ``W_hat^T V_hat`` is singular to ``breakdown_tol``
    relative to ``||W_hat|| ||V_hat||``, or when a new block vanishes
    relative to ``||A V_j||`` (invariant subspace; trailing block is zero).
    """
    op = as_operator(op)
    V1, W1, s = _check_start(op, V1, W1, m)
    V, W = [V1], [W1]
    tri = BlockTridiagonal(s)
    Z0 = np.zeros((op.n, s))
    Bj = np.zeros((s, s))
    Cj = np.zeros((s, s))
    breakdown = None
    for j in range(m):
        Vj, Wj = V[j], W[j]
        Vp = V[j - 1] if j else Z0
        Wp = W[j - 1] if j else Z0
        AV = op.apply(Vj)
        ATW = op.apply_transpose(Wj)
        Aj = Wj.T @ AV
        Vh = AV - Vj @ Aj - Vp @ Bj
        Wh = ATW - Wj @ Aj.T - Wp @ Cj.T
        if local_pass:
            dA, dB = Wj.T @ Vh, Wp.T @ Vh
            Vh = Vh - Vj @ dA - Vp @ dB
            Wh = Wh - Wj @ (Vj.T @ Wh) - Wp @ (Vp.T @ Wh)
            Aj = Aj + dA
            if j:
                tri.sup[j - 1] = tri.sup[j - 1] + dB
        if full_reorth:
            Vh, Wh = _two_sided_reorth(Vh, Wh, V, W)
        tri.diag.append(Aj)
        nv, nw = frobenius_norm(Vh), frobenius_norm(Wh)
        if nv <= breakdown_tol * frobenius_norm(AV) or nw <= breakdown_tol * frobenius_norm(ATW):
            tri.trailing = np.zeros((s, s))
            V.append(Vh)
            W.append(Wh)
            if j < m - 1:
                breakdown = Breakdown(j + 1, min(nv, nw), "invariant")
            break
        M = Wh.T @ Vh
        normM = frobenius_norm(M)
        if normM > 0:
            B, C, smallest = _balanced_split(M, breakdown_tol * nv * nw / normM)
        else:
            B = C = None
            smallest = 0.0
        if B is None:
            tri.trailing = np.eye(s)
            V.append(Vh)
            W.append(Wh)
            breakdown = Breakdown(j + 1, smallest, "serious")
            break
        Vn = np.linalg.solve(C.T, Vh.T).T
        Wn = np.linalg.solve(B, Wh.T).T
        V.append(Vn)
        W.append(Wn)
        if j < m - 1:
            tri.sup.append(B)
            tri.sub.append(C)
        else:
            tri.trailing = C
        Bj, Cj = B, C
    if breakdown is not None:
        log.info("block_lanczos: %s breakdown at step %d (%.3e)",
                 breakdown.kind, breakdown.step, breakdown.smallest)
    return LanczosDecomposition(V, W, tri, tri.k, breakdown, method="block-lanczos")


def able(op, V1, W1, m: int, breakdown_tol: float = 1e-10, full_reorth: bool = False,
         recover: bool = True, seed: int = 0, local_pass: bool = True) -> LanczosDecomposition:
    """Adaptive block Lanczos with SVD rescaling of every new block pair.

    Each step orthonormalises ``S = A V_j - ...`` and ``R = A^T W_j - ...`` by
    QR, takes ``W_q^T V_q = P D Q^T`` and sets ``V_{j+1} = V_q Q D^{-1/2}``,
    ``W_{j+1} = W_q P D^{-1/2}`` so that ``W_{j+1}^T V_{j+1} = I``. The
    coupling blocks ``B_j = W_{j-1}^T A V_j`` and ``C_j^T = V_{j-1}^T A^T W_j``
    are recomputed from the fresh products, which keeps the right relation
    ``A V = V_{+} T_tilde`` exact to roundoff.

    Singular values below ``breakdown_tol`` trigger recovery: the right
    direction is kept (with unit scaling) and its left partner is replaced
    by a seeded random vector made biorthogonal to all earlier blocks. With
    ``recover=False`` the run stops there instead. A recovery restarts the
    left Krylov chain, so afterwards ``W_i^T V_j = 0`` is only kept for
    ``i >= j``; the right relation, and with it the residual identity, stays
    exact.
    """
    op = as_operator(op)
    V1, W1, s = _check_start(op, V1, W1, m)
    rng = np.random.default_rng(seed)
    V, W = [V1], [W1]
    tri = BlockTridiagonal(s)
    Z0 = np.zeros((op.n, s))
    breakdown = None
    recoveries = []
    deflations = []
    for j in range(m):
        Vj, Wj = V[j], W[j]
        Vp = V[j - 1] if j else Z0
        Wp = W[j - 1] if j else Z0
        S = op.apply(Vj)
        R = op.apply_transpose(Wj)
        nS0, nR0 = frobenius_norm(S), frobenius_norm(R)
        Aj = Wj.T @ S
        Bj = Wp.T @ S
        CjT = Vp.T @ R
        S = S - Vj @ Aj - Vp @ Bj
        R = R - Wj @ Aj.T - Wp @ CjT
        if local_pass:
            # second pass against the last two blocks; folding the
            # corrections into A_j, B_j keeps the right relation exact
            dA, dB = Wj.T @ S, Wp.T @ S
            S = S - Vj @ dA - Vp @ dB
            R = R - Wj @ (Vj.T @ R) - Wp @ (Vp.T @ R)
            Aj, Bj = Aj + dA, Bj + dB
        if j:
            tri.sup[j - 1] = Bj
        if full_reorth:
            S, R = _two_sided_reorth(S, R, V, W)
        tri.diag.append(Aj)
        nS, nR = frobenius_norm(S), frobenius_norm(R)
        if nS <= breakdown_tol * nS0 or nR <= breakdown_tol * nR0:
            tri.trailing = np.zeros((s, s))
            V.append(S)
            W.append(R)
            if j < m - 1:
                breakdown = Breakdown(j + 1, min(nS, nR), "invariant")
            break
        fresh = rng.standard_normal(S.shape)
        Vq, Rs, dv = _deflating_basis(S, breakdown_tol * nS0, fresh, V, W)
        Wq, Rr, dw = _deflating_basis(R, breakdown_tol * nR0, fresh, W, V)
        if dv or dw:
            deflations.append((j + 1, dv, dw))
        P, D, Q = svd_small(Wq.T @ Vq)
        bad = D < breakdown_tol
        if bad.any() and not recover:
            tri.trailing = np.eye(s)
            V.append(S)
            W.append(R)
            breakdown = Breakdown(j + 1, float(D.min()), "serious")
            break
        scale = np.ones(s)
        scale[~bad] = 1.0 / np.sqrt(D[~bad])
        Vn = (Vq @ Q) * scale
        Wn = (Wq @ P) * scale
        if bad.any():
            Wn = _recover_left(Wn, Vn, bad, V, W, rng)
            if Wn is None:
                tri.trailing = np.eye(s)
                V.append(S)
                W.append(R)
                breakdown = Breakdown(j + 1, float(D.min()), "serious")
                break
            recoveries.append((j + 1, float(D.min()), int(bad.sum())))
            log.info("able: recovered %d direction(s) at step %d (d_min=%.3e)",
                     int(bad.sum()), j + 1, D.min())
        C = (Q.T @ Rs) / scale[:, None]
        B = ((P.T @ Rr) / scale[:, None]).T
        V.append(Vn)
        W.append(Wn)
        if j < m - 1:
            tri.sup.append(B)  # replaced by the recomputed block next step
            tri.sub.append(C)
        else:
            tri.trailing = C
    if breakdown is not None:
        log.info("able: %s breakdown at step %d (%.3e)",
                 breakdown.kind, breakdown.step, breakdown.smallest)
    return LanczosDecomposition(V, W, tri, tri.k, breakdown, recoveries, deflations,
                                method="able")


def _deflating_basis(X, thresh, fresh, same, other):
    """Orthonormal ``Q`` and ``R`` with ``X ~= Q R`` where directions of ``X``
    with singular value at most ``thresh`` are dropped (their row of ``R``
    zeroed) and their column of ``Q`` is a fresh vector made biorthogonal to
    the earlier blocks. Returns ``(Q, R, n_dropped)``."""
    Q, R, _ = qr_factor(X)
    P, sig, Xr = svd_small(R)
    Q = Q @ P
    R = sig[:, None] * Xr.T
    bad = np.flatnonzero(sig <= thresh)
    if len(bad) == 0:
        return Q, R, 0
    keep = np.flatnonzero(sig > thresh)
    for i in bad:
        r = fresh[:, i].copy()
        for Xs, Xo in zip(same, other):
            r -= Xs @ (Xo.T @ r)
        cols = np.concatenate([keep, bad[bad < i]]).astype(int)
        for _ in range(2):
            r -= Q[:, cols] @ (Q[:, cols].T @ r)
        Q[:, i] = r / np.linalg.norm(r)
        R[i, :] = 0.0
    return Q, R, len(bad)


def _recover_left(Wn, Vn, bad, V, W, rng):
    good = np.flatnonzero(~bad)
    idx = np.flatnonzero(bad)
    Wb = rng.standard_normal((Vn.shape[0], len(idx)))
    for Vi, Wi in zip(V, W):
        Wb = Wb - Wi @ (Vi.T @ Wb)
    if len(good):
        Wb = Wb - Wn[:, good] @ (Vn[:, good].T @ Wb)
    G = Vn[:, idx].T @ Wb
    if np.linalg.cond(G) > 1e12:
        return None
    Wn = Wn.copy()
    Wn[:, idx] = np.linalg.solve(G, Wb.T).T
    return Wn


def residual_estimate_block(decomp: LanczosDecomposition, coef_vectors) -> float:
    """``||V_{k+1} C_{k+1} Y_last||_F`` where ``Y_last`` is the last block row
    of the coefficient vectors; equals ``||A Z - Z Lambda||_F`` for exact
    eigenvectors of ``T_k``."""
    k, s = decomp.steps_completed, decomp.s
    Y = np.asarray(coef_vectors)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != k * s:
        raise ValueError(f"coefficient vectors need {k * s} rows, got {Y.shape[0]}")
    trailing = decomp.tridiag.trailing
    if trailing is None or not np.any(trailing):
        return 0.0
    return frobenius_norm(decomp.V[k] @ (trailing @ Y[-s:, :]))


def real_block(values, Z):
    """Real ``n x w`` block spanning the columns of complex ``Z``.

    Real values contribute their (real) vector; each complex value adds its
    real and imaginary parts unless its conjugate was already handled, so a
    pair split at the end of ``values`` widens the block by one.
    Returns ``(X, owner)`` where ``owner[c]`` is the value index column
    ``c`` came from.
    """
    values = np.asarray(values, dtype=complex)
    cols, owner = [], []
    for i, mu in enumerate(values):
        if mu.imag == 0.0:
            cols.append(Z[:, i].real)
            owner.append(i)
        elif any(values[j] == np.conj(mu) for j in range(i)):
            continue
        else:
            cols.extend([Z[:, i].real, Z[:, i].imag])
            owner.extend([i, i])
    return np.column_stack(cols), owner


def ritz_extract(decomp: LanczosDecomposition, s_wanted: int, op) -> RitzSet:
    """Ritz pairs for the ``s_wanted`` eigenvalues of ``T_k`` of largest real part."""
    op = as_operator(op)
    if decomp.steps_completed < 1:
        raise LanczosError("decomposition has no completed steps")
    T = decomp.T()
    vals = eigvals_dense(T)
    s_wanted = min(s_wanted, len(vals))
    wanted = vals[:s_wanted]
    Y, _, _ = eig_vectors(T, wanted)
    Z = decomp.basis("V") @ Y
    for i in range(s_wanted):
        nz = np.linalg.norm(Z[:, i])
        z = Z[:, i] / nz
        first = np.flatnonzero(np.abs(z) > 1e-8 * np.max(np.abs(z)))[0]
        ph = z[first] / abs(z[first])
        Z[:, i] = z / ph
        Z[first, i] = abs(Z[first, i])
        Y[:, i] = Y[:, i] / (nz * ph)
    X, owner = real_block(wanted, Z)
    AX = op.apply(X)
    res = np.zeros(s_wanted)
    c = 0
    done = {}
    while c < X.shape[1]:
        i = owner[c]
        mu = wanted[i]
        if mu.imag == 0.0:
            res[i] = np.linalg.norm(AX[:, c] - mu.real * X[:, c])
            c += 1
        else:
            Az = AX[:, c] + 1j * AX[:, c + 1]
            z = X[:, c] + 1j * X[:, c + 1]
            res[i] = np.linalg.norm(Az - mu * z)
            done[i] = res[i]
            c += 2
    for i, mu in enumerate(wanted):
        if mu.imag != 0.0 and i not in done:
            j = next(j for j in range(i) if wanted[j] == np.conj(mu))
            res[i] = res[j]
    est = residual_estimate_block(decomp, Y)
    return RitzSet(wanted, Y, Z, est, res, vals)
