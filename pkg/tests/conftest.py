import numpy as np
import pytest


def oracle_eigvals(M):
    """LAPACK eigenvalues, ordered by descending real part then imaginary."""
    w = np.linalg.eigvals(np.asarray(M, dtype=float))
    return w[np.lexsort((-w.imag, -w.real))]


def biorth_pair(rng, n, s):
    """Random orthonormal V1 with W1 = V1."""
    V1 = np.linalg.qr(rng.standard_normal((n, s)))[0]
    return V1, V1.copy()


def lanczos_relation_error(A, decomp):
    """||A V_k - V_{k+1} T_tilde||_F for a decomposition."""
    Vk = decomp.basis("V")
    Vk1 = decomp.basis("V", closing=True)
    return np.linalg.norm(A @ Vk - Vk1 @ decomp.T(with_trailing=True))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
