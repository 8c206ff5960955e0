import numpy as np
import pytest

from conftest import biorth_pair, lanczos_relation_error, oracle_eigvals
from spectral_krylov.lanczos import (BlockTridiagonal, LanczosError, able, assemble,
                                     block_lanczos, residual_estimate_block, ritz_extract)
from spectral_krylov.linalg import LinearOperator
from spectral_krylov.problems import gen_laplacian2d, gen_spaced_diagonalizable

KERNELS = [block_lanczos, able]


def _sym_block_lanczos_T(A, V1, m):
    """Textbook symmetric block Lanczos with QR normalisation (oracle)."""
    n, s = V1.shape
    V, Vp, Bp = V1, np.zeros_like(V1), np.zeros((s, s))
    T = np.zeros((m * s, m * s))
    basis = []
    for j in range(m):
        basis.append(V)
        Aj = V.T @ A @ V
        R = A @ V - V @ Aj - Vp @ Bp.T
        for Q in basis:  # full reorthogonalisation keeps the oracle clean
            R -= Q @ (Q.T @ R)
        T[j * s:(j + 1) * s, j * s:(j + 1) * s] = Aj
        Vn, B = np.linalg.qr(R)
        if j < m - 1:
            T[(j + 1) * s:(j + 2) * s, j * s:(j + 1) * s] = B
            T[j * s:(j + 1) * s, (j + 1) * s:(j + 2) * s] = B.T
        Vp, V, Bp = V, Vn, B
    return T


# --- breakdown --------------------------------------------------------------------

@pytest.mark.parametrize("kernel", KERNELS)
def test_eigenvector_start_stops_at_step_one(kernel):
    A = np.diag(np.arange(1.0, 7.0))
    e1 = np.eye(6)[:, :1]
    d = kernel(A, e1, e1, 3)
    assert d.steps_completed == 1
    assert np.array_equal(d.tridiag.diag[0], [[1.0]])
    assert np.array_equal(d.tridiag.trailing, [[0.0]])
    assert d.breakdown is not None and d.breakdown.step == 1 and d.breakdown.kind == "invariant"


def test_start_block_validation(rng):
    A = rng.standard_normal((10, 10))
    V1, W1 = biorth_pair(rng, 10, 2)
    with pytest.raises(LanczosError, match="biorthogonal"):
        block_lanczos(A, V1, 2 * W1, 3)
    with pytest.raises(LanczosError):
        able(A, V1, W1, 6)
    with pytest.raises(LanczosError):
        able(A, V1[:5], W1[:5], 2)


def test_able_serious_breakdown_recovered_or_stopped():
    # A e1 = 2 e1 + e2 and A^T e1 = 2 e1 + e3: the new left and right
    # directions are orthogonal, so W2^T V2 = 0 exactly.
    n = 40
    A = np.random.default_rng(5).standard_normal((n, n)) / np.sqrt(n)
    A[:, 0] = 0.0
    A[0, :] = 0.0
    A[0, 0], A[1, 0], A[0, 2] = 2.0, 1.0, 1.0
    e1 = np.eye(n)[:, :1]

    d = able(A, e1, e1, 10)
    assert d.recoveries and d.recoveries[0][0] == 1
    assert d.steps_completed == 10 and d.breakdown is None
    assert lanczos_relation_error(A, d) <= 1e-8 * np.linalg.norm(A)
    # the replaced left vector restarts the left chain: W_i^T V_j = 0 still
    # holds for i >= j (the right chain is intact) but not above the diagonal
    G = d.basis("W").T @ d.basis("V") - np.eye(10)
    assert np.abs(np.tril(G)).max() <= 1e-10
    assert np.abs(np.triu(G, 2)).max() > 1e-3

    stopped = able(A, e1, e1, 10, recover=False)
    assert stopped.breakdown.kind == "serious" and stopped.steps_completed == 1

    bl = block_lanczos(A, e1, e1, 10)
    assert bl.breakdown.kind == "serious" and bl.steps_completed == 1


def test_able_deflates_rank_deficient_block():
    # one start column is an eigenvector: the next right block has rank 1
    n = 30
    A = np.diag(np.linspace(3, 1, n)) + np.diag(np.full(n - 1, 0.1), 1)
    A[1:, 0] = 0.0
    x = np.random.default_rng(2).standard_normal(n)
    V1 = np.linalg.qr(np.column_stack([np.eye(n)[:, 0], x]))[0]
    d = able(A, V1, V1.copy(), 6)
    assert d.deflations
    assert d.steps_completed == 6
    assert lanczos_relation_error(A, d) <= 1e-8 * np.linalg.norm(A)
    for j in range(1, d.steps_completed + 1):
        assert np.linalg.norm(d.W[j].T @ d.V[j] - np.eye(2)) <= 1e-10


# --- invariants --------------------------------------------------------------------

@pytest.mark.parametrize("kernel", KERNELS)
def test_random_invariants(kernel, rng):
    A = rng.standard_normal((100, 100))
    V1, W1 = biorth_pair(rng, 100, 2)
    d = kernel(A, V1, W1, 10)
    assert d.steps_completed == 10
    Vb, Wb = d.basis("V"), d.basis("W")
    assert np.linalg.norm(Wb.T @ Vb - np.eye(20)) <= 1e-8
    assert lanczos_relation_error(A, d) <= 1e-8 * np.linalg.norm(A)
    # transpose relation; the last block column also involves W_{k+1}
    lhs = A.T @ Wb - Wb @ d.T().T
    assert np.linalg.norm(lhs[:, :-2]) <= 1e-8 * np.linalg.norm(A)
    assert np.linalg.matrix_rank(lhs[:, -2:]) == 2


@pytest.mark.parametrize("kernel", KERNELS)
def test_symmetric_input_gives_symmetric_T(kernel, rng):
    B = rng.standard_normal((60, 60))
    A = B + B.T
    V1, W1 = biorth_pair(rng, 60, 3)
    d = kernel(A, V1, W1, 6)
    T = d.T()
    assert np.linalg.norm(T - T.T) <= 1e-10 * np.linalg.norm(T)
    oracle = _sym_block_lanczos_T(A, V1, 6)
    assert np.allclose(np.linalg.eigvalsh(0.5 * (T + T.T)), np.linalg.eigvalsh(oracle),
                       atol=1e-8 * np.linalg.norm(A))


def test_laplacian_local_biorthogonality(rng):
    A = gen_laplacian2d(10).operator.matrix
    V1, W1 = biorth_pair(rng, 100, 2)
    d = able(LinearOperator(A), V1, W1, 10)
    for j in range(d.steps_completed + 1):
        assert np.linalg.norm(d.W[j].T @ d.V[j] - np.eye(2)) <= 1e-12
    assert lanczos_relation_error(A.toarray(), d) <= 1e-8 * np.linalg.norm(A.toarray())


@pytest.mark.parametrize("kernel", KERNELS)
@pytest.mark.parametrize("s", [1, 2, 3])
def test_relation_many_starts(kernel, s):
    for seed in range(5):
        g = np.random.default_rng(seed)
        A = g.standard_normal((80, 80))
        V1, W1 = biorth_pair(g, 80, s)
        d = kernel(A, V1, W1, 8)
        assert lanczos_relation_error(A, d) <= 1e-8 * np.linalg.norm(A)


# --- assemble ------------------------------------------------------------------------

def test_assemble_single_block():
    tri = BlockTridiagonal(2, diag=[np.array([[1.0, 2.0], [3.0, 4.0]])])
    assert np.array_equal(assemble(tri), [[1, 2], [3, 4]])


def test_assemble_scalar_example():
    tri = BlockTridiagonal(1, diag=[np.array([[2.0]])] * 2, sup=[np.array([[1.0]])],
                           sub=[np.array([[1.0]])], trailing=np.array([[5.0]]))
    assert np.array_equal(assemble(tri), [[2, 1], [1, 2]])
    assert np.array_equal(assemble(tri, with_trailing=True), [[2, 1], [1, 2], [0, 5]])


def test_assemble_band_structure(rng):
    blocks = lambda c: [rng.standard_normal((2, 2)) for _ in range(c)]
    tri = BlockTridiagonal(2, blocks(3), blocks(2), blocks(2), rng.standard_normal((2, 2)))
    T = assemble(tri, with_trailing=True)
    assert T.shape == (8, 6)
    bi, bj = np.indices(T.shape) // 2
    assert np.all(T[np.abs(bi - bj) > 1] == 0)


def test_assemble_inconsistent():
    with pytest.raises(ValueError):
        assemble(BlockTridiagonal(1, [np.eye(1)] * 2, [], []))


# --- ritz_extract / residual estimate -------------------------------------------------

@pytest.mark.parametrize("kernel", KERNELS)
@pytest.mark.parametrize("seed", range(5))
def test_full_dimension_exactness(kernel, seed):
    # at m*s = n the default path drifts from biorthogonality on non-normal input
    prob = gen_spaced_diagonalizable(60, seed=seed)
    A = prob.operator.matrix
    exact = np.sort(prob.exact_spectrum.real)[::-1]
    for s in (2, 3, 4):
        V1, W1 = biorth_pair(np.random.default_rng(s), 60, s)
        d = kernel(A, V1, W1, 60 // s, full_reorth=True)
        assert d.breakdown is None
        assert np.abs(oracle_eigvals(d.T()) - exact).max() <= 1e-7


def test_full_dimension_exactness_normal_default_path():
    g = np.random.default_rng(7)
    P = np.linalg.qr(g.standard_normal((60, 60)))[0]
    A = P @ np.diag(np.linspace(10, 1, 60)) @ P.T
    V1, W1 = biorth_pair(g, 60, 3)
    d = able(A, V1, W1, 20)
    assert np.abs(oracle_eigvals(d.T()) - np.linspace(10, 1, 60)).max() <= 1e-7


def test_diag_top_ritz_value(rng):
    A = np.diag(np.arange(10.0, 0.0, -1.0))
    V1, W1 = biorth_pair(rng, 10, 2)
    for kernel in KERNELS:
        d = kernel(A, V1, W1, 5)
        r = ritz_extract(d, 2, A)
        assert abs(r.values[0] - 10) <= 1e-4
        assert np.allclose(np.linalg.norm(r.ritz_vectors, axis=0), 1, atol=1e-12)


def test_invariant_start_zero_residuals():
    A = np.diag(np.arange(10.0, 0.0, -1.0))
    V1 = np.eye(10)[:, :2]
    d = able(A, V1, V1, 3)
    r = ritz_extract(d, 2, A)
    assert np.allclose(r.values, [10, 9])
    assert np.all(r.per_pair_residuals <= 1e-10)
    assert r.block_residual_estimate == 0.0


def test_ritz_values_match_dense_oracle_and_phase(rng):
    A = rng.standard_normal((50, 50))
    V1, W1 = biorth_pair(rng, 50, 2)
    d = able(A, V1, W1, 8)
    r = ritz_extract(d, 4, A)
    ref = oracle_eigvals(d.T())
    assert np.abs(r.all_values - ref).max() <= 1e-10 * np.linalg.norm(d.T())
    assert np.all(np.diff(r.values.real) <= 0)
    for i in range(4):
        z = r.ritz_vectors[:, i]
        first = np.flatnonzero(np.abs(z) > 1e-8 * np.abs(z).max())[0]
        assert z[first].imag == 0 and z[first].real > 0
        direct = np.linalg.norm(A @ z - r.values[i] * z)
        assert r.per_pair_residuals[i] == pytest.approx(direct, rel=1e-8, abs=1e-12)


def test_conjugate_pairs_share_residuals():
    # rotation block plus a real tail: top Ritz values form a conjugate pair
    n = 30
    A = np.diag(np.linspace(1, 0.1, n))
    A[:2, :2] = [[3.0, 1.0], [-1.0, 3.0]]
    V1, W1 = biorth_pair(np.random.default_rng(0), n, 1)
    d = block_lanczos(A, V1, W1, 12)
    r = ritz_extract(d, 1, A)
    assert abs(abs(r.values[0].imag) - 1) < 1e-6


def test_residual_estimate_zero_trailing():
    tri = BlockTridiagonal(1, [np.eye(1)], [], [], np.zeros((1, 1)))
    from spectral_krylov.lanczos import LanczosDecomposition
    d = LanczosDecomposition([np.ones((3, 1)), np.ones((3, 1))], [np.ones((3, 1))] * 2, tri, 1)
    assert residual_estimate_block(d, np.ones((1, 1))) == 0.0
    with pytest.raises(ValueError):
        residual_estimate_block(d, np.ones((2, 1)))


@pytest.mark.parametrize("kernel", KERNELS)
def test_residual_estimate_identity(kernel):
    for seed in range(10):
        g = np.random.default_rng(seed)
        n, s, m = int(g.integers(30, 201)), int(g.integers(1, 4)), int(g.integers(2, 9))
        A = g.standard_normal((n, n))
        V1, W1 = biorth_pair(g, n, s)
        d = kernel(A, V1, W1, m)
        T = d.T()
        lam, Y = np.linalg.eig(T)
        Z = d.basis("V") @ Y
        direct = np.linalg.norm(A @ Z - Z * lam)
        est = residual_estimate_block(d, Y)
        assert est == pytest.approx(direct, rel=1e-8)


def test_residual_estimate_scalar_case(rng):
    A = rng.standard_normal((40, 40))
    V1, W1 = biorth_pair(rng, 40, 1)
    d = block_lanczos(A, V1, W1, 5)
    y = np.linalg.eig(d.T())[1][:, :1]
    c = d.tridiag.trailing[0, 0]
    expected = abs(c) * abs(y[-1, 0]) * np.linalg.norm(d.V[5])
    assert residual_estimate_block(d, y) == pytest.approx(expected, rel=1e-12)
