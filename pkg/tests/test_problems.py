import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from spectral_krylov.dense_eig import eigvals_dense
from spectral_krylov.problems import (MatrixMarketError, gen_laplacian2d,
                                      gen_spaced_diagonalizable, laplacian_exact_eigs,
                                      read_matrix_market, write_matrix_market)


def _lap_eigs_bruteforce(N):
    """Closed form enumerated over all (i, j), independent of the library loop."""
    c = np.cos(np.arange(1, N + 1) * np.pi / (N + 1))
    return np.sort((4 - 2 * c[:, None] - 2 * c[None, :]).ravel())[::-1]


# --- gen_laplacian2d -----------------------------------------------------------------

def test_laplacian_n2_dense_form():
    A = gen_laplacian2d(2).operator.matrix.toarray()
    assert np.array_equal(A, [[4, -1, -1, 0], [-1, 4, 0, -1], [-1, 0, 4, -1], [0, -1, -1, 4]])


def test_laplacian_n50_structure():
    A = gen_laplacian2d(50).operator.matrix
    assert sp.issparse(A) and A.shape == (2500, 2500)
    assert np.diff(A.indptr).max() <= 5
    assert (A != A.T).nnz == 0
    assert set(np.unique(A.data)) == {-1.0, 4.0}


@pytest.mark.parametrize("N", range(1, 7))
def test_laplacian_matches_kron_reference(N):
    # T(x)I + I(x)T has 8 on the diagonal; the 5-point stencil has 4
    ref = np.kron(np.eye(N), 4 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)) \
        - np.kron(np.eye(N, k=1) + np.eye(N, k=-1), np.eye(N))
    A = gen_laplacian2d(N).operator.matrix.toarray()
    assert np.array_equal(A, ref)
    x = np.random.default_rng(N).integers(-1000, 1000, N * N).astype(float)  # exact sums
    assert np.array_equal(gen_laplacian2d(N).operator.apply(x), ref @ x)


def test_laplacian_scaled():
    N = 3
    A = gen_laplacian2d(N).operator.matrix.toarray()
    As = gen_laplacian2d(N, scaled=True).operator.matrix.toarray()
    assert np.allclose(As, A * (N + 1) ** 2, rtol=1e-15)


def test_laplacian_rejects_n0():
    with pytest.raises(ValueError):
        gen_laplacian2d(0)


# --- laplacian_exact_eigs ------------------------------------------------------------

def test_exact_eigs_n50_top_values():
    top = laplacian_exact_eigs(50, 4)
    assert round(top[0], 4) == 7.9924
    assert top[0] == pytest.approx(4 + 4 * np.cos(np.pi / 51), abs=1e-14)
    assert round(top[1], 4) == round(top[2], 4) == 7.9810
    assert top[1] == pytest.approx(top[2], abs=1e-14)


def test_exact_eigs_n2():
    assert np.allclose(laplacian_exact_eigs(2, 4), [6, 4, 4, 2], atol=1e-14)


@pytest.mark.parametrize("N", [1, 3, 7, 20])
def test_exact_eigs_trace_and_bruteforce(N):
    vals = laplacian_exact_eigs(N, N * N)
    assert abs(vals.sum() - 4 * N * N) <= 1e-9 * N * N
    assert np.allclose(vals, _lap_eigs_bruteforce(N), atol=1e-13)


@pytest.mark.parametrize("N", [4, 9])
def test_exact_eigs_match_dense_solver(N):
    A = gen_laplacian2d(N).operator.matrix.toarray()
    assert np.allclose(laplacian_exact_eigs(N, N * N), np.sort(np.linalg.eigvalsh(A))[::-1],
                       atol=1e-12)


def test_exact_eigs_count_bounds():
    with pytest.raises(ValueError):
        laplacian_exact_eigs(3, 0)
    with pytest.raises(ValueError):
        laplacian_exact_eigs(3, 10)


# --- gen_spaced_diagonalizable ---------------------------------------------------------

def test_spaced_n1():
    p = gen_spaced_diagonalizable(1)
    assert np.array_equal(p.operator.matrix, [[10.0]])


def test_spaced_n10_recovery():
    p = gen_spaced_diagonalizable(10)
    assert np.allclose(p.exact_spectrum, np.arange(10.0, 0.0, -1.0))
    vals = eigvals_dense(p.operator.matrix)
    assert np.abs(vals - np.arange(10.0, 0.0, -1.0)).max() <= 1e-8


@pytest.mark.parametrize("n", [2, 17, 60])
def test_spaced_planted_spectrum_relative(n):
    p = gen_spaced_diagonalizable(n, 5.0, -3.0, seed=n)
    vals = eigvals_dense(p.operator.matrix)
    assert np.all(np.abs(vals - p.exact_spectrum) <= 1e-7 * np.abs(p.exact_spectrum).max())


def test_spaced_deterministic():
    a = gen_spaced_diagonalizable(30, seed=9)
    b = gen_spaced_diagonalizable(30, seed=9)
    assert np.array_equal(a.operator.matrix, b.operator.matrix) and a.seed == b.seed


def _cond1(seed, n):
    Q = np.random.default_rng(seed).standard_normal((n, n))
    return np.linalg.norm(Q, 1) * np.linalg.norm(np.linalg.inv(Q), 1)


def test_spaced_conditioning_guard_redraws():
    first = _cond1(0, 40)
    p = gen_spaced_diagonalizable(40, seed=0, max_cond=0.999 * first)
    assert p.seed > 0
    assert _cond1(p.seed, 40) <= 0.999 * first
    assert all(_cond1(s, 40) > 0.999 * first for s in range(p.seed))
    with pytest.raises(RuntimeError):
        gen_spaced_diagonalizable(40, seed=0, max_cond=10.0)


def test_spaced_errors():
    with pytest.raises(ValueError):
        gen_spaced_diagonalizable(5, 1.0, 2.0)
    with pytest.raises(MemoryError):
        gen_spaced_diagonalizable(10 ** 6)


# --- Matrix Market --------------------------------------------------------------------

def test_mm_one_by_one_exact_text(tmp_path):
    f = tmp_path / "a.mtx"
    write_matrix_market(f, np.array([[2.5]]))
    assert f.read_text() == "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2.5\n"


@pytest.mark.parametrize("symmetric", [False, True])
def test_mm_laplacian_round_trip(tmp_path, symmetric):
    A = gen_laplacian2d(2).operator.matrix
    f = tmp_path / "lap.mtx"
    write_matrix_market(f, A, symmetric=symmetric)
    B = read_matrix_market(f).matrix
    assert (A != B).nnz == 0
    # scipy's reader as an independent oracle for the file contents
    assert np.array_equal(scipy.io.mmread(str(f)).toarray(), A.toarray())


def test_mm_random_values_bit_exact(tmp_path):
    g = np.random.default_rng(1)
    A = sp.random(30, 30, density=0.2, random_state=2, format="csr")
    A.data = g.standard_normal(A.nnz) * 10.0 ** g.integers(-300, 300, A.nnz)
    f = tmp_path / "r.mtx"
    write_matrix_market(f, A)
    B = read_matrix_market(f).matrix
    assert B.shape == (30, 30)
    assert np.array_equal(B.toarray(), A.toarray())


def test_mm_reads_scipy_written_file(tmp_path):
    A = sp.random(8, 8, density=0.4, random_state=4, format="coo")
    f = tmp_path / "s.mtx"
    scipy.io.mmwrite(str(f), A, precision=17)
    assert np.array_equal(read_matrix_market(f).matrix.toarray(), A.toarray())


@pytest.mark.parametrize("body, msg", [
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1.0\n", "out of bounds"),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", "out of bounds"),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n", "duplicate"),
    ("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n", "header"),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", "expected 2"),
    ("%%MatrixMarket matrix coordinate real general\n2 x 1\n1 1 1.0\n", "size line"),
    ("", "empty"),
])
def test_mm_malformed(tmp_path, body, msg):
    f = tmp_path / "bad.mtx"
    f.write_text(body)
    with pytest.raises(MatrixMarketError, match=msg):
        read_matrix_market(f)


def test_mm_comments_after_header(tmp_path):
    f = tmp_path / "c.mtx"
    f.write_text("%%MatrixMarket matrix coordinate real symmetric\n% note\n%\n2 2 2\n1 1 1.5\n2 1 -2\n")
    A = read_matrix_market(f).matrix.toarray()
    assert np.array_equal(A, [[1.5, -2.0], [-2.0, 0.0]])
