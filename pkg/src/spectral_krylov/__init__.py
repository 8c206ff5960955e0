"""Block Krylov eigensolvers for the dominant eigenvalues of large real
nonsymmetric matrices: restarted block Lanczos, ABLE, and Chebyshev-filtered
restarts of both."""

from .chebyshev import (EllipseParams, FilterSpec, NoSpectralGap, cheb_filter,
                        cheb_poly_scalar, convergence_factor, estimate_ellipse)
from .dense_eig import ConvergenceError, Spectrum, eig_dense, eigvals_dense, francis_qr, hessenberg
from .driver import (METHODS, ConvergenceRecord, SolverConfig, SolveReport, check_convergence,
                     initial_blocks, solve)
from .lanczos import (BlockTridiagonal, LanczosDecomposition, LanczosError, RitzSet, able,
                      block_lanczos, residual_estimate_block, ritz_extract)
from .linalg import LinearOperator, as_operator, kron, lu_biorth_split, qr_factor, svd_small
from .problems import (GeneratedProblem, MatrixMarketError, gen_laplacian2d,
                       gen_spaced_diagonalizable, laplacian_exact_eigs, read_matrix_market,
                       write_matrix_market)

__version__ = "0.1.0"

