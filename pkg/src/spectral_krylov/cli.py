"""Command-line front end: ``spectral-krylov {solve,generate,exact,validate}``.

Exit codes: 0 converged (or success), 2 solver did not converge, 1 error.
Diagnostics go to stderr; verbosity comes from ``SPECTRAL_KRYLOV_LOG``
(``error``, ``info`` or ``debug``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .dense_eig import eig_dense
from .driver import METHODS, SolverConfig, solve
from .problems import (MatrixMarketError, gen_laplacian2d, gen_spaced_diagonalizable,
                       read_matrix_market, write_matrix_market)

log = logging.getLogger("spectral_krylov")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
ORACLE_MAX_N = 2000
LOG_ENV = "SPECTRAL_KRYLOV_LOG"
_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

# generator name -> {key: (type, required)}
GENERATORS = {
    "laplacian2d": {"N": (int, True)},
    "spaced": {"n": (int, True), "max": (float, False), "min": (float, False)},
}


class CliError(Exception):
    """User-facing error; the message names the offending flag or path."""


def parse_gen(spec: str) -> tuple[str, dict]:
    """``"name:key=val,key=val"`` -> ``(name, {key: value})``."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in GENERATORS:
        raise CliError(f"--gen: unknown generator {name!r} (choose from {', '.join(GENERATORS)})")
    schema = GENERATORS[name]
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq:
            raise CliError(f"--gen: expected key=value, got {item!r}")
        if key not in schema:
            raise CliError(f"--gen: unknown key {key!r} for {name} (allowed: {', '.join(schema)})")
        if key in params:
            raise CliError(f"--gen: key {key!r} given twice")
        kind = schema[key][0]
        try:
            params[key] = kind(val)
        except ValueError:
            raise CliError(f"--gen: {key}={val!r} is not a valid {kind.__name__}") from None
    missing = [k for k, (_, req) in schema.items() if req and k not in params]
    if missing:
        raise CliError(f"--gen: {name} needs {', '.join(missing)}")
    return name, params


def load_problem(args):
    """Return ``(operator, exact_values_or_None, description)``."""
    if args.matrix and args.gen:
        raise CliError("--matrix and --gen are mutually exclusive")
    if not args.matrix and not args.gen:
        raise CliError("one of --matrix or --gen is required")
    threads = getattr(args, "threads", 1)
    if threads < 1:
        raise CliError("--threads must be >= 1")
    if args.matrix:
        if not os.path.isfile(args.matrix):
            raise CliError(f"--matrix: no such file: {args.matrix}")
        try:
            op = read_matrix_market(args.matrix, threads=threads)
        except (MatrixMarketError, ValueError) as exc:
            raise CliError(f"--matrix: {exc}") from None
        if op.shape[0] != op.shape[1]:
            raise CliError(f"--matrix: {args.matrix} is not square")
        return op, None, f"matrix file {args.matrix}"
    name, params = parse_gen(args.gen)
    try:
        if name == "laplacian2d":
            prob = gen_laplacian2d(params["N"], scaled=args.scaled)
        else:
            if args.scaled:
                raise CliError("--scaled only applies to laplacian2d")
            prob = gen_spaced_diagonalizable(params["n"], params.get("max", 10.0),
                                             params.get("min", 1.0), seed=args.seed)
    except (ValueError, MemoryError) as exc:
        raise CliError(f"--gen: {exc}") from None
    op = prob.operator
    if threads > 1:
        op.threads = threads
    return op, prob.exact_spectrum, prob.description


def config_from_args(args, n: int) -> SolverConfig:
    checks = [
        (args.s >= 1, "--s must be >= 1"),
        (args.m >= 1, "--m must be >= 1"),
        (args.k >= 1, "--k must be >= 1"),
        (args.restarts >= 0, "--restarts must be >= 0"),
        (args.tol > 0, "--tol must be > 0"),
        (args.breakdown_tol > 0, "--breakdown-tol must be > 0"),
    ]
    for ok, msg in checks:
        if not ok:
            raise CliError(msg)
    if args.m * args.s > n:
        raise CliError(f"--m * --s = {args.m * args.s} exceeds the matrix dimension n = {n}")
    return SolverConfig(s=args.s, m=args.m, k=args.k, max_restarts=args.restarts, tol=args.tol,
                        breakdown_tol=args.breakdown_tol, seed=args.seed, method=args.method,
                        full_reorth=args.reorth)


def _open_out(path, flag):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise CliError(f"{flag}: cannot write {path}: {exc.strerror}") from None


def write_history(path, report) -> None:
    with _open_out(path, "--history") as fh:
        fh.write("restart,max_residual,block_estimate\n")
        for r in report.records:
            fh.write(f"{r.restart_index},{r.max_residual:.17g},{r.block_residual_estimate:.17g}\n")


def write_spectrum(path, values) -> None:
    values = np.asarray(values)
    with _open_out(path, "--spectrum") as fh:
        if np.iscomplexobj(values) and np.any(values.imag != 0):
            fh.write("index,re,im\n")
            for i, v in enumerate(values, 1):
                fh.write(f"{i},{v.real:.17g},{v.imag:.17g}\n")
        else:
            fh.write("index,value\n")
            for i, v in enumerate(np.real(values), 1):
                fh.write(f"{i},{v:.17g}\n")


def _run_solver(args):
    op, exact, desc = load_problem(args)
    config = config_from_args(args, op.n)
    if args.threads > 1:
        log.warning("--threads %d: histories are not bitwise reproducible", args.threads)
    log.info("solving %s (n=%d) with %s", desc, op.n, config.method)
    report = solve(op, config)
    for d in report.diagnostics:
        print(f"warning: {d}", file=sys.stderr)
    return op, exact, report


def cmd_solve(args) -> int:
    _, _, report = _run_solver(args)
    if args.out:
        with _open_out(args.out, "--out") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    if args.history:
        write_history(args.history, report)
    for i, (v, r) in enumerate(zip(report.final.values, report.final.per_pair_residuals), 1):
        print(f"{i:3d}  {v.real: .12f} {v.imag:+.3e}j  residual {r:.3e}")
    print(f"converged: {report.converged}  restarts: {report.restarts_performed}  "
          f"A/A^T applications: {report.operator_applications['A']}/"
          f"{report.operator_applications['AT']}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_generate(args) -> int:
    if not args.gen:
        raise CliError("generate needs --gen")
    if args.matrix:
        raise CliError("generate takes --gen, not --matrix")
    if not args.out:
        raise CliError("generate needs --out <matrix path>")
    op, exact, desc = load_problem(args)
    try:
        write_matrix_market(args.out, op)
    except OSError as exc:
        raise CliError(f"--out: cannot write {args.out}: {exc.strerror}") from None
    if args.spectrum:
        if exact is None:
            raise CliError("--spectrum: no exact spectrum known for this problem")
        write_spectrum(args.spectrum, exact)
    print(f"wrote {desc} (n={op.n}, nnz={op.nnz}) to {args.out}")
    return EXIT_OK


def _reference_values(op, exact, count):
    """Exact values when known, otherwise the dense oracle's."""
    if exact is not None:
        return np.asarray(exact, dtype=complex)[:count]
    if op.n > ORACLE_MAX_N:
        raise CliError(f"--matrix: n = {op.n} exceeds the dense oracle budget ({ORACLE_MAX_N})")
    return eig_dense(op.todense(), vectors=False).values[:count]


def cmd_exact(args) -> int:
    op, exact, _ = load_problem(args)
    count = op.n if args.count is None else args.count
    if not 1 <= count <= op.n:
        raise CliError(f"--count must be in [1, {op.n}]")
    vals = _reference_values(op, exact, count)
    if args.spectrum:
        write_spectrum(args.spectrum, vals)
    else:
        for i, v in enumerate(vals, 1):
            print(f"{i},{v.real:.17g}" if v.imag == 0 else f"{i},{v.real:.17g},{v.imag:.17g}")
    return EXIT_OK


def format_table(exact, computed, residuals) -> str:
    lines = [f"{'index':>5}  {'exact':>22}  {'computed':>22}  {'abs_error':>10}  {'residual':>10}"]
    for i, (e, c, r) in enumerate(zip(exact, computed, residuals), 1):
        ex = f"{e.real:.15g}" if e.imag == 0 else f"{e.real:.8g}{e.imag:+.3g}j"
        co = f"{c.real:.15g}" if c.imag == 0 else f"{c.real:.8g}{c.imag:+.3g}j"
        lines.append(f"{i:>5}  {ex:>22}  {co:>22}  {abs(c - e):>10.3e}  {r:>10.3e}")
    return "\n".join(lines)


def cmd_validate(args) -> int:
    op, exact, report = _run_solver(args)
    computed = report.final.values
    ref = _reference_values(op, exact, len(computed))
    print(format_table(ref, computed, report.final.per_pair_residuals))
    if args.out:
        with _open_out(args.out, "--out") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    if args.history:
        write_history(args.history, report)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_argument_group("matrix source (exactly one)")
    src.add_argument("--matrix", metavar="PATH", help="Matrix Market file")
    src.add_argument("--gen", metavar="SPEC",
                     help="generator, e.g. laplacian2d:N=50 or spaced:n=500,max=10,min=1")
    common.add_argument("--scaled", action="store_true",
                        help="multiply the Laplacian by (N+1)^2")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1,
                        help="threads for matrix products (histories then not bitwise reproducible)")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--method", choices=METHODS, default="able-cheb")
    solver.add_argument("--s", type=int, default=4, help="block size / wanted eigenvalues")
    solver.add_argument("--m", type=int, default=30, help="Lanczos steps per cycle")
    solver.add_argument("--k", type=int, default=20, help="Chebyshev degree")
    solver.add_argument("--restarts", type=int, default=10)
    solver.add_argument("--tol", type=float, default=1e-8)
    solver.add_argument("--breakdown-tol", type=float, default=1e-10)
    solver.add_argument("--reorth", action="store_true",
                        help="full two-sided re-biorthogonalization (diagnostic)")
    solver.add_argument("--out", metavar="JSON", help="write the report here")
    solver.add_argument("--history", metavar="CSV", help="write the residual history here")

    p = argparse.ArgumentParser(prog="spectral-krylov",
                                description="Restarted block Lanczos / ABLE eigensolvers "
                                            "with Chebyshev filtering.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common, solver], help="run a solver").set_defaults(
        func=cmd_solve)
    g = sub.add_parser("generate", parents=[common], help="write a test matrix")
    g.add_argument("--out", metavar="MTX", help="Matrix Market output")
    g.add_argument("--spectrum", metavar="CSV", help="also write the exact spectrum")
    g.set_defaults(func=cmd_generate)
    e = sub.add_parser("exact", parents=[common], help="print reference eigenvalues")
    e.add_argument("--count", type=int, help="how many (default: all)")
    e.add_argument("--spectrum", metavar="CSV", help="write to CSV instead of stdout")
    e.set_defaults(func=cmd_exact)
    sub.add_parser("validate", parents=[common, solver],
                   help="solve and compare with exact/oracle values").set_defaults(
        func=cmd_validate)
    return p


def _setup_logging() -> None:
    level_name = os.environ.get(LOG_ENV, "error").strip().lower()
    level = _LEVELS.get(level_name, logging.ERROR)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(level)
    log.propagate = False
    if level_name not in _LEVELS:
        log.error("%s=%r not recognised; using 'error'", LOG_ENV, level_name)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for non-convergence
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
