"""Explicitly restarted block Lanczos / ABLE drivers, optionally with
Chebyshev filtering of the restart block."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .chebyshev import FilterSpec, NoSpectralGap, cheb_filter, estimate_ellipse
from .lanczos import RitzSet, able, block_lanczos, real_block, ritz_extract
from .linalg import as_operator, qr_factor

log = logging.getLogger(__name__)

METHODS = ("block-lanczos", "able", "block-lanczos-cheb", "able-cheb")


@dataclass
class SolverConfig:
    s: int = 4
    m: int = 30
    k: int = 20
    max_restarts: int = 10
    tol: float = 1e-8
    breakdown_tol: float = 1e-10
    seed: int = 0
    method: str = "able-cheb"
    full_reorth: bool = False

    @property
    def filtered(self) -> bool:
        return self.method.endswith("-cheb")

    def validate(self, n: int) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.m * self.s > n:
            raise ValueError(f"m*s = {self.m * self.s} exceeds n = {n}")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.filtered and self.k < 1:
            raise ValueError("k must be >= 1 for filtered methods")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be >= 0")


@dataclass
class ConvergenceRecord:
    restart_index: int
    ritz_values: np.ndarray
    per_pair_residuals: np.ndarray
    max_residual: float
    block_residual_estimate: float
    breakdown_events: int
    block_width: int
    filtered: bool = False
    note: str = ""


@dataclass
class SolveReport:
    config: SolverConfig
    n: int
    converged: bool
    records: list
    final: RitzSet
    wall_time: float
    operator_applications: dict
    diagnostics: list = field(default_factory=list)
    # Column applications implied by the records: every cycle costs
    # steps * w of A and of A^T (w = block width) plus one A application per
    # real column of the Ritz block for the residuals; a filtered restart
    # adds k * w of A. Must equal ``operator_applications``.
    expected_applications: dict = field(default_factory=dict)

    @property
    def restarts_performed(self) -> int:
        return len(self.records) - 1

    def to_dict(self) -> dict:
        c = self.config
        return {
            "method": c.method,
            "n": self.n,
            "s": c.s,
            "m": c.m,
            "k": c.k if c.filtered else None,
            "restarts_performed": self.restarts_performed,
            "converged": bool(self.converged),
            "ritz": [{"re": float(v.real), "im": float(v.imag), "residual": float(r)}
                     for v, r in zip(self.final.values, self.final.per_pair_residuals)],
            "history": [{"restart": r.restart_index,
                         "max_residual": float(r.max_residual),
                         "block_estimate": float(r.block_residual_estimate),
                         "block_width": r.block_width,
                         "breakdown_events": r.breakdown_events,
                         "ritz": [[float(v.real), float(v.imag)] for v in r.ritz_values],
                         "residuals": [float(x) for x in r.per_pair_residuals]}
                        for r in self.records],
            "operator_applications": dict(self.operator_applications),
            "seed": c.seed,
            "wall_time_s": self.wall_time,
            "tol": c.tol,
            "max_restarts": c.max_restarts,
            "breakdown_tol": c.breakdown_tol,
            "diagnostics": list(self.diagnostics),
            "expected_applications": dict(self.expected_applications),
        }


def initial_blocks(n: int, s: int, seed: int = 0):
    """``V1 = W1`` = orthonormal factor of a seeded standard normal block."""
    if not 1 <= s <= n:
        raise ValueError(f"need 1 <= s <= n, got s={s}, n={n}")
    G = np.random.default_rng(seed).standard_normal((n, s))
    Q = qr_factor(G).Q
    return Q, Q.copy()


def check_convergence(ritz: RitzSet, tol: float):
    """Converged when every ``||A z - mu z|| / max(1, |mu|) <= tol``.

    Returns ``(converged, max_residual)`` with the unscaled maximum.
    """
    res = np.asarray(ritz.per_pair_residuals, dtype=float)
    scaled = res / np.maximum(1.0, np.abs(ritz.values))
    return bool(np.all(scaled <= tol)), float(res.max()) if res.size else 0.0


def _unwanted(all_values, wanted, tol=1e-8):
    """Ritz values outside the wanted set, minus near-copies of wanted ones.

    Conjugates of wanted values count as wanted: a pair straddling the
    cut goes into the restart block whole.
    """
    keep = np.concatenate([wanted, np.conj(wanted)])
    rest = list(all_values[len(wanted):])
    return np.array([mu for mu in rest if np.min(np.abs(keep - mu)) > tol], dtype=complex)


def solve(op, config: SolverConfig, callback=None) -> SolveReport:
    """Restarted block Lanczos / ABLE, with optional Chebyshev filtering.

    Each cycle runs ``m`` Lanczos steps, extracts the ``s`` Ritz pairs of
    largest real part, records their residuals and stops once converged or
    out of restarts. Otherwise the real Ritz block is (for ``*-cheb``
    methods) filtered by ``P_k(A)`` on an ellipse around the remaining Ritz
    values, orthonormalised, and used as ``V1 = W1`` for the next cycle.

    ``callback(record, V1_next)`` is called after every cycle that restarts.
    """
    op = as_operator(op)
    config.validate(op.n)
    t0 = time.perf_counter()
    a0, at0 = op.n_apply, op.n_apply_t
    kernel = able if config.method.startswith("able") else block_lanczos
    kwargs = dict(breakdown_tol=config.breakdown_tol, full_reorth=config.full_reorth)
    rng = np.random.default_rng(config.seed + 7919)
    s = config.s
    V1, W1 = initial_blocks(op.n, s, config.seed)
    records: list[ConvergenceRecord] = []
    diagnostics: list[str] = []
    expected = {"A": 0, "AT": 0}
    converged = False
    ritz = None
    stalled = 0
    best = np.inf

    for cycle in range(config.max_restarts + 1):
        w = V1.shape[1]
        m = min(config.m, op.n // w)
        if kernel is able:
            decomp = kernel(op, V1, W1, m, seed=config.seed + cycle, **kwargs)
        else:
            decomp = kernel(op, V1, W1, m, **kwargs)
        steps = decomp.steps_completed
        ritz = ritz_extract(decomp, s, op)
        X, _ = real_block(ritz.values, ritz.ritz_vectors)
        expected["A"] += steps * w + X.shape[1]
        expected["AT"] += steps * w
        converged, max_res = check_convergence(ritz, config.tol)
        events = (decomp.breakdown is not None) + len(decomp.recoveries) + len(decomp.deflations)
        rec = ConvergenceRecord(cycle, ritz.values.copy(), ritz.per_pair_residuals.copy(),
                                max_res, ritz.block_residual_estimate, events, w)
        records.append(rec)
        log.info("cycle %d: max residual %.3e, block estimate %.3e, steps %d",
                 cycle, max_res, ritz.block_residual_estimate, steps)
        if converged or cycle == config.max_restarts:
            break

        if X.shape[1] > s:
            rec.note = "conjugate pair straddles s; restart block widened"
        Z = X
        if config.filtered:
            unwanted = _unwanted(ritz.all_values, ritz.values)
            if unwanted.size == 0:
                rec.note = (rec.note + "; " if rec.note else "") + "no unwanted Ritz values; filter skipped"
            else:
                try:
                    ellipse = estimate_ellipse(unwanted, ritz.values[-1])
                except NoSpectralGap as exc:
                    diagnostics.append(f"cycle {cycle}: {exc}")
                    log.warning("cycle %d: %s", cycle, exc)
                    break
                Z = cheb_filter(op, X, FilterSpec(ellipse, config.k))
                expected["A"] += config.k * X.shape[1]
                rec.filtered = True
        V1 = qr_factor(Z).Q

        if max_res < 0.99 * best:
            best = max_res
            stalled = 0
        else:
            stalled += 1
        if stalled >= 3:
            E = rng.standard_normal(V1.shape)
            V1 = qr_factor(V1 + 1e-6 * E / np.linalg.norm(E) * np.linalg.norm(V1)).Q
            stalled = 0
            diagnostics.append(f"cycle {cycle}: stagnation, restart block perturbed")
            log.info("cycle %d: stagnation guard perturbed the restart block", cycle)
        W1 = V1.copy()
        if callback is not None:
            callback(rec, V1)

    applications = {"A": op.n_apply - a0, "AT": op.n_apply_t - at0}
    applications["total"] = applications["A"] + applications["AT"]
    expected["total"] = expected["A"] + expected["AT"]
    return SolveReport(config, op.n, converged, records, ritz,
                       time.perf_counter() - t0, applications, diagnostics, expected)
