"""Chebyshev polynomial filtering on an ellipse.

The filter is ``P_k(z) = T_k((z - d)/c) / T_k((lam_s - d)/c)`` for an
ellipse with real center ``d`` and squared focal half-distance ``c2``
(negative when the foci sit on the vertical line through ``d``). The block
recurrence is written in terms of ``tau_i = sigma_i / c``::

    tau_1     = 1 / (lam_s - d)
    tau_{i+1} = 1 / (2 (lam_s - d) - c2 tau_i)
    Z_{i+1}   = 2 tau_{i+1} (A - d I) Z_i - c2 tau_i tau_{i+1} Z_{i-1}

which only involves ``c2``, so it stays real for either sign of ``c2`` and
reduces to scaled power iteration when ``c2 == 0``.
"""

from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass

import numpy as np

from .linalg import as_operator, frobenius_norm

log = logging.getLogger(__name__)

_RESCALE_AT = 1e100


class NoSpectralGap(ValueError):
    """The reference eigenvalue is not separated from the unwanted set."""


@dataclass(frozen=True)
class EllipseParams:
    d: float
    c_squared: float
    lambda_ref: complex
    semi_a: float
    semi_b: float

    @property
    def lambda_s(self) -> float:
        """Real reference used by the filter (imaginary part dropped)."""
        return float(np.real(self.lambda_ref))

    def contains(self, z, slack: float = 1e-12) -> bool:
        z = complex(z)
        x, y = z.real - self.d, abs(z.imag)
        a, b = self.semi_a, self.semi_b
        if a > 0 and b > 0:
            return (x / a) ** 2 + (y / b) ** 2 <= 1 + slack
        if a > 0:
            return y <= slack * a and abs(x) <= a * (1 + slack)
        if b > 0:
            return abs(x) <= slack * b and y <= b * (1 + slack)
        return abs(z - self.d) <= slack * max(1.0, abs(self.d))


@dataclass(frozen=True)
class FilterSpec:
    ellipse: EllipseParams
    degree: int

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"filter degree must be >= 1, got {self.degree}")


def estimate_ellipse(unwanted, lambda_ref, inflate: float = 1.01) -> EllipseParams:
    """Bounding ellipse around ``unwanted`` that keeps ``lambda_ref`` outside.

    The center is the midpoint of the real extent. The real semi-axis is the
    half-extent inflated by ``inflate``, but never by more than half the gap
    to ``Re(lambda_ref)``. The imaginary semi-axis is the smallest one (times
    ``inflate``) that still puts every unwanted value inside.
    """
    pts = np.atleast_1d(np.asarray(unwanted, dtype=complex))
    if pts.size == 0:
        raise ValueError("estimate_ellipse needs at least one unwanted value")
    lam = complex(lambda_ref)
    xmax, xmin = pts.real.max(), pts.real.min()
    gap = lam.real - xmax
    if not gap > 0:
        raise NoSpectralGap(
            f"reference Re={lam.real:.6g} does not exceed the unwanted set (max Re={xmax:.6g}); "
            "try a larger m or a different s")
    d = 0.5 * (xmax + xmin)
    half = 0.5 * (xmax - xmin)
    a = min(inflate * half, half + 0.5 * gap) if half > 0 else 0.0
    ymax = np.abs(pts.imag).max()
    if ymax == 0.0:
        b = 0.0
    elif a == 0.0:
        b = inflate * ymax
    else:
        u = np.clip((pts.real - d) / a, -1.0, 1.0)
        b = inflate * np.max(np.abs(pts.imag) / np.sqrt(1.0 - u * u))
    e = EllipseParams(float(d), float(a * a - b * b), lam, float(a), float(b))
    x = lam.real - d
    if a > 0 and b > 0:
        outside = (x / a) ** 2 + (lam.imag / b) ** 2 > 1
    else:
        outside = abs(x) > a
    if not outside:
        raise NoSpectralGap("reference eigenvalue falls inside the enclosing ellipse")
    return e


def _joukowski(w: complex, c2: float) -> complex:
    r = cmath.sqrt(w * w - c2)
    return max(w + r, w - r, key=abs)


def convergence_factor(ellipse: EllipseParams, lambda_i) -> float:
    """Damping ratio of ``lambda_i`` against the reference under the filter."""
    c2 = ellipse.c_squared
    num = _joukowski(ellipse.d - complex(lambda_i), c2)
    den = _joukowski(ellipse.d - complex(ellipse.lambda_ref), c2)
    if den == 0:
        raise ZeroDivisionError("reference sits at the ellipse center with c^2 = 0")
    return abs(num) / abs(den)


def cheb_poly_scalar(spec: FilterSpec, lam) -> complex:
    """``T_k((lam - d)/c) / T_k((lam_s - d)/c)`` evaluated directly."""
    e = spec.ellipse
    k = spec.degree
    lam = complex(lam)
    ls = e.lambda_s
    if e.c_squared == 0.0:
        if ls == e.d:
            raise ZeroDivisionError("reference at the center of a point ellipse")
        return ((lam - e.d) / (ls - e.d)) ** k
    c = cmath.sqrt(e.c_squared)

    def T(x):
        t0, t1 = 1.0 + 0j, x
        for _ in range(k - 1):
            t0, t1 = t1, 2 * x * t1 - t0
        return t1

    den = T((ls - e.d) / c)
    if den == 0:
        raise ZeroDivisionError("T_k vanishes at the reference")
    return T((lam - e.d) / c) / den


def cheb_filter(op, Z0: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Apply ``P_k(A)`` to the block ``Z0`` by the three-term recurrence.

    Iterates whose norm passes 1e100 are rescaled together with their
    predecessor; this changes the column scaling only, not the span.
    """
    op = as_operator(op)
    e = spec.ellipse
    Z0 = np.asarray(Z0, dtype=float)
    if Z0.shape[0] != op.n:
        raise ValueError(f"block has {Z0.shape[0]} rows, operator is {op.n}")
    if np.imag(e.lambda_ref) != 0:
        log.info("complex reference %s: filtering with its real part", e.lambda_ref)
    shift = e.lambda_s - e.d
    c2 = e.c_squared
    if shift == 0.0:
        raise ZeroDivisionError("reference coincides with the ellipse center")

    def shifted(Z):
        return op.apply(Z) - e.d * Z

    tau = 1.0 / shift
    prev, cur = Z0, tau * shifted(Z0)
    for _ in range(spec.degree - 1):
        tau_next = 1.0 / (2.0 * shift - c2 * tau)
        nxt = 2.0 * tau_next * shifted(cur) - (c2 * tau * tau_next) * prev
        tau = tau_next
        nrm = frobenius_norm(nxt)
        if not np.isfinite(nrm):
            raise FloatingPointError("Chebyshev filter produced non-finite values; "
                                     "the ellipse is probably misplaced")
        if nrm > _RESCALE_AT:
            nxt = nxt / nrm
            cur = cur / nrm
        prev, cur = cur, nxt
    if not np.all(np.isfinite(cur)):
        raise FloatingPointError("Chebyshev filter produced non-finite values")
    return cur
