"""Dense eigenvalues and multi-branch Lambert W with verified residuals.

Eigenvalues come from LAPACK (Hessenberg reduction followed by Francis
double-shift QR, via ``numpy.linalg.eigvals``). Lambert W comes from
``scipy.special.lambertw`` (asymptotic/branch-point seeding plus Halley
iteration); results are polished with extra Halley steps and checked
against the defining identity before being returned.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import lambertw as _scipy_lambertw

__all__ = [
    "EigenError",
    "LambertWError",
    "EigenResult",
    "eigenvalues",
    "lambert_w",
    "lambert_w_from_log",
    "lambert_residual",
]

INV_E = math.exp(-1.0)


class EigenError(ArithmeticError):
    pass


class LambertWError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray
    max_residual: float
    converged: bool


def _smallest_singular(M: np.ndarray, lam: complex) -> float:
    shifted = M.astype(complex) - lam * np.eye(M.shape[0])
    return float(np.linalg.svd(shifted, compute_uv=False)[-1])


def eigenvalues(M, *, rtol: float = 1e-8) -> EigenResult:
    """All eigenvalues of a real square matrix.

    Each returned value is checked by the smallest singular value of
    ``M - lam I``, which must not exceed ``rtol * ||M||``; real input yields
    a conjugate-closed set (exact real parts for real eigenvalues).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ValueError(f"expected a nonempty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    try:
        lam = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"QR iteration did not converge: {exc}") from exc
    lam = np.asarray(lam, dtype=complex)

    scale = max(np.linalg.norm(M, 2), np.finfo(float).tiny)
    residuals = [_smallest_singular(M, x) for x in lam]
    worst = max(residuals) / scale
    if worst > rtol:
        raise EigenError(f"eigenvalue residual {worst:.3e} exceeds {rtol:.1e}")
    return EigenResult(eigenvalues=lam, max_residual=worst, converged=True)


def lambert_residual(w: complex, h: complex) -> float:
    return abs(w * cmath.exp(w) - h)


def lambert_w(branch: int, h: complex, *, rtol: float = 1e-10) -> complex:
    """``W_branch(h)``: the solution of ``W exp(W) = h`` on the given branch.

    Raises :class:`LambertWError` when the identity residual exceeds
    ``rtol * (1 + |h|)`` after polishing.
    """
    h = complex(h)
    k = int(branch)
    if not (math.isfinite(h.real) and math.isfinite(h.imag)):
        raise ValueError(f"non-finite argument {h!r}")
    if h == 0:
        if k == 0:
            return 0j
        raise LambertWError(f"W_{k}(0) is -infinity")
    if h == -INV_E and k in (0, -1):
        return complex(-1.0)

    w = complex(_scipy_lambertw(h, k, tol=1e-15))
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        # scipy gives up on subnormal arguments; seed from the asymptotic series
        L1 = cmath.log(h) + 2j * math.pi * k
        L2 = cmath.log(L1) if L1 != 0 else 0j
        w = L1 - L2 + (L2 / L1 if L1 != 0 else 0j)
        if not (math.isfinite(w.real) and math.isfinite(w.imag)):
            raise LambertWError(f"W_{k}({h}) did not converge")
    limit = rtol * (1.0 + abs(h))
    for _ in range(50):
        if lambert_residual(w, h) <= limit * 1e-2:
            break
        ew = cmath.exp(w)
        f = w * ew - h
        wp1 = w + 1.0
        if abs(wp1) < 1e-12:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-16 * (1.0 + abs(w)):
            break
    if lambert_residual(w, h) > limit:
        raise LambertWError(
            f"W_{k}({h}) residual {lambert_residual(w, h):.3e} exceeds {limit:.3e}"
        )
    if k == 0 and h.imag == 0.0 and h.real >= -INV_E:
        w = complex(w.real, 0.0)
    return w


def lambert_w_from_log(branch: int, log_h: complex, *, rtol: float = 1e-12) -> complex:
    """``W_branch(exp(log_h))`` for arguments too large to form explicitly.

    Solves ``w + log(w) = log_h + 2 pi i k`` by Newton from the asymptotic
    series; meant for ``Re(log_h)`` large, where branch ``k`` of the series
    is unambiguous.
    """
    k = int(branch)
    L = complex(log_h) + 2j * math.pi * k
    if abs(L) < 10:
        return lambert_w(k, cmath.exp(log_h))
    L2 = cmath.log(L)
    w = L - L2 + L2 / L
    for _ in range(50):
        f = w + cmath.log(w) - L
        step = f / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 1e-16 * abs(w):
            break
    if abs(w + cmath.log(w) - L) > rtol * abs(L):
        raise LambertWError(f"W_{k}(exp({log_h})) did not converge")
    return w
