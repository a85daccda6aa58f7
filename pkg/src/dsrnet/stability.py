"""Stability instruments for the delayed networks.

Each mode of the first-order delayed network reduces to a scalar delay
equation ``s - lam - lam_d exp(-s tau) = 0``. The root survey solves it on
a window of Lambert W branches; the remaining checks are sufficient
conditions (or, for the all-real Hayes test, an exact one) expressed in
closed form.

Sufficient conditions only ever report ``stable`` or ``not-guaranteed``;
``unstable`` comes from a surveyed root in the right half plane or from a
Hayes violation.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import brentq

from .dynamics import DsrParams
from .graph import PinnedSystem, Spectrum
from .numerics import LambertWError, lambert_w, lambert_w_from_log

__all__ = [
    "ModalPair",
    "StabilityReport",
    "SurveyResult",
    "to_jsonable",
    "modal_pairs",
    "beta_lower_bound",
    "lambert_root_survey",
    "survey_check",
    "theorem1_check",
    "corollary1_check",
    "corollary2_check",
    "hayes_V",
    "hayes_check",
    "brayton_check",
    "filter_delay_sup",
    "eps_lambda",
    "theorem2_check",
]

Verdict = Literal["stable", "not-guaranteed", "unstable", "not-applicable"]

UNSTABLE_TOL = 1e-9
ROOT_RESIDUAL_TOL = 1e-8
REAL_TOL = 1e-9


def _cplx(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def to_jsonable(value):
    if isinstance(value, complex):
        return _cplx(value)
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


@dataclass(frozen=True)
class ModalPair:
    """Scalar delay equation of one Laplacian mode."""

    lambda_i: complex
    lambda_di: complex
    lambda_K: complex


@dataclass
class StabilityReport:
    method: str
    verdict: Verdict
    details: list[dict] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    reason: str | None = None

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"

    def as_dict(self) -> dict:
        out = {
            "method": self.method,
            "verdict": self.verdict,
            "params": self.params,
            "details": self.details,
        }
        out.update(self.extras)
        if self.reason is not None:
            out["reason"] = self.reason
        return to_jsonable(out)


@dataclass
class SurveyResult:
    """Roots per modal pair (one per branch, ``nan`` where a branch failed)."""

    branches: np.ndarray
    roots: list[np.ndarray]
    failed: list[tuple[int, int]]
    max_residual: float
    rightmost: complex

    @property
    def rightmost_real(self) -> float:
        return self.rightmost.real


def modal_pairs(spec: Spectrum | Sequence[complex], p: DsrParams) -> list[ModalPair]:
    lam = spec.eigenvalues if isinstance(spec, Spectrum) else np.asarray(spec, dtype=complex)
    out = []
    for lk in lam:
        lk = complex(lk)
        out.append(ModalPair(
            lambda_i=-p.alpha * p.beta * lk + (1 - p.beta * lk) / p.tau,
            lambda_di=-(1 - p.beta * lk) / p.tau,
            lambda_K=lk,
        ))
    return out


def beta_lower_bound(spec: Spectrum) -> float:
    """Smallest admissible ``beta`` is anything above ``max 1/Re(lambda_K)``."""
    return float(np.max(1.0 / spec.eigenvalues.real))


def _char_residual(s: complex, lam: complex, lam_d: complex, tau: float) -> float:
    return abs(s - lam - lam_d * cmath.exp(-s * tau))


def _newton_polish(s: complex, lam: complex, lam_d: complex, tau: float) -> complex:
    # two Newton steps on the characteristic function, kept only if they help
    best, best_res = s, _char_residual(s, lam, lam_d, tau)
    for _ in range(2):
        e = lam_d * cmath.exp(-s * tau)
        g = s - lam - e
        dg = 1 + tau * e
        if dg == 0:
            break
        step = g / dg
        if abs(step) > 1e-6 * (1 + abs(s)):
            break
        s = s - step
        res = _char_residual(s, lam, lam_d, tau)
        if res < best_res:
            best, best_res = s, res
    return best


def lambert_root_survey(
    pairs: Sequence[ModalPair], p: DsrParams, k_max: int = 10
) -> SurveyResult:
    """Roots ``s = lam + W_k(tau lam_d exp(-lam tau)) / tau`` for ``|k| <= k_max``.

    A mode with ``lam_d = 0`` is an ordinary ODE with the single root
    ``lam``. Branches whose Lambert evaluation fails or whose root misses
    the characteristic equation by more than ``1e-8`` (relative to the
    size of its terms) are flagged in ``failed`` and skipped.

    The survey only inspects a window of branches; it can falsify a
    stability claim but does not prove one.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    tau = p.tau
    branches = np.arange(-k_max, k_max + 1)
    roots: list[np.ndarray] = []
    failed: list[tuple[int, int]] = []
    worst = 0.0
    rightmost = complex(-math.inf, 0.0)
    for i, pair in enumerate(pairs):
        lam, lam_d = complex(pair.lambda_i), complex(pair.lambda_di)
        row = np.full(branches.size, complex(np.nan, np.nan))
        if abs(lam_d) <= REAL_TOL * max(1.0, abs(lam)):
            row[:] = lam
            roots.append(row)
            if lam.real > rightmost.real:
                rightmost = lam
            continue
        log_H = cmath.log(tau * lam_d) - lam * tau
        for j, k in enumerate(branches):
            try:
                if log_H.real < 700:
                    w = lambert_w(int(k), cmath.exp(log_H))
                else:
                    w = lambert_w_from_log(int(k), log_H)
            except LambertWError:
                failed.append((i, int(k)))
                continue
            s = _newton_polish(lam + w / tau, lam, lam_d, tau)
            res = _char_residual(s, lam, lam_d, tau)
            scale = 1.0 + abs(s) + abs(lam)
            if res > ROOT_RESIDUAL_TOL * scale:
                failed.append((i, int(k)))
                continue
            worst = max(worst, res / scale)
            row[j] = s
            if s.real > rightmost.real:
                rightmost = s
        roots.append(row)
    return SurveyResult(branches, roots, failed, worst, rightmost)


def _survey_verdict(rightmost_real: float) -> Verdict:
    if rightmost_real > UNSTABLE_TOL:
        return "unstable"
    if rightmost_real < -UNSTABLE_TOL:
        return "stable"
    return "not-guaranteed"


def survey_check(spec: Spectrum, p: DsrParams, k_max: int = 10) -> StabilityReport:
    """Root survey packaged as a report; ``stable`` here means no surveyed root
    reached the right half plane (a falsification test, not a proof)."""
    pairs = modal_pairs(spec, p)
    res = lambert_root_survey(pairs, p, k_max)
    details = []
    for pair, row in zip(pairs, res.roots):
        ok = row[np.isfinite(row)]
        right = ok[np.argmax(ok.real)] if ok.size else complex(np.nan, np.nan)
        details.append({
            "lambda_K": pair.lambda_K,
            "lambda_i": pair.lambda_i,
            "lambda_di": pair.lambda_di,
            "rightmost_root": right,
            "roots": [complex(r) for r in row],
        })
    return StabilityReport(
        method="lambert-survey",
        verdict=_survey_verdict(res.rightmost_real),
        details=details,
        params=p.as_dict(),
        extras={
            "k_max": k_max,
            "rightmost_root": res.rightmost,
            "max_residual": res.max_residual,
            "failed_branches": res.failed,
        },
    )


def _beta_precondition(spec: Spectrum, p: DsrParams) -> str | None:
    bound = beta_lower_bound(spec)
    if p.beta > bound:
        return None
    return (
        f"precondition violated: beta={p.beta:g} must exceed max 1/Re(lambda_K)={bound:.6g}"
    )


def theorem1_check(spec: Spectrum, p: DsrParams) -> StabilityReport:
    """``|b lam - 1| - (b Re lam - 1) < alpha tau b Re lam`` for every mode."""
    params = p.as_dict()
    reason = _beta_precondition(spec, p)
    if reason:
        return StabilityReport("theorem1", "not-guaranteed", params=params, reason=reason)
    b, at = p.beta, p.alpha * p.tau
    details = []
    ok = True
    for lk in spec.eigenvalues:
        lhs = abs(b * lk - 1) - (b * lk.real - 1)
        rhs = at * b * lk.real
        details.append({"lambda_K": complex(lk), "lhs": float(lhs), "rhs": float(rhs)})
        ok &= bool(lhs < rhs)
    return StabilityReport("theorem1", "stable" if ok else "not-guaranteed", details, params)


def corollary1_check(
    m_lo: float, m_hi: float, phi_hi: float, p: DsrParams
) -> StabilityReport:
    """Bound-only test from ``m_lo <= |lambda_K| <= m_hi`` and ``|arg| <= phi_hi``."""
    params = p.as_dict()
    b = p.beta
    if not b * m_lo * math.cos(phi_hi) > 1:
        return StabilityReport(
            "corollary1", "not-guaranteed", params=params,
            reason=(
                f"precondition violated: beta*m_lo*cos(phi_hi)="
                f"{b * m_lo * math.cos(phi_hi):.6g} must exceed 1"
            ),
        )
    rho = math.hypot(b * m_hi * math.sin(phi_hi), b * m_hi * math.cos(phi_hi) - 1)
    psi = math.atan(b * m_lo * math.sin(phi_hi) / (b * m_lo * math.cos(phi_hi) - 1))
    lhs = (rho + 1) / (rho * math.cos(psi) + 1) - 1
    rhs = p.alpha * p.tau
    verdict: Verdict = "stable" if lhs < rhs else "not-guaranteed"
    return StabilityReport(
        "corollary1", verdict,
        details=[{"lhs": lhs, "rhs": rhs}],
        params=params,
        extras={"rho_bar": rho, "psi_bar": psi,
                "bounds": {"m_lo": m_lo, "m_hi": m_hi, "phi_hi": phi_hi}},
    )


def corollary2_check(spec: Spectrum, p: DsrParams) -> StabilityReport:
    """All-real spectrum plus ``beta > 1/min lambda_K`` gives stability for any
    positive ``alpha`` and ``tau``."""
    params = p.as_dict()
    if not spec.all_real:
        return StabilityReport("corollary2", "not-guaranteed", params=params,
                               reason="spectrum is not real")
    reason = _beta_precondition(spec, p)
    if reason:
        return StabilityReport("corollary2", "not-guaranteed", params=params, reason=reason)
    details = [{"lambda_K": complex(lk), "beta_lambda": p.beta * lk.real}
               for lk in spec.eigenvalues]
    return StabilityReport("corollary2", "stable", details, params)


def hayes_V(a: float) -> float:
    """Root of ``V cot V = a`` on ``(0, pi)``; needs ``a < 1``."""
    if not a < 1:
        raise ValueError(f"V cot V = a has no root in (0, pi) for a={a} >= 1")
    if a == 0:
        return math.pi / 2
    # V cos V - a sin V changes sign exactly once on (0, pi)
    g = lambda v: v * math.cos(v) - a * math.sin(v)
    # near 0, g(v) ~ v (1 - a) - v^3 (1/2 - a/6), so a small enough v is positive
    lo = 1e-3 * min(1.0, math.sqrt(1 - a))
    return brentq(g, lo, math.pi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500)


def hayes_check(pairs: Sequence[ModalPair], p: DsrParams) -> StabilityReport:
    """Exact test for real modes, applied to the delay-scaled pair
    ``a = tau lam``, ``b = tau lam_d``: stable iff ``a < 1`` and
    ``a < -b < sqrt(V^2 + a^2)``."""
    params = p.as_dict()
    details = []
    verdict: Verdict = "stable"
    for pair in pairs:
        lam, lam_d = complex(pair.lambda_i), complex(pair.lambda_di)
        if abs(lam.imag) > REAL_TOL or abs(lam_d.imag) > REAL_TOL:
            raise ValueError("hayes_check needs real modal pairs")
        a, b = p.tau * lam.real, p.tau * lam_d.real
        rec = {"lambda_K": pair.lambda_K, "a": a, "b": b}
        if a >= 1:
            rec.update(V=None, ok=False)
            verdict = "unstable"
        else:
            V = hayes_V(a)
            bound = math.sqrt(V * V + a * a)
            ok = a < -b < bound
            rec.update(V=V, lhs=-b, rhs=bound, ok=ok)
            if not ok:
                verdict = "unstable"
        details.append(rec)
    return StabilityReport("hayes", verdict, details, params)


def brayton_check(ps: PinnedSystem, p: DsrParams) -> StabilityReport:
    """Delay-independent test: ``-A - A_d`` and ``-A + A_d`` positive definite."""
    params = p.as_dict()
    K = ps.K
    if not np.allclose(K, K.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(K).max())):
        return StabilityReport("brayton", "not-applicable", params=params,
                               reason="pinned Laplacian is not symmetric")
    n = ps.n
    ab = p.alpha * p.beta
    P1 = ab * K
    P2 = ab * K - (2.0 / p.tau) * (np.eye(n) - p.beta * K)
    e1 = float(np.linalg.eigvalsh(0.5 * (P1 + P1.T)).min())
    e2 = float(np.linalg.eigvalsh(0.5 * (P2 + P2.T)).min())
    ok = e1 > 0 and e2 > 0
    return StabilityReport(
        "brayton", "stable" if ok else "not-guaranteed",
        details=[{"form": "-A-A_d", "min_eig": e1}, {"form": "-A+A_d", "min_eig": e2}],
        params=params,
    )


def _golden_max(f, a: float, b: float, rtol: float = 1e-10) -> tuple[float, float]:
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > rtol * max(abs(a), abs(b), 1e-300):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def filter_delay_sup(tau: float, omega: float | None, n_grid: int = 200_000) -> tuple[float, float]:
    """``sup_w |f(jw) (1 - exp(-jw tau))|`` for ``f = omega/(s + omega)``.

    ``omega=None`` means no filter (``f = 1``). Returns ``(sup, argmax)``.
    A grid pass over ``[0, 200 max(1/tau, omega)]`` is refined by golden
    section around the best grid point.
    """
    if omega is None:
        g = lambda w: 2.0 * abs(math.sin(0.5 * w * tau))
        w_max = 200.0 / tau
    else:
        g = lambda w: omega / math.hypot(w, omega) * 2.0 * abs(math.sin(0.5 * w * tau))
        w_max = 200.0 * max(1.0 / tau, omega)
    w = np.linspace(0.0, w_max, n_grid)
    mag = 2.0 * np.abs(np.sin(0.5 * w * tau))
    if omega is not None:
        mag *= omega / np.hypot(w, omega)
    i = int(np.argmax(mag))
    lo, hi = w[max(i - 1, 0)], w[min(i + 1, n_grid - 1)]
    x, val = _golden_max(g, lo, hi)
    if mag[i] > val:
        x, val = float(w[i]), float(mag[i])
    return float(val), float(x)


def eps_lambda(p: DsrParams, spec: Spectrum | None = None,
               bounds: tuple[float, float, float] | None = None) -> float:
    """Lower bound on ``|b lam / (1 - b lam)|`` (``r > 1``) or
    ``|b Re lam / (1 - b lam)|`` (``r = 1``).

    Exact over the spectrum when given, else from ``(m_lo, m_hi, phi_hi)``.
    """
    b = p.beta
    if spec is not None:
        lam = spec.eigenvalues
        num = np.abs(b * lam) if p.r > 1 else np.abs(b * lam.real)
        return float(np.min(num / np.abs(1 - b * lam)))
    if bounds is None:
        raise ValueError("need a spectrum or bounds")
    m_lo, m_hi, phi_hi = bounds
    den = math.sqrt(b * b * m_hi * m_hi - 2 * b * m_hi * math.cos(phi_hi) + 1)
    if p.r > 1:
        return b * m_hi / den
    return b * m_lo * math.cos(phi_hi) / den


def theorem2_check(
    p: DsrParams,
    spec: Spectrum | None = None,
    bounds: tuple[float, float, float] | None = None,
) -> StabilityReport:
    """Filtered higher-order test ``sup |f (1 - e^{-s tau})| < eps^(1/r) alpha tau``."""
    params = p.as_dict()
    if spec is not None:
        reason = _beta_precondition(spec, p)
    elif bounds is not None:
        m_lo, _, phi_hi = bounds
        val = p.beta * m_lo * math.cos(phi_hi)
        reason = None if val > 1 else (
            f"precondition violated: beta*m_lo*cos(phi_hi)={val:.6g} must exceed 1")
    else:
        raise ValueError("need a spectrum or bounds")
    if reason:
        return StabilityReport("theorem2", "not-guaranteed", params=params, reason=reason)
    eps = eps_lambda(p, spec, bounds)
    sup, w_star = filter_delay_sup(p.tau, p.omega)
    rhs = eps ** (1.0 / p.r) * p.alpha * p.tau
    verdict: Verdict = "stable" if sup < rhs else "not-guaranteed"
    return StabilityReport(
        "theorem2", verdict,
        details=[{"lhs": sup, "rhs": rhs, "omega_at_sup": w_star}],
        params=params,
        extras={"eps_lambda": eps, "sup": sup,
                "eps_source": "spectrum" if spec is not None else "bounds"},
    )
