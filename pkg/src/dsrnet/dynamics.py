"""Right-hand sides for nominal, gain-scaled and DSR network dynamics.

All functions are pure: they take the current (and delayed) states and
return time derivatives. The simulator owns the history buffers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .graph import PinnedSystem

__all__ = [
    "DsrParams",
    "DsrMatrices",
    "SourceSignal",
    "alpha_hat",
    "dsr_matrices",
    "nominal_rhs",
    "scaled_nominal_rhs",
    "dsr_rhs",
    "dsr_tracking_rhs",
    "agent_reinforcement",
    "per_agent_update",
    "higher_order_rhs",
    "ideal_rhs",
]


def alpha_hat(alpha: float, r: int) -> np.ndarray:
    """Coefficients of ``(s + alpha)**r`` in increasing powers of ``s``."""
    return np.array([math.comb(r, k) * alpha ** (r - k) for k in range(r + 1)])


@dataclass(frozen=True)
class DsrParams:
    alpha: float
    beta: float
    tau: float
    omega: float | None = None
    r: int = 1

    def __post_init__(self):
        for name in ("alpha", "beta", "tau"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if self.omega is not None and not (self.omega > 0):
            raise ValueError(f"omega must be positive, got {self.omega}")
        if int(self.r) != self.r or self.r < 1:
            raise ValueError(f"relative degree r must be an integer >= 1, got {self.r}")

    @property
    def alpha_hat(self) -> np.ndarray:
        return alpha_hat(self.alpha, self.r)

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "tau": self.tau,
                "omega": self.omega, "r": self.r}


@dataclass(frozen=True)
class DsrMatrices:
    A: np.ndarray
    A_d: np.ndarray
    B_d: np.ndarray


SourceKind = Literal["step", "smooth-step", "sinusoid"]


@dataclass(frozen=True)
class SourceSignal:
    """Source trajectory ``z_s(t)`` with analytic derivatives.

    ``step`` jumps from 0 to ``amplitude`` just after ``t = 0``; its
    derivatives are taken as right limits (all zero for ``t > 0``).
    ``smooth-step`` is a raised-cosine ramp over ``rise_time`` seconds and
    ``sinusoid`` is ``amplitude * sin(frequency * t)``.
    """

    kind: SourceKind = "step"
    amplitude: float = 1.0
    rise_time: float = 1.0
    frequency: float = 1.0

    def __post_init__(self):
        if self.kind not in ("step", "smooth-step", "sinusoid"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "smooth-step" and not self.rise_time > 0:
            raise ValueError("rise_time must be positive")

    @property
    def differentiable(self) -> bool:
        return self.kind != "step"

    @property
    def final_value(self) -> float:
        return self.amplitude

    def value(self, t: float, right: bool = False) -> float:
        """``z_s(t)``; with ``right=True`` the step returns its right limit at 0."""
        return float(self.derivatives(t, 0, right=right)[0])

    def derivatives(self, t: float, order: int, right: bool = False) -> np.ndarray:
        """``[z_s, z_s', ..., z_s^(order)]`` at time ``t``."""
        out = np.zeros(order + 1)
        zd = self.amplitude
        if self.kind == "step":
            if t > 0 or (right and t >= 0):
                out[0] = zd
            return out
        if t <= 0:
            return out
        if self.kind == "smooth-step":
            if t >= self.rise_time:
                out[0] = zd
                return out
            w = math.pi / self.rise_time
            out[0] = 0.5 * zd * (1.0 - math.cos(w * t))
            for k in range(1, order + 1):
                out[k] = -0.5 * zd * w**k * math.cos(w * t + k * math.pi / 2)
            return out
        w = self.frequency
        for k in range(order + 1):
            out[k] = zd * w**k * math.sin(w * t + k * math.pi / 2)
        return out

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "amplitude": self.amplitude}
        if self.kind == "smooth-step":
            d["rise_time"] = self.rise_time
        elif self.kind == "sinusoid":
            d["frequency"] = self.frequency
        return d


def dsr_matrices(ps: PinnedSystem, p: DsrParams) -> DsrMatrices:
    n = ps.n
    M = np.eye(n) - p.beta * ps.K
    A = -p.alpha * p.beta * ps.K + M / p.tau
    A_d = -M / p.tau
    B_d = p.alpha * p.beta * ps.B
    return DsrMatrices(A=A, A_d=A_d, B_d=B_d)


def nominal_rhs(ps: PinnedSystem, z_s: float, Z: np.ndarray) -> np.ndarray:
    """``dZ/dt = U = -K Z + B z_s``."""
    return -ps.K @ Z + ps.B * z_s


def scaled_nominal_rhs(ps: PinnedSystem, k_gain: float, z_s: float, Z: np.ndarray) -> np.ndarray:
    return k_gain * (-ps.K @ Z + ps.B * z_s)


def dsr_rhs(m: DsrMatrices, Z_now: np.ndarray, Z_delayed: np.ndarray, z_s: float) -> np.ndarray:
    return m.A @ Z_now + m.A_d @ Z_delayed + m.B_d * z_s


def dsr_tracking_rhs(
    m: DsrMatrices,
    p: DsrParams,
    ps: PinnedSystem,
    Z_now: np.ndarray,
    Z_delayed: np.ndarray,
    z_s: float,
    dz_s: float,
) -> np.ndarray:
    """DSR tracking law: the step law plus the ``beta B dz_s/dt`` feedforward."""
    return m.A @ Z_now + m.A_d @ Z_delayed + m.B_d * z_s + p.beta * ps.B * dz_s


def agent_reinforcement(k_row: np.ndarray, z_i: float, Z: np.ndarray, beta: float) -> float:
    """Locally available signal ``v_i = z_i - beta K_i Z``."""
    return z_i - beta * float(k_row @ Z)


def per_agent_update(
    i: int,
    k_row: np.ndarray,
    b_i: float,
    Z: np.ndarray,
    z_s: float,
    v_delayed: float,
    p: DsrParams,
) -> float:
    """One agent's DSR update using only its own Laplacian row.

    ``v_delayed`` is the agent's own ``v_i(t - tau)``, kept in its local
    history buffer.
    """
    k_row = np.asarray(k_row, dtype=float)
    ab = p.alpha * p.beta
    v_now = agent_reinforcement(k_row, Z[i], Z, p.beta)
    return -ab * float(k_row @ Z) + ab * b_i * z_s + (v_now - v_delayed) / p.tau


def higher_order_rhs(
    ps: PinnedSystem,
    p: DsrParams,
    state: np.ndarray,
    delayed_inputs: np.ndarray,
    source: np.ndarray,
    dsr_term: bool = True,
) -> np.ndarray:
    """Derivative of the stacked higher-order DSR state.

    ``state`` has shape ``(2r, n)``: rows ``0..r-1`` are ``Z, Z', ...,
    Z^(r-1)`` and rows ``r..2r-1`` the filter chain ``Zhat^(1..r)``.
    ``delayed_inputs[j]`` is the chain input of stage ``j+1`` evaluated at
    ``t - tau`` (``Z`` for the first stage, ``Zhat^(j)`` afterwards).
    ``source`` holds ``z_s^(0..r)``. With ``dsr_term=False`` the
    ``(I - beta K) Zhat^(r)`` term is dropped.
    """
    if p.omega is None:
        raise ValueError("higher-order DSR needs a filter cutoff omega")
    r = p.r
    a_hat = p.alpha_hat
    if len(source) < r + 1:
        raise ValueError(f"need source derivatives up to order {r}")
    Zk = state[:r]
    F = state[r:]
    out = np.empty_like(state)
    out[: r - 1] = Zk[1:]

    weighted = np.tensordot(a_hat[:r], Zk, axes=1)
    zs_star = float(a_hat @ np.asarray(source[: r + 1]))
    acc = -p.beta * (ps.K @ weighted) + p.beta * ps.B * zs_star
    if dsr_term:
        acc = acc + F[r - 1] - p.beta * (ps.K @ F[r - 1])
    out[r - 1] = acc

    chain_in = np.vstack([Zk[:1], F[: r - 1]])
    out[r:] = -p.omega * F + p.omega * (chain_in - delayed_inputs) / p.tau
    return out


def ideal_rhs(alpha: float, r: int, state: np.ndarray, source: np.ndarray) -> np.ndarray:
    """Ideal cohesive dynamics ``Z^(r) = -sum a_k Z^(k) + 1 sum a_k z_s^(k)``.

    ``state`` has shape ``(r, n)`` (``Z`` and its first ``r-1`` derivatives).
    """
    a_hat = alpha_hat(alpha, r)
    out = np.empty_like(state)
    out[: r - 1] = state[1:]
    out[r - 1] = -np.tensordot(a_hat[:r], state, axes=1) + float(a_hat @ source[: r + 1])
    return out
