"""Fixed-step RK4 method-of-steps integration of the network dynamics."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from . import dynamics as dyn
from .dynamics import DsrParams, SourceSignal
from .graph import PinnedSystem

__all__ = [
    "ConfigError",
    "SimConfig",
    "Trajectory",
    "integrate",
    "integrate_ideal",
    "lemma1_deviation",
    "default_step",
]

Mode = Literal[
    "nominal", "scaled-nominal", "dsr", "dsr-tracking", "dsr-higher-order", "ideal-cohesive"
]
MODES: tuple[str, ...] = (
    "nominal", "scaled-nominal", "dsr", "dsr-tracking", "dsr-higher-order", "ideal-cohesive"
)
DELAYED_MODES = frozenset({"dsr", "dsr-tracking", "dsr-higher-order"})
DIVERGENCE_LIMIT = 1e12


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    mode: Mode
    source: SourceSignal = field(default_factory=SourceSignal)
    T: float = 20.0
    params: DsrParams | None = None
    k_gain: float = 1.0
    h: float | None = None
    initial: tuple[float, ...] | None = None
    dsr_term: bool = True

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "source": self.source.as_dict(),
            "T": self.T,
            "params": None if self.params is None else self.params.as_dict(),
            "k_gain": self.k_gain,
            "h": self.h,
            "dsr_term": self.dsr_term,
        }


@dataclass
class Trajectory:
    """Uniform-grid samples; ``states`` and ``inputs`` are ``(steps+1, n)``."""

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    source: np.ndarray
    mode: str
    diverged: bool = False

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    def to_csv(self, path: str | Path) -> None:
        n = self.n
        header = ["t"] + [f"z{i}" for i in range(1, n + 1)] + [f"u{i}" for i in range(1, n + 1)] + ["zs"]
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for k in range(len(self.times)):
                row = [self.times[k], *self.states[k], *self.inputs[k], self.source[k]]
                w.writerow([f"{x:.17g}" for x in row])

    @classmethod
    def from_csv(cls, path: str | Path, mode: str = "unknown") -> "Trajectory":
        with open(path, newline="", encoding="ascii") as fh:
            rows = list(csv.reader(fh))
        header, data = rows[0], np.array(rows[1:], dtype=float)
        n = sum(1 for h in header if h.startswith("z") and h != "zs")
        return cls(
            times=data[:, 0],
            states=data[:, 1 : 1 + n],
            inputs=data[:, 1 + n : 1 + 2 * n],
            source=data[:, -1],
            mode=mode,
        )


def default_step(T: float, tau: float | None = None) -> float:
    if tau is None:
        return T / 20000
    h = min(tau / 20, T / 20000)
    return tau / math.ceil(tau / h - 1e-9)


def _delay_steps(tau: float, h: float) -> int:
    m = tau / h
    m_int = round(m)
    if m_int < 1 or abs(m - m_int) > 1e-9 * max(m, 1.0):
        raise ConfigError(f"step h={h} must divide the delay tau={tau}")
    return m_int


# An rhs maps (t, state, delayed state, source derivatives) -> d(state)/dt.
Rhs = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _run(
    rhs: Rhs,
    x0: np.ndarray,
    source: SourceSignal,
    src_order: int,
    T: float,
    h: float,
    m: int | None,
    input_row: int | None,
    mode: str,
) -> Trajectory:
    n_steps = max(1, math.ceil(T / h - 1e-9))
    X = np.empty((n_steps + 1,) + x0.shape)
    X[0] = x0
    U = np.zeros((n_steps + 1, x0.shape[-1]))
    S = np.zeros(n_steps + 1)
    times = np.arange(n_steps + 1) * h

    def hist(j: int) -> np.ndarray:
        return X[j] if j > 0 else X[0]

    def as_input(dx: np.ndarray) -> np.ndarray:
        return dx if input_row is None else dx[input_row]

    none = x0  # placeholder for modes without delay
    last = n_steps
    diverged = False
    for k in range(n_steps):
        t = times[k]
        x = X[k]
        if m is None:
            d0 = dh = d1 = none
        else:
            j = k - m
            d0, d1 = hist(j), hist(j + 1)
            dh = 0.5 * (d0 + d1)
        s0 = source.derivatives(t, src_order, right=True)
        sh = source.derivatives(t + 0.5 * h, src_order)
        s1 = source.derivatives(t + h, src_order)
        k1 = rhs(t, x, d0, s0)
        if k == 0:
            U[0] = as_input(k1)
        k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1, dh, sh)
        k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2, dh, sh)
        k4 = rhs(t + h, x + h * k3, d1, s1)
        x_new = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        X[k + 1] = x_new
        S[k + 1] = s1[0]
        U[k + 1] = as_input(rhs(t + h, x_new, d1, s1))
        if not np.all(np.isfinite(x_new)) or np.max(np.abs(x_new)) > DIVERGENCE_LIMIT:
            diverged = True
            last = k + 1
            break
    # the source column keeps z_s(0) = 0; U[0] uses the right limit of the source
    S[0] = source.value(0.0)
    states = X[: last + 1, 0] if X.ndim == 3 else X[: last + 1]
    return Trajectory(
        times=times[: last + 1],
        states=np.array(states),
        inputs=U[: last + 1],
        source=S[: last + 1],
        mode=mode,
        diverged=diverged,
    )


def _check_horizon(cfg: SimConfig) -> None:
    p = cfg.params
    if p is not None and cfg.T < 10 * max(1.0 / p.alpha, p.tau):
        warnings.warn(
            f"horizon T={cfg.T} is shorter than 10*max(1/alpha, tau)="
            f"{10 * max(1.0 / p.alpha, p.tau):.4g}",
            stacklevel=3,
        )


def integrate(cfg: SimConfig, ps: PinnedSystem) -> Trajectory:
    """Integrate one configuration on a uniform grid ``[0, h, ..., T]``.

    Delayed values at half steps are linear interpolations of the stored
    grid; pre-history equals the initial state (filter states zero).
    Divergence truncates the run and sets ``Trajectory.diverged``.
    """
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if not cfg.T > 0:
        raise ConfigError("horizon T must be positive")
    n = ps.n
    z0 = np.zeros(n) if cfg.initial is None else np.asarray(cfg.initial, dtype=float)
    if z0.shape != (n,):
        raise ConfigError(f"initial state must have {n} entries")
    p = cfg.params
    src = cfg.source

    if cfg.mode in DELAYED_MODES or cfg.mode == "ideal-cohesive":
        if p is None:
            raise ConfigError(f"mode {cfg.mode} requires DSR parameters")
        _check_horizon(cfg)

    if cfg.mode in DELAYED_MODES:
        h = cfg.h if cfg.h is not None else default_step(cfg.T, p.tau)
        m = _delay_steps(p.tau, h)
    else:
        h = cfg.h if cfg.h is not None else default_step(cfg.T)
        m = None
    if not h > 0:
        raise ConfigError("step h must be positive")

    if cfg.mode == "nominal":
        return _run(lambda t, x, xd, s: dyn.nominal_rhs(ps, s[0], x),
                    z0, src, 0, cfg.T, h, None, None, cfg.mode)
    if cfg.mode == "scaled-nominal":
        if not cfg.k_gain > 0:
            raise ConfigError("k_gain must be positive")
        kg = cfg.k_gain
        return _run(lambda t, x, xd, s: dyn.scaled_nominal_rhs(ps, kg, s[0], x),
                    z0, src, 0, cfg.T, h, None, None, cfg.mode)
    if cfg.mode == "dsr":
        mats = dyn.dsr_matrices(ps, p)
        return _run(lambda t, x, xd, s: dyn.dsr_rhs(mats, x, xd, s[0]),
                    z0, src, 0, cfg.T, h, m, None, cfg.mode)
    if cfg.mode == "dsr-tracking":
        if not src.differentiable:
            raise ConfigError("tracking mode needs a differentiable source (not a step)")
        mats = dyn.dsr_matrices(ps, p)
        return _run(lambda t, x, xd, s: dyn.dsr_tracking_rhs(mats, p, ps, x, xd, s[0], s[1]),
                    z0, src, 1, cfg.T, h, m, None, cfg.mode)
    if cfg.mode == "dsr-higher-order":
        if p.omega is None:
            raise ConfigError("higher-order mode needs a filter cutoff omega")
        r = p.r
        x0 = np.zeros((2 * r, n))
        x0[0] = z0
        use_dsr = cfg.dsr_term

        def rhs(t, x, xd, s):
            delayed = np.vstack([xd[:1], xd[r : 2 * r - 1]])
            return dyn.higher_order_rhs(ps, p, x, delayed, s, dsr_term=use_dsr)

        return _run(rhs, x0, src, r, cfg.T, h, m, r - 1, cfg.mode)
    # ideal-cohesive
    return integrate_ideal(p.alpha, src, cfg.T, h, z0, r=p.r)


def integrate_ideal(
    alpha: float,
    source: SourceSignal,
    T: float,
    h: float | None = None,
    initial=None,
    r: int = 1,
    n_agents: int | None = None,
) -> Trajectory:
    """Every agent follows ``Z^(r) = -sum a_k Z^(k) + 1 sum a_k z_s^(k)``.

    For ``r = 1`` and a step this is ``z' = -alpha z + alpha z_s``; smooth
    sources add their derivative feedforward (cohesive tracking).
    """
    if initial is None:
        z0 = np.zeros(n_agents or 1)
    else:
        z0 = np.atleast_1d(np.asarray(initial, dtype=float))
    h = default_step(T) if h is None else h
    x0 = np.zeros((r, z0.size))
    x0[0] = z0
    return _run(lambda t, x, xd, s: dyn.ideal_rhs(alpha, r, x, s),
                x0, source, r, T, h, None, r - 1, "ideal-cohesive")


def lemma1_deviation(
    ps: PinnedSystem,
    p: DsrParams,
    source: SourceSignal,
    T: float,
    h: float | None = None,
) -> float:
    """Max over the grid of ``||Z_dsr - Z_ideal||_inf`` for a smooth source.

    Both runs start synchronized at zero; the DSR run uses the tracking law.
    """
    h = default_step(T, p.tau) if h is None else h
    mode = "dsr-tracking" if source.differentiable else "dsr"
    traj = integrate(SimConfig(mode, source=source, T=T, params=p, h=h), ps)
    ideal = integrate_ideal(p.alpha, source, T, h, np.zeros(ps.n))
    k = min(len(traj.times), len(ideal.times))
    return float(np.max(np.abs(traj.states[:k] - ideal.states[:k])))
