"""Cohesion measures of a step response: settling time, deviation, peak input."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .simulator import Trajectory

__all__ = [
    "MetricsError",
    "DegenerateSourceError",
    "CohesionReport",
    "settling_time",
    "cohesion",
    "max_input",
]

SETTLING_BAND = 0.02


class MetricsError(ValueError):
    pass


class DegenerateSourceError(MetricsError):
    pass


@dataclass
class CohesionReport:
    T_s: float
    delta: float
    delta_star: float
    max_input: float
    mean_trajectory: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "T_s": self.T_s,
            "delta": self.delta,
            "delta_star": self.delta_star,
            "max_input": self.max_input,
        }


def _settle_index(traj: Trajectory, z_d: float) -> int:
    if z_d == 0:
        raise DegenerateSourceError("degenerate source: step amplitude z_d is zero")
    if traj.diverged:
        raise MetricsError("trajectory diverged; no settling time")
    inside = np.all(np.abs(traj.states - z_d) <= SETTLING_BAND * abs(z_d), axis=1)
    if not inside[-1]:
        raise MetricsError(
            f"response does not settle within the horizon T={traj.times[-1]:.6g}; "
            "rerun with a longer horizon"
        )
    outside = np.flatnonzero(~inside)
    return 0 if outside.size == 0 else int(outside[-1]) + 1


def settling_time(traj: Trajectory, z_d: float) -> float:
    """Earliest grid time after which every agent stays within 2% of ``z_d``."""
    idx = _settle_index(traj, z_d)
    T_s = float(traj.times[idx])
    if traj.times[-1] < 1.5 * T_s:
        warnings.warn(
            f"horizon {traj.times[-1]:.6g} is shorter than 1.5*T_s={1.5 * T_s:.6g}; "
            "settling time may be unreliable",
            stacklevel=2,
        )
    return T_s


def max_input(traj: Trajectory) -> float:
    """Largest ``|u_i(t)|`` over agents and grid samples."""
    return float(np.max(np.abs(traj.inputs)))


def cohesion(traj: Trajectory, z_d: float) -> CohesionReport:
    """Settling time, deviation from the mean and its time-normalized form.

    The deviation integrates ``||Z(t) - mean(Z(t)) 1||_1 / z_d`` from 0 to
    the settling time with the trapezoid rule (``|z_d|`` keeps it
    nonnegative for negative steps).
    """
    T_s = settling_time(traj, z_d)
    idx = int(np.searchsorted(traj.times, T_s))
    zbar = traj.states.mean(axis=1)
    spread = np.abs(traj.states - zbar[:, None]).sum(axis=1)
    delta = float(trapezoid(spread[: idx + 1], traj.times[: idx + 1]) / abs(z_d)) if idx > 0 else 0.0
    delta_star = delta / T_s if T_s > 0 else 0.0
    return CohesionReport(
        T_s=T_s,
        delta=delta,
        delta_star=delta_star,
        max_input=max_input(traj),
        mean_trajectory=zbar,
    )
