"""Embedded example network and the reproducible experiments run on it.

Every preset is self-contained: the graph is built in code, the run is
deterministic, and each expected metric carries its own tolerance.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import DsrParams, SourceSignal
from .graph import Digraph, build_graph, pinned_system, spectrum
from .metrics import cohesion
from .simulator import SimConfig, integrate
from .stability import lambert_root_survey, modal_pairs, theorem2_check

__all__ = [
    "Expectation",
    "CheckResult",
    "PresetDescriptor",
    "PRESETS",
    "fig3_graph",
    "fig3_complex_graph",
    "match_k_gain",
    "run_preset",
    "reproduce",
]

FIG3_EDGES = (
    ("s", 1), (1, 2), (1, 3), (2, 3), (3, 2),
    (2, 4), (3, 5), (2, 6), (3, 6), (4, 6), (5, 6),
)
FIG3_AGENTS = (1, 2, 3, 4, 5, 6)

DSR_FIRST = DsrParams(alpha=0.53, beta=2.0, tau=0.075)
K_GAIN = 77.9
SECOND_ALPHA = 1.195
COMPARATOR_ALPHA = 1.69


def fig3_graph() -> Digraph:
    """Six agents, unit weights, source pinned to agent 1."""
    return build_graph([(a, b, 1.0) for a, b in FIG3_EDGES], "s", FIG3_AGENTS)


def fig3_complex_graph() -> Digraph:
    """The example network with feedback edges 4, 5, 6 -> 1 (unit weights)."""
    extra = [(4, 1), (5, 1), (6, 1)]
    return build_graph([(a, b, 1.0) for a, b in FIG3_EDGES + tuple(extra)], "s", FIG3_AGENTS)


@dataclass(frozen=True)
class Expectation:
    """``kind`` is ``rel`` (fractional), ``abs``, ``range`` (``[lo, hi]``) or ``true``."""

    metric: str
    target: float
    tol: float = 0.0
    kind: str = "rel"
    hi: float | None = None

    def check(self, value) -> bool:
        if self.kind == "true":
            return bool(value)
        if value is None or not math.isfinite(value):
            return False
        if self.kind == "rel":
            return abs(value - self.target) <= self.tol * abs(self.target)
        if self.kind == "abs":
            return abs(value - self.target) <= self.tol
        if self.kind == "range":
            return self.target <= value <= self.hi
        if self.kind == "max":
            return value <= self.target
        raise ValueError(f"unknown tolerance kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "true":
            return "true"
        if self.kind == "rel":
            return f"{self.target:g} +/- {100 * self.tol:g}%"
        if self.kind == "abs":
            return f"{self.target:g} +/- {self.tol:g}"
        if self.kind == "range":
            return f"in [{self.target:g}, {self.hi:g}]"
        return f"<= {self.target:g}"


@dataclass(frozen=True)
class CheckResult:
    preset: str
    metric: str
    value: float | bool | None
    expected: str
    passed: bool

    def line(self) -> str:
        if isinstance(self.value, bool) or self.value is None:
            shown = str(self.value)
        else:
            shown = f"{self.value:.6g}"
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.preset:<20s} {self.metric:<28s} {shown:>12s}  expected {self.expected}"


@dataclass(frozen=True)
class PresetDescriptor:
    name: str
    graph: str
    mode: str
    params: dict
    expectations: tuple[Expectation, ...]
    runner: Callable[[], dict] = field(repr=False, compare=False)


def _step_metrics(cfg: SimConfig, prefix: str, graph: Digraph | None = None) -> dict:
    ps = pinned_system(graph or fig3_graph())
    traj = integrate(cfg, ps)
    rep = cohesion(traj, cfg.source.amplitude)
    return {f"{prefix}.{k}": v for k, v in rep.as_dict().items()}


def nominal_config() -> SimConfig:
    return SimConfig("nominal", T=20.0)


def dsr_config() -> SimConfig:
    return SimConfig("dsr", T=20.0, params=DSR_FIRST)


def scaled_config(k_gain: float = K_GAIN) -> SimConfig:
    return SimConfig("scaled-nominal", T=20.0 / k_gain, k_gain=k_gain)


def second_order_configs(beta_dsr: float) -> tuple[SimConfig, SimConfig]:
    """DSR run (filtered, ``r = 2``) and the comparator with the DSR term zeroed."""
    dsr = DsrParams(alpha=SECOND_ALPHA, beta=beta_dsr, tau=0.075, omega=SECOND_ALPHA / 10, r=2)
    comp = DsrParams(alpha=COMPARATOR_ALPHA, beta=1.0, tau=0.075, omega=COMPARATOR_ALPHA / 10, r=2)
    return (
        SimConfig("dsr-higher-order", T=40.0, params=dsr),
        SimConfig("dsr-higher-order", T=40.0, params=comp, dsr_term=False),
    )


def dsr_reference_delta() -> float:
    """Deviation of the first-order DSR step response (the gain-matching target)."""
    traj = integrate(dsr_config(), pinned_system(fig3_graph()))
    return cohesion(traj, 1.0).delta


def _run_spectrum() -> dict:
    lam = np.sort(spectrum(pinned_system(fig3_graph())).eigenvalues.real)
    expected = np.array([1.0, 1.0, 1.0, 1.0, 3.0, 4.0])
    return {"eig_max_error": float(np.max(np.abs(lam - expected)))}


def _run_fig4() -> dict:
    out = _step_metrics(nominal_config(), "nominal")
    out.update(_step_metrics(dsr_config(), "dsr"))
    out["delta_reduction"] = out["nominal.delta"] / out["dsr.delta"]
    return out


def _run_fig5() -> dict:
    spec = spectrum(pinned_system(fig3_graph()))
    pairs = modal_pairs(spec, DSR_FIRST)
    res = lambert_root_survey(pairs, DSR_FIRST, k_max=10)
    abs_res = 0.0
    for pair, row in zip(pairs, res.roots):
        for s in row[np.isfinite(row)]:
            abs_res = max(abs_res, abs(s - pair.lambda_i - pair.lambda_di * np.exp(-s * DSR_FIRST.tau)))
    return {
        "rightmost_real": res.rightmost_real,
        "max_residual": abs_res,
        "failed_branches": float(len(res.failed)),
    }


def _run_fig6() -> dict:
    return _step_metrics(scaled_config(), "scaled")


def _run_fig7() -> dict:
    out = {}
    for name, cfg in (("nominal", nominal_config()), ("dsr", dsr_config()),
                      ("scaled", scaled_config())):
        traj = integrate(cfg, pinned_system(fig3_graph()))
        out[f"{name}.max_input"] = float(np.max(np.abs(traj.inputs)))
    return out


def _run_second_order(graph: Digraph, beta_dsr: float) -> dict:
    dsr, comp = second_order_configs(beta_dsr)
    out = _step_metrics(dsr, "dsr", graph)
    out.update(_step_metrics(comp, "comparator", graph))
    spec = spectrum(pinned_system(graph))
    rep = theorem2_check(dsr.params, spec=spec)
    out["theorem2_stable"] = rep.verdict == "stable"
    out["eps_lambda"] = rep.extras.get("eps_lambda", float("nan"))
    out["complex_spectrum"] = not spec.all_real
    return out


def _run_second_real() -> dict:
    return _run_second_order(fig3_graph(), 2.0)


def _run_second_complex() -> dict:
    return _run_second_order(fig3_complex_graph(), 20.0)


def _rel(metric, target, tol):
    return Expectation(metric, target, tol, "rel")


PRESETS: dict[str, PresetDescriptor] = {
    d.name: d
    for d in (
        PresetDescriptor(
            "spectrum", "fig3", "eigenvalues", {},
            (Expectation("eig_max_error", 1e-8, kind="max"),),
            _run_spectrum,
        ),
        PresetDescriptor(
            "fig4", "fig3", "nominal+dsr", DSR_FIRST.as_dict(),
            (
                Expectation("nominal.T_s", 7.5, 0.2, "abs"),
                _rel("nominal.delta", 3.73, 0.05),
                _rel("nominal.delta_star", 0.496, 0.05),
                Expectation("dsr.T_s", 7.4, 0.2, "abs"),
                _rel("dsr.delta", 0.048, 0.10),
                _rel("dsr.delta_star", 0.0065, 0.15),
                Expectation("delta_reduction", 70.0, kind="range", hi=85.0),
            ),
            _run_fig4,
        ),
        PresetDescriptor(
            "fig5", "fig3", "lambert-survey", DSR_FIRST.as_dict(),
            (
                Expectation("rightmost_real", 0.0, kind="max"),
                Expectation("max_residual", 1e-8, kind="max"),
            ),
            _run_fig5,
        ),
        PresetDescriptor(
            "fig6", "fig3", "scaled-nominal", {"k_gain": K_GAIN},
            (
                _rel("scaled.delta", 0.048, 0.10),
                _rel("scaled.T_s", 0.0964, 0.05),
                _rel("scaled.delta_star", 0.496, 0.05),
            ),
            _run_fig6,
        ),
        PresetDescriptor(
            "fig7", "fig3", "nominal+dsr+scaled", {"k_gain": K_GAIN, **DSR_FIRST.as_dict()},
            (
                _rel("nominal.max_input", 0.499, 0.05),
                _rel("dsr.max_input", 1.064, 0.05),
                _rel("scaled.max_input", 38.97, 0.05),
            ),
            _run_fig7,
        ),
        PresetDescriptor(
            "secondorder-real", "fig3", "dsr-higher-order",
            second_order_configs(2.0)[0].params.as_dict(),
            (
                _rel("dsr.T_s", 6.0, 0.10),
                _rel("comparator.T_s", 5.3, 0.10),
                _rel("dsr.delta", 0.63, 0.10),
                _rel("comparator.delta", 1.04, 0.10),
                _rel("dsr.delta_star", 0.11, 0.10),
                _rel("comparator.delta_star", 0.17, 0.10),
                _rel("dsr.max_input", 2.8, 0.10),
                _rel("comparator.max_input", 2.82, 0.10),
                Expectation("theorem2_stable", 1.0, kind="true"),
                Expectation("eps_lambda", 1.14, 0.02, "abs"),
            ),
            _run_second_real,
        ),
        PresetDescriptor(
            "secondorder-complex", "fig3-complex", "dsr-higher-order",
            second_order_configs(20.0)[0].params.as_dict(),
            (
                _rel("dsr.T_s", 19.9, 0.10),
                _rel("comparator.T_s", 18.5, 0.10),
                _rel("dsr.delta", 0.176, 0.15),
                _rel("comparator.delta", 1.17, 0.15),
                _rel("dsr.delta_star", 0.009, 0.15),
                _rel("comparator.delta_star", 0.058, 0.15),
                Expectation("complex_spectrum", 1.0, kind="true"),
            ),
            _run_second_complex,
        ),
    )
}


def run_preset(name: str) -> tuple[dict, list[CheckResult]]:
    try:
        desc = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    values = desc.runner()
    checks = [
        CheckResult(name, e.metric, values.get(e.metric), e.describe(), e.check(values.get(e.metric)))
        for e in desc.expectations
    ]
    return values, checks


def reproduce(names: list[str] | None = None, workers: int | None = None) -> dict[str, tuple[dict, list[CheckResult]]]:
    """Run presets (concurrently when more than one); results keyed and
    ordered by preset name."""
    names = sorted(PRESETS) if names is None else sorted(names)
    for n in names:
        if n not in PRESETS:
            raise KeyError(f"unknown preset {n!r}; choose from {sorted(PRESETS)}")
    if len(names) == 1 or workers == 1:
        return {n: run_preset(n) for n in names}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_preset, names))
    return dict(zip(names, results))


def match_k_gain(target_delta: float, lo: float = 1.0, hi: float = 1000.0, rtol: float = 1e-4) -> float:
    """Bisection (in ``log k``) for the gain whose scaled-nominal deviation hits
    ``target_delta``; the deviation decreases monotonically with the gain."""
    ps = pinned_system(fig3_graph())

    def delta(k: float) -> float:
        traj = integrate(scaled_config(k), ps)
        return cohesion(traj, 1.0).delta

    f_lo, f_hi = delta(lo) - target_delta, delta(hi) - target_delta
    if f_lo * f_hi > 0:
        raise ValueError(f"target deviation {target_delta} not bracketed by gains [{lo}, {hi}]")
    while hi / lo - 1 > rtol:
        mid = math.sqrt(lo * hi)
        f_mid = delta(mid) - target_delta
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)
