"""Command-line front end: ``dsrnet simulate|stability|reproduce|graph-check``.

Exit codes: 0 success, 2 configuration or input error, 3 divergence,
4 acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import stability as stab
from .dynamics import DsrParams, SourceSignal
from .graph import (
    GraphError,
    SpectrumError,
    check_source_connectivity,
    load_graph,
    pinned_system,
    save_graph,
    spectrum,
    structure_report,
)
from .metrics import MetricsError, cohesion
from .presets import (
    PRESETS,
    dsr_reference_delta,
    fig3_complex_graph,
    fig3_graph,
    match_k_gain,
    reproduce,
)
from .simulator import MODES, ConfigError, SimConfig, integrate
from .stability import to_jsonable

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_ACCEPTANCE = 0, 2, 3, 4

METHODS = ("lambert", "theorem1", "corollary1", "corollary2", "hayes", "brayton", "theorem2")
BUILTIN_GRAPHS = {"fig3": fig3_graph, "fig3-complex": fig3_complex_graph}


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True)


def _write(out_dir: str | None, name: str, text: str) -> None:
    if out_dir is None:
        return
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text + "\n", encoding="ascii")


def _add_graph_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--graph", help="graph JSON file (agents, source, edges)")
    g.add_argument("--builtin", choices=sorted(BUILTIN_GRAPHS), help="embedded example graph")


def _add_param_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--omega", type=float, help="filter cutoff (higher-order mode)")
    p.add_argument("--r", type=int, default=1, help="relative degree")


def _load(args):
    if args.graph is not None:
        return load_graph(args.graph)
    return BUILTIN_GRAPHS[args.builtin]()


def _params(args, required: bool) -> DsrParams | None:
    given = [args.alpha, args.beta, args.tau]
    if all(v is None for v in given) and not required:
        return None
    if any(v is None for v in given):
        raise UsageError("--alpha, --beta and --tau are all required here")
    try:
        return DsrParams(args.alpha, args.beta, args.tau, args.omega, args.r)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_simulate(args) -> int:
    g = _load(args)
    ps = pinned_system(g)
    source = SourceSignal(args.source, args.step, args.rise_time, args.frequency)
    needs = args.mode not in ("nominal", "scaled-nominal")
    cfg = SimConfig(
        mode=args.mode,
        source=source,
        T=args.T,
        params=_params(args, needs),
        k_gain=args.k_gain,
        h=args.h,
        dsr_term=not args.no_dsr_term,
    )
    traj = integrate(cfg, ps)
    if args.out_dir is not None:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        traj.to_csv(Path(args.out_dir) / "trajectory.csv")
    if traj.diverged:
        print(f"error: trajectory diverged at t={traj.times[-1]:.6g}", file=sys.stderr)
        return EXIT_DIVERGED
    report = {"config": cfg.as_dict(), "diverged": False}
    if source.kind in ("step", "smooth-step"):
        report["metrics"] = cohesion(traj, source.final_value).as_dict()
    text = _dump(report)
    _write(args.out_dir, "report.json", text)
    print(text)
    return EXIT_OK


def _stability_reports(args) -> list[stab.StabilityReport]:
    g = _load(args)
    ps = pinned_system(g)
    spec = spectrum(ps)
    p = _params(args, True)
    reports = []
    for method in args.methods:
        if method == "lambert":
            reports.append(stab.survey_check(spec, p, args.k_max))
        elif method == "theorem1":
            reports.append(stab.theorem1_check(spec, p))
        elif method == "corollary1":
            reports.append(stab.corollary1_check(spec.m_lo, spec.m_hi, spec.phi_hi, p))
        elif method == "corollary2":
            reports.append(stab.corollary2_check(spec, p))
        elif method == "hayes":
            if spec.all_real:
                reports.append(stab.hayes_check(stab.modal_pairs(spec, p), p))
            else:
                reports.append(stab.StabilityReport(
                    "hayes", "not-applicable", params=p.as_dict(),
                    reason="spectrum is not real"))
        elif method == "brayton":
            reports.append(stab.brayton_check(ps, p))
        elif method == "theorem2":
            if p.omega is None:
                raise UsageError("theorem2 needs --omega")
            reports.append(stab.theorem2_check(p, spec=spec))
    return reports


def cmd_stability(args) -> int:
    reports = _stability_reports(args)
    text = _dump([r.as_dict() for r in reports])
    _write(args.out_dir, "stability.json", text)
    print(text)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    names = None if args.preset == "all" else [args.preset]
    if names and names[0] not in PRESETS:
        raise UsageError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)} or all")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = reproduce(names, workers=args.workers)
    ok = True
    table = {}
    for name, (values, checks) in results.items():
        for c in checks:
            print(c.line())
            ok &= c.passed
        table[name] = {
            "values": values,
            "checks": [{"metric": c.metric, "value": c.value, "expected": c.expected,
                        "passed": c.passed} for c in checks],
        }
    if args.match_delta:
        target = results["fig4"][0]["dsr.delta"] if "fig4" in results else dsr_reference_delta()
        k = match_k_gain(target)
        print(f"INFO  gain matching the DSR deviation {target:.6g}: k_gain = {k:.4g}")
        table["match_delta"] = {"target_delta": target, "k_gain": k}
    _write(args.out_dir, "reproduce.json", _dump(table))
    n_fail = sum(not c.passed for _, cs in results.values() for c in cs)
    n_all = sum(len(cs) for _, cs in results.values())
    print(f"{n_all - n_fail}/{n_all} checks passed")
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def _parse_partition(text: str, labels) -> list[list]:
    by_name = {str(lab): lab for lab in labels}
    blocks = []
    for chunk in text.split("|"):
        block = []
        for tok in chunk.split(","):
            tok = tok.strip()
            if tok not in by_name:
                raise GraphError(f"partition names unknown agent {tok!r}")
            block.append(by_name[tok])
        blocks.append(block)
    return blocks


def cmd_graph_check(args) -> int:
    g = _load(args)
    if args.save:
        save_graph(g, args.save)
    ok, missing = check_source_connectivity(g)
    ps = pinned_system(g)
    partition = _parse_partition(args.partition, g.labels[:-1]) if args.partition else None
    rep = structure_report(g, partition)
    out = {
        "n_agents": g.n_agents,
        "source_connected": ok,
        "unreachable": list(missing),
        "K": ps.K.tolist(),
        "B": ps.B.tolist(),
        "acyclic": rep.is_acyclic,
        "symmetric": rep.is_symmetric,
        "partition_valid": rep.partition_valid,
    }
    if ok:
        spec = spectrum(ps)
        out["eigenvalues"] = [complex(x) for x in spec.eigenvalues]
        out["all_real"] = spec.all_real
        out["beta_lower_bound"] = stab.beta_lower_bound(spec)
    text = _dump(out)
    _write(args.out_dir, "graph.json", text)
    print(text)
    if not ok:
        print(f"error: agents not reachable from the source: {missing}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsrnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one configuration")
    _add_graph_args(p)
    p.add_argument("--mode", choices=MODES, required=True)
    _add_param_args(p)
    p.add_argument("--k-gain", type=float, default=1.0)
    p.add_argument("--source", choices=("step", "smooth-step", "sinusoid"), default="step")
    p.add_argument("--step", type=float, default=1.0, help="source amplitude z_d")
    p.add_argument("--rise-time", type=float, default=1.0)
    p.add_argument("--frequency", type=float, default=1.0)
    p.add_argument("--T", type=float, default=20.0, help="horizon")
    p.add_argument("--h", type=float, default=None, help="step size override")
    p.add_argument("--no-dsr-term", action="store_true", help="drop the DSR term (higher-order)")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stability", help="stability checks for given parameters")
    _add_graph_args(p)
    _add_param_args(p)
    p.add_argument("--methods", type=lambda s: s.split(","), default=["lambert"],
                   help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("reproduce", help="run example experiments against expected values")
    p.add_argument("preset", help=f"one of {', '.join(sorted(PRESETS))} or all")
    p.add_argument("--match-delta", action="store_true",
                   help="also search the gain that matches the DSR deviation")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("graph-check", help="validate a graph and print its pinned Laplacian")
    _add_graph_args(p)
    p.add_argument("--partition", help="ordered blocks, e.g. '1|2,3|4,5,6'")
    p.add_argument("--save", help="write the graph as JSON")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_graph_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "methods", None):
        bad = [m for m in args.methods if m not in METHODS]
        if bad:
            print(f"error: unknown method(s) {bad}; choose from {list(METHODS)}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except (UsageError, ConfigError, GraphError, SpectrumError, MetricsError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
