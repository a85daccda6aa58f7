"""Delayed self-reinforcement for cohesive networks: simulation and analysis."""
from .dynamics import DsrParams, SourceSignal
from .graph import Digraph, PinnedSystem, Spectrum, build_graph, load_graph, pinned_system, spectrum
from .metrics import CohesionReport, cohesion
from .simulator import SimConfig, Trajectory, integrate

__all__ = [
    "DsrParams",
    "SourceSignal",
    "Digraph",
    "PinnedSystem",
    "Spectrum",
    "build_graph",
    "load_graph",
    "pinned_system",
    "spectrum",
    "CohesionReport",
    "cohesion",
    "SimConfig",
    "Trajectory",
    "integrate",
]

__version__ = "0.1.0"
