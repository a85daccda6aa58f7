"""Weighted source-pinned digraphs and their pinned Laplacians.

Edge convention: an edge ``(k, i, w)`` means agent ``i`` listens to ``k``
(``k`` is a neighbor of ``i``), so it contributes ``-w`` at row ``i``,
column ``k`` of the Laplacian. Internally agents occupy indices
``0..n-1`` and the source is always index ``n``.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

from .numerics import eigenvalues

__all__ = [
    "GraphError",
    "SpectrumError",
    "Digraph",
    "PinnedSystem",
    "Spectrum",
    "StructureReport",
    "build_graph",
    "graph_from_dict",
    "graph_to_dict",
    "load_graph",
    "save_graph",
    "pinned_system",
    "check_source_connectivity",
    "spectrum",
    "structure_report",
]

ALL_REAL_RTOL = 1e-9


class GraphError(ValueError):
    """Raised for malformed graphs or partitions."""


class SpectrumError(ArithmeticError):
    """Raised when the pinned Laplacian spectrum violates Re(lambda) > 0."""


@dataclass(frozen=True)
class Digraph:
    """Agents ``0..n-1`` plus a source at index ``n``.

    ``labels`` holds the user-facing node ids, source last.
    """

    n_agents: int
    labels: tuple[Hashable, ...]
    edges: tuple[tuple[int, int, float], ...]

    @property
    def source_id(self) -> int:
        return self.n_agents

    @property
    def source_label(self) -> Hashable:
        return self.labels[-1]

    def weight_matrix(self) -> np.ndarray:
        """``W[i, k] = w_ik``: weight with which ``i`` listens to ``k``."""
        size = self.n_agents + 1
        W = np.zeros((size, size))
        for frm, to, w in self.edges:
            W[to, frm] = w
        return W


@dataclass(frozen=True)
class PinnedSystem:
    K: np.ndarray
    B: np.ndarray
    laplacian_L: np.ndarray

    @property
    def n(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    magnitudes: np.ndarray
    phases: np.ndarray
    m_lo: float
    m_hi: float
    phi_hi: float
    all_real: bool

    @classmethod
    def from_eigenvalues(cls, values: Iterable[complex]) -> "Spectrum":
        lam = np.asarray(list(values), dtype=complex)
        if lam.size == 0:
            raise SpectrumError("empty spectrum")
        if np.any(lam.real <= 0.0):
            bad = lam[lam.real <= 0.0]
            raise SpectrumError(
                f"eigenvalues with nonpositive real part {bad.tolist()}: "
                "source connectivity violated or eigensolver failure"
            )
        mags = np.abs(lam)
        all_real = bool(np.max(np.abs(lam.imag)) <= ALL_REAL_RTOL * np.max(mags))
        if all_real:
            lam = lam.real.astype(complex)
        phases = np.angle(lam)
        return cls(
            eigenvalues=lam,
            magnitudes=mags,
            phases=phases,
            m_lo=float(mags.min()),
            m_hi=float(mags.max()),
            phi_hi=float(np.max(np.abs(phases))),
            all_real=all_real,
        )


@dataclass(frozen=True)
class StructureReport:
    is_acyclic: bool
    is_symmetric: bool
    partition_valid: bool | None = None


def build_graph(
    edges: Iterable[tuple[Hashable, Hashable, float]],
    source: Hashable,
    agents: Sequence[Hashable] | None = None,
) -> Digraph:
    """Validate an edge list and reindex it with the source last.

    ``agents`` fixes the agent order; when omitted, agents are taken from the
    edge list in order of first appearance.
    """
    edge_list = [(frm, to, w) for frm, to, w in edges]
    if agents is None:
        seen: dict[Hashable, None] = {}
        for frm, to, _ in edge_list:
            for node in (frm, to):
                if node != source:
                    seen.setdefault(node, None)
        agents = list(seen)
    agents = list(agents)
    if not agents:
        raise GraphError("graph needs at least one agent")
    if source in agents:
        raise GraphError(f"source {source!r} listed as an agent")
    if len(set(agents)) != len(agents):
        raise GraphError("duplicate agent id")

    index = {label: i for i, label in enumerate(agents)}
    index[source] = len(agents)
    out: list[tuple[int, int, float]] = []
    seen_pairs: set[tuple[int, int]] = set()
    for frm, to, w in edge_list:
        for node in (frm, to):
            if node not in index:
                raise GraphError(f"unknown node id {node!r}")
        if to == source:
            raise GraphError(f"edge into source: {frm!r} -> {to!r}")
        if frm == to:
            raise GraphError(f"self-edge on {frm!r}")
        w = float(w)
        if not np.isfinite(w) or w <= 0.0:
            raise GraphError(f"nonpositive weight {w} on {frm!r} -> {to!r}")
        pair = (index[frm], index[to])
        if pair in seen_pairs:
            raise GraphError(f"duplicate edge {frm!r} -> {to!r}")
        seen_pairs.add(pair)
        out.append((pair[0], pair[1], w))
    return Digraph(
        n_agents=len(agents),
        labels=tuple(agents) + (source,),
        edges=tuple(sorted(out)),
    )


def graph_from_dict(data: dict) -> Digraph:
    try:
        agents = data["agents"]
        source = data["source"]
        raw = data["edges"]
    except KeyError as exc:
        raise GraphError(f"graph description missing key {exc.args[0]!r}") from None
    edges = []
    for e in raw:
        try:
            edges.append((e["from"], e["to"], e["w"]))
        except KeyError as exc:
            raise GraphError(f"edge {e!r} missing key {exc.args[0]!r}") from None
    return build_graph(edges, source, agents)


def graph_to_dict(g: Digraph) -> dict:
    lab = g.labels
    return {
        "agents": list(lab[:-1]),
        "source": lab[-1],
        "edges": [{"from": lab[f], "to": lab[t], "w": w} for f, t, w in g.edges],
    }


def load_graph(path: str | Path) -> Digraph:
    try:
        data = json.loads(Path(path).read_text(encoding="ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise GraphError(f"cannot parse graph file {path}: {exc}") from exc
    return graph_from_dict(data)


def save_graph(g: Digraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=2) + "\n", encoding="ascii")


def pinned_system(g: Digraph) -> PinnedSystem:
    W = g.weight_matrix()
    L = np.diag(W.sum(axis=1)) - W
    n = g.n_agents
    K = L[:n, :n].copy()
    B = -L[:n, n].copy()
    return PinnedSystem(K=K, B=B, laplacian_L=L)


def check_source_connectivity(g: Digraph) -> tuple[bool, list[Hashable]]:
    """Breadth-first search from the source along edge direction."""
    succ: dict[int, list[int]] = {}
    for frm, to, _ in g.edges:
        succ.setdefault(frm, []).append(to)
    reached = {g.source_id}
    queue = deque([g.source_id])
    while queue:
        node = queue.popleft()
        for nxt in succ.get(node, ()):
            if nxt not in reached:
                reached.add(nxt)
                queue.append(nxt)
    missing = [g.labels[i] for i in range(g.n_agents) if i not in reached]
    return not missing, missing


def spectrum(ps: PinnedSystem) -> Spectrum:
    res = eigenvalues(ps.K)
    return Spectrum.from_eigenvalues(res.eigenvalues)


def _is_acyclic(nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> bool:
    nodes = set(nodes)
    indeg = {v: 0 for v in nodes}
    succ: dict[int, list[int]] = {v: [] for v in nodes}
    for a, b in edges:
        if a in nodes and b in nodes:
            succ[a].append(b)
            indeg[b] += 1
    ready = [v for v, d in indeg.items() if d == 0]
    visited = 0
    while ready:
        v = ready.pop()
        visited += 1
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return visited == len(nodes)


def _is_symmetric(nodes: Iterable[int], weights: dict[tuple[int, int], float]) -> bool:
    nodes = set(nodes)
    for (a, b), w in weights.items():
        if a in nodes and b in nodes and weights.get((b, a)) != w:
            return False
    return True


def structure_report(
    g: Digraph, partition: Sequence[Sequence[Hashable]] | None = None
) -> StructureReport:
    """Acyclicity, symmetry and (optionally) topological block ordering.

    ``partition`` is an ordered list of agent-label blocks. It is valid when
    every agent-to-agent edge ends in a block no earlier than where it starts
    and each block induces a symmetric or acyclic subgraph.
    """
    agents = range(g.n_agents)
    inner = {(f, t): w for f, t, w in g.edges if f != g.source_id}
    acyclic = _is_acyclic(agents, inner)
    symmetric = _is_symmetric(agents, inner)
    if partition is None:
        return StructureReport(acyclic, symmetric, None)

    index = {label: i for i, label in enumerate(g.labels[:-1])}
    block_of: dict[int, int] = {}
    for b, block in enumerate(partition):
        for label in block:
            if label not in index:
                raise GraphError(f"partition names unknown agent {label!r}")
            if index[label] in block_of:
                raise GraphError(f"agent {label!r} appears in two blocks")
            block_of[index[label]] = b
    if len(block_of) != g.n_agents:
        missing = [g.labels[i] for i in agents if i not in block_of]
        raise GraphError(f"partition does not cover agents {missing}")

    valid = all(block_of[t] >= block_of[f] for f, t in inner)
    if valid:
        for block in partition:
            members = [index[label] for label in block]
            if not (_is_symmetric(members, inner) or _is_acyclic(members, inner)):
                valid = False
                break
    return StructureReport(acyclic, symmetric, valid)
