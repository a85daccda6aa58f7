import numpy as np
import pytest

from dsrnet.graph import build_graph, pinned_system, spectrum
from dsrnet.presets import fig3_complex_graph, fig3_graph


@pytest.fixture(scope="session")
def fig3():
    return fig3_graph()


@pytest.fixture(scope="session")
def fig3_ps(fig3):
    return pinned_system(fig3)


@pytest.fixture(scope="session")
def fig3_spec(fig3_ps):
    return spectrum(fig3_ps)


@pytest.fixture(scope="session")
def complex_ps():
    return pinned_system(fig3_complex_graph())


def single_agent():
    return pinned_system(build_graph([("s", 1, 1.0)], "s"))


def random_connected_graph(rng: np.random.Generator, n: int, p_edge: float = 0.3):
    """Random weighted digraph in which every agent is reachable from the source.

    A random spanning arborescence rooted at the source guarantees
    reachability; extra random edges are sprinkled on top.
    """
    order = rng.permutation(n) + 1
    edges = {}
    reached = ["s"]
    for a in order:
        edges[(reached[rng.integers(len(reached))], int(a))] = rng.uniform(0.2, 2.0)
        reached.append(int(a))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j and (i, j) not in edges and rng.random() < p_edge:
                edges[(i, j)] = rng.uniform(0.2, 2.0)
    return build_graph([(a, b, w) for (a, b), w in edges.items()], "s", list(range(1, n + 1)))


def random_block_graph(rng: np.random.Generator, sizes):
    """Topologically ordered blocks, each symmetric or acyclic inside."""
    blocks, label = [], 1
    for size in sizes:
        blocks.append(list(range(label, label + size)))
        label += size
    edges = {}
    for bi, block in enumerate(blocks):
        symmetric = rng.random() < 0.5
        for x in range(len(block)):
            for y in range(x + 1, len(block)):
                if rng.random() < 0.6:
                    w = rng.uniform(0.2, 2.0)
                    a, b = block[x], block[y]
                    edges[(a, b)] = w
                    if symmetric:
                        edges[(b, a)] = w
        for a in block:
            # every agent listens to the source or to an earlier block
            if bi == 0:
                edges[("s", a)] = rng.uniform(0.2, 2.0)
            else:
                prev = blocks[rng.integers(bi)]
                edges[(prev[rng.integers(len(prev))], a)] = rng.uniform(0.2, 2.0)
    return build_graph([(a, b, w) for (a, b), w in edges.items()], "s", list(range(1, label))), blocks


# Lines recorded by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
