import numpy as np
import pytest

from confdim.arcs import find_quasiarc
from confdim.cantor import search_family
from confdim.metric import NeighborGraph
from confdim.pipeline import default_endpoints
from confdim.spaces import SpaceSpec, generate

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def carpet4():
    X = generate(SpaceSpec("carpet", 4))
    return X, NeighborGraph(X, 2 * X.h)


@pytest.fixture(scope="session")
def carpet3():
    X = generate(SpaceSpec("carpet", 3))
    return X, NeighborGraph(X, 2 * X.h)


@pytest.fixture(scope="session")
def interval_grid():
    X = generate(SpaceSpec("interval", grid=101))
    return X, NeighborGraph(X, 2 * X.h)


@pytest.fixture(scope="session")
def square_grid():
    X = generate(SpaceSpec("square", grid=41))
    return X, NeighborGraph(X, 2 * X.h)


@pytest.fixture(scope="session")
def carpet_family(carpet4):
    X, G = carpet4
    a, b = default_endpoints(X)
    seed_arc = find_quasiarc(a, b, G)
    fam, _ = search_family(G, seed_arc, depth=2, rng=0)
    return fam


def bottom_edge(X):
    c = X.coords
    idx = np.flatnonzero(np.isclose(c[:, 1], c[:, 1].min()))
    return idx[np.argsort(c[idx, 0])]
