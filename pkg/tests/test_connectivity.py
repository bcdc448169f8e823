import math

import numpy as np
import pytest

from confdim.connectivity import (AnnulusPreconditionError, ConnectivityError, annular_constant,
                                  connect_annulus, connect_linear, least_annular_constant,
                                  least_linear_constant, path_diameter, recheck_witness)
from confdim.metric import FiniteMetricSpace, NeighborGraph
from confdim.spaces import SpaceSpec, generate


def corners(X):
    s = X.coords.sum(axis=1)
    return int(np.argmin(s)), int(np.argmax(s))


def test_adjacent_points_give_the_edge(carpet3):
    X, G = carpet3
    x = 0
    y = int(G.neighbors(x)[0])
    assert connect_linear(x, y, 1.0, G) == [x, y]


def test_carpet_opposite_corners_linear(carpet3):
    X, G = carpet3
    a, b = corners(X)
    path = connect_linear(a, b, 2.0, G)
    assert path is not None and path[0] == a and path[-1] == b
    assert path_diameter(X, path) <= 2 * X.distance(a, b) + 2 * X.h
    L, witness = least_linear_constant(a, b, G)
    assert 1 <= L <= 2 and witness[0] == a and witness[-1] == b


def test_two_components_fail():
    X = FiniteMetricSpace(np.array([[0.0], [0.1], [5.0], [5.1]]), h=0.05)
    G = NeighborGraph(X, 0.1)
    with pytest.raises(ConnectivityError):
        connect_linear(0, 3, 10.0, G)
    assert least_linear_constant(0, 3, G) == (math.inf, None)


def test_annulus_same_point():
    X = generate(SpaceSpec("square", grid=21))
    G = NeighborGraph(X, 2 * X.h)
    p = 220
    x = int(X.annulus(p, 0.2, 0.4)[0])
    assert connect_annulus(p, 0.2, x, x, 1.0, G) == [x]


def test_circle_small_annulus_fails():
    X = generate(SpaceSpec("circle", grid=200))
    G = NeighborGraph(X, 2 * X.h)
    p, r = 0, 0.1
    ring = X.annulus(p, r, 2 * r)
    angles = np.arctan2(X.coords[ring, 1] - 0.5, X.coords[ring, 0] - 0.5)
    x, y = int(ring[np.argmax(angles)]), int(ring[np.argmin(angles)])
    assert connect_annulus(p, r, x, y, 2.0, G) is None


def test_annulus_precondition():
    X = generate(SpaceSpec("square", grid=21))
    G = NeighborGraph(X, 2 * X.h)
    with pytest.raises(AnnulusPreconditionError):
        connect_annulus(220, 0.2, 220, 221, 2.0, G)


def test_carpet_interior_annulus(carpet4):
    X, G = carpet4
    rng = np.random.default_rng(0)
    p = int(np.argmin(np.abs(X.coords - [1 / 6, 1 / 2]).sum(axis=1)))
    for _ in range(10):
        r = 0.05
        ring = X.annulus(p, r, 2 * r)
        x, y = (int(v) for v in rng.choice(ring, 2, replace=False))
        L, path = least_annular_constant(p, r, x, y, G)
        assert L <= 10 and path[0] == x and path[-1] == y


def test_annular_constant_examples():
    sq = generate(SpaceSpec("square", grid=33))
    rep = annular_constant(sq, 32, rng=0)
    assert rep.annular_ok and rep.L_annular <= 4
    assert all(recheck_witness(sq, q) for q in rep.witnesses)

    iv = generate(SpaceSpec("interval", grid=129))
    rep = annular_constant(iv, 32, rng=0)
    assert rep.L_annular == "fail"
    assert rep.witnesses and rep.witnesses[0].failed


def test_annular_constant_carpet(carpet4):
    X, G = carpet4
    rep = annular_constant(X, 32, rng=1, G=G)
    assert rep.annular_ok and math.isfinite(rep.L_annular)
    assert all(recheck_witness(X, q) for q in rep.witnesses)
    threaded = annular_constant(X, 32, rng=1, G=G, n_jobs=2)
    assert threaded.L_annular == rep.L_annular
