"""Linear and annular-linear connectivity: constrained paths and sampled constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .metric import NeighborGraph, THRESHOLD_RTOL, _threshold

# ratios above this are reported as failures rather than constants
DEFAULT_L_MAX = 64.0


class ConnectivityError(RuntimeError):
    pass


class AnnulusPreconditionError(ValueError):
    pass


def path_diameter(X, path):
    return X.diameter(np.asarray(path, dtype=np.intp))


def _bottleneck(G, level, x, y):
    """Least threshold T such that x and y are joined inside {v : level[v] <= T}.

    Binary search over the distinct vertex levels; each probe is one
    connected-components pass on the induced subgraph.
    """
    cap = max(level[x], level[y])
    values = np.unique(level[np.isfinite(level)])
    values = values[values >= cap]
    if len(values) == 0:
        return math.inf
    lo, hi = 0, len(values) - 1
    labels = G.components(level <= values[hi])
    if labels[x] != labels[y] or labels[x] < 0:
        return math.inf
    while lo < hi:
        mid = (lo + hi) // 2
        labels = G.components(level <= values[mid])
        if labels[x] >= 0 and labels[x] == labels[y]:
            hi = mid
        else:
            lo = mid + 1
    return float(values[lo])


def connect_linear(x, y, L, G: NeighborGraph):
    """Path from x to y of diameter <= L d(x, y) + 2h, or None.

    The search stays inside B(x, (L+1) d(x, y)). Raises ConnectivityError
    when x and y lie in different components of ``G``.
    """
    if x == y:
        raise ValueError("connect_linear needs distinct points")
    X = G.X
    labels = G.components()
    if labels[x] != labels[y]:
        raise ConnectivityError(f"points {x} and {y} are disconnected at scale {G.s:g}")
    d = X.distance(x, y)
    dx, dy = X.distances_from(x), X.distances_from(y)
    limit = _threshold(L * d + 2 * X.h)
    outer = (L + 1) * d
    # B(x, r) ∩ B(y, r) with r <= L d / 2 already forces diameter <= L d
    for r in np.geomspace(max(L * d / 2 + X.h, d), max(outer, d), 4):
        mask = (dx <= _threshold(r)) & (dy <= _threshold(r)) & (dx <= _threshold(outer))
        path = G.bfs_path(x, y, mask)
        if path is not None and path_diameter(X, path) <= limit:
            return path
    return None


def least_linear_constant(x, y, G: NeighborGraph):
    """Smallest achieved diam(path) / d(x, y) over minimax paths; returns (ratio, path)."""
    X = G.X
    d = X.distance(x, y)
    level = 2 * np.maximum(X.distances_from(x), X.distances_from(y)) / d
    T = _bottleneck(G, level, x, y)
    if not math.isfinite(T):
        return math.inf, None
    path = G.bfs_path(x, y, level <= T)
    return path_diameter(X, path) / d, path


def in_annulus(X, p, v, r, R):
    d = X.distance(p, v)
    return d >= r * (1 - THRESHOLD_RTOL) and d <= _threshold(R)


def _annulus_levels(X, p, r):
    """Least L admitting each vertex into A(p, r/L - h, 2Lr + h)."""
    d = X.distances_from(p)
    h = X.h
    with np.errstate(divide="ignore"):
        inner = np.where(d + h > 0, r / (d + h), np.inf)
    outer = (d - h) / (2 * r)
    return np.maximum(1.0, np.maximum(inner, outer))


def connect_annulus(p, r, x, y, L, G: NeighborGraph):
    """Path from x to y inside A(p, r/L - h, 2Lr + h), or None.

    ``x`` and ``y`` must lie in the annulus A(p, r, 2r).
    """
    X = G.X
    for v in (x, y):
        if not in_annulus(X, p, v, r, 2 * r):
            raise AnnulusPreconditionError(f"point {v} is outside A({p}, {r:g}, {2 * r:g})")
    if x == y:
        return [x]
    mask = _annulus_levels(X, p, r) <= L * (1 + THRESHOLD_RTOL)
    return G.bfs_path(x, y, mask)


def least_annular_constant(p, r, x, y, G: NeighborGraph):
    """Least L for which connect_annulus(p, r, x, y, L) succeeds, with its witness."""
    if x == y:
        return 1.0, [x]
    level = _annulus_levels(G.X, p, r)
    T = _bottleneck(G, level, x, y)
    if not math.isfinite(T):
        return math.inf, None
    return T, connect_annulus(p, r, x, y, T, G)


@dataclass
class Query:
    kind: str
    x: int
    y: int
    L: float
    p: int | None = None
    r: float | None = None
    path: list | None = None
    failed: bool = False

    def to_dict(self):
        d = {"kind": self.kind, "x": self.x, "y": self.y, "L": self.L, "failed": self.failed}
        if self.p is not None:
            d.update(p=self.p, r=self.r)
        if self.path is not None:
            d["path"] = list(map(int, self.path))
        return d


@dataclass
class ConnectivityReport:
    L_linear: float | str
    L_annular: float | str
    witnesses: list = field(default_factory=list)
    n_samples: int = 0

    @property
    def annular_ok(self):
        return self.L_annular != "fail"

    @property
    def linear_ok(self):
        return self.L_linear != "fail"

    def to_dict(self):
        return {
            "L_linear": self.L_linear,
            "L_annular": self.L_annular,
            "n_samples": self.n_samples,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def _sample_queries(X, n, rng, max_tries=50):
    diam = X.diameter()
    lo, hi = 4 * X.h, diam / 4
    if not lo > 0:
        lo = diam / 256
    if hi < lo:
        hi = lo
    out = []
    for _ in range(n):
        for _ in range(max_tries):
            p = int(rng.integers(X.n))
            r = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
            ring = X.annulus(p, r, 2 * r)
            if len(ring) >= 2:
                x, y = rng.choice(ring, size=2, replace=False)
                out.append((p, r, int(x), int(y)))
                break
    return out


def _run_query(G, p, r, x, y, L_max):
    X = G.X
    La, path_a = least_annular_constant(p, r, x, y, G)
    # a witness that must pass within the net resolution of p certifies nothing
    cut = X.h > 0 and La >= r / (2 * X.h)
    ann = Query("annular", x, y, La, p=p, r=r, path=path_a,
                failed=bool(cut or La > L_max or path_a is None))
    if x == y:
        lin = Query("linear", x, y, 1.0, path=[x])
    else:
        Ll, path_l = least_linear_constant(x, y, G)
        lin = Query("linear", x, y, Ll, path=path_l, failed=bool(path_l is None or Ll > L_max))
    return ann, lin


def annular_constant(X, sample_budget=64, rng=None, G=None, L_max=DEFAULT_L_MAX,
                     n_jobs=1, keep=5):
    """Sampled linear and annular-linear connectivity constants.

    For each sampled query (p, r, x, y) with r log-uniform in [4h, diam/4]
    and x, y in A(p, r, 2r), the least admissible L is found by binary
    search over vertex admission thresholds. The report carries the max
    over samples, or "fail" with a counterexample query.
    """
    rng = np.random.default_rng(rng)
    if G is None:
        G = NeighborGraph(X, 2 * X.h)
    queries = _sample_queries(X, sample_budget, rng)
    if n_jobs == 1:
        results = [_run_query(G, *q, L_max) for q in queries]
    else:
        results = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_run_query)(G, *q, L_max) for q in queries)
    ann = [a for a, _ in results]
    lin = [b for _, b in results]

    def summarize(items):
        failed = [q for q in items if q.failed]
        if failed:
            return "fail", failed[:keep]
        worst = sorted(items, key=lambda q: -q.L)[:keep]
        return (max(q.L for q in items) if items else 1.0), worst

    L_ann, w_ann = summarize(ann)
    L_lin, w_lin = summarize(lin)
    return ConnectivityReport(L_linear=L_lin, L_annular=L_ann, witnesses=w_ann + w_lin,
                              n_samples=len(queries))


def recheck_witness(X, q: Query):
    """Independent re-check of a success witness against its stated constraint."""
    path = np.asarray(q.path, dtype=np.intp)
    if path[0] != q.x or path[-1] != q.y or len(set(path.tolist())) != len(path):
        return False
    if q.kind == "linear":
        return X.diameter(path) <= _threshold(q.L * X.distance(q.x, q.y) + 2 * X.h)
    d = np.array([X.distance(q.p, v) for v in path])
    lo = q.r / q.L - X.h
    hi = 2 * q.L * q.r + X.h
    return bool(np.all(d >= lo * (1 - 1e-9) - 1e-12) and np.all(d <= _threshold(hi)))
