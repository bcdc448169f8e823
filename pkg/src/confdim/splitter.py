"""Unzipping an arc into two disjoint arcs that both follow it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .arcs import (Arc, FollowsCertificate, achieved_alpha, check_follows, loop_erase,
                   quasiarc_constant, straighten)
from .metric import NeighborGraph, _threshold, set_distance


class CutPointError(RuntimeError):
    """Raised when unzipping is blocked by a local cut point."""

    def __init__(self, vertex, scale):
        super().__init__(f"cut point encountered at vertex {vertex} (scale {scale:g})")
        self.vertex = int(vertex)
        self.scale = float(scale)


class SeedNotFound(RuntimeError):
    pass


class SplitError(RuntimeError):
    pass


@dataclass
class SplitResult:
    J1: Arc
    J2: Arc
    separation: float
    follows1: FollowsCertificate
    follows2: FollowsCertificate
    eps: float
    displacements: tuple
    route: str = "topological"
    notes: list = field(default_factory=list)

    @property
    def delta(self):
        return self.separation / self.eps

    def to_dict(self):
        return {
            "route": self.route,
            "eps": self.eps,
            "separation": self.separation,
            "delta": self.delta,
            "displacements": list(self.displacements),
            "J1": self.J1.tolist(),
            "J2": self.J2.tolist(),
            "notes": list(self.notes),
        }


def _open_ball(X, x, r):
    return X.distances_from(x) < r


def component_ball(x, r, G: NeighborGraph, exclude=None, center=None):
    """Component of ``x`` in the graph induced on B(center, r) minus ``exclude``.

    ``center`` defaults to ``x``. The ball is open, matching B0(x, r).
    Returns sorted point indices.
    """
    if exclude is not None and exclude == x:
        raise ValueError("the base point cannot be excluded")
    X = G.X
    c = x if center is None else center
    mask = _open_ball(X, c, r)
    if not mask[x]:
        raise ValueError("base point lies outside the ball")
    if exclude is not None:
        mask[exclude] = False
    labels = G.components(mask)
    return np.flatnonzero(labels == labels[x])


def is_local_cut_point(v, r, G: NeighborGraph):
    """True when removing ``v`` disconnects its open r-ball component."""
    X = G.X
    comp = np.zeros(X.n, dtype=bool)
    comp[component_ball(v, r, G)] = True
    comp[v] = False
    return G.n_components(comp) > 1


def _arc_displacements(J1, J2, A):
    X = A.X
    return (X.distance(J1.start, A.start), X.distance(J1.end, A.end),
            X.distance(J2.start, A.start), X.distance(J2.end, A.end))


def _finish(J1, J2, A, eps, route, notes=None):
    f1 = check_follows(J1, A, eps)
    f2 = check_follows(J2, A, eps)
    if not f1 or not f2:
        raise SplitError("split arcs fail to follow the input arc")
    if np.intersect1d(J1.vertices, J2.vertices).size:
        raise SplitError("split arcs intersect")
    disp = _arc_displacements(J1, J2, A)
    if max(disp) > _threshold(eps):
        raise SplitError("split endpoints drift beyond the slack")
    sep = set_distance(J1.vertices, J2.vertices, A.X)
    return SplitResult(J1=J1, J2=J2, separation=sep, follows1=f1, follows2=f2, eps=eps,
                       displacements=disp, route=route, notes=list(notes or []))


# -- widening ------------------------------------------------------------------------

def _max_clearance_path(G, allowed, clearance, S, T):
    """Path from S to T inside ``allowed`` maximising the minimum clearance."""
    ok_S = S & allowed
    ok_T = T & allowed
    if not ok_S.any() or not ok_T.any():
        return None, 0.0
    values = np.unique(clearance[allowed])
    lo, hi = 0, len(values) - 1

    def joined(c):
        lab = G.components(allowed & (clearance >= c))
        a = lab[ok_S & (clearance >= c)]
        b = lab[ok_T & (clearance >= c)]
        return len(a) and len(b) and np.intersect1d(a, b).size > 0

    if not joined(values[0]):
        return None, 0.0
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if joined(values[mid]):
            lo = mid
        else:
            hi = mid - 1
    c = values[lo]
    mask = allowed & (clearance >= c)
    # among bottleneck-optimal paths prefer ones that keep clear everywhere:
    # edge cost = length / mean clearance of its ends
    idx = np.flatnonzero(mask)
    local = np.full(G.n, -1, dtype=np.intp)
    local[idx] = np.arange(len(idx))
    sub = G.adj[idx][:, idx].tocoo()
    inv = 1.0 / np.maximum(clearance[idx], 1e-300)
    w = sub.data * (inv[sub.row] + inv[sub.col]) / 2
    W = sparse.csr_matrix((w, (sub.row, sub.col)), shape=(len(idx), len(idx)))
    src = local[np.flatnonzero(ok_S & mask)]
    dist, pred, _ = csgraph.dijkstra(W, directed=False, indices=src, min_only=True,
                                     return_predecessors=True)
    tgt = local[np.flatnonzero(ok_T & mask)]
    tgt = tgt[np.isfinite(dist[tgt])]
    if len(tgt) == 0:
        return None, 0.0
    t = int(tgt[np.lexsort((tgt, dist[tgt]))[0]])
    path = [t]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    return [int(idx[v]) for v in path[::-1]], float(c)


def widen(J1: Arc, J2: Arc, A: Arc, eps, G: NeighborGraph, rounds=4):
    """Alternately reroute each arc to maximise its clearance from the other.

    Reroutes stay in N(A, eps), keep endpoints within eps of A's ends and
    are kept only when the arc still follows A and the separation grows.
    """
    X = G.X
    corridor = X.within(A.vertices, eps, closed=True)
    S = X.distances_from(A.start) <= _threshold(eps)
    T = X.distances_from(A.end) <= _threshold(eps)
    arcs = [J1, J2]
    sep = set_distance(J1.vertices, J2.vertices, X)
    for _ in range(rounds):
        improved = False
        for k in (1, 0):
            fixed = arcs[1 - k]
            allowed = corridor.copy()
            allowed[fixed.vertices] = False
            clearance = X.point_to_set(fixed.vertices)
            path, c = _max_clearance_path(G, allowed, clearance, S, T)
            if path is None or c <= sep:
                continue
            cand = Arc(X, path, G.s)
            if not check_follows(cand, A, eps):
                continue
            new_sep = set_distance(cand.vertices, fixed.vertices, X)
            if new_sep > sep:
                arcs[k] = cand
                sep = new_sep
                improved = True
        if not improved:
            break
    return arcs[0], arcs[1]


# -- topological unzipping -------------------------------------------------------------

def _choose_seed(X, cands, a, eps, rng):
    d = X.distances_from(a, cands)
    near = cands[d < eps / 2]
    if rng is None or len(near) == 0:
        pool = near if len(near) else cands
        dp = X.distances_from(a, pool)
        return int(pool[np.lexsort((pool, dp))[0]])
    return int(rng.choice(near))


def _detour(G, sources, free, targets):
    """BFS from ``sources`` through ``free`` vertices; returns paths to reached targets."""
    parent = {int(s): -1 for s in sources}
    frontier = list(parent)
    reached = []
    indptr, indices = G.indptr, G.indices
    while frontier:
        nxt = []
        for v in frontier:
            for w in indices[indptr[v]:indptr[v + 1]]:
                w = int(w)
                if w in parent:
                    continue
                if targets[w]:
                    parent[w] = v
                    reached.append(w)
                elif free[w]:
                    parent[w] = v
                    nxt.append(w)
        frontier = nxt
    return parent, reached


def _trace(parent, t):
    path = [t]
    while parent[path[-1]] != -1:
        path.append(parent[path[-1]])
    return path[::-1]


def topological_split(A: Arc, eps, G: NeighborGraph, rng=None, widen_arcs=True):
    """Unzip ``A`` into two disjoint arcs that eps-follow it.

    A seed arc from a point of B0(a, eps) off A meets A at x, forming a
    tripod with A[a, x]. Each step finds a detour from the current arcs,
    through B0(x, eps) minus x, to a later point t of A; the arc owning the
    detour's start is rerouted along it and the other arc advances along
    A up to t. Progress along A is strict, so the walk ends once the
    unzipping point is within eps/2 of b; the shared point is then dropped
    from one arc. A missing detour means B0(x, eps) minus x is
    disconnected, i.e. x is a local cut point.
    """
    X = G.X
    if eps < 8 * X.h * (1 - 1e-9):
        raise ValueError(f"slack {eps:g} is below 8h = {8 * X.h:g}")
    if len(A) < 2:
        raise ValueError("cannot unzip a single point")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    verts = A.tolist()
    pos = np.full(X.n, -1, dtype=np.intp)
    pos[verts] = np.arange(len(verts))
    a, b = verts[0], verts[-1]

    ball = component_ball(a, eps, G)
    cands = ball[pos[ball] < 0]
    if len(cands) == 0:
        for v in ball:
            if is_local_cut_point(int(v), eps, G):
                raise CutPointError(v, eps)
        raise SeedNotFound(f"every point of B0({a}, {eps:g}) lies on the arc")
    w = _choose_seed(X, cands, a, eps, rng)
    mask = np.zeros(X.n, dtype=bool)
    mask[ball] = True
    seed = G.bfs_path(w, verts, mask)
    x = seed[-1]
    J = [verts[:pos[x] + 1], seed]
    owner = np.zeros(X.n, dtype=np.int8)  # 0 free, 1/2 arc membership
    owner[J[0]] = 1
    owner[J[1]] = 2

    while X.distance(x, b) >= eps / 2:
        if x == b:
            break
        comp = np.zeros(X.n, dtype=bool)
        comp[component_ball(x, eps, G)] = True
        after = (pos > pos[x])
        targets = comp & after
        free = comp & (owner == 0) & ~after
        free[x] = False
        sources = np.flatnonzero(comp & (owner > 0))
        sources = sources[sources != x]
        parent, reached = _detour(G, sources, free, targets)
        if not reached:
            raise CutPointError(x, eps)
        t = max(reached, key=lambda v: (pos[v], -v))
        path = _trace(parent, t)
        u = path[0]
        k = owner[u] - 1
        cut = J[k].index(u)
        for v in J[k][cut + 1:]:
            owner[v] = 0
        owner[x] = 2 - k
        J[k] = J[k][:cut + 1] + path[1:]
        ext = verts[pos[x] + 1:pos[t] + 1]
        J[1 - k] = J[1 - k] + ext
        owner[path[1:]] = k + 1
        owner[ext] = 2 - k
        owner[t] = 3  # shared until the next step reassigns it
        x = t

    # drop the shared endpoint from one arc
    if len(J[0]) > 1:
        J[0] = J[0][:-1]
    else:
        J[1] = J[1][:-1]
    J1, J2 = Arc(X, J[0], G.s), Arc(X, J[1], G.s)
    notes = []
    if widen_arcs:
        J1, J2 = widen(J1, J2, A, eps, G)
        notes.append("widened")
    return _finish(J1, J2, A, eps, "topological", notes)


# -- quantitative splitting ------------------------------------------------------------

def _short_split(A: Arc, eps, G):
    X = G.X
    near = (X.distances_from(A.start) <= _threshold(eps)) & \
        (X.distances_from(A.end) <= _threshold(eps))
    idx = np.flatnonzero(near)
    da = X.distances_from(A.start, idx)
    p = int(idx[np.lexsort((idx, -da))[0]])
    dp = X.distances_from(p, idx)
    q = int(idx[np.lexsort((idx, -dp))[0]])
    return _finish(Arc(X, [p], G.s), Arc(X, [q], G.s), A, eps, "short-arc")


def schedule_marks(A: Arc, D1):
    """Mark indices x0, y0, x1, y1, ..., y_n along A with jumps of D1."""
    X = A.X
    v = A.vertices
    marks = [0]
    cur = 0
    while True:
        d = X.distances_from(int(v[cur]), v[cur + 1:])
        hit = np.flatnonzero(d >= D1 * (1 - 1e-12))
        if len(hit) == 0:
            break
        cur = cur + 1 + int(hit[0])
        marks.append(cur)
    # the final label is a y-label at b
    if len(marks) % 2 == 1:
        marks = marks[:-1]
    if len(marks) == 0:
        return [0, len(v) - 1]
    marks[-1] = len(v) - 1
    return marks


@dataclass
class Schedule:
    D1: float
    D2: float
    D3: float
    marks: list
    feasible: bool
    reason: str = ""


def plan_schedule(A: Arc, eps, lam, L, alpha):
    """Marks and radii for the piecewise route, floored at the net resolution."""
    X = A.X
    D1 = alpha / (5 * lam) * eps
    D2 = D1 / 4
    D3 = D2 / (2 * lam * (L * lam + 2))
    floor = 16 * X.h
    marks = schedule_marks(A, D1) if len(A) > 1 else [0, 0]
    if D3 < floor:
        D3 = floor
        if D3 > D2 / 2:
            return Schedule(D1, D2, D3, marks, False, "resolution: D3 floor exceeds D2/2")
    if not non_interaction(A, marks, D2, D3):
        return Schedule(D1, D2, D3, marks, False, "sub-arc neighbourhoods interact")
    return Schedule(D1, D2, D3, marks, True)


def non_interaction(A: Arc, marks, D2, D3):
    """D3-neighbourhoods of consecutive sub-arcs are disjoint outside the D2-balls."""
    X = A.X
    v = A.vertices
    outside = np.ones(X.n, dtype=bool)
    for m in marks:
        outside &= X.distances_from(int(v[m])) > _threshold(D2)
    cover = np.zeros(X.n, dtype=np.int32)
    for s, t in zip(marks[:-1], marks[1:]):
        cover += X.within(v[s:t + 1], D3, closed=True) & outside
    return bool(cover.max(initial=0) <= 1)


def _join_paths(G, mask, ends, starts):
    """Two vertex-disjoint paths wiring ``ends`` to ``starts`` inside ``mask``.

    Both wirings are tried by sequential routing; a max-flow fallback
    guarantees a pair whenever one exists. Returns (paths, wiring) with
    paths[k] starting at ends[k] and wiring[k] the index of its start.
    """
    X = G.X
    best = None
    for wiring in ((0, 1), (1, 0)):
        for order in ((0, 1), (1, 0)):
            m = mask.copy()
            paths = [None, None]
            for k in order:
                others = [ends[j] for j in range(2) if j != k] + \
                    [starts[wiring[j]] for j in range(2) if j != k]
                mm = m.copy()
                mm[others] = False
                p = G.bfs_path(ends[k], starts[wiring[k]], mm)
                if p is None:
                    break
                paths[k] = p
                m[p] = False
            if paths[0] is None or paths[1] is None:
                continue
            sep = set_distance(paths[0], paths[1], X)
            key = (sep, -len(paths[0]) - len(paths[1]), tuple(-np.array(wiring)))
            if best is None or key > best[0]:
                best = (key, paths, wiring)
    if best is not None:
        return best[1], best[2]
    idx = np.flatnonzero(mask)
    H = nx.Graph()
    H.add_nodes_from(idx.tolist())
    sub = G.adj[idx][:, idx].tocoo()
    H.add_edges_from(zip(idx[sub.row].tolist(), idx[sub.col].tolist()))
    H.add_edges_from([("s", int(e)) for e in ends] + [(int(t), "t") for t in starts])
    try:
        flow_paths = list(nx.node_disjoint_paths(H, "s", "t"))
    except nx.NetworkXNoPath:
        return None, None
    if len(flow_paths) < 2:
        return None, None
    paths, wiring = [None, None], [None, None]
    for p in flow_paths[:2]:
        p = [int(v) for v in p[1:-1]]
        k = ends.index(p[0])
        paths[k] = p
        wiring[k] = starts.index(p[-1])
    return paths, tuple(wiring)


def _piecewise(A: Arc, eps, G, sched: Schedule, lam, rng):
    X = G.X
    v = A.vertices
    marks = sched.marks
    pieces = []
    for s, t in zip(marks[0::2], marks[1::2]):
        P = A.sub(s, t)
        if len(P) < 2:
            raise SplitError("degenerate piece")
        res = topological_split(P, sched.D3 / 2, G, rng=rng)
        pair = [res.J1, res.J2]
        if sched.D3 / 2 >= 4 * X.h:
            st = [straighten(J, sched.D3 / 2, max(lam, 2.0), G).arc if len(J) > 2 else J
                  for J in pair]
            if not np.intersect1d(st[0].vertices, st[1].vertices).size:
                pair = st
        pieces.append(pair)
    used = np.zeros(X.n, dtype=bool)
    for pair in pieces:
        for J in pair:
            used[J.vertices] = True
    chains = [list(pieces[0][0].tolist()), list(pieces[0][1].tolist())]
    for i in range(len(pieces) - 1):
        y = int(v[marks[2 * i + 1]])
        xn = int(v[marks[2 * i + 2]])
        link = v[marks[2 * i + 1]:marks[2 * i + 2] + 1]
        region = (X.distances_from(y) <= _threshold(sched.D2)) | \
            (X.distances_from(xn) <= _threshold(sched.D2)) | \
            X.within(link, sched.D3, closed=True)
        ends = [chains[0][-1], chains[1][-1]]
        starts = [pieces[i + 1][0].start, pieces[i + 1][1].start]
        mask = region & ~used
        mask[ends + starts] = True
        paths, wiring = _join_paths(G, mask, ends, starts)
        if paths is None:
            raise SplitError(f"no disjoint joining inside Join({i})")
        for k in range(2):
            nxt = pieces[i + 1][wiring[k]].tolist()
            chains[k] = chains[k] + paths[k][1:-1] + nxt
            used[paths[k]] = True
    J1 = Arc(X, loop_erase(chains[0]), G.s)
    J2 = Arc(X, loop_erase(chains[1]), G.s)
    if np.intersect1d(J1.vertices, J2.vertices).size:
        raise SplitError("joined arcs intersect")
    J1, J2 = widen(J1, J2, A, eps, G)
    return _finish(J1, J2, A, eps, "piecewise", [f"pieces={len(pieces)}"])


def scale_split(A: Arc, eps, G: NeighborGraph, lam=None, L=1.0, alpha=None, trials=3,
                rng=None):
    """Split an (alpha eps)-local lam-quasi-arc into two arcs that eps-follow it.

    Runs ``trials`` randomized unzips and keeps the best separated pair;
    the achieved ratio separation / eps is the measured delta. The marked
    schedule (jumps D1 = alpha eps / (5 lam), D2 = D1/4, D3 = D2 /
    (2 lam (L lam + 2))) is used when its radii sit above the net
    resolution and the sub-arc neighbourhoods do not interact; otherwise
    the whole arc is unzipped at slack eps. The route taken is recorded.
    """
    X = G.X
    if len(A) < 2:
        raise ValueError("cannot split a single point")
    if lam is None:
        lam = quasiarc_constant(A, eps)
    if alpha is None:
        alpha = achieved_alpha(A, eps, lam)
    if quasiarc_constant(A, alpha * eps) > lam * (1 + 1e-9):
        raise ValueError("input arc is not an (alpha eps)-local lam-quasi-arc")
    if len(A) == 2:
        return _finish(Arc(X, [A.start], G.s), Arc(X, [A.end], G.s), A, eps, "edge")
    if A.diameter <= eps / 5:
        return _short_split(A, eps, G)
    rng = np.random.default_rng(rng)
    sched = plan_schedule(A, eps, lam, L, alpha)
    best = None
    notes = []
    for trial in range(max(1, trials)):
        trial_rng = None if trial == 0 else np.random.default_rng(rng.integers(2**32))
        res = None
        if sched.feasible:
            try:
                res = _piecewise(A, eps, G, sched, lam, trial_rng)
            except SplitError as exc:
                notes.append(f"piecewise fallback: {exc}")
        if res is None:
            res = topological_split(A, eps, G, rng=trial_rng)
            res.route = "whole-arc"
        if best is None or res.separation > best.separation:
            best = res
    if not sched.feasible:
        notes.append(f"schedule infeasible: {sched.reason}")
    best.notes = best.notes + sorted(set(notes))
    return best


def verify_split(res: SplitResult, A: Arc):
    """Independent re-check of every SplitResult invariant; returns a list of failures."""
    from .verify import brute_follows, brute_set_distance
    X = A.X
    bad = []
    if set(res.J1.tolist()) & set(res.J2.tolist()):
        bad.append("arcs intersect")
    sep = brute_set_distance(X, res.J1.tolist(), res.J2.tolist())
    if not sep > 0:
        bad.append("separation not positive")
    if sep != res.separation:
        bad.append("recorded separation disagrees with brute force")
    for J in (res.J1, res.J2):
        if not brute_follows(X, J.tolist(), A.tolist(), res.eps):
            bad.append("follows certificate fails brute-force check")
    if max(res.displacements) > _threshold(res.eps):
        bad.append("endpoint displacement exceeds slack")
    return bad
