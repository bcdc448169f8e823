"""Discrete arcs, quasi-arc constants, the follows relation and arc straightening."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .connectivity import ConnectivityError, least_linear_constant
from .metric import NeighborGraph, _threshold, path_length


class StraightenError(RuntimeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


class Arc:
    """Simple path of point indices in a finite metric space."""

    def __init__(self, X, vertices, scale=None):
        self.X = X
        self.vertices = np.asarray(vertices, dtype=np.intp).reshape(-1)
        if len(self.vertices) == 0:
            raise ValueError("arcs need at least one vertex")
        self.scale = scale
        self._diameter = None

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices.tolist())

    def __getitem__(self, k):
        return self.vertices[k]

    def __repr__(self):
        return f"Arc(n={len(self)}, ends=({self.start}, {self.end}))"

    def __eq__(self, other):
        return isinstance(other, Arc) and np.array_equal(self.vertices, other.vertices)

    __hash__ = None

    @property
    def start(self):
        return int(self.vertices[0])

    @property
    def end(self):
        return int(self.vertices[-1])

    @property
    def diameter(self):
        if self._diameter is None:
            self._diameter = self.X.diameter(self.vertices)
        return self._diameter

    @property
    def length(self):
        return path_length(self.X, self.vertices)

    def is_simple(self):
        return len(np.unique(self.vertices)) == len(self.vertices)

    def steps_within(self, s):
        v = self.vertices
        if len(v) < 2:
            return True
        d = self.X._kernel(self.X.coords[v[:-1]], self.X.coords[v[1:]]) \
            if self.X.coords is not None else self.X.matrix[v[:-1], v[1:]]
        return bool(np.all(d <= _threshold(s)))

    def sub(self, i, j):
        lo, hi = min(i, j), max(i, j)
        return Arc(self.X, self.vertices[lo:hi + 1], self.scale)

    def reversed(self):
        return Arc(self.X, self.vertices[::-1], self.scale)

    def tolist(self):
        return [int(v) for v in self.vertices]


def subarc_diameter(A: Arc, i, j):
    """Exact diameter of the vertex set A[i..j]."""
    n = len(A)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError("subarc index out of range")
    if i > j:
        raise ValueError("subarc_diameter needs i <= j")
    return A.X.diameter(A.vertices[i:j + 1])


def pair_scan(A: Arc, eps=math.inf):
    """All pairs i < j with d(A_i, A_j) <= eps, with their subarc diameters.

    Uses diam(A[i..j]) = max(diam(A[i..j-1]), diam(A[i+1..j]), d(A_i, A_j)),
    one vectorized diagonal at a time. Returns arrays (i, j, d, diam).
    """
    n = len(A)
    v = A.vertices
    D = A.X.distances(v, v)
    prev = np.zeros(n)
    out_i, out_j, out_d, out_m = [], [], [], []
    for ell in range(1, n):
        d = np.diagonal(D, ell)
        cur = np.maximum(np.maximum(prev[:-1], prev[1:]), d)
        sel = np.flatnonzero(d <= _threshold(eps)) if math.isfinite(eps) else np.arange(n - ell)
        if len(sel):
            out_i.append(sel)
            out_j.append(sel + ell)
            out_d.append(d[sel])
            out_m.append(cur[sel])
        prev = cur
    if not out_i:
        e = np.zeros(0)
        return e.astype(np.intp), e.astype(np.intp), e, e
    return (np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_d),
            np.concatenate(out_m))


def quasiarc_constant(A: Arc, eps=math.inf):
    """max diam(A[x, y]) / d(x, y) over pairs with d(x, y) <= eps (1 for trivial arcs)."""
    if len(A) < 2:
        return 1.0
    _, _, d, m = pair_scan(A, eps)
    d_pos = d > 0
    if not d_pos.any():
        return 1.0
    return float(max(1.0, np.max(m[d_pos] / d[d_pos])))


def violators(A: Arc, eps, lam):
    """Pairs breaking the lam-quasi-arc condition below eps, worst first.

    Order: largest ratio, then lexicographic (i, j).
    """
    i, j, d, m = pair_scan(A, eps)
    ratio = np.where(d > 0, m / np.where(d > 0, d, 1.0), np.inf)
    bad = np.flatnonzero(ratio > lam)
    order = np.lexsort((j[bad], i[bad], -ratio[bad]))
    bad = bad[order]
    return list(zip(i[bad].tolist(), j[bad].tolist(), ratio[bad].tolist(), d[bad].tolist()))


def achieved_alpha(A: Arc, eps, lam):
    """Largest alpha <= 1 such that A is an (alpha eps)-local lam-quasi-arc."""
    bad = violators(A, eps, lam)
    if not bad:
        return 1.0
    d_min = min(b[3] for b in bad)
    return min(1.0, d_min / eps * (1 - 1e-12))


# -- follows -------------------------------------------------------------------

@dataclass
class FollowsCertificate:
    """Monotone label map ``p`` from follower vertices to target indices."""
    p: np.ndarray
    eps: float
    displacement: float
    ok: bool = True

    def __bool__(self):
        return True

    def to_dict(self):
        return {"eps": self.eps, "displacement": self.displacement, "p": self.p.tolist()}


@dataclass
class FollowsViolation:
    pair: tuple
    eps: float
    ok: bool = False

    def __bool__(self):
        return False


def _candidates(B: Arc, A: Arc, eps, chunk=2048):
    X = B.X
    out = []
    for s in range(0, len(B), chunk):
        block = X.distances(B.vertices[s:s + chunk], A.vertices) <= _threshold(eps)
        out.extend(np.flatnonzero(row) for row in block)
    return out


def check_follows(B: Arc, A: Arc, eps):
    """Certificate that B eps-follows A, or the violating follower pair.

    The label map is built by nearest admissible projection with monotone
    repair: each follower vertex takes the first target index within eps
    that does not precede the previous label. Orientation is preserved, so
    B must run from near A's start toward near A's end. Neighborhoods are
    closed at the net level.
    """
    cands = _candidates(B, A, eps)
    p = np.empty(len(B), dtype=np.intp)
    prev = 0
    for k, c in enumerate(cands):
        pos = np.searchsorted(c, prev)
        if pos == len(c):
            return FollowsViolation(pair=(max(k - 1, 0), k), eps=eps)
        prev = int(c[pos])
        p[k] = prev
    disp = float(np.max(B.X.distances(B.vertices, A.vertices)[np.arange(len(B)), p]))
    return FollowsCertificate(p=p, eps=eps, displacement=disp)


def follows_slack(B: Arc, A: Arc):
    """Smallest eps for which check_follows(B, A, eps) succeeds."""
    D = B.X.distances(B.vertices, A.vertices)
    values = np.unique(D)
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if check_follows(B, A, float(values[mid])):
            hi = mid
        else:
            lo = mid + 1
    return float(values[lo])


# -- straightening -----------------------------------------------------------------

def loop_erase(seq):
    """Remove loops from a vertex sequence, keeping first visits."""
    out, pos = [], {}
    for v in seq:
        v = int(v)
        if v in pos:
            k = pos[v]
            for w in out[k + 1:]:
                del pos[w]
            del out[k + 1:]
        else:
            pos[v] = len(out)
            out.append(v)
    return out


@dataclass
class StraightenResult:
    arc: Arc
    follows: FollowsCertificate
    eps: float
    lam: float
    alpha: float
    iterations: int
    potentials: list = field(default_factory=list)
    skipped: int = 0

    @property
    def local_constant(self):
        return quasiarc_constant(self.arc, self.alpha * self.eps)


def straighten(A: Arc, eps, lam_target, G: NeighborGraph, max_iter=5000):
    """Shortcut the worst quasi-arc violations of ``A`` until none are fixable.

    Each round takes the worst pair (x, y) with d(x, y) <= eps and
    diam(A[x, y]) > lam_target d(x, y) and replaces A[x, y] by the
    length-shortest path inside B(x, r) ∩ B(y, r) ∩ N(A, eps), where
    r = lam_target d(x, y) / 2 so the shortcut cannot itself violate.
    Shortcuts are only accepted when they shorten the arc and keep it
    eps-following the input; total length is the termination potential.
    The achieved locality alpha is reported, not imposed.
    """
    X = G.X
    base = Arc(X, A.vertices, G.s)
    corridor = X.within(A.vertices, eps)
    corridor[A.vertices] = True
    cur = base.tolist()
    potentials = [path_length(X, cur)]
    skipped = set()
    iterations = 0
    trace = []
    changed = True
    while changed:
        changed = False
        arc = Arc(X, cur, G.s)
        for i, j, ratio, d in violators(arc, eps, lam_target):
            iterations += 1
            if iterations > max_iter:
                raise StraightenError("straighten hit its iteration cap", trace)
            x, y = cur[i], cur[j]
            if (x, y) in skipped:
                continue
            r = lam_target * d / 2
            mask = corridor & (X.distances_from(x) <= _threshold(r)) \
                & (X.distances_from(y) <= _threshold(r))
            path, plen = G.shortest_path(x, y, mask)
            sub_len = path_length(X, cur[i:j + 1])
            if path is None or plen >= sub_len:
                skipped.add((x, y))
                continue
            new = loop_erase(cur[:i] + path + cur[j + 1:])
            new_len = path_length(X, new)
            if not new_len < potentials[-1]:
                raise StraightenError("potential failed to decrease", trace)
            if not check_follows(Arc(X, new), base, eps):
                skipped.add((x, y))
                continue
            trace.append((i, j, ratio, new_len))
            potentials.append(new_len)
            cur = new
            changed = True
            break
    out = Arc(X, cur, G.s)
    cert = check_follows(out, base, eps)
    alpha = achieved_alpha(out, eps, lam_target)
    return StraightenResult(arc=out, follows=cert, eps=eps, lam=lam_target, alpha=alpha,
                            iterations=len(potentials) - 1, potentials=potentials,
                            skipped=len(skipped))


def find_quasiarc(x, y, G: NeighborGraph, lam_target=4.0):
    """Join x to y by a path of least linear constant, then straighten at a
    cascade of scales from its diameter down to 4h."""
    X = G.X
    labels = G.components()
    if labels[x] != labels[y]:
        raise ConnectivityError(f"points {x} and {y} are disconnected at scale {G.s:g}")
    if x == y:
        return Arc(X, [x], G.s)
    if G.has_edge(x, y):
        return Arc(X, [x, y], G.s)
    _, path = least_linear_constant(x, y, G)
    arc = Arc(X, path, G.s)
    eps = arc.diameter
    floor = max(4 * X.h, G.s)
    while eps >= floor:
        arc = straighten(arc, eps, lam_target, G).arc
        eps /= 2
    return arc
