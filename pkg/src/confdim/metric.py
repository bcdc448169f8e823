"""Finite metric spaces, set distances, doubling estimates and neighbor graphs."""

from __future__ import annotations

from collections import deque
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree, ConvexHull, QhullError

METRICS = ("euclidean", "sup", "matrix")

# explicit distance matrices are only materialized below this size
MATRIX_LIMIT = 20_000

# relative slack on closed-ball thresholds; keeps d <= s stable under rounding
THRESHOLD_RTOL = 1e-9


class EmptySetError(ValueError):
    pass


def _threshold(s):
    return s * (1.0 + THRESHOLD_RTOL)


class FiniteMetricSpace:
    """A finite point set with a metric oracle.

    Parameters
    ----------
    coords : array_like of shape (n, d), optional
        Point coordinates. Required unless ``matrix`` is given.
    matrix : array_like of shape (n, n), optional
        Explicit symmetric distance matrix.
    metric : {"euclidean", "sup"}
        Metric for coordinate spaces. Ignored for matrix spaces.
    h : float
        Density of the sample in the idealized space (0 if exact).
    ids : sequence, optional
        External point ids; defaults to ``range(n)``.
    bounds : array_like of shape (2, d), optional
        Lower and upper corner of the idealized bounding box. Used to
        anchor box-counting grids.
    """

    def __init__(self, coords=None, *, matrix=None, metric="euclidean", h=0.0,
                 ids=None, bounds=None):
        if (coords is None) == (matrix is None):
            raise ValueError("give exactly one of coords or matrix")
        if matrix is not None:
            matrix = np.array(matrix, dtype=float)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ValueError("distance matrix must be square")
            if matrix.shape[0] > MATRIX_LIMIT:
                raise ValueError(f"explicit matrices are limited to {MATRIX_LIMIT} points")
            self.coords = None
            self.matrix = matrix
            self.metric = "matrix"
            n = matrix.shape[0]
        else:
            coords = np.array(coords, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            if metric not in ("euclidean", "sup"):
                raise ValueError(f"unknown metric {metric!r}")
            self.coords = coords
            self.matrix = None
            self.metric = metric
            n = coords.shape[0]
        if n == 0:
            raise EmptySetError("empty set")
        self.h = float(h)
        self.ids = list(range(n)) if ids is None else list(ids)
        if len(self.ids) != n:
            raise ValueError("ids length does not match point count")
        if bounds is None and self.coords is not None:
            bounds = np.vstack([self.coords.min(axis=0), self.coords.max(axis=0)])
        self.bounds = None if bounds is None else np.array(bounds, dtype=float)

    def __len__(self):
        return len(self.ids)

    def __repr__(self):
        return f"FiniteMetricSpace(n={len(self)}, metric={self.metric!r}, h={self.h:g})"

    @property
    def n(self):
        return len(self.ids)

    @property
    def dim(self):
        return None if self.coords is None else self.coords.shape[1]

    def __eq__(self, other):
        if not isinstance(other, FiniteMetricSpace):
            return NotImplemented
        if (self.metric, self.h, self.ids) != (other.metric, other.h, other.ids):
            return False
        if self.coords is not None:
            return (other.coords is not None and self.coords.shape == other.coords.shape
                    and np.array_equal(self.coords, other.coords))
        return other.matrix is not None and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    # -- distance kernel -------------------------------------------------
    # Every distance in the package goes through _kernel so that values
    # computed along different code paths agree bit for bit.

    def _kernel(self, a, b):
        diff = a - b
        if self.metric == "sup":
            return np.max(np.abs(diff), axis=-1)
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def distance(self, i, j):
        if self.matrix is not None:
            return float(self.matrix[i, j])
        return float(self._kernel(self.coords[i], self.coords[j]))

    def distances(self, U, V):
        """Distance block between index sets ``U`` and ``V``."""
        U = np.asarray(U, dtype=np.intp)
        V = np.asarray(V, dtype=np.intp)
        if self.matrix is not None:
            return self.matrix[np.ix_(U, V)]
        return self._kernel(self.coords[U][:, None, :], self.coords[V][None, :, :])

    def distances_from(self, i, idx=None):
        if self.matrix is not None:
            row = self.matrix[i]
            return row if idx is None else row[np.asarray(idx, dtype=np.intp)]
        pts = self.coords if idx is None else self.coords[np.asarray(idx, dtype=np.intp)]
        return self._kernel(pts, self.coords[i])

    @cached_property
    def tree(self):
        if self.coords is None:
            raise TypeError("matrix spaces have no coordinate tree")
        return cKDTree(self.coords)

    @property
    def _p(self):
        return np.inf if self.metric == "sup" else 2

    def ball(self, i, r, closed=True):
        d = self.distances_from(i)
        return np.flatnonzero(d <= _threshold(r)) if closed else np.flatnonzero(d < r)

    def annulus(self, p, r, R):
        """Closed ball of radius ``R`` minus the open ball of radius ``r``."""
        d = self.distances_from(p)
        return np.flatnonzero((d >= r) & (d <= _threshold(R)))

    def diameter(self, idx=None):
        idx = np.arange(self.n) if idx is None else np.asarray(idx, dtype=np.intp)
        if len(idx) <= 1:
            return 0.0
        if self.matrix is not None:
            return float(self.matrix[np.ix_(idx, idx)].max())
        pts = self.coords[idx]
        if self.metric == "sup":
            return float(np.max(pts.max(axis=0) - pts.min(axis=0)))
        if len(idx) > 64 and pts.shape[1] >= 2:
            try:
                idx = idx[ConvexHull(pts).vertices]
            except QhullError:
                pass
        return _max_pair(self, idx)

    def nearest(self, query, target):
        """Exact nearest ``target`` point for each ``query`` point.

        Returns ``(dist, pos)`` where ``pos`` indexes into ``target``.
        """
        query = np.asarray(query, dtype=np.intp)
        target = np.asarray(target, dtype=np.intp)
        if len(query) == 0 or len(target) == 0:
            raise EmptySetError("empty set")
        if self.matrix is not None:
            block = self.matrix[np.ix_(query, target)]
            pos = block.argmin(axis=1)
            return block[np.arange(len(query)), pos], pos
        tree = cKDTree(self.coords[target])
        k = min(2, len(target))
        approx, pos = tree.query(self.coords[query], k=k, p=self._p)
        if k == 1:
            approx, pos = approx[:, None], pos[:, None]
        pos = pos[:, 0].astype(np.intp)
        dist = self._kernel(self.coords[target[pos]], self.coords[query])
        # near ties are re-ranked with the shared kernel so results are exact
        if k == 2:
            tied = np.flatnonzero(approx[:, 1] <= approx[:, 0] * (1 + 1e-9) + 1e-300)
            if len(tied):
                cands = tree.query_ball_point(self.coords[query[tied]],
                                              approx[tied, 0] * (1 + 1e-9) + 1e-300, p=self._p)
                for t, cand in zip(tied, cands):
                    cand = np.asarray(cand, dtype=np.intp)
                    d = self._kernel(self.coords[target[cand]], self.coords[query[t]])
                    j = int(np.argmin(d))
                    dist[t], pos[t] = d[j], cand[j]
        return dist, pos

    def within(self, target, r, closed=False):
        """Boolean mask of points whose distance to ``target`` is < r (or <= r)."""
        target = np.asarray(target, dtype=np.intp)
        if len(target) == 0:
            return np.zeros(self.n, dtype=bool)
        if self.matrix is not None:
            d = self.matrix[:, target].min(axis=1)
        else:
            d, _ = cKDTree(self.coords[target]).query(self.coords, k=1, p=self._p,
                                                      distance_upper_bound=_threshold(r) * 2)
        return d <= _threshold(r) if closed else d < r

    def point_to_set(self, target):
        """Distance from every point of the space to the set ``target``."""
        target = np.asarray(target, dtype=np.intp)
        if self.matrix is not None:
            return self.matrix[:, target].min(axis=1)
        d, _ = cKDTree(self.coords[target]).query(self.coords, k=1, p=self._p)
        return d

    def subspace(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        ids = [self.ids[i] for i in idx]
        if self.matrix is not None:
            return FiniteMetricSpace(matrix=self.matrix[np.ix_(idx, idx)], h=self.h, ids=ids)
        return FiniteMetricSpace(self.coords[idx], metric=self.metric, h=self.h, ids=ids,
                                 bounds=self.bounds)

    def to_matrix(self):
        if self.n > MATRIX_LIMIT:
            raise ValueError(f"explicit matrices are limited to {MATRIX_LIMIT} points")
        if self.matrix is not None:
            return self
        idx = np.arange(self.n)
        return FiniteMetricSpace(matrix=self.distances(idx, idx), h=self.h, ids=self.ids)


def _max_pair(X, idx, chunk=1024):
    best = 0.0
    for start in range(0, len(idx), chunk):
        block = X.distances(idx[start:start + chunk], idx)
        best = max(best, float(block.max()))
    return best


def _as_index(U, X):
    U = np.unique(np.asarray(U, dtype=np.intp))
    if len(U) == 0:
        raise EmptySetError("empty set")
    if U[0] < 0 or U[-1] >= X.n:
        raise IndexError("point index out of range")
    return U


def set_distance(U, V, X):
    """Minimum distance between two nonempty point sets of ``X``."""
    U, V = _as_index(U, X), _as_index(V, X)
    if len(U) > len(V):
        U, V = V, U
    d, _ = X.nearest(U, V)
    return float(d.min())


def hausdorff_distance(U, V, X):
    """Hausdorff distance between two nonempty point sets of ``X``."""
    U, V = _as_index(U, X), _as_index(V, X)
    du, _ = X.nearest(U, V)
    dv, _ = X.nearest(V, U)
    return float(max(du.max(), dv.max()))


def directed_hausdorff(U, V, X):
    """``max_u d(u, V)``: how far ``U`` strays from ``V``."""
    U, V = _as_index(U, X), _as_index(V, X)
    d, _ = X.nearest(U, V)
    return float(d.max())


# -- doubling -----------------------------------------------------------------

def _greedy_cover(hit):
    """Greedy set cover on a boolean (candidates x elements) matrix."""
    uncovered = np.ones(hit.shape[1], dtype=bool)
    chosen = []
    while uncovered.any():
        gain = hit[:, uncovered].sum(axis=1)
        j = int(np.argmax(gain))
        if gain[j] == 0:
            raise RuntimeError("cover candidates do not cover the ball")
        chosen.append(j)
        uncovered &= ~hit[j]
    return chosen


def _exact_cover(masks, full, upper, node_budget=None):
    """Branch and bound minimum set cover on bitmasks.

    Returns ``(size, exact)``; ``exact`` is False when the node budget ran out
    before optimality was proven.
    """
    nbits = full.bit_length()
    by_bit = [[] for _ in range(nbits)]
    for m in sorted(masks, key=lambda m: -m.bit_count()):
        b = m
        while b:
            low = b & -b
            by_bit[low.bit_length() - 1].append(m)
            b ^= low
    biggest = max(m.bit_count() for m in masks)
    best = upper
    nodes = 0
    exhausted = False

    def dfs(covered, k):
        nonlocal best, nodes, exhausted
        nodes += 1
        if node_budget is not None and nodes > node_budget:
            exhausted = True
            return
        if covered == full:
            best = min(best, k)
            return
        remaining = (full & ~covered).bit_count()
        if k + -(-remaining // biggest) >= best:
            return
        free = full & ~covered
        bit = (free & -free).bit_length() - 1
        for m in by_bit[bit]:
            dfs(covered | m, k + 1)
            if exhausted:
                return

    dfs(0, 0)
    return best, not exhausted


def _thin(X, idx, spacing):
    """Greedy ``spacing``-net of ``idx`` (every point of idx lies within spacing of it)."""
    if X.coords is not None:
        keys = np.floor(X.coords[idx] / (spacing / np.sqrt(X.dim))).astype(np.int64)
        _, first = np.unique(keys, axis=0, return_index=True)
        return idx[np.sort(first)]
    return idx


def cover_number(X, center, r, exact_limit=24, node_budget=20_000, max_candidates=400):
    """Fewest closed (r/2)-balls centered in ``X`` covering the closed ball B(center, r).

    Returns ``(count, exact)``. Exact branch and bound runs unbounded when at
    most ``exact_limit`` distinct candidate covers remain; otherwise a greedy
    cover is improved by budgeted exact search and may stay an upper bound.
    """
    ball = X.ball(center, r)
    if len(ball) == 1:
        return 1, True
    cands = X.ball(center, 1.5 * r)
    thinned = False
    if len(cands) > max_candidates:
        spacing = r / 16
        while True:
            sub = _thin(X, cands, spacing)
            if len(sub) <= max_candidates or spacing > r:
                break
            spacing *= 1.5
        thinned = len(sub) < len(cands)
        cands = sub
    hit = X.distances(cands, ball) <= _threshold(r / 2)
    hit = hit[hit.any(axis=1)]
    # elements hit by the same candidates are interchangeable
    hit = np.unique(np.unique(hit, axis=1), axis=0)
    if len(hit) <= 200:
        counts = hit.sum(axis=1)
        order = np.argsort(-counts, kind="stable")
        hit = hit[order]
        keep = []
        for k, row in enumerate(hit):
            if not any(np.all(hit[j] >= row) for j in keep):
                keep.append(k)
        hit = hit[keep]
    greedy = len(_greedy_cover(hit))
    if greedy <= 1:
        return 1, not thinned
    packed = np.packbits(hit, axis=1, bitorder="little")
    masks = [int.from_bytes(row.tobytes(), "little") for row in packed]
    full = (1 << hit.shape[1]) - 1
    budget = None if len(masks) <= exact_limit else node_budget
    best, exact = _exact_cover(masks, full, greedy, budget)
    return best, exact and not thinned


def dyadic_radii(X, floor=None):
    """Radii ``diam * 2**-k`` down to ``floor`` (default 4h)."""
    diam = X.diameter()
    if diam == 0:
        return []
    floor = 4 * X.h if floor is None else floor
    radii = []
    r = diam
    while r >= floor and len(radii) < 64:
        radii.append(r)
        r /= 2
    return radii


def doubling_constant(X, sample_budget=64, rng=None, radii=None):
    """Largest sampled minimal cover of B(c, r) by (r/2)-balls.

    Centers are sampled uniformly; radii run over a dyadic ladder from the
    space diameter down to 4h. The value is an upper-bound certificate for
    the sampled scales (greedy covers are used when exact search is too big).
    """
    if X.n == 1:
        return 1
    rng = np.random.default_rng(rng)
    radii = dyadic_radii(X) if radii is None else list(radii)
    if not radii:
        return 1
    worst = 1
    centers = rng.integers(0, X.n, size=sample_budget)
    for k, c in enumerate(centers):
        r = radii[k % len(radii)]
        count, _ = cover_number(X, int(c), r)
        worst = max(worst, count)
    return worst


# -- neighbor graph -------------------------------------------------------------

class NeighborGraph:
    """Adjacency of ``X`` at connection scale ``s``: edges where 0 < d(x, y) <= s."""

    def __init__(self, X, s):
        if s <= 0:
            raise ValueError("connection scale must be positive")
        self.X = X
        self.s = float(s)
        n = X.n
        if X.matrix is not None:
            iu, ju = np.nonzero(np.triu((X.matrix <= _threshold(s)) & (X.matrix > 0), k=1))
        else:
            pairs = X.tree.query_pairs(_threshold(s), p=X._p, output_type="ndarray")
            iu, ju = pairs[:, 0], pairs[:, 1]
            if len(iu):
                d = X._kernel(X.coords[iu], X.coords[ju])
                keep = (d <= _threshold(s)) & (d > 0)
                iu, ju = iu[keep], ju[keep]
        if X.matrix is not None:
            w = X.matrix[iu, ju]
        else:
            w = X._kernel(X.coords[iu], X.coords[ju]) if len(iu) else np.zeros(0)
        rows = np.concatenate([iu, ju])
        cols = np.concatenate([ju, iu])
        data = np.concatenate([w, w])
        self.adj = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
        self.adj.sort_indices()
        self.indptr = self.adj.indptr
        self.indices = self.adj.indices

    def __repr__(self):
        return f"NeighborGraph(n={self.X.n}, s={self.s:g}, edges={self.n_edges})"

    @property
    def n(self):
        return self.X.n

    @property
    def n_edges(self):
        return self.adj.nnz // 2

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def has_edge(self, i, j):
        return bool(np.any(self.neighbors(i) == j))

    def edge_set(self):
        coo = sparse.triu(self.adj, k=1).tocoo()
        return {(int(i), int(j)) for i, j in zip(coo.row, coo.col)}

    def components(self, mask=None):
        """Component labels; points outside ``mask`` get label -1."""
        if mask is None:
            return csgraph.connected_components(self.adj, directed=False)[1]
        idx = np.flatnonzero(mask)
        labels = np.full(self.n, -1, dtype=np.intp)
        if len(idx):
            sub = self.adj[idx][:, idx]
            labels[idx] = csgraph.connected_components(sub, directed=False)[1]
        return labels

    def n_components(self, mask=None):
        labels = self.components(mask)
        return len(np.unique(labels[labels >= 0]))

    def bfs_path(self, sources, targets, mask=None):
        """Hop-shortest path from any source to any target through ``mask``.

        Sources and targets must themselves lie in the mask. Returns the
        vertex list or None.
        """
        sources = np.atleast_1d(np.asarray(sources, dtype=np.intp))
        targets = np.atleast_1d(np.asarray(targets, dtype=np.intp))
        allowed = np.ones(self.n, dtype=bool) if mask is None else mask
        is_target = np.zeros(self.n, dtype=bool)
        is_target[targets] = True
        parent = np.full(self.n, -2, dtype=np.intp)
        queue = deque()
        for v in sources:
            if allowed[v] and parent[v] == -2:
                parent[v] = -1
                queue.append(int(v))
        indptr, indices = self.indptr, self.indices
        while queue:
            v = queue.popleft()
            if is_target[v]:
                path = [v]
                while parent[path[-1]] >= 0:
                    path.append(int(parent[path[-1]]))
                return path[::-1]
            for w in indices[indptr[v]:indptr[v + 1]]:
                if allowed[w] and parent[w] == -2:
                    parent[w] = v
                    queue.append(int(w))
        return None

    def shortest_path(self, source, target, mask=None):
        """Length-weighted shortest path inside ``mask``; returns (path, length)."""
        if mask is None:
            idx = np.arange(self.n)
            sub = self.adj
        else:
            idx = np.flatnonzero(mask)
            sub = self.adj[idx][:, idx]
        local = np.full(self.n, -1, dtype=np.intp)
        local[idx] = np.arange(len(idx))
        s, t = local[source], local[target]
        if s < 0 or t < 0:
            return None, np.inf
        dist, pred = csgraph.dijkstra(sub, directed=False, indices=s, return_predecessors=True)
        if not np.isfinite(dist[t]):
            return None, np.inf
        path = [t]
        while path[-1] != s:
            path.append(pred[path[-1]])
        return [int(idx[v]) for v in path[::-1]], float(dist[t])


def build_neighbor_graph(X, s):
    return NeighborGraph(X, s)


def path_length(X, path):
    path = np.asarray(path, dtype=np.intp)
    if len(path) < 2:
        return 0.0
    if X.matrix is not None:
        return float(X.matrix[path[:-1], path[1:]].sum())
    return float(X._kernel(X.coords[path[:-1]], X.coords[path[1:]]).sum())


def triangle_audit(X, n_triples=1000, rng=None):
    """Largest triangle-inequality excess over random triples (<= 0 means pass)."""
    rng = np.random.default_rng(rng)
    t = rng.integers(0, X.n, size=(n_triples, 3))
    dxz = np.array([X.distance(a, c) for a, _, c in t])
    dxy = np.array([X.distance(a, b) for a, b, _ in t])
    dyz = np.array([X.distance(b, c) for _, b, c in t])
    return float(np.max(dxz - dxy - dyz))
