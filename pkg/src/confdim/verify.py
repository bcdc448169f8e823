"""Brute-force reference routines used to audit the optimized code paths.

Every function here works from the full pairwise distance block with no
trees, caching or pruning, so agreement with the fast routines is a real
cross-check rather than a restatement.
"""

from __future__ import annotations

import itertools

import numpy as np

from .metric import _threshold


def _block(X, U, V):
    U = np.asarray(U, dtype=np.intp)
    V = np.asarray(V, dtype=np.intp)
    if X.matrix is not None:
        return X.matrix[np.ix_(U, V)]
    return X._kernel(X.coords[U][:, None, :], X.coords[V][None, :, :])


def brute_set_distance(X, U, V):
    return float(_block(X, U, V).min())


def brute_hausdorff(X, U, V):
    D = _block(X, U, V)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def brute_diameter(X, U):
    return float(_block(X, U, U).max()) if len(U) > 1 else 0.0


def brute_quasiarc_constant(X, arc, eps=np.inf):
    arc = list(arc)
    D = _block(X, arc, arc)
    best = 1.0
    for i, j in itertools.combinations(range(len(arc)), 2):
        if D[i, j] <= _threshold(eps) and D[i, j] > 0:
            best = max(best, D[i:j + 1, i:j + 1].max() / D[i, j])
    return float(best)


def brute_follows(X, B, A, eps, max_pairs=2000, rng=0):
    """Direct check that B eps-follows A.

    Builds the set of admissible labels per follower vertex, extracts the
    least monotone labelling by a forward sweep, then tests the containment
    B[i..j] within eps of A[p(i)..p(j)] on every index pair (or a seeded
    sample of ``max_pairs`` pairs for long arcs).
    """
    D = _block(X, B, A)
    ok = D <= _threshold(eps)
    p = []
    lo = 0
    for k in range(len(B)):
        feas = np.flatnonzero(ok[k, lo:])
        if len(feas) == 0:
            return False
        lo = lo + int(feas[0])
        p.append(lo)
    n = len(B)
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    if len(pairs) > max_pairs:
        gen = np.random.default_rng(rng)
        pick = gen.choice(len(pairs), size=max_pairs, replace=False)
        pairs = [pairs[t] for t in pick]
    for i, j in pairs:
        sub = D[i:j + 1, p[i]:p[j] + 1]
        if sub.min(axis=1).max() > _threshold(eps):
            return False
    return True


def brute_hit_count(X, arcs, center, r):
    """Number of arcs with a vertex in the closed ball B(center, r)."""
    hits = 0
    for arc in arcs:
        d = _block(X, [center], list(arc))[0]
        hits += bool(np.any(d <= _threshold(r)))
    return hits
