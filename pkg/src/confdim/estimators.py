"""Scikit-learn style estimators over point clouds.

Each estimator accepts either an ``(n, d)`` coordinate array together
with a resolution ``h`` or a ready :class:`FiniteMetricSpace`; fitted
attributes carry a trailing underscore.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .arcs import find_quasiarc
from .cantor import build_family, hit_audit, search_family
from .connectivity import annular_constant
from .dimension import bound_from_family, box_counting_dimension
from .metric import FiniteMetricSpace, NeighborGraph, doubling_constant
from .pipeline import default_endpoints


def check_space(X, h=None, metric="euclidean"):
    """Coerce ``X`` to a FiniteMetricSpace, validating raw arrays."""
    if isinstance(X, FiniteMetricSpace):
        return X
    arr = check_array(X, dtype=float, ensure_min_samples=2)
    if h is None:
        raise ValueError("raw coordinate input needs the sample resolution h")
    if h <= 0:
        raise ValueError("h must be positive")
    return FiniteMetricSpace(arr, metric=metric, h=h)


class BoxCountingDimension(BaseEstimator):
    def __init__(self, h=None, metric="euclidean", scales=None):
        self.h = h
        self.metric = metric
        self.scales = scales

    def fit(self, X, y=None):
        space = check_space(X, self.h, self.metric)
        est = box_counting_dimension(space, self.scales)
        self.dimension_ = est.tau
        self.estimate_ = est
        return self


class DoublingEstimator(BaseEstimator):
    def __init__(self, h=None, metric="euclidean", samples=32, random_state=0):
        self.h = h
        self.metric = metric
        self.samples = samples
        self.random_state = random_state

    def fit(self, X, y=None):
        space = check_space(X, self.h, self.metric)
        self.doubling_constant_ = doubling_constant(space, self.samples, self.random_state)
        return self


class ConnectivityEstimator(BaseEstimator):
    """Sampled linear and annular connectivity constants."""

    def __init__(self, h=None, metric="euclidean", samples=64, n_jobs=1, random_state=0):
        self.h = h
        self.metric = metric
        self.samples = samples
        self.n_jobs = n_jobs
        self.random_state = random_state

    def fit(self, X, y=None):
        space = check_space(X, self.h, self.metric)
        rep = annular_constant(space, self.samples, self.random_state, n_jobs=self.n_jobs)
        self.L_linear_ = rep.L_linear
        self.L_annular_ = rep.L_annular
        self.report_ = rep
        return self

    @property
    def annular_ok_(self):
        check_is_fitted(self, "report_")
        return self.report_.annular_ok


class ConformalDimensionBound(BaseEstimator):
    """Lower bound 1 + sigma / (tau - sigma) from a certified Cantor family of quasi-arcs.

    ``bound_`` is the string ``"uncertified"`` when a certificate fails or
    the space is not annularly connected at the sampled scales.
    """

    def __init__(self, h=None, metric="euclidean", depth=2, beta_policy="measured",
                 lam_target=4.0, samples=64, hit_balls=1000, n_jobs=1, random_state=0):
        self.h = h
        self.metric = metric
        self.depth = depth
        self.beta_policy = beta_policy
        self.lam_target = lam_target
        self.samples = samples
        self.hit_balls = hit_balls
        self.n_jobs = n_jobs
        self.random_state = random_state

    def fit(self, X, y=None):
        space = check_space(X, self.h, self.metric)
        rng = np.random.default_rng(self.random_state)
        G = NeighborGraph(space, 2 * space.h)
        conn = annular_constant(space, self.samples, int(rng.integers(2**32)), G,
                                n_jobs=self.n_jobs)
        self.connectivity_ = conn
        self.family_ = None
        if not conn.annular_ok:
            self.sigma_, self.tau_, self.bound_ = None, None, "uncertified"
            return self
        a, b = default_endpoints(space)
        seed_arc = find_quasiarc(a, b, G, self.lam_target)
        sub = int(rng.integers(2**32))
        if self.beta_policy == "analytic":
            fam = build_family(G, seed_arc, self.depth,
                               policy="analytic", lam_target=self.lam_target, rng=sub,
                               n_jobs=self.n_jobs)
        else:
            fam, _ = search_family(G, seed_arc, self.depth, rng=sub,
                                   lam_target=self.lam_target, n_jobs=self.n_jobs)
        hit = hit_audit(fam, self.hit_balls, int(rng.integers(2**32)))
        frag = bound_from_family(fam, space, hit_report=hit)
        self.family_ = fam
        self.hit_report_ = hit
        self.report_ = frag
        self.sigma_, self.tau_, self.bound_ = frag.sigma, frag.tau, frag.bound
        return self

    @property
    def certified_(self):
        check_is_fitted(self, "bound_")
        return self.bound_ != "uncertified"
