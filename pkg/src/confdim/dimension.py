"""Box-counting dimension and the conformal-dimension lower bound built on it."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .metric import _threshold

MIN_SCALES = 4


class DimensionError(ValueError):
    pass


@dataclass
class DimensionEstimate:
    """Slope of log N(s) against log(1/s) with the data behind it."""
    tau: float
    scales: list
    counts: list
    residual: float
    base: float | None = None
    method: str = "grid"
    note: str = ("box-counting dimension used in place of packing dimension; the two agree "
                 "on self-similar sets and box counting can only overestimate, which weakens "
                 "the bound")

    def to_dict(self):
        return {"tau": self.tau, "scales": list(self.scales), "counts": list(self.counts),
                "residual": self.residual, "base": self.base, "method": self.method,
                "note": self.note}


def box_counts(X, scales):
    """Occupied boxes (grid anchored at the lower bound) or greedy net sizes per scale."""
    scales = np.asarray(scales, dtype=float)
    if X.coords is None:
        return [greedy_net_size(X, s) for s in scales]
    lo, hi = X.bounds if X.bounds is not None else (X.coords.min(0), X.coords.max(0))
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = []
    for s in scales:
        top = np.maximum(np.ceil((hi - lo) / s - 1e-9).astype(np.int64) - 1, 0)
        idx = np.floor((X.coords - lo) / s + 1e-9).astype(np.int64)
        idx = np.clip(idx, 0, top)
        out.append(len(np.unique(idx, axis=0)))
    return out


def greedy_net_size(X, s):
    """Size of a greedy maximal s-separated subset (matrix spaces)."""
    alive = np.ones(X.n, dtype=bool)
    count = 0
    for i in range(X.n):
        if alive[i]:
            count += 1
            alive &= X.distances_from(i) > _threshold(s)
    return count


def _fit(scales, counts):
    x = np.log(1 / np.asarray(scales, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), resid


def _geometric(base, lo, hi):
    if hi < lo:
        return []
    k0 = math.ceil(-math.log(hi) / math.log(base) - 1e-9)
    k1 = math.floor(-math.log(lo) / math.log(base) + 1e-9)
    return [base ** -k for k in range(k0, k1 + 1)]


def auto_scales(X, bases=(2, 3)):
    """Candidate scale ladders per base: powers within [8h, diam/4], else [4h, diam/2]."""
    diam = X.diameter()
    h = X.h if X.h > 0 else diam / 1024
    out = {}
    for b in bases:
        s = _geometric(b, 8 * h, diam / 4)
        if len(s) < MIN_SCALES:
            s = _geometric(b, 4 * h, diam / 2)
        if len(s) >= MIN_SCALES:
            out[b] = s
    return out


def box_counting_dimension(X, scales=None, bases=(2, 3)):
    """Least-squares box-counting exponent.

    With ``scales=None`` each base in ``bases`` proposes a ladder of its
    powers and the ladder with the smallest regression residual wins.
    """
    if scales is not None:
        scales = sorted(float(s) for s in scales)
        diam = X.diameter()
        usable = [s for s in scales if 4 * X.h * (1 - 1e-9) <= s <= diam / 2 * (1 + 1e-9)]
        if len(usable) < MIN_SCALES:
            raise DimensionError(f"need at least {MIN_SCALES} scales in [4h, diam/2]")
        counts = box_counts(X, usable)
        tau, resid = _fit(usable, counts)
        return DimensionEstimate(max(tau, 0.0), usable, counts, resid,
                                 method="grid" if X.coords is not None else "net")
    ladders = auto_scales(X, bases)
    if not ladders:
        raise DimensionError(f"fewer than {MIN_SCALES} usable scales")
    best = None
    for b, s in sorted(ladders.items()):
        counts = box_counts(X, s)
        tau, resid = _fit(s, counts)
        if best is None or resid < best.residual - 1e-12:
            best = DimensionEstimate(max(tau, 0.0), s, counts, resid, base=b,
                                     method="grid" if X.coords is not None else "net")
    return best


def pansu_bound(sigma, tau):
    """1 + sigma / (tau - sigma); warns when tau - sigma < 1."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if tau <= sigma:
        raise DimensionError("inconsistent estimates: tau must exceed sigma")
    if tau - sigma < 1:
        warnings.warn(f"tau - sigma = {tau - sigma:.4g} is below 1", stacklevel=2)
    return 1 + sigma / (tau - sigma)


@dataclass
class BoundFragment:
    sigma: float
    tau: float
    A: float
    bound: float | str
    certificates: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def certified(self):
        return self.bound != "uncertified"

    def to_dict(self):
        return {"sigma": self.sigma, "tau": self.tau, "A": self.A, "bound": self.bound,
                "certificates": dict(sorted(self.certificates.items())),
                "warnings": list(self.warnings)}


def bound_from_family(fam, X, tau=None, hit_report=None):
    """Assemble sigma, tau, A = 4^sigma and the bound; any failed certificate blocks it."""
    if tau is None:
        tau = box_counting_dimension(X).tau
    sigma = fam.sigma
    certs = {k: bool(v["ok"]) for k, v in fam.certificates.items()}
    if hit_report is not None:
        certs["hit_measure"] = bool(hit_report.ok)
    notes = []
    if fam.depth == 0:
        return BoundFragment(0.0, tau, 1.0, 1.0, certs, ["depth 0 family: vacuous bound"])
    if not all(certs.values()):
        return BoundFragment(sigma, tau, 4 ** sigma, "uncertified", certs,
                             ["failed: " + ",".join(k for k, v in sorted(certs.items()) if not v)])
    if tau <= sigma:
        return BoundFragment(sigma, tau, 4 ** sigma, "uncertified", certs,
                             ["inconsistent estimates: tau <= sigma"])
    if tau - sigma < 1:
        notes.append(f"tau - sigma = {tau - sigma:.4g} < 1")
    return BoundFragment(sigma, tau, 4 ** sigma, 1 + sigma / (tau - sigma), certs, notes)
