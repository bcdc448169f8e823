"""Cantor families of quasi-arcs, the symbolic ultrametric and its measure."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial import cKDTree

from .arcs import Arc, achieved_alpha, check_follows, quasiarc_constant, straighten
from .metric import NeighborGraph, _threshold, directed_hausdorff, hausdorff_distance, set_distance
from .splitter import SplitError, scale_split

SEPARATION_RTOL = 1e-9


class ResolutionExhausted(RuntimeError):
    pass


# -- symbolic side -------------------------------------------------------------------

def _first_difference(a, b):
    if len(a) != len(b):
        raise ValueError("words must have equal length")
    for k, (x, y) in enumerate(zip(a, b), start=1):
        if x != y:
            return k
    return None


def _level_radius(n, sigma):
    # the one formula for level-n distances, so radii and distances compare bit for bit
    return math.exp(-(math.log(2) / sigma) * n)


def ultrametric(a, b, sigma):
    """exp(-(log 2 / sigma) n) with n the 1-based first index where a and b differ."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    n = _first_difference(a, b)
    if n is None:
        return 0.0
    return _level_radius(n, sigma)


def cantor_measure(prefix):
    """Measure of the cylinder of all sequences starting with ``prefix``."""
    return 2.0 ** -len(prefix)


def words(depth):
    return ["".join(w) for w in itertools.product("01", repeat=depth)]


def ball_measure(z, r, sigma, depth=None):
    """Measure of the open ball {w : d(z, w) < r}, enumerated over depth-``depth`` words.

    Each word carries weight 2**-depth; the word z itself is always inside.
    """
    depth = len(z) if depth is None else depth
    if len(z) != depth:
        raise ValueError("center word must have the enumeration depth")
    total = 0
    for w in words(depth):
        if w == z or ultrametric(z, w, sigma) < r:
            total += 1
    return total / 2 ** depth


def ball_measure_closed_form(z, r, sigma, depth):
    """Same quantity as :func:`ball_measure` in constant time."""
    if r <= 0:
        return 2.0 ** -depth
    t = -sigma * math.log2(r)
    k = max(0, math.floor(t + 1e-12))
    return 2.0 ** -min(k, depth)


@dataclass(frozen=True)
class UltrametricCantor:
    sigma: float
    depth: int

    def distance(self, a, b):
        return ultrametric(a, b, self.sigma)

    def words(self):
        return words(self.depth)

    def measure(self, prefix):
        return cantor_measure(prefix)

    def ball_measure(self, z, r):
        return ball_measure(z, r, self.sigma, self.depth)

    def canonical_radius(self, n):
        return _level_radius(n, self.sigma)


# -- families -------------------------------------------------------------------

@dataclass
class CantorFamily:
    """Arcs indexed by binary words, with the constants they were built under."""
    X: object
    arcs: dict
    beta: float
    depth: int
    lam: float
    unit: float = 1.0
    policy: str = "analytic"
    kappa: float = 0.125
    delta_star: float = 0.0
    alpha: float = 1.0
    separations: list = field(default_factory=list)
    slacks: list = field(default_factory=list)
    certificates: dict = field(default_factory=dict)
    log: list = field(default_factory=list)

    @property
    def sigma(self):
        if self.depth == 0:
            return 0.0
        return -math.log(2) / math.log(self.beta)

    def leaves(self):
        return [w for w in self.arcs if len(w) == self.depth]

    def level(self, n):
        return sorted(w for w in self.arcs if len(w) == n)

    def lam_prime(self):
        return max(quasiarc_constant(self.arcs[w]) for w in self.leaves())

    @property
    def certified(self):
        return bool(self.certificates) and all(c["ok"] for c in self.certificates.values())

    def to_dict(self):
        return {
            "policy": self.policy,
            "depth": self.depth,
            "beta": self.beta,
            "sigma": self.sigma,
            "lambda": self.lam,
            "kappa": self.kappa,
            "delta_star": self.delta_star,
            "unit": self.unit,
            "separations": list(self.separations),
            "certificates": {k: v["ok"] for k, v in sorted(self.certificates.items())},
            "arcs": {w: self.arcs[w].tolist() for w in sorted(self.arcs, key=lambda s: (len(s), s))},
        }


def analytic_beta(alpha, delta_star, lam):
    """alpha delta* / (32 lam), clamped to <= 1/32 and strictly below min(1/(4 + 2 lam), 1/10)."""
    beta = alpha * delta_star / (32 * lam)
    cap = min(1 / (4 + 2 * lam), 1 / 10) * (1 - 1e-12)
    return min(beta, 1 / 32, cap)


def max_depth(beta, h, unit=1.0, kappa=None):
    """Largest n with beta**n >= 8h (and kappa beta**(n-1) >= 8h for the last split)."""
    if not 0 < beta < 1:
        return 0
    n = 0
    while True:
        nxt = n + 1
        if beta ** nxt * unit < 8 * h:
            return n
        if kappa is not None and kappa * beta ** n * unit < 8 * h * (1 - 1e-9):
            return n
        n = nxt


def _split_level(G, arc, eps, st_eps, lam, trials, seed):
    if len(arc) < 2:
        raise SplitError("a single-point arc cannot be split further")
    res = scale_split(arc, eps, G, lam=max(lam, quasiarc_constant(arc, eps)), trials=trials,
                      rng=seed)
    kids = [res.J1, res.J2]
    notes = [res.route]
    if st_eps >= 4 * G.X.h:
        kids = [straighten(J, st_eps, lam, G).arc if len(J) > 2 else J for J in kids]
    else:
        notes.append("straightening below resolution")
    return kids, res.delta, notes


def build_family(G: NeighborGraph, seed_arc: Arc, depth=None, *, policy="analytic", beta=None,
                 kappa=None, lam_target=4.0, trials=2, rng=None, n_jobs=1):
    """Iterated split-and-straighten family of quasi-arcs.

    ``policy="analytic"`` derives beta from the measured constants and clamps
    it to the admissible range, splitting at beta**n / 8. ``policy="measured"``
    takes beta and the split factor ``kappa`` as inputs and splits at
    kappa beta**n; its constants are then justified only by the certificates
    computed in :func:`certify`. Straightening after each split runs at
    (delta* / 32) beta**n and is skipped below 4h. All lengths are in units
    of the seed's endpoint distance.
    """
    X = G.X
    rng = np.random.default_rng(rng)
    unit = X.distance(seed_arc.start, seed_arc.end)
    log = []
    root = seed_arc
    if 0.1 * unit >= 4 * X.h and len(root) > 2:
        root = straighten(root, 0.1 * unit, lam_target, G).arc
    lam = max(1.0, quasiarc_constant(root))
    alpha = achieved_alpha(root, 0.1 * unit, lam)

    if policy == "analytic":
        first = scale_split(root, unit / 8, G, lam=lam, trials=trials, rng=rng.integers(2**32))
        delta_star = first.delta
        beta_val = analytic_beta(alpha, delta_star, lam)
        kappa = 1 / 8
        log.append(f"analytic beta from alpha={alpha:.6g} delta*={delta_star:.6g} lam={lam:.6g}")
    elif policy == "measured":
        if beta is None or kappa is None:
            raise ValueError("measured policy needs beta and kappa")
        beta_val = float(beta)
        first = scale_split(root, kappa * unit, G, lam=lam, trials=trials,
                            rng=rng.integers(2**32))
        delta_star = first.delta
    else:
        raise ValueError(f"unknown beta policy {policy!r}")
    if not 0 < beta_val < 1:
        raise ValueError("beta must lie in (0, 1)")

    feasible = max_depth(beta_val, X.h, unit, kappa)
    if depth is None:
        depth = feasible
    elif depth > feasible:
        raise ResolutionExhausted(
            f"resolution exhausted: depth {depth} needs beta^n >= 8h but only {feasible} "
            f"levels fit (beta={beta_val:.4g}, h={X.h:.4g})")

    arcs = {"": root}
    slacks = []
    for n in range(depth):
        eps = kappa * beta_val ** n * unit
        st_eps = delta_star / 32 * beta_val ** n * unit
        slacks.append(eps + (st_eps if st_eps >= 4 * X.h else 0.0))
        parents = [w for w in sorted(arcs) if len(w) == n]
        seeds = rng.integers(2**32, size=len(parents))
        jobs = (delayed(_split_level)(G, arcs[w], eps, st_eps, lam_target, trials, int(s))
                for w, s in zip(parents, seeds))
        out = Parallel(n_jobs=n_jobs, prefer="threads")(jobs) if n_jobs != 1 else \
            [j[0](*j[1], **j[2]) for j in jobs]
        for w, (kids, d, notes) in zip(parents, out):
            arcs[w + "0"], arcs[w + "1"] = kids
            log.append(f"level {n} word {w or '-'}: delta={d:.6g} route={','.join(notes)}")
    lam_all = max(lam, max(quasiarc_constant(a) for a in arcs.values()))
    fam = CantorFamily(X=X, arcs=arcs, beta=beta_val, depth=depth, lam=lam_all, unit=unit,
                       policy=policy, kappa=kappa, delta_star=delta_star, alpha=alpha,
                       slacks=slacks, log=log)
    certify(fam)
    return fam


def natural_product_family(X, level, column_tol=1e-12):
    """The family {c} x [0, 1] on a Cantor-product net, words from ternary digits.

    Column c = sum 2 a_k 3**-k gets the word a_1 ... a_level.
    """
    xs = X.coords[:, 0]
    w = 3.0 ** -level
    cells = np.floor(xs / w + column_tol).astype(np.int64)
    arcs = {}
    for cell in np.unique(cells):
        digits, c = [], int(cell)
        for _ in range(level):
            digits.append(c % 3)
            c //= 3
        if any(d == 1 for d in digits):
            raise ValueError("column outside the Cantor set")
        word = "".join("1" if d == 2 else "0" for d in reversed(digits))
        col = np.flatnonzero(cells == cell)
        col = col[np.argsort(X.coords[col, 1], kind="stable")]
        arcs[word] = Arc(X, col)
    for n in range(level - 1, -1, -1):
        for wd in words(n):
            arcs[wd] = arcs[wd + "0"]
    fam = CantorFamily(X=X, arcs=arcs, beta=1 / 3, depth=level, lam=1.0, unit=1.0,
                       policy="natural", kappa=0.0)
    return fam


# -- certificates -----------------------------------------------------------------

def separation_table(fam: CantorFamily):
    """Minimum pairwise set distance among the arcs of each depth 1..depth."""
    X = fam.X
    out = []
    for n in range(1, fam.depth + 1):
        ws = fam.level(n)
        out.append(min(set_distance(fam.arcs[a].vertices, fam.arcs[b].vertices, X)
                       for a, b in itertools.combinations(ws, 2)))
    return out


@dataclass
class EmbeddingReport:
    pairs: int
    violations: list
    worst_lower: float
    worst_upper: float
    comparability: float

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        return {"pairs": self.pairs, "violations": len(self.violations),
                "worst_lower_ratio": self.worst_lower, "worst_upper_ratio": self.worst_upper,
                "hausdorff_over_min_distance": self.comparability}


def embedding_check(fam: CantorFamily, words_subset=None):
    """Check (1/2) d_sigma <= d <= d_H <= (2 lam / beta^2) d_sigma on all leaf pairs.

    Distances on the arc side are divided by the family unit. Ratios
    reported are d / d_sigma (lower) and d_H / d_sigma (upper).
    """
    X = fam.X
    leaves = sorted(words_subset or fam.leaves())
    sigma = fam.sigma
    C = 2 * fam.lam / fam.beta ** 2
    violations = []
    worst_lo, worst_hi, comp = math.inf, 0.0, 0.0
    for a, b in itertools.combinations(leaves, 2):
        ds = ultrametric(a, b, sigma)
        A, B = fam.arcs[a].vertices, fam.arcs[b].vertices
        d = set_distance(A, B, X) / fam.unit
        dH = hausdorff_distance(A, B, X) / fam.unit
        worst_lo = min(worst_lo, d / ds)
        worst_hi = max(worst_hi, dH / ds)
        comp = max(comp, dH / d if d > 0 else math.inf)
        if not (0.5 * ds <= d * (1 + SEPARATION_RTOL) and d <= dH and dH <= C * ds):
            violations.append({"a": a, "b": b, "d_sigma": ds, "d": d, "d_H": dH})
    if len(leaves) < 2:
        worst_lo = 0.0
    return EmbeddingReport(pairs=len(leaves) * (len(leaves) - 1) // 2, violations=violations,
                           worst_lower=worst_lo, worst_upper=worst_hi, comparability=comp)


def certify(fam: CantorFamily):
    """Recompute every certificate of a family and store them on it."""
    X, unit, beta = fam.X, fam.unit, fam.beta
    certs = {}
    seps = separation_table(fam) if fam.depth else []
    fam.separations = seps
    bad = [n + 1 for n, s in enumerate(seps)
           if s < beta ** (n + 1) * unit * (1 - SEPARATION_RTOL)]
    certs["separation"] = {"ok": not bad, "failed_levels": bad}

    # children follow parents at slack beta^n
    fail = []
    drift = []
    for w, arc in fam.arcs.items():
        if not w:
            continue
        parent = fam.arcs[w[:-1]]
        n = len(w) - 1
        if not check_follows(arc, parent, beta ** n * unit):
            fail.append(w)
        drift.append(hausdorff_distance(arc.vertices, parent.vertices, X) / (beta ** n * unit))
    certs["follows"] = {"ok": not fail, "failed_words": fail,
                        "max_drift_ratio": max(drift, default=0.0)}

    root_d = fam.arcs[""].diameter
    small = [w for w, a in fam.arcs.items() if a.diameter < 0.5 * root_d * (1 - 1e-12)]
    certs["diameter"] = {"ok": not small, "failed_words": small}

    lam = fam.lam
    cauchy = [w for w, a in fam.arcs.items() if w and
              hausdorff_distance(a.vertices, fam.arcs[w[:-1]].vertices, X)
              > _threshold(lam * beta ** (len(w) - 1) * unit)]
    certs["cauchy"] = {"ok": not cauchy, "failed_words": cauchy}

    # parent inside N(child, lam eps) whenever the child sits in N(parent, eps/4)
    premise, viol = 0, []
    for w, a in fam.arcs.items():
        if not w:
            continue
        J = fam.arcs[w[:-1]]
        eps = beta ** (len(w) - 1) * unit
        close_ends = (X.distance(a.start, J.start) <= _threshold(eps / 4) and
                      X.distance(a.end, J.end) <= _threshold(eps / 4))
        if close_ends and directed_hausdorff(a.vertices, J.vertices, X) <= _threshold(eps / 4):
            premise += 1
            if directed_hausdorff(J.vertices, a.vertices, X) > _threshold(lam * eps):
                viol.append(w)
    certs["parent_cover"] = {"ok": not viol, "premise_pairs": premise, "failed_words": viol}

    if fam.depth >= 1:
        emb = embedding_check(fam)
        certs["embedding"] = {"ok": emb.ok, **emb.to_dict()}
    if fam.policy == "analytic" and fam.depth:
        ok = all(s < 0.5 * beta ** n * unit for n, s in enumerate(fam.slacks))
        cap = beta <= 1 / 32 and beta < min(1 / (4 + 2 * fam.lam), 1 / 10)
        certs["beta_range"] = {"ok": bool(ok and cap)}
    fam.certificates = certs
    return certs


# -- hit measure ------------------------------------------------------------------

def leaf_distances(fam: CantorFamily, centers):
    """Distance from each center point (index) to each leaf arc: shape (leaves, centers)."""
    X = fam.X
    centers = np.asarray(centers, dtype=np.intp)
    leaves = sorted(fam.leaves())
    out = np.empty((len(leaves), len(centers)))
    for k, w in enumerate(leaves):
        v = fam.arcs[w].vertices
        if X.matrix is not None:
            out[k] = X.matrix[np.ix_(centers, v)].min(axis=1)
        else:
            out[k], _ = cKDTree(X.coords[v]).query(X.coords[centers], k=1, p=X._p)
    return out


def hit_measure(fam: CantorFamily, center, r):
    """mu of the leaves meeting the closed ball B(center, r); each leaf weighs 2**-depth."""
    d = leaf_distances(fam, [center])[:, 0]
    return float(np.count_nonzero(d <= _threshold(r)) / 2 ** fam.depth)


def hit_bound(fam: CantorFamily, r):
    """4^sigma r^sigma (radius in family units) plus the depth-truncation slack."""
    s = fam.sigma
    return 4 ** s * (r / fam.unit) ** s + 2.0 ** -fam.depth


@dataclass
class HitReport:
    n_balls: int
    violations: list
    exponent: float
    max_ratio: float
    sigma: float = 0.0

    @property
    def ok(self):
        return not self.violations

    @property
    def sigma_consistent(self):
        """Empirical exponent within 0.1 below sigma (reported, not a blocking certificate)."""
        return bool(self.exponent >= self.sigma - 0.1)

    def to_dict(self):
        return {"balls": self.n_balls, "violations": len(self.violations),
                "empirical_exponent": self.exponent, "max_measure_over_bound": self.max_ratio,
                "sigma_consistent": self.sigma_consistent}


def sample_balls(X, n, rng=None, r_min=None, r_max=None):
    rng = np.random.default_rng(rng)
    diam = X.diameter()
    r_min = 4 * X.h if r_min is None else r_min
    r_max = diam if r_max is None else r_max
    centers = rng.integers(X.n, size=n)
    radii = np.exp(rng.uniform(math.log(r_min), math.log(r_max), size=n))
    return centers, radii


def hit_exponent(mu, radii, bins=8):
    """Slope of log mean(mu) against log r over log-spaced radius bins.

    Averaging inside a bin keeps the zero-measure balls, which a per-ball
    log regression would have to drop (flattening the slope).
    """
    mu = np.asarray(mu, dtype=float)
    lr = np.log(np.asarray(radii, dtype=float))
    edges = np.linspace(lr.min(), lr.max(), bins + 1)
    k = np.clip(np.searchsorted(edges, lr, side="right") - 1, 0, bins - 1)
    xs, ys = [], []
    for b in range(bins):
        sel = k == b
        if sel.any() and mu[sel].mean() > 0:
            xs.append(lr[sel].mean())
            ys.append(math.log(mu[sel].mean()))
    if len(xs) < 2:
        return math.nan
    return float(np.polyfit(xs, ys, 1)[0])


def hit_audit(fam: CantorFamily, n_balls=1000, rng=None, r_min=None, r_max=None):
    """Hit measure of seeded random balls against 4^sigma r^sigma plus truncation slack."""
    X = fam.X
    centers, radii = sample_balls(X, n_balls, rng, r_min, r_max)
    D = leaf_distances(fam, centers)
    mu = np.count_nonzero(D <= _threshold(radii)[None, :], axis=0) / 2 ** fam.depth
    bound = np.array([hit_bound(fam, r) for r in radii])
    viol = [{"center": int(c), "r": float(r), "mu": float(m), "bound": float(b)}
            for c, r, m, b in zip(centers, radii, mu, bound) if m > b * (1 + 1e-12)]
    return HitReport(n_balls=n_balls, violations=viol, exponent=hit_exponent(mu, radii),
                     max_ratio=float(np.max(mu / bound)), sigma=fam.sigma)


class FamilySearchError(RuntimeError):
    def __init__(self, msg, attempts):
        super().__init__(msg)
        self.attempts = attempts


DEFAULT_KAPPAS = (0.3, 1 / 3, 0.25, 0.4, 0.5)
DEFAULT_BETA_STEPS = (1.0, 1.02, 1.05, 1.1, 1.2, 1.35, 1.5)


def search_family(G: NeighborGraph, seed_arc: Arc, depth=2, betas=None, kappas=DEFAULT_KAPPAS,
                  rng=0, **kwargs):
    """First (beta, kappa) pair, in a fixed order, whose family passes every certificate.

    Default betas start at the resolution floor (8h)^(1/depth), the
    smallest ratio that leaves ``depth`` levels above 8h, and grow from
    there; smaller beta means a smaller sigma and a more conservative bound.
    Every attempt uses the same seed so the search is reproducible.
    """
    from .splitter import CutPointError, SeedNotFound, SplitError
    X = G.X
    unit = X.distance(seed_arc.start, seed_arc.end)
    if depth < 1:
        raise ValueError("search needs depth >= 1")
    if betas is None:
        b0 = (8 * X.h / unit) ** (1 / depth) * (1 + 1e-6)
        betas = [b0 * f for f in DEFAULT_BETA_STEPS if b0 * f < 0.5]
    seed = int(np.random.default_rng(rng).integers(2**32))
    attempts = []
    for beta in betas:
        for kappa in kappas:
            tag = {"beta": float(beta), "kappa": float(kappa)}
            if kappa * beta ** (depth - 1) * unit < 8 * X.h * (1 - 1e-9):
                attempts.append({**tag, "result": "split slack below 8h"})
                continue
            try:
                fam = build_family(G, seed_arc, depth, policy="measured", beta=beta, kappa=kappa,
                                   rng=seed, **kwargs)
            except (ResolutionExhausted, CutPointError, SeedNotFound, SplitError) as exc:
                attempts.append({**tag, "result": f"{type(exc).__name__}: {exc}"})
                continue
            failed = sorted(k for k, v in fam.certificates.items() if not v["ok"])
            if not failed:
                attempts.append({**tag, "result": "certified"})
                fam.log.append(f"search accepted beta={beta:.6g} kappa={kappa:.6g} after "
                               f"{len(attempts)} attempts")
                return fam, attempts
            attempts.append({**tag, "result": "failed " + ",".join(failed)})
    raise FamilySearchError("no certified family in the search grid", attempts)
