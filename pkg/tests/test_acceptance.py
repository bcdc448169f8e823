"""The ten acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary
(and echoed immediately) so a run of this file alone gives a scorecard.
"""

import itertools
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, bottom_edge
from confdim import pipeline
from confdim.arcs import Arc, check_follows, find_quasiarc, loop_erase, quasiarc_constant, straighten
from confdim.cantor import (UltrametricCantor, ball_measure, embedding_check, hit_audit,
                            natural_product_family, words)
from confdim.dimension import box_counting_dimension, pansu_bound
from confdim.metric import NeighborGraph, _threshold, hausdorff_distance
from confdim.spaces import SpaceSpec, generate
from confdim.splitter import CutPointError, topological_split
from confdim.verify import brute_hausdorff, brute_set_distance

LOG2_LOG3 = math.log(2) / math.log(3)


def record(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_cantor_interval_known_value():
    t0 = time.perf_counter()
    X = generate(SpaceSpec("cantor_product", level=6, grid=729))
    fam = natural_product_family(X, 6)
    hit = hit_audit(fam, 1000, rng=1, r_min=3.0 ** -5, r_max=0.5)
    tau = box_counting_dimension(X).tau
    bound = pansu_bound(fam.sigma, tau)
    elapsed = time.perf_counter() - t0
    ok = (abs(hit.exponent - LOG2_LOG3) <= 0.05 and abs(tau - (1 + LOG2_LOG3)) <= 0.05
          and abs(bound - 1.63) <= 0.1 and hit.ok and elapsed < 300)
    record(1, ok, f"exponent={hit.exponent:.4f} tau={tau:.4f} bound={bound:.4f} "
                  f"hit_violations={len(hit.violations)} time={elapsed:.1f}s")


def test_criterion_02_carpet_end_to_end(tmp_path):
    t0 = time.perf_counter()
    cfg = pipeline.Config(space="carpet", level=4, seed=0, out=str(tmp_path / "r.json"))
    code, text = pipeline.run("all", cfg)
    elapsed = time.perf_counter() - t0
    rep = pipeline.rpt.loads(text)
    certs = rep["certificates"]
    needed = ("family_separation", "family_follows", "family_embedding")
    bound = rep["bound"]
    ok = (code == 0 and isinstance(rep["L_annular"], float) and math.isfinite(rep["L_annular"])
          and rep["delta_star"] > 0 and rep["depth"] >= 2
          and all(certs.get(k) == "pass" for k in needed)
          and all(v == "pass" for v in certs.values())
          and bound != "uncertified" and float(bound) > 1 and elapsed < 600)
    record(2, ok, f"exit={code} L_annular={rep['L_annular']} delta*={rep['delta_star']:.4f} "
                  f"depth={rep['depth']} bound={bound} time={elapsed:.1f}s")


def test_criterion_03_embedding_inequalities(carpet_family):
    emb = embedding_check(carpet_family)
    record(3, emb.ok and emb.pairs == 6,
           f"pairs={emb.pairs} violations={len(emb.violations)} "
           f"min d/d_sigma={emb.worst_lower:.4f} max d_H/d_sigma={emb.worst_upper:.4f}")


def test_criterion_04_hit_measure_bound(carpet_family):
    hit = hit_audit(carpet_family, 1000, rng=4)
    record(4, hit.ok and hit.n_balls == 1000,
           f"balls={hit.n_balls} violations={len(hit.violations)} "
           f"max mu/bound={hit.max_ratio:.4f}")


def _zigzag(X, G, rng):
    m = int(rng.integers(4, 9))
    xs = np.sort(rng.uniform(0, 1, m))
    ys = np.where(np.arange(m) % 2, rng.uniform(0.7, 1, m), rng.uniform(0, 0.3, m))
    pts = [int(np.argmin(((X.coords - [x, y]) ** 2).sum(axis=1))) for x, y in zip(xs, ys)]
    pts = [p for k, p in enumerate(pts) if k == 0 or p != pts[k - 1]]
    seq = [pts[0]]
    for a, b in zip(pts, pts[1:]):
        path, _ = G.shortest_path(a, b)
        seq += list(path[1:])
    return Arc(X, loop_erase(seq), G.s)


def test_criterion_05_straightening_contract(carpet4):
    X, G = carpet4
    rng = np.random.default_rng(5)
    lam = 4.0
    failures = []
    for k in range(100):
        A = _zigzag(X, G, rng)
        eps = float(rng.uniform(0.1, 0.6))
        res = straighten(A, eps, lam, G)
        out = res.arc
        steps = [X.distance(u, v) for u, v in zip(out.vertices, out.vertices[1:])]
        d_min = min(steps, default=X.h)
        local = quasiarc_constant(out, res.alpha * eps)
        checks = {
            "endpoints": out.start == A.start and out.end == A.end,
            "follows": bool(check_follows(out, A, eps)),
            "local": local <= lam + 2 * X.h / d_min,
            "potential": all(b < a for a, b in zip(res.potentials, res.potentials[1:])),
        }
        if not all(checks.values()):
            failures.append((k, [n for n, v in checks.items() if not v]))
    record(5, not failures, f"arcs=100 failures={len(failures)} {failures[:3]}")


def test_criterion_06_unzip_contracts(carpet4):
    X, G = carpet4
    rng = np.random.default_rng(6)
    bad = []
    done = 0
    while done < 50:
        a, b = (int(v) for v in rng.choice(X.n, 2, replace=False))
        if X.distance(a, b) < 0.3:
            continue
        A = find_quasiarc(a, b, G)
        eps = float(rng.uniform(8 * X.h, 0.3))
        res = topological_split(A, eps, G, rng=rng)
        sep = brute_set_distance(X, res.J1.vertices, res.J2.vertices)
        disjoint = not set(res.J1.vertices.tolist()) & set(res.J2.vertices.tolist())
        if not (disjoint and sep > 0):
            bad.append(done)
        done += 1

    interval = generate(SpaceSpec("interval", grid=101))
    GI = NeighborGraph(interval, 2 * interval.h)
    cut_errors = 0
    trials = 0
    for lo, hi in [(0, 100), (10, 90), (30, 60), (0, 50), (45, 100)]:
        for eps in (0.05, 0.2):
            trials += 1
            try:
                topological_split(Arc(interval, np.arange(lo, hi + 1)), eps, GI)
            except CutPointError as exc:
                cut_errors += "cut point encountered" in str(exc)

    edge = Arc(X, bottom_edge(X), G.s)
    res = topological_split(edge, 0.4, G)
    edge_sep = brute_set_distance(X, res.J1.vertices, res.J2.vertices)
    floor = 1 / 9 - 2 * X.h
    ok = not bad and cut_errors == trials and edge_sep >= floor
    record(6, ok, f"carpet unzips=50 bad={len(bad)} interval cut errors={cut_errors}/{trials} "
                  f"bottom-edge separation={edge_sep:.4f} >= {floor:.4f}")


def test_criterion_07_hausdorff_oracle():
    rng = np.random.default_rng(7)
    spaces = [generate(SpaceSpec("carpet", 3)), generate(SpaceSpec("square", grid=44)),
              generate(SpaceSpec("cantor_product", level=5, grid=60)),
              generate(SpaceSpec("carpet", 3, metric="sup"))]
    mismatches = 0
    for k in range(50):
        X = spaces[k % len(spaces)]
        assert X.n <= 2000
        U = rng.choice(X.n, int(rng.integers(1, X.n // 2)), replace=False)
        V = rng.choice(X.n, int(rng.integers(1, X.n // 2)), replace=False)
        if hausdorff_distance(U, V, X) != brute_hausdorff(X, U, V):
            mismatches += 1
    record(7, mismatches == 0, f"pairs=50 mismatches={mismatches}")


def test_criterion_08_dimension_estimates():
    targets = [(SpaceSpec("third_cantor", 7), LOG2_LOG3, 0.03),
               (SpaceSpec("carpet", 5), math.log(8) / math.log(3), 0.05),
               (SpaceSpec("interval", grid=1025), 1.0, 0.03)]
    got = []
    ok = True
    for spec, want, tol in targets:
        tau = box_counting_dimension(generate(spec)).tau
        got.append(f"{spec.kind}={tau:.4f}")
        ok &= abs(tau - want) <= tol
    record(8, ok, " ".join(got))


def test_criterion_09_ultrametric_axioms():
    sigma = LOG2_LOG3
    depth = 8
    ws = words(depth)
    bits = np.array([[int(c) for c in w] for w in ws])
    diff = bits[:, None, :] != bits[None, :, :]
    first = np.where(diff.any(axis=2), diff.argmax(axis=2) + 1, 0)
    D = np.where(first > 0, np.exp(-(math.log(2) / sigma) * first), 0.0)
    # d(a, c) <= max(d(a, b), d(b, c)) for every triple
    tri = 0
    for b in range(len(ws)):
        tri += int(np.count_nonzero(D > np.maximum(D[:, b][:, None], D[b, :][None, :])))

    space = UltrametricCantor(sigma, depth)
    rng = np.random.default_rng(9)
    nu_bad = 0
    for _ in range(500):
        z = ws[int(rng.integers(len(ws)))]
        n = int(rng.integers(0, depth + 1))
        r = space.canonical_radius(n)
        mu = ball_measure(z, r, sigma, depth)
        if not (0.5 * r ** sigma * (1 - 1e-12) <= mu <= r ** sigma * (1 + 1e-12)):
            nu_bad += 1
    record(9, tri == 0 and nu_bad == 0,
           f"triples={len(ws) ** 3} ultrametric violations={tri} balls=500 nu violations={nu_bad}")


def test_criterion_10_quasiarc_neighbourhood(carpet4):
    X, G = carpet4
    rng = np.random.default_rng(10)
    violations = 0
    checked = 0
    for _ in range(200):
        a, b = (int(v) for v in rng.choice(X.n, 2, replace=False))
        A = find_quasiarc(a, b, G)
        a2 = int(rng.choice(X.ball(a, 0.1)))
        b2 = int(rng.choice(X.ball(b, 0.1)))
        if a2 == b2:
            b2 = b
        A2 = find_quasiarc(a2, b2, G)
        lam = max(quasiarc_constant(A), quasiarc_constant(A2))
        # perturbed nearest-point projection of A onto A'
        idx = X.distances(A.vertices, A2.vertices).argmin(axis=1)
        idx = np.clip(idx + rng.integers(-2, 3, size=len(idx)), 0, len(A2) - 1)
        F = A2.vertices[idx]
        C = float(np.abs(X.distances(A.vertices, A.vertices) - X.distances(F, F)).max())
        radius = (2 * C * lam + C) * lam + C + 2 * X.h
        pairs = list(itertools.combinations_with_replacement(range(len(A)), 2))
        if len(pairs) > 300:
            pairs = [pairs[t] for t in rng.choice(len(pairs), 300, replace=False)]
        for i, j in pairs:
            lo, hi = sorted((idx[i], idx[j]))
            reach = X.distances(F[i:j + 1], A2.vertices[lo:hi + 1]).min(axis=1).max()
            checked += 1
            if reach > _threshold(radius):
                violations += 1
    record(10, violations == 0, f"triples=200 pairs={checked} violations={violations}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
