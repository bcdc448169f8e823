"""End-to-end runs behind the command-line interface."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from . import report as rpt
from . import svg
from .arcs import Arc, check_follows, find_quasiarc, quasiarc_constant, straighten
from .cantor import (FamilySearchError, ResolutionExhausted, build_family, hit_audit,
                     search_family)
from .connectivity import annular_constant, least_linear_constant
from .dimension import DimensionError, bound_from_family, box_counting_dimension
from .metric import NeighborGraph, doubling_constant
from .spaces import SpaceSpec, generate
from .splitter import CutPointError, SeedNotFound, SplitError, topological_split, verify_split

CONFIG_ENV = "CONFDIM_CONFIG"
DIMENSION_NOTE = ("tau is a box-counting estimate standing in for packing dimension; "
                  "for non-self-similar inputs it may overestimate, which only weakens the bound")
DEFAULT_GRID = {"interval": 129, "square": 33, "circle": 128, "cantor_product": 729}
COMMANDS = ("generate", "analyze", "straighten", "unzip", "family", "bound", "all")


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    space: str = "carpet"
    level: int = 4
    grid: int | None = None
    metric: str = "euclidean"
    input: str | None = None
    seed: int = 0
    depth: int | None = None
    samples: int = 64
    doubling_samples: int = 32
    workers: int = 1
    out: str | None = None
    svg: str | None = None
    beta_policy: str = "measured"
    lam_target: float = 4.0
    trials: int = 2
    hit_balls: int = 1000
    eps: float | None = None
    endpoints: list | None = None
    timings: bool = False

    def spec(self):
        grid = self.grid if self.grid is not None else DEFAULT_GRID.get(self.space, 2)
        return SpaceSpec(kind=self.space, level=self.level, grid=grid, metric=self.metric,
                         path=self.input)

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)


def load_config(path=None, overrides=None):
    """Defaults, then the config file (explicit path or $CONFDIM_CONFIG), then overrides."""
    data = {}
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        cfg = Config.from_mapping(data)
        cfg.spec()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.beta_policy not in ("measured", "analytic"):
        raise ConfigError(f"unknown beta policy {cfg.beta_policy!r}")
    return cfg


def default_endpoints(X):
    """Bottom-left and bottom-right extreme points (line ends in 1D, a diameter pair otherwise)."""
    if X.coords is None:
        D = X.matrix
        i, j = np.unravel_index(int(np.argmax(D)), D.shape)
        return int(i), int(j)
    c = X.coords
    if X.dim == 1:
        return int(np.argmin(c[:, 0])), int(np.argmax(c[:, 0]))
    return int(np.argmin(c[:, 0] + c[:, 1])), int(np.argmax(c[:, 0] - c[:, 1]))


class Run:
    """State shared by the stages of one command."""

    def __init__(self, cfg: Config, command: str):
        self.cfg = cfg
        self.command = command
        self.rng = np.random.default_rng(cfg.seed)
        self.X = generate(cfg.spec())
        self.G = NeighborGraph(self.X, 2 * self.X.h)
        self.report = rpt.new_report(command, cfg.seed, cfg.spec().to_dict(), __version__)
        self.report.update(n=self.X.n, h=self.X.h, beta_policy=cfg.beta_policy)
        self.report["certification"] = {}
        self.report["notes"] = [DIMENSION_NOTE]
        self.timings = {}
        self.arcs = {}
        self.failed = False

    def substream(self):
        return int(self.rng.integers(2**32))

    def stage(self, name, fn):
        t = time.perf_counter()
        try:
            return fn()
        finally:
            self.timings[name] = round(time.perf_counter() - t, 3)

    def fail(self, message):
        self.failed = True
        self.report["status"] = "certification failure"
        self.report["messages"].append(message)

    def cert(self, name, ok):
        self.report["certificates"][name] = "pass" if ok else "fail"
        if not ok:
            self.failed = True
            self.report["status"] = "certification failure"

    def endpoints(self):
        if self.cfg.endpoints:
            a, b = (int(v) for v in self.cfg.endpoints)
            return a, b
        return default_endpoints(self.X)

    # -- stages --------------------------------------------------------------

    def analyze(self):
        X, cfg = self.X, self.cfg
        conn = self.stage("connectivity", lambda: annular_constant(
            X, cfg.samples, self.substream(), self.G, n_jobs=cfg.workers))
        N = self.stage("doubling", lambda: doubling_constant(
            X, cfg.doubling_samples, self.substream()))
        try:
            dim = self.stage("dimension", lambda: box_counting_dimension(X))
            tau = dim.tau
            self.report["dimension"] = dim.to_dict()
        except DimensionError as exc:
            tau = None
            self.report["messages"].append(f"dimension: {exc}")
        self.report.update(N=N, L_linear=conn.L_linear, L_annular=conn.L_annular, tau=tau)
        self.report["connectivity"] = conn.to_dict()
        c = self.report["certification"]
        c.update(N="sampled upper bound", L_linear="sampled", L_annular="sampled",
                 tau="box-counting estimate")
        return conn

    def straighten(self):
        X, cfg = self.X, self.cfg
        a, b = self.endpoints()
        _, path = least_linear_constant(a, b, self.G)
        if path is None:
            self.fail("endpoints are disconnected")
            return None
        A = Arc(X, path, self.G.s)
        eps = cfg.eps or max(4 * X.h, A.diameter / 4)
        res = self.stage("straighten", lambda: straighten(A, eps, cfg.lam_target, self.G))
        out = res.arc
        d_min = min((X.distance(u, v) for u, v in zip(out.vertices, out.vertices[1:])),
                    default=X.h)
        local = quasiarc_constant(out, res.alpha * eps)
        ok_ends = out.start == a and out.end == b
        ok_follow = bool(check_follows(out, A, eps))
        ok_local = local <= cfg.lam_target + 2 * X.h / d_min
        ok_potential = all(p1 < p0 for p0, p1 in zip(res.potentials, res.potentials[1:]))
        self.report["straighten"] = {
            "eps": eps, "lam_target": cfg.lam_target, "alpha": res.alpha,
            "local_constant": local, "iterations": res.iterations,
            "input": A.tolist(), "output": out.tolist(),
            "potential_start": res.potentials[0], "potential_end": res.potentials[-1],
        }
        self.cert("straighten_endpoints", ok_ends)
        self.cert("straighten_follows", ok_follow)
        self.cert("straighten_local_constant", ok_local)
        self.cert("straighten_potential", ok_potential)
        self.arcs["straightened"] = out
        return res

    def unzip(self):
        X, cfg = self.X, self.cfg
        a, b = self.endpoints()
        A = self.stage("quasiarc", lambda: find_quasiarc(a, b, self.G, cfg.lam_target))
        eps = cfg.eps or max(8 * X.h, A.diameter / 4)
        try:
            res = self.stage("unzip", lambda: topological_split(
                A, eps, self.G, rng=self.substream()))
        except CutPointError as exc:
            self.report["unzip"] = {"eps": eps, "error": "cut point encountered",
                                    "vertex": exc.vertex}
            self.fail("cut point encountered")
            return None
        except (SeedNotFound, SplitError) as exc:
            self.report["unzip"] = {"eps": eps, "error": str(exc)}
            self.fail(str(exc))
            return None
        self.report["unzip"] = res.to_dict()
        self.cert("unzip", not verify_split(res, A))
        self.arcs["J1"], self.arcs["J2"] = res.J1, res.J2
        return res

    def family(self):
        X, cfg = self.X, self.cfg
        a, b = self.endpoints()
        seed_arc = self.stage("quasiarc", lambda: find_quasiarc(a, b, self.G, cfg.lam_target))
        sub = self.substream()
        try:
            if cfg.beta_policy == "analytic":
                fam = self.stage("family", lambda: build_family(
                    self.G, seed_arc, cfg.depth, policy="analytic", lam_target=cfg.lam_target,
                    trials=cfg.trials, rng=sub, n_jobs=cfg.workers))
                attempts = []
            else:
                fam, attempts = self.stage("family", lambda: search_family(
                    self.G, seed_arc, cfg.depth or 2, rng=sub, lam_target=cfg.lam_target,
                    trials=cfg.trials, n_jobs=cfg.workers))
        except (ResolutionExhausted, FamilySearchError, CutPointError, SeedNotFound,
                SplitError) as exc:
            self.report["family"] = {"error": str(exc),
                                     "attempts": getattr(exc, "attempts", [])}
            msg = "resolution exhausted" if isinstance(exc, ResolutionExhausted) else str(exc)
            self.fail(f"family: {msg}")
            return None
        body = fam.to_dict()
        body["attempts"] = attempts
        body["log"] = list(fam.log)
        body["certificate_details"] = fam.certificates
        self.report["family"] = body
        self.report.update(**{"lambda": fam.lam}, delta_star=fam.delta_star, beta=fam.beta,
                           sigma=fam.sigma, depth=fam.depth)
        c = self.report["certification"]
        c.update(**{"lambda": "measured on the family"}, delta_star="measured",
                 beta="certified" if fam.certified else "uncertified",
                 sigma="certified" if fam.certified else "uncertified",
                 depth="built")
        for name, v in sorted(fam.certificates.items()):
            self.cert(f"family_{name}", v["ok"])
        for w, arc in fam.arcs.items():
            if len(w) == fam.depth:
                self.arcs[w] = arc
        return fam

    def bound(self, conn=None):
        X, cfg = self.X, self.cfg
        if conn is None:
            conn = self.stage("connectivity", lambda: annular_constant(
                X, cfg.samples, self.substream(), self.G, n_jobs=cfg.workers))
            self.report.update(L_linear=conn.L_linear, L_annular=conn.L_annular)
            self.report["connectivity"] = conn.to_dict()
        if not conn.annular_ok:
            self.report["bound"] = "uncertified"
            self.report["certification"]["bound"] = "uncertified"
            self.fail("annular connectivity fail")
            return None
        self.cert("annular_connectivity", True)
        fam = self.family()
        if fam is None:
            self.report["bound"] = "uncertified"
            self.report["certification"]["bound"] = "uncertified"
            return None
        hit = self.stage("hit_measure", lambda: hit_audit(fam, cfg.hit_balls, self.substream()))
        self.report["hit_measure"] = hit.to_dict()
        self.cert("hit_measure", hit.ok)
        try:
            tau = self.report.get("tau") or box_counting_dimension(X).tau
        except DimensionError as exc:
            self.fail(f"dimension: {exc}")
            self.report["bound"] = "uncertified"
            return None
        frag = bound_from_family(fam, X, tau=tau, hit_report=hit)
        self.report.update(tau=tau, A=frag.A, bound=frag.bound)
        self.report["bound_details"] = frag.to_dict()
        self.report["certification"]["bound"] = "certified" if frag.certified else "uncertified"
        if not frag.certified:
            self.fail("bound uncertified")
        return frag

    def finish(self):
        if self.cfg.timings:
            self.report["timings"] = dict(sorted(self.timings.items()))
        text = rpt.dumps(self.report)
        if self.cfg.out:
            with open(self.cfg.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        if self.cfg.svg:
            svg.write(self.cfg.svg, self.X, self.arcs, title=f"{self.command} {self.cfg.space}")
        return text


def run(command, cfg: Config):
    """Execute one command; returns (exit_code, report_text or None)."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if command == "generate":
        from .spaces import save
        if not cfg.out:
            raise ConfigError("generate needs --out")
        X = generate(cfg.spec())
        save(X, cfg.out)
        if cfg.svg:
            svg.write(cfg.svg, X, title=cfg.space)
        return 0, None
    r = Run(cfg, command)
    if command == "analyze":
        r.analyze()
    elif command == "straighten":
        r.straighten()
    elif command == "unzip":
        r.unzip()
    elif command == "family":
        r.family()
    elif command == "bound":
        r.bound()
    elif command == "all":
        conn = r.analyze()
        r.straighten()
        r.unzip()
        r.bound(conn)
    text = r.finish()
    return (1 if r.failed else 0), text
