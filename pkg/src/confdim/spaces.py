"""Example fractal spaces and the versioned space file format."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, asdict

import numpy as np

from .metric import FiniteMetricSpace

MAGIC = "#confdim-space"
FORMAT_VERSION = 1

KINDS = ("carpet", "third_cantor", "cantor_product", "interval", "circle", "square", "file")


class SpaceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceSpec:
    kind: str
    level: int = 0
    grid: int = 2
    metric: str = "euclidean"
    path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if self.kind in ("cantor_product", "interval", "circle", "square") and self.grid < 2:
            raise ValueError("grid must be >= 2")
        if self.kind == "file" and not self.path:
            raise ValueError("file spaces need a path")

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in ("kind", "level", "grid", "metric", "path") if k in d})


def _half_diam(widths, metric):
    widths = np.asarray(widths, dtype=float)
    if metric == "sup":
        return float(widths.max()) / 2
    return float(np.sqrt(np.sum(widths ** 2))) / 2


def _cantor_digits(level):
    """Left-cell indices (base 3, digits 0/2) of the level-``level`` third-Cantor cells."""
    cells = [0]
    for _ in range(level):
        cells = [3 * c + d for c in cells for d in (0, 2)]
    return np.array(cells, dtype=np.int64)


def carpet_cells(level):
    """Integer (i, j) indices of the 8**level surviving carpet cells."""
    m = 3 ** level
    i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    keep = np.ones_like(i, dtype=bool)
    a, b = i.copy(), j.copy()
    for _ in range(level):
        keep &= ~((a % 3 == 1) & (b % 3 == 1))
        a //= 3
        b //= 3
    return np.column_stack([i[keep], j[keep]])


def generate(spec: SpaceSpec) -> FiniteMetricSpace:
    """Cell-center net of the named space, with h = half the cell diameter."""
    kind, n, metric = spec.kind, spec.level, spec.metric
    unit2 = [[0.0, 0.0], [1.0, 1.0]]
    if kind == "file":
        return load(spec.path)
    if kind == "carpet":
        w = 3.0 ** -n
        coords = (carpet_cells(n) + 0.5) * w
        return FiniteMetricSpace(coords, metric=metric, h=_half_diam([w, w], metric), bounds=unit2)
    if kind == "third_cantor":
        w = 3.0 ** -n
        coords = ((_cantor_digits(n) + 0.5) * w)[:, None]
        return FiniteMetricSpace(coords, metric=metric, h=w / 2, bounds=[[0.0], [1.0]])
    if kind == "cantor_product":
        w = 3.0 ** -n
        xs = (_cantor_digits(n) + 0.5) * w
        ys = np.linspace(0.0, 1.0, spec.grid)
        coords = np.array(list(itertools.product(xs, ys)))
        h = _half_diam([w, 1.0 / (spec.grid - 1)], metric)
        return FiniteMetricSpace(coords, metric=metric, h=h, bounds=unit2)
    if kind == "interval":
        coords = np.linspace(0.0, 1.0, spec.grid)[:, None]
        return FiniteMetricSpace(coords, metric=metric, h=0.5 / (spec.grid - 1),
                                 bounds=[[0.0], [1.0]])
    if kind == "square":
        g = np.linspace(0.0, 1.0, spec.grid)
        coords = np.array(list(itertools.product(g, g)))
        step = 1.0 / (spec.grid - 1)
        return FiniteMetricSpace(coords, metric=metric, h=_half_diam([step, step], metric),
                                 bounds=unit2)
    if kind == "circle":
        t = 2 * np.pi * np.arange(spec.grid) / spec.grid
        coords = 0.5 + 0.5 * np.column_stack([np.cos(t), np.sin(t)])
        X = FiniteMetricSpace(coords, metric=metric, bounds=unit2)
        X.h = X.distance(0, 1) / 2
        return X
    raise ValueError(f"unknown space kind {kind!r}")


def expected_count(spec: SpaceSpec) -> int:
    return {
        "carpet": lambda: 8 ** spec.level,
        "third_cantor": lambda: 2 ** spec.level,
        "cantor_product": lambda: 2 ** spec.level * spec.grid,
        "interval": lambda: spec.grid,
        "square": lambda: spec.grid ** 2,
        "circle": lambda: spec.grid,
    }[spec.kind]()


# -- persistence ------------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def _parse_id(tok):
    tok = tok.strip()
    try:
        return int(tok)
    except ValueError:
        return tok


def save(X: FiniteMetricSpace, path) -> None:
    lines = [f"{MAGIC} v{FORMAT_VERSION}"]
    if X.matrix is not None:
        lines.append(f"kind=matrix n={X.n} h={_fmt(X.h)}")
        lines.append("ids " + ",".join(str(i) for i in X.ids))
        lines.append(str(X.n))
        lines.extend(" ".join(_fmt(v) for v in row) for row in X.matrix)
    else:
        lo, hi = X.bounds
        bounds = ",".join(map(_fmt, lo)) + ";" + ",".join(map(_fmt, hi))
        lines.append(f"kind=points n={X.n} dim={X.dim} metric={X.metric} h={_fmt(X.h)} "
                     f"bounds={bounds}")
        for pid, row in zip(X.ids, X.coords):
            lines.append(",".join([str(pid)] + [_fmt(v) for v in row]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_raw(lines):
    # headerless input: either "n" then a matrix, or id,x,y[,z] rows
    first = lines[0].split()
    if len(first) == 1 and "," not in lines[0]:
        n = int(first[0])
        rows = [list(map(float, ln.split())) for ln in lines[1:1 + n]]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise SpaceFormatError("truncated distance matrix")
        return FiniteMetricSpace(matrix=rows)
    ids, coords = [], []
    for ln in lines:
        toks = ln.split(",")
        if len(toks) < 2:
            raise SpaceFormatError(f"malformed row: {ln!r}")
        ids.append(_parse_id(toks[0]))
        coords.append([float(t) for t in toks[1:]])
    if len({len(c) for c in coords}) != 1:
        raise SpaceFormatError("rows have inconsistent dimension")
    return FiniteMetricSpace(coords, ids=ids)


def load(path) -> FiniteMetricSpace:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise SpaceFormatError("empty space file")
    if not lines[0].startswith(MAGIC):
        try:
            return _load_raw(lines)
        except ValueError as exc:
            raise SpaceFormatError(str(exc)) from exc
    version = lines[0][len(MAGIC):].strip()
    if version != f"v{FORMAT_VERSION}":
        raise SpaceFormatError(f"format version mismatch: {version!r}")
    if len(lines) < 2:
        raise SpaceFormatError("missing header")
    meta = dict(tok.split("=", 1) for tok in lines[1].split())
    try:
        n = int(meta["n"])
        h = float(meta["h"])
        if meta["kind"] == "matrix":
            ids = [_parse_id(t) for t in lines[2][len("ids "):].split(",")]
            if int(lines[3]) != n:
                raise SpaceFormatError("matrix header disagrees with metadata")
            rows = [[float(v) for v in ln.split()] for ln in lines[4:]]
            if len(rows) != n or any(len(r) != n for r in rows):
                raise SpaceFormatError("truncated distance matrix")
            return FiniteMetricSpace(matrix=rows, h=h, ids=ids)
        dim = int(meta["dim"])
        lo, hi = meta["bounds"].split(";")
        bounds = [[float(v) for v in lo.split(",")], [float(v) for v in hi.split(",")]]
        body = lines[2:]
        if len(body) != n:
            raise SpaceFormatError(f"expected {n} rows, found {len(body)}")
        ids, coords = [], []
        for ln in body:
            toks = ln.split(",")
            if len(toks) != dim + 1:
                raise SpaceFormatError(f"malformed row: {ln!r}")
            ids.append(_parse_id(toks[0]))
            coords.append([float(t) for t in toks[1:]])
        return FiniteMetricSpace(coords, metric=meta["metric"], h=h, ids=ids, bounds=bounds)
    except (KeyError, IndexError, ValueError) as exc:
        if isinstance(exc, SpaceFormatError):
            raise
        raise SpaceFormatError(f"malformed space file: {exc}") from exc


def normalize(X: FiniteMetricSpace, scale: float) -> FiniteMetricSpace:
    """Rescale all distances by ``scale`` (h and bounds follow)."""
    if X.matrix is not None:
        return FiniteMetricSpace(matrix=X.matrix * scale, h=X.h * scale, ids=X.ids)
    return FiniteMetricSpace(X.coords * scale, metric=X.metric, h=X.h * scale, ids=X.ids,
                             bounds=None if X.bounds is None else X.bounds * scale)
