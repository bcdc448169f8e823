"""Minimal SVG rendering of planar nets with arc overlays."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#17becf")


class SVGUnsupported(ValueError):
    pass


def _frame(X, size, pad):
    if X.coords is None or X.dim > 2:
        raise SVGUnsupported("SVG output needs a coordinate space of dimension <= 2")
    P = X.coords if X.dim == 2 else np.column_stack([X.coords[:, 0], np.zeros(X.n)])
    lo = P.min(axis=0)
    span = max(float(np.max(P.max(axis=0) - lo)), 1e-12)
    scale = (size - 2 * pad) / span

    def tr(pts):
        q = (pts - lo) * scale
        return np.column_stack([pad + q[:, 0], size - pad - q[:, 1]])

    return P, tr


def render(X, arcs=None, title="", size=600, pad=20):
    """SVG text for the points of ``X`` and optional ``arcs`` ({label: Arc or vertex list}).

    Arcs are coloured by the first bit of their label when labels are
    binary words, otherwise by position.
    """
    P, tr = _frame(X, size, pad)
    pts = tr(P)
    r = max(0.6, min(3.0, 0.35 * (size - 2 * pad) / max(np.sqrt(X.n), 1)))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f"<title>{escape(title)}</title>",
           '<rect width="100%" height="100%" fill="white"/>',
           '<g fill="#bbbbbb">']
    out.extend(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}"/>' for x, y in pts)
    out.append("</g>")
    for k, (label, arc) in enumerate(sorted((arcs or {}).items())):
        verts = np.asarray(getattr(arc, "vertices", arc), dtype=np.intp)
        label = str(label)
        if label and set(label) <= {"0", "1"}:
            colour = PALETTE[(int(label[0]) + 2 * (len(label) - 1)) % len(PALETTE)]
        else:
            colour = PALETTE[k % len(PALETTE)]
        q = tr(P[verts])
        d = " ".join(f"{x:.2f},{y:.2f}" for x, y in q)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" '
                   f'points="{d}"><title>{escape(label)}</title></polyline>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(path, X, arcs=None, title=""):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render(X, arcs, title))
