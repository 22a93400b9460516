"""Deterministic SVG scatter plots of section data."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

# view axis -> (horizontal column, vertical column, vertical sign)
PROJECTIONS = {
    "y": (0, 2, -1.0),  # seen from below: x to the right, z up
    "z": (0, 1, -1.0),  # seen along z: x to the right, y up
    "x": (2, 1, -1.0),  # seen along x: z to the right, y up
}


def _rows(records):
    for rec in records:
        if hasattr(rec, "position"):
            gid = getattr(rec, "seed_id", 0)
            x, y, z = rec.position
        else:
            gid, x, y, z = rec
        yield int(gid), float(x), float(y), float(z)


def emit_svg(records, projection: str = "y", size: int = 600, radius: float = 1.2,
             title: str | None = None) -> str:
    """Orthographic scatter of points inside the unit disk of the chosen view.

    Parameters
    ----------
    records : iterable
        Objects with ``position`` and ``seed_id`` attributes, or tuples
        ``(group, x, y, z)``. Each group gets its own colour.
    projection : {"y", "z", "x"}
        Axis the viewer looks along; ``"y"`` is the view from below.

    Raises
    ------
    ValueError
        On an empty record set or an unknown projection.
    """
    if projection not in PROJECTIONS:
        raise ValueError(f"projection must be one of {sorted(PROJECTIONS)}")
    rows = list(_rows(records))
    if not rows:
        raise ValueError("no records to plot")
    ih, iv, sv = PROJECTIONS[projection]
    data = np.array([r[1:] for r in rows])
    groups = np.array([r[0] for r in rows])
    half = size / 2.0
    scale = half / radius
    px = half + scale * data[:, ih]
    py = half + sv * scale * data[:, iv]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<circle cx="{half:.3f}" cy="{half:.3f}" r="{scale:.3f}" fill="none" stroke="black" stroke-width="1"/>']
    if title:
        out.append(f'<text x="8" y="18" font-family="sans-serif" font-size="14">{escape(title)}</text>')
    for g in sorted(set(groups.tolist())):
        colour = PALETTE[g % len(PALETTE)]
        out.append(f'<g fill="{colour}" data-group="{g}">')
        for i in np.nonzero(groups == g)[0]:
            out.append(f'<circle cx="{px[i]:.3f}" cy="{py[i]:.3f}" r="1.2"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
