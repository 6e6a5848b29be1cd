"""Output files: deterministic JSON, CSV series and plain SVG line plots."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def clean(obj):
    """JSON-safe copy: numpy scalars and arrays become Python values, non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "_asdict"):
        return clean(obj._asdict())
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))


def write_csv(path: Path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


_COLORS = ("#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad")


def svg_plot(curves: dict, title: str = "", xlabel: str = "", width: int = 640, height: int = 400) -> str:
    """One polyline per named curve ``{name: (x, y)}``; non-finite points are dropped."""
    pad_l, pad_r, pad_t, pad_b = 70, 20, 30, 45
    pts = {}
    for name, (x, y) in curves.items():
        x, y = np.asarray(x, float), np.asarray(y, float)
        keep = np.isfinite(x) & np.isfinite(y)
        pts[name] = (x[keep], y[keep])
    xs = np.concatenate([p[0] for p in pts.values()] or [np.zeros(1)])
    ys = np.concatenate([p[1] for p in pts.values()] or [np.zeros(1)])
    if xs.size == 0:
        xs, ys = np.zeros(1), np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx = (width - pad_l - pad_r) / (x1 - x0)
    sy = (height - pad_t - pad_b) / (y1 - y0)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>',
           f'<rect x="{pad_l}" y="{pad_t}" width="{width - pad_l - pad_r}" '
           f'height="{height - pad_t - pad_b}" fill="none" stroke="#888"/>']
    for val, ypos in ((y1, pad_t), (y0, height - pad_b)):
        out.append(f'<text x="{pad_l - 5}" y="{ypos + 4}" text-anchor="end" font-size="10">{val:.4g}</text>')
    for val, xpos in ((x0, pad_l), (x1, width - pad_r)):
        out.append(f'<text x="{xpos}" y="{height - pad_b + 14}" text-anchor="middle" font-size="10">{val:.4g}</text>')
    if xlabel:
        out.append(f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="11">{_esc(xlabel)}</text>')
    for k, (name, (x, y)) in enumerate(pts.items()):
        color = _COLORS[k % len(_COLORS)]
        coords = " ".join(f"{pad_l + (a - x0) * sx:.2f},{height - pad_b - (b - y0) * sy:.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{width - pad_r - 5}" y="{pad_t + 14 + 14 * k}" text-anchor="end" '
                   f'font-size="11" fill="{color}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path: Path, curves: dict, **kwargs):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg_plot(curves, **kwargs))
