"""Deterministic SVG rendering of scenes: observed tracks solid, ground
truth solid-light, predictions dashed, ego highlighted."""

from __future__ import annotations

import numpy as np

from .errors import UsageError
from .scene import Sample

__all__ = ["render_scene"]

_CATEGORY_COLORS = {
    "vehicle": "#1f77b4",
    "pedestrian": "#d62728",
    "bicyclist": "#2ca02c",
    "others": "#7f7f7f",
}

_EGO_COLOR = "#ff7f0e"


def _fmt(v: float) -> str:
    return format(float(v), ".3f")


def _polyline(points, color, width, dashed=False, opacity=1.0, cls="track"):
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    dash = ' stroke-dasharray="6 4"' if dashed else ""
    op = f' stroke-opacity="{_fmt(opacity)}"' if opacity != 1.0 else ""
    return (f'<polyline class="{cls}" points="{pts}" fill="none" '
            f'stroke="{color}" stroke-width="{_fmt(width)}"{dash}{op}/>')


def render_scene(sample: Sample, predictions=None, path=None) -> str:
    """Write (and return) an SVG drawing of one sample.

    One polyline per agent per track kind: observed history (solid), ground
    truth future (solid, faded), and predictions (dashed) when given. The
    ego's current position carries a circle marker. Output bytes depend only
    on the inputs.
    """
    coords = [sample.observed[sample.obs_mask]]
    coords.append(sample.future[sample.fut_mask])
    if predictions is not None:
        predictions = np.asarray(predictions, dtype=np.float64)
        if predictions.shape[0] != sample.n_agents:
            raise UsageError(
                f"predictions cover {predictions.shape[0]} agents, "
                f"sample has {sample.n_agents}"
            )
        coords.append(predictions.reshape(-1, 2))
    pts = np.concatenate([c.reshape(-1, 2) for c in coords], axis=0)
    lo = pts.min(axis=0) - 2.0
    hi = pts.max(axis=0) + 2.0
    span = np.maximum(hi - lo, 1e-6)

    # y flipped so +y points up in the image
    scale = 640.0 / span.max()
    width = span[0] * scale + 20
    height = span[1] * scale + 20

    def to_px(p):
        return ((p[0] - lo[0]) * scale + 10,
                height - ((p[1] - lo[1]) * scale + 10))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for i in range(sample.n_agents):
        color = _EGO_COLOR if i == Sample.EGO_INDEX else \
            _CATEGORY_COLORS.get(sample.categories[i], "#7f7f7f")
        observed = [to_px(p) for p, m in
                    zip(sample.observed[i], sample.obs_mask[i]) if m]
        if observed:
            parts.append(_polyline(observed, color, 2.0, cls="observed"))
        future = [to_px(p) for p, m in zip(sample.future[i], sample.fut_mask[i]) if m]
        if future:
            parts.append(_polyline(future, color, 1.5, opacity=0.45, cls="truth"))
        if predictions is not None:
            parts.append(_polyline([to_px(p) for p in predictions[i]],
                                   color, 1.5, dashed=True, cls="prediction"))
        if observed:
            cx, cy = observed[-1]
            radius = 5.0 if i == Sample.EGO_INDEX else 3.0
            parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
                         f'r="{_fmt(radius)}" fill="{color}"/>')
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg)
    return svg
