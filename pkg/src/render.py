"""
Render module - SVG pictures of a planar body with Hilbert balls about a basepoint.
"""
import logging
import os
from typing import List, Optional, Sequence

import numpy as np
from jinja2 import Environment, FileSystemLoader, select_autoescape

from convex import ConvexBody
from core import TEMPLATES_DIR, UnsupportedDimension
from hilbert import ball_boundary_samples
from projective import ProjectivePoint, chart_coords

logger = logging.getLogger("hilbertlab.render")

VIEWBOX = 512
MARGIN = 0.05
BALL_SAMPLES = 256

templates = Environment(
    loader=FileSystemLoader(TEMPLATES_DIR),
    autoescape=select_autoescape(["svg", "xml", "j2"]),
    keep_trailing_newline=True,
    trim_blocks=True,
    lstrip_blocks=True,
)


class _Viewport:
    """Uniform scaling of a chart box into the viewbox, y axis flipped."""

    def __init__(self, outline: np.ndarray):
        low, high = outline.min(axis=0), outline.max(axis=0)
        usable = VIEWBOX * (1 - 2 * MARGIN)
        self.scale = usable / float(np.max(high - low))
        self.offset = VIEWBOX * MARGIN + (usable - self.scale * (high - low)) / 2 - self.scale * low

    def __call__(self, w: np.ndarray) -> np.ndarray:
        p = self.scale * np.atleast_2d(w) + self.offset
        p[:, 1] = VIEWBOX - p[:, 1]
        return p


def _points(p: np.ndarray) -> str:
    return " ".join("%.3f,%.3f" % (x, y) for x, y in p)


def render_svg(body: ConvexBody, basepoint: ProjectivePoint, radii: Sequence[float],
               path: Optional[str] = None, samples: int = BALL_SAMPLES) -> str:
    """Body outline, basepoint and Hilbert spheres of the given radii, in the storage chart.

    Raises:
        UnsupportedDimension: the body is not planar.
    """
    if body.dim != 2:
        raise UnsupportedDimension(f"rendering needs n = 2, got n = {body.dim}")
    outline = body.boundary_outline()
    view = _Viewport(outline)
    balls: List[dict] = []
    for r in radii:
        ring = np.array([chart_coords(body.chart, p) for p in ball_boundary_samples(body, basepoint, r, samples)])
        balls.append({"radius": "%.3f" % r, "points": _points(view(ring))})
    center = view(chart_coords(body.chart, basepoint))[0]
    svg = templates.get_template("hilbert_ball.svg.j2").render(
        size=VIEWBOX,
        title=f"{body.kind} with {len(balls)} Hilbert balls",
        outline=_points(view(outline)),
        balls=balls,
        center=["%.3f" % center[0], "%.3f" % center[1]],
    )
    if path:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(svg)
        logger.info(f"SVG written to {path}")
    return svg
