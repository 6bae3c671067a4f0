"""
Render tests - SVG pictures of Hilbert balls.
"""

import math
import os
import re
import sys

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from convex import Ellipsoid, Polytope
from core import UnsupportedDimension
from projective import ProjectivePoint
from render import MARGIN, VIEWBOX, render_svg


def _polygons(svg: str, cls: str):
    return [np.array([[float(v) for v in pair.split(",")] for pair in points.split()])
            for points in re.findall(rf'<polygon class="{cls}"[^>]*?points="([^"]*)"', svg)]


def _skeleton(svg: str) -> str:
    """The document with polygon coordinates blanked and whitespace collapsed."""
    return " ".join(re.sub(r'points="[^"]*"', 'points=""', svg).split())


def _origin():
    return ProjectivePoint.from_affine([0.0, 0.0])


class TestRenderSvg:
    """Outline, balls and basepoint in viewbox coordinates."""

    def test_disk_ball_radius(self):
        """The r = 0.5 ball about the disk center is a circle of radius tanh 0.5."""
        svg = render_svg(Ellipsoid.unit_ball(2), _origin(), [0.5])
        (ring,) = _polygons(svg, "ball")
        half = VIEWBOX / 2
        scale = VIEWBOX * (1 - 2 * MARGIN) / 2
        chart = np.column_stack([(ring[:, 0] - half) / scale, (half - ring[:, 1]) / scale])
        np.testing.assert_allclose(np.linalg.norm(chart, axis=1), math.tanh(0.5), atol=1e-3)

    def test_square_outline(self):
        square = Polytope.from_vertices([[-1, -1], [1, -1], [1, 1], [-1, 1]])
        svg = render_svg(square, _origin(), [1.0], samples=32)
        (outline,) = _polygons(svg, "body")
        assert len(outline) == 4
        assert len(_polygons(svg, "ball")[0]) == 32
        assert 'data-radius="1.000"' in svg

    def test_ball_count(self):
        svg = render_svg(Ellipsoid.unit_ball(2), _origin(), [0.5, 1.0, 2.0], samples=16)
        assert len(_polygons(svg, "ball")) == 3
        assert len(_polygons(render_svg(Ellipsoid.unit_ball(2), _origin(), []), "ball")) == 0

    def test_basepoint_centered(self):
        svg = render_svg(Ellipsoid.unit_ball(2), _origin(), [0.5], samples=16)
        assert '<circle class="basepoint" cx="256.000" cy="256.000"' in svg

    def test_writes_file(self, tmp_path):
        path = tmp_path / "pictures" / "ball.svg"
        svg = render_svg(Ellipsoid.unit_ball(2), _origin(), [0.5], path=str(path), samples=16)
        assert path.read_text(encoding="utf-8") == svg
        assert svg.startswith("<?xml")

    def test_planar_only(self):
        with pytest.raises(UnsupportedDimension):
            render_svg(Ellipsoid.unit_ball(3), ProjectivePoint.from_affine([0.0, 0.0, 0.0]), [0.5])


class TestGoldenSvg:
    """The unit-disk picture against the checked-in rendering."""

    GOLDEN = os.path.join(os.path.dirname(__file__), "golden", "unit_disk_balls.svg")

    def test_unit_disk_matches_golden(self, tmp_path):
        path = tmp_path / "disk.svg"
        render_svg(Ellipsoid.unit_ball(2), _origin(), [0.5, 1.0, 2.0], path=str(path), samples=32)
        svg = path.read_text(encoding="utf-8")
        with open(self.GOLDEN, encoding="utf-8") as f:
            golden = f.read()
        assert _skeleton(svg) == _skeleton(golden)
        for cls in ("body", "ball"):
            rendered, expected = _polygons(svg, cls), _polygons(golden, cls)
            assert [len(p) for p in rendered] == [len(p) for p in expected]
            for ours, theirs in zip(rendered, expected):
                np.testing.assert_allclose(ours, theirs, atol=2e-3)
