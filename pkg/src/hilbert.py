"""
Hilbert module - the Hilbert distance of a properly convex body, displacement
of automorphisms, and sampling of metric-ball boundaries.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from convex import ConvexBody, Location, contains, is_automorphism
from core import DEFAULT_SEED, DegenerateConfiguration, NotAnAutomorphism, PointOutsideBody
from projective import ProjectiveMap, ProjectivePoint, apply_map, chart_coords, embed

logger = logging.getLogger("hilbertlab.hilbert")

BISECTION_STEPS = 40


@dataclass(frozen=True)
class HilbertDistanceValue:
    """A Hilbert distance with the chord endpoints it was computed from.

    ``a`` and ``b`` are None when the two points coincide.
    """
    value: float
    a: Optional[ProjectivePoint] = None
    b: Optional[ProjectivePoint] = None

    def __float__(self) -> float:
        return self.value


def chord_distance(t_b: float, t_a: float, s: float = 1.0) -> float:
    """Hilbert distance between chord parameters 0 and s, boundary at t_b < 0 < s < t_a."""
    return 0.5 * (math.log(t_a) + math.log(s - t_b) - math.log(t_a - s) - math.log(-t_b))


def _interior_coords(body: ConvexBody, p: ProjectivePoint) -> np.ndarray:
    if contains(body, p) is not Location.INTERIOR:
        raise PointOutsideBody(f"{p!r} is not interior to the body")
    return chart_coords(body.chart, p)


def distance(body: ConvexBody, x: ProjectivePoint, y: ProjectivePoint) -> HilbertDistanceValue:
    """Half the log of the cross-ratio [a:b:x:y] along the chord through x and y.

    Computed in the body's storage chart, where the body is bounded and both
    chord endpoints are finite.
    """
    wx = _interior_coords(body, x)
    wy = _interior_coords(body, y)
    if x == y:
        return HilbertDistanceValue(0.0)
    d = wy - wx
    t_b, t_a = body.chord_parameters(wx, d)
    value = chord_distance(t_b, t_a)
    return HilbertDistanceValue(max(value, 0.0), embed(body.chart, wx + t_a * d), embed(body.chart, wx + t_b * d))


def displacement(body: ConvexBody, g: ProjectiveMap, x: ProjectivePoint) -> float:
    """d(x, g.x) for an automorphism g."""
    if not is_automorphism(body, g):
        raise NotAnAutomorphism(f"{g.to_list()} does not preserve the body")
    return distance(body, x, apply_map(g, x)).value


def _directions(n: int, k: int, seed: int) -> np.ndarray:
    if n == 2:
        angles = 2 * np.pi * np.arange(k) / k
        return np.column_stack([np.cos(angles), np.sin(angles)])
    normals = np.random.default_rng(seed).standard_normal((k, n))
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def _radius_by_bisection(t_b: float, t_a: float, r: float) -> float:
    """Parameter s in (0, t_a) at distance r, bisecting on the gap to the boundary."""
    lo, hi = 0.0, 2 * r + 1.0
    for _ in range(BISECTION_STEPS):
        mid = (lo + hi) / 2
        s = t_a * -math.expm1(-mid)
        if chord_distance(t_b, t_a, s) < r:
            lo = mid
        else:
            hi = mid
    return t_a * -math.expm1(-(lo + hi) / 2)


def _radius_closed_form(t_b: float, t_a: float, r: float) -> float:
    """Invert the chord distance: solve (1/2) ln(t_a (s - t_b) / ((t_a - s)(-t_b))) = r."""
    grow = math.expm1(2 * r)
    return t_a * -t_b * grow / (t_a - t_b * (grow + 1.0))


def ball_boundary_samples(body: ConvexBody, center: ProjectivePoint, r: float, k: int,
                          seed: int = DEFAULT_SEED, method: str = "closed_form") -> List[ProjectivePoint]:
    """k points of the Hilbert sphere of radius r about center, one per chart direction.

    Directions are equally spaced angles for n = 2 and seeded unit normals
    otherwise; ``method`` is "closed_form" or "bisection".
    """
    if r <= 0 or k < 3:
        raise DegenerateConfiguration("ball sampling needs r > 0 and k >= 3")
    c = _interior_coords(body, center)
    solve = _radius_closed_form if method == "closed_form" else _radius_by_bisection
    samples = []
    for d in _directions(body.dim, k, seed):
        t_b, t_a = body.chord_parameters(c, d)
        samples.append(embed(body.chart, c + solve(t_b, t_a, r) * d))
    logger.debug(f"sampled {k} points of the radius {r} sphere ({method})")
    return samples


def closest_boundary_distance(body: ConvexBody, p: ProjectivePoint) -> float:
    """Euclidean distance in the storage chart from p to the boundary (0 outside)."""
    w = body.storage_coords(p)
    if w is None:
        return 0.0
    return max(0.0, -body.defect(w))
