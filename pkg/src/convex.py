"""
Convex module - properly convex open sets of projective space.

Two concrete bodies: ``Polytope`` (built from half-spaces or vertices in a
chart) and ``Ellipsoid`` (a quadratic form of signature (n, 1)). Every body
keeps a storage chart in which it is bounded; membership, chords and
rendering work in that chart.
"""
import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from itertools import permutations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from core import (
    DegenerateBody,
    DegenerateConfiguration,
    InvalidMatrix,
    NotAnAutomorphism,
    PointAtInfinity,
    PointOutsideBody,
    SchemaError,
    UnboundedInChart,
    UnsupportedDimension,
    UnsupportedFamily,
)
from projective import (
    AffineChart,
    ProjectiveMap,
    ProjectivePoint,
    apply_map,
    chart_coords,
    det_normalize,
    embed,
)

logger = logging.getLogger("hilbertlab.convex")

BOUNDARY_TOL = 1e-10
AUTOMORPHISM_TOL = 1e-9
BOUNDED_MARGIN = 1e-12
RANK_TOL = 1e-12
MAX_HULL_DIM = 4


class Location(str, Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


def _normalize_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return m / np.where(norms > 0, norms, 1.0)


def chart_halfspaces(facets: np.ndarray, chart: AffineChart) -> Tuple[np.ndarray, np.ndarray]:
    """Rewrite homogeneous facets f.p <= 0 as a.w + c <= 0 in chart coordinates.

    Rows are scaled so that |a| = 1; rows with a = 0 (the chart's own
    hyperplane at infinity) are dropped.
    """
    g = facets @ np.linalg.inv(chart.frame)
    a, c = g[:, :-1], g[:, -1]
    norms = np.linalg.norm(a, axis=1)
    keep = norms > RANK_TOL * max(1.0, float(np.max(np.abs(g))))
    return a[keep] / norms[keep, None], c[keep] / norms[keep]


def _chebyshev_center(a: np.ndarray, c: np.ndarray) -> Tuple[np.ndarray, float]:
    """Largest inscribed ball of {a.w + c <= 0} with unit-norm rows of a."""
    dim = a.shape[1]
    objective = np.zeros(dim + 1)
    objective[-1] = -1.0
    a_ub = np.hstack([a, np.ones((a.shape[0], 1))])
    result = linprog(objective, A_ub=a_ub, b_ub=-c, bounds=[(None, None)] * dim + [(0, None)])
    if not result.success:
        raise DegenerateBody(f"no interior point found: {result.message}")
    return result.x[:dim], float(result.x[-1])


def _cone_interior_slack(facets: np.ndarray) -> float:
    """max s with f.p + s|f| <= 0 for some p in the unit box."""
    size = facets.shape[1]
    objective = np.zeros(size + 1)
    objective[-1] = -1.0
    a_ub = np.hstack([facets, np.linalg.norm(facets, axis=1, keepdims=True)])
    result = linprog(objective, A_ub=a_ub, b_ub=np.zeros(facets.shape[0]),
                     bounds=[(-1.0, 1.0)] * size + [(0.0, 1.0)])
    if not result.success:
        return 0.0
    return float(result.x[-1])


# --- Bodies ---
class ConvexBody(ABC):
    """A convex open subset of projective n-space with a storage chart."""

    kind: str
    chart: AffineChart

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    @abstractmethod
    def properly_convex(self) -> bool:
        ...

    @abstractmethod
    def defect(self, w: np.ndarray) -> float:
        """Signed boundary defect of storage-chart point w: < 0 inside, 0 on the boundary."""

    @abstractmethod
    def chord_parameters(self, x: np.ndarray, d: np.ndarray) -> Tuple[float, float]:
        """(t_b, t_a) with x + t d on the boundary, t_b < 0 < t_a, for interior x."""

    @abstractmethod
    def transform(self, g: ProjectiveMap) -> "ConvexBody":
        """The image g.body."""

    @abstractmethod
    def bounded_in(self, chart: AffineChart) -> bool:
        ...

    @abstractmethod
    def lift(self, p: ProjectivePoint) -> np.ndarray:
        """Representative of p on the body's side of the storage chart."""

    @abstractmethod
    def boundary_outline(self, samples: int = 256) -> np.ndarray:
        """Ordered boundary points in storage-chart coordinates (n = 2)."""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        ...

    def storage_coords(self, p: ProjectivePoint) -> Optional[np.ndarray]:
        try:
            return chart_coords(self.chart, p)
        except PointAtInfinity:
            return None

    def interior_point(self) -> ProjectivePoint:
        return embed(self.chart, self.interior_affine())

    @abstractmethod
    def interior_affine(self) -> np.ndarray:
        ...


class Polytope(ConvexBody):
    """Polytope stored as homogeneous facets and (when properly convex) vertices.

    ``facets`` rows f satisfy f.p <= 0 on the closed cone over the body;
    ``vertices`` rows are lifts inside that cone.
    """

    def __init__(self, facets: np.ndarray, vertices: Optional[np.ndarray], chart: AffineChart, kind: str):
        self.facets = _normalize_rows(np.asarray(facets, dtype=float))
        self.vertices = None if vertices is None else np.asarray(vertices, dtype=float)
        self.chart = chart
        self.kind = kind
        self._a, self._c = chart_halfspaces(self.facets, chart)

    # construction
    @classmethod
    def from_halfspaces(cls, halfspaces: Sequence[Sequence[float]], chart: Optional[AffineChart] = None) -> "Polytope":
        """Polytope {a.v <= b} from rows [a_1, ..., a_n, b] in the given chart."""
        h = np.asarray(halfspaces, dtype=float)
        if h.ndim != 2 or h.shape[1] < 3:
            raise DegenerateBody("half-spaces must be rows [a_1, ..., a_n, b] with n >= 2")
        n = h.shape[1] - 1
        chart = chart or AffineChart.standard(n)
        if chart.dim != n:
            raise DegenerateBody(f"chart dimension {chart.dim} does not match half-spaces of dimension {n}")
        in_frame = np.hstack([h[:, :-1], -h[:, -1:]])
        at_infinity = np.zeros((1, n + 1))
        at_infinity[0, -1] = -1.0
        facets = _normalize_rows(np.vstack([in_frame, at_infinity]) @ chart.frame)
        if _cone_interior_slack(facets) <= 1e-9:
            raise DegenerateBody("half-spaces have empty interior")
        singular = np.linalg.svd(facets, compute_uv=False)
        if singular[-1] <= RANK_TOL * singular[0] or facets.shape[0] < n + 1:
            logger.debug("half-space body contains a projective line; kept without vertices")
            return cls(facets, None, chart, "hpolytope")
        return cls._from_proper_facets(facets, chart, "hpolytope")

    @classmethod
    def _from_proper_facets(cls, facets: np.ndarray, preferred: AffineChart, kind: str) -> "Polytope":
        xi = -np.sum(facets, axis=0)
        inner = AffineChart.from_covector(xi / np.linalg.norm(xi))
        a, c = chart_halfspaces(facets, inner)
        center, radius = _chebyshev_center(a, c)
        if radius <= 1e-12:
            raise DegenerateBody("half-spaces have empty interior")
        try:
            meeting = HalfspaceIntersection(np.hstack([a, c[:, None]]), center)
        except QhullError as e:
            raise DegenerateBody("half-space intersection failed") from e
        return cls._from_affine_points(meeting.intersections, inner, kind, preferred)

    @classmethod
    def from_vertices(cls, vertices: Sequence[Sequence[float]], chart: Optional[AffineChart] = None) -> "Polytope":
        """Convex hull of affine points of the given chart."""
        w = np.asarray(vertices, dtype=float)
        if w.ndim != 2:
            raise DegenerateBody("vertices must be a list of affine points")
        n = w.shape[1]
        chart = chart or AffineChart.standard(n)
        return cls._from_affine_points(w, chart, "vpolytope", chart)

    @classmethod
    def from_homogeneous_vertices(cls, vertices: Sequence[Sequence[float]], kind: str = "vpolytope") -> "Polytope":
        """Polytope spanned by projective points lifted into one open half-space.

        The lifts must admit a covector positive on all of them.
        """
        v = np.asarray(vertices, dtype=float)
        result = linprog(np.zeros(v.shape[1]), A_ub=-v, b_ub=-np.ones(v.shape[0]),
                         bounds=[(None, None)] * v.shape[1])
        if not result.success:
            raise DegenerateBody("vertex lifts are not contained in an open half-space")
        chart = AffineChart.from_covector(result.x / np.linalg.norm(result.x))
        w = np.array([chart_coords(chart, ProjectivePoint(row)) for row in v])
        n = v.shape[1] - 1
        return cls._from_affine_points(w, chart, kind, AffineChart.standard(n))

    @classmethod
    def _from_affine_points(cls, w: np.ndarray, chart: AffineChart, kind: str, preferred: AffineChart) -> "Polytope":
        n = w.shape[1]
        if n < 2:
            raise UnsupportedDimension("bodies live in dimension n >= 2")
        if n > MAX_HULL_DIM:
            raise UnsupportedDimension(f"hull conversion supports n <= {MAX_HULL_DIM}, got n={n}")
        try:
            hull = ConvexHull(w)
        except QhullError as e:
            raise DegenerateBody("vertices do not span a full-dimensional hull") from e
        inv = np.linalg.inv(chart.frame)
        extreme = w[hull.vertices]
        vertices = (inv @ np.hstack([extreme, np.ones((len(extreme), 1))]).T).T
        facets = _dedupe_rows(_normalize_rows(hull.equations @ chart.frame))
        return cls(facets, vertices, _storage_chart(vertices, facets, preferred), kind)

    # geometry
    @property
    def properly_convex(self) -> bool:
        return self.vertices is not None

    def defect(self, w: np.ndarray) -> float:
        return float(np.max(self._a @ w + self._c))

    def chord_parameters(self, x: np.ndarray, d: np.ndarray) -> Tuple[float, float]:
        slack = -(self._a @ x + self._c)
        rate = self._a @ d
        ahead = rate > 0
        behind = rate < 0
        if not ahead.any() or not behind.any():
            raise DegenerateBody("chord leaves every affine chart; body is not properly convex")
        return float(np.max(slack[behind] / rate[behind])), float(np.min(slack[ahead] / rate[ahead]))

    def transform(self, g: ProjectiveMap) -> "Polytope":
        facets = self.facets @ np.linalg.inv(g.matrix)
        if self.vertices is None:
            return Polytope(facets, None, AffineChart(self.chart.frame @ np.linalg.inv(g.matrix)), self.kind)
        vertices = (g.matrix @ self.vertices.T).T
        chart = _storage_chart(vertices, facets, AffineChart.standard(self.dim))
        return Polytope(facets, vertices, chart, self.kind)

    def bounded_in(self, chart: AffineChart) -> bool:
        if self.vertices is None:
            return False
        heights = self.vertices @ chart.covector / np.linalg.norm(self.vertices, axis=1)
        return bool(np.all(heights > BOUNDED_MARGIN) or np.all(heights < -BOUNDED_MARGIN))

    def affine_vertices(self, chart: AffineChart) -> np.ndarray:
        """Vertex coordinates in a chart where the polytope is bounded."""
        if not self.bounded_in(chart):
            raise UnboundedInChart("polytope meets the chart's hyperplane at infinity")
        w = (chart.frame @ self.vertices.T).T
        return w[:, :-1] / w[:, -1:]

    def lift(self, p: ProjectivePoint) -> np.ndarray:
        return p.coords if float(self.chart.covector @ p.coords) >= 0 else -p.coords

    def interior_affine(self) -> np.ndarray:
        if self.vertices is None:
            center, _ = _chebyshev_center(*chart_halfspaces(self.facets[:-1], self.chart))
            return center
        return self.affine_vertices(self.chart).mean(axis=0)

    def boundary_outline(self, samples: int = 256) -> np.ndarray:
        w = self.affine_vertices(self.chart)
        if self.dim != 2:
            raise UnsupportedDimension("outline is defined for n = 2")
        hull = ConvexHull(w)
        return w[hull.vertices]

    def to_dict(self) -> Dict[str, Any]:
        if self.vertices is None:
            a, c = chart_halfspaces(self.facets, self.chart)
            return {"type": "hpolytope", "chart": _chart_to_json(self.chart),
                    "halfspaces": [list(map(float, row)) + [float(-ci)] for row, ci in zip(a, c)]}
        return {"type": "vpolytope", "chart": _chart_to_json(self.chart),
                "vertices": self.affine_vertices(self.chart).tolist()}


class Ellipsoid(ConvexBody):
    """Interior {[v] : v^T Q v < 0} of a form Q of signature (n, 1)."""

    kind = "ellipsoid"

    def __init__(self, form: Sequence[Sequence[float]]):
        q = np.asarray(form, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 3:
            raise DegenerateBody("ellipsoid form must be a square matrix of size n+1 >= 3")
        q = (q + q.T) / 2.0
        q = q / np.linalg.norm(q)
        eigenvalues, eigenvectors = np.linalg.eigh(q)
        negative = eigenvalues < -RANK_TOL
        positive = eigenvalues > RANK_TOL
        if negative.sum() != 1 or positive.sum() != q.shape[0] - 1:
            raise DegenerateBody(f"form must have signature (n,1), eigenvalues {np.round(eigenvalues, 12)}")
        order = list(np.flatnonzero(positive)) + list(np.flatnonzero(negative))
        basis = eigenvectors[:, order]
        for k in range(basis.shape[1]):
            if basis[np.argmax(np.abs(basis[:, k])), k] < 0:
                basis[:, k] = -basis[:, k]
        frame = np.sqrt(np.abs(eigenvalues[order]))[:, None] * basis.T
        self.form = q
        self.chart = AffineChart(frame)

    @classmethod
    def unit_ball(cls, n: int) -> "Ellipsoid":
        return cls(np.diag([1.0] * n + [-1.0]))

    @property
    def properly_convex(self) -> bool:
        return True

    def defect(self, w: np.ndarray) -> float:
        return float(np.linalg.norm(w) - 1.0)

    def chord_parameters(self, x: np.ndarray, d: np.ndarray) -> Tuple[float, float]:
        qa = float(d @ d)
        qb = float(x @ d)
        qc = float(x @ x) - 1.0
        disc = qb * qb - qa * qc
        if qa <= 0 or disc <= 0:
            raise DegenerateConfiguration("degenerate chord direction")
        q = -(qb + math.copysign(math.sqrt(disc), qb))
        roots = sorted((q / qa, qc / q))
        return roots[0], roots[1]

    def transform(self, g: ProjectiveMap) -> "Ellipsoid":
        inv = np.linalg.inv(g.matrix)
        return Ellipsoid(inv.T @ self.form @ inv)

    def chart_form(self, chart: AffineChart) -> Tuple[np.ndarray, np.ndarray, float]:
        """Blocks (A, beta, gamma) of the form in chart coordinates."""
        inv = np.linalg.inv(chart.frame)
        qc = inv.T @ self.form @ inv
        return qc[:-1, :-1], qc[:-1, -1], float(qc[-1, -1])

    def bounded_in(self, chart: AffineChart) -> bool:
        a, _, _ = self.chart_form(chart)
        return bool(np.min(np.linalg.eigvalsh(a)) > BOUNDED_MARGIN * np.max(np.abs(a)))

    def affine_shape(self, chart: AffineChart) -> Tuple[np.ndarray, np.ndarray]:
        """Center c and matrix P with body = {(w - c)^T P (w - c) < 1} in the chart."""
        if not self.bounded_in(chart):
            raise UnboundedInChart("ellipsoid meets the chart's hyperplane at infinity")
        a, beta, gamma = self.chart_form(chart)
        center = -np.linalg.solve(a, beta)
        kappa = float(center @ a @ center) - gamma
        if kappa <= 0:
            raise DegenerateBody("ellipsoid has empty interior in this chart")
        return center, a / kappa

    def lift(self, p: ProjectivePoint) -> np.ndarray:
        return p.coords if float(self.chart.covector @ p.coords) >= 0 else -p.coords

    def interior_affine(self) -> np.ndarray:
        return np.zeros(self.dim)

    def boundary_outline(self, samples: int = 256) -> np.ndarray:
        if self.dim != 2:
            raise UnsupportedDimension("outline is defined for n = 2")
        angles = 2 * np.pi * np.arange(samples) / samples
        return np.column_stack([np.cos(angles), np.sin(angles)])

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "ellipsoid", "Q": self.form.tolist()}


def _dedupe_rows(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    kept: List[np.ndarray] = []
    for row in m:
        if not any(np.linalg.norm(row - other) <= tol for other in kept):
            kept.append(row)
    return np.array(kept)


def _storage_chart(vertices: np.ndarray, facets: np.ndarray, preferred: AffineChart) -> AffineChart:
    heights = vertices @ preferred.covector / np.linalg.norm(vertices, axis=1)
    if np.all(heights > BOUNDED_MARGIN):
        return preferred
    xi = -np.sum(facets, axis=0)
    return AffineChart.from_covector(xi / np.linalg.norm(xi))


def _chart_to_json(chart: AffineChart):
    return "standard" if chart.is_standard() else {"frame": chart.frame.tolist()}


def chart_from_json(source, n: int) -> AffineChart:
    if source in (None, "standard"):
        return AffineChart.standard(n)
    if isinstance(source, dict) and "frame" in source:
        return AffineChart(source["frame"])
    if isinstance(source, dict) and "covector" in source:
        return AffineChart.from_covector(source["covector"])
    raise DegenerateBody(f"unknown chart specification {source!r}")


def body_from_dict(data: Dict[str, Any]) -> ConvexBody:
    """Build a body from its JSON description (hpolytope, vpolytope or ellipsoid)."""
    kind = data.get("type")
    if kind == "hpolytope":
        rows = data["halfspaces"]
        return Polytope.from_halfspaces(rows, chart_from_json(data.get("chart"), len(rows[0]) - 1))
    if kind == "vpolytope":
        rows = data["vertices"]
        if data.get("homogeneous"):
            return Polytope.from_homogeneous_vertices(rows)
        return Polytope.from_vertices(rows, chart_from_json(data.get("chart"), len(rows[0])))
    if kind == "ellipsoid":
        return Ellipsoid(data["Q"])
    raise DegenerateBody(f"unknown body type {kind!r}")


# --- Marked bodies and families ---
@dataclass(frozen=True)
class MarkedBody:
    """A pair (body, basepoint) with the basepoint interior."""
    body: ConvexBody
    basepoint: ProjectivePoint

    def __post_init__(self):
        if contains(self.body, self.basepoint) is not Location.INTERIOR:
            raise PointOutsideBody(f"basepoint {self.basepoint!r} is not interior")


@dataclass
class BodyFamily:
    tag: str
    body: ConvexBody
    generators: List[ProjectiveMap]
    center: ProjectivePoint
    stabilizer: List[ProjectiveMap] = field(default_factory=list)

    def marked(self) -> MarkedBody:
        return MarkedBody(self.body, self.center)


# --- Operations ---
def contains(body: ConvexBody, p: ProjectivePoint) -> Location:
    """Classify p against the body with a boundary band of BOUNDARY_TOL."""
    if p.dim != body.dim:
        raise DegenerateConfiguration(f"point of P^{p.dim} tested against a body in P^{body.dim}")
    w = body.storage_coords(p)
    if w is None:
        return Location.EXTERIOR if body.properly_convex else Location.BOUNDARY
    value = body.defect(w)
    if value < -BOUNDARY_TOL:
        return Location.INTERIOR
    if value <= BOUNDARY_TOL:
        return Location.BOUNDARY
    return Location.EXTERIOR


def _require_chord(body: ConvexBody, x: ProjectivePoint, y: ProjectivePoint) -> Tuple[np.ndarray, np.ndarray]:
    if not body.properly_convex:
        raise DegenerateBody("chords are only defined on properly convex bodies")
    for p in (x, y):
        if contains(body, p) is not Location.INTERIOR:
            raise PointOutsideBody(f"{p!r} is not interior")
    if x == y:
        raise DegenerateConfiguration("chord through coincident points")
    return chart_coords(body.chart, x), chart_coords(body.chart, y)


def chord_endpoints(body: ConvexBody, x: ProjectivePoint, y: ProjectivePoint) -> Tuple[ProjectivePoint, ProjectivePoint]:
    """Boundary points (a, b) of the line xy ordered b, x, y, a along the chord."""
    wx, wy = _require_chord(body, x, y)
    d = wy - wx
    t_b, t_a = body.chord_parameters(wx, d)
    return embed(body.chart, wx + t_a * d), embed(body.chart, wx + t_b * d)


def chord_by_bisection(body: ConvexBody, x: ProjectivePoint, y: ProjectivePoint,
                       iterations: int = 200) -> Tuple[ProjectivePoint, ProjectivePoint]:
    """Chord endpoints located by bisection on the boundary defect."""
    wx, wy = _require_chord(body, x, y)
    d = wy - wx

    def crossing(sign: float) -> float:
        inside, outside = 0.0, sign
        while body.defect(wx + outside * d) <= 0:
            inside, outside = outside, 2 * outside
        for _ in range(iterations):
            middle = (inside + outside) / 2
            if middle in (inside, outside):
                break
            if body.defect(wx + middle * d) <= 0:
                inside = middle
            else:
                outside = middle
        return (inside + outside) / 2

    return embed(body.chart, wx + crossing(1.0) * d), embed(body.chart, wx + crossing(-1.0) * d)


def is_properly_convex(body: ConvexBody) -> bool:
    """True iff the closure of the body misses some projective hyperplane."""
    return body.properly_convex


def _points_match(images: Sequence[ProjectivePoint], targets: Sequence[ProjectivePoint]) -> bool:
    if len(images) != len(targets):
        return False
    unused = list(targets)
    for p in images:
        hit = next((k for k, q in enumerate(unused) if p == q), None)
        if hit is None:
            return False
        unused.pop(hit)
    return True


def is_automorphism(body: ConvexBody, g: ProjectiveMap) -> bool:
    """True iff g maps the body onto itself."""
    if g.matrix.shape[0] != body.dim + 1:
        raise InvalidMatrix(f"map of size {g.matrix.shape[0]} cannot act on P^{body.dim}")
    if isinstance(body, Ellipsoid):
        image = g.matrix.T @ body.form @ g.matrix
        scale = float(np.sum(image * body.form) / np.sum(body.form * body.form))
        if scale <= 0:
            return False
        return bool(np.linalg.norm(image - scale * body.form) <= AUTOMORPHISM_TOL * np.linalg.norm(image))
    if not body.properly_convex:
        raise DegenerateBody("automorphism test needs a properly convex body")
    vertices = [ProjectivePoint(v) for v in body.vertices]
    images = [apply_map(g, v) for v in vertices]
    if not _points_match(images, vertices):
        return False
    return contains(body, apply_map(g, body.interior_point())) is Location.INTERIOR


# --- Families ---
def boost(n: int, axis: int, t: float) -> ProjectiveMap:
    """Hyperbolic translation of the unit ball along a coordinate axis."""
    m = np.eye(n + 1)
    m[axis, axis] = m[n, n] = math.cosh(t)
    m[axis, n] = m[n, axis] = math.sinh(t)
    return det_normalize(m)


def rotation(n: int, i: int, j: int, theta: float) -> ProjectiveMap:
    m = np.eye(n + 1)
    m[i, i] = m[j, j] = math.cos(theta)
    m[i, j], m[j, i] = -math.sin(theta), math.sin(theta)
    return det_normalize(m)


def permutation_map(perm: Sequence[int]) -> ProjectiveMap:
    size = len(perm)
    m = np.zeros((size, size), dtype=int)
    for source, target in enumerate(perm):
        m[target, source] = 1
    return det_normalize(m)


def _ellipsoid_family(n: int, parameters: Dict[str, Any]) -> BodyFamily:
    body = Ellipsoid.unit_ball(n)
    generators = [boost(n, int(axis), float(t)) for axis, t in parameters.get("boosts", [])]
    generators += [rotation(n, int(i), int(j), float(theta)) for i, j, theta in parameters.get("rotations", [])]
    steps = int(parameters.get("stabilizer_steps", 360 if n == 2 else 36))
    reflection = det_normalize(np.diag([-1.0] + [1.0] * n))
    stabilizer = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(steps):
                r = rotation(n, i, j, 2 * math.pi * k / steps)
                stabilizer += [r, r @ reflection]
    return BodyFamily("ellipsoid", body, generators or [ProjectiveMap.identity(n)],
                      ProjectivePoint.from_affine(np.zeros(n)), stabilizer)


def _simplex_family(n: int, parameters: Dict[str, Any]) -> BodyFamily:
    body = Polytope.from_homogeneous_vertices(np.eye(n + 1), kind="simplex")
    generators = []
    for diagonal in parameters.get("diagonals", []):
        if len(diagonal) != n + 1 or min(diagonal) <= 0:
            raise UnsupportedFamily(f"simplex diagonal needs {n + 1} positive entries, got {diagonal}")
        generators.append(det_normalize(np.diag(diagonal)))
    generators += [permutation_map(p) for p in parameters.get("permutations", [])]
    stabilizer = [permutation_map(p) for p in permutations(range(n + 1))] if n <= 4 else []
    return BodyFamily("simplex", body, generators or [ProjectiveMap.identity(n)],
                      ProjectivePoint(np.ones(n + 1)), stabilizer)


def _polygon_family(n: int, parameters: Dict[str, Any]) -> BodyFamily:
    if n != 2:
        raise UnsupportedDimension("the polygon family lives in dimension 2")
    sides = parameters.get("sides")
    if "vertices" in parameters:
        vertices = np.asarray(parameters["vertices"], dtype=float)
    elif sides:
        angles = 2 * math.pi * np.arange(int(sides)) / int(sides)
        vertices = np.column_stack([np.cos(angles), np.sin(angles)])
    else:
        raise UnsupportedFamily("polygon family needs 'vertices' or 'sides'")
    body = Polytope.from_vertices(vertices)
    generators = [det_normalize(m) for m in parameters.get("symmetries", [])]
    stabilizer = [ProjectiveMap.identity(2)]
    if sides and "vertices" not in parameters:
        k = int(sides)
        generators += [rotation(2, 0, 1, 2 * math.pi * int(r) / k) for r in parameters.get("rotation_steps", [])]
        reflection = det_normalize(np.diag([1.0, -1.0, 1.0]))
        rotations = [rotation(2, 0, 1, 2 * math.pi * r / k) for r in range(k)]
        stabilizer = rotations + [r @ reflection for r in rotations]
    center = ProjectivePoint.from_affine(np.mean(vertices, axis=0))
    return BodyFamily("polygon", body, generators or [ProjectiveMap.identity(2)], center, stabilizer)


FAMILIES = {
    "ellipsoid": _ellipsoid_family,
    "simplex": _simplex_family,
    "polygon": _polygon_family,
}


def make_family(tag: str, n: int, parameters: Optional[Dict[str, Any]] = None) -> BodyFamily:
    """Built-in body with automorphism generators and known center stabilizer.

    Raises:
        UnsupportedFamily: unknown tag or bad parameters.
        NotAnAutomorphism: a requested generator does not preserve the body.
    """
    if tag not in FAMILIES:
        raise UnsupportedFamily(f"unknown family {tag!r}; expected one of {sorted(FAMILIES)}")
    if n < 2:
        raise UnsupportedDimension("families need n >= 2")
    family = FAMILIES[tag](n, dict(parameters or {}))
    for g in family.generators:
        if not is_automorphism(family.body, g):
            raise NotAnAutomorphism(f"generator {g.to_list()} does not preserve the {tag} body")
    logger.debug(f"family {tag} (n={n}) with {len(family.generators)} generators")
    return family


def body_from_json(source) -> ConvexBody:
    """Body from a JSON string or an already-parsed dict.

    Raises:
        SchemaError: malformed JSON or missing fields.
    """
    try:
        data = json.loads(source) if isinstance(source, str) else source
    except json.JSONDecodeError as e:
        raise SchemaError(f"malformed body JSON: {e}") from e
    if not isinstance(data, dict):
        raise SchemaError("body JSON must be an object")
    try:
        return body_from_dict(data)
    except (KeyError, IndexError, TypeError, ValueError) as e:
        raise SchemaError(f"incomplete body description: {e!r}") from e


def body_to_json(body: ConvexBody) -> str:
    return json.dumps(body.to_dict())
