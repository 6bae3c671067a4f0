"""
Projective module - points, affine charts, projective maps and the cross-ratio.

Points are homogeneous vectors stored at unit norm with the first nonzero
entry positive. Maps are (n+1)x(n+1) matrices normalized to |det| = 1.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from core import (
    CollinearityViolation,
    DegenerateConfiguration,
    InvalidMatrix,
    PointAtInfinity,
)

logger = logging.getLogger("hilbertlab.projective")

# Tolerances
NORMALIZATION_FLOOR = 1e-300
SIGN_FLOOR = 1e-12
POINT_TOL = 1e-9
COLLINEARITY_TOL = 1e-9
CHART_TOL = 1e-12
DET_FLOOR = 1e-14
COND_CEILING = 1e14


# --- Points ---
@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A point of real projective n-space given by homogeneous coordinates."""
    coords: np.ndarray

    def __post_init__(self):
        v = np.array(self.coords, dtype=float).reshape(-1)
        if v.size < 2:
            raise DegenerateConfiguration("a projective point needs at least two coordinates")
        norm = np.linalg.norm(v)
        if not np.isfinite(norm) or norm <= NORMALIZATION_FLOOR:
            raise DegenerateConfiguration("homogeneous coordinates must be finite and nonzero")
        v = v / norm
        nonzero = np.flatnonzero(np.abs(v) > SIGN_FLOOR)
        if v[nonzero[0]] < 0:
            v = -v
        v.setflags(write=False)
        object.__setattr__(self, "coords", v)

    @classmethod
    def from_affine(cls, v: Sequence[float]) -> "ProjectivePoint":
        """Lift affine coordinates of the standard chart."""
        return cls(np.append(np.asarray(v, dtype=float), 1.0))

    @property
    def dim(self) -> int:
        return self.coords.size - 1

    def affine(self) -> np.ndarray:
        """Coordinates in the standard chart."""
        return chart_coords(AffineChart.standard(self.dim), self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProjectivePoint) or other.coords.size != self.coords.size:
            return NotImplemented
        d = min(np.linalg.norm(self.coords - other.coords), np.linalg.norm(self.coords + other.coords))
        return bool(d <= POINT_TOL)

    def __hash__(self) -> int:
        return hash(tuple(np.round(self.coords, 8)))

    def __repr__(self) -> str:
        return "[" + ":".join(f"{c:.6g}" for c in self.coords) + "]"

    def to_list(self) -> list:
        return [float(c) for c in self.coords]


# --- Charts ---
@dataclass(frozen=True, eq=False)
class AffineChart:
    """An affine chart {p : xi.p != 0} with an affine frame.

    ``frame`` is an invertible (n+1)x(n+1) matrix whose last row is the
    covector xi at infinity; chart coordinates of p are the first n entries
    of frame @ p divided by the last one.
    """
    frame: np.ndarray

    def __post_init__(self):
        a = np.array(self.frame, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidMatrix("chart frame must be square")
        if abs(np.linalg.det(a)) < DET_FLOOR:
            raise InvalidMatrix("chart frame is singular")
        a.setflags(write=False)
        object.__setattr__(self, "frame", a)

    @property
    def covector(self) -> np.ndarray:
        return self.frame[-1]

    @property
    def dim(self) -> int:
        return self.frame.shape[0] - 1

    @property
    def origin(self) -> ProjectivePoint:
        return embed(self, np.zeros(self.dim))

    @classmethod
    def standard(cls, n: int) -> "AffineChart":
        """The chart {x_{n+1} = 1} with origin O = [0:...:0:1]."""
        return cls(np.eye(n + 1))

    @classmethod
    def coordinate(cls, n: int, index: int) -> "AffineChart":
        """The chart {x_index = 1}, remaining coordinates kept in order."""
        order = [i for i in range(n + 1) if i != index] + [index]
        return cls(np.eye(n + 1)[order])

    @classmethod
    def from_covector(cls, xi: Sequence[float]) -> "AffineChart":
        """Chart with the given covector at infinity and an orthonormal frame of its kernel."""
        xi = np.asarray(xi, dtype=float)
        if np.linalg.norm(xi) <= CHART_TOL:
            raise DegenerateConfiguration("chart covector must be nonzero")
        kernel = null_space(xi.reshape(1, -1)).T
        return cls(np.vstack([kernel, xi]))

    def is_standard(self) -> bool:
        return bool(np.array_equal(self.frame, np.eye(self.dim + 1)))


def chart_coords(chart: AffineChart, p: ProjectivePoint) -> np.ndarray:
    """Affine coordinates of p in the chart.

    Raises:
        PointAtInfinity: p lies on the chart's hyperplane at infinity.
    """
    w = chart.frame @ p.coords
    if abs(w[-1]) <= CHART_TOL * max(1.0, np.linalg.norm(w)):
        raise PointAtInfinity(f"{p!r} lies at infinity of the chart")
    return w[:-1] / w[-1]


def embed(chart: AffineChart, v: Sequence[float]) -> ProjectivePoint:
    """Inverse of chart_coords."""
    w = np.append(np.asarray(v, dtype=float), 1.0)
    return ProjectivePoint(np.linalg.solve(chart.frame, w))


# --- Maps ---
def _exact_det(m: np.ndarray) -> int:
    """Bareiss fraction-free determinant of an integer object array."""
    a = [[int(x) for x in row] for row in m]
    size = len(a)
    sign = 1
    previous = 1
    for k in range(size - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, size) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, size):
            for j in range(k + 1, size):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // previous
        previous = a[k][k]
    return sign * a[-1][-1]


def exact_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of an integer matrix of determinant +-1 through its adjugate."""
    size = m.shape[0]
    det = _exact_det(m)
    if abs(det) != 1:
        raise InvalidMatrix(f"integer matrix has determinant {det}, not +-1")
    inv = np.empty((size, size), dtype=object)
    for i in range(size):
        for j in range(size):
            minor = np.delete(np.delete(m, j, axis=0), i, axis=1)
            cofactor = _exact_det(minor) if size > 1 else 1
            inv[i, j] = (-1) ** (i + j) * cofactor * det
    return inv


def _integer_shadow(m: np.ndarray) -> Optional[np.ndarray]:
    """Exact integer copy of m when m is integral with determinant +-1."""
    if not np.all(np.isfinite(m)) or np.max(np.abs(m)) >= 2 ** 52:
        return None
    rounded = np.rint(m)
    if not np.array_equal(rounded, m):
        return None
    exact = np.array([[int(x) for x in row] for row in rounded], dtype=object)
    if abs(_exact_det(exact)) != 1:
        return None
    return exact


@dataclass(frozen=True, eq=False)
class ProjectiveMap:
    """An element of SL+-(n+1, R) acting on projective n-space.

    ``exact`` holds an integer copy (object array of Python ints) when the
    matrix is integral with |det| = 1; products of exact maps stay exact.
    """
    matrix: np.ndarray
    det_sign: int = 1
    exact: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0] - 1

    @classmethod
    def identity(cls, n: int) -> "ProjectiveMap":
        return det_normalize(np.eye(n + 1, dtype=int))

    def inverse(self) -> "ProjectiveMap":
        if self.exact is not None:
            exact_inv = exact_inverse(self.exact)
            return ProjectiveMap(exact_inv.astype(float), self.det_sign, exact_inv)
        return ProjectiveMap(np.linalg.inv(self.matrix), self.det_sign)

    def __matmul__(self, other: "ProjectiveMap") -> "ProjectiveMap":
        if not isinstance(other, ProjectiveMap):
            return NotImplemented
        if self.exact is not None and other.exact is not None:
            product = self.exact.dot(other.exact)
            return ProjectiveMap(product.astype(float), self.det_sign * other.det_sign, product)
        return ProjectiveMap(self.matrix @ other.matrix, self.det_sign * other.det_sign)

    def is_identity(self, tol: float = 0.0) -> bool:
        if self.exact is not None and tol == 0.0:
            return bool(np.array_equal(self.exact, np.eye(self.dim + 1, dtype=int).astype(object)))
        return bool(np.linalg.norm(self.matrix - np.eye(self.dim + 1)) <= tol)

    def to_list(self) -> list:
        if self.exact is not None:
            return [[int(x) for x in row] for row in self.exact]
        return [[float(x) for x in row] for row in self.matrix]


def det_normalize(m) -> ProjectiveMap:
    """Scale m to |det| = 1 and record the determinant sign.

    Raises:
        InvalidMatrix: m is not square, not finite, or numerically singular.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise InvalidMatrix(f"expected a square matrix of size >= 2, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix has non-finite entries")
    det = np.linalg.det(a)
    if abs(det) <= DET_FLOOR:
        raise InvalidMatrix(f"matrix is singular (det={det:.3e})")
    det_sign = 1 if det > 0 else -1
    exact = _integer_shadow(a)
    if exact is not None:
        return ProjectiveMap(a, det_sign, exact)
    size = a.shape[0]
    scaled = a / abs(det) ** (1.0 / size)
    if np.linalg.cond(scaled) > COND_CEILING:
        raise InvalidMatrix("matrix is numerically singular")
    return ProjectiveMap(scaled, det_sign, _integer_shadow(scaled))


def apply_map(g: ProjectiveMap, p: ProjectivePoint) -> ProjectivePoint:
    """The projective class of g.matrix @ p."""
    if g.matrix.shape[0] != p.coords.size:
        raise InvalidMatrix(f"map of size {g.matrix.shape[0]} cannot act on a point of P^{p.dim}")
    return ProjectivePoint(g.matrix @ p.coords)


def map_from_json(text: str) -> ProjectiveMap:
    """Matrices are serialized as row-major JSON arrays of arrays."""
    return det_normalize(json.loads(text))


# --- Cross-ratio ---
def affine_cross_ratio(a: np.ndarray, b: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """(|a-x| |b-y|) / (|a-y| |b-x|) for collinear affine points."""
    ay = np.linalg.norm(a - y)
    bx = np.linalg.norm(b - x)
    if ay == 0.0 or bx == 0.0:
        raise DegenerateConfiguration("cross-ratio undefined when a = y or b = x")
    return float(np.linalg.norm(a - x) * np.linalg.norm(b - y) / (ay * bx))


def _best_coordinate_chart(points: Sequence[ProjectivePoint]) -> AffineChart:
    stacked = np.abs(np.vstack([p.coords for p in points]))
    worst = stacked.min(axis=0)
    index = int(np.argmax(worst))
    if worst[index] <= CHART_TOL:
        raise PointAtInfinity("no coordinate chart contains all four points")
    return AffineChart.coordinate(points[0].dim, index)


def cross_ratio(a: ProjectivePoint, b: ProjectivePoint, x: ProjectivePoint, y: ProjectivePoint) -> float:
    """The cross-ratio [a:b:x:y] of four collinear points.

    Evaluated in the coordinate chart maximizing the smallest |xi.p| over the
    four points; the value does not depend on that choice.

    Raises:
        CollinearityViolation: the points do not lie on one projective line.
        DegenerateConfiguration: a = y or b = x.
    """
    points = (a, b, x, y)
    if len({p.coords.size for p in points}) != 1:
        raise DegenerateConfiguration("points live in different projective spaces")
    singular = np.linalg.svd(np.vstack([p.coords for p in points]), compute_uv=False)
    if singular.size > 2 and singular[2] > COLLINEARITY_TOL * singular[0]:
        raise CollinearityViolation(f"points are not collinear (sigma3/sigma1={singular[2] / singular[0]:.3e})")
    if a == y or b == x:
        raise DegenerateConfiguration("cross-ratio undefined when a = y or b = x")
    chart = _best_coordinate_chart(points)
    return affine_cross_ratio(*(chart_coords(chart, p) for p in points))
