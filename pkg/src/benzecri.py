"""
Benzecri module - moments of convex bodies, inertia ellipsoids, standard pairs
and the projective map carrying a marked body to a standard pair.

Moments are exact: polytopes are fan-triangulated through qhull and summed
with the closed-form simplex integrals; ellipsoids use their affine shape in
the chart. A seeded rejection sampler is kept for cross-checks.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.linalg import null_space, polar, sqrtm
from scipy.spatial import ConvexHull
from scipy.special import gamma

from convex import ConvexBody, Ellipsoid, MarkedBody, Polytope, chart_halfspaces
from core import (
    DEFAULT_SEED,
    DegenerateBody,
    NonConvergence,
    NotStandard,
    PointAtInfinity,
    PointOutsideBody,
    UnboundedInChart,
)
from projective import AffineChart, ProjectiveMap, apply_map, chart_coords, det_normalize

logger = logging.getLogger("hilbertlab.benzecri")

STANDARD_TOL = 1e-6
MAX_NEWTON_STEPS = 100
DAMPING_FLOOR = 2.0 ** -20
NEWTON_TOL = 1e-13
NOISE_TOL = 1e-10
FD_STEP = 1e-6
MC_BATCH = 1_000_000


def ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / gamma(n / 2 + 1)


def ball_moment(n: int) -> float:
    """Second moment per axis of the unit n-ball, c_n = vol(B) / (n + 2)."""
    return ball_volume(n) / (n + 2)


@dataclass
class MomentData:
    """Volume, centroid and second moment matrix about a basepoint, in chart units."""
    centroid: np.ndarray
    second_moment: np.ndarray
    volume: float
    basepoint: np.ndarray
    exactness: str = "exact"
    samples: Optional[int] = None
    seed: Optional[int] = None

    def gyration_radius(self) -> float:
        return math.sqrt(float(np.trace(self.second_moment)) / self.volume)


@dataclass
class StandardPairCertificate:
    bounded: bool
    basepoint_offset: float
    centroid_offset: float
    inertia_deviation: float
    tolerance: float

    @property
    def valid(self) -> bool:
        return self.bounded and max(self.basepoint_offset, self.centroid_offset, self.inertia_deviation) <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "valid": self.valid}


@dataclass(frozen=True)
class SandwichRadii:
    inner: float
    outer: float


# --- Moments ---
def _simplices(body: Polytope, chart: AffineChart):
    """Fan triangulation of the polytope from its vertex mean, as (k, n+1, n) points."""
    w = body.affine_vertices(chart)
    hull = ConvexHull(w)
    apex = w.mean(axis=0)
    facets = w[hull.simplices]
    return np.concatenate([np.broadcast_to(apex, (len(facets), 1, w.shape[1])), facets], axis=1)


def _polytope_moments(body: Polytope, basepoint: np.ndarray, chart: AffineChart) -> MomentData:
    pieces = _simplices(body, chart)
    n = pieces.shape[2]
    edges = pieces[:, 1:, :] - pieces[:, :1, :]
    volumes = np.abs(np.linalg.det(edges)) / math.factorial(n)
    total = float(volumes.sum())
    if total <= 0:
        raise DegenerateBody("polytope has zero volume in this chart")
    centroid = (volumes[:, None] * pieces.mean(axis=1)).sum(axis=0) / total
    shifted = pieces - basepoint
    sums = shifted.sum(axis=1)
    second = np.einsum("kiu,kiv->kuv", shifted, shifted) + np.einsum("ku,kv->kuv", sums, sums)
    moment = (volumes[:, None, None] * second).sum(axis=0) / ((n + 1) * (n + 2))
    return MomentData(centroid, (moment + moment.T) / 2, total, basepoint)


def _ellipsoid_moments(body: Ellipsoid, basepoint: np.ndarray, chart: AffineChart) -> MomentData:
    center, shape = body.affine_shape(chart)
    n = center.size
    volume = ball_volume(n) / math.sqrt(np.linalg.det(shape))
    offset = center - basepoint
    moment = volume / (n + 2) * np.linalg.inv(shape) + volume * np.outer(offset, offset)
    return MomentData(center, (moment + moment.T) / 2, volume, basepoint)


def second_moment_matrix(body: ConvexBody, basepoint: Optional[np.ndarray], chart: AffineChart) -> MomentData:
    """Exact second moment matrix of the body about basepoint (default: the centroid).

    Raises:
        UnboundedInChart: the body meets the chart's hyperplane at infinity.
    """
    base = centroid(body, chart) if basepoint is None else np.asarray(basepoint, dtype=float)
    if isinstance(body, Ellipsoid):
        return _ellipsoid_moments(body, base, chart)
    return _polytope_moments(body, base, chart)


def centroid(body: ConvexBody, chart: AffineChart) -> np.ndarray:
    """Center of gravity of the body in the chart's affine coordinates."""
    if isinstance(body, Ellipsoid):
        return body.affine_shape(chart)[0]
    if not (isinstance(body, Polytope) and body.properly_convex):
        raise UnboundedInChart("body is not bounded in any chart")
    return _polytope_moments(body, np.zeros(body.dim), chart).centroid


def _inside(body: ConvexBody, chart: AffineChart, points: np.ndarray) -> np.ndarray:
    lifts = np.linalg.solve(chart.frame, np.hstack([points, np.ones((len(points), 1))]).T)
    if isinstance(body, Ellipsoid):
        return np.einsum("ik,ij,jk->k", lifts, body.form, lifts) < 0
    side = np.sign(chart.covector @ body.vertices[0])
    return np.all(side * (body.facets @ lifts) <= 0, axis=0)


def _bounding_box(body: ConvexBody, chart: AffineChart) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(body, Ellipsoid):
        center, shape = body.affine_shape(chart)
        half = np.sqrt(np.diag(np.linalg.inv(shape)))
        return center - half, center + half
    w = body.affine_vertices(chart)
    return w.min(axis=0), w.max(axis=0)


def monte_carlo_moments(body: ConvexBody, chart: AffineChart, samples: int, seed: int = DEFAULT_SEED,
                        basepoint: Optional[np.ndarray] = None) -> MomentData:
    """Rejection-sampled moments in the bounding box of the body."""
    low, high = _bounding_box(body, chart)
    rng = np.random.default_rng(seed)
    accepted = 0
    first = np.zeros(low.size)
    second = np.zeros((low.size, low.size))
    base = np.zeros(low.size) if basepoint is None else np.asarray(basepoint, dtype=float)
    drawn = 0
    while drawn < samples:
        batch = min(MC_BATCH, samples - drawn)
        points = rng.uniform(low, high, size=(batch, low.size))
        kept = points[_inside(body, chart, points)] - base
        accepted += len(kept)
        first += kept.sum(axis=0)
        second += kept.T @ kept
        drawn += batch
    if accepted == 0:
        raise DegenerateBody("no Monte Carlo sample fell inside the body")
    box = float(np.prod(high - low))
    volume = box * accepted / samples
    center = base + first / accepted
    if basepoint is None:
        mean = first / accepted
        moment = volume * (second / accepted - np.outer(mean, mean))
        base = center
    else:
        moment = volume * second / accepted
    return MomentData(center, moment, volume, base, "monte_carlo", samples, seed)


# --- Inertia ellipsoid ---
def inertia_shape(moments: MomentData) -> np.ndarray:
    """The SPD solution T of det(T) c_n T^2 = M."""
    n = moments.centroid.size
    c_n = ball_moment(n)
    scale = (np.linalg.det(moments.second_moment) / c_n ** n) ** (1.0 / (n + 2))
    root = np.real(sqrtm(moments.second_moment / (c_n * scale)))
    return (root + root.T) / 2


def inertia_ellipsoid(body: ConvexBody, chart: AffineChart) -> Ellipsoid:
    """The ellipsoid centered at the centroid with the body's second moments."""
    moments = second_moment_matrix(body, None, chart)
    t = inertia_shape(moments)
    shape = np.linalg.inv(t @ t)
    c = moments.centroid
    affine_form = np.block([[shape, -(shape @ c)[:, None]],
                            [-(shape @ c)[None, :], np.array([[c @ shape @ c - 1.0]])]])
    return Ellipsoid(chart.frame.T @ affine_form @ chart.frame)


# --- Standard pairs ---
def is_standard(mb: MarkedBody, tol: float = STANDARD_TOL) -> StandardPairCertificate:
    """Check boundedness, x = O, centroid = x and unit inertia ellipsoid in the standard chart."""
    n = mb.body.dim
    chart = AffineChart.standard(n)
    try:
        x = chart_coords(chart, mb.basepoint)
        offset = float(np.linalg.norm(x))
    except PointAtInfinity:
        x, offset = None, math.inf
    if not mb.body.bounded_in(chart) or x is None:
        return StandardPairCertificate(mb.body.bounded_in(chart), offset, math.inf, math.inf, tol)
    moments = second_moment_matrix(mb.body, np.zeros(n), chart)
    deviation = float(np.linalg.norm(moments.second_moment - ball_moment(n) * np.eye(n)))
    return StandardPairCertificate(True, offset, float(np.linalg.norm(moments.centroid - x)), deviation, tol)


@dataclass
class StandardizationResult:
    map: ProjectiveMap
    certificate: StandardPairCertificate
    covector: np.ndarray
    iterations: int
    residual: float
    body: ConvexBody = field(repr=False)

    def audit(self) -> Dict[str, Any]:
        return {
            "covector": [float(c) for c in self.covector],
            "iterations": self.iterations,
            "residual": self.residual,
            "map": self.map.to_list(),
            "certificate": self.certificate.to_dict(),
        }


def _chart_frame(eta: np.ndarray) -> np.ndarray:
    n = eta.size
    frame = np.eye(n + 1)
    frame[n, :n] = eta
    return frame


def _initial_covector(body: ConvexBody) -> np.ndarray:
    n = body.dim
    if isinstance(body, Ellipsoid):
        polar_covector = body.form[:, n]
        return polar_covector[:n] / polar_covector[n]
    normals = -body.facets
    return (normals / normals[:, n:]).mean(axis=0)[:n]


def _jacobian(residual, eta: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Finite-difference Jacobian, stepping backwards where the forward step leaves the feasible charts."""
    n = eta.size
    h = FD_STEP * math.sqrt(1.0 + float(eta @ eta))
    jacobian = np.empty((n, n))
    for k in range(n):
        trial = eta.copy()
        trial[k] += h
        shifted = residual(trial)
        if shifted is not None:
            jacobian[:, k] = (shifted - current) / h
            continue
        trial[k] -= 2 * h
        shifted = residual(trial)
        if shifted is None:
            raise NonConvergence("covector sits on the edge of the feasible charts")
        jacobian[:, k] = (current - shifted) / h
    return jacobian


def _line_search(residual, eta: np.ndarray, step: np.ndarray, norm: float) -> Optional[Tuple[float, np.ndarray]]:
    """Halve the step until the residual decreases; None below the damping floor."""
    damping = 1.0
    while damping >= DAMPING_FLOOR:
        trial = residual(eta + damping * step)
        if trial is not None and np.linalg.norm(trial) < norm:
            return damping, trial
        damping /= 2
    return None


def standardize(mb: MarkedBody, tol: float = STANDARD_TOL) -> StandardizationResult:
    """Projective map g with g.(body, x) a standard pair.

    The chart in which x is the centroid is found by damped Newton on its
    covector, then the inertia ellipsoid is made the unit ball with the
    symmetric square root, which fixes the orthogonal ambiguity.

    Raises:
        NonConvergence: Newton exceeded its step budget or damping floor.
        DegenerateBody: the body is not properly convex.
    """
    body = mb.body
    if not body.properly_convex:
        raise DegenerateBody("only properly convex bodies can be standardized")
    n = body.dim
    lifted = body.lift(mb.basepoint)
    rotate = det_normalize(np.hstack([null_space(lifted.reshape(1, -1)), (lifted / np.linalg.norm(lifted))[:, None]]).T)
    moved = body.transform(rotate)

    def residual(eta: np.ndarray) -> Optional[np.ndarray]:
        try:
            return centroid(moved, AffineChart(_chart_frame(eta)))
        except UnboundedInChart:
            return None

    eta = _initial_covector(moved)
    current = residual(eta)
    if current is None:
        raise DegenerateBody("initial chart does not contain the body")
    scale = second_moment_matrix(moved, None, AffineChart(_chart_frame(eta))).gyration_radius()
    steps = 0
    while np.linalg.norm(current) > NEWTON_TOL * scale:
        if steps >= MAX_NEWTON_STEPS:
            raise NonConvergence(f"no centroid chart after {MAX_NEWTON_STEPS} Newton steps")
        jacobian = _jacobian(residual, eta, current)
        step = np.linalg.lstsq(jacobian, -current, rcond=None)[0]
        accepted = _line_search(residual, eta, step, float(np.linalg.norm(current)))
        if accepted is None:
            if np.linalg.norm(current) <= NOISE_TOL * scale:
                break
            raise NonConvergence(f"damping fell below 2^-20 at residual {np.linalg.norm(current):.3e}")
        damping, current = accepted
        eta = eta + damping * step
        steps += 1
        logger.debug(f"newton step {steps}: residual {np.linalg.norm(current):.3e}, damping {damping:g}")

    frame = _chart_frame(eta)
    charted = moved.transform(det_normalize(frame))
    moments = second_moment_matrix(charted, None, AffineChart.standard(n))
    translate = np.eye(n + 1)
    translate[:n, n] = -moments.centroid
    linear = np.eye(n + 1)
    linear[:n, :n] = np.linalg.inv(inertia_shape(moments))
    g = det_normalize(linear @ translate @ frame @ rotate.matrix)
    image = body.transform(g)
    certificate = is_standard(MarkedBody(image, apply_map(g, mb.basepoint)), tol)
    covector = np.append(eta, 1.0) @ rotate.matrix
    logger.debug(f"standardized after {steps} Newton steps; certificate valid={certificate.valid}")
    return StandardizationResult(g, certificate, covector / np.linalg.norm(covector), steps,
                                 float(np.linalg.norm(current)), image)


def sandwich_radii(body: ConvexBody, tol: float = STANDARD_TOL) -> SandwichRadii:
    """Radii r <= R of the Euclidean balls about O squeezing a standardized body.

    Raises:
        NotStandard: (body, O) is not a standard pair at tolerance tol.
    """
    n = body.dim
    chart = AffineChart.standard(n)
    try:
        certificate = is_standard(MarkedBody(body, chart.origin), tol)
    except PointOutsideBody as e:
        raise NotStandard("origin is not interior to the body") from e
    if not certificate.valid:
        raise NotStandard("sandwich radii need a standardized body")
    if isinstance(body, Ellipsoid):
        _, shape = body.affine_shape(chart)
        axes = 1.0 / np.sqrt(np.linalg.eigvalsh(shape))
        return SandwichRadii(float(axes.min()), float(axes.max()))
    _, offsets = chart_halfspaces(body.facets, chart)
    vertices = body.affine_vertices(chart)
    return SandwichRadii(float(np.min(np.abs(offsets))), float(np.max(np.linalg.norm(vertices, axis=1))))


def _support(body: ConvexBody, directions: np.ndarray) -> np.ndarray:
    chart = AffineChart.standard(body.dim)
    if isinstance(body, Ellipsoid):
        center, shape = body.affine_shape(chart)
        spread = np.linalg.inv(shape)
        return directions @ center + np.sqrt(np.einsum("ki,ij,kj->k", directions, spread, directions))
    return np.max(directions @ body.affine_vertices(chart).T, axis=1)


def support_hausdorff(first: ConvexBody, second: ConvexBody, directions: int = 720, seed: int = DEFAULT_SEED) -> float:
    """Hausdorff distance in the standard chart, as the max gap of support functions."""
    n = first.dim
    if n == 2:
        angles = 2 * np.pi * np.arange(directions) / directions
        u = np.column_stack([np.cos(angles), np.sin(angles)])
    else:
        u = np.random.default_rng(seed).standard_normal((directions, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
    return float(np.max(np.abs(_support(first, u) - _support(second, u))))


def orthogonal_defect(g: ProjectiveMap) -> float:
    """Frobenius distance from the matrix of g to the orthogonal group."""
    u, _ = polar(g.matrix)
    return float(np.linalg.norm(g.matrix - u))
