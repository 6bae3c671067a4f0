"""
Verify module - the invariant checks of every module, runnable without pytest.

Checks are grouped by selector; each raises VerificationError (or a library
error) on failure and is reported under its dotted identifier.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from benzecri import (
    ball_moment,
    inertia_ellipsoid,
    is_standard,
    orthogonal_defect,
    sandwich_radii,
    second_moment_matrix,
    standardize,
)
from convex import (
    Ellipsoid,
    Location,
    MarkedBody,
    Polytope,
    chord_by_bisection,
    chord_endpoints,
    contains,
    is_automorphism,
    make_family,
)
from core import (
    DEFAULT_SEED,
    DegenerateConfiguration,
    HilbertLabError,
    NotGenerating,
    NotTransitive,
    VerificationError,
)
from group_lab import (
    GeneratorSet,
    PermutationAction,
    apply_permutation_word,
    nilpotency_witness,
    orbit_spread,
    pointed_actions,
    proximity_gauge,
    symmetric_permutations,
    word_ball,
    zassenhaus_descent,
)
from hilbert import ball_boundary_samples, distance
from projective import AffineChart, ProjectivePoint, apply_map, chart_coords, cross_ratio, det_normalize, embed
from scenario import ScanReport, Scenario, dump_json, run_scenario, stabilizer_experiment

logger = logging.getLogger("hilbertlab.verify")

SELECTORS = ["projective", "convex", "metric", "benzecri", "group", "orbit", "scan"]
CHECKS: Dict[str, List] = {name: [] for name in SELECTORS}


@dataclass
class CheckResult:
    identifier: str
    passed: bool
    detail: str = ""


@dataclass
class VerifySummary:
    selector: str
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[str]:
        return [r.identifier for r in self.results if not r.passed]


def ensure(condition: bool, detail: object = None):
    if not condition:
        raise VerificationError(str(detail) if detail is not None else "check failed")


def check(identifier: str):
    """Register a check under the selector given by its identifier prefix."""
    def register(fn: Callable[[np.random.Generator], None]):
        CHECKS[identifier.split(".")[0]].append((identifier, fn))
        return fn
    return register


def _square() -> Polytope:
    return Polytope.from_vertices([[-1, -1], [1, -1], [1, 1], [-1, 1]])


def _triangle() -> Polytope:
    return Polytope.from_vertices([[0, 0], [1, 0], [0, 1]])


def _random_polygon(rng: np.random.Generator) -> Polytope:
    angles = np.sort(rng.uniform(0, 2 * math.pi, size=int(rng.integers(3, 9))))
    radii = rng.uniform(0.5, 1.5, size=angles.size)
    return Polytope.from_vertices(np.column_stack([radii * np.cos(angles), radii * np.sin(angles)]))


def _interior_points(body, rng: np.random.Generator, count: int) -> List[ProjectivePoint]:
    """Rejection samples from the body's storage chart bounding box."""
    if isinstance(body, Polytope):
        w = body.affine_vertices(body.chart)
        low, high = w.min(axis=0), w.max(axis=0)
    else:
        low, high = -np.ones(body.dim), np.ones(body.dim)
    points = []
    while len(points) < count:
        v = rng.uniform(low, high)
        if body.defect(v) < -1e-3:
            points.append(embed(body.chart, v))
    return points


def _near_identity(rng: np.random.Generator, n: int, spread: float):
    return det_normalize(np.eye(n + 1) + spread * rng.standard_normal((n + 1, n + 1)))


# --- projective ---
@check("projective.cross_ratio_value")
def _cross_ratio_value(rng):
    a, b, x, y = (ProjectivePoint.from_affine(v) for v in ([0, 0], [3, 0], [1, 0], [2, 0]))
    ensure(abs(cross_ratio(a, b, x, y) - 0.25) <= 1e-12)


@check("projective.cross_ratio_invariance")
def _cross_ratio_invariance(rng):
    points = [ProjectivePoint.from_affine(v) for v in ([0, 0], [3, 0], [1, 0], [2, 0])]
    for _ in range(20):
        g = _near_identity(rng, 2, 0.2)
        moved = [apply_map(g, p) for p in points]
        ensure(abs(cross_ratio(*moved) - 0.25) <= 1e-10)


@check("projective.det_normalize")
def _det_normalize(rng):
    g = det_normalize(2 * np.eye(3))
    ensure(g.is_identity(1e-12) and g.det_sign == 1)
    ensure(det_normalize(np.diag([-1, 1, 1])).det_sign == -1)


@check("projective.chart_coords")
def _chart_coords(rng):
    chart = AffineChart.standard(2)
    ensure(np.allclose(chart_coords(chart, ProjectivePoint([2, 4, 2])), [1, 2]))
    ensure(np.allclose(chart_coords(chart, ProjectivePoint([0, 0, 1])), [0, 0]))


# --- convex ---
@check("convex.locations")
def _locations(rng):
    disk = Ellipsoid.unit_ball(2)
    ensure(contains(disk, ProjectivePoint.from_affine([0, 0])) is Location.INTERIOR)
    ensure(contains(disk, ProjectivePoint.from_affine([1, 0])) is Location.BOUNDARY)
    ensure(contains(_square(), ProjectivePoint.from_affine([2, 0])) is Location.EXTERIOR)


@check("convex.chord_methods")
def _chord_methods(rng):
    for body in (Ellipsoid.unit_ball(2), _square(), _triangle()):
        x, y = _interior_points(body, rng, 2)
        a, b = chord_endpoints(body, x, y)
        a_bisected, b_bisected = chord_by_bisection(body, x, y)
        ensure(a == a_bisected and b == b_bisected)


@check("convex.proper_convexity")
def _proper_convexity(rng):
    ensure(_square().properly_convex and Ellipsoid.unit_ball(3).properly_convex)
    ensure(not Polytope.from_halfspaces([[1, 0, 1], [-1, 0, 1]]).properly_convex)


@check("convex.family_generators")
def _family_generators(rng):
    disk = make_family("ellipsoid", 2, {"boosts": [[0, 0.3]], "rotations": [[0, 1, 0.7]]})
    simplex = make_family("simplex", 2, {"diagonals": [[2.0, 1.0, 0.5]], "permutations": [[1, 2, 0]]})
    for family in (disk, simplex):
        ensure(all(is_automorphism(family.body, g) for g in family.generators))
    ensure(not is_automorphism(disk.body, det_normalize(np.diag([2.0, 1.0, 1.0]))))


# --- metric ---
def _klein(x: np.ndarray, y: np.ndarray) -> float:
    ratio = (1 - x @ y) / math.sqrt((1 - x @ x) * (1 - y @ y))
    return math.acosh(max(ratio, 1.0))


@check("metric.klein_model")
def _klein_model(rng):
    disk = Ellipsoid.unit_ball(2)
    for x, y in zip(_interior_points(disk, rng, 200), _interior_points(disk, rng, 200)):
        expected = _klein(x.affine(), y.affine())
        ensure(abs(distance(disk, x, y).value - expected) <= 1e-7 * max(1.0, expected))


@check("metric.axioms")
def _axioms(rng):
    for body in (Ellipsoid.unit_ball(2), _square(), _triangle()):
        points = _interior_points(body, rng, 90)
        for x, y, z in zip(points[0::3], points[1::3], points[2::3]):
            xy, yx = distance(body, x, y).value, distance(body, y, x).value
            ensure(abs(xy - yx) <= 1e-10 * max(1.0, xy))
            ensure(distance(body, x, z).value <= xy + distance(body, y, z).value + 1e-9)
            ensure(distance(body, x, x).value == 0.0)


@check("metric.projective_invariance")
def _projective_invariance(rng):
    for body in (_square(), Ellipsoid.unit_ball(2)):
        x, y = _interior_points(body, rng, 2)
        before = distance(body, x, y).value
        for _ in range(10):
            g = _near_identity(rng, 2, 0.1)
            after = distance(body.transform(g), apply_map(g, x), apply_map(g, y)).value
            ensure(abs(after - before) <= 1e-8 * max(1.0, before))


@check("metric.klein_ball")
def _klein_ball(rng):
    samples = ball_boundary_samples(Ellipsoid.unit_ball(2), ProjectivePoint.from_affine([0, 0]), 0.5, 64)
    radii = np.linalg.norm([p.affine() for p in samples], axis=1)
    ensure(np.allclose(radii, math.tanh(0.5), atol=1e-9))


# --- benzecri ---
@check("benzecri.closed_form_moments")
def _closed_form_moments(rng):
    chart = AffineChart.standard(2)
    disk = second_moment_matrix(Ellipsoid.unit_ball(2), np.zeros(2), chart)
    ensure(np.allclose(disk.second_moment, math.pi / 4 * np.eye(2), atol=1e-12))
    square = second_moment_matrix(_square(), np.zeros(2), chart)
    ensure(np.allclose(square.second_moment, 4 / 3 * np.eye(2), atol=1e-12))


@check("benzecri.moment_matching")
def _moment_matching(rng):
    chart = AffineChart.standard(2)
    for body in (_square(), _triangle(), _random_polygon(rng)):
        ellipsoid = inertia_ellipsoid(body, chart)
        own = second_moment_matrix(body, None, chart)
        matched = second_moment_matrix(ellipsoid, own.centroid, chart)
        ensure(np.allclose(matched.second_moment, own.second_moment, rtol=1e-9, atol=1e-12))


@check("benzecri.standardize_polygons")
def _standardize_polygons(rng):
    for _ in range(100):
        body = _random_polygon(rng)
        result = standardize(MarkedBody(body, _interior_points(body, rng, 1)[0]))
        ensure(result.certificate.valid, result.certificate.to_dict())
        radii = sandwich_radii(result.body)
        ensure(0 < radii.inner <= 1 + 1e-9 and radii.outer >= 1 - 1e-9, radii)


@check("benzecri.idempotence")
def _idempotence(rng):
    body = _random_polygon(rng)
    first = standardize(MarkedBody(body, _interior_points(body, rng, 1)[0]))
    again = standardize(MarkedBody(first.body, AffineChart.standard(2).origin))
    ensure(orthogonal_defect(again.map) <= 1e-5)


@check("benzecri.standard_disk")
def _standard_disk(rng):
    disk = Ellipsoid.unit_ball(2)
    ensure(is_standard(MarkedBody(disk, ProjectivePoint.from_affine([0, 0]))).valid)
    ensure(not is_standard(MarkedBody(_square(), ProjectivePoint.from_affine([0, 0]))).valid)
    radii = sandwich_radii(disk)
    ensure(abs(radii.inner - 1) <= 1e-9 and abs(radii.outer - 1) <= 1e-9)
    ensure(abs(ball_moment(2) - math.pi / 4) <= 1e-15)


# --- group ---
SANOV = [[[1, 2], [0, 1]], [[1, 0], [2, 1]]]
HEISENBERG = [[[1, 1, 0], [0, 1, 0], [0, 0, 1]], [[1, 0, 0], [0, 1, 1], [0, 0, 1]]]


@check("group.word_balls")
def _word_balls(rng):
    quarter = GeneratorSet.from_matrices([[[0, -1, 0], [1, 0, 0], [0, 0, 1]]])
    ensure(len(word_ball(quarter.symmetrized(), 5)) == 4)
    ensure(len(word_ball(GeneratorSet.from_matrices(SANOV).symmetrized(), 2)) == 17)


@check("group.gauge")
def _gauge(rng):
    quarter = det_normalize([[0, -1, 0], [1, 0, 0], [0, 0, 1]])
    ensure(abs(proximity_gauge(det_normalize(np.eye(3)), quarter) - 2.0) <= 1e-12)
    g1, g2, h = (_near_identity(rng, 2, 0.3) for _ in range(3))
    ensure(abs(proximity_gauge(h @ g1, h @ g2) - proximity_gauge(g1, g2)) <= 1e-10)


@check("group.nilpotency")
def _nilpotency(rng):
    heisenberg = nilpotency_witness(GeneratorSet.from_matrices(HEISENBERG))
    ensure(heisenberg.label() == "Nilpotent(2)", heisenberg.to_dict())
    diagonal = nilpotency_witness(GeneratorSet.from_matrices([np.diag([2.0, 1.0, 0.5]), np.diag([1.0, 2.0, 0.5])]))
    ensure(diagonal.label() == "Nilpotent(1)", diagonal.to_dict())
    sanov = nilpotency_witness(GeneratorSet.from_matrices(SANOV), class_bound=6)
    ensure(sanov.kind == "NotNilpotent" and sanov.path == "exact-integer", sanov.to_dict())
    flat = nilpotency_witness(GeneratorSet.from_matrices(HEISENBERG), class_bound=2)
    ensure(flat.kind == "Inconclusive", flat.to_dict())


@check("group.descent")
def _descent(rng):
    small = GeneratorSet.from_matrices([[[1, 0.02, 0], [0, 1, 0], [0, 0, 1]], [[1, 0, 0], [0, 1, 0.02], [0, 0, 1]]])
    ensure(zassenhaus_descent(small).kind == "Contracting")
    ensure(zassenhaus_descent(GeneratorSet.from_matrices(SANOV)).kind == "NonContracting")


# --- orbit ---
def _check_spread(action: PermutationAction, perms, m: int, e: int):
    witnesses = orbit_spread(action, perms, m, e)
    symmetric = symmetric_permutations(perms)
    images = {apply_permutation_word(symmetric, w.word, e) for w in witnesses}
    ensure(len(witnesses) == min(m + 1, action.size) == len(images))
    ensure(all(len(w.word) <= m for w in witnesses))


@check("orbit.cyclic")
def _cyclic(rng):
    shift = tuple((i + 1) % 5 for i in range(5))
    action = PermutationAction(5, (shift,))
    _check_spread(action, [shift], 2, 0)
    swaps = [(1, 0, 2), (0, 2, 1)]
    _check_spread(PermutationAction(3, tuple(swaps)), swaps, 2, 0)


@check("orbit.exhaustive")
def _exhaustive(rng):
    for free, involutions in [(1, 0), (2, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 1), (1, 2)]:
        for size in range(1, 5):
            for action, perms in pointed_actions(size, free, involutions):
                for m in range(1, max(size, 2)):
                    _check_spread(action, perms, m, 0)


@check("orbit.random_actions")
def _random_actions(rng):
    tested = 0
    while tested < 200:
        size = int(rng.integers(1, 9))
        perms = [tuple(int(i) for i in rng.permutation(size)) for _ in range(int(rng.integers(1, 3)))]
        action = PermutationAction(size, tuple(perms))
        try:
            for m in range(1, max(size, 2)):
                _check_spread(action, perms, m, int(rng.integers(0, size)))
        except (NotTransitive, NotGenerating):
            continue
        tested += 1


# --- scan ---
def _boost_scenario() -> Scenario:
    return Scenario.model_validate({
        "schema": "hilbertlab/v1",
        "family": {"tag": "ellipsoid", "n": 2, "parameters": {"boosts": [[0, 2.0], [1, 2.0]]}},
        "epsilons": [0.1, 0.5, 2.0],
        "depth": 3,
    })


@check("scan.klein_boosts")
def _klein_boosts(rng):
    report = run_scenario(_boost_scenario())
    sizes = [row.subgroup_size for row in report.rows]
    ensure(sizes[:2] == [1, 1] and sizes[2] >= 3, sizes)
    ensure([row.verdict for row in report.rows[:2]] == ["Nilpotent", "Nilpotent"])
    ensure(report.epsilon_star > 0)


@check("scan.determinism")
def _determinism(rng):
    first = dump_json(run_scenario(_boost_scenario()))
    ensure(first == dump_json(run_scenario(_boost_scenario())))
    ensure(dump_json(ScanReport.model_validate_json(first)) == first)


@check("scan.stabilizer_envelope")
def _stabilizer_envelope(rng):
    report = stabilizer_experiment([("ellipsoid", 2), ("simplex", 2)], [0.01, 0.1, 0.5], samples=200,
                                   seed=DEFAULT_SEED)
    for family in ("ellipsoid:2", "simplex:2"):
        gauges = [r.stabilizer_gauge for r in report.rows if r.family == family and r.stabilizer_gauge is not None]
        ensure(gauges == sorted(gauges), gauges)
    smallest = next(r for r in report.rows if r.family == "ellipsoid:2")
    ensure(smallest.samples > 0 and smallest.stabilizer_gauge < 0.05, smallest)


def verify_suite(selector: str = "all", seed: int = DEFAULT_SEED) -> VerifySummary:
    """Run the checks of one selector (or all of them) with a seeded generator each."""
    if selector != "all" and selector not in CHECKS:
        raise DegenerateConfiguration(f"unknown selector {selector!r}; expected 'all' or one of {SELECTORS}")
    groups = SELECTORS if selector == "all" else [selector]
    summary = VerifySummary(selector)
    for group in groups:
        for identifier, fn in CHECKS[group]:
            detail: Optional[str] = None
            try:
                fn(np.random.default_rng(seed))
            except VerificationError as e:
                detail = str(e)
            except HilbertLabError as e:
                detail = f"{type(e).__name__}: {e}"
            summary.results.append(CheckResult(identifier, detail is None, detail or ""))
            if detail is None:
                logger.debug(f"{identifier}: ok")
            else:
                logger.warning(f"{identifier}: FAILED {detail}")
    logger.info(f"verify {selector}: {len(summary.results) - len(summary.failures)}/{len(summary.results)} passed")
    return summary
