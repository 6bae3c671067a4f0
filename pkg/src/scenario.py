"""
Scenario module - versioned scenario files, Margulis scans, the stabilizer
experiment and their JSON / CSV reports.
"""
import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from benzecri import standardize
from convex import BodyFamily, MarkedBody, body_from_json, boost, is_automorphism, make_family, rotation
from core import (
    BALL_CAP,
    DEFAULT_SEED,
    SCHEMA_VERSION,
    THREADS,
    BallCapExceeded,
    NotAnAutomorphism,
    SchemaError,
)
from group_lab import (
    DISPLACEMENT_SLACK,
    GeneratorSet,
    NilpotencyVerdict,
    ball_displacements,
    identity_gauge,
    nilpotency_witness,
    proximity_gauge,
    word_ball,
    zassenhaus_descent,
)
from hilbert import distance
from projective import ProjectiveMap, ProjectivePoint, apply_map, det_normalize

logger = logging.getLogger("hilbertlab.scenario")

CSV_COLUMNS = ["epsilon", "subgroup_size", "min_displacement", "verdict", "class", "witness_length"]


# --- Scenario schema ---
class FamilyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tag: str
    n: int = Field(2, ge=2)
    parameters: Dict[str, Any] = Field(default_factory=dict)


class ScanGrid(BaseModel):
    """Generator parameter grid: one make_family parameter dict per configuration."""
    model_config = ConfigDict(extra="forbid")

    configurations: List[Dict[str, Any]] = Field(min_length=1)


class OutputPaths(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    json_path: Optional[str] = Field(None, alias="json")
    csv_path: Optional[str] = Field(None, alias="csv")


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: str = Field(SCHEMA_VERSION, alias="schema")
    body: Optional[Dict[str, Any]] = None
    family: Optional[FamilyConfig] = None
    basepoint: Optional[List[float]] = None
    generators: List[List[List[float]]] = Field(default_factory=list)
    epsilons: List[float]
    depth: int = Field(3, ge=1)
    class_bound: int = Field(6, ge=2)
    seed: int = DEFAULT_SEED
    scan: Optional[ScanGrid] = None
    outputs: OutputPaths = Field(default_factory=OutputPaths)

    @field_validator("schema_version")
    @classmethod
    def check_schema(cls, v: str) -> str:
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema {v!r}, expected {SCHEMA_VERSION!r}")
        return v

    @field_validator("epsilons")
    @classmethod
    def check_epsilons(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("epsilon grid is empty")
        if v[0] <= 0 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("epsilon grid must be strictly increasing and positive")
        return v

    @model_validator(mode="after")
    def check_source(self) -> "Scenario":
        if (self.body is None) == (self.family is None):
            raise ValueError("give exactly one of 'body' and 'family'")
        if self.scan is not None and self.family is None:
            raise ValueError("a scan block needs a family")
        return self


def load_scenario(source: str) -> Scenario:
    """Parse a scenario from a file path or a JSON string.

    Raises:
        SchemaError: unreadable file, malformed JSON or schema violation.
    """
    text = source
    if not source.lstrip().startswith("{"):
        try:
            with open(source, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise SchemaError(f"cannot read scenario {source}: {e}") from e
    try:
        return Scenario.model_validate_json(text)
    except ValidationError as e:
        raise SchemaError(f"invalid scenario: {e}") from e


# --- Reports ---
class ScanRow(BaseModel):
    epsilon: float
    subgroup_size: int
    min_displacement: Optional[float] = None
    verdict: str
    nilpotency_class: Optional[int] = None
    witness: Optional[List[int]] = None
    witness_length: int = 0
    path: str
    reason: Optional[str] = None
    descent: str
    descent_ratio: Optional[float] = None


class PairRow(BaseModel):
    """Displacement against matrix proximity for one word-ball element."""
    word: List[int]
    displacement: Optional[float] = None
    identity_gauge: Optional[float] = None
    stabilizer_gauge: Optional[float] = None


class ScanReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: str = Field(SCHEMA_VERSION, alias="schema")
    label: str
    parameters: Dict[str, Any] = Field(default_factory=dict)
    seed: int
    basepoint: List[float]
    depth: int
    class_bound: int
    rows: List[ScanRow]
    pairs: List[PairRow] = Field(default_factory=list)
    monotone: bool
    epsilon_star: float


class MargulisScanReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: str = Field(SCHEMA_VERSION, alias="schema")
    family: str
    n: int
    epsilons: List[float]
    configurations: List[ScanReport]
    epsilon_star: float
    monotone: bool


class StabilizerRow(BaseModel):
    family: str
    epsilon: float
    samples: int
    identity_gauge: Optional[float] = None
    stabilizer_gauge: Optional[float] = None


class StabilizerReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: str = Field(SCHEMA_VERSION, alias="schema")
    seed: int
    samples: int
    rows: List[StabilizerRow]


def _finite(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def dump_json(report: BaseModel) -> str:
    return report.model_dump_json(indent=2, by_alias=True)


def _csv_rows(report: ScanReport) -> List[List[Any]]:
    return [[r.epsilon, r.subgroup_size, "" if r.min_displacement is None else r.min_displacement,
             r.verdict, "" if r.nilpotency_class is None else r.nilpotency_class, r.witness_length]
            for r in report.rows]


def write_report(report: BaseModel, json_path: Optional[str], csv_path: Optional[str]):
    """JSON via pydantic, CSV with the fixed column list (scan reports get a configuration column)."""
    if json_path:
        os.makedirs(os.path.dirname(os.path.abspath(json_path)), exist_ok=True)
        with open(json_path, "w", encoding="utf-8") as f:
            f.write(dump_json(report))
        logger.info(f"report written to {json_path}")
    if not csv_path:
        return
    os.makedirs(os.path.dirname(os.path.abspath(csv_path)), exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if isinstance(report, MargulisScanReport):
            writer.writerow(["configuration"] + CSV_COLUMNS)
            for index, config in enumerate(report.configurations):
                writer.writerows([[index] + row for row in _csv_rows(config)])
        elif isinstance(report, ScanReport):
            writer.writerow(CSV_COLUMNS)
            writer.writerows(_csv_rows(report))
        elif isinstance(report, StabilizerReport):
            writer.writerow(["family", "epsilon", "samples", "identity_gauge", "stabilizer_gauge"])
            writer.writerows([[r.family, r.epsilon, r.samples,
                               "" if r.identity_gauge is None else r.identity_gauge,
                               "" if r.stabilizer_gauge is None else r.stabilizer_gauge] for r in report.rows])
    logger.info(f"CSV written to {csv_path}")


# --- Evaluation ---
def parse_point(coords: Sequence[float], n: int) -> ProjectivePoint:
    """n coordinates are affine (standard chart), n+1 are homogeneous."""
    if len(coords) == n:
        return ProjectivePoint.from_affine(coords)
    if len(coords) == n + 1:
        return ProjectivePoint(np.asarray(coords, dtype=float))
    raise SchemaError(f"point {list(coords)} has neither {n} nor {n + 1} coordinates")


def _nearest_stabilizer(stabilizer: Sequence[ProjectiveMap], g: ProjectiveMap) -> Optional[float]:
    if not stabilizer:
        return None
    return min(proximity_gauge(k, g) for k in stabilizer)


def _safe_verdict(S: GeneratorSet, class_bound: int) -> NilpotencyVerdict:
    try:
        return nilpotency_witness(S, class_bound)
    except BallCapExceeded as e:
        logger.warning(f"commutator layers overflowed: {e}")
        return NilpotencyVerdict("Inconclusive", "floating", reason=str(e))


def epsilon_star(rows: Sequence[ScanRow]) -> float:
    """Largest grid epsilon up to which every verdict is Nilpotent (0 if the first is not)."""
    star = 0.0
    for row in rows:
        if row.verdict != "Nilpotent":
            break
        star = row.epsilon
    return star


def _monotone(rows: Sequence[ScanRow]) -> bool:
    failed = False
    for row in rows:
        if row.verdict == "NotNilpotent":
            failed = True
        elif failed and row.verdict == "Nilpotent":
            return False
    return True


def evaluate(mb: MarkedBody, S: GeneratorSet, epsilons: Sequence[float], depth: int, class_bound: int,
             stabilizer: Sequence[ProjectiveMap] = (), cap: int = BALL_CAP) -> Tuple[List[ScanRow], List[PairRow]]:
    """Scan rows per epsilon and the displacement/gauge table of the word ball."""
    n = mb.body.dim
    generators = S if S.elements else GeneratorSet([ProjectiveMap.identity(n)])
    ball = word_ball(generators.symmetrized(), depth, cap)
    moved = ball_displacements(mb, ball)
    rows = []
    for epsilon in epsilons:
        chosen = [(e, d) for e, d in zip(ball, moved) if d <= epsilon + DISPLACEMENT_SLACK]
        subgroup = GeneratorSet([e.map for e, _ in chosen], symmetric=False)
        verdict = _safe_verdict(subgroup, class_bound)
        descent = zassenhaus_descent(subgroup)
        nontrivial = [d for e, d in chosen if e.word]
        rows.append(ScanRow(
            epsilon=epsilon,
            subgroup_size=len(chosen),
            min_displacement=min(nontrivial) if nontrivial else None,
            verdict=verdict.kind,
            nilpotency_class=verdict.nilpotency_class,
            witness=list(verdict.witness) if verdict.witness is not None else None,
            witness_length=len(verdict.witness) if verdict.witness is not None else 0,
            path=verdict.path,
            reason=verdict.reason,
            descent=descent.kind,
            descent_ratio=_finite(descent.ratio),
        ))
        logger.debug(f"epsilon {epsilon}: {len(chosen)} elements, {verdict.label()}, {descent.kind}")
    pairs = [PairRow(word=list(e.word), displacement=_finite(d), identity_gauge=_finite(identity_gauge(e.map)),
                     stabilizer_gauge=_nearest_stabilizer(stabilizer, e.map))
             for e, d in zip(ball, moved)]
    return rows, pairs


def _generators(family: Optional[BodyFamily], body, matrices) -> GeneratorSet:
    extra = [det_normalize(m) for m in matrices]
    for g in extra:
        if not is_automorphism(body, g):
            raise NotAnAutomorphism(f"generator {g.to_list()} does not preserve the body")
    base = list(family.generators) if family is not None else []
    return GeneratorSet(base + extra)


def _scan_one(scenario: Scenario, parameters: Dict[str, Any], label: str) -> ScanReport:
    if scenario.family is not None:
        family = make_family(scenario.family.tag, scenario.family.n, parameters)
        body, stabilizer = family.body, family.stabilizer
        default_point = family.center
    else:
        family = None
        body = body_from_json(scenario.body)
        stabilizer = []
        default_point = body.interior_point()
    point = parse_point(scenario.basepoint, body.dim) if scenario.basepoint else default_point
    mb = MarkedBody(body, point)
    S = _generators(family, body, scenario.generators)
    rows, pairs = evaluate(mb, S, scenario.epsilons, scenario.depth, scenario.class_bound, stabilizer)
    return ScanReport(label=label, parameters=parameters, seed=scenario.seed, basepoint=point.to_list(),
                      depth=scenario.depth, class_bound=scenario.class_bound, rows=rows, pairs=pairs,
                      monotone=_monotone(rows), epsilon_star=epsilon_star(rows))


def run_scenario(scenario: Scenario) -> ScanReport:
    """Evaluate a single scenario and write its outputs."""
    label = scenario.family.tag if scenario.family is not None else scenario.body.get("type", "body")
    parameters = scenario.family.parameters if scenario.family is not None else {}
    logger.info(f"running scenario on {label} with {len(scenario.epsilons)} epsilons, depth {scenario.depth}")
    report = _scan_one(scenario, parameters, label)
    write_report(report, scenario.outputs.json_path, scenario.outputs.csv_path)
    return report


def margulis_scan(scenario: Scenario, threads: int = THREADS) -> MargulisScanReport:
    """Run every configuration of the scenario's scan grid and aggregate epsilon*.

    Configurations run independently on a thread pool; the report keeps grid order.
    """
    if scenario.scan is None or scenario.family is None:
        raise SchemaError("margulis scan needs a family and a scan block")
    configurations = [{**scenario.family.parameters, **c} for c in scenario.scan.configurations]
    logger.info(f"margulis scan over {len(configurations)} configurations with {threads} threads")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        reports = list(pool.map(lambda pc: _scan_one(scenario, pc[1], f"{scenario.family.tag}[{pc[0]}]"),
                                enumerate(configurations)))
    star = min(r.epsilon_star for r in reports)
    report = MargulisScanReport(family=scenario.family.tag, n=scenario.family.n, epsilons=scenario.epsilons,
                                configurations=reports, epsilon_star=star,
                                monotone=all(r.monotone for r in reports))
    write_report(report, scenario.outputs.json_path, scenario.outputs.csv_path)
    return report


# --- Stabilizer experiment ---
def _translations(tag: str, n: int, targets: np.ndarray, rng: np.random.Generator) -> List[ProjectiveMap]:
    """Automorphisms with prescribed displacement at the family center."""
    maps = []
    for d in targets:
        if tag == "ellipsoid":
            direction = rng.standard_normal(n)
            direction /= np.linalg.norm(direction)
            align = _frame_from(direction)
            maps.append(align @ boost(n, 0, float(d)) @ align.inverse())
        elif tag == "simplex":
            s = rng.standard_normal(n + 1)
            s -= s.mean()
            s *= 2 * d / (s.max() - s.min())
            maps.append(det_normalize(np.diag(np.exp(s))))
        else:
            raise NotAnAutomorphism(f"family {tag!r} has no continuous automorphisms to sample")
    return maps


def _frame_from(direction: np.ndarray) -> ProjectiveMap:
    """Orthogonal map of the ball fixing the center and sending e_1 to direction."""
    n = direction.size
    q, _ = np.linalg.qr(np.column_stack([direction, np.eye(n)[:, :n - 1]]))
    if q[:, 0] @ direction < 0:
        q[:, 0] = -q[:, 0]
    m = np.eye(n + 1)
    m[:n, :n] = q
    return det_normalize(m)


def _stabilizer_samples(family: BodyFamily, count: int, rng: np.random.Generator) -> List[ProjectiveMap]:
    """Stabilizer elements drawn independently of the grid they are scored against.

    The ball gets plane rotations at uniform angles, off the listed grid,
    composed with the reflection half the time. The other families list
    their finite stabilizer in full.
    """
    if not family.stabilizer:
        return [ProjectiveMap.identity(family.body.dim)] * count
    if family.tag != "ellipsoid":
        return [family.stabilizer[i] for i in rng.integers(0, len(family.stabilizer), size=count)]
    n = family.body.dim
    planes = [(i, j) for i in range(n) for j in range(i + 1, n)]
    reflection = det_normalize(np.diag([-1.0] + [1.0] * n))
    samples = []
    for _ in range(count):
        i, j = planes[int(rng.integers(0, len(planes)))]
        k = rotation(n, i, j, float(rng.uniform(0, 2 * math.pi)))
        samples.append(k @ reflection if rng.random() < 0.5 else k)
    return samples


def stabilizer_experiment(families: Sequence[Tuple[str, int]], epsilons: Sequence[float], samples: int = 200,
                          seed: int = DEFAULT_SEED) -> StabilizerReport:
    """Displacement against proximity on standardized built-in families.

    For each epsilon: the largest gauge to the identity among translation
    samples with displacement <= epsilon, and the largest gauge to the nearest
    known stabilizer element among samples composed with a stabilizer element.
    """
    rng = np.random.default_rng(seed)
    low, high = math.log(min(epsilons) / 2), math.log(max(epsilons))
    rows = []
    for tag, n in families:
        family = make_family(tag, n)
        g = standardize(family.marked()).map
        g_inv = g.inverse()
        body = family.body.transform(g)
        center = apply_map(g, family.center)

        def conjugate(h: ProjectiveMap) -> ProjectiveMap:
            return g @ h @ g_inv

        stabilizer = [conjugate(k) for k in family.stabilizer]
        targets = np.exp(rng.uniform(low, high, size=samples))
        pure = [conjugate(h) for h in _translations(tag, n, targets, rng)]
        composed = [conjugate(k) @ h for k, h in zip(_stabilizer_samples(family, samples, rng), pure)]
        moved = [distance(body, center, apply_map(h, center)).value for h in pure]
        pure_gauges = [identity_gauge(h) for h in pure]
        stab_gauges = [_nearest_stabilizer(stabilizer, h) for h in composed]
        for epsilon in epsilons:
            within = [k for k, d in enumerate(moved) if d <= epsilon + DISPLACEMENT_SLACK]
            rows.append(StabilizerRow(
                family=f"{tag}:{n}",
                epsilon=epsilon,
                samples=len(within),
                identity_gauge=max((pure_gauges[k] for k in within), default=None),
                stabilizer_gauge=max((stab_gauges[k] for k in within if stab_gauges[k] is not None), default=None),
            ))
        logger.info(f"stabilizer experiment on {tag}:{n} done ({samples} samples)")
    return StabilizerReport(seed=seed, samples=samples, rows=rows)
