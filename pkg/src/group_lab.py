"""
Group lab - word balls, the proximity gauge, epsilon-generated subgroups,
lower central series verdicts, commutator descent and the orbit lemma.

Words are tuples of signed letters: k+1 stands for generator k and -(k+1) for
its inverse. Integral maps with |det| = 1 are carried exactly (object arrays
of Python ints) so that non-nilpotency certificates never rest on rounding.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from convex import MarkedBody, is_automorphism
from core import (
    BALL_CAP,
    BallCapExceeded,
    DegenerateConfiguration,
    InvalidMatrix,
    NotAnAutomorphism,
    NotGenerating,
    NotTransitive,
    PointOutsideBody,
)
from hilbert import distance
from projective import ProjectiveMap, apply_map, det_normalize

logger = logging.getLogger("hilbertlab.group_lab")

DEDUPE_TOL = 1e-9
INVERSE_TOL = 1e-10
DISPLACEMENT_SLACK = 1e-9
SEPARATION = 10.0
DESCENT_KEEP = 64
DESCENT_LAYERS = 8
GROWTH_LAYERS = 3

Word = Tuple[int, ...]


# --- Gauge ---
def proximity_gauge(g: ProjectiveMap, h: ProjectiveMap) -> float:
    """max(|g^-1 h - I|_F, |h^-1 g - I|_F); left-invariant, zero iff g = h."""
    if g.matrix.shape != h.matrix.shape:
        raise InvalidMatrix("gauge between maps of different sizes")
    eye = np.eye(g.matrix.shape[0])
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            forward = np.linalg.norm(np.linalg.solve(g.matrix, h.matrix) - eye)
            backward = np.linalg.norm(np.linalg.solve(h.matrix, g.matrix) - eye)
    except np.linalg.LinAlgError as e:
        raise InvalidMatrix("gauge of a singular map") from e
    return float(max(forward, backward))


def identity_gauge(g: ProjectiveMap, g_inv: Optional[ProjectiveMap] = None) -> float:
    """gauge(I, g), reusing a known inverse when given."""
    eye = np.eye(g.dim + 1)
    g_inv = g.inverse() if g_inv is None else g_inv
    with np.errstate(over="ignore", invalid="ignore"):
        values = (float(np.linalg.norm(g.matrix - eye)), float(np.linalg.norm(g_inv.matrix - eye)))
    # overflowed products count as far from the identity
    return max(values) if all(math.isfinite(v) for v in values) else math.inf


# --- Generator sets ---
@dataclass
class GeneratorSet:
    elements: List[ProjectiveMap]
    symmetric: bool = False

    def __post_init__(self):
        sizes = {g.matrix.shape for g in self.elements}
        if len(sizes) > 1:
            raise InvalidMatrix(f"generators of mixed sizes {sorted(sizes)}")
        if self.symmetric:
            for g in self.elements:
                if self._find(g.inverse()) is None:
                    raise DegenerateConfiguration(f"{g.to_list()} has no inverse in a symmetric set")

    @classmethod
    def from_matrices(cls, matrices: Sequence, symmetric: bool = False) -> "GeneratorSet":
        return cls([det_normalize(m) for m in matrices], symmetric)

    def __len__(self) -> int:
        return len(self.elements)

    def _find(self, g: ProjectiveMap) -> Optional[int]:
        return next((k for k, h in enumerate(self.elements) if proximity_gauge(g, h) <= INVERSE_TOL), None)

    def symmetrized(self) -> "GeneratorSet":
        """The set with every missing inverse appended after the originals."""
        if self.symmetric:
            return self
        merged = GeneratorSet(list(self.elements))
        for g in self.elements:
            inv = g.inverse()
            if merged._find(inv) is None:
                merged.elements.append(inv)
        merged.symmetric = True
        return merged

    def letter(self, signed: int) -> ProjectiveMap:
        if signed == 0 or abs(signed) > len(self.elements):
            raise DegenerateConfiguration(f"letter {signed} outside a set of {len(self.elements)} generators")
        g = self.elements[abs(signed) - 1]
        return g if signed > 0 else g.inverse()

    def to_list(self) -> list:
        return [g.to_list() for g in self.elements]


def evaluate_word(S: GeneratorSet, word: Sequence[int], n: Optional[int] = None) -> ProjectiveMap:
    """Left-to-right product of the word's letters; the empty word is the identity."""
    if n is None:
        if not S.elements:
            raise DegenerateConfiguration("dimension of the empty generator set is unknown")
        n = S.elements[0].dim
    result = ProjectiveMap.identity(n)
    for signed in word:
        result = result @ S.letter(signed)
    return result


def invert_word(word: Sequence[int]) -> Word:
    return tuple(-letter for letter in reversed(word))


# --- Word balls ---
@dataclass
class WordBallElement:
    map: ProjectiveMap
    word: Word


def _key(g: ProjectiveMap) -> Tuple[int, ...]:
    return tuple(int(x) for x in g.exact.flat)


def _prefilter_radius(g: ProjectiveMap) -> float:
    return 1e-6 * (1.0 + float(np.linalg.norm(g.matrix)))


def word_ball(S: GeneratorSet, m: int, cap: int = BALL_CAP) -> List[WordBallElement]:
    """Distinct products of at most m letters, each with its shortlex-first word.

    Raises:
        BallCapExceeded: the ball holds more than cap elements.
    """
    if m < 0:
        raise DegenerateConfiguration("word length must be nonnegative")
    if not S.elements:
        raise DegenerateConfiguration("word ball of an empty generator set")
    n = S.elements[0].dim
    letters = list(range(1, len(S) + 1))
    if not S.symmetric:
        letters += [-k for k in letters]
    moves = {k: S.letter(k) for k in letters}
    exact = all(g.exact is not None for g in moves.values())

    identity = WordBallElement(ProjectiveMap.identity(n), ())
    ball = [identity]
    seen: Dict[Tuple[int, ...], int] = {_key(identity.map): 0} if exact else {}
    frontier = [identity]
    for length in range(1, m + 1):
        candidates = [WordBallElement(e.map @ moves[k], e.word + (k,)) for e in frontier for k in letters]
        fresh = _dedupe_exact(candidates, seen, len(ball)) if exact else _dedupe_float(candidates, ball)
        if len(ball) + len(fresh) > cap:
            raise BallCapExceeded(f"word ball exceeds {cap} elements at length {length}")
        ball.extend(fresh)
        frontier = fresh
        logger.debug(f"word ball length {length}: {len(fresh)} new, {len(ball)} total")
        if not fresh:
            break
    return ball


def _dedupe_exact(candidates: List[WordBallElement], seen: Dict, offset: int) -> List[WordBallElement]:
    fresh = []
    for c in candidates:
        key = _key(c.map)
        if key not in seen:
            seen[key] = offset + len(fresh)
            fresh.append(c)
    return fresh


def _dedupe_float(candidates: List[WordBallElement], ball: List[WordBallElement]) -> List[WordBallElement]:
    if not candidates:
        return []
    vectors = np.array([c.map.matrix.ravel() for c in candidates])
    radii = np.array([_prefilter_radius(c.map) for c in candidates])
    known_tree = cKDTree(np.array([e.map.matrix.ravel() for e in ball]))
    known_hits = known_tree.query_ball_point(vectors, radii)
    level_tree = cKDTree(vectors)
    level_hits = level_tree.query_ball_point(vectors, radii)
    kept_index: List[int] = []
    kept = set()
    for i, c in enumerate(candidates):
        if any(proximity_gauge(c.map, ball[j].map) < DEDUPE_TOL for j in known_hits[i]):
            continue
        if any(j in kept and proximity_gauge(c.map, candidates[j].map) < DEDUPE_TOL for j in level_hits[i] if j < i):
            continue
        kept.add(i)
        kept_index.append(i)
    return [candidates[i] for i in kept_index]


# --- Epsilon subgroups ---
def is_stabilizer_element(mb: MarkedBody, g: ProjectiveMap) -> bool:
    """Automorphism of the body fixing the basepoint."""
    return is_automorphism(mb.body, g) and apply_map(g, mb.basepoint) == mb.basepoint


def epsilon_subgroup_generators(mb: MarkedBody, S: GeneratorSet, epsilon: float, m: int,
                                cap: int = BALL_CAP) -> GeneratorSet:
    """Elements of the length-m word ball moving the basepoint at most epsilon.

    The identity is always included; the result is symmetric.

    Raises:
        NotAnAutomorphism: some generator does not preserve the body.
    """
    for g in S.elements:
        if not is_automorphism(mb.body, g):
            raise NotAnAutomorphism(f"generator {g.to_list()} does not preserve the body")
    ball = word_ball(S.symmetrized(), m, cap)
    moved = ball_displacements(mb, ball)
    return GeneratorSet([e.map for e, d in zip(ball, moved) if d <= epsilon + DISPLACEMENT_SLACK]).symmetrized()


def ball_displacements(mb: MarkedBody, ball: Sequence[WordBallElement]) -> List[float]:
    """d(x, g.x) for each ball element; inf when g.x falls out of the body numerically."""
    result = []
    for element in ball:
        try:
            result.append(distance(mb.body, mb.basepoint, apply_map(element.map, mb.basepoint)).value)
        except PointOutsideBody:
            result.append(math.inf)
    return result


# --- Commutators ---
def commutator(g: ProjectiveMap, h: ProjectiveMap) -> ProjectiveMap:
    """g^-1 h^-1 g h."""
    return _commutator_from_pairs(g, g.inverse(), h, h.inverse())


def _commutator_from_pairs(g, g_inv, h, h_inv) -> ProjectiveMap:
    with np.errstate(over="ignore", invalid="ignore"):
        return g_inv @ h_inv @ g @ h


@dataclass
class LayerElement:
    map: ProjectiveMap
    inverse: ProjectiveMap
    word: Word
    gauge: float = 0.0


@dataclass
class NilpotencyVerdict:
    """Nilpotent(class) | NotNilpotent(witness) | Inconclusive(reason)."""
    kind: str
    path: str
    nilpotency_class: Optional[int] = None
    witness: Optional[Word] = None
    reason: Optional[str] = None
    layer_gauges: List[float] = field(default_factory=list)

    def label(self) -> str:
        if self.kind == "Nilpotent":
            return f"Nilpotent({self.nilpotency_class})"
        return self.kind

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "path": self.path,
            "class": self.nilpotency_class,
            "witness": list(self.witness) if self.witness is not None else None,
            "reason": self.reason,
            "layer_gauges": self.layer_gauges,
        }


def _first_layer(S: GeneratorSet) -> List[LayerElement]:
    return [LayerElement(g, g.inverse(), (k + 1,)) for k, g in enumerate(S.elements)]


def _next_layer(layer: List[LayerElement], base: List[LayerElement], exact: bool,
                cap: int) -> List[LayerElement]:
    """Simple commutators [h, s], h in layer, s in base, deduplicated up to inversion."""
    seen = set()
    result = []
    for h in layer:
        for s in base:
            c = _commutator_from_pairs(h.map, h.inverse, s.map, s.inverse)
            c_inv = _commutator_from_pairs(s.map, s.inverse, h.map, h.inverse)
            if exact:
                key = min(_key(c), _key(c_inv))
            else:
                key = min(tuple(np.round(c.matrix, 9).flat), tuple(np.round(c_inv.matrix, 9).flat))
            if key in seen:
                continue
            seen.add(key)
            word = invert_word(h.word) + invert_word(s.word) + h.word + s.word
            result.append(LayerElement(c, c_inv, word))
            if len(result) > cap:
                raise BallCapExceeded(f"commutator layer exceeds {cap} elements")
    return result


def _is_trivial_exact(e: LayerElement) -> bool:
    return e.map.is_identity()


def _growing(gauges: Sequence[float]) -> bool:
    tail = gauges[-GROWTH_LAYERS:]
    return len(tail) == GROWTH_LAYERS and all(a < b for a, b in zip(tail, tail[1:]))


def nilpotency_witness(S: GeneratorSet, class_bound: int = 6, tol: float = 1e-9,
                       cap: int = BALL_CAP) -> NilpotencyVerdict:
    """Probe the lower central series of the group generated by S.

    Layer k holds the left-normed commutators of weight k in the generators.
    Nilpotent(c) means layer c+1 vanishes for some c < class_bound. A
    nontrivial layer at class_bound gives NotNilpotent only when the max
    layer gauge strictly increased over the last GROWTH_LAYERS layers, on
    both paths; flat or shrinking layers (a nilpotent group of class above
    the bound) stay Inconclusive.
    """
    if not S.elements:
        return NilpotencyVerdict("Nilpotent", "exact-integer", 1)
    exact = all(g.exact is not None for g in S.elements)
    path = "exact-integer" if exact else "floating"
    base = _first_layer(S)
    layer = base
    gauges: List[float] = []
    for weight in range(1, class_bound + 1):
        if exact:
            layer = [e for e in layer if not _is_trivial_exact(e)]
            for e in layer:
                e.gauge = identity_gauge(e.map, e.inverse)
        else:
            for e in layer:
                e.gauge = identity_gauge(e.map, e.inverse)
            ambiguous = [e for e in layer if tol <= e.gauge <= SEPARATION * tol]
            if ambiguous:
                return NilpotencyVerdict("Inconclusive", path, reason=f"layer {weight} gauge {ambiguous[0].gauge:.3e} "
                                         f"inside the separation band [{tol:g}, {SEPARATION * tol:g}]",
                                         layer_gauges=gauges)
            layer = [e for e in layer if e.gauge > SEPARATION * tol]
        gauges.append(max((e.gauge for e in layer), default=0.0))
        logger.debug(f"layer {weight}: {len(layer)} nontrivial elements, max gauge {gauges[-1]:.3e}")
        if not layer:
            return NilpotencyVerdict("Nilpotent", path, max(weight - 1, 1), layer_gauges=gauges)
        if weight == class_bound:
            break
        layer = _next_layer(layer, base, exact, cap)

    witness = max(layer, key=lambda e: e.gauge)
    if _growing(gauges):
        return NilpotencyVerdict("NotNilpotent", path, witness=witness.word, layer_gauges=gauges)
    return NilpotencyVerdict("Inconclusive", path, reason=f"layer {class_bound} nontrivial but not growing",
                             layer_gauges=gauges)


@dataclass
class DescentResult:
    """Contracting(ratio) | NonContracting(witness)."""
    kind: str
    ratio: float
    ratios: List[float]
    witness: Optional[Word] = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "ratio": self.ratio, "ratios": self.ratios,
                "witness": list(self.witness) if self.witness is not None else None}


def _float_layer(S: GeneratorSet) -> List[LayerElement]:
    return [LayerElement(ProjectiveMap(g.matrix), ProjectiveMap(g.inverse().matrix), (k + 1,))
            for k, g in enumerate(S.elements)]


def zassenhaus_descent(S: GeneratorSet, tol: float = 1e-9, max_layers: int = DESCENT_LAYERS,
                       keep: int = DESCENT_KEEP) -> DescentResult:
    """Measure how fast commutator layers approach the identity.

    ratio_k = max gauge of layer k / max gauge of layer k-1, keeping the keep
    largest elements per layer. Contracting once three consecutive ratios
    are <= 1/2 or a layer vanishes; NonContracting at the first ratio >= 1
    or when max_layers pass without contraction.
    """
    base = _float_layer(S)
    layer = base
    for e in layer:
        e.gauge = identity_gauge(e.map, e.inverse)
    previous = max((e.gauge for e in layer), default=0.0)
    if previous < tol:
        return DescentResult("Contracting", 0.0, [])
    ratios: List[float] = []
    streak = 0
    for _ in range(2, max_layers + 1):
        layer = _next_layer(sorted(layer, key=lambda e: -e.gauge)[:keep], base, False, BALL_CAP)
        for e in layer:
            e.gauge = identity_gauge(e.map, e.inverse)
        current = max((e.gauge for e in layer), default=0.0)
        ratio = current / previous if previous > 0 else 0.0
        if not np.isfinite(ratio):
            ratio = float("inf")
        ratios.append(ratio)
        if current < tol:
            return DescentResult("Contracting", max(ratios[-3:]), ratios)
        if ratio >= 1.0:
            witness = max(layer, key=lambda e: e.gauge)
            return DescentResult("NonContracting", ratio, ratios, witness.word)
        streak = streak + 1 if ratio <= 0.5 else 0
        if streak >= 3:
            return DescentResult("Contracting", max(ratios[-3:]), ratios)
        previous = current
    witness = max(layer, key=lambda e: e.gauge)
    return DescentResult("NonContracting", ratios[-1] if ratios else 0.0, ratios, witness.word)


# --- Orbit lemma ---
@dataclass(frozen=True)
class PermutationAction:
    """A group acting on {0, ..., size-1} through generating permutations."""
    size: int
    generators: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        for p in self.generators:
            if sorted(p) != list(range(self.size)):
                raise DegenerateConfiguration(f"{p} is not a permutation of {self.size} points")

    def orbit(self, e: int, perms: Optional[Sequence[Sequence[int]]] = None) -> List[int]:
        perms = self.generators if perms is None else perms
        seen = {e}
        queue = deque([e])
        while queue:
            point = queue.popleft()
            for p in perms:
                image = p[point]
                if image not in seen:
                    seen.add(image)
                    queue.append(image)
        return sorted(seen)

    def is_transitive(self) -> bool:
        return self.size == 0 or len(self.orbit(0)) == self.size


def invert_permutation(p: Sequence[int]) -> Tuple[int, ...]:
    inv = [0] * len(p)
    for i, image in enumerate(p):
        inv[image] = i
    return tuple(inv)


def symmetric_permutations(S: Sequence[Sequence[int]]) -> List[Tuple[int, ...]]:
    perms = [tuple(p) for p in S]
    for p in list(perms):
        inv = invert_permutation(p)
        if inv not in perms:
            perms.append(inv)
    return perms


@dataclass(frozen=True)
class OrbitWitness:
    word: Word
    image: int


def _grow(action: PermutationAction, S: Sequence[Sequence[int]], e: int, depth: int):
    if action.orbit(e) != list(range(action.size)):
        raise NotTransitive(f"the action is not transitive on {action.size} points")
    perms = symmetric_permutations(S)
    if action.orbit(e, perms) != list(range(action.size)):
        raise NotGenerating("S does not generate a transitive subgroup")
    witnesses = [OrbitWitness((), e)]
    reached = {e}
    frontier = witnesses
    counts = [1]
    for _ in range(depth):
        fresh = []
        for w in frontier:
            for k, p in enumerate(perms):
                # left multiplication: the new letter acts last
                image = p[w.image]
                if image not in reached:
                    reached.add(image)
                    fresh.append(OrbitWitness((k + 1,) + w.word, image))
        witnesses = witnesses + fresh
        counts.append(len(reached))
        frontier = fresh
    return witnesses, counts, perms


def orbit_spread(action: PermutationAction, S: Sequence[Sequence[int]], m: int, e: int) -> List[OrbitWitness]:
    """min(m+1, |E|) words of length <= m sending e to distinct points.

    Words index the symmetrized S (inverses appended after the originals).

    Raises:
        NotTransitive: the action's group is not transitive.
        NotGenerating: S does not generate a transitive subgroup.
    """
    witnesses, _, _ = _grow(action, S, e, m)
    return witnesses[:min(m + 1, action.size)]


def orbit_growth(action: PermutationAction, S: Sequence[Sequence[int]], e: int, depth: int) -> List[int]:
    """N_0, ..., N_depth with N_k = |S_*^k e|."""
    _, counts, _ = _grow(action, S, e, depth)
    return counts


def apply_permutation_word(perms: Sequence[Sequence[int]], word: Sequence[int], e: int) -> int:
    """Image of e under the product of the word's permutations, rightmost acting first."""
    point = e
    for letter in reversed(word):
        point = perms[letter - 1][point]
    return point


def pointed_actions(size: int, free: int, involutions: int):
    """Every transitive action on {0, ..., size-1} of a group with `free`
    unconstrained generators and `involutions` order-two generators, once per
    relabelling class fixing the point 0.

    Built as standard coset tables: the first undefined entry is filled with
    an existing point whose inverse entry is free, or with the next new point.
    Yields (PermutationAction, generators) with the free generators first.
    """
    columns = 2 * free + involutions
    inverse = [k ^ 1 for k in range(2 * free)] + list(range(2 * free, columns))
    table: List[List[Optional[int]]] = [[None] * columns for _ in range(size)]

    def first_gap(used: int) -> Optional[Tuple[int, int]]:
        for row in range(used):
            for col in range(columns):
                if table[row][col] is None:
                    return row, col
        return None

    def fill(used: int):
        gap = first_gap(used)
        if gap is None:
            if used == size:
                perms = [tuple(table[x][2 * k] for x in range(size)) for k in range(free)]
                perms += [tuple(table[x][col] for x in range(size)) for col in range(2 * free, columns)]
                yield PermutationAction(size, tuple(perms)), perms
            return
        row, col = gap
        back = inverse[col]
        targets = [t for t in range(used) if table[t][back] is None]
        if used < size:
            targets.append(used)
        for target in targets:
            table[row][col] = target
            table[target][back] = row
            yield from fill(max(used, target + 1))
            table[row][col] = None
            table[target][back] = None

    if size >= 1:
        yield from fill(1)
