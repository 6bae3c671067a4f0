"""
Group lab tests - gauges, word balls, epsilon subgroups, nilpotency verdicts,
commutator descent and the orbit lemma.
"""

import math
import os
import sys

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from convex import make_family, rotation
from core import BallCapExceeded, DegenerateConfiguration, NotAnAutomorphism, NotGenerating, NotTransitive
from group_lab import (
    GeneratorSet,
    PermutationAction,
    apply_permutation_word,
    commutator,
    epsilon_subgroup_generators,
    evaluate_word,
    identity_gauge,
    invert_word,
    is_stabilizer_element,
    nilpotency_witness,
    orbit_growth,
    orbit_spread,
    pointed_actions,
    proximity_gauge,
    symmetric_permutations,
    word_ball,
    zassenhaus_descent,
)
from projective import ProjectiveMap, det_normalize

SANOV = [[[1, 2], [0, 1]], [[1, 0], [2, 1]]]
HEISENBERG = [[[1, 1, 0], [0, 1, 0], [0, 0, 1]], [[1, 0, 0], [0, 1, 1], [0, 0, 1]]]
QUARTER_TURN = [[0, -1, 0], [1, 0, 0], [0, 0, 1]]


def _elementary_unipotents(size):
    """I + E_{i,i+1}, the standard generators of U_size(Z)."""
    return [[[int(r == c or (r == i and c == i + 1)) for c in range(size)] for r in range(size)]
            for i in range(size - 1)]


def _boost_family():
    return make_family("ellipsoid", 2, {"boosts": [[0, 2.0], [1, 2.0]]})


# ============================================================================
# 1. Gauge and words
# ============================================================================

class TestGauge:
    """The left-invariant proximity gauge."""

    def test_zero_on_equal_maps(self):
        g = det_normalize([[2, 1, 0], [1, 1, 0], [0, 0, 1]])
        assert proximity_gauge(g, g) == pytest.approx(0.0, abs=1e-12)

    def test_quarter_turn(self):
        """gauge(I, rotation by pi/2) = 2."""
        assert proximity_gauge(ProjectiveMap.identity(2), det_normalize(QUARTER_TURN)) == pytest.approx(2.0)

    def test_left_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            g1, g2, h = (det_normalize(np.eye(3) + 0.3 * rng.standard_normal((3, 3))) for _ in range(3))
            assert proximity_gauge(h @ g1, h @ g2) == pytest.approx(proximity_gauge(g1, g2), abs=1e-10)

    def test_overflowed_map_is_far(self):
        blown = ProjectiveMap(np.array([[np.inf, 0.0], [np.nan, 1.0]]))
        assert identity_gauge(blown, ProjectiveMap(np.eye(2))) == math.inf


class TestWords:
    """Signed-letter words."""

    def test_evaluate_and_invert(self):
        S = GeneratorSet.from_matrices(SANOV)
        word = (1, -2, 2, 1)
        g = evaluate_word(S, word)
        assert (g @ evaluate_word(S, invert_word(word))).is_identity()

    def test_empty_word(self):
        assert evaluate_word(GeneratorSet.from_matrices(SANOV), ()).is_identity()

    def test_bad_letter(self):
        with pytest.raises(DegenerateConfiguration):
            evaluate_word(GeneratorSet.from_matrices(SANOV), (3,))

    def test_symmetrized_appends_inverses(self):
        S = GeneratorSet.from_matrices(SANOV).symmetrized()
        assert len(S) == 4
        assert S.symmetric
        assert (S.elements[0] @ S.elements[2]).is_identity()


# ============================================================================
# 2. Word balls
# ============================================================================

class TestWordBall:
    """Distinct products of bounded length."""

    def test_identity_only(self):
        ball = word_ball(GeneratorSet.from_matrices([np.eye(3)]).symmetrized(), 5)
        assert len(ball) == 1
        assert ball[0].word == ()

    def test_quarter_turn(self):
        """The order-4 rotation generates 4 elements."""
        ball = word_ball(GeneratorSet.from_matrices([QUARTER_TURN]).symmetrized(), 5)
        assert len(ball) == 4

    def test_float_rotation(self):
        """A floating order-6 rotation is deduplicated by the gauge."""
        S = GeneratorSet([rotation(2, 0, 1, math.pi / 3)]).symmetrized()
        assert len(word_ball(S, 6)) == 6

    def test_sanov_free(self):
        """Reduced words of length <= 2 in a free group of rank 2: 1 + 4 + 12."""
        ball = word_ball(GeneratorSet.from_matrices(SANOV).symmetrized(), 2)
        assert len(ball) == 17
        assert [len(e.word) for e in ball] == sorted(len(e.word) for e in ball)

    def test_cap(self):
        with pytest.raises(BallCapExceeded):
            word_ball(GeneratorSet.from_matrices(SANOV).symmetrized(), 4, cap=50)

    def test_shortlex_words(self):
        """Each element keeps its first word in shortlex order."""
        S = GeneratorSet.from_matrices([QUARTER_TURN]).symmetrized()
        words = [e.word for e in word_ball(S, 3)]
        assert words == [(), (1,), (2,), (1, 1)]


# ============================================================================
# 3. Epsilon subgroups
# ============================================================================

class TestEpsilonSubgroups:
    """Elements moving the basepoint a little."""

    def test_small_epsilon(self):
        """Boosts of parameter 2 leave only the identity at epsilon 0.1."""
        family = _boost_family()
        S = epsilon_subgroup_generators(family.marked(), GeneratorSet(family.generators), 0.1, 3)
        assert len(S) == 1
        assert S.elements[0].is_identity(1e-12)

    def test_boosts_enter_at_their_length(self):
        family = _boost_family()
        S = epsilon_subgroup_generators(family.marked(), GeneratorSet(family.generators), 2.0, 3)
        for g in family.generators:
            assert any(proximity_gauge(g, h) < 1e-9 for h in S.elements)

    def test_monotone_in_epsilon(self):
        family = _boost_family()
        small = epsilon_subgroup_generators(family.marked(), GeneratorSet(family.generators), 2.0, 3)
        large = epsilon_subgroup_generators(family.marked(), GeneratorSet(family.generators), 3.0, 3)
        assert all(any(proximity_gauge(g, h) < 1e-9 for h in large.elements) for g in small.elements)

    def test_zero_epsilon_keeps_stabilizer(self):
        """A rotation fixing the center has displacement 0."""
        family = make_family("ellipsoid", 2, {"rotations": [[0, 1, 0.5]]})
        S = epsilon_subgroup_generators(family.marked(), GeneratorSet(family.generators), 1e-12, 2)
        assert len(S) == 5
        assert all(is_stabilizer_element(family.marked(), g) for g in S.elements)

    def test_non_automorphism(self):
        family = _boost_family()
        bad = GeneratorSet([det_normalize(np.diag([2.0, 1.0, 1.0]))])
        with pytest.raises(NotAnAutomorphism):
            epsilon_subgroup_generators(family.marked(), bad, 1.0, 2)


# ============================================================================
# 4. Nilpotency and descent
# ============================================================================

class TestCommutator:
    def test_commuting_diagonals(self):
        g = det_normalize(np.diag([2.0, 1.0, 0.5]))
        h = det_normalize(np.diag([1.0, 2.0, 0.5]))
        assert commutator(g, h).is_identity(1e-12)

    def test_heisenberg_center(self):
        """[e12, e23] is the central e13 shift."""
        a, b = (det_normalize(m) for m in HEISENBERG)
        c = commutator(a, b)
        assert c.to_list() == [[1, 0, 1], [0, 1, 0], [0, 0, 1]]

    def test_same_center_rotations(self):
        assert commutator(rotation(2, 0, 1, 0.3), rotation(2, 0, 1, 1.2)).is_identity(1e-12)


class TestNilpotency:
    """Lower central series verdicts."""

    def test_heisenberg(self):
        verdict = nilpotency_witness(GeneratorSet.from_matrices(HEISENBERG))
        assert verdict.kind == "Nilpotent"
        assert verdict.nilpotency_class == 2
        assert verdict.path == "exact-integer"

    def test_abelian_diagonal(self):
        S = GeneratorSet.from_matrices([np.diag([2.0, 1.0, 0.5]), np.diag([1.0, 2.0, 0.5])])
        assert nilpotency_witness(S).label() == "Nilpotent(1)"

    def test_trivial_group(self):
        assert nilpotency_witness(GeneratorSet([])).label() == "Nilpotent(1)"

    def test_sanov_exact_witness(self):
        """The free Sanov pair keeps a nontrivial 6-fold commutator."""
        S = GeneratorSet.from_matrices(SANOV)
        verdict = nilpotency_witness(S, class_bound=6)
        assert verdict.kind == "NotNilpotent"
        assert verdict.path == "exact-integer"
        witness = evaluate_word(S, verdict.witness)
        assert not witness.is_identity()
        assert all(isinstance(x, int) for x in witness.exact.flat)

    def test_heisenberg_above_bound_is_inconclusive(self):
        """Flat layers at the bound never certify non-nilpotency."""
        verdict = nilpotency_witness(GeneratorSet.from_matrices(HEISENBERG), class_bound=2)
        assert verdict.kind == "Inconclusive"
        assert verdict.path == "exact-integer"
        assert verdict.layer_gauges == [1.0, 1.0]

    def test_unitriangular_class_above_bound(self):
        """U_8(Z) has class 7, so a bound of 6 cannot decide it."""
        verdict = nilpotency_witness(GeneratorSet.from_matrices(_elementary_unipotents(8)), class_bound=6)
        assert verdict.kind == "Inconclusive"
        assert verdict.layer_gauges == [1.0] * 6

    def test_unitriangular_class(self):
        verdict = nilpotency_witness(GeneratorSet.from_matrices(_elementary_unipotents(8)), class_bound=8)
        assert verdict.label() == "Nilpotent(7)"
        assert verdict.path == "exact-integer"

    def test_sanov_layers_grow(self):
        verdict = nilpotency_witness(GeneratorSet.from_matrices(SANOV), class_bound=3)
        assert verdict.kind == "NotNilpotent"
        assert verdict.layer_gauges == sorted(verdict.layer_gauges)
        assert len(set(verdict.layer_gauges)) == 3

    def test_verdict_record(self):
        record = nilpotency_witness(GeneratorSet.from_matrices(HEISENBERG)).to_dict()
        assert record["kind"] == "Nilpotent"
        assert record["class"] == 2


class TestDescent:
    """Commutator contraction of generating sets."""

    def test_small_unipotents_contract(self):
        S = GeneratorSet.from_matrices([[[1, 0.02, 0], [0, 1, 0], [0, 0, 1]], [[1, 0, 0], [0, 1, 0.05], [0, 0, 1]]])
        result = zassenhaus_descent(S)
        assert result.kind == "Contracting"
        assert result.ratio < 1

    def test_identity_is_vacuous(self):
        result = zassenhaus_descent(GeneratorSet.from_matrices([np.eye(3)]))
        assert result.kind == "Contracting"
        assert result.ratio == 0.0

    def test_sanov_does_not_contract(self):
        result = zassenhaus_descent(GeneratorSet.from_matrices(SANOV))
        assert result.kind == "NonContracting"
        assert result.witness is not None


# ============================================================================
# 5. Orbit lemma
# ============================================================================

# (free generators, involutions) of every symmetric set with at most 4 elements
SHAPES = [(1, 0), (2, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 1), (1, 2)]
# above 6 points these two shapes have millions of classes
LARGE_SHAPES = [(0, 4), (1, 2)]


def _check_spread(action, perms):
    """Spread from 0 for every m < |E|, read off one breadth-first pass."""
    size = action.size
    counts = orbit_growth(action, perms, 0, size)
    full = counts.index(size)
    assert all(a < b for a, b in zip(counts[:full], counts[1:full + 1]))
    assert counts[full:] == [size] * (len(counts) - full)
    witnesses = orbit_spread(action, perms, max(size - 1, 0), 0)
    symmetric = symmetric_permutations(perms)
    assert len({w.image for w in witnesses}) == len(witnesses) == size
    for k, w in enumerate(witnesses):
        assert len(w.word) <= k
        assert apply_permutation_word(symmetric, w.word, 0) == w.image
    assert len(orbit_spread(action, perms, 1, 0)) == min(2, size)


class TestOrbitLemma:
    """Short words spreading a point over its orbit."""

    def test_cyclic(self):
        """Z/5 with +-1 and m = 2 gives 3 distinct images."""
        shift = tuple((i + 1) % 5 for i in range(5))
        witnesses = orbit_spread(PermutationAction(5, (shift,)), [shift], 2, 0)
        assert len(witnesses) == 3
        assert {w.image for w in witnesses} <= {0, 1, 4, 2, 3}
        assert len({w.image for w in witnesses}) == 3

    def test_single_point(self):
        witnesses = orbit_spread(PermutationAction(1, ((0,),)), [(0,)], 3, 0)
        assert [w.word for w in witnesses] == [()]

    def test_symmetric_group(self):
        swaps = [(1, 0, 2), (0, 2, 1)]
        witnesses = orbit_spread(PermutationAction(3, tuple(swaps)), swaps, 2, 0)
        assert sorted(w.image for w in witnesses) == [0, 1, 2]

    def test_words_reach_images(self):
        """Witness words evaluate to their images, rightmost letter first."""
        shift = tuple((i + 1) % 7 for i in range(7))
        perms = symmetric_permutations([shift])
        for w in orbit_spread(PermutationAction(7, (shift,)), [shift], 4, 2):
            assert apply_permutation_word(perms, w.word, 2) == w.image
            assert len(w.word) <= 4

    def test_pointed_action_counts(self):
        """Two free generators act transitively with a marked point in 1, 3, 13, 71, 461 ways."""
        assert [sum(1 for _ in pointed_actions(n, 2, 0)) for n in range(1, 6)] == [1, 3, 13, 71, 461]
        assert [sum(1 for _ in pointed_actions(n, 1, 0)) for n in range(1, 6)] == [1] * 5
        assert all(action.is_transitive() for action, _ in pointed_actions(4, 1, 1))

    @pytest.mark.parametrize("shape", SHAPES)
    def test_exhaustive_small(self, shape):
        """Every transitive action on up to 5 points spreads min(m+1, |E|) points."""
        for size in range(1, 6):
            for action, perms in pointed_actions(size, *shape):
                _check_spread(action, perms)

    @pytest.mark.slow
    @pytest.mark.parametrize("shape", SHAPES)
    def test_exhaustive_large(self, shape):
        """Up to 8 points, and up to 6 for the two largest shapes."""
        top = 6 if shape in LARGE_SHAPES else 8
        for size in range(6, top + 1):
            for action, perms in pointed_actions(size, *shape):
                _check_spread(action, perms)

    def test_growth_strictly_increases(self):
        shift = tuple((i + 1) % 6 for i in range(6))
        counts = orbit_growth(PermutationAction(6, (shift,)), [shift], 0, 4)
        assert counts == [1, 3, 5, 6, 6]

    def test_not_transitive(self):
        with pytest.raises(NotTransitive):
            orbit_spread(PermutationAction(4, ((1, 0, 2, 3),)), [(1, 0, 2, 3)], 2, 0)

    def test_not_generating(self):
        shift = (1, 2, 3, 0)
        with pytest.raises(NotGenerating):
            orbit_spread(PermutationAction(4, (shift,)), [(2, 3, 0, 1)], 2, 0)
