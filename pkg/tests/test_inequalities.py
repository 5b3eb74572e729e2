import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noisealg.inequalities import (
    bonferroni_independent, bonferroni_operator, bonferroni_partial, bonferroni_terms,
    bonferroni_truncated, containment_witness, counterexample_harness,
    influence_inequality_check, influence_inequality_operator, partial_sum_witness,
    partition_influence_chain, two_field_deficit,
)
from noisealg.operators import cond_exp_operator
from noisealg.probspace import sigma_of
from noisealg.scenarios import random_algebra, random_function
from noisealg.spectral import influence


def P(B, mask):
    return cond_exp_operator(B.element(mask)).matrix


class TestBonferroniOperator:
    def test_n1(self, three_signs):
        B = three_signs.algebra
        for x in range(len(B)):
            rep = bonferroni_operator(B, [x])
            assert np.allclose(rep.operator.matrix, P(B, x) - P(B, 0))
            assert rep.holds
            assert rep.equality_everywhere == (x == 0)

    def test_n2_forms(self, two_signs):
        B = two_signs.algebra
        xi1, xi2 = two_signs.rv("xi1"), two_signs.rv("xi2")
        rep = bonferroni_operator(B, [0b01, 0b10])
        assert rep.operator.form(xi1 + xi2) == pytest.approx(0, abs=1e-12)
        assert rep.operator.form(xi1 * xi2) == pytest.approx(1)
        assert rep.equality_on_low_chaos and not rep.equality_everywhere

    def test_n3_expansion(self, three_signs):
        B = three_signs.algebra
        x, y, z = 0b001, 0b010, 0b100
        expected = (P(B, 7) - P(B, y | z) - P(B, x | z) - P(B, x | y)
                    + P(B, x) + P(B, y) + P(B, z) - P(B, 0))
        rep = bonferroni_operator(B, [x, y, z])
        assert np.allclose(rep.operator.matrix, expected)
        assert rep.min_eigenvalue >= -1e-9

    def test_terms_match_explicit_formula(self):
        masks = [0b0011, 0b0110, 0b1100]
        n = len(masks)
        expected = [(1, 0b1111)]
        for k in range(1, n + 1):
            for J in itertools.combinations(range(n), k):
                outside = 0
                for i in set(range(n)) - set(J):
                    outside |= masks[i]
                inner = -1
                for j in J:
                    part = 0
                    for i in set(J) - {j}:
                        part |= masks[i]
                    inner &= part
                expected.append(((-1) ** k, outside | (inner & 0b1111)))
        assert sorted(bonferroni_terms(masks)) == sorted(expected)

    def test_containment(self, three_signs):
        B = three_signs.algebra
        rep = bonferroni_operator(B, [0b011, 0b001, 0b100])
        assert rep.containment_witness == 1 and rep.equality_everywhere
        assert containment_witness([0b01, 0b10]) is None

    def test_not_in_algebra(self, two_signs, counter_space):
        space, _, _, x1 = counter_space
        with pytest.raises(ValueError):
            bonferroni_operator(two_signs.algebra, [x1])

    @given(st.integers(0, 2**32 - 1))
    def test_random(self, seed):
        rng = np.random.default_rng(seed)
        B = random_algebra(rng, int(rng.integers(2, 4)), sizes=(2, 3), max_outcomes=64)
        n = int(rng.integers(1, 5))
        xs = [int(v) for v in rng.integers(0, len(B), size=n)]
        rep = bonferroni_operator(B, xs)
        assert rep.min_eigenvalue >= -1e-9
        assert rep.equality_everywhere == (rep.containment_witness is not None)
        assert rep.low_chaos_form < 1e-9


class TestTruncated:
    def test_m_equals_n(self, two_signs):
        chk = bonferroni_truncated(two_signs.algebra, [0b01, 0b10], 2)
        assert chk.holds and chk.max_eigenvalue == 0

    def test_m0_independent_pair(self, two_signs):
        B = two_signs.algebra
        chk = bonferroni_truncated(B, [0b01, 0b10], 0)
        assert chk.holds
        op = -(P(B, 3) - P(B, 1) - P(B, 2) + P(B, 0))
        vals = np.linalg.eigvalsh(np.sqrt(B.space.probs)[:, None] * op / np.sqrt(B.space.probs)[None, :])
        assert vals.max() <= 1e-12

    def test_even_m_sign(self, rng):
        for _ in range(10):
            B = random_algebra(rng, 3, sizes=(2, 3), max_outcomes=64)
            xs = [int(v) for v in rng.integers(0, len(B), size=4)]
            for m in (0, 2, 4):
                assert bonferroni_truncated(B, xs, m).holds

    def test_odd_m_two_sided_witness(self, two_signs):
        B = two_signs.algebra
        w = partial_sum_witness(B, [0b01, 0b10], 1)
        assert w.fails_both_ways
        assert w.negative_form == pytest.approx(-1) and w.positive_form == pytest.approx(1)
        op = bonferroni_partial(B, [0b01, 0b10], 1)
        assert op.form(np.ones(4)) == pytest.approx(-1)
        xi = two_signs.rv("xi1") * two_signs.rv("xi2")
        assert op.form(xi) == pytest.approx(1)

    def test_range(self, two_signs):
        with pytest.raises(ValueError):
            bonferroni_truncated(two_signs.algebra, [1, 2], 3)


class TestIndependent:
    def test_trivial_member(self, two_signs):
        B = two_signs.algebra
        rep = bonferroni_independent([B.atoms[0], B.zero])
        assert rep.equality_everywhere and rep.containment_witness == 1

    def test_two_signs(self, two_signs):
        B = two_signs.algebra
        rep = bonferroni_independent(list(B.atoms))
        xi = two_signs.rv("xi1") * two_signs.rv("xi2")
        assert rep.operator.form(xi) == pytest.approx(1)
        assert rep.holds and rep.equality_on_low_chaos

    def test_complement_pair(self, two_signs):
        B = two_signs.algebra
        xi1 = two_signs.rv("xi1")
        S = P(B, 1) + P(B, 2)
        assert xi1.values @ (B.space.probs * (S @ xi1.values)) == pytest.approx(xi1.norm2())

    def test_rejects_dependent(self, two_signs):
        s = two_signs.space
        with pytest.raises(ValueError):
            bonferroni_independent([sigma_of([two_signs.rv("xi1")]), s.one])

    def test_random_triples(self, rng):
        B = random_algebra(rng, 4, sizes=(2, 3), max_outcomes=128)
        rep = bonferroni_independent([B.element(0b0011), B.atoms[2], B.atoms[3]])
        assert rep.holds and rep.equality_on_low_chaos and not rep.equality_everywhere


class TestInfluenceInequality:
    def test_example_values(self, three_signs):
        B = three_signs.algebra
        f = three_signs.rv("xi1") * three_signs.rv("xi2") * three_signs.rv("xi3")
        chain = partition_influence_chain(B, [1, 2, 4], f)
        assert chain == pytest.approx((3, 3, 4, 4))
        assert influence_inequality_check(B, [1, 2, 4], [f])

    def test_constant(self, three_signs):
        B = three_signs.algebra
        for m in range(1, 8):
            assert influence(B, m, np.ones(8)) == pytest.approx(0, abs=1e-12)

    @given(st.integers(0, 2**32 - 1))
    def test_random(self, seed):
        rng = np.random.default_rng(seed)
        B = random_algebra(rng, 3, max_outcomes=64)
        fs = [random_function(rng, B.space) for _ in range(3)]
        assert influence_inequality_check(B, [1, 2, 4], fs)
        xs = [int(v) for v in rng.integers(0, len(B), size=3)]
        assert influence_inequality_check(B, xs)

    def test_operator_matches_complemented_bonferroni(self, rng):
        B = random_algebra(rng, 3, max_outcomes=64)
        xs = [0b011, 0b110, 0b101]
        op = influence_inequality_operator(B, xs)
        assert op.eigenvalues()[0] >= -1e-9


class TestCounterexample:
    def test_record(self):
        rec = counterexample_harness()
        assert rec.lhs == pytest.approx(1.0, abs=1e-12)
        assert rec.rhs == pytest.approx(1.5, abs=1e-12)
        assert abs(rec.deficit + 0.5) < 1e-12
        assert rec.join_is_full and rec.meet_is_trivial and rec.axioms_fail
        assert rec.complements_of_x1 == 0

    def test_noise_pair_holds(self):
        rec = counterexample_harness()
        assert rec.noise_pair_deficit >= -1e-12

    def test_swapped_fails(self):
        assert counterexample_harness().swapped_deficit == pytest.approx(-0.5)

    def test_deficit_function(self, counter_space):
        space, xi1, xi2, x1 = counter_space
        assert two_field_deficit(xi2, x1, sigma_of([xi2]))[2] == pytest.approx(-0.5)
