import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noisealg.noisebool import (
    AxiomError, NotInAlgebraError, atoms, complement, degenerate,
    from_fields, from_independency, generated, lattice_closure, partitions_of_unity,
    set_partitions, subalgebra, verify_axioms,
)
from noisealg.probspace import are_independent, join, make_space, meet, sigma_of, sign_cube
from noisealg.scenarios import random_algebra


def bell(n):
    return [1, 1, 2, 5, 15, 52, 203][n]


class TestFromIndependency:
    def test_two_signs(self, two_signs):
        B = two_signs.algebra
        assert len(B) == 4
        s, (xi1, xi2) = sign_cube(2)
        assert set(B.atoms) == {sigma_of([xi1]), sigma_of([xi2])}

    def test_three_signs(self, three_signs):
        assert len(three_signs.algebra) == 8

    def test_nonclassical_truncation(self):
        s, (a, b, c) = sign_cube(3)
        B = from_independency([sigma_of([a * b]), sigma_of([b * c]), sigma_of([c])])
        assert len(B) == 8
        assert verify_axioms(s, B.elements).passed

    def test_not_independent(self):
        s, (a, b) = sign_cube(2)
        with pytest.raises(AxiomError) as e:
            from_independency([sigma_of([a]), sigma_of([a, b])])
        assert "independency" in e.value.report.axioms_failed()

    def test_join_not_full(self):
        s, (a, b) = sign_cube(2)
        with pytest.raises(AxiomError):
            from_independency([sigma_of([a])])

    def test_zero_entry(self):
        s, (a, b) = sign_cube(2)
        with pytest.raises(AxiomError):
            from_independency([sigma_of([a]), sigma_of([b]), s.zero])

    def test_cap(self):
        s, xi = sign_cube(4)
        with pytest.raises(ValueError):
            from_independency([sigma_of([x]) for x in xi], cap=3)


class TestVerifyAxioms:
    def test_constructed_passes(self, three_signs):
        B = three_signs.algebra
        assert verify_axioms(B.space, B.elements).passed

    def test_counterexample_fails(self, counter_space):
        space, xi1, xi2, x1 = counter_space
        fields = lattice_closure(space, [space.zero, space.one, x1, sigma_of([xi2])])
        report = verify_axioms(space, fields)
        assert not report.passed
        assert "complement_existence" in report.axioms_failed()
        bad = [f for f in report.failures if f.axiom == "complement_existence"]
        assert any(x1 in f.witnesses for f in bad)

    def test_degenerate_passes(self):
        s, _ = sign_cube(2)
        assert verify_axioms(s, [s.zero, s.one]).passed
        one = make_space([1.0])
        assert verify_axioms(one, [one.zero]).passed

    def test_not_closed(self):
        s, (a, b) = sign_cube(2)
        assert verify_axioms(s, [s.zero, s.one, sigma_of([a]), sigma_of([a * b])]).passed
        s3, (a, b, c) = sign_cube(3)
        report = verify_axioms(s3, [s3.zero, s3.one, sigma_of([a]), sigma_of([b])])
        assert "closure_join" in report.axioms_failed()

    def test_report_json(self, counter_space):
        space, xi1, xi2, x1 = counter_space
        out = verify_axioms(space, [space.zero, space.one, x1, sigma_of([xi2])]).to_json()
        assert all({"axiom", "witnesses"} <= set(d) for d in out)

    def test_from_fields_roundtrip(self, three_signs):
        B = three_signs.algebra
        C = from_fields(B.space, reversed(B.elements))
        assert set(C.atoms) == set(B.atoms)


class TestNavigation:
    def test_complement(self, two_signs):
        B = two_signs.algebra
        s, (xi1, xi2) = sign_cube(2)
        assert complement(B, B.zero) == B.one
        assert complement(B, sigma_of([xi1])) == sigma_of([xi2])
        for x in B.elements:
            assert complement(B, complement(B, x)) == x

    def test_complement_not_member(self, counter_space, two_signs):
        space, xi1, xi2, x1 = counter_space
        with pytest.raises(NotInAlgebraError):
            complement(two_signs.algebra, x1)

    def test_atoms_and_partitions(self, three_signs):
        B = three_signs.algebra
        assert len(atoms(B)) == 3
        parts = list(partitions_of_unity(B))
        assert len(parts) == 5
        for P in parts:
            assert are_independent(P)
            assert B.space.one == join(P[0], P[-1]) if len(P) == 2 else True

    def test_degenerate_partition(self):
        s, _ = sign_cube(1)
        B = degenerate(make_space([1.0]))
        assert list(partitions_of_unity(B)) == [[]]

    @pytest.mark.parametrize("n", range(6))
    def test_set_partition_counts(self, n):
        assert sum(1 for _ in set_partitions(list(range(n)))) == bell(n)

    def test_subalgebra(self, three_signs):
        B = three_signs.algebra
        b = subalgebra(B, B.one)
        assert len(b) == len(B) and b.space.n == B.space.n
        assert len(subalgebra(B, B.zero)) == 1
        x = join(B.atoms[0], B.atoms[1])
        bx = subalgebra(B, x)
        assert bx.n_atoms == 2 and bx.space.n == 4
        assert verify_axioms(bx.space, bx.elements).passed

    def test_generated(self, two_signs):
        B = two_signs.algebra
        x = B.atoms[0]
        b = generated(B.space, [x, B.complement(x)])
        assert set(b.elements) == {B.zero, x, B.complement(x), B.one}
        assert set(generated(B.space, B.atoms).elements) == set(B.elements)

    def test_generated_size(self, rng):
        B = random_algebra(rng, 4, sizes=(2,))
        P = [B.element(0b0011), B.element(0b0100), B.element(0b1000)]
        assert len(generated(B.space, P)) == 8

    def test_generated_needs_complement(self, three_signs):
        B = three_signs.algebra
        with pytest.raises(ValueError):
            generated(B.space, [B.atoms[0]])
        b = generated(B.space, [B.atoms[0]], complement=B.complement(B.atoms[0]))
        assert len(b) == 4

    def test_coarsen(self, three_signs):
        B = three_signs.algebra
        b = B.coarsen([0b011, 0b100])
        assert b.n_atoms == 2 and b.is_subalgebra_of(B)


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_algebra_laws(seed, n):
    B = random_algebra(np.random.default_rng(seed), n, max_outcomes=64)
    for x, y in itertools.product(range(len(B)), repeat=2):
        X, Y = B.element(x), B.element(y)
        assert (meet(X, Y) == B.zero) == are_independent([X, Y])
        assert B.complement(join(X, Y)) == meet(B.complement(X), B.complement(Y))
        assert join(X, Y) == B.element(x | y) and meet(X, Y) == B.element(x & y)
        Xc = B.complement(X)
        assert join(meet(Y, X), meet(Y, Xc)) == Y
