import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noisealg.noisebool import degenerate
from noisealg.probspace import cond_exp, make_space
from noisealg.scenarios import classical_signs, random_algebra, random_function, voter_model
from noisealg.spectral import (
    chaos_decompose, chaos_space, counting_map, first_chaos_additive, functionals_JH1, influence,
    noise_projection, pivoted_orth, pushforward_product, RankAmbiguityError, refine_compare,
    refine_masses, resolve, spectral_set, sqrt_influence, stable_field, subspace_distance,
)


def seeds():
    return st.integers(0, 2**32 - 1)


def algebra_and_f(seed, n_atoms=None, max_outcomes=128):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5)) if n_atoms is None else n_atoms
    B = random_algebra(rng, n, max_outcomes=max_outcomes)
    return B, random_function(rng, B.space)


class TestResolve:
    def test_two_signs(self, two_signs):
        res = resolve(two_signs.algebra)
        assert res.dims.tolist() == [1, 1, 1, 1]
        xi1, xi2 = two_signs.rv("xi1"), two_signs.rv("xi2")
        mu = res.spectral_measure(xi1 * xi2)
        assert mu.mass[3] == pytest.approx(1.0, abs=1e-12)

    def test_degenerate(self):
        res = resolve(degenerate(make_space([1.0])))
        assert res.dims.tolist() == [1]

    def test_constants_at_bottom(self, rng):
        B = random_algebra(rng, 3)
        res = resolve(B)
        col = res.point_basis(0)
        assert col.shape == (B.space.n, 1)
        assert np.allclose(np.abs(col[:, 0]), 1.0)

    @given(seeds())
    def test_orthonormal_and_complete(self, seed):
        B, _ = algebra_and_f(seed)
        res = resolve(B)
        F = res.basis
        G = F.T @ (B.space.probs[:, None] * F)
        assert np.allclose(G, np.eye(B.space.n), atol=1e-9)
        assert res.dims.sum() == B.space.n

    @given(seeds())
    def test_spans_block_constants(self, seed):
        B, _ = algebra_and_f(seed, max_outcomes=64)
        res = resolve(B)
        for x in range(len(B)):
            cols = res.columns_where((np.arange(len(B)) & ~x) == 0)
            assert cols.shape[1] == B.element(x).n_blocks

    def test_nonclassical_truncation(self):
        from noisealg.scenarios import simplest_nonclassical
        scn = simplest_nonclassical(2, 3)
        assert resolve(scn.algebra).dims.sum() == 8

    def test_tensor_identity(self, rng):
        B = random_algebra(rng, 3, max_outcomes=64)
        res = resolve(B)
        x, y = 0b001, 0b110
        prods = np.array([f * g for f in res.point_basis(x).T for g in res.point_basis(y).T]).T
        assert subspace_distance(B.space, prods, res.point_basis(x | y)) < 1e-8

    def test_rank_ambiguity(self):
        M = np.array([[1.0, 0.0], [0.0, 1e-6]])
        with pytest.raises(RankAmbiguityError):
            pivoted_orth(M, 1e-9)


class TestSpectralMeasure:
    def test_constant(self, two_signs):
        res = resolve(two_signs.algebra)
        mu = res.spectral_measure(np.full(4, 3.0))
        assert mu.mass[0] == pytest.approx(9.0) and mu.mass[1:].sum() == pytest.approx(0, abs=1e-12)

    def test_mixed(self, two_signs):
        xi1, xi2 = two_signs.rv("xi1"), two_signs.rv("xi2")
        mu = resolve(two_signs.algebra).spectral_measure((xi1 + xi1 * xi2) / math.sqrt(2))
        assert np.allclose(mu.mass, [0, 0.5, 0, 0.5], atol=1e-12)

    @given(seeds())
    def test_spectral_identity(self, seed):
        B, f = algebra_and_f(seed)
        mu = resolve(B).spectral_measure(f)
        assert mu.total() == pytest.approx(f.norm2(), rel=1e-12)
        for x in range(len(B)):
            assert abs(mu.of_set(x) - cond_exp(f, B.element(x)).norm2()) < 1e-9

    @given(seeds())
    def test_additive_split(self, seed):
        rng = np.random.default_rng(seed)
        B = random_algebra(rng, 3, max_outcomes=64)
        res = resolve(B)
        x = int(rng.integers(1, len(B) - 1))
        f = cond_exp(random_function(rng, B.space), B.element(x))
        f = f - f.mean()
        g = cond_exp(random_function(rng, B.space), B.complement(x))
        lhs = res.spectral_measure(f + g).mass
        rhs = res.spectral_measure(f).mass + res.spectral_measure(g).mass
        assert np.allclose(lhs, rhs, atol=1e-9)


class TestChaos:
    def test_counting_two_signs(self, two_signs):
        assert counting_map(resolve(two_signs.algebra)).tolist() == [0, 1, 1, 2]

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_first_chaos_dim(self, n):
        assert chaos_space(resolve(classical_signs(n).algebra), 1).shape[1] == n

    def test_decompose(self, two_signs):
        xi1, xi2 = two_signs.rv("xi1"), two_signs.rv("xi2")
        parts = chaos_decompose(resolve(two_signs.algebra), xi1 + 2 * xi1 * xi2)
        assert parts[0].allclose(0 * xi1) and parts[1].allclose(xi1)
        assert parts[2].allclose(2 * xi1 * xi2)

    @given(seeds())
    def test_first_chaos_formula(self, seed):
        B, f = algebra_and_f(seed)
        parts = chaos_decompose(resolve(B), f)
        expected = sum((cond_exp(f, a) - f.mean() for a in B.atoms), 0 * f)
        assert parts[1].allclose(expected, atol=1e-9)
        assert sum(parts[1:], parts[0]).allclose(f, atol=1e-9)

    def test_partition_sets(self, rng):
        B = random_algebra(rng, 3)
        covered = []
        for y in range(len(B)):
            P = set(spectral_set(B, y)) - set().union(*(set(spectral_set(B, z)) for z in range(len(B))
                                                          if z != y and z & y == z))
            covered.extend(P)
        assert sorted(covered) == list(range(len(B)))


class TestFirstChaosAdditive:
    def test_two_signs(self, two_signs):
        B = two_signs.algebra
        F = first_chaos_additive(B)
        G = np.column_stack([two_signs.rv("xi1").values, two_signs.rv("xi2").values])
        assert F.shape[1] == 2 and subspace_distance(B.space, F, G) < 1e-9

    def test_degenerate(self):
        assert first_chaos_additive(degenerate(make_space([1.0]))).shape[1] == 0

    def test_voter_depth1(self):
        assert first_chaos_additive(voter_model(depth=1).algebra).shape[1] == 3

    @given(seeds())
    def test_agrees_with_resolution(self, seed):
        B, _ = algebra_and_f(seed, max_outcomes=64)
        F, G = first_chaos_additive(B), chaos_space(resolve(B), 1)
        assert F.shape == G.shape and subspace_distance(B.space, F, G) < 1e-8


class TestNoiseProjection:
    def test_formula(self, two_signs):
        B = two_signs.algebra
        pr = noise_projection(B, 0b01)
        assert pr[0] == 0 and pr[3] == 0b01

    def test_k_additive(self, rng):
        B = random_algebra(rng, 4, sizes=(2,))
        K = counting_map(resolve(B))
        for P in B.partition_masks():
            total = sum(K[noise_projection(B, p)] for p in P)
            assert np.array_equal(total, K)

    def test_preimage_and_composition(self, rng):
        B = random_algebra(rng, 3)
        S = np.arange(len(B))
        for x, y in itertools.product(range(len(B)), repeat=2):
            pr = noise_projection(B, x)
            pre = set(S[(pr & ~y) == 0])
            assert pre == set(spectral_set(B, y | (B.full_mask ^ x)))
            assert np.array_equal(noise_projection(B, y)[pr], noise_projection(B, x & y))

    def test_k1_partition(self, rng):
        B = random_algebra(rng, 4, sizes=(2,))
        K = counting_map(resolve(B))
        ones = set(np.flatnonzero(K == 1))
        for P in B.partition_masks():
            pieces = [ones & set(spectral_set(B, p)) for p in P]
            assert sum(len(q) for q in pieces) == len(ones) and set().union(*pieces) == ones

    @pytest.mark.parametrize("seed", range(5))
    def test_pushforward_product(self, seed):
        rng = np.random.default_rng(seed)
        B = random_algebra(rng, 4, sizes=(2, 3), max_outcomes=128)
        res = resolve(B)
        xs = [0b0011, 0b0100, 0b1000]
        fs = []
        for x in xs:
            f = cond_exp(random_function(rng, B.space), B.element(x))
            fs.append(f / math.sqrt(f.norm2()))
        image, product = pushforward_product(res, xs, fs)
        assert np.allclose(image, product, atol=1e-10)


class TestInfluence:
    def test_values(self, two_signs):
        B = two_signs.algebra
        xi1, xi2 = two_signs.rv("xi1"), two_signs.rv("xi2")
        assert influence(B, 0b10, xi1) == pytest.approx(0, abs=1e-12)
        assert influence(B, 0b01, xi1) == pytest.approx(1)
        assert influence(B, 0b01, xi1 * xi2) == pytest.approx(1)
        assert sqrt_influence(B, 0b01, xi1) == pytest.approx(1)

    @given(seeds())
    def test_h1_is_first_chaos_norm(self, seed):
        B, f = algebra_and_f(seed)
        J, H1 = functionals_JH1(B, f)
        assert H1 == pytest.approx(chaos_decompose(resolve(B), f)[1].norm2(), abs=1e-9)
        assert J >= 0

    def test_j_oracle(self, three_signs):
        B = three_signs.algebra
        f = three_signs.rv("xi1") + three_signs.rv("xi2") * three_signs.rv("xi3")
        sq = {m: sqrt_influence(B, m, f) ** 2 for m in range(1, len(B))}
        parts = [[0b111], [0b001, 0b110], [0b010, 0b101], [0b100, 0b011], [0b001, 0b010, 0b100]]
        J, _ = functionals_JH1(B, f)
        assert J == pytest.approx(min(sum(sq[m] for m in p) for p in parts))


class TestStableAndRefine:
    def test_stable_field(self, two_signs, rng):
        assert stable_field(two_signs.algebra) == two_signs.space.one
        assert stable_field(degenerate(make_space([1.0]))).is_trivial
        B = random_algebra(rng, 3)
        assert stable_field(B) == B.space.one

    def test_refine_equal(self, rng):
        B = random_algebra(rng, 3)
        f = random_function(rng, B.space)
        assert all(abs(a - b) < 1e-9 for _, a, b in refine_masses(B, B, f))

    def test_refine_split_atom(self, three_signs):
        Bt = three_signs.algebra
        B = Bt.coarsen([0b001, 0b110])
        f = three_signs.rv("xi1") * three_signs.rv("xi2")
        pairs = {m: (c, t) for m, c, t in refine_masses(B, Bt, f)}
        coarse, fine = pairs[B.full_mask]
        assert fine <= coarse + 1e-12
        assert refine_compare(B, Bt, f)

    @given(seeds())
    def test_refine_random(self, seed):
        rng = np.random.default_rng(seed)
        Bt = random_algebra(rng, 4, sizes=(2, 3), max_outcomes=128)
        groups = [0b0011, 0b1100] if rng.random() < 0.5 else [0b0001, 0b0110, 0b1000]
        assert refine_compare(Bt.coarsen(groups), Bt, random_function(rng, Bt.space))

    def test_refine_rejects_non_refinement(self, two_signs, three_signs):
        with pytest.raises(ValueError):
            refine_masses(three_signs.algebra, three_signs.algebra.coarsen([0b011, 0b100]),
                          np.ones(8))
