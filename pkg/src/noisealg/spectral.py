"""Spectral resolution of a finite noise Boolean algebra.

For finite ``B`` the spectral space is ``B`` itself. The point ``s`` carries
``H_s``, the functions measurable for ``s`` that are orthogonal to every
function measurable for a strictly smaller element. The spaces ``H_s`` are
mutually orthogonal and sum to ``L^2(P)``; the spectral measure of ``f``
puts the squared norm of its ``H_s`` component on ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix

from .noisebool import NoiseBooleanAlgebra, popcount, submasks
from .probspace import (
    FiniteProbabilitySpace,
    RandomVariable,
    SigmaField,
    _values,
    cond_exp,
    sigma_of,
)

DEFAULT_RESOLVE_CAP = 4096


class RankAmbiguityError(ArithmeticError):
    """A residual norm fell between the dependence and independence thresholds."""


def pivoted_orth(M: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the column space of ``M`` by pivoted Gram-Schmidt.

    Columns are assumed to have norm at most one. A pivot below ``tol`` marks
    the remaining columns dependent; a pivot in ``[tol, sqrt(tol))`` is
    ambiguous and raises.
    """
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0))
    Q, R, _ = scipy.linalg.qr(M, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    ambiguous = (d >= tol) & (d < math.sqrt(tol))
    if np.any(ambiguous):
        raise RankAmbiguityError(
            f"residual norm {d[ambiguous][0]:.3e} lies between {tol:g} and {math.sqrt(tol):g}")
    rank = int(np.count_nonzero(d >= math.sqrt(tol)))
    return Q[:, :rank]


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Mass of a random variable on each point (mask) of the spectral space."""

    mass: np.ndarray
    algebra: NoiseBooleanAlgebra

    def total(self) -> float:
        return float(self.mass.sum())

    def __getitem__(self, x) -> float:
        return float(self.mass[self.algebra.as_mask(x)])

    def of_set(self, x) -> float:
        """Mass of ``S_x``, the points below ``x``."""
        return float(self.mass[self.algebra.below(x)].sum())

    def integrate(self, g: Callable[[np.ndarray], np.ndarray] | np.ndarray) -> float:
        """Integral of a function of the mask (vectorised callable or array)."""
        masks = np.arange(len(self.mass))
        vals = g(masks) if callable(g) else np.asarray(g, dtype=float)
        return float(np.dot(self.mass, vals))

    def support(self, tol: float = 0.0) -> list[int]:
        return [int(m) for m in np.flatnonzero(self.mass > tol)]


class SpectralResolution:
    """Per-point orthonormal bases of the spaces ``H_s`` for ``s`` in ``B``.

    ``basis`` is a square matrix of functions, orthonormal under ``P``; the
    columns of point ``s`` are ``basis[:, offsets[s]:offsets[s + 1]]``.
    """

    def __init__(self, algebra: NoiseBooleanAlgebra, point_bases: Sequence[np.ndarray], tol: float):
        self.algebra = algebra
        self.space = algebra.space
        self.tol = tol
        self.dims = np.array([b.shape[1] for b in point_bases], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)])
        self.basis = np.concatenate(point_bases, axis=1)
        self.basis.setflags(write=False)
        self.counting = np.array([popcount(m) for m in range(len(algebra))], dtype=np.int64)
        self.col_mask = np.repeat(np.arange(len(algebra)), self.dims)

    @property
    def n_points(self) -> int:
        return len(self.dims)

    def point_basis(self, x) -> np.ndarray:
        m = self.algebra.as_mask(x)
        return self.basis[:, self.offsets[m]:self.offsets[m + 1]]

    def coefficients(self, f) -> np.ndarray:
        return self.basis.T @ (self.space.probs * _values(f))

    def spectral_measure(self, f) -> SpectralMeasure:
        c = self.coefficients(f)
        mass = np.bincount(self.col_mask, weights=c * c, minlength=self.n_points)
        return SpectralMeasure(mass, self.algebra)

    def multiplier_matrix(self, m: np.ndarray) -> np.ndarray:
        """Operator acting as ``m(s)`` on ``H_s``, in function coordinates."""
        m = np.asarray(m, dtype=float)
        F = self.basis
        return (F * m[self.col_mask]) @ (F.T * self.space.probs)

    def columns_where(self, predicate: np.ndarray) -> np.ndarray:
        """Basis columns of the points selected by a boolean array over masks."""
        return self.basis[:, np.asarray(predicate, dtype=bool)[self.col_mask]]

    def __repr__(self):
        return f"SpectralResolution(points={self.n_points}, n_outcomes={self.space.n})"


def resolve(B: NoiseBooleanAlgebra, tol: float | None = None,
            cap: int = DEFAULT_RESOLVE_CAP) -> SpectralResolution:
    """Compute the spectral resolution of ``B``.

    Points are processed by increasing number of atoms. For ``s``, the
    already computed ``H_z`` (``z`` strictly below ``s``) are expressed in the
    orthonormal block basis of ``s`` and ``H_s`` is their orthocomplement.
    """
    space = B.space
    if space.n > cap:
        raise ValueError(f"{space.n} outcomes exceed the resolution cap of {cap}")
    tol = space.tol if tol is None else tol
    p = space.probs
    n_pts = len(B)
    bases: list[np.ndarray | None] = [None] * n_pts
    for s in sorted(range(n_pts), key=lambda m: (popcount(m), m)):
        x = B.element(s)
        nb = x.n_blocks
        sqrt_pb = np.sqrt(x.block_probs)
        lower = [bases[z] for z in submasks(s) if z != s]
        if lower:
            F = np.concatenate(lower, axis=1)
            agg = csr_matrix((p, (x.labels, np.arange(space.n))), shape=(nb, space.n))
            C = (agg @ F) / sqrt_pb[:, None]
            M = np.eye(nb) - C @ C.T
        else:
            M = np.eye(nb)
        Q = pivoted_orth(M, tol)
        expected = nb - sum(b.shape[1] for b in lower)
        if Q.shape[1] != expected:
            raise RankAmbiguityError(
                f"point {s}: found dimension {Q.shape[1]}, block count implies {expected}")
        bases[s] = (Q / sqrt_pb[:, None])[x.labels]
    res = SpectralResolution(B, bases, tol)
    if int(res.dims.sum()) != space.n:
        raise RankAmbiguityError("point dimensions do not add up to the number of outcomes")
    return res


def spectral_measure(res: SpectralResolution, f) -> SpectralMeasure:
    return res.spectral_measure(f)


def counting_map(res: SpectralResolution) -> np.ndarray:
    return res.counting.copy()


def spectral_set(B: NoiseBooleanAlgebra, x) -> list[int]:
    """``S_x``: the spectral points below ``x``."""
    return B.below(x)


def chaos_space(res: SpectralResolution, k: int) -> np.ndarray:
    """Orthonormal basis (functions as columns) of the ``k``-th chaos."""
    if k < 0:
        raise ValueError("chaos order must be nonnegative")
    return res.columns_where(res.counting == k)


def chaos_decompose(res: SpectralResolution, f) -> list[RandomVariable]:
    """Components ``f_0, ..., f_n`` of ``f`` in the chaos spaces."""
    c = res.coefficients(f)
    K = res.counting[res.col_mask]
    out = []
    for k in range(res.algebra.n_atoms + 1):
        sel = K == k
        out.append(RandomVariable(res.basis[:, sel] @ c[sel], res.space))
    return out


def low_chaos_basis(res: SpectralResolution, k: int) -> np.ndarray:
    """Basis of the chaos spaces of order at most ``k``."""
    return res.columns_where(res.counting <= k)


def _l2_coords(space: FiniteProbabilitySpace, F: np.ndarray) -> np.ndarray:
    return np.sqrt(space.probs)[:, None] * F


def _block_average(x: SigmaField, F: np.ndarray) -> np.ndarray:
    """Conditional expectation given ``x`` applied to each column of ``F``."""
    p = x.space.probs
    agg = csr_matrix((p, (x.labels, np.arange(x.space.n))), shape=(x.n_blocks, x.space.n))
    return ((agg @ F) / x.block_probs[:, None])[x.labels]


def _kernel(M: np.ndarray, atol: float) -> np.ndarray:
    """Orthonormal kernel basis with an absolute singular-value threshold."""
    _, sv, vh = np.linalg.svd(M, full_matrices=True)
    rank = int(np.count_nonzero(sv > atol))
    return vh[rank:].T


def first_chaos_additive(B: NoiseBooleanAlgebra, tol: float | None = None) -> np.ndarray:
    """Basis of the additive integrals, found as a kernel without the resolution.

    Starting from the mean-zero functions, the candidate space is cut down by
    the kernel of ``I - P_x - P_x'`` for every ``x`` in ``B``.
    """
    space = B.space
    tol = space.tol if tol is None else tol
    root = np.sqrt(space.probs)
    # orthonormal basis (l2 coordinates) of the mean-zero subspace
    N = scipy.linalg.null_space(root[None, :])
    order = sorted(range(1, B.full_mask), key=lambda m: (popcount(m), m))
    for x in order:
        if N.shape[1] == 0:
            break
        xc = B.full_mask ^ x
        if xc < x:
            continue  # same constraint as for the complement
        F = N / root[:, None]
        resid = F - _block_average(B.element(x), F) - _block_average(B.element(xc), F)
        N = N @ _kernel(root[:, None] * resid, math.sqrt(tol))
    return N / root[:, None]


def subspace_distance(space: FiniteProbabilitySpace, F: np.ndarray, G: np.ndarray) -> float:
    """Operator norm of the difference of the orthogonal projections onto two spans."""
    def projector(A):
        A = _l2_coords(space, A)
        if A.shape[1] == 0:
            return np.zeros((space.n, space.n))
        Q = scipy.linalg.orth(A)
        return Q @ Q.T
    return float(np.linalg.norm(projector(F) - projector(G), 2))


def noise_projection(B: NoiseBooleanAlgebra, x) -> np.ndarray:
    """``pr_x`` as an array over masks: ``s -> s meet x``."""
    m = B.as_mask(x)
    return np.arange(len(B)) & m


def pushforward_product(res: SpectralResolution, xs: Sequence, fs: Sequence
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Image of ``mu_{f_1 ... f_n}`` under ``s -> (pr_{x_1}(s), ..., pr_{x_n}(s))``
    and the product measure of the ``mu_{f_i}``, both as arrays on ``S^n``."""
    B = res.algebra
    masks = [B.as_mask(x) for x in xs]
    if len(masks) != len(fs):
        raise ValueError("need one function per element")
    prod = np.ones(B.space.n)
    for f in fs:
        prod = prod * _as_rv(B.space, f).values
    mu = res.spectral_measure(prod).mass
    shape = (len(B),) * len(masks)
    image = np.zeros(shape)
    s = np.arange(len(B))
    np.add.at(image, tuple(s & m for m in masks), mu)
    product = np.ones(())
    for f in fs:
        product = np.multiply.outer(product, res.spectral_measure(f).mass)
    return image, product


def influence(B: NoiseBooleanAlgebra, x, f) -> float:
    """``E[var(f | x')]``: the variance destroyed by resampling ``x``."""
    f = _as_rv(B.space, f)
    g = cond_exp(f, B.complement(x))
    return f.norm2() - g.norm2()


def sqrt_influence(B: NoiseBooleanAlgebra, x, f) -> float:
    """``E[sqrt(var(f | x'))]``."""
    f = _as_rv(B.space, f)
    xc = B.complement(x)
    v = cond_exp(f * f, xc).values - cond_exp(f, xc).values ** 2
    return B.space.expect(np.sqrt(np.maximum(v, 0.0)))


def functionals_JH1(B: NoiseBooleanAlgebra, f) -> tuple[float, float]:
    """``J`` minimises the summed squared root-influences over atom groupings;
    ``H1`` sums the variances of the conditional expectations on the atoms."""
    f = _as_rv(B.space, f)
    cache: dict[int, float] = {}

    def sq(mask):
        if mask not in cache:
            cache[mask] = sqrt_influence(B, mask, f) ** 2
        return cache[mask]

    if B.n_atoms == 0:
        return 0.0, 0.0
    J = min(sum(sq(m) for m in part) for part in B.partition_masks())
    H1 = sum(cond_exp(f, a).var() for a in B.atoms)
    return float(J), float(H1)


def stable_field(B: NoiseBooleanAlgebra, tol: float | None = None) -> SigmaField:
    """Sigma-field generated by the first chaos."""
    basis = first_chaos_additive(B, tol)
    return sigma_of([RandomVariable(basis[:, j], B.space) for j in range(basis.shape[1])],
                    B.space)


def embed(B: NoiseBooleanAlgebra, b: NoiseBooleanAlgebra) -> list[int]:
    """Masks in ``B`` of the atoms of a subalgebra ``b``."""
    if b.space != B.space:
        raise ValueError("algebras live on different spaces")
    return [B.mask_of(a) for a in b.atoms]


def refine_compare(B: NoiseBooleanAlgebra, Bt: NoiseBooleanAlgebra, f,
                   tol: float | None = None, res: SpectralResolution | None = None,
                   res_t: SpectralResolution | None = None) -> bool:
    """True iff the finer algebra's spectral measure is at most the coarser one
    on every point they share."""
    pairs = refine_masses(B, Bt, f, res, res_t)
    tol = B.space.tol if tol is None else tol
    return all(fine <= coarse + tol for _, coarse, fine in pairs)


def refine_masses(B: NoiseBooleanAlgebra, Bt: NoiseBooleanAlgebra, f,
                  res: SpectralResolution | None = None,
                  res_t: SpectralResolution | None = None) -> list[tuple[int, float, float]]:
    """``(mask in B, mass under B, mass under the refinement)`` per element of ``B``."""
    if not all(x in Bt for x in B.elements):
        raise ValueError("the coarser algebra is not contained in the finer one")
    res = res or resolve(B)
    res_t = res_t or resolve(Bt)
    mu = res.spectral_measure(f)
    mu_t = res_t.spectral_measure(f)
    return [(m, float(mu.mass[m]), float(mu_t.mass[Bt.mask_of(x)]))
            for m, x in enumerate(B.elements)]


def hull(B: NoiseBooleanAlgebra, groups: Sequence[int], s: int) -> int:
    """Smallest element of the subalgebra with atom masks ``groups`` above ``s``."""
    out = 0
    for g in groups:
        if g & s:
            out |= g
    return out


def _as_rv(space: FiniteProbabilitySpace, f) -> RandomVariable:
    if isinstance(f, RandomVariable):
        return f
    return RandomVariable(np.asarray(f, dtype=float), space)


__all__ = [
    "RankAmbiguityError", "SpectralMeasure", "SpectralResolution", "resolve", "spectral_measure",
    "counting_map", "spectral_set", "chaos_space", "chaos_decompose", "low_chaos_basis",
    "first_chaos_additive", "subspace_distance", "noise_projection", "pushforward_product",
    "influence",
    "sqrt_influence", "functionals_JH1", "stable_field", "refine_compare", "refine_masses",
    "embed", "hull", "pivoted_orth",
]
