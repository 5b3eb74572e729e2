"""Noise operators, self-joinings, integrals and spectral-independence laws.

Operators act on random variables and are stored as matrices in function
coordinates: ``(A f)(w) = sum_v A[w, v] f(v)``. Conditional expectations are
self-adjoint for ``<f, g> = E[fg]``, which in these coordinates means that
``D A D^{-1}`` is symmetric for ``D = diag(sqrt(p))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .noisebool import NoiseBooleanAlgebra, bits, popcount, submasks
from .probspace import (
    FiniteProbabilitySpace,
    RandomVariable,
    SigmaField,
    _values,
    cond_exp,
    cond_exp_matrix,
)
from .spectral import SpectralResolution

MULTIPLICATIVE_TOL = 1e-8
DEFAULT_JOINING_CAP = 1 << 22


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """A linear map on the random variables of a finite space."""

    matrix: np.ndarray
    space: FiniteProbabilitySpace

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.space.n, self.space.n):
            raise ValueError("operator matrix must be square of the space's size")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, space: FiniteProbabilitySpace) -> "LinearOperator":
        return cls(np.eye(space.n), space)

    @classmethod
    def zero(cls, space: FiniteProbabilitySpace) -> "LinearOperator":
        return cls(np.zeros((space.n, space.n)), space)

    def __call__(self, f) -> RandomVariable:
        return RandomVariable(self.matrix @ _values(f), self.space)

    def __matmul__(self, other: "LinearOperator") -> "LinearOperator":
        return LinearOperator(self.matrix @ other.matrix, self.space)

    def __add__(self, other: "LinearOperator") -> "LinearOperator":
        return LinearOperator(self.matrix + other.matrix, self.space)

    def __sub__(self, other: "LinearOperator") -> "LinearOperator":
        return LinearOperator(self.matrix - other.matrix, self.space)

    def __mul__(self, c: float) -> "LinearOperator":
        return LinearOperator(self.matrix * float(c), self.space)

    __rmul__ = __mul__

    def __neg__(self):
        return LinearOperator(-self.matrix, self.space)

    def form(self, f, g=None) -> float:
        """``<f, A g>`` (with ``g = f`` by default)."""
        g = f if g is None else g
        return self.space.inner(f, self.matrix @ _values(g))

    def symmetric_matrix(self) -> np.ndarray:
        r = np.sqrt(self.space.probs)
        return r[:, None] * self.matrix / r[None, :]

    def is_self_adjoint(self, tol: float = 1e-10) -> bool:
        S = self.symmetric_matrix()
        return bool(np.max(np.abs(S - S.T)) <= tol)

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the symmetrised form, ascending."""
        S = self.symmetric_matrix()
        return np.linalg.eigvalsh((S + S.T) / 2)

    def max_abs_diff(self, other: "LinearOperator") -> float:
        return float(np.max(np.abs(self.matrix - other.matrix)))


def cond_exp_operator(x: SigmaField) -> LinearOperator:
    return LinearOperator(cond_exp_matrix(x), x.space)


def _mixture(B: NoiseBooleanAlgebra, q: Sequence[float]) -> np.ndarray:
    """``sum_T w_T P_T`` where atom ``a`` lies in ``T`` with probability ``q[a]``."""
    q = np.asarray(q, dtype=float)
    out = np.zeros((B.space.n, B.space.n))
    for mask in range(len(B)):
        w = 1.0
        for a in range(B.n_atoms):
            w *= q[a] if mask >> a & 1 else 1.0 - q[a]
        if w != 0.0:
            out += w * cond_exp_matrix(B.element(mask))
    return out


def noise_operator(res: SpectralResolution, t: float) -> LinearOperator:
    """``U_t``: multiplication by ``exp(-t K)`` on the spectrum; ``t`` may be ``inf``."""
    if not t >= 0:
        raise ValueError("t must be nonnegative")
    K = res.counting
    m = (K == 0).astype(float) if math.isinf(t) else np.exp(-t * K)
    return LinearOperator(res.multiplier_matrix(m), res.space)


def noise_operator_bernoulli(B: NoiseBooleanAlgebra, t: float) -> LinearOperator:
    """``U_t`` as the average of ``P_x`` over a random ``x`` keeping each atom
    independently with probability ``exp(-t)``."""
    if not t >= 0:
        raise ValueError("t must be nonnegative")
    p = 0.0 if math.isinf(t) else math.exp(-t)
    return LinearOperator(_mixture(B, [p] * B.n_atoms), B.space)


def partition_masks(B: NoiseBooleanAlgebra, P: Sequence) -> list[int]:
    """Validate a partition of unity given as elements or masks."""
    masks = [B.as_mask(p) for p in P]
    union = 0
    for m in masks:
        if m == 0 or m & union:
            raise ValueError("partition members must be nonzero and pairwise independent")
        union |= m
    if union != B.full_mask:
        raise ValueError("partition members must join to 1_P")
    return masks


def _check_rho(rho: Sequence[float], k: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=float).reshape(-1)
    if rho.size != k:
        raise ValueError(f"need one rho per partition member ({k}), got {rho.size}")
    if np.any(rho < 0) or np.any(rho > 1):
        raise ValueError("rho values must lie in [0, 1]")
    return rho


def generalized_multiplier(B: NoiseBooleanAlgebra, P: Sequence, rho: Sequence[float]) -> np.ndarray:
    """``s -> prod_p rho(p) ** K(s meet p)`` over the masks of ``B`` (``0**0 = 1``)."""
    masks = partition_masks(B, P)
    rho = _check_rho(rho, len(masks))
    s = np.arange(len(B))
    out = np.ones(len(B))
    for m, r in zip(masks, rho):
        k = np.array([popcount(int(v)) for v in s & m])
        out *= np.power(r, k)
    return out


def generalized_operator(res: SpectralResolution, P: Sequence, rho: Sequence[float]) -> LinearOperator:
    """``U_rho``: the spectral multiplier ``prod_p rho(p) ** K(pr_p)``."""
    m = generalized_multiplier(res.algebra, P, rho)
    return LinearOperator(res.multiplier_matrix(m), res.space)


def atom_rates(B: NoiseBooleanAlgebra, P: Sequence, rho: Sequence[float]) -> np.ndarray:
    """Per-atom copy probability: ``rho`` of the partition member holding the atom."""
    masks = partition_masks(B, P)
    rho = _check_rho(rho, len(masks))
    q = np.zeros(B.n_atoms)
    for m, r in zip(masks, rho):
        q[bits(m)] = r
    return q


@dataclass(frozen=True, eq=False)
class SelfJoining:
    """Exact law on pairs of outcomes: each atom is copied with probability
    ``rho`` of its partition member and resampled otherwise."""

    base: NoiseBooleanAlgebra
    partition: tuple
    rho: np.ndarray
    joint: np.ndarray

    def correlation(self, f, g=None) -> float:
        g = f if g is None else g
        return float(_values(f) @ self.joint @ _values(g))

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.joint.sum(axis=1), self.joint.sum(axis=0)

    def swap_asymmetry(self) -> float:
        return float(np.max(np.abs(self.joint - self.joint.T)))


def self_joining(B: NoiseBooleanAlgebra, P: Sequence, rho: Sequence[float],
                 cap: int = DEFAULT_JOINING_CAP) -> SelfJoining:
    n = B.space.n
    if n * n > cap:
        raise ValueError(f"joint table of {n * n} cells exceeds the cap of {cap}; "
                         "use joining_monte_carlo instead")
    masks = partition_masks(B, P)
    rho = _check_rho(rho, len(masks))
    q = atom_rates(B, masks, rho)
    joint = B.space.probs[:, None] * _mixture(B, q)
    return SelfJoining(B, tuple(masks), rho, joint)


def joining_correlation(j: SelfJoining, f, g=None) -> float:
    """``E_Q[f(w1) g(w2)]`` under the joining."""
    return j.correlation(f, g)


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    stderr: float
    n_samples: int


def _sample_in_blocks(x: SigmaField, start: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Draw an outcome from the block of each ``start`` with conditional law."""
    p = x.space.probs
    order = np.argsort(x.labels, kind="stable")
    cum = np.cumsum(p[order])
    counts = np.bincount(x.labels, minlength=x.n_blocks)
    first = np.concatenate([[0], np.cumsum(counts)[:-1]])
    b = x.labels[start]
    lo = cum[first[b]] - p[order[first[b]]]
    target = lo + u * x.block_probs[b]
    idx = np.searchsorted(cum, target, side="right")
    idx = np.clip(idx, first[b], first[b] + counts[b] - 1)
    return order[idx]


def joining_monte_carlo(B: NoiseBooleanAlgebra, P: Sequence, rho: Sequence[float], f, g=None,
                        n_samples: int = 100_000, seed: int = 0, streams: int = 1
                        ) -> MonteCarloEstimate:
    """Sampled joining correlation with its standard error.

    Each of ``streams`` substreams gets an independent child seed; partial
    sums are merged, so the result depends only on ``seed`` and ``streams``.
    """
    q = atom_rates(B, P, rho)
    fv = _values(f)
    gv = fv if g is None else _values(g)
    p = B.space.probs
    total = sq = 0.0
    count = 0
    sizes = [n_samples // streams + (i < n_samples % streams) for i in range(streams)]
    for ss, size in zip(np.random.SeedSequence(seed).spawn(streams), sizes):
        rng = np.random.default_rng(ss)
        w1 = rng.choice(B.space.n, size=size, p=p)
        keep = rng.random((size, B.n_atoms)) < q
        masks = keep @ (1 << np.arange(B.n_atoms)) if B.n_atoms else np.zeros(size, dtype=int)
        u = rng.random(size)
        w2 = np.empty(size, dtype=np.int64)
        for m in np.unique(masks):
            sel = masks == m
            w2[sel] = _sample_in_blocks(B.element(int(m)), w1[sel], u[sel])
        vals = fv[w1] * gv[w2]
        total += vals.sum()
        sq += (vals * vals).sum()
        count += size
    mean = total / count
    var = max(sq / count - mean * mean, 0.0)
    return MonteCarloEstimate(float(mean), math.sqrt(var / max(count - 1, 1)), count)


# -- integrals --------------------------------------------------------------

def _pairs(B: NoiseBooleanAlgebra):
    for x in range(len(B)):
        xc = B.full_mask ^ x
        if x <= xc:
            yield B.element(x), B.element(xc)


def is_additive_integral(B: NoiseBooleanAlgebra, f, tol: float | None = None) -> bool:
    """``E f = 0`` and ``f = E[f|x] + E[f|x']`` for every ``x``."""
    tol = B.space.tol if tol is None else tol
    f = RandomVariable(_values(f), B.space)
    if abs(f.mean()) > tol:
        return False
    return all(np.max(np.abs(f.values - cond_exp(f, x).values - cond_exp(f, xc).values)) <= tol
               for x, xc in _pairs(B))


def is_multiplicative_integral(B: NoiseBooleanAlgebra, f, tol: float = MULTIPLICATIVE_TOL) -> bool:
    """``E f = 1`` and ``f = E[f|x] E[f|x']`` for every ``x``."""
    f = RandomVariable(_values(f), B.space)
    if abs(f.mean() - 1.0) > tol:
        return False
    return all(np.max(np.abs(f.values - cond_exp(f, x).values * cond_exp(f, xc).values)) <= tol
               for x, xc in _pairs(B))


def first_chaos_components(B: NoiseBooleanAlgebra, h, tol: float | None = None
                           ) -> list[RandomVariable]:
    """Split a first-chaos element into its atom parts ``h_a = E[h|a]``."""
    tol = B.space.tol if tol is None else tol
    h = RandomVariable(_values(h), B.space)
    parts = [cond_exp(h, a) for a in B.atoms]
    resid = h.values - sum((c.values for c in parts), np.zeros(B.space.n))
    scale = max(1.0, math.sqrt(h.norm2()))
    if abs(h.mean()) > tol * scale or np.max(np.abs(resid)) > tol * scale:
        raise ValueError("function is not in the first chaos")
    return parts


def exp_map(B: NoiseBooleanAlgebra, h, tol: float | None = None) -> RandomVariable:
    """``prod_a (1 + h_a)``: the multiplicative integral of a first-chaos element."""
    out = np.ones(B.space.n)
    for part in first_chaos_components(B, h, tol):
        out = out * (1.0 + part.values)
    return RandomVariable(out, B.space)


def recover_factors(B: NoiseBooleanAlgebra, f) -> list[RandomVariable]:
    """Atom factors ``h_a = E[f|a] - 1`` of a multiplicative integral."""
    f = RandomVariable(_values(f), B.space)
    return [cond_exp(f, a) - 1.0 for a in B.atoms]


def log_map(B: NoiseBooleanAlgebra, f) -> RandomVariable:
    """Inverse of :func:`exp_map` on multiplicative integrals."""
    return sum(recover_factors(B, f), RandomVariable(np.zeros(B.space.n), B.space))


# -- spectral independence --------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralProbability:
    """A probability on the spectral space (indexed by masks)."""

    mass: np.ndarray
    algebra: NoiseBooleanAlgebra

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.shape != (len(self.algebra),):
            raise ValueError("need one mass per spectral point")
        tol = self.algebra.space.tol
        if np.any(m < -tol) or abs(m.sum() - 1.0) > tol:
            raise ValueError("masses do not form a probability")
        object.__setattr__(self, "mass", np.maximum(m, 0.0))

    @property
    def p0(self) -> float:
        return float(self.mass[0])

    def counting_cdf(self, m: int) -> float:
        K = np.array([popcount(s) for s in range(len(self.mass))])
        return float(self.mass[K <= m].sum())


def spectral_independence_defect(B: NoiseBooleanAlgebra, nu: SpectralProbability) -> float:
    """Largest gap between the joint law of ``(pr_x, pr_x')`` and the product
    of its marginals, over all ``x``."""
    worst = 0.0
    for x in range(len(B)):
        xc = B.full_mask ^ x
        if x > xc:
            continue
        U = np.fromiter(submasks(x), dtype=np.int64)
        V = np.fromiter(submasks(xc), dtype=np.int64)
        J = nu.mass[U[:, None] | V[None, :]]
        worst = max(worst, float(np.max(np.abs(J - np.outer(J.sum(1), J.sum(0))))))
    return worst


def spectral_independence_check(B, nu: SpectralProbability, tol: float | None = None) -> bool:
    """``nu`` charges ``0_P`` and makes ``pr_x``, ``pr_x'`` independent for all ``x``."""
    B = _algebra(B)
    tol = B.space.tol if tol is None else tol
    return nu.p0 > tol and spectral_independence_defect(B, nu) <= tol


def spectral_independence_from_integral(res: SpectralResolution, f) -> SpectralProbability:
    """The normalised spectral measure of ``f``."""
    mu = res.spectral_measure(f)
    total = mu.total()
    if total <= 0:
        raise ValueError("f must have positive norm")
    return SpectralProbability(mu.mass / total, res.algebra)


def product_law(B: NoiseBooleanAlgebra, q: Sequence[float]) -> SpectralProbability:
    """Law of the random element including atom ``a`` independently with probability ``q[a]``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (B.n_atoms,) or np.any(q < 0) or np.any(q > 1):
        raise ValueError("need one inclusion probability in [0, 1] per atom")
    s = np.arange(len(B))
    mass = np.ones(len(B))
    for a in range(B.n_atoms):
        mass *= np.where(s >> a & 1, q[a], 1.0 - q[a])
    return SpectralProbability(mass, B)


def inclusion_probabilities(nu: SpectralProbability) -> np.ndarray:
    B = nu.algebra
    s = np.arange(len(B))
    return np.array([nu.mass[(s >> a & 1) == 1].sum() for a in range(B.n_atoms)])


def reconstruct_integral(B: NoiseBooleanAlgebra, nu: SpectralProbability,
                         tol: float | None = None) -> RandomVariable:
    """Multiplicative integral ``f`` with ``mu_{f/|f|} = nu``.

    Atom ``a`` contributes ``1 + c_a u_a`` with ``u_a`` a unit mean-zero
    ``a``-measurable function and ``c_a**2 = q_a / (1 - q_a)``, so that
    ``E h_a^2 / (1 + E h_a^2) = q_a``.
    """
    B = _algebra(B)
    if not spectral_independence_check(B, nu, tol):
        raise ValueError("not a spectral independence probability")
    q = inclusion_probabilities(nu)
    out = np.ones(B.space.n)
    for a, qa in zip(B.atoms, q):
        pb = a.block_probs[0]
        u = ((a.labels == 0) - pb) / math.sqrt(pb * (1.0 - pb))
        out = out * (1.0 + math.sqrt(qa / (1.0 - qa)) * u)
    return RandomVariable(out, B.space)


def equivalent_spectral_independence(B: NoiseBooleanAlgebra) -> tuple[SpectralProbability, RandomVariable]:
    """A fully supported spectral independence probability and its integral.

    Every atom is included with probability one half.
    """
    nu = product_law(B, [0.5] * B.n_atoms)
    return nu, reconstruct_integral(B, nu)


def tail_bound(nu: SpectralProbability, m: int) -> tuple[float, float]:
    """``(nu(K <= m), p0 * sum_{l <= m} (-ln p0)^l / l!)``."""
    p0 = nu.p0
    lam = -math.log(p0)
    rhs = p0 * sum(lam ** l / math.factorial(l) for l in range(m + 1))
    return nu.counting_cdf(m), rhs


def tail_bound_check(B, nu: SpectralProbability, m: int, tol: float | None = None) -> bool:
    B = _algebra(B)
    if not spectral_independence_check(B, nu, tol):
        raise ValueError("tail bound requires a spectral independence probability")
    lhs, rhs = tail_bound(nu, m)
    tol = B.space.tol if tol is None else tol
    return lhs >= rhs - tol


def _algebra(B) -> NoiseBooleanAlgebra:
    return B.algebra if isinstance(B, SpectralResolution) else B
