"""Stochastic dominance of Bernoulli sums, variance-halving averaging, and the
exploration of a nested chain of subalgebras along the spectral space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .noisebool import NoiseBooleanAlgebra
from .operators import SpectralProbability
from .spectral import embed

FOSD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Pmf:
    """A probability mass function on ``{0, ..., n}``."""

    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or m.size == 0 or np.any(m < -1e-15) or abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("masses must be nonnegative and sum to one")
        object.__setattr__(self, "masses", m)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.masses)

    def mean(self) -> float:
        return float(np.dot(np.arange(self.masses.size), self.masses))

    def __len__(self):
        return self.masses.size


def binomial_convolution(p: Sequence[float]) -> Pmf:
    """Law of the number of successes among independent Bernoulli(p_i) trials."""
    p = np.asarray(list(p), dtype=float)
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise ValueError("success probabilities must lie in [0, 1]")
    out = np.array([1.0])
    for q in p:
        out = np.convolve(out, [1.0 - q, q])
    return Pmf(out)


def geometric_mean(p: Sequence[float]) -> float:
    p = np.asarray(list(p), dtype=float)
    if p.size == 0:
        return 1.0
    if np.any(p == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(p))))


@dataclass(frozen=True)
class FosdResult:
    pmf: Pmf
    dominated_pmf: Pmf
    slack: np.ndarray
    passed: bool

    def to_dict(self) -> dict:
        return {
            "pmf": self.pmf.masses.tolist(),
            "dominated_pmf": self.dominated_pmf.masses.tolist(),
            "pass": self.passed,
        }


def fosd_compare(p: Sequence[float], tol: float = FOSD_TOL) -> FosdResult:
    """Compare the Bernoulli-sum law with the binomial at the geometric mean."""
    p = list(p)
    law = binomial_convolution(p)
    ref = binomial_convolution([geometric_mean(p)] * len(p))
    slack = ref.cdf() - law.cdf()
    return FosdResult(law, ref, slack, bool(np.all(slack >= -tol)))


def fosd_check(p: Sequence[float], tol: float = FOSD_TOL) -> bool:
    """True iff ``Bin(p)`` first-order dominates ``Bin(n, geometric mean of p)``."""
    return fosd_compare(p, tol).passed


def _var(x: np.ndarray) -> float:
    """Population variance, shifted by the first entry so constant vectors give exactly 0."""
    return float(np.var(x - x[0]))


def averaging_step(x: Sequence[float], tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Keep the entry closest to the mean; replace the others by their average.

    Ties go to the lowest index. Returns the new vector and the ratio of
    variances (0 when the input is constant).
    """
    x = np.asarray(list(x), dtype=float)
    n = x.size
    if n < 3:
        raise ValueError("need at least three entries")
    mean = x.mean()
    i = int(np.argmin(np.abs(x - mean)))
    out = np.empty_like(x)
    others = np.delete(np.arange(n), i)
    out[others] = x[others].mean()
    out[i] = x[i]
    v0, v1 = _var(x), _var(out)
    ratio = 0.0 if v0 == 0 else v1 / v0
    if v1 > v0 / 2 + tol:
        raise ArithmeticError("variance did not halve")
    return out, ratio


def iterate_averaging(x: Sequence[float], tol: float = 1e-9, max_steps: int = 1000
                      ) -> tuple[np.ndarray, int]:
    """Apply :func:`averaging_step` until every entry is within ``tol`` of the mean."""
    x = np.asarray(list(x), dtype=float)
    mean = x.mean()
    for step in range(max_steps + 1):
        if np.max(np.abs(x - mean)) <= tol:
            return x, step
        x, _ = averaging_step(x)
    raise ArithmeticError("averaging did not converge")


@dataclass(frozen=True, eq=False)
class ExplorationLabels:
    """``labels[k][i][s] = 1`` iff atom ``i`` of level ``k`` meets point ``s``."""

    levels: tuple  # per level: tuple of atom masks in the top algebra
    labels: tuple  # per level: bool array (n_atoms_k, n_points)
    children: tuple  # per level below the top: list of child index lists

    def gamma_size(self, k: int) -> np.ndarray:
        """``|Gamma_k(s)|``: included atoms at level ``k``, per point."""
        return self.labels[k].sum(axis=0)

    def monotone_exclusion(self) -> bool:
        """A node is excluded iff all its children are."""
        for k, kids in enumerate(self.children):
            for i, ch in enumerate(kids):
                if not np.array_equal(self.labels[k][i], self.labels[k + 1][ch].any(axis=0)):
                    return False
        return True


@dataclass(frozen=True, eq=False)
class Exploration:
    labels: ExplorationLabels
    level_laws: tuple  # per level: Pmf of |Gamma_k| under nu


def exploration(B: NoiseBooleanAlgebra, chain: Sequence[NoiseBooleanAlgebra],
                nu: SpectralProbability | None = None) -> Exploration:
    """Explore the spectral points of ``B`` down a nested chain ending at ``B``."""
    chain = list(chain)
    if not chain or set(chain[-1].atoms) != set(B.atoms):
        raise ValueError("the chain must end at the algebra itself")
    levels = [embed(B, b) for b in chain]
    children = []
    for upper, lower in zip(levels, levels[1:]):
        kids = []
        for a in upper:
            ch = [j for j, c in enumerate(lower) if c & a == c]
            if _or(lower[j] for j in ch) != a:
                raise ValueError("the chain is not nested")
            kids.append(ch)
        children.append(kids)
    s = np.arange(len(B))
    labels = tuple(np.array([(s & a) != 0 for a in lev]) for lev in levels)
    expl = ExplorationLabels(tuple(tuple(l) for l in levels), labels, tuple(children))
    laws = ()
    if nu is not None:
        laws = tuple(
            Pmf(np.bincount(expl.gamma_size(k), weights=nu.mass, minlength=len(levels[k]) + 1))
            for k in range(len(levels)))
    return Exploration(expl, laws)


def _or(masks) -> int:
    out = 0
    for m in masks:
        out |= m
    return out


def level_independence_defect(expl: ExplorationLabels, nu: SpectralProbability, k: int) -> float:
    """Largest deviation from independence of the level-``k`` inclusion indicators."""
    L = expl.labels[k]
    n = L.shape[0]
    marg = np.array([nu.mass[L[i]].sum() for i in range(n)])
    worst = 0.0
    for pattern in range(1 << n):
        sel = np.ones(L.shape[1], dtype=bool)
        prob = 1.0
        for i in range(n):
            inc = bool(pattern >> i & 1)
            sel &= L[i] == inc
            prob *= marg[i] if inc else 1.0 - marg[i]
        worst = max(worst, abs(float(nu.mass[sel].sum()) - prob))
    return worst


def level_exclusion_product(expl: ExplorationLabels, nu: SpectralProbability, k: int) -> float:
    """Product over level-``k`` atoms of their exclusion probabilities."""
    L = expl.labels[k]
    return float(np.prod([nu.mass[~L[i]].sum() for i in range(L.shape[0])]))


__all__ = [
    "Pmf", "binomial_convolution", "geometric_mean", "FosdResult", "fosd_compare", "fosd_check",
    "averaging_step", "iterate_averaging", "ExplorationLabels", "Exploration", "exploration",
    "level_independence_defect", "level_exclusion_product",
]
