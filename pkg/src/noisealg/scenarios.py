"""Finite truncations of the standard examples of noise Boolean algebras.

Each generator returns a :class:`Scenario`: a space, an algebra (or a nested
chain of algebras), and named random variables and sigma-fields.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .noisebool import NoiseBooleanAlgebra, from_independency
from .probspace import (
    DEFAULT_OUTCOME_CAP,
    FiniteProbabilitySpace,
    RandomVariable,
    SigmaField,
    canonical_labels,
    product_space,
    sigma_of,
    sign_cube,
)
from .spectral import chaos_space, resolve

MAX_SIGNS = 12


@dataclass(eq=False)
class Scenario:
    space: FiniteProbabilitySpace
    algebra: NoiseBooleanAlgebra
    chain: tuple = ()
    named_rvs: dict = field(default_factory=dict)
    named_fields: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def rv(self, name: str) -> RandomVariable:
        try:
            return self.named_rvs[name]
        except KeyError:
            raise KeyError(f"unknown random variable {name!r}; "
                           f"known: {sorted(self.named_rvs)}") from None

    def field_name(self, x: SigmaField) -> str | None:
        for name, y in self.named_fields.items():
            if y == x:
                return name
        return None

    def element_name(self, mask: int) -> str:
        """Readable name of an element: the atoms below it joined by ``+``."""
        if mask == 0:
            return "0"
        names = []
        for i, a in enumerate(self.algebra.atoms):
            if mask >> i & 1:
                names.append(self.field_name(a) or f"a{i}")
        return "+".join(names)


def _check_range(name, value, lo, hi):
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")


def _named_atoms(prefix_names: Sequence[str], fields: Sequence[SigmaField]) -> dict:
    return dict(zip(prefix_names, fields))


def classical_signs(n: int) -> Scenario:
    """Uniform signs ``xi_1..xi_n`` with the algebra of their joint fields."""
    _check_range("n", n, 1, MAX_SIGNS)
    space, xi = sign_cube(n)
    atoms = [sigma_of([x]) for x in xi]
    B = from_independency(atoms)
    names = [f"x{i + 1}" for i in range(n)]
    return Scenario(space, B, (), {f"xi{i + 1}": x for i, x in enumerate(xi)},
                    _named_atoms(names, atoms), {"generator": "classical", "n": n})


def nonclassical_carrier(n: int, N: int, I: Sequence[int]) -> int:
    """Mask of the point carrying the character ``prod_{i in I} xi_i`` (1-based).

    Atom ``j < n`` stands for ``xi_{j+1} xi_{j+2}``; atom ``n`` is the tail.
    """
    I = sorted(set(I))
    if any(not 1 <= i <= N for i in I):
        raise ValueError("indices must lie in 1..N")
    mask = 0
    for j in range(1, n + 1):
        if sum(1 for i in I if i <= j) % 2:
            mask |= 1 << (j - 1)
    if sum(1 for i in I if i <= n + 1) % 2 or any(i > n + 1 for i in I):
        mask |= 1 << n
    return mask


def _character(xi: Sequence[RandomVariable], I: Sequence[int], space) -> RandomVariable:
    out = np.ones(space.n)
    for i in I:
        out = out * xi[i - 1].values
    return RandomVariable(out, space)


def simplest_nonclassical(n: int, N: int) -> Scenario:
    """Atoms ``sigma(xi_i xi_{i+1})`` for ``i <= n`` and ``sigma(xi_{n+1}, ..., xi_N)``."""
    _check_range("n", n, 1, MAX_SIGNS - 1)
    _check_range("N", N, n + 1, MAX_SIGNS)
    space, xi = sign_cube(N)
    atoms = [sigma_of([xi[i] * xi[i + 1]]) for i in range(n)]
    atoms.append(sigma_of(xi[n:]))
    B = from_independency(atoms)
    names = [f"y{i + 1}" for i in range(n)] + ["tail"]
    return Scenario(space, B, (), {f"xi{i + 1}": x for i, x in enumerate(xi)},
                    _named_atoms(names, atoms),
                    {"generator": "nonclassical", "n": n, "N": N})


def tweaked_nonclassical(n: int, N: int) -> Scenario:
    """As :func:`simplest_nonclassical` with an extra sign ``xi_inf`` in the tail atom."""
    _check_range("n", n, 1, MAX_SIGNS - 2)
    _check_range("N", N, n + 1, MAX_SIGNS - 1)
    space, xi = sign_cube(N + 1)
    xi_inf = xi[N]
    atoms = [sigma_of([xi[i] * xi[i + 1]]) for i in range(n)]
    atoms.append(sigma_of(list(xi[n:N]) + [xi_inf]))
    B = from_independency(atoms)
    names = [f"y{i + 1}" for i in range(n)] + ["tail"]
    rvs = {f"xi{i + 1}": x for i, x in enumerate(xi[:N])}
    rvs["xi_inf"] = xi_inf
    return Scenario(space, B, (), rvs, _named_atoms(names, atoms),
                    {"generator": "tweaked", "n": n, "N": N})


def carrier_check(scn: Scenario, tol: float = 1e-9) -> bool:
    """Every character of a (tweaked) nonclassical scenario sits on its predicted point."""
    n, N = scn.meta["n"], scn.meta["N"]
    res = resolve(scn.algebra)
    xi = [scn.named_rvs[f"xi{i + 1}"] for i in range(N)]
    tweaked = scn.meta["generator"] == "tweaked"
    for k in range(N + 1):
        for I in itertools.combinations(range(1, N + 1), k):
            chi = _character(xi, I, scn.space)
            targets = [(chi, nonclassical_carrier(n, N, I))]
            if tweaked:
                targets.append((chi * scn.named_rvs["xi_inf"], nonclassical_carrier(n, N, I) | 1 << n))
            for f, mask in targets:
                mu = res.spectral_measure(f)
                if abs(mu.mass[mask] - 1.0) > tol:
                    return False
    return True


# -- voter model ------------------------------------------------------------

def majority_rule(m: int = 3) -> np.ndarray:
    """Majority of ``m`` binary votes (``m`` odd) as a lookup table."""
    if m % 2 == 0 or m < 3:
        raise ValueError("majority needs an odd number of voters, at least three")
    table = np.zeros((2,) * m, dtype=np.int64)
    for a in itertools.product(range(2), repeat=m):
        table[a] = int(sum(a) > m / 2)
    return table


def validate_rule(rule: np.ndarray) -> tuple[int, int]:
    """Check symmetry and equal fiber sizes; returns ``(m, r)``."""
    rule = np.asarray(rule)
    m, r = rule.ndim, rule.shape[0]
    if m < 2 or r < 2 or any(s != r for s in rule.shape):
        raise ValueError("rule must be an r x ... x r table with m >= 2 axes and r >= 2")
    if rule.min() < 0 or rule.max() >= r:
        raise ValueError("rule values must be candidates 0..r-1")
    for perm in itertools.permutations(range(m)):
        if not np.array_equal(rule, np.transpose(rule, perm)):
            raise ValueError("rule is not symmetric")
    sizes = np.bincount(rule.ravel(), minlength=r)
    if np.any(sizes != sizes[0]):
        raise ValueError("rule fibers have unequal sizes")
    return m, r


def rigidity_check(rule: np.ndarray, tol: float = 1e-9) -> bool:
    """Whether ``f(rule(a)) = g(a_1) + ... + g(a_m)`` forces ``f`` constant."""
    m, r = validate_rule(rule)
    rows = []
    for a in itertools.product(range(r), repeat=m):
        row = np.zeros(2 * r)
        row[rule[a]] += 1.0
        for ai in a:
            row[r + ai] -= 1.0
        rows.append(row)
    K = scipy.linalg.null_space(np.array(rows))
    f_part = K[:r]
    return bool(np.max(np.abs(f_part - f_part.mean(axis=0)), initial=0.0) <= tol)


def influential_vote_probability(rule: np.ndarray) -> float:
    """Chance that the first vote can change the outcome, the others being uniform."""
    m, r = validate_rule(rule)
    hits = 0
    for rest in itertools.product(range(r), repeat=m - 1):
        outcomes = {int(rule[(x,) + rest]) for x in range(r)}
        hits += len(outcomes) > 1
    return hits / r ** (m - 1)


def voter_model(m: int = 3, r: int = 2, rule: np.ndarray | None = None, depth: int = 1,
                cap: int = DEFAULT_OUTCOME_CAP) -> Scenario:
    """Uniform leaf votes on an ``m``-ary tree of given depth, ruled upwards.

    The chain holds one algebra per level; the atoms at level ``k`` are the
    fields of the leaves below each level-``k`` node.
    """
    rule = majority_rule(m) if rule is None else np.asarray(rule)
    mm, rr = validate_rule(rule)
    if (mm, rr) != (m, r):
        raise ValueError("rule shape disagrees with m and r")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    n_leaves = m ** depth
    if r ** n_leaves > cap:
        raise ValueError(f"{r ** n_leaves} outcomes exceed the cap of {cap}")
    leaves = np.array(list(itertools.product(range(r), repeat=n_leaves)), dtype=np.int64)
    n = leaves.shape[0]
    space = FiniteProbabilitySpace(np.full(n, 1.0 / n), tuple(map(tuple, leaves)))
    values = leaves
    for _ in range(depth):
        groups = values.reshape(n, -1, m)
        values = rule[tuple(groups[:, :, j] for j in range(m))]
    root = values[:, 0]
    chain, fields = [], {}
    for k in range(depth + 1):
        width = m ** (depth - k)
        atoms = []
        for v in range(m ** k):
            block = leaves[:, v * width:(v + 1) * width]
            code = block @ (r ** np.arange(width - 1, -1, -1))
            x = SigmaField(canonical_labels(code), space)
            atoms.append(x)
            fields[f"N{k}_{v}"] = x
        chain.append(from_independency(atoms, cap=max(12, len(atoms))))
    ind = (root == 0).astype(float)
    x_root = (ind - 1.0 / r) / math.sqrt((1.0 / r) * (1.0 - 1.0 / r))
    rvs = {"X_root": RandomVariable(x_root, space), "root": RandomVariable(root.astype(float), space)}
    meta = {"generator": "voter", "m": m, "r": r, "depth": depth, "rule": rule.ravel().tolist()}
    return Scenario(space, chain[-1], tuple(chain), rvs, fields, meta)


def first_chaos_decay(m: int = 3, rule: np.ndarray | None = None, depth: int = 1) -> float:
    """Squared norm of the root observable's first-chaos component."""
    rule = majority_rule(m) if rule is None else np.asarray(rule)
    scn = voter_model(m, rule.shape[0], rule, depth)
    F1 = chaos_space(resolve(scn.algebra), 1)
    c = F1.T @ (scn.space.probs * scn.rv("X_root").values)
    return float(c @ c)


# -- split words ------------------------------------------------------------

def split_words(depth: int = 3, L: int = 1, cap: int = DEFAULT_OUTCOME_CAP) -> Scenario:
    """Level-``depth`` word of fair signs and embedding signs ``sigma_1..sigma_{depth-1}``.

    Going up a level keeps the odd-indexed letters (1-based) when the
    embedding sign is ``-1`` and the even-indexed ones otherwise.
    """
    if depth < 1 or L < 1:
        raise ValueError("depth and L must be positive")
    word_len = L * 2 ** (depth - 1)
    n_signs = word_len + depth - 1
    if 2 ** n_signs > cap:
        raise ValueError(f"{2 ** n_signs} outcomes exceed the cap of {cap}")
    space, xi = sign_cube(n_signs)
    arr = np.array([x.values for x in xi]).T
    word = arr[:, :word_len]
    sig = arr[:, word_len:]
    X = word
    for lvl in range(depth - 1, 0, -1):
        s = sig[:, lvl - 1][:, None]
        X = np.where(s == -1, X[:, 0::2], X[:, 1::2])
    atoms = [sigma_of([xi[word_len + i]]) for i in range(depth - 1)]
    atoms.append(sigma_of(xi[:word_len]))
    B = from_independency(atoms)
    names = [f"y{i + 1}" for i in range(depth - 1)] + ["tail"]
    rvs = {"X1_1": RandomVariable(X[:, 0], space)}
    rvs.update({f"sigma{i + 1}": xi[word_len + i] for i in range(depth - 1)})
    return Scenario(space, B, (), rvs, _named_atoms(names, atoms),
                    {"generator": "split_words", "depth": depth, "L": L})


def split_words_closed_form(depth: int) -> np.ndarray:
    """Spectral masses of ``X_1(1)``: ``2^-(depth-1)`` on each point containing the tail."""
    n = depth  # atoms: depth - 1 embedding signs plus the tail (highest bit)
    tail = 1 << (n - 1)
    return np.array([2.0 ** -(depth - 1) if s & tail else 0.0 for s in range(1 << n)])


# -- reverse filtrations ----------------------------------------------------

def _as_field(spec, space) -> SigmaField:
    if isinstance(spec, SigmaField):
        return spec
    if isinstance(spec, RandomVariable):
        spec = [spec]
    return sigma_of(list(spec), space)


def _space_of(spec) -> FiniteProbabilitySpace:
    if isinstance(spec, (SigmaField, RandomVariable)):
        return spec.space
    return list(spec)[0].space


def reverse_filtration(innovations: Sequence, tail, space: FiniteProbabilitySpace | None = None
                       ) -> Scenario:
    """Algebra of an innovation sequence and its tail field.

    Each innovation and the tail may be a sigma-field, a random variable or a
    list of random variables generating it.
    """
    if space is None:
        space = _space_of(innovations[0] if innovations else tail)
    ys = [_as_field(s, space) for s in innovations]
    t = _as_field(tail, space)
    B = from_independency(ys + [t])
    names = [f"y{i + 1}" for i in range(len(ys))] + ["tail"]
    return Scenario(space, B, (), {}, _named_atoms(names, ys + [t]),
                    {"generator": "reverse_filtration", "d": len(ys)})


def first_chaos_dimension(scn: Scenario) -> int:
    """Sum over atoms of ``dim L^2(P|a)_0``, the predicted first-chaos dimension."""
    return sum(a.n_blocks - 1 for a in scn.algebra.atoms)


# -- random algebras --------------------------------------------------------

def random_algebra(rng: np.random.Generator, n_atoms: int, sizes: Sequence[int] = (2, 3, 4),
                   max_outcomes: int = 256, permute: bool = True) -> NoiseBooleanAlgebra:
    """A random finite algebra: a product of small factors, outcomes shuffled.

    Every finite algebra arises this way up to relabelling, since its atoms
    are independent and jointly separate the outcomes.
    """
    while True:
        dims = [int(rng.choice(sizes)) for _ in range(n_atoms)]
        if math.prod(dims) <= max_outcomes:
            break
    factors = []
    for d in dims:
        w = rng.integers(1, 8, size=d).astype(float)
        factors.append(FiniteProbabilitySpace(w / w.sum()))
    prod, lifts = product_space(factors, cap=max_outcomes)
    perm = rng.permutation(prod.n) if permute else np.arange(prod.n)
    space = FiniteProbabilitySpace(prod.probs[perm], ())
    atoms = [SigmaField(lift.coords[perm], space) for lift in lifts]
    return from_independency(atoms)


def random_function(rng: np.random.Generator, space: FiniteProbabilitySpace) -> RandomVariable:
    return RandomVariable(rng.standard_normal(space.n), space)


GENERATORS: dict[str, Callable[..., Scenario]] = {
    "classical": classical_signs,
    "nonclassical": simplest_nonclassical,
    "tweaked": tweaked_nonclassical,
    "voter": voter_model,
    "split_words": split_words,
}
