"""Finite probability spaces, random variables and sigma-fields as partitions.

Every sigma-field on a finite, fully supported space is determined by the
partition of the outcomes into its atoms, so a :class:`SigmaField` is stored
as a canonical label array: ``labels[i]`` is the index of the block holding
outcome ``i``, with blocks numbered in order of their least outcome.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

DEFAULT_TOL = 1e-9
DEFAULT_OUTCOME_CAP = 65536


class SpaceMismatchError(ValueError):
    """Objects living on different probability spaces were combined."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FiniteProbabilitySpace:
    """Outcomes ``0..n-1`` (with optional labels) carrying strictly positive masses."""

    probs: np.ndarray
    outcomes: tuple = ()
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", _frozen(probs))
        if not self.outcomes:
            object.__setattr__(self, "outcomes", tuple(range(len(probs))))
        if len(self.outcomes) != len(probs):
            raise ValueError("one label per outcome is required")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise ValueError("outcome labels must be unique")

    @property
    def n(self) -> int:
        return len(self.probs)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, FiniteProbabilitySpace):
            return NotImplemented
        return self.outcomes == other.outcomes and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.outcomes, self.probs.tobytes()))

    def __repr__(self):
        return f"FiniteProbabilitySpace(n={self.n})"

    # -- random variables -------------------------------------------------
    def rv(self, values) -> "RandomVariable":
        return RandomVariable(np.asarray(values, dtype=float), self)

    def constant(self, c: float = 1.0) -> "RandomVariable":
        return RandomVariable(np.full(self.n, float(c)), self)

    def indicator(self, event: Iterable[int]) -> "RandomVariable":
        v = np.zeros(self.n)
        v[list(event)] = 1.0
        return RandomVariable(v, self)

    def expect(self, f) -> float:
        return float(np.dot(self.probs, _values(f)))

    def inner(self, f, g) -> float:
        return float(np.dot(self.probs, _values(f) * _values(g)))

    # -- sigma-fields -----------------------------------------------------
    @property
    def zero(self) -> "SigmaField":
        """The trivial sigma-field ``0_P`` (one block)."""
        return SigmaField(np.zeros(self.n, dtype=np.int64), self)

    @property
    def one(self) -> "SigmaField":
        """The full sigma-field ``1_P`` (all singletons)."""
        return SigmaField(np.arange(self.n, dtype=np.int64), self)

    def field(self, blocks: Iterable[Iterable[int]]) -> "SigmaField":
        return SigmaField.from_blocks(self, blocks)


def make_space(probs: Sequence[float], outcomes: Sequence | None = None,
               tol: float = DEFAULT_TOL) -> FiniteProbabilitySpace:
    """Build a fully supported space from a list of positive masses.

    Masses are kept as given when they sum to 1 within ``1e-12``, divided
    by their sum when within ``1e-9``, and rejected otherwise.
    """
    p = np.asarray(list(probs), dtype=float)
    if p.size == 0:
        raise ValueError("a probability space needs at least one outcome")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("every outcome must carry strictly positive probability")
    total = math.fsum(p)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    if abs(total - 1.0) > 1e-12:
        p = p / total
    return FiniteProbabilitySpace(p, tuple(outcomes) if outcomes is not None else (), tol)


def _values(f) -> np.ndarray:
    if isinstance(f, RandomVariable):
        return f.values
    return np.asarray(f, dtype=float)


def _check_same(a: FiniteProbabilitySpace, b: FiniteProbabilitySpace):
    if a is not b and a != b:
        raise SpaceMismatchError("objects live on different probability spaces")


@dataclass(frozen=True, eq=False)
class RandomVariable:
    """A real function on the outcomes of a finite space."""

    values: np.ndarray
    space: FiniteProbabilitySpace

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.space.n,):
            raise ValueError(f"expected {self.space.n} values, got shape {v.shape}")
        object.__setattr__(self, "values", _frozen(v))

    __array_priority__ = 1000

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)

    def _coerce(self, other):
        if isinstance(other, RandomVariable):
            _check_same(self.space, other.space)
            return other.values
        return other

    def __add__(self, other):
        return RandomVariable(self.values + self._coerce(other), self.space)

    __radd__ = __add__

    def __sub__(self, other):
        return RandomVariable(self.values - self._coerce(other), self.space)

    def __rsub__(self, other):
        return RandomVariable(self._coerce(other) - self.values, self.space)

    def __mul__(self, other):
        return RandomVariable(self.values * self._coerce(other), self.space)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return RandomVariable(self.values / self._coerce(other), self.space)

    def __neg__(self):
        return RandomVariable(-self.values, self.space)

    def __pow__(self, k):
        return RandomVariable(self.values ** k, self.space)

    def mean(self) -> float:
        return self.space.expect(self.values)

    def norm2(self) -> float:
        """Second moment ``E[f^2]``."""
        return self.space.inner(self.values, self.values)

    def var(self) -> float:
        m = self.mean()
        return self.space.inner(self.values - m, self.values - m)

    def allclose(self, other, atol: float | None = None) -> bool:
        atol = self.space.tol if atol is None else atol
        return bool(np.allclose(self.values, _values(other), rtol=0.0, atol=atol))

    def __repr__(self):
        return f"RandomVariable({np.array2string(self.values, precision=6)})"


def canonical_labels(raw) -> np.ndarray:
    """Relabel blocks so that they are numbered by first occurrence."""
    raw = np.asarray(raw)
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse.ravel()].astype(np.int64)


@dataclass(frozen=True, eq=False)
class SigmaField:
    """A sub-sigma-field of a finite space, i.e. a partition of its outcomes."""

    labels: np.ndarray
    space: FiniteProbabilitySpace
    n_blocks: int = field(init=False)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.shape != (self.space.n,):
            raise ValueError("one block label per outcome is required")
        labels = canonical_labels(labels)
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "n_blocks", int(labels.max()) + 1)

    @classmethod
    def from_blocks(cls, space: FiniteProbabilitySpace, blocks) -> "SigmaField":
        labels = np.full(space.n, -1, dtype=np.int64)
        for k, block in enumerate(blocks):
            block = list(block)
            if not block:
                raise ValueError("blocks must be nonempty")
            idx = np.asarray(block, dtype=np.int64)
            if np.any(idx < 0) or np.any(idx >= space.n):
                raise ValueError(f"outcome index out of range in block {block}")
            if np.any(labels[idx] >= 0):
                raise ValueError("blocks must be pairwise disjoint")
            labels[idx] = k
        if np.any(labels < 0):
            raise ValueError("blocks must cover every outcome")
        return cls(labels, space)

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        order = np.argsort(self.labels, kind="stable")
        cuts = np.cumsum(np.bincount(self.labels, minlength=self.n_blocks))[:-1]
        return tuple(tuple(int(i) for i in b) for b in np.split(order, cuts))

    @property
    def block_probs(self) -> np.ndarray:
        return np.bincount(self.labels, weights=self.space.probs, minlength=self.n_blocks)

    @property
    def representatives(self) -> np.ndarray:
        """Least outcome of each block."""
        _, first = np.unique(self.labels, return_index=True)
        return first

    def __eq__(self, other):
        if not isinstance(other, SigmaField):
            return NotImplemented
        return (self.space is other.space or self.space == other.space) and \
            np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())

    def __le__(self, other: "SigmaField") -> bool:
        """``x <= y`` iff x is a sub-sigma-field of y (y refines x)."""
        _check_same(self.space, other.space)
        # each block of `other` sits inside a single block of `self`
        pairs = np.unique(np.stack([other.labels, self.labels]), axis=1)
        return pairs.shape[1] == other.n_blocks

    def __ge__(self, other: "SigmaField") -> bool:
        return other <= self

    def __lt__(self, other):
        return self <= other and self != other

    def __gt__(self, other):
        return other < self

    def __or__(self, other):
        return join(self, other)

    def __and__(self, other):
        return meet(self, other)

    @property
    def is_trivial(self) -> bool:
        return self.n_blocks == 1

    def __repr__(self):
        if self.space.n <= 16:
            return f"SigmaField({[list(b) for b in self.blocks]})"
        return f"SigmaField(n_blocks={self.n_blocks})"


def _cluster_1d(values: np.ndarray, tol: float) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    v = values[order]
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    breaks = np.concatenate([[0], np.cumsum(np.diff(v) > tol * scale)])
    labels = np.empty(len(values), dtype=np.int64)
    labels[order] = breaks
    return labels


def sigma_of(fs: Sequence[RandomVariable], space: FiniteProbabilitySpace | None = None,
             tol: float | None = None) -> SigmaField:
    """Sigma-field generated by random variables: their joint level sets.

    Values closer than ``tol`` (relative to the largest magnitude) count as
    equal, so that numerically computed variables generate the intended
    partition.
    """
    fs = list(fs)
    if space is None:
        if not fs:
            raise ValueError("need a space when no generators are given")
        space = fs[0].space
    for f in fs:
        _check_same(space, f.space)
    tol = space.tol if tol is None else tol
    out = space.zero
    for f in fs:
        out = join(out, SigmaField(_cluster_1d(f.values, tol), space))
    return out


def cond_exp(f, x: SigmaField) -> RandomVariable:
    """Conditional expectation of ``f`` given ``x``: blockwise averaging."""
    if isinstance(f, RandomVariable):
        _check_same(f.space, x.space)
    v = _values(f)
    p = x.space.probs
    num = np.bincount(x.labels, weights=p * v, minlength=x.n_blocks)
    den = np.bincount(x.labels, weights=p, minlength=x.n_blocks)
    return RandomVariable((num / den)[x.labels], x.space)


def cond_exp_matrix(x: SigmaField) -> np.ndarray:
    """Matrix of ``cond_exp(., x)`` acting on value vectors."""
    p = x.space.probs
    same = x.labels[:, None] == x.labels[None, :]
    return same * (p[None, :] / x.block_probs[x.labels][:, None])


def join(x: SigmaField, y: SigmaField) -> SigmaField:
    """Smallest sigma-field containing both: the common refinement."""
    _check_same(x.space, y.space)
    key = x.labels * y.n_blocks + y.labels
    return SigmaField(key, x.space)


def join_all(xs: Iterable[SigmaField], space: FiniteProbabilitySpace) -> SigmaField:
    out = space.zero
    for x in xs:
        out = join(out, x)
    return out


def meet(x: SigmaField, y: SigmaField) -> SigmaField:
    """Intersection of sigma-fields: connected components of block overlaps."""
    _check_same(x.space, y.space)
    nx, ny = x.n_blocks, y.n_blocks
    graph = coo_matrix((np.ones(x.space.n), (x.labels, nx + y.labels)),
                       shape=(nx + ny, nx + ny))
    _, comp = connected_components(graph, directed=False)
    return SigmaField(comp[x.labels], x.space)


def meet_all(xs: Iterable[SigmaField], space: FiniteProbabilitySpace) -> SigmaField:
    out = space.one
    for x in xs:
        out = meet(out, x)
    return out


def are_independent(xs: Sequence[SigmaField], tol: float | None = None) -> bool:
    """Mutual independence, checked on every choice of one block per field."""
    xs = list(xs)
    if len(xs) <= 1:
        return True
    space = xs[0].space
    for x in xs[1:]:
        _check_same(space, x.space)
    tol = space.tol if tol is None else tol
    sizes = [x.n_blocks for x in xs]
    cells = math.prod(sizes)
    if cells > space.n:
        # a product of full-support marginals charges every cell
        return False
    idx = np.ravel_multi_index([x.labels for x in xs], sizes)
    joint = np.bincount(idx, weights=space.probs, minlength=cells)
    product = np.ones(1)
    for x in xs:
        product = np.multiply.outer(product, x.block_probs).ravel()
    return bool(np.max(np.abs(joint - product)) <= tol)


def are_pairwise_independent(xs: Sequence[SigmaField], tol: float | None = None) -> bool:
    return all(are_independent([a, b], tol) for a, b in itertools.combinations(xs, 2))


class CoordinateLift:
    """Embeds random variables and sigma-fields of one factor into a product."""

    def __init__(self, product: FiniteProbabilitySpace, factor: FiniteProbabilitySpace,
                 coords: np.ndarray):
        self.product = product
        self.factor = factor
        self.coords = coords

    def rv(self, f) -> RandomVariable:
        if isinstance(f, RandomVariable):
            _check_same(f.space, self.factor)
        return RandomVariable(_values(f)[self.coords], self.product)

    def field(self, x: SigmaField) -> SigmaField:
        _check_same(x.space, self.factor)
        return SigmaField(x.labels[self.coords], self.product)


def product_space(spaces: Sequence[FiniteProbabilitySpace], cap: int = DEFAULT_OUTCOME_CAP):
    """Independent product of finite spaces, with one coordinate lift per factor.

    Outcomes are ordered lexicographically (last factor varies fastest).
    """
    spaces = list(spaces)
    if not spaces:
        raise ValueError("need at least one factor")
    sizes = [s.n for s in spaces]
    total = math.prod(sizes)
    if total > cap:
        raise ValueError(f"product has {total} outcomes, above the cap of {cap}")
    grids = np.indices(sizes).reshape(len(sizes), -1)
    probs = np.ones(total)
    for s, g in zip(spaces, grids):
        probs = probs * s.probs[g]
    labels = tuple(zip(*[[s.outcomes[i] for i in g] for s, g in zip(spaces, grids)]))
    space = FiniteProbabilitySpace(probs, labels, min(s.tol for s in spaces))
    lifts = [CoordinateLift(space, s, g) for s, g in zip(spaces, grids)]
    return space, lifts


def sign_cube(n: int, tol: float = DEFAULT_TOL):
    """Uniform space on ``{1,-1}^n`` with its coordinate signs ``xi_1..xi_n``.

    Outcomes are listed lexicographically with ``+1`` before ``-1``.
    """
    points = list(itertools.product((1, -1), repeat=n))
    space = FiniteProbabilitySpace(np.full(len(points), 1.0 / len(points)), tuple(points), tol)
    arr = np.array(points, dtype=float).reshape(len(points), n)
    signs = [RandomVariable(arr[:, i], space) for i in range(n)]
    return space, signs
