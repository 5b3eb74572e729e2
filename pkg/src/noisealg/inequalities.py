"""Bonferroni-type operator inequalities for conditional expectations.

For ``x_1..x_n`` in a noise Boolean algebra the alternating sum

    P_{join x} + sum_{k>=1} (-1)^k sum_{|J|=k} P_{z_J},
    z_J = (join of x outside J) join (meet over j in J of join of x over J - {j})

is a positive operator. It vanishes on chaos of order below ``n`` and
vanishes identically iff some ``x_i`` lies below the join of the others.
"""

from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .noisebool import (
    NoiseBooleanAlgebra,
    lattice_closure,
    set_partitions,
    verify_axioms,
)
from .operators import LinearOperator, cond_exp_operator
from .probspace import (
    FiniteProbabilitySpace,
    RandomVariable,
    SigmaField,
    are_independent,
    cond_exp,
    cond_exp_matrix,
    join,
    join_all,
    meet,
    sign_cube,
    sigma_of,
)
from .spectral import influence, low_chaos_basis, resolve

MAX_TUPLE = 5


@dataclass(frozen=True, eq=False)
class BonferroniReport:
    operator: LinearOperator
    min_eigenvalue: float
    equality_everywhere: bool
    equality_on_low_chaos: bool
    containment_witness: int | None
    low_chaos_form: float = 0.0
    low_chaos_dim: int = 0

    @property
    def holds(self) -> bool:
        return self.min_eigenvalue >= -self.operator.space.tol

    def to_dict(self) -> dict:
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "holds": self.holds,
            "equality_everywhere": self.equality_everywhere,
            "equality_on_low_chaos": self.equality_on_low_chaos,
            "containment_witness": self.containment_witness,
            "low_chaos_form": self.low_chaos_form,
            "low_chaos_dim": self.low_chaos_dim,
        }


def _or(masks) -> int:
    out = 0
    for m in masks:
        out |= m
    return out


def bonferroni_terms(masks: Sequence[int]) -> list[tuple[int, int]]:
    """``(sign, z)`` pairs of the alternating sum; the first is ``(+1, join x)``."""
    return [(1, _or(masks))] + [(s, z) for _, s, z in _terms_by_order(masks)]


def _assemble(B: NoiseBooleanAlgebra, terms) -> LinearOperator:
    out = np.zeros((B.space.n, B.space.n))
    for sign, z in terms:
        out += sign * cond_exp_matrix(B.element(z))
    return LinearOperator(out, B.space)


def _tuple_masks(B: NoiseBooleanAlgebra, xs) -> list[int]:
    masks = [B.as_mask(x) for x in xs]
    if len(masks) > MAX_TUPLE:
        raise ValueError(f"tuples longer than {MAX_TUPLE} are not supported")
    return masks


def containment_witness(masks: Sequence[int]) -> int | None:
    """First ``i`` with ``x_i`` below the join of the others."""
    for i, m in enumerate(masks):
        if m & ~_or(masks[j] for j in range(len(masks)) if j != i) == 0:
            return i
    return None


def signature_groups(B: NoiseBooleanAlgebra, masks: Sequence[int]) -> list[int]:
    """Atoms of the algebra generated by ``masks``: atoms of ``B`` grouped by
    which ``x_i`` contain them."""
    groups: dict[tuple, int] = {}
    for a in range(B.n_atoms):
        key = tuple(m >> a & 1 for m in masks)
        groups[key] = groups.get(key, 0) | (1 << a)
    return list(groups.values())


_LOW_CHAOS: "weakref.WeakKeyDictionary[NoiseBooleanAlgebra, dict]" = weakref.WeakKeyDictionary()


def _low_chaos(B: NoiseBooleanAlgebra, masks: Sequence[int]) -> np.ndarray:
    """Basis of chaos ``<= n-1`` of the subalgebra generated by ``masks``, memoised per grouping."""
    n = len(masks)
    if n == 0:
        return np.zeros((B.space.n, 0))
    groups = tuple(sorted(signature_groups(B, masks))) if B.n_atoms else ()
    cache = _LOW_CHAOS.setdefault(B, {})
    key = (groups, n - 1)
    if key not in cache:
        b = B.coarsen(list(groups)) if B.n_atoms else B
        cache[key] = low_chaos_basis(resolve(b), n - 1)
    return cache[key]


def bonferroni_operator(B: NoiseBooleanAlgebra, xs, tol: float | None = None) -> BonferroniReport:
    """Assemble the alternating sum and diagnose positivity and equality."""
    tol = B.space.tol if tol is None else tol
    masks = _tuple_masks(B, xs)
    op = _assemble(B, bonferroni_terms(masks))
    eig = op.eigenvalues()
    basis = _low_chaos(B, masks)
    forms = [abs(op.form(basis[:, j])) for j in range(basis.shape[1])]
    worst = max(forms, default=0.0)
    return BonferroniReport(
        operator=op,
        min_eigenvalue=float(eig[0]),
        equality_everywhere=bool(np.max(np.abs(eig)) <= tol),
        equality_on_low_chaos=worst <= tol,
        containment_witness=containment_witness(masks),
        low_chaos_form=worst,
        low_chaos_dim=basis.shape[1],
    )


@dataclass(frozen=True)
class TruncationCheck:
    m: int
    max_eigenvalue: float
    holds: bool


def _terms_by_order(masks: Sequence[int]) -> list[tuple[int, int, int]]:
    """``(k, sign, z)`` for every nonempty ``J`` of size ``k``."""
    n = len(masks)
    out = []
    for k in range(1, n + 1):
        for J in itertools.combinations(range(n), k):
            outside = _or(masks[i] for i in range(n) if i not in J)
            inner = -1
            for j in J:
                inner &= _or(masks[i] for i in J if i != j)
            out.append((k, (-1) ** k, outside | inner))
    return out


def bonferroni_truncated(B: NoiseBooleanAlgebra, xs, m: int, tol: float | None = None
                         ) -> TruncationCheck:
    """Check that the terms of order above ``m``, signed by ``(-1)^m``, are negative."""
    tol = B.space.tol if tol is None else tol
    masks = _tuple_masks(B, xs)
    n = len(masks)
    if not 0 <= m <= n:
        raise ValueError("m must lie in 0..n")
    terms = [((-1) ** m * s, z) for k, s, z in _terms_by_order(masks) if k > m]
    op = _assemble(B, terms) if terms else LinearOperator.zero(B.space)
    top = float(op.eigenvalues()[-1])
    return TruncationCheck(m, top, top <= tol)


def bonferroni_partial(B: NoiseBooleanAlgebra, xs, m: int) -> LinearOperator:
    """Leading term plus the terms of order at most ``m``."""
    masks = _tuple_masks(B, xs)
    terms = [(1, _or(masks))] + [(s, z) for k, s, z in _terms_by_order(masks) if k <= m]
    return _assemble(B, terms)


@dataclass(frozen=True, eq=False)
class TwoSidedWitness:
    negative: RandomVariable
    negative_form: float
    positive: RandomVariable
    positive_form: float

    @property
    def fails_both_ways(self) -> bool:
        return self.negative_form < 0 < self.positive_form


def partial_sum_witness(B: NoiseBooleanAlgebra, xs, m: int) -> TwoSidedWitness:
    """Unit vectors of extreme quadratic form for the order-``m`` partial sum."""
    op = bonferroni_partial(B, xs, m)
    S = op.symmetric_matrix()
    vals, vecs = np.linalg.eigh((S + S.T) / 2)
    root = np.sqrt(B.space.probs)
    lo = RandomVariable(vecs[:, 0] / root, B.space)
    hi = RandomVariable(vecs[:, -1] / root, B.space)
    return TwoSidedWitness(lo, float(vals[0]), hi, float(vals[-1]))


def _mean_zero_basis(x: SigmaField) -> list[np.ndarray]:
    """Unit mean-zero ``x``-measurable functions spanning ``L^2(P|x)_0``."""
    space = x.space
    ind = (x.labels[:, None] == np.arange(x.n_blocks)[None, :]).astype(float)
    cols = ind - x.block_probs[None, :]
    A = np.sqrt(space.probs)[:, None] * cols
    u, sv, _ = np.linalg.svd(A, full_matrices=False)
    keep = sv > 1e-10
    return [u[:, j] / np.sqrt(space.probs) for j in np.flatnonzero(keep)]


def bonferroni_independent(xs: Sequence[SigmaField], tol: float | None = None) -> BonferroniReport:
    """``(-1)^n sum_J (-1)^{|J|} P_{join_J x}`` for an independency, with its
    equality diagnostics."""
    xs = list(xs)
    if not xs:
        raise ValueError("need at least one sigma-field")
    space = xs[0].space
    tol = space.tol if tol is None else tol
    if not are_independent(xs):
        raise ValueError("the family is not an independency")
    n = len(xs)
    mat = np.zeros((space.n, space.n))
    for k in range(n + 1):
        for J in itertools.combinations(range(n), k):
            mat += (-1) ** (n + k) * cond_exp_matrix(join_all([xs[i] for i in J], space))
    op = LinearOperator(mat, space)
    eig = op.eigenvalues()
    bases = [_mean_zero_basis(x) for x in xs]
    worst, dim = 0.0, 0
    for k in range(n):
        for I in itertools.combinations(range(n), k):
            for factors in itertools.product(*[bases[i] for i in I]):
                f = np.prod(factors, axis=0) if factors else np.ones(space.n)
                worst = max(worst, abs(op.form(f)))
                dim += 1
    witness = next((i for i, x in enumerate(xs) if x.is_trivial), None)
    return BonferroniReport(op, float(eig[0]), bool(np.max(np.abs(eig)) <= tol),
                            worst <= tol, witness, worst, dim)


def influence_operator(B: NoiseBooleanAlgebra, y: int) -> LinearOperator:
    """Quadratic form of ``inf_y``: ``I - P_{y'}``."""
    return LinearOperator.identity(B.space) - cond_exp_operator(B.complement(y))


def influence_inequality_operator(B: NoiseBooleanAlgebra, xs) -> LinearOperator:
    """``sum_{J} (-1)^{|J|+1} inf_{z_J'} - inf_{(join x)'}`` as an operator."""
    masks = _tuple_masks(B, xs)
    full = B.full_mask
    op = -influence_operator(B, full ^ _or(masks))
    for k, s, z in _terms_by_order(masks):
        op = op + (-s) * influence_operator(B, full ^ z)
    return op


def partition_influence_chain(B: NoiseBooleanAlgebra, parts: Sequence[int], f) -> tuple[float, ...]:
    """The four members of the three-block chain, in increasing order when it holds:
    ``3 min pair``, ``sum pairs``, ``var + sum singles``, ``var + 3 max single``."""
    f = RandomVariable(np.asarray(f, dtype=float), B.space) if not isinstance(f, RandomVariable) else f
    a, b, c = parts
    pairs = [influence(B, a | b, f), influence(B, b | c, f), influence(B, a | c, f)]
    singles = [influence(B, m, f) for m in parts]
    var = f.var()
    return (3 * min(pairs), sum(pairs), var + sum(singles), var + 3 * max(singles))


def influence_inequality_check(B: NoiseBooleanAlgebra, xs, fs=None, tol: float | None = None) -> bool:
    """Operator form of the influence inequality, plus the scalar chain when
    ``xs`` is a partition of unity with three members."""
    tol = B.space.tol if tol is None else tol
    masks = _tuple_masks(B, xs)
    op = influence_inequality_operator(B, masks)
    if op.eigenvalues()[0] < -tol:
        return False
    is_partition = (len(masks) == 3 and _or(masks) == B.full_mask
                    and all(m and not (m & o) for m, o in itertools.permutations(masks, 2)))
    if is_partition:
        if fs is None:
            fs = [resolve(B).basis[:, j] for j in range(B.space.n)]
        for f in fs:
            chain = partition_influence_chain(B, masks, f)
            if any(lo > hi + tol for lo, hi in zip(chain, chain[1:])):
                return False
    return True


# -- counterexample ---------------------------------------------------------

def two_field_deficit(f, x1: SigmaField, x2: SigmaField) -> tuple[float, float, float]:
    """``(lhs, rhs, lhs - rhs)`` for the two-field Bonferroni inequality at ``f``."""
    lhs = cond_exp(f, join(x1, x2)).norm2() + cond_exp(f, meet(x1, x2)).norm2()
    rhs = cond_exp(f, x1).norm2() + cond_exp(f, x2).norm2()
    return lhs, rhs, lhs - rhs


def all_partitions(space: FiniteProbabilitySpace):
    for part in set_partitions(range(space.n)):
        yield space.field(part)


@dataclass(frozen=True)
class CounterexampleRecord:
    lhs: float
    rhs: float
    deficit: float
    join_is_full: bool
    meet_is_trivial: bool
    axioms_fail: bool
    complements_of_x1: int
    noise_pair_deficit: float
    swapped_deficit: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def counterexample_harness() -> CounterexampleRecord:
    """Two sigma-fields on four points violating the two-field inequality."""
    space, (xi1, xi2) = sign_cube(2)
    # outcomes: (1,1), (1,-1), (-1,1), (-1,-1)
    x1 = space.field([[0, 1], [2], [3]])
    x2 = sigma_of([xi2])
    lhs, rhs, deficit = two_field_deficit(xi2, x1, x2)
    report = verify_axioms(space, lattice_closure(space, [x1, x2]))
    complements = sum(1 for y in all_partitions(space)
                      if join(x1, y) == space.one and are_independent([x1, y]))
    _, _, pair_deficit = two_field_deficit(xi2, sigma_of([xi1]), x2)
    swapped = space.field([[0, 2], [1], [3]])
    _, _, swap_deficit = two_field_deficit(xi1, swapped, sigma_of([xi1]))
    return CounterexampleRecord(lhs, rhs, deficit, join(x1, x2) == space.one,
                                meet(x1, x2) == space.zero, not report.passed,
                                complements, pair_deficit, swap_deficit)
