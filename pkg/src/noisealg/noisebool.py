"""Finite noise Boolean algebras.

A finite noise Boolean algebra is the power set of its atoms: every element
is the join of the atoms below it. Elements are therefore addressed by
bitmasks over the atom list, so that join is ``|``, meet is ``&`` and the
independent complement is the bitwise complement.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .probspace import (
    FiniteProbabilitySpace,
    SigmaField,
    are_independent,
    join,
    join_all,
    meet,
)

DEFAULT_ATOM_CAP = 12


class NotInAlgebraError(ValueError):
    """A sigma-field was expected to be an element of the algebra."""


class AxiomError(ValueError):
    """Construction input does not satisfy the noise Boolean algebra axioms."""

    def __init__(self, report: "VerificationReport"):
        self.report = report
        names = ", ".join(sorted({f.axiom for f in report.failures}))
        super().__init__(f"noise Boolean algebra axioms fail: {names}")


@dataclass(frozen=True)
class AxiomFailure:
    axiom: str
    witnesses: tuple
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "axiom": self.axiom,
            "witnesses": [[list(b) for b in w.blocks] for w in self.witnesses],
            "detail": self.detail,
        }


@dataclass(frozen=True)
class VerificationReport:
    failures: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.failures

    def axioms_failed(self) -> set[str]:
        return {f.axiom for f in self.failures}

    def to_json(self) -> list[dict]:
        return [f.to_dict() for f in self.failures]

    def __bool__(self):
        return self.passed


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def bits(mask: int) -> list[int]:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def submasks(mask: int) -> Iterator[int]:
    """All submasks of ``mask``, from ``mask`` itself down to 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def set_partitions(items: Sequence) -> Iterator[list[list]]:
    """All partitions of ``items`` into nonempty blocks."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


class NoiseBooleanAlgebra:
    """A finite noise Boolean algebra given by its atoms.

    Build instances with :func:`from_independency`, :func:`from_fields` or
    :func:`generated`; the constructor trusts its input.
    """

    def __init__(self, space: FiniteProbabilitySpace, atoms: Sequence[SigmaField]):
        self.space = space
        self.atoms = tuple(atoms)
        self.n_atoms = len(self.atoms)
        self.full_mask = (1 << self.n_atoms) - 1
        elements = [space.zero]
        for mask in range(1, 1 << self.n_atoms):
            low = mask & -mask
            elements.append(join(elements[mask ^ low], self.atoms[low.bit_length() - 1]))
        self._elements = tuple(elements)
        self._index = {x: m for m, x in enumerate(self._elements)}
        if len(self._index) != len(self._elements):
            raise ValueError("atoms do not generate distinct joins")

    # -- element access ---------------------------------------------------
    def __len__(self) -> int:
        return len(self._elements)

    def __iter__(self):
        return iter(self._elements)

    def __contains__(self, x) -> bool:
        return isinstance(x, SigmaField) and x in self._index

    @property
    def elements(self) -> tuple[SigmaField, ...]:
        return self._elements

    def element(self, mask: int) -> SigmaField:
        return self._elements[mask]

    def mask_of(self, x: SigmaField) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise NotInAlgebraError("sigma-field is not an element of the algebra") from None

    def as_mask(self, x) -> int:
        """Accept either a mask or an element."""
        if isinstance(x, (int, np.integer)):
            if not 0 <= int(x) <= self.full_mask:
                raise NotInAlgebraError(f"mask {x} out of range")
            return int(x)
        return self.mask_of(x)

    @property
    def zero(self) -> SigmaField:
        return self._elements[0]

    @property
    def one(self) -> SigmaField:
        return self._elements[self.full_mask]

    def complement(self, x) -> SigmaField:
        return self._elements[self.full_mask ^ self.as_mask(x)]

    def counting(self, x) -> int:
        """Number of atoms below ``x``."""
        return popcount(self.as_mask(x))

    def below(self, x) -> list[int]:
        """Masks of the elements contained in ``x``."""
        return sorted(submasks(self.as_mask(x)))

    # -- partitions and subalgebras --------------------------------------
    def partition_masks(self) -> Iterator[list[int]]:
        """Partitions of unity as lists of masks (groupings of the atoms)."""
        for part in set_partitions(range(self.n_atoms)):
            yield [sum(1 << i for i in block) for block in part]

    def partitions_of_unity(self) -> Iterator[list[SigmaField]]:
        for part in self.partition_masks():
            yield [self._elements[m] for m in part]

    def coarsen(self, groups: Sequence[int]) -> "NoiseBooleanAlgebra":
        """Subalgebra on the same space whose atoms are the given disjoint masks."""
        groups = [int(g) for g in groups]
        union = 0
        for g in groups:
            if g == 0 or g & union:
                raise ValueError("groups must be nonzero and pairwise disjoint")
            union |= g
        if union != self.full_mask:
            raise ValueError("groups must cover every atom")
        return NoiseBooleanAlgebra(self.space, [self._elements[g] for g in groups])

    def is_subalgebra_of(self, other: "NoiseBooleanAlgebra") -> bool:
        return self.space == other.space and all(x in other for x in self.atoms)

    def verify(self) -> VerificationReport:
        """Check that the atoms form a partition of unity."""
        failures = []
        for a in self.atoms:
            if a.is_trivial:
                failures.append(AxiomFailure("atoms", (a,), "atom equals the trivial field"))
        if join_all(self.atoms, self.space) != self.space.one:
            failures.append(AxiomFailure("unity", (), "atoms do not generate the full field"))
        for i, a in enumerate(self.atoms):
            rest = self.complement(1 << i)
            if not are_independent([a, rest]):
                failures.append(AxiomFailure("complement", (a, rest),
                                             "atom is not independent of the join of the others"))
        if not failures and not are_independent(self.atoms):
            failures.append(AxiomFailure("independency", tuple(self.atoms),
                                         "atoms are not jointly independent"))
        return VerificationReport(tuple(failures))

    def __repr__(self):
        return f"NoiseBooleanAlgebra(n_atoms={self.n_atoms}, n_outcomes={self.space.n})"


def from_independency(xs: Sequence[SigmaField], cap: int = DEFAULT_ATOM_CAP
                      ) -> NoiseBooleanAlgebra:
    """Classical algebra of all joins of an independency generating ``1_P``."""
    xs = list(xs)
    if len(xs) > cap:
        raise ValueError(f"{len(xs)} atoms exceed the cap of {cap}")
    if not xs:
        raise ValueError("need at least one sigma-field to fix the space")
    space = xs[0].space
    for x in xs:
        if x.is_trivial and space.n > 1:
            raise AxiomError(VerificationReport((AxiomFailure("atoms", (x,), "trivial member"),)))
    atoms = [x for x in xs if not x.is_trivial]
    if not are_independent(atoms):
        raise AxiomError(VerificationReport((
            AxiomFailure("independency", tuple(atoms), "members are not independent"),)))
    B = NoiseBooleanAlgebra(space, atoms)
    report = B.verify()
    if not report.passed:
        raise AxiomError(report)
    return B


def degenerate(space: FiniteProbabilitySpace) -> NoiseBooleanAlgebra:
    """The one-element algebra; requires a one-outcome space."""
    if space.n != 1:
        raise ValueError("the degenerate algebra lives on a one-outcome space")
    return NoiseBooleanAlgebra(space, [])


def _closure(space: FiniteProbabilitySpace, fields: Iterable[SigmaField]) -> set[SigmaField]:
    out = set(fields) | {space.zero, space.one}
    frontier = list(out)
    while frontier:
        new = []
        current = list(out)
        for x in frontier:
            for y in current:
                for z in (join(x, y), meet(x, y)):
                    if z not in out:
                        out.add(z)
                        new.append(z)
        frontier = new
    return out


def lattice_closure(space: FiniteProbabilitySpace, fields: Iterable[SigmaField]) -> list[SigmaField]:
    """Closure of a family under join and meet, including ``0_P`` and ``1_P``."""
    return sorted(_closure(space, fields), key=lambda x: (x.n_blocks, tuple(x.labels)))


def verify_axioms(space: FiniteProbabilitySpace, fields: Iterable[SigmaField]
                  ) -> VerificationReport:
    """Exhaustively check the noise Boolean algebra axioms on a family of fields.

    One failure entry is reported per violated axiom, with the first witness
    found.
    """
    elems = list(dict.fromkeys(fields))
    if not elems:
        raise ValueError("need a nonempty family")
    present = set(elems)
    failures: dict[str, AxiomFailure] = {}

    def fail(axiom, witnesses, detail):
        failures.setdefault(axiom, AxiomFailure(axiom, tuple(witnesses), detail))

    if space.zero not in present:
        fail("bounds", (space.zero,), "0_P missing")
    if space.one not in present:
        fail("bounds", (space.one,), "1_P missing")
    for x, y in itertools.combinations(elems, 2):
        if join(x, y) not in present:
            fail("closure_join", (x, y), "join not in the family")
        if meet(x, y) not in present:
            fail("closure_meet", (x, y), "meet not in the family")
    complements = {}
    lonely = []
    for x in elems:
        cands = [y for y in elems if join(x, y) == space.one and are_independent([x, y])]
        if not cands:
            lonely.append(x)
        elif len(cands) > 1:
            fail("complement_uniqueness", (x, cands[0], cands[1]), "several independent complements")
        else:
            complements[x] = cands[0]
    if lonely:
        fail("complement_existence", lonely, "no independent complement in the family")
    for x, xc in complements.items():
        for y in elems:
            if join(meet(y, x), meet(y, xc)) != y:
                fail("distributivity", (y, x), "y differs from (y meet x) join (y meet x')")
                break
    return VerificationReport(tuple(failures.values()))


def from_fields(space: FiniteProbabilitySpace, fields: Iterable[SigmaField]) -> NoiseBooleanAlgebra:
    """Build an algebra from an explicit family after verifying every axiom."""
    elems = list(dict.fromkeys(fields))
    report = verify_axioms(space, elems)
    if not report.passed:
        raise AxiomError(report)
    nonzero = [x for x in elems if x != space.zero]
    atoms = [x for x in nonzero if not any(y < x for y in nonzero)]
    atoms.sort(key=lambda a: tuple(a.labels))
    B = NoiseBooleanAlgebra(space, atoms)
    if set(B.elements) != set(elems):
        raise AxiomError(VerificationReport((AxiomFailure(
            "atomicity", (), "elements are not the joins of the atoms"),)))
    return B


def complement(B: NoiseBooleanAlgebra, x: SigmaField) -> SigmaField:
    return B.complement(x)


def atoms(B: NoiseBooleanAlgebra) -> list[SigmaField]:
    return list(B.atoms)


def partitions_of_unity(B: NoiseBooleanAlgebra) -> Iterator[list[SigmaField]]:
    return B.partitions_of_unity()


def subalgebra(B: NoiseBooleanAlgebra, x: SigmaField) -> NoiseBooleanAlgebra:
    """The algebra of elements below ``x``, realised on the quotient by ``x``.

    Outcomes of the quotient space are the blocks of ``x`` (indexed in
    canonical order) with their probabilities.
    """
    mask = B.as_mask(x)
    x = B.element(mask)
    quotient = FiniteProbabilitySpace(x.block_probs, (), B.space.tol)
    reps = x.representatives
    atoms_below = [SigmaField(B.atoms[i].labels[reps], quotient) for i in bits(mask)]
    return NoiseBooleanAlgebra(quotient, atoms_below)


def generated(space: FiniteProbabilitySpace, P: Sequence[SigmaField],
              complement: SigmaField | None = None) -> NoiseBooleanAlgebra:
    """Smallest algebra containing an independency ``P``.

    ``P`` must join to ``1_P`` unless the independent complement of its join is
    supplied.
    """
    members = [p for p in P if not p.is_trivial]
    if not are_independent(members):
        raise ValueError("the family is not an independency")
    top = join_all(members, space)
    if top != space.one:
        if complement is None:
            raise ValueError("family does not generate 1_P and no complement was supplied")
        if not are_independent([top, complement]) or join(top, complement) != space.one:
            raise ValueError("supplied field is not an independent complement of the join")
        members.append(complement)
    if not members:
        return degenerate(space)
    return from_independency(members, cap=max(DEFAULT_ATOM_CAP, len(members)))
