"""Free products of parabolic Z^r factors and loxodromic cyclic factors.

Elements are stored in free-product normal form: a sequence of syllables from
pairwise-adjacent-distinct factors, each syllable an exponent vector in Z^r.
The word metric is taken with respect to the generating set
``{gamma_ij^(+-1)} u {h_j^(+-1)}`` exactly as presented, so the length of a
syllable is the l1 norm of its exponent vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

from .errors import OverflowDomainError, UsageError
from .hyperbolic import (
    IsometryClass,
    Model,
    MobiusMap,
    classify,
    compose,
    fixes,
)

PARABOLIC = "parabolic"
LOXODROMIC = "loxodromic"

#: Exact counts above this are reported as overflow rather than returned.
COUNT_LIMIT = 2**127

_COMMUTE_TOL = 1e-9


@dataclass(frozen=True)
class Factor:
    """One free factor: a rank-r parabolic group or a cyclic loxodromic group."""

    kind: str
    generators: tuple
    fixed_point: complex | None = None

    def __post_init__(self):
        if self.kind not in (PARABOLIC, LOXODROMIC):
            raise UsageError(f"unknown factor kind {self.kind!r}")
        object.__setattr__(self, "generators", tuple(self.generators))

    @classmethod
    def parabolic(cls, generators: Sequence[MobiusMap], fixed_point=math.inf) -> "Factor":
        return cls(PARABOLIC, tuple(generators), complex(fixed_point))

    @classmethod
    def loxodromic(cls, generator: MobiusMap) -> "Factor":
        return cls(LOXODROMIC, (generator,))

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def is_parabolic(self) -> bool:
        return self.kind == PARABOLIC


@dataclass(frozen=True)
class GroupPresentation:
    model: Model
    factors: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def r_max(self) -> int:
        ranks = [f.rank for f in self.factors if f.is_parabolic]
        if not ranks:
            raise UsageError("presentation has no parabolic factor; r_max undefined")
        return max(ranks)

    @property
    def max_rank(self) -> int:
        """Longest exponent vector over all factors (loxodromic count as rank 1)."""
        return max(f.rank for f in self.factors)

    def letters(self) -> list[tuple[int, int, int]]:
        """Generating set as ``(factor, coordinate, sign)`` triples, in fixed order."""
        out = []
        for i, f in enumerate(self.factors):
            for j in range(f.rank):
                out.append((i, j, 1))
                out.append((i, j, -1))
        return out

    def letter_matrix(self, factor: int, coord: int, sign: int) -> MobiusMap:
        g = self.factors[factor].generators[coord]
        return g if sign > 0 else g.inverse()


@dataclass(frozen=True)
class Syllable:
    factor_index: int
    exponents: tuple

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(int(e) for e in self.exponents))
        if not any(self.exponents):
            raise UsageError("syllable exponent vector must be nonzero")

    @property
    def length(self) -> int:
        return sum(abs(e) for e in self.exponents)

    def inverse(self) -> "Syllable":
        return Syllable(self.factor_index, tuple(-e for e in self.exponents))


@dataclass(frozen=True)
class NormalWord:
    syllables: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "syllables", tuple(self.syllables))

    def is_normal(self) -> bool:
        return all(
            s.factor_index != t.factor_index for s, t in zip(self.syllables, self.syllables[1:])
        )

    def inverse(self) -> "NormalWord":
        return NormalWord(tuple(s.inverse() for s in reversed(self.syllables)))

    def __len__(self) -> int:
        return word_length(self)

    def __str__(self) -> str:
        if not self.syllables:
            return "e"
        return " ".join(f"g{s.factor_index}^{list(s.exponents)}" for s in self.syllables)


def word_length(w: NormalWord) -> int:
    if not w.is_normal():
        raise UsageError(f"word is not in normal form: {w}")
    return sum(s.length for s in w.syllables)


def matrix_of(w: NormalWord, gp: GroupPresentation) -> MobiusMap:
    """Ordered product of generator powers; parabolic generators commute within a syllable."""
    if not w.is_normal():
        raise UsageError(f"word is not in normal form: {w}")
    m = MobiusMap.identity()
    for syl in w.syllables:
        if not 0 <= syl.factor_index < len(gp.factors):
            raise UsageError(f"factor index {syl.factor_index} out of range")
        factor = gp.factors[syl.factor_index]
        if len(syl.exponents) != factor.rank:
            raise UsageError(
                f"syllable has {len(syl.exponents)} exponents, factor {syl.factor_index} has rank {factor.rank}"
            )
        for g, e in zip(factor.generators, syl.exponents):
            if e:
                m = compose(m, g**e)
    return m


def canonical_letters(exponents: Sequence[int]) -> Iterator[tuple[int, int]]:
    """Letters ``(coord, sign)`` that extend a syllable along its canonical path.

    Coordinates are filled in increasing index order and each one grows
    monotonically in absolute value, so every nonzero exponent vector has a
    unique canonical path from zero. ``exponents`` all-zero means a new syllable.
    """
    last = -1
    for j, e in enumerate(exponents):
        if e:
            last = j
    for j in range(len(exponents)):
        if j < last:
            continue
        if j == last:
            yield j, 1 if exponents[j] > 0 else -1
        else:
            yield j, 1
            yield j, -1


def validate(gp: GroupPresentation) -> list[str]:
    """Return the list of violated invariants; empty means accepted.

    Discreteness and the face-intersection condition of the fundamental
    polyhedron are not checked: the presentation is trusted on those.
    """
    problems = []
    if not gp.factors:
        problems.append("presentation has no factors")
    if not any(f.is_parabolic for f in gp.factors):
        problems.append("zonal: no parabolic factor")
    for i, f in enumerate(gp.factors):
        if f.rank < 1:
            problems.append(f"factor {i}: no generators")
            continue
        for j, g in enumerate(f.generators):
            if abs(g.det - 1) > 1e-9:
                problems.append(f"factor {i} generator {j}: determinant {g.det} != 1")
            if gp.model is Model.H2 and not g.is_real(1e-9):
                problems.append(f"factor {i} generator {j}: H2 generators must be real")
        if f.is_parabolic:
            if gp.model is Model.H2 and f.rank != 1:
                problems.append(f"factor {i}: H2 forces parabolic rank 1, got {f.rank}")
            if f.rank > 2:
                problems.append(f"factor {i}: rank {f.rank} exceeds the supported dimension (H3 max 2)")
            for j, g in enumerate(f.generators):
                cls = classify(g)
                if cls is not IsometryClass.PARABOLIC:
                    problems.append(f"factor {i} generator {j}: expected parabolic, classified {cls.value}")
                elif f.fixed_point is not None and not fixes(g, f.fixed_point):
                    problems.append(f"factor {i} generator {j}: does not fix {f.fixed_point}")
            for j in range(f.rank):
                for k in range(j + 1, f.rank):
                    gh = compose(f.generators[j], f.generators[k])
                    hg = compose(f.generators[k], f.generators[j])
                    if not gh.allclose(hg, tol=_COMMUTE_TOL):
                        problems.append(f"factor {i}: generators {j} and {k} do not commute")
        else:
            if f.rank != 1:
                problems.append(f"factor {i}: loxodromic factor must have one generator")
            cls = classify(f.generators[0])
            if cls is not IsometryClass.LOXODROMIC:
                problems.append(f"factor {i}: expected loxodromic, classified {cls.value}")
    return problems


def sphere_count_factor(r: int, k: int) -> int:
    """Number of vectors in Z^r with l1 norm exactly ``k`` (``k >= 1``)."""
    if r < 1 or k < 1:
        raise UsageError(f"sphere_count_factor needs r >= 1 and k >= 1, got r={r}, k={k}")
    return sum(2**j * math.comb(r, j) * math.comb(k - 1, j - 1) for j in range(1, min(r, k) + 1))


@lru_cache(maxsize=None)
def _sphere_table(ranks: tuple, n: int) -> tuple:
    # ends[m][i]: elements of length m whose last syllable lies in factor i
    counts = [1]
    ends = [[0] * len(ranks)]
    for m in range(1, n + 1):
        row = []
        for i, r in enumerate(ranks):
            total = 0
            for k in range(1, m + 1):
                before = 1 if k == m else sum(c for j, c in enumerate(ends[m - k]) if j != i)
                if before:
                    total += sphere_count_factor(r, k) * before
            row.append(total)
        ends.append(row)
        counts.append(sum(row))
        if counts[-1] >= COUNT_LIMIT:
            raise OverflowDomainError(f"sphere count exceeds 2^127 at length {m}")
    return tuple(counts)


def sphere_counts(gp: GroupPresentation, n: int) -> list[int]:
    """Exact counts of elements of each length ``0..n``."""
    if n < 0:
        raise UsageError("length must be nonnegative")
    return list(_sphere_table(tuple(f.rank for f in gp.factors), n))


def sphere_count_group(gp: GroupPresentation, n: int) -> int:
    """Exact number of elements with word length ``n``."""
    return sphere_counts(gp, n)[n]


def ball_count(gp: GroupPresentation, n: int) -> int:
    return sum(sphere_counts(gp, n))
