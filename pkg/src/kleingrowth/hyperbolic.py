"""Upper half-plane / half-space models and Mobius isometries.

Points of H^2 are complex numbers with positive imaginary part. Points of
H^3 are triples ``(x, y, t)`` with height ``t > 0``; a matrix in SL(2, C)
acts on them through the Poincare extension.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .errors import OverflowDomainError, UsageError

#: Heights below this are treated as underflow of the binary64 action.
HEIGHT_FLOOR = 1e-300
#: Tolerance on ``|tr| - 2`` used by :func:`classify`.
TRACE_TOL = 1e-9


class Model(str, Enum):
    H2 = "H2"
    H3 = "H3"


class IsometryClass(str, Enum):
    IDENTITY = "identity"
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    LOXODROMIC = "loxodromic"


@dataclass(frozen=True)
class MobiusMap:
    """Unit-determinant 2x2 complex matrix ``[[a, b], [c, d]]``."""

    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def from_entries(cls, a, b, c, d) -> "MobiusMap":
        """Build a map from arbitrary invertible entries, rescaled to det 1."""
        a, b, c, d = complex(a), complex(b), complex(c), complex(d)
        det = a * d - b * c
        if det == 0:
            raise UsageError("singular matrix cannot define a Mobius map")
        r = cmath.sqrt(det)
        return cls(a / r, b / r, c / r, d / r)

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(1 + 0j, 0j, 0j, 1 + 0j)

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> complex:
        return self.a + self.d

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "MobiusMap") -> "MobiusMap":
        return compose(self, other)

    def __pow__(self, k: int) -> "MobiusMap":
        base = self if k >= 0 else self.inverse()
        result = MobiusMap.identity()
        k = abs(k)
        while k:
            if k & 1:
                result = compose(result, base)
            base = compose(base, base)
            k >>= 1
        return result

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def is_real(self, tol: float = 1e-12) -> bool:
        return all(abs(e.imag) <= tol for e in (self.a, self.b, self.c, self.d))

    def allclose(self, other: "MobiusMap", tol: float = 1e-12, projective: bool = True) -> bool:
        """Entrywise comparison; with ``projective`` the sign of the matrix is ignored."""
        mine = self.as_array()
        theirs = other.as_array()
        if np.max(np.abs(mine - theirs)) <= tol:
            return True
        return projective and np.max(np.abs(mine + theirs)) <= tol


@dataclass(frozen=True)
class HPoint:
    """A point of H^2 (``coords`` complex) or H^3 (``coords`` = (x, y, t))."""

    model: Model
    coords: Union[complex, tuple]

    def __post_init__(self):
        if self.model is Model.H2:
            z = complex(self.coords)
            if not z.imag > 0:
                raise UsageError(f"H2 point needs positive imaginary part, got {z!r}")
            object.__setattr__(self, "coords", z)
        else:
            x, y, t = (float(v) for v in self.coords)
            if not t > 0:
                raise UsageError(f"H3 point needs positive height, got t={t!r}")
            object.__setattr__(self, "coords", (x, y, t))

    @classmethod
    def h2(cls, z: complex) -> "HPoint":
        return cls(Model.H2, z)

    @classmethod
    def h3(cls, x: float, y: float, t: float) -> "HPoint":
        return cls(Model.H3, (x, y, t))

    @classmethod
    def base(cls, model: Model) -> "HPoint":
        """Default base point: ``i`` in H^2, ``(0, 0, 1)`` in H^3."""
        return cls.h2(1j) if Model(model) is Model.H2 else cls.h3(0.0, 0.0, 1.0)

    @property
    def height(self) -> float:
        return self.coords.imag if self.model is Model.H2 else self.coords[2]

    @property
    def horizontal(self) -> complex:
        """Boundary-parallel coordinate as a complex number."""
        if self.model is Model.H2:
            return complex(self.coords.real, 0.0)
        return complex(self.coords[0], self.coords[1])


def compose(m1: MobiusMap, m2: MobiusMap) -> MobiusMap:
    """Matrix product ``m1 @ m2`` rescaled back to determinant one."""
    a = m1.a * m2.a + m1.b * m2.c
    b = m1.a * m2.b + m1.b * m2.d
    c = m1.c * m2.a + m1.d * m2.c
    d = m1.c * m2.b + m1.d * m2.d
    det = a * d - b * c
    if det == 0:
        raise OverflowDomainError("composition lost its determinant")
    if abs(det - 1) > 1e-15:
        r = cmath.sqrt(det)
        a, b, c, d = a / r, b / r, c / r, d / r
    return MobiusMap(a, b, c, d)


def _abs2(z: complex) -> float:
    # products overflow to inf, whereas ``abs(z) ** 2`` raises
    return z.real * z.real + z.imag * z.imag


def apply(m: MobiusMap, p: HPoint, word_length: int | None = None) -> HPoint:
    """Act on ``p`` by ``m``; H^3 uses the Poincare extension.

    ``word_length`` is only used to label an overflow-domain error.
    """
    try:
        return _apply(m, p, word_length)
    except (OverflowError, ZeroDivisionError) as exc:
        raise OverflowDomainError(f"binary64 range exhausted in Mobius action ({exc})", word_length=word_length) from exc


def _apply(m: MobiusMap, p: HPoint, word_length: int | None) -> HPoint:
    if p.model is Model.H2:
        if not m.is_real(1e-9 * max(1.0, abs(m.a), abs(m.b), abs(m.c), abs(m.d))):
            raise UsageError("only real maps preserve the upper half-plane")
        z = p.coords
        den = m.c.real * z + m.d.real
        w = (m.a.real * z + m.b.real) / den
        # Im(g z) = Im z / |cz + d|^2 is exact for real unit-determinant maps
        h = z.imag / _abs2(den)
        if not h > HEIGHT_FLOOR or not math.isfinite(h) or not math.isfinite(w.real):
            raise OverflowDomainError("height underflow in Mobius action", word_length=word_length)
        return HPoint(Model.H2, complex(w.real, h))
    x, y, t = p.coords
    z = complex(x, y)
    cz_d = m.c * z + m.d
    den = _abs2(cz_d) + _abs2(m.c) * t * t
    num = (m.a * z + m.b) * cz_d.conjugate() + m.a * m.c.conjugate() * t * t
    h = t / den
    if not h > HEIGHT_FLOOR or not math.isfinite(h):
        raise OverflowDomainError("height underflow in Mobius action", word_length=word_length)
    w = num / den
    return HPoint(Model.H3, (w.real, w.imag, h))


def distance(p: HPoint, q: HPoint) -> float:
    """Hyperbolic distance.

    Uses ``d = 2 asinh(|p - q| / (2 sqrt(h_p h_q)))``, the half-angle form of
    ``cosh d = 1 + |p - q|^2 / (2 h_p h_q)``; it is exact at ``p == q`` and keeps
    full relative accuracy for small separations.
    """
    if p.model is not q.model:
        raise UsageError(f"cannot measure distance between {p.model.value} and {q.model.value} points")
    if p.model is Model.H2:
        eu = abs(p.coords - q.coords)
    else:
        eu = math.dist(p.coords, q.coords)
    return 2.0 * math.asinh(eu / (2.0 * math.sqrt(p.height * q.height)))


def cosh_distance(p: HPoint, q: HPoint) -> float:
    if p.model is not q.model:
        raise UsageError("model mismatch")
    if p.model is Model.H2:
        eu2 = abs(p.coords - q.coords) ** 2
    else:
        eu2 = math.dist(p.coords, q.coords) ** 2
    return 1.0 + eu2 / (2.0 * p.height * q.height)


def displacement(m: MobiusMap, p: HPoint) -> float:
    """Distance moved by ``p`` under ``m``."""
    return distance(p, apply(m, p))


def classify(m: MobiusMap, tol: float = TRACE_TOL) -> IsometryClass:
    """Trace test: identity, parabolic (|tr| = 2), loxodromic, or elliptic."""
    if m.allclose(MobiusMap.identity(), tol=tol):
        return IsometryClass.IDENTITY
    tr = m.trace
    if abs(tr.imag) <= tol and abs(abs(tr.real) - 2.0) <= tol:
        return IsometryClass.PARABOLIC
    if abs(tr.imag) <= tol:
        return IsometryClass.LOXODROMIC if abs(tr.real) > 2.0 else IsometryClass.ELLIPTIC
    # a non-real trace is always loxodromic
    return IsometryClass.LOXODROMIC


def fixes(m: MobiusMap, point: complex | float, tol: float = 1e-9) -> bool:
    """Whether ``m`` fixes a boundary point; ``inf`` is accepted."""
    if point == math.inf or (isinstance(point, complex) and cmath.isinf(point)):
        return abs(m.c) <= tol
    x = complex(point)
    return abs(m.c * x * x + (m.d - m.a) * x - m.b) <= tol * max(1.0, abs(x) ** 2)
