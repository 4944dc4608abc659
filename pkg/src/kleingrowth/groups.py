"""Shipped test groups and conversion between presentations and config documents."""

from __future__ import annotations

import math

from .errors import ValidationError
from .hyperbolic import HPoint, Model, MobiusMap
from .presentation import LOXODROMIC, PARABOLIC, Factor, GroupPresentation, validate


def _real(a, b, c, d) -> MobiusMap:
    return MobiusMap.from_entries(a, b, c, d)


def gamma2() -> GroupPresentation:
    """Principal congruence subgroup Gamma(2): free on two parabolics, delta = 1."""
    return GroupPresentation(
        Model.H2,
        (
            Factor.parabolic([_real(1, 2, 0, 1)], math.inf),
            Factor.parabolic([_real(1, 0, 2, 1)], 0.0),
        ),
        name="gamma2",
    )


def hyperbolic_translation(t: float) -> MobiusMap:
    """Translation by ``2 t`` along the geodesic from -1 to 1."""
    return _real(math.cosh(t), math.sinh(t), math.sinh(t), math.cosh(t))


def schottky(cusp_width: float = 6.0, translation: float = 1.0) -> GroupPresentation:
    """Parabolic ``z -> z + cusp_width`` free-product a loxodromic along (-1, 1).

    The translation's isometric circles have radius ``1 / sinh t`` about
    ``+-coth t``; they fit in a strip of width ``cusp_width`` when
    ``coth(t / 2) < cusp_width / 2``, which makes the group a discrete free product.
    """
    if not 1.0 / math.tanh(translation / 2.0) < cusp_width / 2.0:
        raise ValidationError(
            f"schottky({cusp_width}, {translation}): isometric circles do not fit the cusp strip"
        )
    return GroupPresentation(
        Model.H2,
        (
            Factor.parabolic([_real(1, cusp_width, 0, 1)], math.inf),
            Factor.loxodromic(hyperbolic_translation(translation)),
        ),
        name=f"schottky({cusp_width:g},{translation:g})",
    )


def h3_rank2(lattice: float = 4.0, translation: float = 1.5) -> GroupPresentation:
    """Rank-2 cusp at infinity (square lattice) free-product a loxodromic, in H^3."""
    if not 1.0 / math.tanh(translation / 2.0) < lattice / 2.0:
        raise ValidationError(
            f"h3_rank2({lattice}, {translation}): isometric spheres do not fit the cusp prism"
        )
    return GroupPresentation(
        Model.H3,
        (
            Factor.parabolic([_real(1, lattice, 0, 1), _real(1, 1j * lattice, 0, 1)], math.inf),
            Factor.loxodromic(hyperbolic_translation(translation)),
        ),
        name=f"h3_rank2({lattice:g},{translation:g})",
    )


SHIPPED = {
    "gamma2": gamma2,
    "schottky": schottky,
    "h3_rank2": h3_rank2,
}


def _pair(x: complex) -> list:
    return [x.real, x.imag]


def _unpair(p) -> complex:
    return complex(p[0], p[1])


def presentation_to_config(gp: GroupPresentation) -> dict:
    factors = []
    for f in gp.factors:
        entry = {
            "kind": f.kind,
            "generators": [[_pair(g.a), _pair(g.b), _pair(g.c), _pair(g.d)] for g in f.generators],
        }
        if f.is_parabolic:
            fp = f.fixed_point
            entry["fixed_point"] = "inf" if fp is None or math.isinf(abs(fp)) else _pair(fp)
        factors.append(entry)
    return {"model": gp.model.value, "name": gp.name, "factors": factors}


def presentation_from_config(doc: dict) -> GroupPresentation:
    """Build and validate a presentation from the ``group`` part of a config."""
    if "shipped" in doc:
        name = doc["shipped"]
        if name not in SHIPPED:
            raise ValidationError(f"unknown shipped group {name!r}; choose from {sorted(SHIPPED)}")
        gp = SHIPPED[name](**doc.get("parameters", {}))
    else:
        factors = []
        for i, f in enumerate(doc["factors"]):
            gens = []
            for g in f["generators"]:
                try:
                    gens.append(MobiusMap.from_entries(*(_unpair(e) for e in g)))
                except ValueError as exc:
                    raise ValidationError(f"factor {i}: {exc}") from exc
            if f["kind"] == PARABOLIC:
                fp = f.get("fixed_point", "inf")
                factors.append(Factor.parabolic(gens, math.inf if fp == "inf" else _unpair(fp)))
            elif f["kind"] == LOXODROMIC:
                if len(gens) != 1:
                    raise ValidationError(f"factor {i}: loxodromic factor must have one generator")
                factors.append(Factor.loxodromic(gens[0]))
        gp = GroupPresentation(Model(doc["model"]), tuple(factors), name=doc.get("name", ""))
    problems = validate(gp)
    if problems:
        raise ValidationError("invalid group presentation: " + "; ".join(problems))
    return gp


def point_from_config(model: Model, value) -> HPoint:
    if value is None:
        return HPoint.base(model)
    try:
        if model is Model.H2:
            return HPoint.h2(_unpair(value))
        return HPoint.h3(*value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad base point {value!r}: {exc}") from exc
