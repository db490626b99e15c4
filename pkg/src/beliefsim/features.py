"""Feature schemas and the Pareto dominance relation between quality vectors.

Every agent carries one quality value per feature declared in the schema.
A feature's direction states which way is better (smaller distance is
better, larger resolution is better, ...). Vector u dominates vector v
when u is at least as good in every feature and strictly better in at
least one; equal vectors are peers, not each other's dominators.

Comparisons are exact (no epsilon): an epsilon-tolerant relation would
not be transitive and the partial-order guarantees below would not hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError


class Direction(Enum):
    SMALLER_IS_BETTER = "smaller_is_better"
    LARGER_IS_BETTER = "larger_is_better"


class Comparison(Enum):
    """Four-way outcome of comparing two quality vectors."""

    DOMINATES = "dominates"
    DOMINATED_BY = "dominated_by"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"

    def mirrored(self) -> "Comparison":
        if self is Comparison.DOMINATES:
            return Comparison.DOMINATED_BY
        if self is Comparison.DOMINATED_BY:
            return Comparison.DOMINATES
        return self


@dataclass(frozen=True)
class Feature:
    name: str
    direction: Direction
    unit: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            raise ValidationError("feature name must be non-empty")
        if not isinstance(self.direction, Direction):
            raise ValidationError(f"feature {self.name!r}: bad direction {self.direction!r}")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered, non-empty sequence of uniquely named features."""

    features: tuple[Feature, ...]

    def __post_init__(self) -> None:
        if not self.features:
            raise ValidationError("schema must declare at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate feature names in schema: {names}")

    @property
    def dimension(self) -> int:
        return len(self.features)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def index_of(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise ValidationError(f"unknown feature {name!r}")


@dataclass(frozen=True)
class FeatureVector:
    """An agent's quality values, one finite real per schema feature.

    A missing measurement must be encoded by the scenario as the worst
    possible quality; absent entries are not representable.
    """

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        # +0.0 canonicalizes -0.0 so serialized output is byte-stable
        clean = tuple(float(v) + 0.0 for v in self.values)
        for v in clean:
            if not math.isfinite(v):
                raise ValidationError(f"feature values must be finite, got {v!r}")
        object.__setattr__(self, "values", clean)

    def __len__(self) -> int:
        return len(self.values)


def _check_conforms(vec: FeatureVector, schema: FeatureSchema, label: str) -> None:
    if len(vec) != schema.dimension:
        raise ValidationError(
            f"{label}: expected {schema.dimension} values for schema, got {len(vec)}"
        )


def better_or_equal(a: float, b: float, direction: Direction) -> bool:
    """True iff value a is at least as good as b under the direction."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValidationError(f"values must be finite, got {a!r}, {b!r}")
    if direction is Direction.SMALLER_IS_BETTER:
        return a <= b
    return a >= b


def compare(u: FeatureVector, v: FeatureVector, schema: FeatureSchema) -> Comparison:
    """Classify the ordered pair (u, v) under Pareto dominance.

    DOMINATES requires u at least as good everywhere and strictly better
    somewhere; EQUAL requires equality in every feature.
    """
    _check_conforms(u, schema, "left vector")
    _check_conforms(v, schema, "right vector")
    u_ge = True  # u better-or-equal in every feature so far
    v_ge = True
    all_equal = True
    for a, b, feat in zip(u.values, v.values, schema.features):
        if a != b:
            all_equal = False
            if better_or_equal(a, b, feat.direction):
                v_ge = False
            else:
                u_ge = False
    if all_equal:
        return Comparison.EQUAL
    if u_ge and not v_ge:
        return Comparison.DOMINATES
    if v_ge and not u_ge:
        return Comparison.DOMINATED_BY
    return Comparison.INCOMPARABLE


def dominates(u: FeatureVector, v: FeatureVector, schema: FeatureSchema) -> bool:
    return compare(u, v, schema) is Comparison.DOMINATES


def join(u: FeatureVector, v: FeatureVector, schema: FeatureSchema) -> FeatureVector:
    """Componentwise best of each feature (least upper quality bound)."""
    _check_conforms(u, schema, "left vector")
    _check_conforms(v, schema, "right vector")
    out = []
    for a, b, feat in zip(u.values, v.values, schema.features):
        if feat.direction is Direction.SMALLER_IS_BETTER:
            out.append(min(a, b))
        else:
            out.append(max(a, b))
    return FeatureVector(tuple(out))


def meet(u: FeatureVector, v: FeatureVector, schema: FeatureSchema) -> FeatureVector:
    """Componentwise worst of each feature (greatest lower quality bound)."""
    _check_conforms(u, schema, "left vector")
    _check_conforms(v, schema, "right vector")
    out = []
    for a, b, feat in zip(u.values, v.values, schema.features):
        if feat.direction is Direction.SMALLER_IS_BETTER:
            out.append(max(a, b))
        else:
            out.append(min(a, b))
    return FeatureVector(tuple(out))
