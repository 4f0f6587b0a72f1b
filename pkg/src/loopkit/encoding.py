"""The angle-quantized class codec.

An oriented label (box + angle + class) is flattened into something a plain
axis-aligned detector can learn: the angle is quantized into one of k bins
and folded into an expanded class id c_hat = c * k + bin. Decoding reverses
the arithmetic and rebuilds the oriented box from the axis-aligned one using
the object's nominal aspect ratio.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import (
    TWO_PI,
    Aabb,
    Obb,
    aabb_of_obb,
    obb_angle,
    reconstruct_obb,
    wrap_angle,
)

__all__ = [
    "EncodingError",
    "UnknownClass",
    "AngleQuantizer",
    "CatalogEntry",
    "ObjectCatalog",
    "OrientedLabel",
    "UnorientedLabel",
    "quantize_angle",
    "o2u_class",
    "u2o_class",
    "encode_label",
    "decode_prediction",
]


class EncodingError(ValueError):
    """Base class for codec failures."""


class UnknownClass(EncodingError):
    """Expanded class decodes to a base class not present in the catalog."""


@dataclass(frozen=True)
class AngleQuantizer:
    """Uniform angle discretization with step ``theta_hat`` (radians).

    The bin count is k = ceil(2*pi / theta_hat); when the step does not
    divide the full turn the last bin is simply narrower.
    """

    theta_hat: float
    k: int = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.theta_hat <= TWO_PI):
            raise EncodingError(f"theta_hat must be in (0, 2*pi], got {self.theta_hat}")
        n = TWO_PI / self.theta_hat
        # guard against ceil(36.000000000000004) = 37 for exact divisors
        if abs(n - round(n)) < 1e-9:
            k = int(round(n))
        else:
            k = int(math.ceil(n))
        object.__setattr__(self, "k", max(k, 1))

    @classmethod
    def from_degrees(cls, step_deg: float) -> "AngleQuantizer":
        return cls(math.radians(step_deg))


@dataclass(frozen=True)
class CatalogEntry:
    class_id: int
    name: str
    nominal_ratio: float
    symmetric: bool = False
    group: str = ""

    def __post_init__(self):
        if self.class_id < 0:
            raise EncodingError(f"negative class id {self.class_id}")
        if not self.nominal_ratio > 0:
            raise EncodingError(f"non-positive ratio for {self.name!r}")


@dataclass(frozen=True)
class ObjectCatalog:
    """Ordered object catalog; class ids must be contiguous 0..C-1."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        ids = [e.class_id for e in entries]
        if ids != list(range(len(entries))):
            raise EncodingError(f"class ids must be contiguous 0..C-1, got {ids}")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, class_id: int) -> CatalogEntry:
        return self.entries[class_id]

    def __iter__(self):
        return iter(self.entries)

    @property
    def num_classes(self) -> int:
        return len(self.entries)

    @property
    def groups(self):
        """Group names in first-seen order, empty tags skipped."""
        seen = []
        for e in self.entries:
            if e.group and e.group not in seen:
                seen.append(e.group)
        return seen

    def to_json_obj(self):
        return [
            {
                "id": e.class_id,
                "name": e.name,
                "ratio": e.nominal_ratio,
                "symmetric": e.symmetric,
                "group": e.group,
            }
            for e in self.entries
        ]

    @classmethod
    def from_json_obj(cls, obj) -> "ObjectCatalog":
        entries = [
            CatalogEntry(
                class_id=int(rec["id"]),
                name=str(rec["name"]),
                nominal_ratio=float(rec["ratio"]),
                symmetric=bool(rec.get("symmetric", False)),
                group=str(rec.get("group", "")),
            )
            for rec in obj
        ]
        entries.sort(key=lambda e: e.class_id)
        return cls(tuple(entries))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_obj(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ObjectCatalog":
        return cls.from_json_obj(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class OrientedLabel:
    """Oriented ground-truth label or decoded prediction."""

    obb: Obb
    class_id: int
    theta: float
    confidence: float = 1.0

    def __post_init__(self):
        actual = obb_angle(self.obb)
        diff = abs(wrap_angle(self.theta - actual + math.pi) - math.pi)
        if diff > 1e-9:
            raise EncodingError(
                f"theta {self.theta} inconsistent with box angle {actual}"
            )

    @classmethod
    def from_obb(cls, obb: Obb, class_id: int, confidence: float = 1.0) -> "OrientedLabel":
        return cls(obb=obb, class_id=class_id, theta=obb_angle(obb), confidence=confidence)


@dataclass(frozen=True)
class UnorientedLabel:
    """Axis-aligned detector-native label/prediction with expanded class."""

    aabb: Aabb
    expanded_class: int
    confidence: float = 1.0

    def __post_init__(self):
        if self.expanded_class < 0:
            raise EncodingError(f"negative expanded class {self.expanded_class}")
        if not (0.0 <= self.confidence <= 1.0):
            raise EncodingError(f"confidence outside [0, 1]: {self.confidence}")


def quantize_angle(q: AngleQuantizer, theta: float) -> int:
    """Nearest bin index for an angle in [0, 2*pi).

    Round half up; the boundary value k folds back onto bin 0 (wraparound).
    """
    b = int(math.floor(theta / q.theta_hat + 0.5 + 1e-12))
    return b % q.k


def o2u_class(q: AngleQuantizer, class_id: int, theta: float) -> int:
    """Expand (class, angle) into a single detector class id."""
    if class_id < 0:
        raise EncodingError(f"negative class id {class_id}")
    return class_id * q.k + quantize_angle(q, theta)


def u2o_class(q: AngleQuantizer, expanded_class: int):
    """Split an expanded class back into (class_id, theta).

    theta is the bin index times the quantization step, folded into
    [0, 2*pi).
    """
    if expanded_class < 0:
        raise EncodingError(f"negative expanded class {expanded_class}")
    class_id = expanded_class // q.k
    theta = wrap_angle(q.theta_hat * (expanded_class % q.k))
    return class_id, theta


def encode_label(q: AngleQuantizer, label: OrientedLabel) -> UnorientedLabel:
    """Oriented -> unoriented: axis-aligned hull plus expanded class."""
    return UnorientedLabel(
        aabb=aabb_of_obb(label.obb),
        expanded_class=o2u_class(q, label.class_id, label.theta),
        confidence=label.confidence,
    )


def decode_prediction(
    q: AngleQuantizer, catalog: ObjectCatalog, pred: UnorientedLabel
) -> OrientedLabel:
    """Unoriented -> oriented: split the expanded class, then rebuild the
    oriented box from the axis-aligned one using the catalog's nominal
    aspect ratio for the decoded object."""
    class_id, theta = u2o_class(q, pred.expanded_class)
    if class_id >= len(catalog):
        raise UnknownClass(
            f"expanded class {pred.expanded_class} implies class {class_id}, "
            f"catalog has {len(catalog)}"
        )
    obb = reconstruct_obb(pred.aabb, theta, catalog[class_id].nominal_ratio)
    return OrientedLabel(
        obb=obb, class_id=class_id, theta=obb_angle(obb), confidence=pred.confidence
    )
