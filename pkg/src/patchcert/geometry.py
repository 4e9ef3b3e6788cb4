"""Covering mask-set geometry.

Masks are axis-aligned rectangles occluding part of an image. A mask set is
built so that every placement of a p1 x p2 patch is fully contained in at
least one mask; ``verify_covering`` checks that property by enumerating all
placements and recording which masks contain each one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PatchSpec:
    """Estimated adversarial patch size: fixed pixels or an image-area fraction.

    The fraction form resolves per axis to ceil(sqrt(fraction) * n), i.e. a
    square patch whose area is the given fraction of the image.
    """

    p1: int | None = None
    p2: int | None = None
    fraction: float | None = None

    @classmethod
    def pixels(cls, p1: int, p2: int | None = None) -> "PatchSpec":
        p1 = int(p1)
        p2 = int(p1 if p2 is None else p2)
        if p1 < 1 or p2 < 1:
            raise ConfigError(f"patch size must be >= 1 pixel per axis, got {p1}x{p2}")
        return cls(p1=p1, p2=p2)

    @classmethod
    def area_fraction(cls, fraction: float) -> "PatchSpec":
        if not 0.0 < fraction <= 1.0:
            raise ConfigError(f"patch area fraction must be in (0, 1], got {fraction}")
        return cls(fraction=float(fraction))

    @classmethod
    def parse(cls, text: str) -> "PatchSpec":
        """Parse "P" (square, pixels), "P1xP2" (per-axis pixels), or "F%" (area)."""
        text = text.strip().lower()
        if text.endswith("%"):
            try:
                percent = float(text[:-1])
            except ValueError:
                raise ConfigError(f"bad patch spec {text!r}") from None
            return cls.area_fraction(percent / 100.0)
        if "x" in text:
            parts = text.split("x")
            if len(parts) != 2:
                raise ConfigError(f"bad patch spec {text!r}")
            try:
                return cls.pixels(int(parts[0]), int(parts[1]))
            except ValueError:
                raise ConfigError(f"bad patch spec {text!r}") from None
        try:
            return cls.pixels(int(text))
        except ValueError:
            raise ConfigError(f"bad patch spec {text!r}") from None

    def resolve(self, n1: int, n2: int) -> tuple[int, int]:
        """Patch size in pixels for an n1 x n2 image, validated against bounds."""
        if self.fraction is not None:
            side = math.sqrt(self.fraction)
            p1, p2 = math.ceil(side * n1), math.ceil(side * n2)
        else:
            p1, p2 = self.p1, self.p2
        for axis, p, n in ((1, p1, n1), (2, p2, n2)):
            if p is None or p < 1:
                raise ConfigError(f"axis {axis}: patch size must be >= 1 pixel, got {p}")
            if p > n:
                raise ConfigError(f"axis {axis}: patch size {p} exceeds image extent {n}")
        return int(p1), int(p2)


@dataclass(frozen=True)
class Mask:
    """Axis-aligned occlusion rectangle; interior pixels read as occluded."""

    y0: int
    x0: int
    m1: int
    m2: int

    def contains_patch(self, i: int, j: int, p1: int, p2: int) -> bool:
        """True iff a p1 x p2 patch placed at (i, j) lies fully inside this mask."""
        return (
            self.y0 <= i
            and self.x0 <= j
            and i + p1 <= self.y0 + self.m1
            and j + p2 <= self.x0 + self.m2
        )


@dataclass(frozen=True)
class MaskSet:
    """Ordered, index-stable list of masks plus the parameters that shaped it.

    Masks are enumerated row-major over their top-left offsets; per-mask
    arrays elsewhere in the package index into this order.
    """

    masks: tuple[Mask, ...]
    n1: int
    n2: int
    k1: int
    k2: int
    s1: int
    s2: int
    p1: int
    p2: int

    def __len__(self) -> int:
        return len(self.masks)

    def to_json(self) -> str:
        doc = {
            "n1": self.n1,
            "n2": self.n2,
            "k1": self.k1,
            "k2": self.k2,
            "p1": self.p1,
            "p2": self.p2,
            "masks": [
                {"y0": m.y0, "x0": m.x0, "m1": m.m1, "m2": m.m2} for m in self.masks
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "MaskSet":
        doc = json.loads(text)
        masks = tuple(Mask(m["y0"], m["x0"], m["m1"], m["m2"]) for m in doc["masks"])
        if not masks:
            raise ConfigError("mask set document contains no masks")
        # Strides are recovered from the first two distinct offsets per axis.
        ys = sorted({m.y0 for m in masks})
        xs = sorted({m.x0 for m in masks})
        s1 = ys[1] - ys[0] if len(ys) > 1 else masks[0].m1
        s2 = xs[1] - xs[0] if len(xs) > 1 else masks[0].m2
        return cls(
            masks=masks,
            n1=doc["n1"],
            n2=doc["n2"],
            k1=doc["k1"],
            k2=doc["k2"],
            s1=s1,
            s2=s2,
            p1=doc["p1"],
            p2=doc["p2"],
        )


def _axis_layout(n: int, p: int, k: int, axis: int) -> tuple[int, int, list[int]]:
    """Mask size, stride, and offsets for one axis.

    Picks the smallest mask size m >= p whose stride s = m - p + 1 fits the
    budget of k masks; the final offset is clamped to n - m so every mask stays
    in bounds. When no m < n fits, a single full-extent mask is used.
    """
    if k < 1:
        raise ConfigError(f"axis {axis}: mask budget must be >= 1, got {k}")
    for m in range(p, n):
        s = m - p + 1
        if math.ceil((n - m) / s) + 1 <= k:
            return m, s, list(range(0, n - m, s)) + [n - m]
    return n, 1, [0]


def generate_mask_set(
    n1: int, n2: int, patch: PatchSpec, k1: int, k2: int
) -> MaskSet:
    """Covering mask set for an n1 x n2 image under a k1 x k2 mask budget."""
    p1, p2 = patch.resolve(n1, n2)
    m1, s1, ys = _axis_layout(n1, p1, k1, axis=1)
    m2, s2, xs = _axis_layout(n2, p2, k2, axis=2)
    masks = tuple(Mask(y0, x0, m1, m2) for y0 in ys for x0 in xs)
    return MaskSet(
        masks=masks, n1=n1, n2=n2, k1=k1, k2=k2, s1=s1, s2=s2, p1=p1, p2=p2
    )


@dataclass
class CoveringReport:
    """Placement-by-placement record of which masks contain each patch position."""

    covered: bool
    placements_shape: tuple[int, int]
    containment: np.ndarray  # bool, shape (P1, P2, |masks|)

    def masks_for(self, i: int, j: int) -> list[int]:
        return [int(m) for m in np.flatnonzero(self.containment[i, j])]

    @property
    def uncovered(self) -> list[tuple[int, int]]:
        if self.containment.size == 0:
            return []
        bad = ~self.containment.any(axis=2)
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(bad))]


def verify_covering(ms: MaskSet) -> CoveringReport:
    """Check that every patch placement is fully contained in some mask.

    Enumerates all (n1-p1+1) * (n2-p2+1) top-left positions. The returned
    report keeps the placement-to-masks map so downstream attack analysis can
    reuse it without recomputing containment.
    """
    P1 = ms.n1 - ms.p1 + 1
    P2 = ms.n2 - ms.p2 + 1
    if P1 <= 0 or P2 <= 0:
        empty = np.zeros((max(P1, 0), max(P2, 0), len(ms.masks)), dtype=bool)
        return CoveringReport(True, (max(P1, 0), max(P2, 0)), empty)
    cube = np.zeros((P1, P2, len(ms.masks)), dtype=bool)
    ys = np.arange(P1)[:, None]
    xs = np.arange(P2)[None, :]
    for idx, m in enumerate(ms.masks):
        rows_ok = (ys >= m.y0) & (ys + ms.p1 <= m.y0 + m.m1)
        cols_ok = (xs >= m.x0) & (xs + ms.p2 <= m.x0 + m.m2)
        cube[:, :, idx] = rows_ok & cols_ok
    covered = bool(cube.any(axis=2).all())
    return CoveringReport(covered, (P1, P2), cube)


def masks_containing(ms: MaskSet, placement: tuple[int, int]) -> list[int]:
    """Indices of masks whose rectangle contains the full patch at ``placement``."""
    i, j = placement
    if not (0 <= i <= ms.n1 - ms.p1 and 0 <= j <= ms.n2 - ms.p2):
        raise ConfigError(
            f"placement {placement} out of bounds for {ms.n1}x{ms.n2} image "
            f"with {ms.p1}x{ms.p2} patch"
        )
    return [
        idx for idx, m in enumerate(ms.masks) if m.contains_patch(i, j, ms.p1, ms.p2)
    ]
