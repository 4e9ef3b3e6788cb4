"""Synthetic instance generation for exhaustive verification.

Instances pair a small image with its own synthetic classifier, ground-truth
label, patch size, and mask budget. Most classes follow a "band-sensitive"
archetype: a tight cluster of on-valued feature pixels near one border zone
plus an off-valued detector pixel in a far zone, with fallback bit 1. Such a
class stays correct unless an occlusion hides the cluster while exposing the
detector, so its vulnerable masks localize — the regime where the
single-patch location constraint has something to reclaim. The union of
feature pixels is capped so attack enumeration stays exact and fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import ClassSpec, Image, SyntheticClassifier
from .errors import ConfigError

UNION_CAP = 12

# Border zones (row/col fractions): four corners and four edge midpoints.
_ANCHORS = (
    (0.0, 0.0),
    (0.0, 1.0),
    (1.0, 0.0),
    (1.0, 1.0),
    (0.0, 0.5),
    (1.0, 0.5),
    (0.5, 0.0),
    (0.5, 1.0),
)


@dataclass
class SyntheticInstance:
    image_id: str
    image: Image
    model: SyntheticClassifier
    y: np.ndarray
    patch: tuple[int, int]
    budget: tuple[int, int]
    threshold: float = 0.5


def random_instance(
    rng: np.random.Generator,
    image_id: str,
    classes: int | None = None,
    dims: tuple[int, int] | None = None,
) -> SyntheticInstance:
    """One random verification instance.

    Image sides are 8..12 pixels, 2..6 classes, a square 2x2..3x3 patch
    estimate, and a mask budget up to 3x3 per axis. Labels start from the
    thresholded clean scores and then flip with small probability, so suites
    contain clean false negatives/positives whose bounds are tight.
    """
    n1, n2 = dims if dims is not None else (
        int(rng.integers(8, 13)),
        int(rng.integers(8, 13)),
    )
    c = classes if classes is not None else int(rng.integers(2, 7))
    p = int(rng.integers(2, 4))
    k1 = int(rng.choice([1, 2, 3], p=[0.1, 0.6, 0.3]))
    k2 = int(rng.choice([1, 2, 3], p=[0.1, 0.6, 0.3]))

    union: list[tuple[int, int]] = []
    union_set: set[tuple[int, int]] = set()
    values: dict[tuple[int, int], float] = {}

    def claim(cand: tuple[int, int], want_on: bool) -> bool:
        # First claim decides the pixel value; later classes share it as-is.
        if cand in union_set:
            return True
        if len(union_set) < UNION_CAP:
            union_set.add(cand)
            union.append(cand)
            values[cand] = 1.0 if want_on else 0.0
            return True
        return False

    def zone_point(fy: float, fx: float) -> tuple[int, int]:
        cy = int(round(fy * (n1 - 1))) + int(rng.integers(-1, 2))
        cx = int(round(fx * (n2 - 1))) + int(rng.integers(-1, 2))
        return int(np.clip(cy, 0, n1 - 1)), int(np.clip(cx, 0, n2 - 1))

    specs = []
    for _ in range(c):
        archetype = rng.random() < 0.75
        if archetype:
            ai = int(rng.integers(0, len(_ANCHORS)))
            cy, cx = zone_point(*_ANCHORS[ai])
        else:
            cy, cx = int(rng.integers(0, n1)), int(rng.integers(0, n2))
        size = int(rng.integers(2, 4))
        feats: set[tuple[int, int]] = set()
        for _ in range(30):
            if len(feats) >= size:
                break
            fy = int(np.clip(cy + rng.integers(-1, 2), 0, n1 - 1))
            fx = int(np.clip(cx + rng.integers(-1, 2), 0, n2 - 1))
            if claim((fy, fx), want_on=True if archetype else rng.random() < 0.7):
                feats.add((fy, fx))
        if archetype:
            ay, ax = _ANCHORS[ai]
            far = [z for z in _ANCHORS if abs(z[0] - ay) + abs(z[1] - ax) >= 1.0]
            dpt = zone_point(*far[int(rng.integers(0, len(far)))])
            if claim(dpt, want_on=False):
                feats.add(dpt)
        elif rng.random() < 0.4:
            dpt = (int(rng.integers(0, n1)), int(rng.integers(0, n2)))
            if claim(dpt, want_on=rng.random() < 0.7):
                feats.add(dpt)
        if not feats:
            # Union cap exhausted away from this cluster: reuse existing pixels.
            idx = rng.integers(0, len(union), size=min(size, len(union)))
            feats = {union[int(i)] for i in idx}
        specs.append(
            ClassSpec(
                features=tuple(sorted(feats)),
                default=1 if archetype else int(rng.choice([0, 1])),
            )
        )

    pixels = np.zeros((n1, n2), dtype=np.float64)
    for f, v in values.items():
        pixels[f] = v
    image = Image.from_pixels(pixels)
    model = SyntheticClassifier(specs)

    threshold = 0.5
    clean = (model.score(image) > threshold).astype(np.int8)
    flips = rng.random(c) < 0.08
    y = np.where(flips, 1 - clean, clean).astype(np.int8)

    return SyntheticInstance(
        image_id=image_id,
        image=image,
        model=model,
        y=y,
        patch=(p, p),
        budget=(k1, k2),
        threshold=threshold,
    )


def generate_suite(seed: int, count: int, classes: int | None = None) -> list[SyntheticInstance]:
    """Deterministic list of random instances; instance i uses child seed (seed, i)."""
    out = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        out.append(random_instance(rng, image_id=f"synth-{seed}-{i:04d}", classes=classes))
    return out


def demo_instance() -> SyntheticInstance:
    """Hand-built instance where the single-location constraint provably helps.

    Three horizontal band masks cover the image. All three classes are
    present and each fails certification at a different band (the first under
    the top+middle composition, the second under the top band, the third
    under the bottom band). No single patch location threatens all three, so
    the location-aware FN bound drops from 3 to 2 and certified recall is
    exactly 1/3.
    """
    pixels = np.zeros((10, 10), dtype=np.float64)
    for f in [(2, 1), (5, 1), (1, 4), (1, 5), (8, 7), (8, 8)]:
        pixels[f] = 1.0
    model = SyntheticClassifier(
        [
            ClassSpec(features=((2, 1), (5, 1)), default=0),
            ClassSpec(features=((1, 4), (1, 5), (6, 4)), default=1),
            ClassSpec(features=((8, 7), (8, 8), (3, 7)), default=1),
        ]
    )
    return SyntheticInstance(
        image_id="demo-bands",
        image=Image.from_pixels(pixels),
        model=model,
        y=np.array([1, 1, 1], dtype=np.int8),
        patch=(2, 2),
        budget=(3, 1),
        threshold=0.5,
    )


def instance_to_entry(inst: SyntheticInstance) -> dict:
    """Manifest entry (JSON-ready) for one synthetic instance."""
    return {
        "image_id": inst.image_id,
        "label": "".join(str(int(b)) for b in inst.y),
        "synthetic": {
            "pixels": inst.image.pixels.tolist(),
            "model": {
                "c": inst.model.num_classes,
                "classes": [
                    {
                        "features": [[y, x] for y, x in spec.features],
                        "default": spec.default,
                    }
                    for spec in inst.model.classes
                ],
            },
        },
    }


def instance_from_entry(
    entry: dict,
    patch: tuple[int, int] = (2, 2),
    budget: tuple[int, int] = (3, 3),
) -> SyntheticInstance:
    if "synthetic" not in entry:
        raise ConfigError(f"manifest entry {entry.get('image_id')!r} has no synthetic spec")
    spec = entry["synthetic"]
    model = SyntheticClassifier.from_dict(spec["model"])
    label = entry["label"]
    if len(label) != model.num_classes:
        raise ConfigError(
            f"entry {entry.get('image_id')!r}: label length {len(label)} does not "
            f"match model classes {model.num_classes}"
        )
    return SyntheticInstance(
        image_id=str(entry["image_id"]),
        image=Image.from_pixels(np.asarray(spec["pixels"], dtype=np.float64)),
        model=model,
        y=np.array([int(ch) for ch in label], dtype=np.int8),
        patch=patch,
        budget=budget,
    )
