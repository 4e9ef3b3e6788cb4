"""Shared builders for hand-constructed certification scenarios."""

import numpy as np
import pytest

from patchcert import (
    ClassSpec,
    Image,
    PatchSpec,
    QueryService,
    SyntheticClassifier,
    generate_mask_set,
)
from patchcert.synthetic import SyntheticInstance


@pytest.fixture
def band_geometry():
    """10x10 image covered by three full-width horizontal bands.

    Budget (3, 1) with a 2x2 patch gives masks over rows 0..3, 3..6, 6..9.
    """
    ms = generate_mask_set(10, 10, PatchSpec.pixels(2), 3, 1)
    assert [(m.y0, m.m1) for m in ms.masks] == [(0, 4), (3, 4), (6, 4)]
    return ms


def make_image(on_pixels, dims=(10, 10)):
    pixels = np.zeros(dims, dtype=np.float64)
    for f in on_pixels:
        pixels[f] = 1.0
    return Image.from_pixels(pixels)


def make_model(*class_specs):
    return SyntheticClassifier([ClassSpec(features=tuple(f), default=d) for f, d in class_specs])


def service_for(model, image, mask_set):
    return QueryService(model, image, mask_set)


def _monotone_instance(rng, image_id):
    """Instance whose certification degrades monotonically with occlusion.

    Present classes keep one on-pixel in each image third (no small-mask pair
    hides all three) and all defaults are 0, so growing the masks only ever
    destroys evidence. Weak mostly-off clusters provide clean negatives.
    """
    n1 = int(rng.integers(10, 13))
    n2 = int(rng.integers(10, 13))
    specs = []
    values = {}
    thirds_y = [0, n1 // 3, 2 * n1 // 3]
    thirds_x = [0, n2 // 3, 2 * n2 // 3]
    for ci in range(5):
        if rng.random() < 0.6:
            feats = []
            for t3 in range(3):
                fy = min(thirds_y[t3] + int(rng.integers(0, max(n1 // 3, 1))), n1 - 1)
                fx = min(
                    thirds_x[(t3 + ci) % 3] + int(rng.integers(0, max(n2 // 3, 1))),
                    n2 - 1,
                )
                feats.append((fy, fx))
                values.setdefault((fy, fx), 1.0)
        else:
            cy, cx = int(rng.integers(0, n1)), int(rng.integers(0, n2))
            feats = []
            for _ in range(3):
                fy = int(np.clip(cy + rng.integers(-1, 2), 0, n1 - 1))
                fx = int(np.clip(cx + rng.integers(-1, 2), 0, n2 - 1))
                feats.append((fy, fx))
                values.setdefault((fy, fx), 1.0 if rng.random() < 0.3 else 0.0)
        specs.append(ClassSpec(features=tuple(dict.fromkeys(feats)), default=0))
    pixels = np.zeros((n1, n2))
    for f, v in values.items():
        pixels[f] = v
    image = Image.from_pixels(pixels)
    model = SyntheticClassifier(specs)
    y = (model.score(image) > 0.5).astype(np.int8)
    return SyntheticInstance(image_id, image, model, y, (2, 2), (3, 3), 0.5)


def monotone_suite(seed, count):
    return [
        _monotone_instance(
            np.random.default_rng(np.random.SeedSequence((seed, i))), f"mono-{seed}-{i:03d}"
        )
        for i in range(count)
    ]
