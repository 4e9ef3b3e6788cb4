"""Classifier backends and per-class binary views.

Two backends implement the same scoring protocol (``num_classes`` plus
``score(image) -> ndarray``): a synthetic pixel-counting model whose behavior
under occlusion is simple enough to verify exhaustively, and a wrapper around
an ONNX inference session for real models. Occluded pixels are presented as
value 0 to backends without an occlusion concept; the synthetic backend
instead excludes them from its counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Protocol, Sequence

import numpy as np

from .errors import BackendError, ConfigError, UnsupportedOperationError
from .geometry import Mask

MAX_FEATURES = 8


@dataclass
class Image:
    """Pixel grid plus an occlusion bitmap.

    The bitmap is carried separately from the pixel values so that the
    synthetic backend can distinguish "masked" from "black"; real backends
    read occluded pixels as 0.
    """

    pixels: np.ndarray  # float, (n1, n2) or (n1, n2, channels), values in [0, 1]
    occlusion: np.ndarray  # bool, (n1, n2); True marks occluded pixels

    @classmethod
    def from_pixels(cls, pixels: np.ndarray) -> "Image":
        arr = np.asarray(pixels, dtype=np.float64)
        if arr.ndim not in (2, 3):
            raise ConfigError(f"image must be 2-D or 3-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ConfigError("image contains non-finite pixel values")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ConfigError("pixel values must lie in [0, 1]; normalize first")
        return cls(pixels=arr, occlusion=np.zeros(arr.shape[:2], dtype=bool))

    @property
    def n1(self) -> int:
        return self.pixels.shape[0]

    @property
    def n2(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else self.pixels.shape[2]

    def with_masks(self, masks: Iterable[Mask]) -> "Image":
        """New view with the union of ``masks`` added to the occlusion bitmap."""
        occ = self.occlusion.copy()
        for m in masks:
            occ[m.y0 : m.y0 + m.m1, m.x0 : m.x0 + m.m2] = True
        return Image(pixels=self.pixels, occlusion=occ)

    def masked_pixels(self) -> np.ndarray:
        """Pixels with occluded positions zeroed (element-wise mask semantics)."""
        visible = ~self.occlusion
        if self.pixels.ndim == 3:
            visible = visible[:, :, None]
        return np.where(visible, self.pixels, 0.0)


class Classifier(Protocol):
    """Minimal protocol both backends satisfy."""

    @property
    def num_classes(self) -> int: ...

    def score(self, image: Image) -> np.ndarray: ...


@dataclass(frozen=True)
class ClassSpec:
    """One synthetic class: feature pixel coordinates and a fallback bit."""

    features: tuple[tuple[int, int], ...]
    default: int


class SyntheticClassifier:
    """Deterministic per-class pixel-fraction scorer.

    Each class i watches a small set of feature pixels; its score is the
    fraction of *visible* feature pixels whose value exceeds 0.5, or the
    class default bit when every feature pixel is occluded. Feature sets are
    capped at 8 pixels so attacker enumeration over them stays exact and
    cheap.
    """

    def __init__(self, classes: Sequence[ClassSpec]):
        if not classes:
            raise ConfigError("synthetic model needs at least one class")
        for idx, spec in enumerate(classes):
            if not 1 <= len(spec.features) <= MAX_FEATURES:
                raise ConfigError(
                    f"class {idx}: feature set size must be 1..{MAX_FEATURES}, "
                    f"got {len(spec.features)}"
                )
            if len(set(spec.features)) != len(spec.features):
                raise ConfigError(f"class {idx}: duplicate feature pixels")
            if spec.default not in (0, 1):
                raise ConfigError(f"class {idx}: default must be 0 or 1")
        self.classes = tuple(classes)
        ys, xs, starts = [], [], []
        for spec in self.classes:
            starts.append(len(ys))
            ys.extend(f[0] for f in spec.features)
            xs.extend(f[1] for f in spec.features)
        self._ys = np.asarray(ys, dtype=np.intp)
        self._xs = np.asarray(xs, dtype=np.intp)
        self._starts = np.asarray(starts, dtype=np.intp)
        self._defaults = np.asarray([s.default for s in self.classes], dtype=np.float64)
        self._max_y = int(self._ys.max())
        self._max_x = int(self._xs.max())
        if self._ys.min() < 0 or self._xs.min() < 0:
            raise ConfigError("feature pixel coordinates must be non-negative")

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def feature_union(self) -> set[tuple[int, int]]:
        return {f for spec in self.classes for f in spec.features}

    def score(self, image: Image) -> np.ndarray:
        if image.pixels.ndim != 2:
            raise BackendError("synthetic backend expects single-channel images")
        if self._max_y >= image.n1 or self._max_x >= image.n2:
            raise BackendError(
                f"feature pixels exceed image extent {image.n1}x{image.n2}"
            )
        vis = ~image.occlusion[self._ys, self._xs]
        on = (image.pixels[self._ys, self._xs] > 0.5) & vis
        vis_counts = np.add.reduceat(vis, self._starts)
        on_counts = np.add.reduceat(on, self._starts)
        return np.where(
            vis_counts > 0, on_counts / np.maximum(vis_counts, 1), self._defaults
        )

    def to_json(self) -> str:
        doc = {
            "c": self.num_classes,
            "classes": [
                {"features": [[y, x] for y, x in spec.features], "default": spec.default}
                for spec in self.classes
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticClassifier":
        classes = [
            ClassSpec(
                features=tuple((int(y), int(x)) for y, x in entry["features"]),
                default=int(entry["default"]),
            )
            for entry in doc["classes"]
        ]
        if "c" in doc and int(doc["c"]) != len(classes):
            raise ConfigError(
                f"synthetic model declares {doc['c']} classes but lists {len(classes)}"
            )
        return cls(classes)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticClassifier":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class BinaryView:
    """Isolated binary classifier for one class: 1 iff score strictly exceeds
    the decision threshold."""

    model: Any
    class_index: int
    threshold: float

    def predict(self, image: Image) -> int:
        return int(self.model.score(image)[self.class_index] > self.threshold)


def achievable_outputs(
    model: SyntheticClassifier,
    image: Image,
    controlled: Iterable[tuple[int, int]],
    class_index: int,
    threshold: float,
) -> set[int]:
    """Every prediction an attacker owning ``controlled`` pixels can force.

    Synthetic scores depend only on each feature pixel's on/off state, so
    enumerating the number of controlled-and-visible feature pixels switched
    on is equivalent to enumerating all value assignments. Controlled pixels
    that are occluded contribute nothing (the mask covers the patch).
    """
    if not isinstance(model, SyntheticClassifier):
        raise UnsupportedOperationError(
            "attacker enumeration is only defined for the synthetic backend"
        )
    spec = model.classes[class_index]
    controlled = set(controlled)
    fixed_vis = 0
    fixed_on = 0
    free = 0
    for y, x in spec.features:
        if image.occlusion[y, x]:
            continue
        if (y, x) in controlled:
            free += 1
        else:
            fixed_vis += 1
            fixed_on += int(image.pixels[y, x] > 0.5)
    outcomes = set()
    for k in range(free + 1):
        vis = fixed_vis + free
        score = (fixed_on + k) / vis if vis else float(spec.default)
        outcomes.add(int(score > threshold))
    return outcomes


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _axis_index(n_out: int, n_in: int) -> np.ndarray:
    return np.clip((np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5, 0, n_in - 1)


def resize_image(arr: np.ndarray, out_hw: tuple[int, int], mode: str) -> np.ndarray:
    """Resize (h, w, c) pixel data; interpolation mode is configured, not inferred."""
    h_out, w_out = out_hw
    if mode == "nearest":
        ri = np.floor((np.arange(h_out) + 0.5) * arr.shape[0] / h_out).astype(np.intp)
        ci = np.floor((np.arange(w_out) + 0.5) * arr.shape[1] / w_out).astype(np.intp)
        ri = np.clip(ri, 0, arr.shape[0] - 1)
        ci = np.clip(ci, 0, arr.shape[1] - 1)
        return arr[ri][:, ci]
    if mode == "bilinear":
        ry = _axis_index(h_out, arr.shape[0])
        rx = _axis_index(w_out, arr.shape[1])
        y0 = np.floor(ry).astype(np.intp)
        x0 = np.floor(rx).astype(np.intp)
        y1 = np.minimum(y0 + 1, arr.shape[0] - 1)
        x1 = np.minimum(x0 + 1, arr.shape[1] - 1)
        wy = (ry - y0)[:, None, None]
        wx = (rx - x0)[None, :, None]
        top = arr[y0][:, x0] * (1 - wx) + arr[y0][:, x1] * wx
        bot = arr[y1][:, x0] * (1 - wx) + arr[y1][:, x1] * wx
        return top * (1 - wy) + bot * wy
    raise ConfigError(f"unknown resize mode {mode!r} (use 'nearest' or 'bilinear')")


@dataclass(frozen=True)
class OnnxConfig:
    """Everything the ONNX wrapper must be told rather than guess."""

    classes: int
    input_hw: tuple[int, int] | None = None
    resize: str = "bilinear"
    logits: bool = True  # apply a sigmoid to raw outputs
    channels: int = 3
    channels_first: bool = True
    low_score_regime: bool = False  # selects the extra low-threshold family


class OnnxClassifier:
    """Multi-label scorer backed by an ONNX inference session.

    Occluded pixels are zeroed before the forward pass. A sigmoid is applied
    iff the model is configured as emitting logits; outputs are checked for
    finiteness either way.
    """

    def __init__(self, session: Any, config: OnnxConfig):
        self.session = session
        self.config = config
        try:
            self._input_name = session.get_inputs()[0].name
        except Exception as exc:
            raise BackendError(f"could not inspect session inputs: {exc}") from exc

    @classmethod
    def from_path(cls, path: str, config: OnnxConfig) -> "OnnxClassifier":
        try:
            import onnxruntime  # noqa: PLC0415 -- optional dependency
        except ImportError as exc:
            raise BackendError(
                "onnxruntime is not installed; install the 'onnx' extra to load models"
            ) from exc
        try:
            session = onnxruntime.InferenceSession(str(path))
        except Exception as exc:
            raise BackendError(f"failed to load ONNX model {path}: {exc}") from exc
        return cls(session, config)

    @property
    def num_classes(self) -> int:
        return self.config.classes

    def score(self, image: Image) -> np.ndarray:
        cfg = self.config
        arr = image.masked_pixels().astype(np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.shape[2] != cfg.channels:
            if arr.shape[2] == 1:
                arr = np.repeat(arr, cfg.channels, axis=2)
            else:
                raise BackendError(
                    f"image has {arr.shape[2]} channels, model expects {cfg.channels}"
                )
        if cfg.input_hw is not None and arr.shape[:2] != tuple(cfg.input_hw):
            arr = resize_image(arr, cfg.input_hw, cfg.resize).astype(np.float32)
        batch = arr.transpose(2, 0, 1)[None] if cfg.channels_first else arr[None]
        try:
            out = self.session.run(None, {self._input_name: batch})[0]
        except Exception as exc:
            raise BackendError(f"ONNX session failed: {exc}") from exc
        scores = np.asarray(out, dtype=np.float64).reshape(-1)
        if scores.size != cfg.classes:
            raise BackendError(
                f"model returned {scores.size} outputs, expected {cfg.classes} classes"
            )
        bad = np.flatnonzero(~np.isfinite(scores))
        if bad.size:
            raise BackendError(f"non-finite scores for classes {bad.tolist()}")
        if cfg.logits:
            return _sigmoid(scores)
        if scores.min() < -1e-9 or scores.max() > 1 + 1e-9:
            raise BackendError(
                "outputs configured as probabilities but fall outside [0, 1]; "
                "set logits=true if the model emits logits"
            )
        return np.clip(scores, 0.0, 1.0)
