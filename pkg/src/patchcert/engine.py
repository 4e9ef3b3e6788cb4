"""Per-class demultiplexed inference and certification over a shared query cache.

A multi-label prediction is assembled by running the double-masking defense
independently for every class, but all classes of one image share a single
``QueryService`` so each distinct occlusion pattern costs one classifier
evaluation regardless of the class count. Certification produces per-class
verdicts, aggregate bounds on true positives / false positives / false
negatives, and — via :func:`location_aware_certify` — tightened bounds that
exploit the fact that a single patch occupies a single location.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .backends import BinaryView, Image
from .double_masking import sl_certify, sl_infer
from .errors import ConfigError, ConsistencyError
from .geometry import MaskSet, verify_covering

ATTACKER_MODES = ("fn", "fp", "worst")


class QueryService:
    """Caches full score vectors per composed occlusion pattern of one image.

    Patterns canonicalize to the sorted tuple of distinct mask indices, so a
    mask paired with itself reuses the single-mask evaluation and the empty
    tuple is the unmasked image. ``evaluations`` counts actual classifier
    calls; ``requests`` counts lookups, i.e. what isolated per-class defenses
    would have paid without sharing. Safe for concurrent readers; each
    pattern is evaluated exactly once.
    """

    def __init__(self, model, image: Image, mask_set: MaskSet):
        self.model = model
        self.image = image
        self.mask_set = mask_set
        self._cache: dict[tuple[int, ...], np.ndarray] = {}
        self._lock = threading.Lock()
        self.evaluations = 0
        self.requests = 0

    def scores(self, pattern: Iterable[int]) -> np.ndarray:
        key = tuple(sorted(set(pattern)))
        with self._lock:
            self.requests += 1
            vec = self._cache.get(key)
            if vec is None:
                masked = (
                    self.image.with_masks(self.mask_set.masks[i] for i in key)
                    if key
                    else self.image
                )
                vec = self.model.score(masked)
                self.evaluations += 1
                self._cache[key] = vec
        return vec

    @property
    def stats(self) -> dict[str, int]:
        return {"evaluations": self.evaluations, "requests": self.requests}


def per_class_thresholds(thresholds, num_classes: int) -> np.ndarray:
    """Normalize a scalar or per-class sequence of decision thresholds."""
    arr = np.asarray(thresholds, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(num_classes, float(arr))
    if arr.shape != (num_classes,):
        raise ConfigError(
            f"expected one threshold or {num_classes} per-class thresholds, "
            f"got shape {arr.shape}"
        )
    return arr


@dataclass
class CertSummary:
    """Per-image certified bounds and the evidence behind them.

    ``lambdas`` keeps the per-mask safety array of every class that failed
    certification; location-aware tightening consumes these. ``fn_new`` and
    ``fp_new`` stay ``None`` until :func:`location_aware_certify` fills them.
    """

    y: np.ndarray
    kappa: np.ndarray
    tp_lower: int
    fp_upper: int
    fn_upper: int
    lambdas: dict[int, np.ndarray]
    n_masks: int
    query_evaluations: int
    query_requests: int
    attacker_mode: str | None = None
    fn_new: int | None = None
    fp_new: int | None = None
    realizable: bool = True
    worst_mask: int | None = field(default=None)

    @property
    def num_classes(self) -> int:
        return len(self.y)

    @property
    def tp_location_aware(self) -> int | None:
        if self.fn_new is None:
            return None
        return self.tp_lower + (self.fn_upper - self.fn_new)

    def counts(self, location_aware: bool = False) -> tuple[int, int, int]:
        """(TP, FP, FN) bound triple for metric aggregation."""
        if not location_aware:
            return self.tp_lower, self.fp_upper, self.fn_upper
        if self.fn_new is None or self.fp_new is None:
            raise ConsistencyError("location-aware bounds not computed yet")
        return self.tp_location_aware, self.fp_new, self.fn_new

    def to_record(self, image_id: str, threshold) -> dict:
        rec = {
            "image_id": image_id,
            "threshold": threshold,
            "tp_lower": self.tp_lower,
            "fp_upper": self.fp_upper,
            "fn_upper": self.fn_upper,
            "kappa": "".join(str(int(k)) for k in self.kappa),
            "fn_new": self.fn_new,
            "fp_new": self.fp_new,
            "attacker_mode": self.attacker_mode,
            "query_count": self.query_evaluations,
        }
        return rec


def demux_infer(
    model, image: Image, mask_set: MaskSet, thresholds, queries: QueryService | None = None
) -> np.ndarray:
    """Multi-label prediction: the defended binary decision for each class."""
    t = per_class_thresholds(thresholds, model.num_classes)
    q = queries if queries is not None else QueryService(model, image, mask_set)
    preds = np.zeros(model.num_classes, dtype=np.int8)
    for i in range(model.num_classes):
        preds[i] = sl_infer(BinaryView(model, i, t[i]), mask_set, q)
    return preds


def demux_certify(
    model,
    image: Image,
    y,
    mask_set: MaskSet,
    thresholds,
    queries: QueryService | None = None,
    covered: bool | None = None,
) -> CertSummary:
    """Certify each class separately and aggregate the count bounds.

    Every class certified correct contributes a guaranteed true positive (if
    present) — uncertified classes are pessimistically counted as false
    negatives (present) or false positives (absent).
    """
    y = np.asarray(y, dtype=np.int8)
    if y.shape != (model.num_classes,):
        raise ConfigError(
            f"label has shape {y.shape}, expected ({model.num_classes},)"
        )
    t = per_class_thresholds(thresholds, model.num_classes)
    q = queries if queries is not None else QueryService(model, image, mask_set)
    if covered is None:
        covered = verify_covering(mask_set).covered
    kappa = np.zeros(model.num_classes, dtype=np.int8)
    lambdas: dict[int, np.ndarray] = {}
    for i in range(model.num_classes):
        res = sl_certify(BinaryView(model, i, t[i]), int(y[i]), mask_set, q, covered=covered)
        kappa[i] = res.certified
        if not res.certified:
            lambdas[i] = res.lam
    return CertSummary(
        y=y.copy(),
        kappa=kappa,
        tp_lower=int(np.sum((kappa == 1) & (y == 1))),
        fp_upper=int(np.sum((kappa == 0) & (y == 0))),
        fn_upper=int(np.sum((kappa == 0) & (y == 1))),
        lambdas=lambdas,
        n_masks=len(mask_set.masks),
        query_evaluations=q.evaluations,
        query_requests=q.requests,
    )


def location_aware_certify(summary: CertSummary, mode: str) -> CertSummary:
    """Tighten the FN/FP bounds using the single-patch location constraint.

    Inverted safety arrays of the failed classes of one kind are summed per
    mask; the worst mask bounds how much damage any one patch location can do
    to that kind. Modes "fn" and "fp" model attackers committed to one goal,
    reporting the co-located count of the other kind (ties broken toward the
    location that also hurts the other metric more, then the lower mask
    index). Mode "worst" takes both maxima independently — the two worst
    locations need not coincide, so that summary is flagged non-realizable.
    """
    mode = mode.lower()
    if mode not in ATTACKER_MODES:
        raise ConfigError(f"attacker mode must be one of {ATTACKER_MODES}, got {mode!r}")
    n = summary.n_masks
    fn_classes = [
        i for i in range(summary.num_classes)
        if summary.y[i] == 1 and summary.kappa[i] == 0
    ]
    fp_classes = [
        i for i in range(summary.num_classes)
        if summary.y[i] == 0 and summary.kappa[i] == 0
    ]
    missing = [i for i in fn_classes + fp_classes if i not in summary.lambdas]
    if missing:
        raise ConsistencyError(
            f"uncertified classes {missing} have no vulnerability arrays"
        )
    fn_total = np.zeros(n, dtype=np.int64)
    for i in fn_classes:
        fn_total += 1 - summary.lambdas[i].astype(np.int64)
    fp_total = np.zeros(n, dtype=np.int64)
    for i in fp_classes:
        fp_total += 1 - summary.lambdas[i].astype(np.int64)

    if mode == "fn":
        best = min(range(n), key=lambda m: (-fn_total[m], -fp_total[m], m))
        fn_new, fp_new, realizable = fn_total[best], fp_total[best], True
    elif mode == "fp":
        best = min(range(n), key=lambda m: (-fp_total[m], -fn_total[m], m))
        fn_new, fp_new, realizable = fn_total[best], fp_total[best], True
    else:
        best = None
        fn_new, fp_new, realizable = fn_total.max(), fp_total.max(), False
    return replace(
        summary,
        attacker_mode=mode,
        fn_new=int(fn_new),
        fp_new=int(fp_new),
        realizable=realizable,
        worst_mask=best,
    )
