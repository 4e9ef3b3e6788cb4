"""Precision/recall metrics, threshold sweeps, and normalized average precision.

Counts are micro-averaged: per-image (TP, FP, FN) triples — realized counts in
the clean settings, certified bounds otherwise — are summed over the dataset
before the ratio metrics are computed, so the certified variants remain lower
bounds for the whole dataset.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import ConfigError

SETTINGS = ("undefended-clean", "defended-clean", "certified", "location-aware")

ANCHOR_RECALL = 0.25

# Threshold families used to trace out precision-recall curves. "mid" unions
# four arithmetic runs of step 0.02; "low" only matters for backends that
# declare a low-score regime.
T_STANDARD = [round(0.1 * t, 1) for t in range(10)]
T_HIGH = [round(0.90 + 0.01 * t, 2) for t in range(1, 10)]
T_VERY_HIGH = [0.999, 0.9999, 0.99999]
T_MID = [
    round(base + 0.02 * t, 2)
    for base in (0.5, 0.6, 0.7, 0.8)
    for t in (1, 2, 3, 4)
]
T_LOW = [5e-05, 0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05]

THRESHOLD_FAMILIES = {
    "standard": T_STANDARD,
    "high": T_HIGH,
    "very-high": T_VERY_HIGH,
    "mid": T_MID,
    "low": T_LOW,
    "default": sorted(set(T_STANDARD + T_HIGH + T_VERY_HIGH + T_MID)),
    "default-low": sorted(set(T_STANDARD + T_HIGH + T_VERY_HIGH + T_MID + T_LOW)),
}


def _ratio(num: float, den: float) -> float:
    # 0/0 reads as 1.0: an image with no positives and no predictions is not
    # penalized.
    return 1.0 if den == 0 else num / den


def precision_recall(tp: float, fp: float, fn: float) -> tuple[float, float]:
    return _ratio(tp, tp + fp), _ratio(tp, tp + fn)


def micro_aggregate(counts: Iterable[Sequence[float]]) -> tuple[float, float]:
    """Dataset-level (precision, recall) from per-image (TP, FP, FN) triples."""
    counts = list(counts)
    if not counts:
        raise ConfigError("no per-image records to aggregate")
    tp = sum(c[0] for c in counts)
    fp = sum(c[1] for c in counts)
    fn = sum(c[2] for c in counts)
    return precision_recall(tp, fp, fn)


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float
    setting: str


@dataclass
class PRCurve:
    setting: str
    points: list[PRPoint]

    def ap(self) -> float:
        return average_precision(self.points)


CountsAt = Callable[[float], Iterable[Sequence[float]]]


def threshold_sweep(counts_at: CountsAt, thresholds: Iterable[float], setting: str) -> PRCurve:
    """One micro-averaged PR point per threshold, ordered by descending threshold."""
    ts = sorted({float(t) for t in thresholds}, reverse=True)
    if not ts:
        raise ConfigError("empty threshold set")
    points = []
    for t in ts:
        precision, recall = micro_aggregate(counts_at(t))
        points.append(PRPoint(t, precision, recall, setting))
    return PRCurve(setting, points)


def average_precision(points: Iterable[PRPoint] | PRCurve) -> float:
    """Trapezoid area under the PR curve from 25% recall on, normalized by 0.75.

    The leftmost point is anchored at exactly 25% recall — interpolated
    between the straddling points when one lies below, otherwise extended
    flat from the lowest-recall point. Input order does not matter.
    """
    if isinstance(points, PRCurve):
        points = points.points
    pts = list(points)
    if len(pts) < 2:
        raise ConfigError("average precision needs at least two curve points")
    rp = sorted((p.recall, p.precision) for p in pts)
    if rp[-1][0] < ANCHOR_RECALL:
        raise ConfigError(
            f"curve never reaches {ANCHOR_RECALL:.0%} recall; cannot anchor"
        )
    below = [x for x in rp if x[0] < ANCHOR_RECALL]
    tail = [x for x in rp if x[0] >= ANCHOR_RECALL]
    if tail[0][0] == ANCHOR_RECALL:
        seq = tail
    elif below:
        (r_lo, p_lo), (r_hi, p_hi) = below[-1], tail[0]
        w = (ANCHOR_RECALL - r_lo) / (r_hi - r_lo)
        seq = [(ANCHOR_RECALL, p_lo + w * (p_hi - p_lo))] + tail
    else:
        seq = [(ANCHOR_RECALL, tail[0][1])] + tail
    area = sum(
        (r2 - r1) * (p1 + p2) / 2.0
        for (r1, p1), (r2, p2) in itertools.pairwise(seq)
    )
    return area / (1.0 - ANCHOR_RECALL)


@dataclass(frozen=True)
class RecallProbe:
    threshold: float
    precision: float
    recall: float


@dataclass
class PrecisionAtRecall:
    target: float
    precision: float
    lower: RecallProbe | None  # recall <= target side of the bracket
    upper: RecallProbe | None  # recall >= target side of the bracket
    within_tolerance: bool  # False flags a bracket the bisection could not tighten
    iterations: int


def _interp_precision(lower: RecallProbe, upper: RecallProbe, target: float) -> float:
    if upper.recall == lower.recall:
        return (upper.precision + lower.precision) / 2.0
    w = (target - lower.recall) / (upper.recall - lower.recall)
    return lower.precision + w * (upper.precision - lower.precision)


def precision_at_recall(
    points: Iterable[PRPoint],
    target: float,
    counts_at: CountsAt,
    tol: float = 0.005,
    max_iter: int = 30,
) -> PrecisionAtRecall:
    """Precision where the recall curve crosses ``target``.

    Starting from the swept points, keeps an over/under recall bracket around
    the target and bisects on the threshold until both sides sit within
    ``tol`` (0.5 recall points by default). Recall is only weakly monotone in
    the threshold under micro-averaging, so the bracket can stall at a step
    edge; after ``max_iter`` splits the nearest bracket is used and flagged
    via ``within_tolerance=False``. A point hitting the target exactly is
    returned unmodified.
    """

    def probe(threshold: float) -> RecallProbe:
        precision, recall = micro_aggregate(counts_at(threshold))
        return RecallProbe(threshold, precision, recall)

    probes = [RecallProbe(p.threshold, p.precision, p.recall) for p in points]
    for pr in probes:
        if pr.recall == target:
            return PrecisionAtRecall(target, pr.precision, pr, pr, True, 0)

    uppers = [pr for pr in probes if pr.recall > target]
    lowers = [pr for pr in probes if pr.recall < target]
    if not uppers:
        extra = probe(0.0)  # most permissive threshold: highest reachable recall
        (uppers if extra.recall > target else lowers).append(extra)
        if extra.recall == target:
            return PrecisionAtRecall(target, extra.precision, extra, extra, True, 0)
    if not lowers:
        extra = probe(1.0)  # nothing exceeds threshold 1.0: lowest recall
        (uppers if extra.recall > target else lowers).append(extra)
        if extra.recall == target:
            return PrecisionAtRecall(target, extra.precision, extra, extra, True, 0)
    if not uppers or not lowers:
        # Target recall unreachable; report the closest point, flagged.
        pool = uppers or lowers
        nearest = min(pool, key=lambda pr: abs(pr.recall - target))
        return PrecisionAtRecall(target, nearest.precision, None, nearest, False, 0)

    upper = min(uppers, key=lambda pr: (pr.recall, pr.threshold))
    lower = max(lowers, key=lambda pr: (pr.recall, -pr.threshold))
    iterations = 0
    while (
        upper.recall - target > tol or target - lower.recall > tol
    ) and iterations < max_iter:
        # Recall decreases with threshold, so the upper-recall probe carries
        # the smaller threshold.
        t_mid = (upper.threshold + lower.threshold) / 2.0
        if abs(lower.threshold - upper.threshold) < 1e-12:
            break
        mid = probe(t_mid)
        iterations += 1
        if mid.recall == target:
            return PrecisionAtRecall(target, mid.precision, mid, mid, True, iterations)
        if mid.recall > target:
            upper = mid
        else:
            lower = mid
    within = upper.recall - target <= tol and target - lower.recall <= tol
    value = _interp_precision(lower, upper, target)
    return PrecisionAtRecall(target, value, lower, upper, within, iterations)
