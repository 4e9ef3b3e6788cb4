"""Exhaustive desk-scale adversary for the synthetic backend.

Synthetic scores depend only on the on/off state of each feature pixel, so an
attacker's reachable effects at a patch placement factor through the binary
assignments to the feature pixels inside the patch — enumerating those
assignments is exhaustive. Verdicts feed :func:`check_bounds`, which compares
realized worst cases against certified bounds, and
:func:`check_mask_protection`, which validates the per-mask safety arrays.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .backends import Image, SyntheticClassifier
from .engine import CertSummary, QueryService, demux_infer
from .errors import BudgetError, UnsupportedOperationError
from .geometry import CoveringReport, MaskSet

Assignment = tuple[tuple[tuple[int, int], int], ...]


@dataclass
class AttackVerdict:
    """Worst-case effects reachable from one patch placement.

    ``outcomes[i]`` collects every defended prediction class i can be driven
    to; the count extrema carry a witness assignment (flipped pixels only) so
    violations can be reproduced.
    """

    placement: tuple[int, int]
    outcomes: list[set[int]]
    tp_min: int
    fp_max: int
    fn_max: int
    witness_tp_min: Assignment
    witness_fp_max: Assignment
    witness_fn_max: Assignment
    n_assignments: int


def _count(y: np.ndarray, preds: tuple[int, ...]) -> tuple[int, int, int]:
    tp = fp = fn = 0
    for truth, pred in zip(y, preds):
        if truth:
            if pred:
                tp += 1
            else:
                fn += 1
        elif pred:
            fp += 1
    return tp, fp, fn


def enumerate_attacks(
    model: SyntheticClassifier,
    image: Image,
    y,
    mask_set: MaskSet,
    thresholds,
    budget: int = 12,
) -> list[AttackVerdict]:
    """Evaluate every patch placement against every reachable attacker effect.

    For each top-left placement (row-major), all binary assignments to the
    feature pixels inside the patch are pushed through the full defended
    inference pipeline. Assignments are canonicalized to the set of pixels
    whose on/off state actually flips, so placements sharing the same levers
    reuse memoized results. Placements touching more than ``budget`` feature
    pixels are rejected — shrink the patch or the feature sets.
    """
    if not isinstance(model, SyntheticClassifier):
        raise UnsupportedOperationError(
            "attack enumeration requires the synthetic backend"
        )
    y = np.asarray(y, dtype=np.int8)
    p1, p2 = mask_set.p1, mask_set.p2
    features = sorted(model.feature_union())
    clean_on = {f: bool(image.pixels[f] > 0.5) for f in features}
    base_pixels = image.pixels

    memo: dict[Assignment, tuple[tuple[int, ...], tuple[int, int, int]]] = {}

    def run(key: Assignment) -> tuple[tuple[int, ...], tuple[int, int, int]]:
        hit = memo.get(key)
        if hit is not None:
            return hit
        if key:
            pixels = base_pixels.copy()
            for (fy, fx), bit in key:
                pixels[fy, fx] = float(bit)
            attacked = Image(pixels=pixels, occlusion=np.zeros_like(image.occlusion))
        else:
            attacked = Image(pixels=base_pixels, occlusion=np.zeros_like(image.occlusion))
        preds = tuple(int(b) for b in demux_infer(model, attacked, mask_set, thresholds))
        out = (preds, _count(y, preds))
        memo[key] = out
        return out

    verdicts = []
    for py in range(mask_set.n1 - p1 + 1):
        for px in range(mask_set.n2 - p2 + 1):
            relevant = [
                f for f in features if py <= f[0] < py + p1 and px <= f[1] < px + p2
            ]
            if len(relevant) > budget:
                raise BudgetError(
                    f"placement ({py}, {px}) controls {len(relevant)} feature "
                    f"pixels, above the enumeration budget {budget}; use a "
                    f"smaller patch or sparser feature sets"
                )
            outcomes: list[set[int]] = [set() for _ in range(model.num_classes)]
            tp_min = fp_max = fn_max = None
            w_tp = w_fp = w_fn = ()
            n_assignments = 0
            for bits in itertools.product((0, 1), repeat=len(relevant)):
                key = tuple(
                    (f, b) for f, b in zip(relevant, bits) if bool(b) != clean_on[f]
                )
                preds, (tp, fp, fn) = run(key)
                n_assignments += 1
                for i, b in enumerate(preds):
                    outcomes[i].add(b)
                if tp_min is None or tp < tp_min:
                    tp_min, w_tp = tp, key
                if fp_max is None or fp > fp_max:
                    fp_max, w_fp = fp, key
                if fn_max is None or fn > fn_max:
                    fn_max, w_fn = fn, key
            verdicts.append(
                AttackVerdict(
                    placement=(py, px),
                    outcomes=outcomes,
                    tp_min=tp_min,
                    fp_max=fp_max,
                    fn_max=fn_max,
                    witness_tp_min=w_tp,
                    witness_fp_max=w_fp,
                    witness_fn_max=w_fn,
                    n_assignments=n_assignments,
                )
            )
    return verdicts


@dataclass
class BoundReport:
    """Outcome of checking certified bounds against enumerated attacks."""

    checked_placements: int = 0
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def merge(self, other: "BoundReport") -> None:
        self.checked_placements += other.checked_placements
        self.violations.extend(other.violations)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checked_placements": self.checked_placements,
            "violations": self.violations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _violation(kind: str, verdict: AttackVerdict, realized: int, bound: int, witness) -> dict:
    return {
        "kind": kind,
        "placement": list(verdict.placement),
        "realized": realized,
        "bound": bound,
        "witness": [[list(f), b] for f, b in witness],
    }


def check_bounds(verdicts: list[AttackVerdict], summary: CertSummary) -> BoundReport:
    """Assert every placement respects the certified bounds.

    The baseline bounds must hold at every placement; the location-aware
    bound additionally caps the per-placement count of its own kind ("fn"
    mode caps FN, "fp" caps FP, "worst" caps both).
    """
    report = BoundReport(checked_placements=len(verdicts))
    check_fn_new = summary.fn_new is not None and summary.attacker_mode in ("fn", "worst")
    check_fp_new = summary.fp_new is not None and summary.attacker_mode in ("fp", "worst")
    for v in verdicts:
        if v.tp_min < summary.tp_lower:
            report.violations.append(
                _violation("tp_lower", v, v.tp_min, summary.tp_lower, v.witness_tp_min)
            )
        if v.fp_max > summary.fp_upper:
            report.violations.append(
                _violation("fp_upper", v, v.fp_max, summary.fp_upper, v.witness_fp_max)
            )
        if v.fn_max > summary.fn_upper:
            report.violations.append(
                _violation("fn_upper", v, v.fn_max, summary.fn_upper, v.witness_fn_max)
            )
        if check_fn_new and v.fn_max > summary.fn_new:
            report.violations.append(
                _violation("fn_new", v, v.fn_max, summary.fn_new, v.witness_fn_max)
            )
        if check_fp_new and v.fp_max > summary.fp_new:
            report.violations.append(
                _violation("fp_new", v, v.fp_max, summary.fp_new, v.witness_fp_max)
            )
    return report


def check_mask_protection(
    verdicts: list[AttackVerdict],
    summary: CertSummary,
    covering: CoveringReport,
) -> list[dict]:
    """Validate the per-mask safety arrays against enumerated attacks.

    For every class and placement: if any mask containing the placement has
    a safety bit of 1, the class must be un-attackable there (its reachable
    outcome set is exactly its label). Certified classes carry an implicit
    all-ones array.
    """
    ones = np.ones(summary.n_masks, dtype=np.int8)
    violations = []
    for v in verdicts:
        containing = covering.masks_for(*v.placement)
        for i in range(summary.num_classes):
            lam = summary.lambdas.get(i, ones)
            if any(lam[m] == 1 for m in containing):
                expected = {int(summary.y[i])}
                if v.outcomes[i] != expected:
                    violations.append(
                        {
                            "kind": "mask_protection",
                            "class": i,
                            "placement": list(v.placement),
                            "outcomes": sorted(v.outcomes[i]),
                            "expected": sorted(expected),
                        }
                    )
    return violations
