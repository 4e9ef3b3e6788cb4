"""Double-masking inference and certification for one binary class view.

Both procedures fetch classifier scores only through a query service, so
masked evaluations are computed once per occlusion pattern and shared across
every class view of the same image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import BinaryView
from .errors import BackendError, PatchCertError
from .geometry import MaskSet, verify_covering


@dataclass
class SLCertResult:
    """Certification verdict plus the per-mask safety array.

    ``lam[m] = 1`` records that inference provably returns the true label for
    any attack fully contained in mask m; ``certified`` is 1 exactly when the
    whole array is ones.
    """

    certified: int
    lam: np.ndarray


def _masked_pred(queries, view: BinaryView, pattern: tuple[int, ...], round_no: int) -> int:
    try:
        scores = queries.scores(pattern)
    except PatchCertError:
        raise
    except Exception as exc:
        raise BackendError(
            f"classifier failed on mask pattern {pattern} "
            f"(round {round_no}, class {view.class_index})"
        ) from exc
    return int(scores[view.class_index] > view.threshold)


def sl_infer(view: BinaryView, mask_set: MaskSet, queries) -> int:
    """Two-round masked inference for one binary class.

    First round predicts on every singly-masked image; unanimous agreement is
    returned directly. Otherwise each disagreeing mask (ascending index) gets
    a second round of double-masked predictions, and the first disagreer whose
    second round is unanimous wins; failing that, the first-round majority
    does. Ties in the majority vote resolve to label 0.
    """
    n = len(mask_set.masks)
    first = [_masked_pred(queries, view, (m,), 1) for m in range(n)]
    majority = 1 if 2 * sum(first) > n else 0
    disagreers = [m for m in range(n) if first[m] != majority]
    if not disagreers:
        return majority
    for m_dis in disagreers:
        second = [_masked_pred(queries, view, (m_dis, m), 2) for m in range(n)]
        if all(p == second[0] for p in second):
            return first[m_dis]
    return majority


def sl_certify(
    view: BinaryView,
    truth: int,
    mask_set: MaskSet,
    queries,
    covered: bool | None = None,
) -> SLCertResult:
    """Certify one binary class against any patch the mask set can cover.

    Evaluates the two-mask prediction for every unordered mask pair, diagonal
    included. A single mismatch with the label means no guarantee can be made
    for patches under either mask of the pair, so both safety entries drop to
    0. A non-covering mask set certifies nothing.

    Pass ``covered`` when the covering check was already done for this mask
    set; otherwise it is verified here.
    """
    n = len(mask_set.masks)
    if covered is None:
        covered = verify_covering(mask_set).covered
    if not covered:
        return SLCertResult(0, np.zeros(n, dtype=np.int8))
    lam = np.ones(n, dtype=np.int8)
    certified = 1
    for m0 in range(n):
        for m1 in range(m0, n):
            if _masked_pred(queries, view, (m0, m1), 2) != truth:
                certified = 0
                lam[m0] = 0
                lam[m1] = 0
    return SLCertResult(certified, lam)
