"""Certified robustness bounds for multi-label classifiers under patch attacks.

The package wraps any multi-label classifier behind per-class binary views,
defends each view with double-masking over a covering mask set, and certifies
per-image lower bounds on true positives (and upper bounds on false
positives/negatives) that hold for every patch placement and content. A
location-aware pass tightens those bounds using the constraint that a single
patch occupies a single location, and an exhaustive synthetic-backend oracle
re-verifies every claim at desk scale.
"""

from .backends import (
    BinaryView,
    ClassSpec,
    Image,
    OnnxClassifier,
    OnnxConfig,
    SyntheticClassifier,
    achievable_outputs,
)
from .double_masking import SLCertResult, sl_certify, sl_infer
from .engine import (
    ATTACKER_MODES,
    CertSummary,
    QueryService,
    demux_certify,
    demux_infer,
    location_aware_certify,
)
from .errors import (
    BackendError,
    BudgetError,
    ConfigError,
    ConsistencyError,
    PatchCertError,
    UnsupportedOperationError,
)
from .geometry import (
    CoveringReport,
    Mask,
    MaskSet,
    PatchSpec,
    generate_mask_set,
    masks_containing,
    verify_covering,
)
from .metrics import (
    PRCurve,
    PRPoint,
    SETTINGS,
    THRESHOLD_FAMILIES,
    average_precision,
    micro_aggregate,
    precision_at_recall,
    threshold_sweep,
)
from .oracle import (
    AttackVerdict,
    BoundReport,
    check_bounds,
    check_mask_protection,
    enumerate_attacks,
)
from .synthetic import (
    SyntheticInstance,
    demo_instance,
    generate_suite,
    random_instance,
)

__version__ = "0.1.0"

__all__ = [
    "ATTACKER_MODES",
    "AttackVerdict",
    "BackendError",
    "BinaryView",
    "BoundReport",
    "BudgetError",
    "CertSummary",
    "ClassSpec",
    "ConfigError",
    "ConsistencyError",
    "CoveringReport",
    "Image",
    "Mask",
    "MaskSet",
    "OnnxClassifier",
    "OnnxConfig",
    "PRCurve",
    "PRPoint",
    "PatchCertError",
    "PatchSpec",
    "QueryService",
    "SETTINGS",
    "SLCertResult",
    "SyntheticClassifier",
    "SyntheticInstance",
    "THRESHOLD_FAMILIES",
    "UnsupportedOperationError",
    "achievable_outputs",
    "average_precision",
    "check_bounds",
    "check_mask_protection",
    "demo_instance",
    "demux_certify",
    "demux_infer",
    "enumerate_attacks",
    "generate_mask_set",
    "generate_suite",
    "location_aware_certify",
    "masks_containing",
    "micro_aggregate",
    "precision_at_recall",
    "random_instance",
    "sl_certify",
    "sl_infer",
    "threshold_sweep",
    "verify_covering",
]
