"""Exception types shared across the package."""


class PatchCertError(Exception):
    """Base class for all package errors."""


class ConfigError(PatchCertError):
    """Invalid configuration: bad mask budget, patch size, manifest, or flags."""


class BackendError(PatchCertError):
    """Classifier backend failure: load error, shape mismatch, non-finite scores."""


class UnsupportedOperationError(PatchCertError):
    """Operation requires a capability the selected backend does not provide."""


class BudgetError(PatchCertError):
    """Exhaustive enumeration would exceed the configured budget."""


class ConsistencyError(PatchCertError):
    """Internal invariant violated, e.g. vulnerability data missing for a class."""
