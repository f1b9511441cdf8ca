"""Exception hierarchy shared across the package.

CLI exit-code contract: ConfigurationError and its subclasses map to exit 2,
StructuralError to exit 3, check failures (reported, not raised) to exit 1.
"""


class PersivolError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(PersivolError):
    """Invalid user-supplied configuration (bad shape parameters, eps <= 0, ...)."""


class CoverageError(ConfigurationError):
    """A grid does not cover the required inflated bounding box."""


class UnsupportedBaselineError(ConfigurationError):
    """Closed-form baseline requested for a non-convex shape kind."""


class OracleScopeError(ConfigurationError):
    """Brute-force oracle invoked beyond its size guard."""


class StructuralError(PersivolError):
    """Internal invariant violation (broken pair complex, geometry mismatch)."""
