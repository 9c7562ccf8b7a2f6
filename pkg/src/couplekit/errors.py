"""Exception types and safety caps shared across the package."""

# Caps converting silent hangs on corrupted inputs into errors.  Valid
# distributions terminate the scans almost surely, so these are only
# reachable when probability mass does not sum to 1.
WMH_SCAN_CAP = 10_000_000
DART_ROUND_CAP = 10_000_000


class DistributionError(ValueError):
    """Invalid probability data (negative, non-finite, all-zero, mismatched)."""


class ProtocolViolation(RuntimeError):
    """A message arrived out of protocol order."""


class PathologicalInput(RuntimeError):
    """A scan or dart loop exceeded its safety cap; the input is corrupt."""
