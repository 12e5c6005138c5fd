"""Named numerical checks of the boundary operators, the coupling and the resonance analysis."""

from .catalog import CHECK_CATALOG, DISK_ONLY_CHECKS
from .checks import CheckResult, VerificationContext
from .suite import VerificationReport, VerificationSuite, run_verification

__all__ = [
    "CHECK_CATALOG",
    "DISK_ONLY_CHECKS",
    "CheckResult",
    "VerificationContext",
    "VerificationReport",
    "VerificationSuite",
    "run_verification",
]
