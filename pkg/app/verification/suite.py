from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..config import RunConfig
from ..errors import CalderonError, ConfigError
from ..problem import Problem
from .catalog import CHECK_CATALOG, DISK_ONLY_CHECKS
from .checks import CHECKS, CheckResult, VerificationContext

logger = logging.getLogger(__name__)


@dataclass
class VerificationReport:
    results: dict[str, CheckResult] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results.values())

    @property
    def failures(self) -> list[str]:
        return [name for name, result in self.results.items() if not result.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": {name: result.to_dict() for name, result in self.results.items()},
            "skipped": list(self.skipped),
        }


class VerificationSuite:
    """
    Runs the named checks against one configuration.

    Checks that only make sense on the disk (they compare with Bessel zeros)
    are skipped for other shapes.  A check that raises is recorded as failed
    with the exception message; the remaining checks still run.
    """

    def __init__(self, problem: Problem, names: list[str] | None = None) -> None:
        self._problem = problem
        self._context = VerificationContext(problem)
        requested = list(CHECK_CATALOG) if names is None else list(names)
        unknown = [name for name in requested if name not in CHECK_CATALOG]
        if unknown:
            raise ConfigError(f"unknown verification check(s): {', '.join(unknown)}")
        self._names = requested

    @property
    def names(self) -> list[str]:
        return list(self._names)

    def run(self) -> VerificationReport:
        report = VerificationReport()
        is_disk = self._problem.config.shape == "circle"
        for name in self._names:
            if name in DISK_ONLY_CHECKS and not is_disk:
                report.skipped.append(name)
                continue
            report.results[name] = self._run_one(name)
        logger.info(
            "verification: %d passed, %d failed, %d skipped",
            len(report.results) - len(report.failures),
            len(report.failures),
            len(report.skipped),
        )
        return report

    def _run_one(self, name: str) -> CheckResult:
        _, tolerance = CHECK_CATALOG[name]
        try:
            result = CheckResult.measured(CHECKS[name](self._context), tolerance)
        except (CalderonError, ArithmeticError, ValueError) as exc:
            logger.warning("check %s raised: %s", name, exc)
            return CheckResult.failed(tolerance, f"{type(exc).__name__}: {exc}")
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, "%-34s %.3e (tol %.1e) %s", name, result.value, tolerance, "ok" if result.passed else "FAIL")
        return result


def run_verification(config: RunConfig, names: list[str] | None = None) -> VerificationReport:
    return VerificationSuite(Problem(config), names).run()
