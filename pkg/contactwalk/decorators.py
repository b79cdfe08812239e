import functools
import logging
import time
from typing import Any, Callable, Dict

from .enums import CheckStatus

logger = logging.getLogger(__name__)

CheckResult = Dict[str, Any]


def invariant_check(check_name: str):
    """Wrap an invariant check so that it always yields a result record.

    The wrapped method returns ``{"status", "details", "trials", "violations"}``;
    exceptions become an ``error`` record instead of stopping the suite.
    """

    def decorator(func: Callable[..., CheckResult]) -> Callable[..., CheckResult]:
        @functools.wraps(func)
        def wrapper(self_or_cls, *args, **kwargs) -> CheckResult:
            start_time = time.perf_counter()
            try:
                raw = func(self_or_cls, *args, **kwargs)
                status = CheckStatus.from_string(raw.get("status", "failed"))
                details = raw.get("details", "Check function did not provide details.")
                trials = int(raw.get("trials", 0))
                violations = int(raw.get("violations", 0))
            except Exception as e:
                logger.exception("Invariant check %s raised", check_name)
                status = CheckStatus.ERROR
                details = f"Error during {check_name}: {type(e).__name__} - {e}"
                trials = 0
                violations = 0
            duration = time.perf_counter() - start_time
            logger.info("%s: %s (%d trials, %.2fs)", check_name, status, trials, duration)
            return {
                "check": check_name,
                "status": status.value,
                "duration_sec": round(duration, 3),
                "details": details,
                "trials": trials,
                "violations": violations,
            }

        return wrapper

    return decorator
