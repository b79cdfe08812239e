from typing import Dict, Optional


class ContactWalkError(Exception):
    exit_code = 1


class ConfigParseError(ContactWalkError, ValueError):
    exit_code = 1


class OutOfRangeError(ContactWalkError, ValueError):
    exit_code = 1


class CapacityError(ContactWalkError):
    exit_code = 2

    def __init__(self, message: str, suggested_horizon: Optional[float] = None):
        if suggested_horizon is not None:
            message = f"{message} Try a horizon of at most {suggested_horizon:.3g}."
        super().__init__(message)
        self.suggested_horizon = suggested_horizon


class InvariantViolation(ContactWalkError):
    exit_code = 3


class InsufficientDataError(ContactWalkError):
    exit_code = 4

    def __init__(self, message: str, counts: Optional[Dict[str, int]] = None):
        self.counts: Dict[str, int] = dict(counts or {})
        if self.counts:
            listed = ", ".join(f"{k}={v}" for k, v in self.counts.items())
            message = f"{message} ({listed})"
        super().__init__(message)
