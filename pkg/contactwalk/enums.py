from enum import Enum, IntEnum


class _LabelledEnum(Enum):

    @classmethod
    def from_string(cls, s: str):
        if not isinstance(s, str):
            raise TypeError(f"Input must be a string, got {type(s).__name__}")
        try:
            return cls(s.strip().lower())
        except ValueError:
            valid = ", ".join([e.value for e in cls])
            raise ValueError(
                f"'{s}' is not a valid {cls.__name__}. "
                f"Valid values are: {valid}."
            )

    def __str__(self):
        return self.value


class InitialMode(_LabelledEnum):
    FULL = "full"
    EMPTY = "empty"
    BERNOULLI = "bernoulli"
    EQUILIBRIUM = "equilibrium"


class Experiment(_LabelledEnum):
    SPEED = "speed"
    SUBADD = "subadd"
    REGEN = "regen"
    IOTA = "iota"
    COUPLE = "couple"
    CLT = "clt"
    LDP = "ldp"
    SWEEP = "sweep"
    INVARIANTS = "invariants"


class EstimatorMethod(_LabelledEnum):
    LLN = "lln"
    SUBADDITIVE = "subadditive"
    REGENERATION = "regeneration"
    BATCH_MEANS = "batch-means"


class FailureStatus(_LabelledEnum):
    FAILED = "failed"
    CONFIRMED = "confirmed"
    UNCONFIRMED = "unconfirmed"


class CheckStatus(_LabelledEnum):
    PASSED = "passed"
    FAILED = "failed"
    ERROR = "error"


class EventKind(IntEnum):
    CROSS = 0
    ARROW = 1
