"""Static model parameters and the finite space-time window."""

import math
from dataclasses import dataclass, replace
from typing import Optional

# Light-cone slack added to 2*lambda + gamma when sizing windows.
CONE_SLACK = 4.0

# Guard band (in sites) used for boundary-contamination flags.
BOUNDARY_MARGIN = 2


@dataclass(frozen=True)
class ModelParams:
    """Infection rate and the four directional walk rates.

    The walk jumps right at rate alpha_i and left at rate beta_i when the
    site under it is in state i. Both total rates must agree.
    """

    lam: float
    alpha0: float
    beta0: float
    alpha1: float
    beta1: float
    allow_zero_rates: bool = False

    def __post_init__(self):
        for name in ("lam", "alpha0", "beta0", "alpha1", "beta1"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValueError(f"Rate '{name}' must be a number, got {value!r}.")
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"Rate '{name}' must be finite and non-negative, got {value}.")
        rates = (self.alpha0, self.beta0, self.alpha1, self.beta1)
        if not self.allow_zero_rates and min(rates) <= 0:
            raise ValueError(
                "All walk rates must be strictly positive unless zero rates are explicitly allowed."
            )
        gamma0 = self.alpha0 + self.beta0
        gamma1 = self.alpha1 + self.beta1
        if gamma0 <= 0:
            raise ValueError("Total jump rate gamma must be positive.")
        if abs(gamma0 - gamma1) > math.ulp(max(gamma0, gamma1)):
            raise ValueError(
                f"Total jump rates must agree: alpha0 + beta0 = {gamma0!r} but alpha1 + beta1 = {gamma1!r}."
            )

    @classmethod
    def from_drift_split(cls, lam: float, gamma: float, p0: float, p1: float, **kwargs) -> "ModelParams":
        """Build rates from gamma and the right-step probabilities p_i = alpha_i / gamma."""
        return cls(
            lam=lam,
            alpha0=p0 * gamma,
            beta0=gamma - p0 * gamma,
            alpha1=p1 * gamma,
            beta1=gamma - p1 * gamma,
            **kwargs,
        )

    @property
    def gamma(self) -> float:
        return self.alpha0 + self.beta0

    @property
    def v0(self) -> float:
        return self.alpha0 - self.beta0

    @property
    def v1(self) -> float:
        return self.alpha1 - self.beta1

    @property
    def max_drift(self) -> float:
        return max(abs(self.v0), abs(self.v1))

    def right_probability(self, state: int) -> float:
        return (self.alpha1 if state else self.alpha0) / self.gamma

    @property
    def cone_speed(self) -> float:
        return 2.0 * self.lam + self.gamma + CONE_SLACK

    def reach(self, horizon: float) -> int:
        return int(math.ceil(self.cone_speed * horizon))

    def with_lambda(self, lam: float) -> "ModelParams":
        return replace(self, lam=lam)

    def swapped(self) -> "ModelParams":
        return replace(self, alpha0=self.beta0, beta0=self.alpha0, alpha1=self.beta1, beta1=self.alpha1)

    def homogeneous(self, state: int) -> "ModelParams":
        """Rates of the walk that always sees `state` under it."""
        a, b = (self.alpha1, self.beta1) if state else (self.alpha0, self.beta0)
        return replace(self, alpha0=a, beta0=b, alpha1=a, beta1=b)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "gamma": self.gamma,
            "alpha0": self.alpha0,
            "beta0": self.beta0,
            "alpha1": self.alpha1,
            "beta1": self.beta1,
            "v0": self.v0,
            "v1": self.v1,
            "allow_zero_rates": self.allow_zero_rates,
        }

    def __str__(self):
        return (
            f"lambda={self.lam:g}, rates=({self.alpha0:g}, {self.beta0:g}, {self.alpha1:g}, {self.beta1:g}), "
            f"v0={self.v0:g}, v1={self.v1:g}"
        )


@dataclass(frozen=True)
class Window:
    x_min: int
    x_max: int
    horizon: float

    def __post_init__(self):
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (self.x_min, self.x_max)):
            raise ValueError("Window bounds must be integers.")
        if self.x_min >= self.x_max:
            raise ValueError(f"Window must satisfy x_min < x_max, got [{self.x_min}, {self.x_max}].")
        if not math.isfinite(self.horizon) or self.horizon <= 0:
            raise ValueError(f"Window horizon must be positive and finite, got {self.horizon}.")

    @classmethod
    def around_origin(cls, half_width: int, horizon: float) -> "Window":
        return cls(-int(half_width), int(half_width), float(horizon))

    @classmethod
    def for_horizon(cls, params: ModelParams, horizon: float, min_half_width: Optional[int] = None) -> "Window":
        """Smallest symmetric window whose half-width covers the light cone (and ``min_half_width``)."""
        return cls.around_origin(max(params.reach(horizon), BOUNDARY_MARGIN + 1, min_half_width or 0), horizon)

    @property
    def n_sites(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def n_bonds(self) -> int:
        return self.n_sites - 1

    @property
    def half_width(self) -> int:
        return min(-self.x_min, self.x_max)

    def contains(self, x: int) -> bool:
        return self.x_min <= x <= self.x_max

    def index(self, x: int) -> int:
        if not self.contains(x):
            raise ValueError(f"Site {x} lies outside the window [{self.x_min}, {self.x_max}].")
        return x - self.x_min

    def site(self, index: int) -> int:
        return index + self.x_min

    def near_boundary(self, x: int) -> bool:
        return x - self.x_min <= BOUNDARY_MARGIN or self.x_max - x <= BOUNDARY_MARGIN

    def with_horizon(self, horizon: float) -> "Window":
        return replace(self, horizon=float(horizon))

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "horizon": self.horizon}
