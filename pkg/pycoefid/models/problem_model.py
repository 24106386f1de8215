from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class CircleRegion(BaseModel):
    """Closed disc assigning ``value`` to every point within ``radius`` of ``center``."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    shape: Literal["circle"] = "circle"
    center: Tuple[float, float]
    radius: float = Field(gt=0)
    value: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        # Squared distances, no square root at the boundary
        dx = points[:, 0] - self.center[0]
        dy = points[:, 1] - self.center[1]
        return dx * dx + dy * dy <= self.radius * self.radius


class RectangleRegion(BaseModel):
    """Closed axis-aligned rectangle given by its center and side lengths."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    shape: Literal["rectangle"] = "rectangle"
    center: Tuple[float, float]
    side_x: float = Field(gt=0)
    side_y: float = Field(gt=0)
    value: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        x_lo = self.center[0] - 0.5 * self.side_x
        x_hi = self.center[0] + 0.5 * self.side_x
        y_lo = self.center[1] - 0.5 * self.side_y
        y_hi = self.center[1] + 0.5 * self.side_y
        return (points[:, 0] >= x_lo) & (points[:, 0] <= x_hi) & (points[:, 1] >= y_lo) & (points[:, 1] <= y_hi)


Region = Annotated[Union[CircleRegion, RectangleRegion], Field(discriminator="shape")]


class RegionCoefficient(BaseModel):
    """
    Piecewise-constant spatial function: ``background`` everywhere except inside the regions.

    Regions are evaluated in declaration order and a later region overrides an earlier one.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    background: float = 0.0
    regions: List[Region] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def accept_scalar(cls, value):
        """Allow a bare number as shorthand for a constant coefficient."""
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return {"background": float(value)}
        return value

    @classmethod
    def constant(cls, value: float) -> "RegionCoefficient":
        return cls(background=value)

    def evaluate(self, points) -> np.ndarray:
        """Evaluate at an (n, 2) array of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        values = np.full(points.shape[0], self.background, dtype=float)
        for region in self.regions:
            values[region.contains(points)] = region.value
        return values

    def bounds(self) -> Tuple[float, float]:
        """Smallest and largest value the coefficient can take."""
        candidates = [self.background] + [region.value for region in self.regions]
        return min(candidates), max(candidates)


class CoefficientSpec(BaseModel):
    """Diffusion coefficient k(x) > 0 and Robin coefficient mu(x) >= 0 of the elliptic operator."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    diffusion: RegionCoefficient = Field(default_factory=lambda: RegionCoefficient(background=1.0))
    robin: RegionCoefficient = Field(default_factory=lambda: RegionCoefficient(background=0.0))


class SourceSpec(BaseModel):
    """
    Separable source f(x, t) = amplitude * t**time_power * exp(b1 x1 + b2 x2).
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    amplitude: float
    time_power: int = Field(default=1, ge=0)
    exponents: Tuple[float, float] = (0.0, 0.0)

    def time_factor(self, t: float) -> float:
        return self.amplitude * float(t) ** self.time_power

    def spatial_profile(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.exp(self.exponents[0] * points[:, 0] + self.exponents[1] * points[:, 1])

    def evaluate(self, points, t: float) -> np.ndarray:
        """Evaluate f at an (n, 2) array of points and time ``t``."""
        return self.time_factor(t) * self.spatial_profile(points)

    def condition_violations(self) -> List[str]:
        """
        Reasons why f fails to vanish at t = 0 or fails to increase strictly in time.

        Both properties hold for every x exactly when time_power >= 1 and amplitude > 0.
        """
        problems = []
        if self.time_power < 1:
            problems.append(f"f(x, 0) != 0 (time_power = {self.time_power})")
        if not self.amplitude > 0:
            problems.append(f"f is not strictly increasing in time (amplitude = {self.amplitude})")
        return problems


class Domain(BaseModel):
    """Axis-aligned rectangle [0, x_len] x [0, y_len]."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    x_len: float = Field(default=1.0, gt=0)
    y_len: float = Field(default=1.0, gt=0)


class ProblemSpec(BaseModel):
    """Direct-problem data plus, optionally, the true reaction coefficient."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    domain: Domain = Field(default_factory=Domain)
    coeff: CoefficientSpec = Field(default_factory=CoefficientSpec)
    source: SourceSpec
    horizon: float = Field(gt=0)
    c_true: Optional[RegionCoefficient] = None

    @field_validator("coeff")
    @classmethod
    def check_coefficient_bounds(cls, coeff: CoefficientSpec) -> CoefficientSpec:
        k_min, _ = coeff.diffusion.bounds()
        mu_min, _ = coeff.robin.bounds()
        if not k_min > 0:
            raise ValueError(f"diffusion coefficient must be positive, got minimum {k_min}")
        if mu_min < 0:
            raise ValueError(f"Robin coefficient must be nonnegative, got minimum {mu_min}")
        return coeff
