import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from pycoefid.exceptions import ConfigError
from pycoefid.models.problem_model import (
    CircleRegion,
    CoefficientSpec,
    Domain,
    ProblemSpec,
    RectangleRegion,
    RegionCoefficient,
    SourceSpec,
)


def _divides(horizon: float, tau: float) -> bool:
    n = round(horizon / tau)
    return n >= 1 and abs(n * tau - horizon) <= 1e-12 * horizon


class IdentificationConfig(BaseModel):
    """
    Settings of the iterative coefficient identification.

    ``init_mode`` chooses the starting coefficient: ``from_above`` solves the final-time
    equation with a zero time derivative, ``zero`` starts from c = 0.
    ``psi_floor`` defaults to 1e-8 * max(psi) when left unset.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    init_mode: Literal["from_above", "zero"] = "from_above"
    max_iterations: int = Field(default=20, ge=1)
    stop_tol: float = Field(default=0.0, ge=0)
    psi_floor: Optional[float] = Field(default=None, gt=0)
    clip_negative: bool = False
    keep_iterates: bool = True


class MeshSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    nx: int = Field(default=50, ge=1)
    ny: int = Field(default=50, ge=1)


class CoefficientsSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    diffusion: RegionCoefficient = Field(default_factory=lambda: RegionCoefficient(background=1.0))
    robin: RegionCoefficient = Field(default_factory=lambda: RegionCoefficient(background=0.0))
    reaction: Optional[RegionCoefficient] = None

    @model_validator(mode="after")
    def check_bounds(self):
        if not self.diffusion.bounds()[0] > 0:
            raise ValueError("diffusion coefficient must be positive everywhere")
        if self.robin.bounds()[0] < 0:
            raise ValueError("Robin coefficient must be nonnegative everywhere")
        return self


class SolverSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    rel_tol: float = Field(default=1e-10, gt=0)
    method: Literal["direct", "cg"] = "direct"


class TimeSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    horizon: float = Field(gt=0)
    tau: float = Field(gt=0)
    theta: float = 1.0
    data_tau: Optional[float] = Field(default=None, gt=0)
    data_theta: float = 0.5
    keep_trajectory: bool = False
    snapshot_every: int = Field(default=0, ge=0)
    study_taus: List[float] = Field(default_factory=lambda: [1e-3, 5e-4, 2.5e-4])
    solver: SolverSection = Field(default_factory=SolverSection)

    @field_validator("theta", "data_theta")
    @classmethod
    def check_theta(cls, value: float) -> float:
        if value not in (1.0, 0.5):
            raise ValueError(f"theta must be 1 or 0.5, got {value}")
        return value

    @field_validator("study_taus")
    @classmethod
    def check_study_taus(cls, taus: List[float]) -> List[float]:
        if not taus or any(not tau > 0 for tau in taus):
            raise ValueError("study_taus must be a non-empty list of positive steps")
        return taus

    @model_validator(mode="after")
    def check_steps_divide_horizon(self):
        steps = [self.tau] + ([self.data_tau] if self.data_tau is not None else [])
        # The default study steps are only checked by the study command itself
        if "study_taus" in self.model_fields_set:
            steps += list(self.study_taus)
        for tau in steps:
            if not _divides(self.horizon, tau):
                raise ValueError(f"time step {tau} does not divide the horizon {self.horizon}")
        return self

    def undivided_study_taus(self) -> List[float]:
        """Study steps that do not divide the horizon."""
        return [tau for tau in self.study_taus if not _divides(self.horizon, tau)]

    @property
    def resolved_data_tau(self) -> float:
        return self.data_tau if self.data_tau is not None else self.tau / 10.0


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    directory: str = "output"
    vtk: bool = False


class RunConfig(BaseModel):
    """Complete JSON run configuration; unknown keys anywhere are rejected."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    domain: Domain = Field(default_factory=Domain)
    mesh: MeshSection = Field(default_factory=MeshSection)
    coefficients: CoefficientsSection = Field(default_factory=CoefficientsSection)
    source: SourceSpec
    time: TimeSection
    identification: IdentificationConfig = Field(default_factory=IdentificationConfig)
    output: OutputSection = Field(default_factory=OutputSection)

    def to_problem(self) -> ProblemSpec:
        return ProblemSpec(
            domain=Domain(x_len=self.domain.x_len, y_len=self.domain.y_len),
            coeff=CoefficientSpec(diffusion=self.coefficients.diffusion, robin=self.coefficients.robin),
            source=self.source,
            horizon=self.time.horizon,
            c_true=self.coefficients.reaction,
        )


REGION_KEYS = set(CircleRegion.model_fields) | set(RectangleRegion.model_fields)


def _format_location(loc) -> str:
    # Drop discriminator tags such as 'circle' that pydantic inserts into union locations
    parts = [str(part) for part in loc if part not in ("circle", "rectangle")]
    return ".".join(parts)


def _describe_error(err) -> Tuple[List[str], str]:
    """Offending keys and message of one validation error."""
    location = _format_location(err["loc"])
    if err["type"] == "union_tag_not_found" and isinstance(err.get("input"), dict):
        # A region without 'shape': name the keys that are not region keys, else 'shape' itself
        unknown = sorted(str(key) for key in err["input"] if key not in REGION_KEYS)
        if unknown:
            keys = [f"{location}.{key}" for key in unknown]
            return keys, f"{location}: missing 'shape', unexpected keys {', '.join(unknown)}"
        return [f"{location}.shape"], f"{location}.shape: Field required"
    return [location], f"{location}: {err['msg']}"


def parse_run_config(data: Union[dict, str]) -> RunConfig:
    """
    Validate a configuration document.

    Raises:
        ConfigError: With every offending key named by its dotted path
    """
    try:
        if isinstance(data, str):
            return RunConfig.model_validate_json(data)
        return RunConfig.model_validate(data)
    except ValidationError as e:
        keys, details = [], []
        for err in e.errors():
            err_keys, message = _describe_error(err)
            keys.extend(err_keys)
            details.append(message)
        raise ConfigError(f"Invalid configuration: {'; '.join(details)}", keys=keys) from e


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a JSON configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    try:
        json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in config file {path}: {e}") from e
    return parse_run_config(text)
