"""
Scenario and sweep documents

JSON documents describing one evolution run or a Cartesian parameter sweep,
validated with pydantic. Loss rates may be given per arm (lambda_a, lambda_b)
or as mean and imbalance (lambda_bar, delta_lambda).
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .models import DriftSpec, Observable

SWEEP_KEYS = (
    "kappa0",
    "Lambda",
    "lambda_a",
    "lambda_b",
    "lambda_bar",
    "delta_lambda",
    "phi",
    "f",
    "t_end",
    "eta",
)


class DriftSpecModel(BaseModel):
    kappa0: float = Field(gt=0)
    Lambda: float = Field(default=0.0, ge=0)
    lambda_a: float = Field(default=0.0, ge=0)
    lambda_b: float = Field(default=0.0, ge=0)
    phi: float = 0.0
    f: float = Field(default=1.0, gt=0)

    model_config = ConfigDict(extra="forbid", frozen=True)

    @model_validator(mode="before")
    @classmethod
    def _expand_mean_imbalance(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        if "lambda_bar" not in data and "delta_lambda" not in data:
            return data
        if "lambda_a" in data or "lambda_b" in data:
            raise ValueError(
                "give either lambda_a/lambda_b or lambda_bar/delta_lambda, not both"
            )
        data = dict(data)
        lambda_bar = float(data.pop("lambda_bar", 0.0))
        delta_lambda = float(data.pop("delta_lambda", 0.0))
        data["lambda_a"] = lambda_bar + 0.5 * delta_lambda
        data["lambda_b"] = lambda_bar - 0.5 * delta_lambda
        return data

    def to_drift_spec(self) -> DriftSpec:
        return DriftSpec(**self.model_dump())


class ScenarioConfig(BaseModel):
    """One evolution run"""

    spec: DriftSpecModel
    t_end: float = Field(ge=0)
    step: float = Field(default=1e-3, gt=0)
    sample_every: float = Field(default=0.1, gt=0)
    post_loss: Optional[List[float]] = None
    outputs: List[Observable] = Field(
        default_factory=lambda: [Observable.N, Observable.J2, Observable.RATIO]
    )
    seed: int = 0

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("post_loss")
    @classmethod
    def _check_post_loss(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is None:
            return value
        if len(value) != 4:
            raise ValueError("post_loss needs one transmission per mode (4 values)")
        if any(not 0.0 <= eta <= 1.0 for eta in value):
            raise ValueError("post_loss transmissions must lie in [0, 1]")
        return value

    @field_validator("outputs")
    @classmethod
    def _check_outputs(cls, value: List[Observable]) -> List[Observable]:
        if not value:
            raise ValueError("at least one output observable is required")
        if len(set(value)) != len(value):
            raise ValueError("output observables must be distinct")
        return value

    @model_validator(mode="after")
    def _check_sampling(self) -> "ScenarioConfig":
        if self.sample_every < self.step:
            raise ValueError(
                f"sample_every ({self.sample_every}) must be >= step ({self.step})"
            )
        return self


class SweepConfig(BaseModel):
    """Cartesian sweep over drift parameters, end time and balanced post-loss"""

    base: ScenarioConfig
    grid: Dict[str, List[float]]
    workers: Optional[int] = Field(default=None, ge=1)

    model_config = ConfigDict(extra="forbid", frozen=True)

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, value: Dict[str, List[float]]) -> Dict[str, List[float]]:
        if not value:
            raise ValueError("grid must name at least one parameter")
        for key, points in value.items():
            if key not in SWEEP_KEYS:
                raise ValueError(
                    f"unknown grid key '{key}'; allowed: {', '.join(SWEEP_KEYS)}"
                )
            if not points:
                raise ValueError(f"grid axis '{key}' is empty")
        if {"lambda_a", "lambda_b"} & value.keys() and {
            "lambda_bar",
            "delta_lambda",
        } & value.keys():
            raise ValueError("mix of per-arm and mean/imbalance loss axes")
        return value

    @property
    def size(self) -> int:
        total = 1
        for points in self.grid.values():
            total *= len(points)
        return total
