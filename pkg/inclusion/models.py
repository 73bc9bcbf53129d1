import json
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from inclusion.exceptions import ConfigError
from inclusion.services.field import GridSpec
from inclusion.services.geometry import ConformalMap
from inclusion.services.loading import LoadingSpec
from inclusion.services.material import MaterialPair

SCHEMA_VERSION = 1


class ComplexPair(BaseModel):
    re: float = 0.0
    im: float = 0.0

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def of(cls, value: complex) -> "ComplexPair":
        value = complex(value)
        return cls(re=value.real, im=value.imag)


def pairs(values) -> List[ComplexPair]:
    return [ComplexPair.of(v) for v in np.asarray(values, dtype=complex)]


class MapConfig(BaseModel):
    gamma: float = Field(..., gt=0, description="Conformal radius")
    a: List[ComplexPair] = Field(default_factory=list, description="Coefficients a_0, a_1, ...")
    delta: Optional[float] = Field(None, description="Analytic margin below |w| = gamma")

    def to_map(self) -> ConformalMap:
        coeffs = np.array([c.value for c in self.a], dtype=complex)
        return ConformalMap(gamma=self.gamma, a=coeffs, delta=self.delta)


class MaterialConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lambda_ext: float = Field(..., alias="lambda")
    mu_ext: float = Field(..., alias="mu")
    lambda_int: float = 0.0
    mu_int: float = 0.0
    cavity: bool = False

    def to_material(self) -> MaterialPair:
        return MaterialPair(
            lambda_ext=self.lambda_ext,
            mu_ext=self.mu_ext,
            lambda_int=self.lambda_int,
            mu_int=self.mu_int,
            cavity=self.cavity,
        )


class LoadingConfig(BaseModel):
    """Faber coefficients A_1..A_M, B_1..B_M of the background field."""

    A: List[ComplexPair] = Field(default_factory=list)
    B: List[ComplexPair] = Field(default_factory=list)

    @model_validator(mode="after")
    def _some_mode(self) -> "LoadingConfig":
        if not self.A and not self.B:
            raise ValueError("loading needs at least one A or B coefficient")
        return self

    def to_loading(self) -> LoadingSpec:
        return LoadingSpec(
            np.array([c.value for c in self.A] or [0j], dtype=complex),
            np.array([c.value for c in self.B] or [0j], dtype=complex),
        )


class OracleConfig(BaseModel):
    enabled: bool = False
    nodes: Optional[int] = Field(None, ge=8)
    samples: int = Field(64, ge=1)
    tolerance: Optional[float] = Field(None, gt=0)


class OutputConfig(BaseModel):
    dir: Optional[str] = None


class RunConfig(BaseModel):
    """One JSON run description; unset numeric fields fall back to the environment defaults."""

    schema_version: Literal[1]
    name: str = "run"
    map: MapConfig
    material: MaterialConfig
    loading: LoadingConfig
    truncation: Optional[int] = Field(None, ge=1)
    guard: Optional[int] = Field(None, ge=0)
    tolerance: Optional[float] = Field(None, gt=0)
    boundary_epsilon: Optional[float] = Field(None, gt=0, lt=1)
    grid: Optional[GridSpec] = None
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @field_validator("grid", mode="before")
    @classmethod
    def _parse_grid(cls, value: Union[str, dict, None]):
        if isinstance(value, str):
            return GridSpec.parse(value)
        return value


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a run file; pydantic ValidationError escapes unchanged."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {str(e)}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    if raw.get("schema_version") not in (None, SCHEMA_VERSION):
        raise ConfigError(f"unsupported schema_version {raw.get('schema_version')} (expected {SCHEMA_VERSION})")
    return RunConfig.model_validate(raw)
