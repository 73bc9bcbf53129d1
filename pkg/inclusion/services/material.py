"""
Lamé constants of the matrix and the inclusion, and the constants derived from
them that appear in the Kelvin matrix and in the complex representation:

    α = ½(1/μ + 1/(2μ+λ)),  β = ½(1/μ − 1/(2μ+λ)),  κ = (λ+3μ)/(λ+μ)
"""
import logging
from typing import NamedTuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from inclusion.exceptions import MaterialError, ModeError

logger = logging.getLogger(__name__)


class ElasticConstants(NamedTuple):
    alpha: float
    beta: float
    kappa: float


def check_elliptic(lam: float, mu: float, *, side: str = "exterior") -> None:
    if not mu > 0:
        raise MaterialError(f"{side} shear modulus must be positive, got mu={mu}")
    if not lam + mu > 0:
        raise MaterialError(f"{side} Lamé constants must satisfy lambda + mu > 0, got {lam} + {mu}")


def derive_constants(lam: float, mu: float) -> ElasticConstants:
    """
    Kelvin and Kolosov constants for one phase.

    Returns (alpha, beta, kappa) with kappa * beta == alpha.
    Raises MaterialError for non-elliptic input.
    """
    check_elliptic(lam, mu)
    longitudinal = 1.0 / (2.0 * mu + lam)
    alpha = 0.5 * (1.0 / mu + longitudinal)
    beta = 0.5 * (1.0 / mu - longitudinal)
    kappa = (lam + 3.0 * mu) / (lam + mu)
    return ElasticConstants(alpha=alpha, beta=beta, kappa=kappa)


class MaterialPair(BaseModel):
    """Exterior matrix and interior inclusion constants; cavity is a mode flag."""

    model_config = ConfigDict(frozen=True)

    lambda_ext: float = Field(..., description="Lamé first constant outside the inclusion")
    mu_ext: float = Field(..., description="Shear modulus outside the inclusion")
    lambda_int: float = Field(0.0, description="Lamé first constant inside")
    mu_int: float = Field(0.0, description="Shear modulus inside")
    cavity: bool = False

    @model_validator(mode="after")
    def _validate_phases(self) -> "MaterialPair":
        check_elliptic(self.lambda_ext, self.mu_ext)
        if self.cavity:
            if self.lambda_int != 0.0 or self.mu_int != 0.0:
                raise MaterialError("cavity mode requires zero interior Lamé constants")
            return self
        check_elliptic(self.lambda_int, self.mu_int, side="interior")
        contrast = (self.lambda_ext - self.lambda_int) ** 2 + (self.mu_ext - self.mu_int) ** 2
        if contrast == 0.0:
            raise MaterialError("interior and exterior materials coincide; there is no inclusion")
        return self

    # ── Exterior ─────────────────────────────────────────────

    def exterior_constants(self) -> ElasticConstants:
        return derive_constants(self.lambda_ext, self.mu_ext)

    @property
    def alpha(self) -> float:
        return self.exterior_constants().alpha

    @property
    def beta(self) -> float:
        return self.exterior_constants().beta

    @property
    def kappa(self) -> float:
        return self.exterior_constants().kappa

    # ── Interior ─────────────────────────────────────────────

    def interior_constants(self) -> ElasticConstants:
        if self.cavity:
            raise ModeError("interior constants are undefined for a cavity (1/mu_int is singular)")
        return derive_constants(self.lambda_int, self.mu_int)

    @property
    def alpha_t(self) -> float:
        return self.interior_constants().alpha

    @property
    def beta_t(self) -> float:
        return self.interior_constants().beta

    @property
    def kappa_t(self) -> float:
        return self.interior_constants().kappa

    def lame(self, side: str) -> tuple:
        """(lambda, mu) of the given side, 'exterior' or 'interior'."""
        if side == "exterior":
            return self.lambda_ext, self.mu_ext
        if side == "interior":
            if self.cavity:
                raise ModeError("a cavity has no interior phase")
            return self.lambda_int, self.mu_int
        raise ValueError(f"unknown side {side!r}")

    def cavity_limit(self) -> "MaterialPair":
        """Same matrix with the inclusion replaced by a hole."""
        logger.info(f"Switching to cavity limit (lambda={self.lambda_ext}, mu={self.mu_ext})")
        return MaterialPair(
            lambda_ext=self.lambda_ext,
            mu_ext=self.mu_ext,
            lambda_int=0.0,
            mu_int=0.0,
            cavity=True,
        )
