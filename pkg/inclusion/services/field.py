"""
Displacement fields of the solved densities.

Outside Ω, u = H + S[ψ]; inside, u = S̃[φ]. Both single layers are written
through a holomorphic pair,

    2S[ψ] = κ f − z·conj(f') − conj(g),  f = β𝓛[ψ],  g = −α𝓛[ψ̄] − β𝓒[ζ̄ψ]

with 𝓒 = d𝓛/dz and 𝓒[ζ̄φ_l] = Σ_{k≥−1} conj(a_k) γ^-k 𝓒[φ_{k+l}]. Exterior
values use the Grunsky series in w; interior values use Faber polynomials
in z. Densities are handled as {basis index: coefficient} dictionaries.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from inclusion.exceptions import DomainError, InclusionError, ModeError
from inclusion.services.geometry import (
    GeometryBundle,
    exact_grunsky_limit,
    faber_composition,
    faber_values,
)
from inclusion.services.loading import LoadingSpec, eval_H, eval_traction_potential_H
from inclusion.services.material import MaterialPair
from inclusion.services.system import DensitySolution

logger = logging.getLogger(__name__)

Density = Dict[int, complex]

DEFAULT_EPSILON = 1e-3
DEFAULT_BAND = 1e-2


class FieldSample(BaseModel):
    """One evaluation point; f, df, g describe 2S (or 2S̃) at z."""

    w: Optional[complex] = None
    z: complex
    u: complex
    region: Literal["exterior", "interior"]
    parts: Dict[str, complex] = Field(default_factory=dict)
    flagged: bool = False
    f: complex = 0j
    df: complex = 0j
    g: complex = 0j
    h_potential: complex = 0j


@dataclass(frozen=True)
class HolomorphicPair:
    f: complex
    df: complex
    g: complex


class GridSpec(BaseModel):
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int = Field(..., ge=0)
    ny: int = Field(..., ge=0)

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """From the command-line form "x0,x1,y0,y1,nx,ny"."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 6:
            raise ValueError(f"grid needs six comma-separated values, got {text!r}")
        x0, x1, y0, y1 = (float(p) for p in parts[:4])
        return cls(x0=x0, x1=x1, y0=y0, y1=y1, nx=int(parts[4]), ny=int(parts[5]))

    def points(self) -> np.ndarray:
        xs = np.linspace(self.x0, self.x1, self.nx) if self.nx > 1 else np.array([self.x0] * self.nx)
        ys = np.linspace(self.y0, self.y1, self.ny) if self.ny > 1 else np.array([self.y0] * self.ny)
        return np.array([complex(x, y) for y in ys for x in xs], dtype=complex)


# ── Density bookkeeping ───────────────────────────────────────


def exterior_density(solution: DensitySolution) -> Density:
    """ψ = Σ x^e_n φ_n + Σ x^e_-n φ_-n (no φ₀ component)."""
    density = {}
    for n in range(1, solution.order + 1):
        if solution.xe_plus[n] != 0:
            density[n] = complex(solution.xe_plus[n])
        if solution.xe_minus[n] != 0:
            density[-n] = complex(solution.xe_minus[n])
    return density


def interior_density(solution: DensitySolution) -> Density:
    """φ = Σ x^i_n φ_n + Σ_{n≥0} x^i_-n φ_-n."""
    if solution.mode != "transmission":
        raise ModeError("a cavity solution has no interior density")
    density = {}
    if solution.xi_minus[0] != 0:
        density[0] = complex(solution.xi_minus[0])
    for n in range(1, solution.order + 1):
        if solution.xi_plus[n] != 0:
            density[n] = complex(solution.xi_plus[n])
        if solution.xi_minus[n] != 0:
            density[-n] = complex(solution.xi_minus[n])
    return density


def conjugate_density(density: Density) -> Density:
    """conj(φ_k) = φ_-k on ∂Ω."""
    return {-k: np.conj(c) for k, c in density.items()}


def zeta_bar_density(density: Density, bundle: GeometryBundle) -> Density:
    """ζ̄φ_l = Σ_{k≥−1} conj(a_k) γ^-k φ_{k+l}."""
    gamma = bundle.gamma
    out: Density = {}
    for l, c in density.items():
        for k in range(-1, bundle.map.depth + 1):
            ak = bundle.map.coefficient(k)
            if ak == 0:
                continue
            out[k + l] = out.get(k + l, 0j) + c * np.conj(ak) * gamma ** (-k)
    return out


# ── Evaluator ─────────────────────────────────────────────────


class FieldEvaluator:
    """Evaluates 𝓛, 𝓒 and the displacement for one solved problem."""

    def __init__(
        self,
        bundle: GeometryBundle,
        material: MaterialPair,
        solution: Optional[DensitySolution] = None,
        loading: Optional[LoadingSpec] = None,
    ):
        self.bundle = bundle
        self.material = material
        self.solution = solution
        self.loading = loading
        self.map = bundle.map
        self.gamma = bundle.gamma
        self.size = bundle.n + self.map.depth + 1
        guard = bundle.guard + self.map.depth + 1
        composition = faber_composition(self.map, self.size, guard)
        self._grunsky: List[Tuple[np.ndarray, np.ndarray]] = [(np.zeros(0), np.zeros(0, dtype=complex))]
        for j in range(1, self.size + 1):
            limit = exact_grunsky_limit(self.map, j, self.size, guard)
            powers = np.arange(-limit, 0)
            coeffs = np.array([composition[j].coefficient(int(p)) for p in powers], dtype=complex)
            self._grunsky.append((powers, coeffs))

    def _check_index(self, k: int) -> None:
        if abs(k) > self.size:
            raise DomainError(f"density index {k} exceeds the evaluator range {self.size}")

    # ── exterior layer potentials ──

    def grunsky_tail(self, j: int, w) -> Tuple[np.ndarray, np.ndarray]:
        """Σ_k c_jk w^-k and its w-derivative."""
        w = np.asarray(w, dtype=complex)
        powers, coeffs = self._grunsky[j]
        value = np.zeros_like(w)
        deriv = np.zeros_like(w)
        for p, c in zip(powers, coeffs):
            if c != 0:
                value = value + c * w ** int(p)
                deriv = deriv + p * c * w ** int(p - 1)
        return value, deriv

    def exterior_L(self, density: Density, w) -> Tuple[np.ndarray, np.ndarray]:
        """𝓛[φ] outside Ω and d𝓛/dw; φ must have no φ₀ component."""
        w = np.asarray(w, dtype=complex)
        value = np.zeros_like(w)
        deriv = np.zeros_like(w)
        for k, c in density.items():
            if c == 0:
                continue
            self._check_index(k)
            if k > 0:
                tail, dtail = self.grunsky_tail(k, w)
                scale = -c * self.gamma ** (-k) / k
                value = value + scale * tail
                deriv = deriv + scale * dtail
            elif k < 0:
                n = -k
                value = value - c * self.gamma ** n * w ** (-n) / n
                deriv = deriv + c * self.gamma ** n * w ** (-n - 1)
            else:
                raise DomainError("exterior 𝓛[φ₀] is multivalued; only 𝓒[φ₀] is evaluated")
        return value, deriv

    def exterior_C(self, density: Density, w) -> np.ndarray:
        """𝓒[φ] = d𝓛/dz outside Ω; 𝓒[φ₀] = w^-1/Ψ'."""
        w = np.asarray(w, dtype=complex)
        regular = {k: c for k, c in density.items() if k != 0}
        _, deriv = self.exterior_L(regular, w)
        deriv = deriv + density.get(0, 0j) / w
        return deriv / self.map.derivative(w)

    # ── interior layer potentials ──

    def interior_L(self, density: Density, z) -> Tuple[np.ndarray, np.ndarray]:
        """𝓛[φ] and 𝓒[φ] inside Ω from Faber polynomials."""
        z = np.asarray(z, dtype=complex)
        F, dF, _ = faber_values(self.map, self.size, z)
        value = np.zeros_like(z)
        deriv = np.zeros_like(z)
        for k, c in density.items():
            if c == 0:
                continue
            self._check_index(k)
            if k > 0:
                scale = -c * self.gamma ** (-k) / k
                value = value + scale * F[k]
                deriv = deriv + scale * dF[k]
            elif k == 0:
                value = value + c * np.log(self.gamma)
        return value, deriv

    # ── holomorphic pairs ──

    def exterior_pair(self, density: Density, w) -> HolomorphicPair:
        alpha, beta = self.material.alpha, self.material.beta
        L, dL = self.exterior_L(density, w)
        f = beta * L
        df = beta * dL / self.map.derivative(w)
        Lbar, _ = self.exterior_L(conjugate_density(density), w)
        g = -alpha * Lbar - beta * self.exterior_C(zeta_bar_density(density, self.bundle), w)
        return HolomorphicPair(f=f, df=df, g=g)

    def interior_pair(self, density: Density, z) -> HolomorphicPair:
        alpha, beta = self.material.alpha_t, self.material.beta_t
        L, C = self.interior_L(density, z)
        Lbar, _ = self.interior_L(conjugate_density(density), z)
        _, Czeta = self.interior_L(zeta_bar_density(density, self.bundle), z)
        return HolomorphicPair(f=beta * L, df=beta * C, g=-alpha * Lbar - beta * Czeta)

    # ── samples ──

    def eval_exterior(self, w) -> FieldSample:
        w = complex(w)
        if abs(w) <= self.gamma:
            raise DomainError(f"exterior evaluation needs |w| > gamma, got |w|={abs(w):.6g}")
        z = complex(self.map.eval(w))
        h_value = 0j
        h_potential = 0j
        if self.loading is not None and not self.loading.is_zero:
            h_value = complex(eval_H(self.loading, self.bundle, self.material, z))
            h_potential = complex(eval_traction_potential_H(self.loading, self.bundle, self.material, z))
        pair = HolomorphicPair(0j, 0j, 0j)
        if self.solution is not None:
            pair = self.exterior_pair(exterior_density(self.solution), w)
        parts = {
            "H": h_value,
            "kappa_f": 0.5 * self.material.kappa * complex(pair.f),
            "z_conj_df": -0.5 * z * np.conj(complex(pair.df)),
            "conj_g": -0.5 * np.conj(complex(pair.g)),
        }
        return FieldSample(
            w=w,
            z=z,
            u=sum(parts.values()),
            region="exterior",
            parts=parts,
            f=complex(pair.f),
            df=complex(pair.df),
            g=complex(pair.g),
            h_potential=h_potential,
        )

    def eval_interior(self, w=None, z=None) -> FieldSample:
        if self.material.cavity:
            raise ModeError("a cavity has no interior field")
        if z is None:
            if w is None:
                raise ValueError("interior evaluation needs w or z")
            w = complex(w)
            if abs(w) >= self.gamma:
                raise DomainError(f"interior evaluation needs |w| < gamma, got |w|={abs(w):.6g}")
            z = complex(self.map.eval(w))
        z = complex(z)
        density = interior_density(self.solution)
        pair = self.interior_pair(density, z)
        c_phi = self.material.beta_t * density.get(0, 0j)
        parts = {
            "kappa_f": 0.5 * self.material.kappa_t * complex(pair.f),
            "z_conj_df": -0.5 * z * np.conj(complex(pair.df)),
            "conj_g": -0.5 * np.conj(complex(pair.g)),
            "c_phi": -0.5 * c_phi,
        }
        return FieldSample(
            w=w,
            z=z,
            u=sum(parts.values()),
            region="interior",
            parts=parts,
            f=complex(pair.f),
            df=complex(pair.df),
            g=complex(pair.g),
        )


def eval_exterior(solution, loading, bundle, material, w) -> FieldSample:
    return FieldEvaluator(bundle, material, solution, loading).eval_exterior(w)


def eval_interior(solution, bundle, material, w=None, z=None) -> FieldSample:
    return FieldEvaluator(bundle, material, solution).eval_interior(w=w, z=z)


def eval_traction_potential(sample: FieldSample, material: MaterialPair) -> complex:
    """𝓘 = μ(f + z·conj f' + conj g) of the sample's single layer, plus 𝓘ᵉ[H] outside."""
    mu = material.mu_ext if sample.region == "exterior" else material.mu_int
    layer = 0.5 * mu * (sample.f + sample.z * np.conj(sample.df) + np.conj(sample.g))
    return complex(layer + sample.h_potential)


# ── Boundary diagnostics ──────────────────────────────────────


def _richardson(values_eps: np.ndarray, values_half: np.ndarray) -> np.ndarray:
    return 2.0 * values_half - values_eps


def boundary_values(
    evaluator: FieldEvaluator, angles: Sequence[float], epsilon: float, side: str
) -> Tuple[np.ndarray, np.ndarray]:
    """(u, 𝓘) extrapolated to ∂Ω from one side at radii γ(1 ± ε), γ(1 ± ε/2)."""
    sign = 1.0 if side == "exterior" else -1.0
    material = evaluator.material
    results = []
    for eps in (epsilon, 0.5 * epsilon):
        u_vals, i_vals = [], []
        for theta in angles:
            w = evaluator.gamma * (1.0 + sign * eps) * np.exp(1j * theta)
            if side == "exterior":
                sample = evaluator.eval_exterior(w)
            else:
                sample = evaluator.eval_interior(w=w)
            u_vals.append(sample.u)
            i_vals.append(eval_traction_potential(sample, material))
        results.append((np.array(u_vals), np.array(i_vals)))
    (u1, i1), (u2, i2) = results
    return _richardson(u1, u2), _richardson(i1, i2)


def _spread(values: np.ndarray) -> float:
    """max_{i,j} |v_i − v_j|."""
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values[:, None] - values[None, :])))


def transmission_residual(
    solution: DensitySolution,
    loading: LoadingSpec,
    bundle: GeometryBundle,
    material: MaterialPair,
    angles: Sequence[float],
    epsilon: float = DEFAULT_EPSILON,
) -> Tuple[float, float]:
    """
    (r_disp, r_trac) on ∂Ω: the largest displacement jump and the largest
    variation of 𝓘ᵉ[u_e] − 𝓘ⁱ[u_i] between sampled angles.
    """
    if material.cavity:
        raise ModeError("transmission residuals need an interior phase")
    if epsilon * bundle.gamma >= bundle.map.delta:
        raise DomainError(f"epsilon {epsilon} leaves the analytic margin {bundle.map.delta}")
    evaluator = FieldEvaluator(bundle, material, solution, loading)
    u_out, i_out = boundary_values(evaluator, angles, epsilon, "exterior")
    u_in, i_in = boundary_values(evaluator, angles, epsilon, "interior")
    r_disp = float(np.max(np.abs(u_out - u_in))) if len(angles) else 0.0
    r_trac = _spread(i_out - i_in)
    logger.info(f"Transmission residuals: displacement {r_disp:.3e}, traction potential {r_trac:.3e}")
    return r_disp, r_trac


def traction_free_residual(
    solution: DensitySolution,
    loading: LoadingSpec,
    bundle: GeometryBundle,
    material: MaterialPair,
    angles: Sequence[float],
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Variation of 𝓘ᵉ[u_e] along a cavity boundary (zero when traction free)."""
    evaluator = FieldEvaluator(bundle, material, solution, loading)
    _, i_out = boundary_values(evaluator, angles, epsilon, "exterior")
    return _spread(i_out)


def grid_field(
    solution: DensitySolution,
    loading: LoadingSpec,
    bundle: GeometryBundle,
    material: MaterialPair,
    grid: GridSpec,
    band: float = DEFAULT_BAND,
) -> List[FieldSample]:
    """
    Row-major samples over the grid. Points within band·γ of ∂Ω, and points
    where evaluation fails, are flagged rather than aborting the sweep.
    """
    evaluator = FieldEvaluator(bundle, material, solution, loading)
    points = grid.points()
    if points.size == 0:
        return []
    inside = np.atleast_1d(bundle.map.contains(points))
    theta = 2 * np.pi * np.arange(1024) / 1024
    boundary, _ = bundle.map.boundary(theta)
    distance = np.min(np.abs(points[:, None] - boundary[None, :]), axis=1)

    samples = []
    for z, is_inside, dist in zip(points, inside, distance):
        near = dist < band * bundle.gamma
        region = "interior" if is_inside else "exterior"
        if is_inside and material.cavity:
            samples.append(FieldSample(z=complex(z), u=complex(np.nan, np.nan), region=region, flagged=True))
            continue
        try:
            if is_inside:
                sample = evaluator.eval_interior(z=z)
            else:
                sample = evaluator.eval_exterior(bundle.map.invert(z))
        except InclusionError as e:
            logger.warning(f"Flagging grid point {z}: {str(e)}")
            samples.append(FieldSample(z=complex(z), u=complex(np.nan, np.nan), region=region, flagged=True))
            continue
        samples.append(sample.model_copy(update={"flagged": bool(near)}))
    flagged = sum(s.flagged for s in samples)
    logger.info(f"Evaluated {len(samples)} grid points ({flagged} flagged)")
    return samples


# ── Checks on single basis functions ──────────────────────────


def cauchy_combination_c2(bundle: GeometryBundle, k: int, w) -> complex:
    """
    −Ψ(w)·conj 𝓒₂[φ_k] + conj 𝓒₂[ζ̄φ_k] outside Ω, with
    𝓒₂[φ_j] = γ^-j w^{j−1}/Ψ'(w). Tends to 0 as |w| → γ.
    """
    w = complex(w)
    gamma = bundle.gamma
    dpsi = complex(bundle.map.derivative(w))

    def c2(j: int) -> complex:
        return gamma ** (-j) * w ** (j - 1) / dpsi

    shifted = sum(
        np.conj(bundle.map.coefficient(j)) * gamma ** (-j) * c2(j + k)
        for j in range(-1, bundle.map.depth + 1)
    )
    return complex(-bundle.map.eval(w) * np.conj(c2(k)) + np.conj(shifted))


def c1_transform(bundle: GeometryBundle, k: int, z) -> complex:
    """𝓒₁[φ_k](z) = −γ^-k F_k'(z)/k for k ≥ 1, and 0 for k < 0."""
    if k <= 0:
        return 0j
    _, dF, _ = faber_values(bundle.map, k, z)
    return complex(-bundle.gamma ** (-k) * dF[k] / k)


def layer_sum(evaluator: FieldEvaluator, density: Density, w) -> complex:
    """𝓛[φ] + conj 𝓛[φ̄] at Ψ(w), using the exterior or interior form by |w|."""
    w = complex(w)
    if abs(w) > evaluator.gamma:
        L, _ = evaluator.exterior_L(density, w)
        Lbar, _ = evaluator.exterior_L(conjugate_density(density), w)
    else:
        z = complex(evaluator.map.eval(w))
        L, _ = evaluator.interior_L(density, z)
        Lbar, _ = evaluator.interior_L(conjugate_density(density), z)
    return complex(L + np.conj(Lbar))
