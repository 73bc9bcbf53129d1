"""
Independent boundary-integral solver for the same inclusion problem.

Single layers with the Kelvin matrix

    Γ(d) = (α/2π) log|d| I − (β/2π) d dᵀ/|d|²

are discretized by a Nyström method on the nodes θ_j = 2πj/q of |w| = γ:
Kress weights for the logarithm, the alternating-point rule for the Cauchy
part of the traction kernel, and Taylor limits on the diagonal. The
exterior trace of the traction satisfies t⁺ = (½I + 𝒦*)ψ, the interior one
t⁻ = (−½I + 𝒦*)φ. Vectors are stored as [x-components, y-components].
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.linalg import circulant, lstsq

from inclusion.exceptions import DomainError, ModeError
from inclusion.services.field import FieldEvaluator, boundary_values
from inclusion.services.geometry import ConformalMap, GeometryBundle
from inclusion.services.loading import LoadingSpec, eval_H, eval_traction_H
from inclusion.services.material import MaterialPair, derive_constants
from inclusion.services.system import CAVITY, TRANSMISSION, DensitySolution

logger = logging.getLogger(__name__)

DEFAULT_FAR_RADIUS = 1.5
DEFAULT_SAMPLES = 64

J = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    q: int
    theta: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    d2z: np.ndarray
    h: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights for ds = h dθ."""
        return self.h * 2 * np.pi / self.q


@dataclass(frozen=True, eq=False)
class NystromSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    mode: str
    single_ext: np.ndarray
    h_boundary: np.ndarray
    mesh: BoundaryMesh


@dataclass(frozen=True, eq=False)
class OracleSolution:
    psi_nodes: np.ndarray
    phi_nodes: Optional[np.ndarray]
    u_boundary: np.ndarray
    condition: float
    mode: str
    residual: float = 0.0


class ComparisonReport(BaseModel):
    """Series solution against the Nyström oracle."""

    q: int
    mode: str
    boundary_max: float
    boundary_l2: float
    far_max: float
    far_l2: float
    reference_scale: float
    relative_boundary: float
    relative_far: float
    oracle_condition: float

    @property
    def worst_relative(self) -> float:
        return max(self.relative_boundary, self.relative_far)


# ── Kernels ───────────────────────────────────────────────────


def _as_vectors(d: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    r2 = np.abs(d) ** 2
    if np.any(r2 == 0):
        raise DomainError("kernel evaluated at coincident points")
    return d.real, d.imag, r2


def kelvin_kernel(x, y, alpha: float, beta: float) -> np.ndarray:
    """Γ(x − y) for complex points x, y; shape (..., 2, 2)."""
    d = np.asarray(x, dtype=complex) - np.asarray(y, dtype=complex)
    d1, d2, r2 = _as_vectors(d)
    log_r = 0.5 * np.log(r2)
    out = np.empty(d.shape + (2, 2))
    out[..., 0, 0] = alpha * log_r - beta * d1 * d1 / r2
    out[..., 0, 1] = -beta * d1 * d2 / r2
    out[..., 1, 0] = out[..., 0, 1]
    out[..., 1, 1] = alpha * log_r - beta * d2 * d2 / r2
    return out / (2 * np.pi)


def traction_kernel(x, y, normal, lam: float, mu: float) -> np.ndarray:
    """Traction at x (unit normal `normal`) of Γ(x − y)e_k, in column k; shape (..., 2, 2)."""
    d = np.asarray(x, dtype=complex) - np.asarray(y, dtype=complex)
    normal = np.asarray(normal, dtype=complex)
    d1, d2, r2 = _as_vectors(d)
    n1, n2 = normal.real, normal.imag
    c1 = mu / (2 * mu + lam)
    c2 = 2 * (lam + mu) / (2 * mu + lam)
    dn = d1 * n1 + d2 * n2
    skew = (d1 * n2 - d2 * n1) / r2
    out = np.empty(d.shape + (2, 2))
    out[..., 0, 0] = c1 * dn / r2 + c2 * dn * d1 * d1 / r2**2
    out[..., 1, 1] = c1 * dn / r2 + c2 * dn * d2 * d2 / r2**2
    out[..., 0, 1] = c1 * skew + c2 * dn * d1 * d2 / r2**2
    out[..., 1, 0] = -c1 * skew + c2 * dn * d1 * d2 / r2**2
    return out / (2 * np.pi)


# ── Mesh and quadrature ───────────────────────────────────────


def build_mesh(conformal_map: ConformalMap, q: int) -> BoundaryMesh:
    if q < 8 or q % 2:
        raise ValueError(f"node count must be even and at least 8, got {q}")
    theta = 2 * np.pi * np.arange(q) / q
    w = conformal_map.gamma * np.exp(1j * theta)
    z = conformal_map.eval(w)
    dpsi = conformal_map.derivative(w)
    dz = 1j * w * dpsi
    d2z = -w * (dpsi + w * conformal_map.second_derivative(w))
    h = np.abs(dz)
    tangent = dz / h
    curvature = np.imag(np.conj(dz) * d2z) / h**3
    return BoundaryMesh(
        q=q,
        theta=theta,
        z=z,
        dz=dz,
        d2z=d2z,
        h=h,
        normal=-1j * tangent,
        tangent=tangent,
        curvature=curvature,
    )


def kress_weights(q: int) -> np.ndarray:
    """R_k with ∫ log(4 sin²((t_i − τ)/2)) f(τ) dτ ≈ Σ_j R_{i−j} f_j."""
    k = np.arange(q)
    m = np.arange(1, q // 2)
    cosines = np.cos(2 * np.pi * np.outer(k, m) / q) / m
    return -(4 * np.pi / q) * cosines.sum(axis=1) - (4 * np.pi / q**2) * (-1.0) ** k


def _blocks(pair: np.ndarray) -> np.ndarray:
    """(q, q, 2, 2) → (2q, 2q) in the component-major layout."""
    q = pair.shape[0]
    return pair.transpose(2, 0, 3, 1).reshape(2 * q, 2 * q)


def _off_diagonal(q: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.nonzero(~np.eye(q, dtype=bool))


def single_layer_matrix(mesh: BoundaryMesh, alpha: float, beta: float) -> np.ndarray:
    """Nyström matrix of ∫Γ(x_i − y)ψ(y) ds_y on the nodes."""
    q = mesh.q
    w = mesh.weights
    rows, cols = _off_diagonal(q)
    delta = mesh.theta[cols] - mesh.theta[rows]
    log_sin = np.log(4 * np.sin(delta / 2) ** 2)

    R = circulant(kress_weights(q))
    pair = np.zeros((q, q, 2, 2))
    pair[rows, cols] = kelvin_kernel(mesh.z[rows], mesh.z[cols], alpha, beta) * w[cols, None, None]
    correction = alpha / (2 * np.pi) * mesh.h[cols] * (0.5 * R[rows, cols] - np.pi / q * log_sin)
    pair[rows, cols, 0, 0] += correction
    pair[rows, cols, 1, 1] += correction

    idx = np.arange(q)
    t1, t2 = mesh.tangent.real, mesh.tangent.imag
    log_part = alpha / (2 * np.pi) * mesh.h * (0.5 * R[idx, idx] + 2 * np.pi / q * np.log(mesh.h))
    tangential = beta / (2 * np.pi) * w
    pair[idx, idx, 0, 0] = log_part - tangential * t1 * t1
    pair[idx, idx, 0, 1] = -tangential * t1 * t2
    pair[idx, idx, 1, 0] = -tangential * t1 * t2
    pair[idx, idx, 1, 1] = log_part - tangential * t2 * t2
    return _blocks(pair)


def traction_matrix(mesh: BoundaryMesh, lam: float, mu: float) -> np.ndarray:
    """Nyström matrix of the principal-value operator 𝒦*."""
    q = mesh.q
    w = mesh.weights
    c1 = mu / (2 * mu + lam)
    c2 = 2 * (lam + mu) / (2 * mu + lam)
    rows, cols = _off_diagonal(q)
    delta = mesh.theta[cols] - mesh.theta[rows]
    cot = 1.0 / np.tan(delta / 2)
    odd = (cols - rows) % 2 == 1
    alternating = np.where(odd, 2 * np.pi / q * cot, 0.0)

    pair = np.zeros((q, q, 2, 2))
    pair[rows, cols] = traction_kernel(
        mesh.z[rows], mesh.z[cols], mesh.normal[rows], lam, mu
    ) * w[cols, None, None]
    cauchy = c1 / (2 * np.pi) * (alternating - np.pi / q * cot)
    pair[rows, cols] += cauchy[:, None, None] * J

    idx = np.arange(q)
    t1, t2 = mesh.tangent.real, mesh.tangent.imag
    half_curv = 0.5 * mesh.curvature * w / (2 * np.pi)
    remainder = np.real(np.conj(mesh.dz) * mesh.d2z) / (2 * mesh.h**2) / q * c1
    pair[idx, idx, 0, 0] = half_curv * (c1 + c2 * t1 * t1)
    pair[idx, idx, 1, 1] = half_curv * (c1 + c2 * t2 * t2)
    pair[idx, idx, 0, 1] = half_curv * c2 * t1 * t2 + remainder
    pair[idx, idx, 1, 0] = half_curv * c2 * t1 * t2 - remainder
    return _blocks(pair)


def rigid_rows(mesh: BoundaryMesh) -> np.ndarray:
    """Net force and moment of a density: rows (1,0), (0,1), (−y, x) against ds."""
    w = mesh.weights
    zeros = np.zeros(mesh.q)
    return np.array(
        [
            np.concatenate([w, zeros]),
            np.concatenate([zeros, w]),
            np.concatenate([-w * mesh.z.imag, w * mesh.z.real]),
        ]
    )


def _split(values: np.ndarray) -> np.ndarray:
    return np.concatenate([values.real, values.imag])


def _join(vector: np.ndarray) -> np.ndarray:
    q = vector.size // 2
    return vector[:q] + 1j * vector[q:]


# ── Assembly and solve ────────────────────────────────────────


def assemble_nystrom(
    mesh: BoundaryMesh, material: MaterialPair, loading: LoadingSpec, bundle: GeometryBundle
) -> NystromSystem:
    q = mesh.q
    lam, mu = material.lame("exterior")
    alpha, beta, _ = derive_constants(lam, mu)
    S = single_layer_matrix(mesh, alpha, beta)
    K = traction_matrix(mesh, lam, mu)
    identity = np.eye(2 * q)
    H = np.asarray(eval_H(loading, bundle, material, mesh.z), dtype=complex)
    t_H = np.asarray(eval_traction_H(loading, bundle, material, mesh.z, mesh.dz), dtype=complex)
    rigid = rigid_rows(mesh)

    if material.cavity:
        matrix = np.vstack([0.5 * identity + K, rigid])
        rhs = np.concatenate([-_split(t_H), np.zeros(3)])
        mode = CAVITY
    else:
        lam_t, mu_t = material.lame("interior")
        alpha_t, beta_t, _ = derive_constants(lam_t, mu_t)
        S_t = single_layer_matrix(mesh, alpha_t, beta_t)
        K_t = traction_matrix(mesh, lam_t, mu_t)
        zeros = np.zeros((3, 2 * q))
        matrix = np.vstack(
            [
                np.hstack([S_t, -S]),
                np.hstack([-0.5 * identity + K_t, -(0.5 * identity + K)]),
                np.hstack([zeros, rigid]),
            ]
        )
        rhs = np.concatenate([_split(H), _split(t_H), np.zeros(3)])
        mode = TRANSMISSION
    logger.info(f"Assembled Nyström {mode} system: {matrix.shape[0]}x{matrix.shape[1]} on {q} nodes")
    return NystromSystem(matrix=matrix, rhs=rhs, mode=mode, single_ext=S, h_boundary=H, mesh=mesh)


def solve_nystrom(system: NystromSystem) -> OracleSolution:
    solution, _, rank, sv = lstsq(system.matrix, system.rhs, lapack_driver="gelsd")
    residual = float(np.linalg.norm(system.matrix @ solution - system.rhs))
    condition = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    q2 = 2 * system.mesh.q
    if system.mode == CAVITY:
        psi, phi = solution, None
    else:
        phi, psi = solution[:q2], solution[q2:]
    u_boundary = system.h_boundary + _join(system.single_ext @ psi)
    logger.info(f"Nyström solve: residual {residual:.3e}, rank {rank}, cond {condition:.3e}")
    return OracleSolution(
        psi_nodes=_join(psi),
        phi_nodes=None if phi is None else _join(phi),
        u_boundary=u_boundary,
        condition=condition,
        mode=system.mode,
        residual=residual,
    )


def oracle_field(
    solution: OracleSolution,
    mesh: BoundaryMesh,
    material: MaterialPair,
    loading: LoadingSpec,
    bundle: GeometryBundle,
    z,
) -> np.ndarray:
    """Displacement at points off ∂Ω by the trapezoid rule."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    inside = np.atleast_1d(bundle.map.contains(z))
    out = np.zeros(z.shape, dtype=complex)
    weights = mesh.weights
    for idx, (point, is_inside) in enumerate(zip(z, inside)):
        if is_inside:
            if solution.phi_nodes is None:
                raise ModeError("a cavity has no interior field")
            alpha, beta, _ = derive_constants(*material.lame("interior"))
            density = solution.phi_nodes
            background = 0j
        else:
            alpha, beta, _ = derive_constants(*material.lame("exterior"))
            density = solution.psi_nodes
            background = complex(eval_H(loading, bundle, material, point))
        G = kelvin_kernel(point, mesh.z, alpha, beta)
        vec = np.stack([density.real, density.imag], axis=-1) * weights[:, None]
        u = np.einsum("jab,jb->a", G, vec)
        out[idx] = background + u[0] + 1j * u[1]
    return out


def solve_oracle(
    conformal_map: ConformalMap, material: MaterialPair, loading: LoadingSpec, bundle: GeometryBundle, q: int
) -> Tuple[BoundaryMesh, OracleSolution]:
    mesh = build_mesh(conformal_map, q)
    return mesh, solve_nystrom(assemble_nystrom(mesh, material, loading, bundle))


def far_circle(bundle: GeometryBundle, samples: int, radius: float = DEFAULT_FAR_RADIUS) -> Tuple[np.ndarray, np.ndarray]:
    """Preimages and points on |w| = radius·γ."""
    theta = 2 * np.pi * (np.arange(samples) + 0.5) / samples
    w = radius * bundle.gamma * np.exp(1j * theta)
    return w, bundle.map.eval(w)


def _discrepancy(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    diff = np.abs(a - b)
    return float(diff.max()), float(np.sqrt(np.mean(diff**2)))


def compare(
    oracle: OracleSolution,
    series: DensitySolution,
    mesh: BoundaryMesh,
    bundle: GeometryBundle,
    material: MaterialPair,
    loading: LoadingSpec,
    samples: int = DEFAULT_SAMPLES,
    epsilon: float = 1e-3,
) -> ComparisonReport:
    """Max and L² differences of u on ∂Ω (at the mesh nodes) and on |w| = 1.5γ."""
    evaluator = FieldEvaluator(bundle, material, series, loading)
    u_series, _ = boundary_values(evaluator, mesh.theta, epsilon, "exterior")
    b_max, b_l2 = _discrepancy(u_series, oracle.u_boundary)

    w_far, z_far = far_circle(bundle, samples)
    series_far = np.array([evaluator.eval_exterior(w).u for w in w_far])
    oracle_far = oracle_field(oracle, mesh, material, loading, bundle, z_far)
    f_max, f_l2 = _discrepancy(series_far, oracle_far)

    scale = float(max(np.max(np.abs(oracle.u_boundary)), np.max(np.abs(oracle_far)), 1e-300))
    report = ComparisonReport(
        q=mesh.q,
        mode=oracle.mode,
        boundary_max=b_max,
        boundary_l2=b_l2,
        far_max=f_max,
        far_l2=f_l2,
        reference_scale=scale,
        relative_boundary=b_max / scale,
        relative_far=f_max / scale,
        oracle_condition=oracle.condition,
    )
    logger.info(
        f"Oracle comparison (q={mesh.q}): boundary max {b_max:.3e}, far max {f_max:.3e}, "
        f"relative {report.worst_relative:.3e}"
    )
    return report


def self_convergence(
    conformal_map: ConformalMap,
    material: MaterialPair,
    loading: LoadingSpec,
    bundle: GeometryBundle,
    q: int,
    samples: int = DEFAULT_SAMPLES,
) -> float:
    """Largest change of the oracle field on |w| = 1.5γ between q and 2q nodes."""
    _, z_far = far_circle(bundle, samples)
    fields = []
    for nodes in (q, 2 * q):
        mesh, solution = solve_oracle(conformal_map, material, loading, bundle, nodes)
        fields.append(oracle_field(solution, mesh, material, loading, bundle, z_far))
    change = float(np.max(np.abs(fields[1] - fields[0])))
    logger.info(f"Oracle self-convergence q={q}->{2 * q}: {change:.3e}")
    return change
