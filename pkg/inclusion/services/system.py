"""
Block system xE = −2h for the density coefficients.

x = [x^e₊, conj x^e₊, x^e₋, conj x^e₋, x^i₊, conj x^i₊, x^i₋, conj x^i₋]
h = [h¹, conj h¹, h², conj h², h³, conj h³, h⁴, conj h⁴]

Row blocks of E follow x, column blocks follow h. The upper four row blocks
come from the exterior limits S^(i,j), the lower four from −S̃^(i,j). For a
cavity only the traction columns of the exterior rows survive (E₀).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import lstsq

from inclusion.exceptions import ConvergenceError, ModeError, OrderMismatchError
from inclusion.services.geometry import CoeffMatrix, GeometryBundle
from inclusion.services.laurent import LaurentSeries, multiply
from inclusion.services.loading import LoadingSpec, RhsVector, build_rhs
from inclusion.services.material import MaterialPair

logger = logging.getLogger(__name__)

TRANSMISSION = "transmission"
CAVITY = "cavity"

DEFAULT_TOLERANCE = 1e-8
DEFAULT_RCOND = 1e-13

BlockMap = Dict[Tuple[int, int], CoeffMatrix]


# ── M-blocks ──────────────────────────────────────────────────


def m_blocks(bundle: GeometryBundle) -> Tuple[CoeffMatrix, CoeffMatrix, CoeffMatrix, CoeffMatrix]:
    """
    (M21, M41, M22, M42): boundary expansion of −Ψ(w)·conj 𝓒[ψ] + conj 𝓒[ζ̄ψ].

    Row n of M21/M22 multiplies conj(x^e_n), row n of M41/M42 conj(x^e_-n);
    M21, M41 give powers w^k (k ≥ 1) and M22, M42 powers w^-k (k ≥ 0).
    """
    dg = bundle.diag
    Db, Cb = bundle.D.conj(), bundle.C.conj()
    g1, gm1 = dg.gamma_power(1), dg.gamma_power(-1)
    g2, gm2 = dg.gamma_power(2), dg.gamma_power(-2)
    psi_p, psi_m, psi_0 = bundle.psi_plus, bundle.psi_minus, bundle.psi_zero

    DbCb = Db @ Cb @ gm2
    lift = g1 @ psi_m.T @ gm1
    drop = -(gm1 @ psi_p @ gm1)

    M21 = Db @ g2 @ psi_0 + DbCb @ psi_m - lift @ DbCb
    M22 = Db @ g2 @ psi_m.T + DbCb @ psi_p - lift @ Db @ g2
    M41 = drop @ DbCb
    M42 = drop @ Db @ g2
    return M21.relabel("M21"), M41.relabel("M41"), M22.relabel("M22"), M42.relabel("M42")


# ── S-blocks ──────────────────────────────────────────────────


def exterior_blocks(material: MaterialPair, bundle: GeometryBundle) -> BlockMap:
    """S^(i,j): exterior limits of 2S[ψ] (j = 1, 2) and 𝓘ᵉ[2S[ψ]] (j = 3, 4)."""
    alpha, beta, mu = material.alpha, material.beta, material.mu_ext
    dg = bundle.diag
    M21, M41, M22, M42 = m_blocks(bundle)
    I0, N0i = dg.I0, dg.N0_inv
    gm1, g1, gm2 = dg.gamma_power(-1), dg.gamma_power(1), dg.gamma_power(-2)
    C, Cb = bundle.C, bundle.C.conj()

    plus_diag = N0i @ gm1
    plus_c = N0i @ gm1 @ C
    minus_c = N0i @ gm1 @ Cb @ gm2
    minus_diag = N0i @ g1

    blocks = {
        (1, 1): -alpha * plus_diag,
        (2, 1): beta * (I0 @ M21 @ I0),
        (3, 1): -alpha * minus_c,
        (4, 1): beta * (I0 @ M41 @ I0),
        (1, 2): -alpha * plus_c,
        (2, 2): beta * (I0 @ M22),
        (3, 2): -alpha * minus_diag,
        (4, 2): beta * (I0 @ M42),
        (1, 3): mu * alpha * plus_diag,
        (2, 3): -mu * beta * (I0 @ M21 @ I0),
        (3, 3): mu * alpha * minus_c,
        (4, 3): -mu * beta * (I0 @ M41 @ I0),
        (1, 4): -mu * beta * plus_c,
        (2, 4): -mu * beta * (I0 @ M22 @ I0),
        (3, 4): -mu * beta * minus_diag,
        (4, 4): -mu * beta * (I0 @ M42 @ I0),
    }
    return {key: value.relabel(f"S{key[0]}{key[1]}") for key, value in blocks.items()}


def interior_constant(material: MaterialPair, gamma: float) -> float:
    """c = 2α̃ ln γ − β̃, the constant displacement produced by φ₀."""
    return 2.0 * material.alpha_t * np.log(gamma) - material.beta_t


def interior_blocks(material: MaterialPair, bundle: GeometryBundle) -> BlockMap:
    """S̃^(i,j): interior limits; row 0 of the φ₋ blocks carries x^i₀."""
    if material.cavity:
        raise ModeError("interior blocks are undefined for a cavity")
    alpha, beta, mu = material.alpha_t, material.beta_t, material.mu_int
    dg = bundle.diag
    M21, M41, M22, M42 = m_blocks(bundle)
    I0, N0i = dg.I0, dg.N0_inv
    gm1, g1, gm2 = dg.gamma_power(-1), dg.gamma_power(1), dg.gamma_power(-2)
    C, Cb = bundle.C, bundle.C.conj()

    plus_diag = N0i @ gm1
    plus_c = N0i @ gm1 @ C
    minus_c = N0i @ gm1 @ Cb @ gm2
    minus_diag = N0i @ g1
    c = interior_constant(material, bundle.gamma)

    blocks = {
        (1, 1): -alpha * plus_diag,
        (2, 1): beta * (I0 @ M21 @ I0),
        (3, 1): -alpha * minus_c,
        (4, 1): beta * (M41 @ I0),
        (1, 2): -alpha * plus_c,
        (2, 2): beta * (I0 @ M22),
        (3, 2): -alpha * minus_diag + c * dg.e0,
        (4, 2): beta * M42,
        (1, 3): -mu * beta * plus_diag,
        (2, 3): -mu * beta * (I0 @ M21 @ I0),
        (3, 3): mu * alpha * minus_c,
        (4, 3): -mu * beta * (M41 @ I0),
        (1, 4): -mu * beta * plus_c,
        (2, 4): -mu * beta * (I0 @ M22 @ I0),
        (3, 4): mu * alpha * minus_diag,
        (4, 4): -mu * beta * (M42 @ I0),
    }
    return {key: value.relabel(f"St{key[0]}{key[1]}") for key, value in blocks.items()}


# ── Assembly ──────────────────────────────────────────────────


def _block_rows(blocks: BlockMap, columns, sign: float = 1.0) -> List[List[CoeffMatrix]]:
    """Four row blocks for one side; conjugate pairing is built in."""
    rows = []
    for first, second in ((1, 2), (3, 4)):
        plain, paired = [], []
        for j in columns:
            plain.extend([sign * blocks[(first, j)], sign * blocks[(second, j)].conj()])
            paired.extend([sign * blocks[(second, j)], sign * blocks[(first, j)].conj()])
        rows.extend([plain, paired])
    return rows


@dataclass(frozen=True)
class BlockSystem:
    E: List[List[CoeffMatrix]]
    h: RhsVector
    order: int
    mode: str
    material: MaterialPair = field(repr=False)
    bundle: GeometryBundle = field(repr=False)

    @property
    def blocks(self) -> int:
        return len(self.E)

    def dense(self) -> np.ndarray:
        return np.block([[b.data for b in row] for row in self.E])

    def rhs_row(self) -> np.ndarray:
        parts = self.h.blocks() if self.mode == TRANSMISSION else self.h.cavity_blocks()
        return np.concatenate(parts)

    def kept_equations(self) -> np.ndarray:
        """
        Column indices of the independent equations.

        Only the unconjugated column blocks are used. Power w^0 is kept for the
        displacement w^-k block (it carries x^i₀) and dropped for the traction
        block, where it is an arbitrary constant.
        """
        n = self.order
        if self.mode == TRANSMISSION:
            starts = {0: 1, 2: 0, 4: 1, 6: 1}
        else:
            starts = {0: 1, 2: 1}
        kept = [block * (n + 1) + k for block, start in starts.items() for k in range(start, n + 1)]
        return np.array(kept, dtype=int)

    def unknown_layout(self) -> List[Tuple[int, int]]:
        """(row block, first index) of each independent unknown block."""
        if self.mode == TRANSMISSION:
            return [(0, 1), (2, 1), (4, 1), (6, 0)]
        return [(0, 1), (2, 1)]

    def realification(self) -> np.ndarray:
        """Complex matrix T with x = T y for the real unknown vector y = [Re u, Im u]."""
        n = self.order
        length = self.blocks * (n + 1)
        count = sum(n + 1 - start for _, start in self.unknown_layout())
        plain = np.zeros((length, count))
        paired = np.zeros((length, count))
        col = 0
        for row_block, start in self.unknown_layout():
            for k in range(start, n + 1):
                plain[row_block * (n + 1) + k, col] = 1.0
                paired[(row_block + 1) * (n + 1) + k, col] = 1.0
                col += 1
        return np.hstack([plain + paired, 1j * (plain - paired)])


def assemble_E(
    material: MaterialPair,
    bundle: GeometryBundle,
    loading: LoadingSpec,
    mode: Optional[str] = None,
) -> BlockSystem:
    """E (transmission) or E₀ (cavity) together with the right-hand side."""
    expected = CAVITY if material.cavity else TRANSMISSION
    if mode is None:
        mode = expected
    if mode != expected:
        raise ModeError(f"requested {mode} system for a {expected} material pair")
    if loading.order > bundle.n:
        raise OrderMismatchError(f"loading has {loading.order} modes but truncation order is {bundle.n}")

    rhs = build_rhs(material, bundle, loading)
    ext = exterior_blocks(material, bundle)
    if mode == CAVITY:
        E = _block_rows(ext, columns=(3, 4))
    else:
        E = _block_rows(ext, columns=(1, 2, 3, 4)) + _block_rows(
            interior_blocks(material, bundle), columns=(1, 2, 3, 4), sign=-1.0
        )
    logger.info(f"Assembled {mode} system: {len(E)}x{len(E)} blocks of order {bundle.n}")
    return BlockSystem(E=E, h=rhs, order=bundle.n, mode=mode, material=material, bundle=bundle)


def mode_matrix(system: BlockSystem, m: int) -> np.ndarray:
    """[Eᵀ]_ij restricted to index m in both row and column (the per-mode block)."""
    size = system.blocks
    out = np.zeros((size, size), dtype=complex)
    for i in range(size):
        for j in range(size):
            out[i, j] = system.E[j][i].data[m, m]
    return out


def mode_rhs(system: BlockSystem, m: int) -> np.ndarray:
    """−2h restricted to index m, in the same order as mode_matrix rows."""
    parts = system.h.blocks() if system.mode == TRANSMISSION else system.h.cavity_blocks()
    return -2.0 * np.array([p[m] for p in parts])


# ── Solve ─────────────────────────────────────────────────────


@dataclass(frozen=True)
class DensitySolution:
    """Coefficients of ψ = Σ x^e_n φ_n and φ = Σ x^i_n φ_n; xi_minus[0] is x^i₀."""

    xe_plus: np.ndarray
    xe_minus: np.ndarray
    xi_plus: np.ndarray
    xi_minus: np.ndarray
    residual: float
    relative_residual: float
    rank: int
    n_unknowns: int
    singular_gap: float
    condition: float
    rotation_moment: float
    converged: bool
    mode: str = TRANSMISSION

    @property
    def order(self) -> int:
        return self.xe_plus.size - 1

    def row(self) -> np.ndarray:
        """The block row x in the layout of E (4 blocks for a cavity)."""
        parts = [self.xe_plus, self.xe_plus.conj(), self.xe_minus, self.xe_minus.conj()]
        if self.mode == TRANSMISSION:
            parts += [self.xi_plus, self.xi_plus.conj(), self.xi_minus, self.xi_minus.conj()]
        return np.concatenate(parts)


def block_residual(system: BlockSystem, x: np.ndarray) -> np.ndarray:
    """xE + 2h over every column of the block system."""
    return x @ system.dense() + 2.0 * system.rhs_row()


def rotation_moment(bundle: GeometryBundle, xe_plus: np.ndarray, xe_minus: np.ndarray) -> float:
    """Projection of ψ onto the infinitesimal rotation, −2π Im(γx^e_1 + Σ conj(a_k)γ^-k x^e_-k)."""
    gamma = bundle.gamma
    total = gamma * xe_plus[1] if xe_plus.size > 1 else 0j
    for k in range(1, xe_minus.size):
        total += np.conj(bundle.map.coefficient(k)) * gamma ** (-k) * xe_minus[k]
    return float(-2.0 * np.pi * np.imag(total))


def solve(
    system: BlockSystem,
    tolerance: float = DEFAULT_TOLERANCE,
    *,
    strict: bool = False,
    rcond: float = DEFAULT_RCOND,
) -> DensitySolution:
    """
    Minimum-norm least-squares solution of the realified truncated system.

    Conjugate unknown blocks are eliminated before solving, so the returned
    coefficients satisfy the pairing exactly. Columns are equilibrated before
    the SVD-based solve.
    """
    n = system.order
    E = system.dense()
    kept = system.kept_equations()
    T = system.realification()
    G = T.T @ E[:, kept]
    target = -2.0 * system.rhs_row()[kept]

    A = np.vstack([G.T.real, G.T.imag])
    b = np.concatenate([target.real, target.imag])
    scales = np.linalg.norm(A, axis=0)
    scales[scales == 0] = 1.0
    y_scaled, _, rank, sv = lstsq(A / scales, b, cond=rcond, lapack_driver="gelsd")
    y = y_scaled / scales

    x = T @ y
    full = block_residual(system, x)
    residual = float(np.linalg.norm(full[kept]))
    h_norm = float(np.linalg.norm(target))
    relative = residual / h_norm if h_norm > 0 else residual

    n_unknowns = A.shape[1]
    if rank < n_unknowns:
        gap = float(sv[rank - 1] / sv[rank]) if rank > 0 and sv[rank] > 0 else float("inf")
        logger.warning(f"Rank-deficient system: rank {rank} of {n_unknowns}, singular gap {gap:.3e}")
    else:
        gap = float("inf")
    condition = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf")

    size = n + 1
    blocks = [x[i * size : (i + 1) * size] for i in range(system.blocks)]
    xe_plus, xe_minus = blocks[0].copy(), blocks[2].copy()
    if system.mode == TRANSMISSION:
        xi_plus, xi_minus = blocks[4].copy(), blocks[6].copy()
    else:
        xi_plus = np.zeros(size, dtype=complex)
        xi_minus = np.zeros(size, dtype=complex)

    converged = relative <= tolerance
    moment = rotation_moment(system.bundle, xe_plus, xe_minus)
    logger.info(
        f"Solved {system.mode} system: residual {residual:.3e} (relative {relative:.3e}), "
        f"rank {rank}/{n_unknowns}, cond {condition:.3e}, rotation moment {moment:.3e}"
    )
    if not converged:
        message = f"relative residual {relative:.3e} exceeds tolerance {tolerance:.1e}"
        if strict:
            raise ConvergenceError(message)
        logger.warning(f"Solution not converged: {message}")

    return DensitySolution(
        xe_plus=xe_plus,
        xe_minus=xe_minus,
        xi_plus=xi_plus,
        xi_minus=xi_minus,
        residual=residual,
        relative_residual=relative,
        rank=int(rank),
        n_unknowns=int(n_unknowns),
        singular_gap=gap,
        condition=condition,
        rotation_moment=moment,
        converged=converged,
        mode=system.mode,
    )


# ── Series cross-checks ───────────────────────────────────────


def conj_faber_on_boundary(bundle: GeometryBundle, j: int) -> LaurentSeries:
    """conj(F_j(z)) on |w| = γ: γ^{2j} w^-j + Σ_l conj(c_jl) γ^{-2l} w^l."""
    gamma = bundle.gamma
    series = bundle.composition[j]
    lo = -j
    hi = max(-series.lo, 0)
    data = np.zeros(hi - lo + 1, dtype=complex)
    data[0] += gamma ** (2 * j)
    for k in range(series.lo, 0):
        data[-k - lo] += np.conj(series.coefficient(k)) * gamma ** (2 * k)
    return LaurentSeries(lo, data)


def conj_faber_derivative_on_boundary(bundle: GeometryBundle, m: int) -> LaurentSeries:
    """conj(F_m'(z)) = Σ_j conj(d̃_mj) conj(F_j(z)) on |w| = γ."""
    total = LaurentSeries.zero()
    for j in range(m):
        coeff = np.conj(bundle.D_tilde.data[m, j])
        if coeff != 0:
            total = total + coeff * conj_faber_on_boundary(bundle, j)
    return total


def cancellation_series(bundle: GeometryBundle, index: int) -> LaurentSeries:
    """
    Boundary Laurent series of −Ψ(w)·conj 𝓒₁[φ] + conj 𝓒₁[ζ̄φ] for φ = φ_index,
    built term by term from Faber polynomials (coefficient conj(x) = 1).

    index > 0 gives the φ_n expansion, index ≤ 0 the φ_-n one (φ₀ included).
    """
    gamma = bundle.gamma
    cmap = bundle.map
    psi = cmap.laurent()
    total = LaurentSeries.zero()
    if index > 0:
        n = index
        base = conj_faber_derivative_on_boundary(bundle, n)
        total = total + multiply(psi, base) * (1.0 / (n * gamma ** n))
        for k in range(-1, cmap.depth + 1):
            if n + k <= 0:
                continue
            ak = cmap.coefficient(k)
            if ak == 0:
                continue
            term = conj_faber_derivative_on_boundary(bundle, n + k)
            total = total - term * (ak / ((n + k) * gamma ** (n + 2 * k)))
    else:
        n = -index
        for k in range(n + 1, cmap.depth + 1):
            ak = cmap.coefficient(k)
            if ak == 0:
                continue
            term = conj_faber_derivative_on_boundary(bundle, k - n)
            total = total - term * (ak / ((k - n) * gamma ** (2 * k - n)))
    return total


def boundary_expansion_terms(bundle: GeometryBundle, n: int) -> Dict[int, LaurentSeries]:
    """cancellation_series for every index in −n..n."""
    if n + bundle.map.depth > bundle.n:
        raise OrderMismatchError(
            f"expansions up to index {n} need order {n + bundle.map.depth}, bundle has {bundle.n}"
        )
    return {index: cancellation_series(bundle, index) for index in range(-n, n + 1)}


def expand_solution(solution: DensitySolution) -> np.ndarray:
    """Block row x of a solution, conjugate blocks included."""
    return solution.row()
