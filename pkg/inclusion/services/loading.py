"""
Background field H in the Faber basis and the right-hand-side vectors h^(1..4).

    H(z) = Σ_m κ A_m F_m(z) − z·conj(A_m F_m'(z)) + conj(B_m F_m(z))

On ∂Ω (|w| = γ) H and its traction potential expand as

    H(z)      = Σ_{k≥1} h¹_k w^k + Σ_{k≥0} h²_k w^-k
    𝓘ᵉ[H](z) = Σ_{k≥1} h³_k w^k + Σ_{k≥0} h⁴_k w^-k  (+ constant)
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from inclusion.exceptions import OrderMismatchError
from inclusion.services.geometry import CoeffMatrix, GeometryBundle, faber_values
from inclusion.services.material import MaterialPair

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoadingSpec:
    """Diagonal Faber coefficients A_1..A_M and B_1..B_M; index 0 is implicitly zero."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_1d(np.asarray(self.A, dtype=complex))
        B = np.atleast_1d(np.asarray(self.B, dtype=complex))
        size = max(A.size, B.size)
        object.__setattr__(self, "A", np.pad(A, (0, size - A.size)))
        object.__setattr__(self, "B", np.pad(B, (0, size - B.size)))

    @classmethod
    def single_mode(cls, m: int, *, A: complex = 0.0, B: complex = 0.0) -> "LoadingSpec":
        if m < 1:
            raise OrderMismatchError(f"loading modes start at m = 1, got m = {m}")
        a = np.zeros(m, dtype=complex)
        b = np.zeros(m, dtype=complex)
        a[m - 1] = A
        b[m - 1] = B
        return cls(a, b)

    @property
    def order(self) -> int:
        return int(self.A.size)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.A) or np.any(self.B))

    def padded(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """A and B as length n+1 vectors with a leading zero."""
        if self.order > n:
            raise OrderMismatchError(f"loading has {self.order} modes but truncation order is {n}")
        A = np.zeros(n + 1, dtype=complex)
        B = np.zeros(n + 1, dtype=complex)
        A[1 : self.order + 1] = self.A
        B[1 : self.order + 1] = self.B
        return A, B

    def diagonal(self, n: int) -> Tuple[CoeffMatrix, CoeffMatrix]:
        A, B = self.padded(n)
        return CoeffMatrix("A", np.diag(A)), CoeffMatrix("B", np.diag(B))


@dataclass(frozen=True)
class RhsVector:
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    h4: np.ndarray

    def blocks(self) -> List[np.ndarray]:
        """[h¹, conj h¹, h², conj h², h³, conj h³, h⁴, conj h⁴]."""
        out = []
        for h in (self.h1, self.h2, self.h3, self.h4):
            out.extend([h, h.conj()])
        return out

    def cavity_blocks(self) -> List[np.ndarray]:
        """[h³, conj h³, h⁴, conj h⁴]."""
        return [self.h3, self.h3.conj(), self.h4, self.h4.conj()]

    def norm(self) -> float:
        return float(np.sqrt(sum(np.vdot(h, h).real for h in (self.h1, self.h2, self.h3, self.h4))))


def h_matrices(
    material: MaterialPair, bundle: GeometryBundle, loading: LoadingSpec
) -> Tuple[CoeffMatrix, CoeffMatrix, CoeffMatrix, CoeffMatrix]:
    """ℍ¹..ℍ⁴; rows index the loading mode m, columns the power k."""
    A, B = loading.diagonal(bundle.n)
    dg = bundle.diag
    Ab, Bb = A.conj(), B.conj()
    Cb, Db = bundle.C.conj(), bundle.D.conj()
    g2, gm2 = dg.gamma_power(2), dg.gamma_power(-2)
    kappa, mu = material.kappa, material.mu_ext

    lead = Ab @ dg.N @ dg.gamma_power(1) @ Db
    positive = (g2 @ bundle.psi_zero + Cb @ gm2 @ bundle.psi_minus) @ dg.I0
    negative = g2 @ bundle.psi_minus.T + Cb @ gm2 @ bundle.psi_plus
    AC = A @ bundle.C
    BbCb = Bb @ Cb @ gm2

    H1 = kappa * A - lead @ positive + BbCb
    H2 = kappa * AC - lead @ negative + Bb @ g2
    H3 = mu * (A + lead @ positive - BbCb)
    H4 = mu * (AC + lead @ negative @ dg.I0 - Bb @ g2)
    return H1.relabel("H1"), H2.relabel("H2"), H3.relabel("H3"), H4.relabel("H4")


def h_vectors(H1: CoeffMatrix, H2: CoeffMatrix, H3: CoeffMatrix, H4: CoeffMatrix) -> RhsVector:
    """h^(j)_k = Σ_{m≥1} ℍ^(j)_mk."""
    sums = [H.data[1:].sum(axis=0) for H in (H1, H2, H3, H4)]
    return RhsVector(*sums)


def build_rhs(material: MaterialPair, bundle: GeometryBundle, loading: LoadingSpec) -> RhsVector:
    rhs = h_vectors(*h_matrices(material, bundle, loading))
    logger.info(f"Right-hand side assembled: order {bundle.n}, |h| = {rhs.norm():.6e}")
    return rhs


def _faber_from_matrices(bundle: GeometryBundle, z, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """F_m(z) from the rows of P and F_m'(z) = Σ d̃_mk F_k(z), m = 0..count."""
    z = np.asarray(z, dtype=complex)
    rows = bundle.P.data[: count + 1, : count + 1]
    F = npoly.polyval(z, rows.T)
    dF = np.tensordot(bundle.D_tilde.data[: count + 1, : count + 1], F, axes=(1, 0))
    return F, dF


def eval_H(loading: LoadingSpec, bundle: GeometryBundle, material: MaterialPair, z):
    """Background displacement H(z) = u₁ + i u₂."""
    A, B = loading.padded(bundle.n)
    M = loading.order
    F, dF = _faber_from_matrices(bundle, z, M)
    A, B = A[: M + 1], B[: M + 1]
    f = np.tensordot(A, F, axes=(0, 0))
    df = np.tensordot(A, dF, axes=(0, 0))
    g = -np.tensordot(B, F, axes=(0, 0))
    return material.kappa * f - np.asarray(z) * np.conj(df) - np.conj(g)


def eval_holomorphic_pair(loading: LoadingSpec, bundle: GeometryBundle, z):
    """(f, f', f'', g, g') of H with f = Σ A_m F_m and g = −Σ B_m F_m."""
    M = loading.order
    if M > bundle.n:
        raise OrderMismatchError(f"loading has {M} modes but truncation order is {bundle.n}")
    F, dF, d2F = faber_values(bundle.map, M, z)
    A = np.concatenate([[0j], loading.A])
    B = np.concatenate([[0j], loading.B])

    def combine(coeffs: Sequence[complex], values: np.ndarray):
        return np.tensordot(coeffs, values, axes=(0, 0))

    return combine(A, F), combine(A, dF), combine(A, d2F), -combine(B, F), -combine(B, dF)


def eval_traction_potential_H(loading: LoadingSpec, bundle: GeometryBundle, material: MaterialPair, z):
    """𝓘ᵉ[H] = μ(f + z·conj f' + conj g), defined up to an additive constant."""
    f, df, _, g, _ = eval_holomorphic_pair(loading, bundle, z)
    return material.mu_ext * (f + np.asarray(z) * np.conj(df) + np.conj(g))


def eval_traction_H(loading: LoadingSpec, bundle: GeometryBundle, material: MaterialPair, z, dz):
    """
    Traction of H on a counterclockwise boundary with tangent dz = dz/dθ.

    Returns t₁ + i t₂ = −2iμ dΦ/dσ with Φ = f + z·conj f' + conj g and dσ = |dz| dθ.
    """
    f, df, d2f, g, dg = eval_holomorphic_pair(loading, bundle, z)
    z = np.asarray(z, dtype=complex)
    dz = np.asarray(dz, dtype=complex)
    dphi = df * dz + dz * np.conj(df) + z * np.conj(d2f * dz) + np.conj(dg * dz)
    return -2j * material.mu_ext * dphi / np.abs(dz)
