"""
Explicit solutions for the disk and the Joukowski ellipse Ψ(w) = w + a₀ + a₁/w
under a single-mode loading H = conj(B_m F_m).

Both maps decouple the system mode by mode, so these values are what the
truncated solver must reproduce at any order n ≥ m.
"""
import logging
from typing import Tuple

import numpy as np

from inclusion.services.material import MaterialPair

logger = logging.getLogger(__name__)


def disk_cavity_coefficient(material: MaterialPair, gamma: float, B_m: complex, m: int) -> complex:
    """x^e_-m = −2 conj(B_m) m γ^m / β; every other coefficient vanishes."""
    return -2.0 * np.conj(B_m) * m * gamma**m / material.beta


def disk_transmission_coefficients(
    material: MaterialPair, gamma: float, B_m: complex, m: int
) -> Tuple[complex, complex]:
    """(x^e_-m, x^i_-m) for a disk inclusion; x^i₀ and all positive indices vanish."""
    mu, mu_t = material.mu_ext, material.mu_int
    alpha, beta = material.alpha, material.beta
    alpha_t = material.alpha_t
    denominator = mu * beta + mu_t * alpha
    base = -2.0 * m * np.conj(B_m) * gamma**m
    exterior = base * (mu - mu_t) / denominator
    interior = base * mu * (alpha + beta) / (alpha_t * denominator)
    return exterior, interior


def ellipse_cavity_mode_matrix(material: MaterialPair, gamma: float, a1: complex, m: int) -> np.ndarray:
    """
    4×4 block acting on (x^e_m, conj x^e_m, x^e_-m, conj x^e_-m).

    Equals the solver's per-mode block of E₀ᵀ divided by −μ. With a1 = 0 it
    is the disk block (the (1,2) entries survive only at m = 1).
    """
    alpha, beta = material.alpha, material.beta
    a_prev = a1 ** (m - 1)
    a_m = a1**m
    gap = gamma**4 - abs(a1) ** 2
    return np.array(
        [
            [-alpha / (m * gamma**m), beta * np.conj(a_prev) * gamma ** (-3 * m - 2) * gap, -alpha * np.conj(a_m) / (m * gamma ** (3 * m)), 0],
            [beta * a_prev * gamma ** (-3 * m - 2) * gap, -alpha / (m * gamma**m), 0, -alpha * a_m / (m * gamma ** (3 * m))],
            [beta * a_m / (m * gamma**m), 0, beta * gamma**m / m, 0],
            [0, beta * np.conj(a_m) / (m * gamma**m), 0, beta * gamma**m / m],
        ],
        dtype=complex,
    )


def ellipse_cavity_rhs(gamma: float, a1: complex, B_m: complex, m: int) -> np.ndarray:
    a_m = a1**m
    return -2.0 * np.array(
        [
            np.conj(B_m * a_m) * gamma ** (-2 * m),
            B_m * a_m * gamma ** (-2 * m),
            np.conj(B_m) * gamma ** (2 * m),
            B_m * gamma ** (2 * m),
        ],
        dtype=complex,
    )


def ellipse_cavity_first_mode(
    material: MaterialPair, gamma: float, a1: complex, B_1: complex
) -> Tuple[complex, complex]:
    """(x^e_1, x^e_-1) for an elliptic cavity under B₁; needs B₁a₁ ≠ 0."""
    if B_1 * a1 == 0:
        raise ValueError("the rational first-mode formulas need B1*a1 != 0")
    lam, mu = material.lambda_ext, material.mu_ext
    gap = gamma**4 - abs(a1) ** 2
    Ba = B_1 * a1
    mixed = (lam + mu) * (Ba**2 + abs(Ba) ** 2)
    plus = 2 * gamma**3 * (lam + 2 * mu) * (mixed + 2 * mu * abs(Ba) ** 2) / (Ba * (lam + mu) * gap)
    minus = -2 * gamma * (lam + 2 * mu) * (mixed + 2 * mu * abs(B_1) ** 2 * gamma**4) / (B_1 * (lam + mu) * gap)
    return complex(plus), complex(minus)


def ellipse_cavity_mode_solution(material: MaterialPair, gamma: float, a1: complex, B_m: complex, m: int) -> np.ndarray:
    """Solve the 4×4 mode block directly; returns (x^e_m, conj x^e_m, x^e_-m, conj x^e_-m)."""
    return np.linalg.solve(
        ellipse_cavity_mode_matrix(material, gamma, a1, m), ellipse_cavity_rhs(gamma, a1, B_m, m)
    )
