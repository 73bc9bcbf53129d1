"""
Exterior conformal map and the matrices derived from it.

Ψ(w) = w + a₀ + a₁/w + a₂/w² + …  maps |w| > γ onto the exterior of the
inclusion. Every finite section built here shares one truncation order n and
is indexed 0..n, matching the semi-infinite matrices of the formulation:

    P      Faber polynomial coefficients, F_m(z) = Σ p_mn z^n
    D̃, D   Faber derivative coefficients, F_m' = Σ d̃_mk F_k
    C      Grunsky coefficients, F_m(Ψ(w)) = w^m + Σ c_mk w^-k
    Ψ±, Ψ₀ map coefficient matrices
    𝒩, 𝒩₀, I₀, T, γ^{k𝒩}  diagonal and shift matrices
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import solve_triangular

from inclusion.exceptions import (
    DomainError,
    GeometryError,
    OrderMismatchError,
    SingularPointError,
    WindowTooSmallError,
)
from inclusion.services.laurent import LaurentSeries, multiply, working_window

logger = logging.getLogger(__name__)

SINGULAR_DERIVATIVE = 1e-12
DEFAULT_VALIDATION_SAMPLES = 1024


# ── Conformal map ─────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class ConformalMap:
    """
    Exterior Riemann map with conformal radius `gamma` and coefficients a₀..a_K.

    a₋₁ ≡ 1 and a₋ₙ ≡ 0 (n ≥ 2); a_k beyond K are exactly zero.
    `delta` is the analytic-extension margin below |w| = γ (default 0.1γ).
    """

    gamma: float
    a: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=complex))
    delta: Optional[float] = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise GeometryError(f"conformal radius must be positive, got {self.gamma}")
        coeffs = np.atleast_1d(np.asarray(self.a, dtype=complex))
        if coeffs.size == 0:
            coeffs = np.zeros(1, dtype=complex)
        object.__setattr__(self, "a", coeffs)
        if self.delta is None:
            object.__setattr__(self, "delta", 0.1 * self.gamma)
        elif not 0 <= self.delta < self.gamma:
            raise GeometryError(f"analytic margin must lie in [0, gamma), got {self.delta}")

    @property
    def rho0(self) -> float:
        return float(np.log(self.gamma))

    @property
    def depth(self) -> int:
        """Index K of the last nonzero a_k (0 for a translated disk)."""
        nonzero = np.nonzero(self.a[1:])[0]
        return int(nonzero[-1] + 1) if nonzero.size else 0

    def coefficient(self, k: int) -> complex:
        if k == -1:
            return 1.0 + 0j
        if k < -1 or k >= self.a.size:
            return 0j
        return complex(self.a[k])

    def laurent(self, window=None) -> LaurentSeries:
        """Ψ as a Laurent series, powers -K..1."""
        k = max(self.depth, 0)
        data = np.zeros(k + 2, dtype=complex)
        data[-1] = 1.0
        for j in range(0, k + 1):
            data[k - j] = self.coefficient(j)
        return LaurentSeries(-k, data, window)

    def _check_radius(self, w: np.ndarray) -> None:
        if np.any(np.abs(w) < self.gamma - self.delta - 1e-15):
            bad = w.flat[int(np.argmin(np.abs(w)))]
            raise DomainError(
                f"|w|={abs(bad):.6g} is below the analytic radius {self.gamma - self.delta:.6g}"
            )

    def _terms(self):
        return zip(range(1, self.a.size), self.a[1:])

    def eval(self, w):
        w = np.asarray(w, dtype=complex)
        self._check_radius(w)
        total = w + self.a[0]
        for k, ak in self._terms():
            if ak != 0:
                total = total + ak * w ** (-int(k))
        return total

    def derivative(self, w):
        w = np.asarray(w, dtype=complex)
        self._check_radius(w)
        total = np.ones_like(w)
        for k, ak in self._terms():
            if ak != 0:
                total = total - k * ak * w ** (-int(k) - 1)
        if np.any(np.abs(total) < SINGULAR_DERIVATIVE):
            raise SingularPointError("map derivative vanishes at a sampled point")
        return total

    def second_derivative(self, w):
        w = np.asarray(w, dtype=complex)
        self._check_radius(w)
        total = np.zeros_like(w)
        for k, ak in self._terms():
            if ak != 0:
                total = total + k * (k + 1) * ak * w ** (-int(k) - 2)
        return total

    def boundary(self, theta):
        """Boundary point z = Ψ(γe^{iθ}) and scale factor h = |γe^{iθ}Ψ'(γe^{iθ})|."""
        w = self.gamma * np.exp(1j * np.asarray(theta, dtype=float))
        return self.eval(w), np.abs(w * self.derivative(w))

    def validate(self, samples: int = DEFAULT_VALIDATION_SAMPLES) -> None:
        """Reject maps whose sampled boundary is degenerate or self-intersecting."""
        theta = 2 * np.pi * np.arange(samples) / samples
        try:
            z, h = self.boundary(theta)
        except SingularPointError as e:
            raise GeometryError(f"boundary parametrization is singular: {str(e)}") from e
        if np.min(h) <= 0:
            raise GeometryError("scale factor h vanishes on the boundary")

        start = np.column_stack([z.real, z.imag])
        end = np.roll(start, -1, axis=0)
        for i in range(samples - 2):
            j = np.arange(i + 2, samples if i > 0 else samples - 1)
            if j.size == 0:
                continue
            if np.any(_segments_cross(start[i], end[i], start[j], end[j])):
                raise GeometryError(
                    f"boundary curve self-intersects near theta={theta[i]:.4f}; map is not injective"
                )
        if _signed_area(z) <= 0:
            raise GeometryError("boundary curve is not positively oriented")
        logger.debug(f"Validated map gamma={self.gamma} K={self.depth} on {samples} samples")

    def contains(self, z, samples: int = DEFAULT_VALIDATION_SAMPLES):
        """True where z lies inside the curve (winding number of the sampled boundary)."""
        theta = 2 * np.pi * np.arange(samples) / samples
        boundary, _ = self.boundary(theta)
        z = np.asarray(z, dtype=complex)
        rel = boundary[:, None] - z.reshape(-1)[None, :]
        turns = np.angle(np.roll(rel, -1, axis=0) / rel).sum(axis=0) / (2 * np.pi)
        return (np.abs(turns) > 0.5).reshape(z.shape)

    def invert(self, z: complex, *, tol: float = 1e-13, max_iter: int = 60) -> complex:
        """Solve Ψ(w) = z for an exterior point by damped Newton iteration."""
        w = complex(z - self.a[0])
        floor = 1.05 * self.gamma
        if abs(w) < floor:
            w = floor if w == 0 else w * floor / abs(w)
        for _ in range(max_iter):
            residual = complex(self.eval(w)) - z
            if abs(residual) <= tol * max(1.0, abs(z)):
                break
            step = residual / complex(self.derivative(w))
            candidate = w - step
            while abs(candidate) < self.gamma - self.delta:
                step *= 0.5
                candidate = w - step
            w = candidate
        if abs(complex(self.eval(w)) - z) > 1e-9 * max(1.0, abs(z)) or abs(w) <= self.gamma:
            raise DomainError(f"z={z} has no exterior preimage (Newton ended at |w|={abs(w):.6g})")
        return w


def _orientation(p, q, r):
    return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])


def _segments_cross(p1, p2, q1, q2) -> np.ndarray:
    d1 = _orientation(q1, q2, p1)
    d2 = _orientation(q1, q2, p2)
    d3 = _orientation(p1, p2, q1)
    d4 = _orientation(p1, p2, q2)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def _signed_area(z: np.ndarray) -> float:
    return 0.5 * float(np.sum(z.real * np.roll(z.imag, -1) - np.roll(z.real, -1) * z.imag))


def eval_map(conformal_map: ConformalMap, w):
    return conformal_map.eval(w)


def eval_map_derivative(conformal_map: ConformalMap, w):
    return conformal_map.derivative(w)


def eval_map_second_derivative(conformal_map: ConformalMap, w):
    return conformal_map.second_derivative(w)


def boundary_point(conformal_map: ConformalMap, theta):
    return conformal_map.boundary(theta)


# ── Coefficient matrices ──────────────────────────────────────


@dataclass(frozen=True, eq=False)
class CoeffMatrix:
    """Finite section [x_mn], m, n = 0..order, of a semi-infinite matrix."""

    label: str
    data: np.ndarray

    # numpy scalars defer to __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise OrderMismatchError(f"{self.label}: expected a square section, got shape {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def order(self) -> int:
        return self.data.shape[0] - 1

    def _check(self, other: "CoeffMatrix") -> None:
        if other.order != self.order:
            raise OrderMismatchError(
                f"cannot combine {self.label} (order {self.order}) with {other.label} (order {other.order})"
            )

    def __matmul__(self, other: "CoeffMatrix") -> "CoeffMatrix":
        self._check(other)
        return CoeffMatrix(f"{self.label}{other.label}", self.data @ other.data)

    def __add__(self, other: "CoeffMatrix") -> "CoeffMatrix":
        self._check(other)
        return CoeffMatrix(f"({self.label}+{other.label})", self.data + other.data)

    def __sub__(self, other: "CoeffMatrix") -> "CoeffMatrix":
        self._check(other)
        return CoeffMatrix(f"({self.label}-{other.label})", self.data - other.data)

    def __neg__(self) -> "CoeffMatrix":
        return CoeffMatrix(f"-{self.label}", -self.data)

    def __mul__(self, factor: complex) -> "CoeffMatrix":
        return CoeffMatrix(f"c*{self.label}", self.data * factor)

    __rmul__ = __mul__

    def conj(self) -> "CoeffMatrix":
        return CoeffMatrix(f"conj({self.label})", self.data.conj())

    @property
    def T(self) -> "CoeffMatrix":
        return CoeffMatrix(f"{self.label}^T", self.data.T)

    def relabel(self, label: str) -> "CoeffMatrix":
        return CoeffMatrix(label, self.data)


@dataclass(frozen=True)
class Diagonals:
    """𝒩, 𝒩⁻¹, 𝒩₀, 𝒩₀⁻¹, I₀, T and the γ-power diagonals at one order."""

    n: int
    gamma: float

    def _diag(self, label: str, values) -> CoeffMatrix:
        return CoeffMatrix(label, np.diag(np.asarray(values, dtype=complex)))

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.n + 1, dtype=float)

    @property
    def N(self) -> CoeffMatrix:
        values = self.index.copy()
        values[0] = 1.0
        return self._diag("N", values)

    @property
    def N_inv(self) -> CoeffMatrix:
        return self._diag("N^-1", 1.0 / np.diag(self.N.data).real)

    @property
    def N0(self) -> CoeffMatrix:
        return self._diag("N0", self.index)

    @property
    def N0_inv(self) -> CoeffMatrix:
        values = np.zeros(self.n + 1)
        values[1:] = 1.0 / self.index[1:]
        return self._diag("N0^-1", values)

    @property
    def I0(self) -> CoeffMatrix:
        values = np.ones(self.n + 1)
        values[0] = 0.0
        return self._diag("I0", values)

    @property
    def T(self) -> CoeffMatrix:
        data = np.zeros((self.n + 1, self.n + 1), dtype=complex)
        m = np.arange(1, self.n + 1)
        data[m, m - 1] = m
        return CoeffMatrix("T", data)

    def gamma_power(self, k: float) -> CoeffMatrix:
        """γ^{k𝒩} = diag(1, γ^k, γ^{2k}, …)."""
        return self._diag(f"g^{k:g}N", self.gamma ** (k * self.index))

    def gamma_power0(self, k: float) -> CoeffMatrix:
        """γ^{k𝒩}₀: as gamma_power with the (0, 0) entry zeroed."""
        values = self.gamma ** (k * self.index)
        values[0] = 0.0
        return self._diag(f"g^{k:g}N0", values)

    @property
    def e0(self) -> CoeffMatrix:
        data = np.zeros((self.n + 1, self.n + 1), dtype=complex)
        data[0, 0] = 1.0
        return CoeffMatrix("e0e0", data)

    @property
    def identity(self) -> CoeffMatrix:
        return CoeffMatrix("I", np.eye(self.n + 1, dtype=complex))

    @property
    def zero(self) -> CoeffMatrix:
        return CoeffMatrix("0", np.zeros((self.n + 1, self.n + 1), dtype=complex))


def diagonal_matrices(n: int, gamma: float) -> Diagonals:
    if n < 0 or not gamma > 0:
        raise ValueError(f"need n >= 0 and gamma > 0, got n={n}, gamma={gamma}")
    return Diagonals(n=n, gamma=gamma)


# ── Faber polynomials ─────────────────────────────────────────


def faber_matrix(conformal_map: ConformalMap, n: int) -> CoeffMatrix:
    """
    Coefficients p_mn of F_m(z) = Σ p_mn z^n from

        F_{m+1}(z) = z F_m(z) − m a_m − Σ_{k=0}^{m} a_k F_{m−k}(z)
    """
    P = np.zeros((n + 1, n + 1), dtype=complex)
    P[0, 0] = 1.0
    for m in range(n):
        P[m + 1, 1:] = P[m, :-1]
        for k in range(m + 1):
            P[m + 1] -= conformal_map.coefficient(k) * P[m - k]
        P[m + 1, 0] -= m * conformal_map.coefficient(m)
    return CoeffMatrix("P", P)


def faber_inverse(P: CoeffMatrix) -> CoeffMatrix:
    """Exact inverse of the unit lower-triangular section by forward substitution."""
    identity = np.eye(P.order + 1, dtype=complex)
    inverse = solve_triangular(P.data, identity, lower=True, unit_diagonal=True)
    return CoeffMatrix("P^-1", inverse)


def faber_similarity(P: CoeffMatrix, T: CoeffMatrix) -> CoeffMatrix:
    """
    P T P⁻¹ without forming P⁻¹: X P = P T is solved as the upper-triangular
    system Pᵀ Xᵀ = (P T)ᵀ, one back substitution per row of X.
    """
    P._check(T)
    PT = P.data @ T.data
    X = solve_triangular(P.data.T, PT.T, lower=False, unit_diagonal=True).T
    return CoeffMatrix("PTP^-1", X)


def faber_multiplication_matrix(conformal_map: ConformalMap, n: int) -> np.ndarray:
    """Z with z F_j = Σ_l Z[j, l] F_l, rows 0..n-1 exact."""
    Z = np.zeros((n + 1, n + 1), dtype=complex)
    for j in range(n + 1):
        if j + 1 <= n:
            Z[j, j + 1] = 1.0
        for k in range(j + 1):
            Z[j, j - k] += conformal_map.coefficient(k)
        Z[j, 0] += j * conformal_map.coefficient(j)
    return Z


def faber_derivative_matrices(conformal_map: ConformalMap, n: int) -> Tuple[CoeffMatrix, CoeffMatrix]:
    """
    (D̃, D): F_m' = Σ_k d̃_mk F_k, and d_mk = d̃_mk / (m γ^m) with row 0 zero.

    Built from the differentiated Faber recursion
        F'_{m+1} = F_m + z F'_m − Σ_{k=0}^{m} a_k F'_{m−k}
    so that D̃ = P T P⁻¹ holds as an independent identity.
    """
    Z = faber_multiplication_matrix(conformal_map, n)
    Dt = np.zeros((n + 1, n + 1), dtype=complex)
    for m in range(n):
        row = Dt[m] @ Z
        row[m] += 1.0
        for k in range(m + 1):
            row -= conformal_map.coefficient(k) * Dt[m - k]
        Dt[m + 1] = row
    m = np.arange(1, n + 1)
    D = np.zeros_like(Dt)
    D[1:] = Dt[1:] / (m * conformal_map.gamma ** m)[:, None]
    return CoeffMatrix("Dt", Dt), CoeffMatrix("D", D)


def faber_polynomials(conformal_map: ConformalMap, n: int) -> Tuple[List[Polynomial], List[Polynomial]]:
    """F_m and F_m' as numpy polynomials in z, m = 0..n, read off the rows of P."""
    P = faber_matrix(conformal_map, n).data
    F = [Polynomial(P[m, : m + 1]) for m in range(n + 1)]
    return F, [p.deriv() for p in F]


def faber_values(conformal_map: ConformalMap, n: int, z) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    F_m(z), F_m'(z), F_m''(z) for m = 0..n, by the Faber recursion and its derivatives.

    Returns three arrays of shape (n + 1,) + shape(z).
    """
    z = np.asarray(z, dtype=complex)
    F = np.zeros((n + 1,) + z.shape, dtype=complex)
    dF = np.zeros_like(F)
    d2F = np.zeros_like(F)
    F[0] = 1.0
    for m in range(n):
        F[m + 1] = z * F[m] - m * conformal_map.coefficient(m)
        dF[m + 1] = F[m] + z * dF[m]
        d2F[m + 1] = 2 * dF[m] + z * d2F[m]
        for k in range(m + 1):
            ak = conformal_map.coefficient(k)
            if ak != 0:
                F[m + 1] -= ak * F[m - k]
                dF[m + 1] -= ak * dF[m - k]
                d2F[m + 1] -= ak * d2F[m - k]
    return F, dF, d2F


def faber_composition(conformal_map: ConformalMap, n: int, guard: Optional[int] = None) -> List[LaurentSeries]:
    """Laurent series of F_m(Ψ(w)) for m = 0..n inside the working window."""
    window = working_window(n, guard)
    psi = conformal_map.laurent(window)
    series = [LaurentSeries.monomial(0, 1.0, window)]
    for m in range(n):
        nxt = multiply(psi, series[m], window)
        nxt = nxt + LaurentSeries.monomial(0, -m * conformal_map.coefficient(m), window)
        for k in range(m + 1):
            ak = conformal_map.coefficient(k)
            if ak != 0:
                nxt = nxt - ak * series[m - k]
        series.append(nxt)
    return series


def exact_grunsky_limit(conformal_map: ConformalMap, m: int, n: int, guard: Optional[int] = None) -> int:
    """
    Largest k for which c_mk is exact in the window used for order n.

    F_m(Ψ(w)) reaches down to w^{-mK}; when that fits the window every
    coefficient is exact, otherwise clipping at the low end corrupts one
    more power per recursion step.
    """
    if guard is None:
        guard = n
    if m * conformal_map.depth <= n + guard:
        return m * conformal_map.depth
    return n + guard - m + 1


def grunsky_matrix(
    conformal_map: ConformalMap,
    n: int,
    guard: Optional[int] = None,
    *,
    composition: Optional[List[LaurentSeries]] = None,
) -> CoeffMatrix:
    """c_mk, the coefficient of w^-k in F_m(Ψ(w)); row 0 and column 0 are zero."""
    if composition is None:
        composition = faber_composition(conformal_map, n, guard)
    C = np.zeros((n + 1, n + 1), dtype=complex)
    for m in range(1, n + 1):
        limit = exact_grunsky_limit(conformal_map, m, n, guard)
        if limit < min(n, m * conformal_map.depth):
            raise WindowTooSmallError(
                f"c_{m}k is exact only for k <= {limit}; raise the guard above {guard} for order {n}"
            )
        for k in range(1, n + 1):
            C[m, k] = composition[m].coefficient(-k)
    return CoeffMatrix("C", C)


def psi_matrices(conformal_map: ConformalMap, n: int) -> Tuple[CoeffMatrix, CoeffMatrix, CoeffMatrix]:
    """[Ψ₊]_mn = a_{m+n}, [Ψ₋]_mn = a_{m−n}, and Ψ₀ (a₀ at (0,0), 1 at (1,0) and (0,1))."""
    idx = np.arange(n + 1)
    coeff = np.vectorize(conformal_map.coefficient, otypes=[complex])
    plus = coeff(idx[:, None] + idx[None, :])
    minus = coeff(idx[:, None] - idx[None, :])
    zero = np.zeros((n + 1, n + 1), dtype=complex)
    zero[0, 0] = conformal_map.coefficient(0)
    if n >= 1:
        zero[1, 0] = 1.0
        zero[0, 1] = 1.0
    return CoeffMatrix("Psi+", plus), CoeffMatrix("Psi-", minus), CoeffMatrix("Psi0", zero)


# ── Bundle ────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class GeometryBundle:
    """Every map-derived matrix at one shared truncation order."""

    map: ConformalMap
    n: int
    guard: int
    P: CoeffMatrix
    P_inv: CoeffMatrix
    D_tilde: CoeffMatrix
    D: CoeffMatrix
    C: CoeffMatrix
    psi_plus: CoeffMatrix
    psi_minus: CoeffMatrix
    psi_zero: CoeffMatrix
    diag: Diagonals
    composition: List[LaurentSeries] = field(repr=False, compare=False, default_factory=list)

    @property
    def gamma(self) -> float:
        return self.map.gamma

    def matrices(self) -> Dict[str, CoeffMatrix]:
        return {
            "P": self.P,
            "P_inv": self.P_inv,
            "D_tilde": self.D_tilde,
            "D": self.D,
            "C": self.C,
            "psi_plus": self.psi_plus,
            "psi_minus": self.psi_minus,
            "psi_zero": self.psi_zero,
        }


def build_geometry(conformal_map: ConformalMap, n: int, guard: Optional[int] = None) -> GeometryBundle:
    if guard is None:
        guard = n
    logger.info(f"Building geometry bundle: gamma={conformal_map.gamma}, K={conformal_map.depth}, n={n}, guard={guard}")
    P = faber_matrix(conformal_map, n)
    D_tilde, D = faber_derivative_matrices(conformal_map, n)
    composition = faber_composition(conformal_map, n, guard)
    C = grunsky_matrix(conformal_map, n, guard, composition=composition)
    plus, minus, zero = psi_matrices(conformal_map, n)
    return GeometryBundle(
        map=conformal_map,
        n=n,
        guard=guard,
        P=P,
        P_inv=faber_inverse(P),
        D_tilde=D_tilde,
        D=D,
        C=C,
        psi_plus=plus,
        psi_minus=minus,
        psi_zero=zero,
        diag=diagonal_matrices(n, conformal_map.gamma),
        composition=composition,
    )
