"""
Tests for the conformal map and the matrices derived from it.
Tests: map evaluation and validation, Faber matrix P and inverse, D̃ = P T P⁻¹,
Grunsky coefficients, Ψ± / Ψ₀, the geometry bundle.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inclusion.exceptions import (
    DomainError,
    GeometryError,
    OrderMismatchError,
    SingularPointError,
    WindowTooSmallError,
)
from inclusion.services.geometry import (
    CoeffMatrix,
    ConformalMap,
    boundary_point,
    build_geometry,
    diagonal_matrices,
    eval_map,
    eval_map_derivative,
    eval_map_second_derivative,
    faber_derivative_matrices,
    faber_inverse,
    faber_matrix,
    faber_polynomials,
    faber_similarity,
    faber_values,
    grunsky_matrix,
    psi_matrices,
)

small = st.floats(min_value=-0.15, max_value=0.15)


@st.composite
def small_maps(draw):
    """Random depth-3 maps with small coefficients (the identities below are algebraic)."""
    coeffs = [complex(draw(small), draw(small)) for _ in range(4)]
    return ConformalMap(gamma=1.0, a=np.array(coeffs))


unit = st.floats(min_value=-0.7, max_value=0.7)


@st.composite
def injective_maps(draw):
    """
    Depth K <= 6 maps with a_j = γ^(j+1) b_j, |b_j| <= 0.1/j, so that Σ j|b_j| < 1
    and the map is univalent on |w| > γ.
    """
    gamma = draw(st.floats(min_value=0.9, max_value=1.1))
    depth = draw(st.integers(min_value=1, max_value=6))
    coeffs = [0.1 * gamma * complex(draw(unit), draw(unit))]
    for j in range(1, depth + 1):
        b = complex(draw(unit), draw(unit)) * 0.1 / j
        coeffs.append(b * gamma ** (j + 1))
    return ConformalMap(gamma=gamma, a=np.array(coeffs))


class TestConformalMap:
    """Evaluation, boundary parametrization and validation"""

    def test_disk_eval(self, disk_map):
        assert eval_map(disk_map, 2.0) == pytest.approx(2.5)

    def test_ellipse_eval(self, ellipse_map):
        assert eval_map(ellipse_map, 1.0) == pytest.approx(1.8)

    def test_log_radius(self, rotated_ellipse_map):
        assert rotated_ellipse_map.rho0 == pytest.approx(np.log(1.3))

    def test_derivatives(self, disk_map, ellipse_map):
        assert eval_map_derivative(ellipse_map, 1.0) == pytest.approx(0.7)
        np.testing.assert_allclose(eval_map_derivative(disk_map, np.array([1.0, 2j, -3.0])), 1.0)

    def test_second_derivative(self, ellipse_map):
        """Ψ'' = 2a₁/w³."""
        assert eval_map_second_derivative(ellipse_map, 2.0) == pytest.approx(2 * 0.3 / 8)

    def test_disk_boundary_is_circle(self, disk_map):
        theta = np.linspace(0, 2 * np.pi, 17)
        z, h = boundary_point(disk_map, theta)
        np.testing.assert_allclose(np.abs(z - 0.5), 1.0)
        np.testing.assert_allclose(h, 1.0)

    def test_ellipse_scale_factor(self, ellipse_map):
        theta = np.linspace(0, 2 * np.pi, 13)
        _, h = ellipse_map.boundary(theta)
        np.testing.assert_allclose(h, np.abs(np.exp(1j * theta) - 0.3 * np.exp(-1j * theta)))

    def test_depth(self, disk_map, ellipse_map, cubic_map):
        assert (disk_map.depth, ellipse_map.depth, cubic_map.depth) == (0, 1, 3)

    def test_default_margin(self, ellipse_map):
        assert ellipse_map.delta == pytest.approx(0.1)

    def test_inside_margin_rejected(self, ellipse_map):
        with pytest.raises(DomainError):
            ellipse_map.eval(0.5)

    def test_singular_point(self):
        """Ψ' = 1 − a₁/w² vanishes at w = √a₁ inside the analytic annulus."""
        cmap = ConformalMap(gamma=1.0, a=np.array([0.0, 0.9025]))
        with pytest.raises(SingularPointError):
            cmap.derivative(0.95)

    def test_nonpositive_radius(self):
        with pytest.raises(GeometryError):
            ConformalMap(gamma=0.0)

    def test_validate_accepts_ellipse(self, ellipse_map, cubic_map):
        ellipse_map.validate()
        cubic_map.validate()

    def test_validate_rejects_self_intersection(self):
        """w + 1.2/w³ winds over itself on |w| = 1."""
        with pytest.raises(GeometryError):
            ConformalMap(gamma=1.0, a=np.array([0.0, 0.0, 0.0, 1.2])).validate()

    def test_contains(self, ellipse_map):
        inside = ellipse_map.contains(np.array([0.5, 0.5 + 0.3j, 3.0, -2.0j]))
        assert inside.tolist() == [True, True, False, False]

    def test_invert(self, rotated_ellipse_map):
        w = 2.1 * np.exp(0.7j)
        z = complex(rotated_ellipse_map.eval(w))
        assert rotated_ellipse_map.invert(z) == pytest.approx(w, abs=1e-10)

    def test_invert_interior_point_fails(self, ellipse_map):
        with pytest.raises(DomainError):
            ellipse_map.invert(0.5)


class TestFaberMatrix:
    """P, P⁻¹ and the Faber recursion"""

    def test_first_polynomials(self, rotated_ellipse_map):
        """F₁ = z − a₀ and F₂ = z² − 2a₀z + a₀² − 2a₁."""
        a0, a1 = rotated_ellipse_map.a[:2]
        P = faber_matrix(rotated_ellipse_map, 4).data
        np.testing.assert_allclose(P[1, :2], [-a0, 1.0])
        np.testing.assert_allclose(P[2, :3], [a0**2 - 2 * a1, -2 * a0, 1.0])

    def test_unit_lower_triangular(self, cubic_map):
        P = faber_matrix(cubic_map, 10).data
        np.testing.assert_allclose(np.diag(P), 1.0)
        assert np.all(np.triu(P, 1) == 0)

    def test_inverse(self, cubic_map):
        P = faber_matrix(cubic_map, 12)
        product = (P @ faber_inverse(P)).data
        np.testing.assert_allclose(product, np.eye(13), atol=1e-12)

    def test_values_match_matrix(self, rotated_ellipse_map):
        z = np.array([0.3 + 0.2j, 1.5, -2.0j])
        F, _, _ = faber_values(rotated_ellipse_map, 8, z)
        P = faber_matrix(rotated_ellipse_map, 8).data
        powers = z[None, :] ** np.arange(9)[:, None]
        np.testing.assert_allclose(F, P @ powers, rtol=1e-12, atol=1e-12)

    def test_polynomial_objects(self, cubic_map):
        z = np.array([0.2 - 0.1j, -0.4 + 0.3j])
        F, dF, _ = faber_values(cubic_map, 7, z)
        polys, derivs = faber_polynomials(cubic_map, 7)
        assert polys[7].degree() == 7
        np.testing.assert_allclose([p(z) for p in polys], F, atol=1e-12)
        np.testing.assert_allclose([p(z) for p in derivs], dF, atol=1e-12)

    def test_generating_function(self, cubic_map):
        """Σ F_m(z) w^-m · (Ψ(w) − z)/(wΨ'(w)) ≈ 1."""
        z, w = 0.3 + 0.1j, 3.0 * np.exp(0.4j)
        F, _, _ = faber_values(cubic_map, 60, z)
        total = np.sum(F * w ** (-np.arange(61.0)))
        factor = (cubic_map.eval(w) - z) / (w * cubic_map.derivative(w))
        assert total * factor == pytest.approx(1.0, abs=1e-12)

    def test_disk_faber_is_shifted_power(self, disk_map):
        F, dF, _ = faber_values(disk_map, 5, 1.7)
        np.testing.assert_allclose(F, 1.2 ** np.arange(6))
        np.testing.assert_allclose(dF[1:], np.arange(1, 6) * 1.2 ** np.arange(5))


class TestFaberDerivative:
    """D̃ from the differentiated recursion against P T P⁻¹"""

    @given(cmap=injective_maps())
    @settings(max_examples=20, deadline=None)
    def test_identity(self, cmap):
        n = 24
        P = faber_matrix(cmap, n)
        Dt, _ = faber_derivative_matrices(cmap, n)
        T = diagonal_matrices(n, cmap.gamma).T
        np.testing.assert_allclose(Dt.data, faber_similarity(P, T).data, rtol=0, atol=1e-12)

    @given(cmap=small_maps())
    @settings(max_examples=10, deadline=None)
    def test_similarity_matches_explicit_inverse(self, cmap):
        P = faber_matrix(cmap, 8)
        T = diagonal_matrices(8, cmap.gamma).T
        np.testing.assert_allclose(faber_similarity(P, T).data, (P @ T @ faber_inverse(P)).data, atol=1e-12)

    def test_similarity_order_mismatch(self, cubic_map):
        with pytest.raises(OrderMismatchError):
            faber_similarity(faber_matrix(cubic_map, 6), diagonal_matrices(5, 1.0).T)

    def test_second_row(self, rotated_ellipse_map):
        """F₂' = 2z − 2a₀ = 2F₁, so row 2 is [0, 2]."""
        Dt, _ = faber_derivative_matrices(rotated_ellipse_map, 4)
        np.testing.assert_allclose(Dt.data[2, :3], [0.0, 2.0, 0.0], atol=1e-15)

    def test_scaled_matrix(self, rotated_ellipse_map):
        Dt, D = faber_derivative_matrices(rotated_ellipse_map, 6)
        gamma = rotated_ellipse_map.gamma
        for m in range(1, 7):
            np.testing.assert_allclose(D.data[m], Dt.data[m] / (m * gamma**m))
        assert np.all(D.data[0] == 0)

    def test_derivative_values(self, cubic_map):
        z = 0.4 - 0.2j
        F, dF, _ = faber_values(cubic_map, 9, z)
        Dt, _ = faber_derivative_matrices(cubic_map, 9)
        np.testing.assert_allclose(dF, Dt.data @ F, atol=1e-12)


class TestGrunsky:
    """c_mk from the Laurent composition F_m(Ψ(w))"""

    def test_disk_is_zero(self, disk_bundle):
        assert np.all(np.abs(disk_bundle.C.data) < 1e-14)

    def test_ellipse_diagonal(self, ellipse_bundle):
        """c_mk = a₁^m δ_mk for the Joukowski map."""
        expected = np.diag([0.0] + [0.3**m for m in range(1, 17)])
        np.testing.assert_allclose(ellipse_bundle.C.data, expected, atol=1e-13)

    @given(cmap=injective_maps())
    @settings(max_examples=20, deadline=None)
    def test_symmetry_and_bound(self, cmap):
        """k c_mk = m c_km and |c_mk| <= 2m γ^(m+k) for m, k <= 16, in units of γ^(m+k)."""
        cmap.validate()
        n = 16
        idx = np.arange(n + 1)
        scale = cmap.gamma ** (idx[:, None] + idx[None, :])
        C = grunsky_matrix(cmap, n).data / scale
        np.testing.assert_allclose(idx[None, :] * C, (idx[None, :] * C).T, rtol=0, atol=1e-12)
        assert np.all(np.abs(C) <= 2 * idx[:, None] + 1e-12)

    def test_composition_matches_values(self, cubic_map):
        """F_m(Ψ(w)) = w^m + Σ c_mk w^-k at a point outside the curve."""
        bundle = build_geometry(cubic_map, 8, guard=16)
        w = 1.4 * np.exp(0.9j)
        F, _, _ = faber_values(cubic_map, 8, complex(cubic_map.eval(w)))
        for m in range(1, 9):
            assert bundle.composition[m].evaluate(w) == pytest.approx(F[m], abs=1e-12)

    def test_window_too_small(self, cubic_map):
        with pytest.raises(WindowTooSmallError):
            grunsky_matrix(cubic_map, 8, guard=0)


class TestMapMatrices:
    """Ψ₊, Ψ₋, Ψ₀ and the diagonal family"""

    def test_ellipse_entries(self, ellipse_map):
        plus, minus, zero = psi_matrices(ellipse_map, 4)
        assert plus.data[0, 1] == pytest.approx(0.3)
        assert minus.data[0, 0] == pytest.approx(0.5)
        assert minus.data[1, 0] == pytest.approx(0.3)
        # a₋₁ = 1 sits on the superdiagonal
        np.testing.assert_allclose(np.diag(minus.data, 1), 1.0)
        assert zero.data[0, 0] == pytest.approx(0.5)
        assert zero.data[1, 0] == zero.data[0, 1] == 1.0

    def test_diagonals(self):
        dg = diagonal_matrices(4, 2.0)
        np.testing.assert_allclose(np.diag(dg.N.data), [1, 1, 2, 3, 4])
        np.testing.assert_allclose(np.diag(dg.N0.data), [0, 1, 2, 3, 4])
        np.testing.assert_allclose(np.diag(dg.I0.data), [0, 1, 1, 1, 1])
        np.testing.assert_allclose(np.diag(dg.gamma_power(2).data), [1, 4, 16, 64, 256])
        np.testing.assert_allclose(np.diag(dg.gamma_power0(-1).data), [0, 0.5, 0.25, 0.125, 0.0625])
        np.testing.assert_allclose((dg.N @ dg.N_inv).data, np.eye(5))

    def test_order_mismatch(self):
        with pytest.raises(OrderMismatchError):
            CoeffMatrix("A", np.eye(3)) @ CoeffMatrix("B", np.eye(4))

    def test_non_square_rejected(self):
        with pytest.raises(OrderMismatchError):
            CoeffMatrix("A", np.zeros((2, 3)))

    def test_scalar_products(self):
        A = CoeffMatrix("A", np.eye(2))
        assert np.all((np.float64(2.0) * A).data == 2 * np.eye(2))
        assert np.all((A * 3j).data == 3j * np.eye(2))


class TestGeometryBundle:
    """build_geometry"""

    def test_shared_order(self, cubic_bundle):
        assert all(M.order == 24 for M in cubic_bundle.matrices().values())
        assert cubic_bundle.guard == 24

    def test_inverse_consistent(self, cubic_bundle):
        product = (cubic_bundle.P @ cubic_bundle.P_inv).data
        np.testing.assert_allclose(product, np.eye(25), atol=1e-10)
