"""
Shared pytest fixtures for the inclusion solver tests.
Usage: pytest inclusion/tests/ -v
"""
import numpy as np
import pytest

from inclusion.services.geometry import ConformalMap, build_geometry
from inclusion.services.material import MaterialPair


@pytest.fixture(scope="session")
def disk_map():
    """Translated disk Ψ(w) = w + 0.5."""
    return ConformalMap(gamma=1.0, a=np.array([0.5]))


@pytest.fixture(scope="session")
def ellipse_map():
    """Joukowski ellipse Ψ(w) = w + 0.5 + 0.3/w."""
    return ConformalMap(gamma=1.0, a=np.array([0.5, 0.3]))


@pytest.fixture(scope="session")
def rotated_ellipse_map():
    """Ellipse with complex a₁ and a larger conformal radius."""
    return ConformalMap(gamma=1.3, a=np.array([0.2 - 0.1j, 0.4 + 0.3j]))


@pytest.fixture(scope="session")
def cubic_map():
    """Three-term map w + 0.1/w + 0.05/w³ (depth K = 3)."""
    return ConformalMap(gamma=1.0, a=np.array([0.0, 0.1, 0.0, 0.05]))


@pytest.fixture(scope="session")
def cavity_material():
    """λ = μ = 1 matrix around a hole."""
    return MaterialPair(lambda_ext=1.0, mu_ext=1.0, cavity=True)


@pytest.fixture(scope="session")
def inclusion_material():
    """λ = μ = 1 matrix around a stiffer λ̃ = 2, μ̃ = 3 inclusion."""
    return MaterialPair(lambda_ext=1.0, mu_ext=1.0, lambda_int=2.0, mu_int=3.0)


@pytest.fixture(scope="session")
def soft_material():
    """λ = 0.7, μ = 1.2 matrix around a softer λ̃ = 0.5, μ̃ = 0.25 inclusion."""
    return MaterialPair(lambda_ext=0.7, mu_ext=1.2, lambda_int=0.5, mu_int=0.25)


@pytest.fixture(scope="session")
def disk_bundle(disk_map):
    """Disk geometry at order 8."""
    return build_geometry(disk_map, 8)


@pytest.fixture(scope="session")
def ellipse_bundle(ellipse_map):
    """Ellipse geometry at order 16."""
    return build_geometry(ellipse_map, 16)


@pytest.fixture(scope="session")
def cubic_bundle(cubic_map):
    """Cubic-map geometry at order 24."""
    return build_geometry(cubic_map, 24)
