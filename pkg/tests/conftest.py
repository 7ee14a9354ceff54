"""
Shared fixtures for the scatlab test suite.
"""
import numpy as np
import pytest

from scatlab.models import CartesianGrid, PotentialSpec, Profile, SampledField


def gaussian_spec(n: int, amplitude: float = -2.0, width: float = 0.3, name: str = "gaussian") -> PotentialSpec:
    return PotentialSpec(
        dimension=n,
        electric=[Profile("gaussian", {"amplitude": amplitude, "width": width})],
        C=100.0,
        name=name,
    )


def well_spec(n: int, value: float = -0.5, radius: float = 1.0, name: str = "well") -> PotentialSpec:
    return PotentialSpec(
        dimension=n,
        electric=[Profile("well", {"radius": radius, "value": value})],
        C=100.0,
        name=name,
    )


def gaussian_field(grid: CartesianGrid, width: float, amplitude: float = 1.0, role: str = "source") -> SampledField:
    r2 = grid.radius() ** 2
    return SampledField(grid, amplitude * np.exp(-r2 / width ** 2), role)


@pytest.fixture
def grid2() -> CartesianGrid:
    """Plane grid on which a width-0.3 gaussian is well resolved."""
    return CartesianGrid(dimension=2, points=64, side=8.0)


@pytest.fixture
def grid3_small() -> CartesianGrid:
    return CartesianGrid(dimension=3, points=16, side=4.0)


@pytest.fixture
def gaussian2() -> PotentialSpec:
    return gaussian_spec(2)


@pytest.fixture
def weak_gaussian2() -> PotentialSpec:
    return gaussian_spec(2, amplitude=1e-3, name="weak")


@pytest.fixture
def well3() -> PotentialSpec:
    return well_spec(3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
