"""
Tests for curl calculus, the vector-potential construction and gauge transformations.
"""
import numpy as np
import pytest

from scatlab.exceptions import (
    ConstructionError,
    DecayClassError,
    DivergenceError,
    DomainError,
    ShapeMismatchError,
)
from scatlab.forward import scattering_matrix
from scatlab.magnetic import (
    construction_parts,
    curl,
    div_field,
    evaluate_gauge,
    field_divergence,
    gauge_invariance_defect,
    gauge_phase,
    gauge_transform,
    materialize,
    path_defect,
    potential_from_field,
    validate_gauge,
)
from scatlab.models import CartesianGrid, GaugeFunction, PotentialSpec, Profile, SampledField
from scatlab.numkit import spectral_derivative
from scatlab.potentials import evaluate_field, sample, vortex_potential

from .conftest import gaussian_spec


def vortex_spec(profile: str, width: float, amplitude: float = 1.0) -> PotentialSpec:
    return PotentialSpec(
        dimension=3,
        magnetic=[Profile("vortex", {"profile": profile, "width": width, "amplitude": amplitude})],
        C=100.0,
        R=1.0,
        name=f"{profile}-vortex",
    )


def sampled_vortex(spec: PotentialSpec, grid: CartesianGrid) -> SampledField:
    values = vortex_potential(spec.magnetic[0], grid.coordinates(), spec)
    return SampledField(grid, np.moveaxis(values, -1, 0), "A")


def magnetic_laplacian(A: np.ndarray, phi: np.ndarray, grid: CartesianGrid) -> np.ndarray:
    """(i grad + A)^2 phi by spectral differentiation."""
    v = [1j * spectral_derivative(phi, grid, j) + A[j] * phi for j in range(3)]
    return sum(1j * spectral_derivative(v[j], grid, j) + A[j] * v[j] for j in range(3))


# Directions avoiding the antipode of the default base point R e_1
SAMPLE_POINTS = np.array(
    [
        [0.0, 0.06, 0.08],
        [0.168, 0.21, 0.224],
        [-0.42, 0.56, 0.0],
        [0.216, -0.288, 0.48],
    ]
)


@pytest.fixture(scope="module")
def bump_construction():
    return potential_from_field(vortex_spec("bump", 0.9))


class TestCurl:
    @pytest.fixture(scope="class")
    def grid(self) -> CartesianGrid:
        return CartesianGrid(3, 48, 8.0)

    def test_spectral_curl_matches_closed_form(self, grid):
        spec = vortex_spec("gaussian", 0.6, amplitude=0.5)
        F = curl(sampled_vortex(spec, grid))
        expected = np.moveaxis(evaluate_field(spec, grid.coordinates()), (-2, -1), (0, 1))
        assert F.role == "F"
        assert np.max(np.abs(F.values - expected)) <= 1e-8 * np.max(np.abs(expected))

    def test_sampled_vortex_is_divergence_free(self, grid):
        _, F = sample(vortex_spec("gaussian", 0.6, amplitude=0.5), grid)
        assert div_field(F) <= 1e-7 * np.max(np.abs(F.values))
        assert field_divergence(F).shape == (3,) + grid.shape

    def test_requires_vector_potential(self, grid):
        scalar = SampledField(grid, np.zeros(grid.shape), "V")
        with pytest.raises(ShapeMismatchError):
            curl(scalar)
        with pytest.raises(ShapeMismatchError):
            field_divergence(scalar)

    def test_plane_curl_rejected(self):
        grid = CartesianGrid(2, 16, 4.0)
        with pytest.raises(DomainError):
            curl(SampledField(grid, np.zeros((2,) + grid.shape), "A"))


class TestConstruction:
    def test_curl_of_constructed_potential(self, bump_construction):
        spec = bump_construction.field_spec
        step = 1e-4
        offsets = np.concatenate([np.zeros((1, 3)), step * np.eye(3), -step * np.eye(3)])
        points = SAMPLE_POINTS[:, None, :] + offsets[None, :, :]
        A = construction_parts(bump_construction, points)["A"]
        jacobian = (A[:, 1:4, :] - A[:, 4:7, :]) / (2 * step)
        F = jacobian - np.swapaxes(jacobian, -1, -2)
        expected = evaluate_field(spec, SAMPLE_POINTS)
        assert np.max(np.abs(F - expected)) <= 1e-5 * np.max(np.abs(expected))

    def test_vanishes_outside_field_support(self, bump_construction):
        points = np.array([[1.2, 0.0, 0.0], [0.0, -1.5, 0.3], [0.5, 0.5, 1.4]])
        parts = construction_parts(bump_construction, points)
        assert np.all(parts["A"] == 0.0)

    def test_regular_part_beyond_cutoff_radius(self, bump_construction):
        points = np.array([[0.0, 0.7, 0.0], [0.55, 0.0, 0.55]])
        parts = construction_parts(bump_construction, points)
        assert np.array_equal(parts["A"], parts["A_reg"])
        assert np.all(parts["eta"] == 1.0)

    def test_contours_agree(self, bump_construction):
        points = np.array([[0.0, 0.3, 0.0], [0.2, 0.2, -0.2], [-0.4, 0.0, 0.0], [0.1, -0.25, 0.3]])
        defect = path_defect(bump_construction, points)
        assert defect <= 1e-7
        assert bump_construction.path_defect == defect

    def test_postconditions_recorded(self, bump_construction):
        assert 0.0 < bump_construction.curl_defect <= 1e-4
        assert bump_construction.path_defect <= 1e-6

    def test_curl_check_refuses(self):
        with pytest.raises(ConstructionError) as info:
            potential_from_field(vortex_spec("bump", 0.9), curl_tol=1e-15)
        assert info.value.record["curl_defect"] > 1e-15

    def test_custom_cutoff(self, bump_construction):
        points = np.array([[0.0, 0.45, 0.0], [0.0, 0.0, -0.45]])
        narrow = potential_from_field(vortex_spec("bump", 0.9), cutoff=(0.1, 0.4))
        assert (narrow.inner, narrow.outer) == (0.1, 0.4)
        parts = construction_parts(narrow, points)
        assert np.all(parts["eta"] == 1.0)
        assert np.array_equal(parts["A"], parts["A_reg"])
        assert np.all(construction_parts(bump_construction, points)["eta"] < 1.0)

    @pytest.mark.parametrize("cutoff", [(0.5, 0.2), (0.0, 0.5), (0.2, 1.5)])
    def test_invalid_cutoff(self, cutoff):
        with pytest.raises(DomainError):
            potential_from_field(vortex_spec("bump", 0.9), cutoff=cutoff)

    def test_sampled_construction(self):
        grid = CartesianGrid(3, 8, 4.0)
        V, A, construction = materialize(vortex_spec("bump", 0.9), grid)
        assert not np.any(V.values)
        assert A is construction.A
        assert A.role == "A"
        assert A.values.shape == (3,) + grid.shape
        assert construction.U.values.shape == grid.shape

    def test_electric_spec_needs_no_construction(self, grid3_small):
        spec = PotentialSpec(dimension=3, electric=[Profile("gaussian", {"width": 0.3})])
        V, A, construction = materialize(spec, grid3_small)
        assert A is None and construction is None

    def test_uniform_field_is_not_divergence_free(self):
        spec = PotentialSpec(dimension=3, magnetic=[Profile("uniform", {"b": [0.0, 0.0, 1.0], "radius": 1.0})])
        with pytest.raises(DivergenceError) as info:
            potential_from_field(spec)
        assert info.value.record["divergence"] > info.value.record["tolerance"]

    def test_invalid_requests(self):
        spec = vortex_spec("bump", 0.9)
        with pytest.raises(DomainError):
            potential_from_field(spec, base_point=np.zeros(3))
        plane = PotentialSpec(dimension=2)
        with pytest.raises(DomainError):
            potential_from_field(plane)


class TestGauge:
    def psi(self, **kwargs) -> GaugeFunction:
        options = {"dimension": 3, "family": "gaussian", "amplitude": 1.0, "width": 0.8, "C": 10.0}
        options.update(kwargs)
        return GaugeFunction(**options)

    def test_phase_intertwines_magnetic_laplacians(self):
        grid = CartesianGrid(3, 48, 10.0)
        psi = self.psi()
        A = sampled_vortex(vortex_spec("gaussian", 0.8, amplitude=0.5), grid)
        A2 = gauge_transform(A, psi)
        x = grid.coordinates()
        phi = np.exp(-np.sum(x ** 2, axis=-1)) * np.exp(1j * x[..., 0])
        phase = gauge_phase(psi, grid)
        lhs = magnetic_laplacian(A2.values, phase * phi, grid)
        rhs = phase * magnetic_laplacian(A.values, phi, grid)
        assert np.max(np.abs(lhs - rhs)) <= 1e-5 * np.max(np.abs(rhs))
        assert np.allclose(np.abs(phase), 1.0)

    def test_gradient_added_without_base_potential(self, grid3_small):
        psi = self.psi()
        A = gauge_transform(None, psi, grid3_small)
        _, grad = evaluate_gauge(psi, grid3_small.coordinates())
        assert np.allclose(A.values, np.moveaxis(grad, -1, 0))

    @pytest.mark.parametrize("family", ["gaussian", "bump"])
    def test_gauge_gradient(self, family, rng):
        psi = self.psi(family=family, width=1.2)
        x = 0.4 * rng.normal(size=(5, 3))
        _, grad = evaluate_gauge(psi, x)
        step = 1e-6
        for i in range(3):
            e = np.zeros(3)
            e[i] = step
            fd = (evaluate_gauge(psi, x + e)[0] - evaluate_gauge(psi, x - e)[0]) / (2 * step)
            assert np.allclose(grad[:, i], fd, atol=1e-8)

    def test_zero_gauge_is_identity(self, grid3_small):
        V = SampledField(grid3_small, np.zeros(grid3_small.shape), "V")
        A = SampledField(grid3_small, np.ones((3,) + grid3_small.shape), "A")
        zero = self.psi(family="zero")
        assert gauge_transform(A, zero) is A
        assert gauge_invariance_defect(V, None, zero, 1.0, 2) == 0.0
        assert gauge_invariance_defect(V, A, self.psi(amplitude=0.0), 1.0, 2) == 0.0

    def test_decay_exponent_must_be_positive(self):
        with pytest.raises(DecayClassError):
            validate_gauge(self.psi(mu=0.0))

    def test_decay_bound_enforced(self):
        with pytest.raises(DecayClassError) as info:
            validate_gauge(self.psi(amplitude=100.0, C=1.0))
        assert info.value.record["C"] == 1.0

    def test_plane_gauge_rejected(self):
        grid = CartesianGrid(2, 16, 4.0)
        with pytest.raises(DomainError):
            gauge_transform(None, self.psi(dimension=2), grid)

    def test_unknown_family(self):
        with pytest.raises(DomainError):
            evaluate_gauge(self.psi(family="sawtooth"), np.zeros((1, 3)))


def wide_bump(amplitude: float = 0.3) -> GaugeFunction:
    return GaugeFunction(dimension=3, family="bump", amplitude=amplitude, width=1.95, C=10.0)


@pytest.mark.slow
def test_pure_gauge_scatters_trivially():
    grid = CartesianGrid(3, 16, 8.0)
    V = SampledField(grid, np.zeros(grid.shape), "V")
    A = gauge_transform(None, wide_bump(), grid)
    S = scattering_matrix(V, A, 1.0, 2).matrix
    assert np.max(np.abs(S - np.eye(S.shape[0]))) <= 1e-2


@pytest.mark.slow
def test_gauge_defect_shrinks_with_refinement():
    defects = []
    for points in (16, 24):
        V, _ = sample(gaussian_spec(3, amplitude=0.5, width=0.4), CartesianGrid(3, points, 8.0))
        defects.append(gauge_invariance_defect(V, None, wide_bump(), 1.0, 2))
    coarse, fine = defects
    assert 0.0 < coarse < 0.1
    assert fine <= 1.05 * coarse
