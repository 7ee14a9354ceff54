"""
Tests for the Lippmann-Schwinger solver, far fields, scattering matrices and the radial oracle.
"""
import numpy as np
import pytest

from scatlab.exceptions import DomainError, IndexRangeError, SupportMarginError
from scatlab.forward import (
    LippmannSchwinger,
    RadialSolution,
    born_far_field,
    equation_residual,
    far_field,
    optical_theorem_defect,
    oracle_field,
    partialwave_oracle,
    plane_wave,
    reciprocity_defect,
    scattering_matrix,
    scattering_solution,
    smatrix_from_farfield,
    trace_values,
    unitarity_defect,
)
from scatlab.models import CartesianGrid, SampledField
from scatlab.numkit import sphere_rule
from scatlab.potentials import sample

from .conftest import gaussian_spec, well_spec

ENERGY = 1.0


@pytest.fixture(scope="module")
def plane_grid() -> CartesianGrid:
    return CartesianGrid(2, 64, 8.0)


@pytest.fixture(scope="module")
def plane_spec():
    return gaussian_spec(2)


@pytest.fixture(scope="module")
def plane_solver(plane_grid, plane_spec) -> LippmannSchwinger:
    V, _ = sample(plane_spec, plane_grid)
    return LippmannSchwinger(V, None, ENERGY, method="dense")


@pytest.fixture(scope="module")
def plane_dirs():
    return sphere_rule(2, 10)


@pytest.fixture(scope="module")
def plane_far_field(plane_solver, plane_dirs):
    return far_field(None, None, ENERGY, plane_dirs, ls=plane_solver)


class TestPlaneScattering:
    def test_far_field_matches_partial_waves(self, plane_far_field, plane_spec, plane_dirs):
        oracle = partialwave_oracle(plane_spec, ENERGY, 12, plane_dirs)
        error = np.linalg.norm(plane_far_field.values - oracle.far_field.values)
        assert error <= 1e-3 * np.linalg.norm(oracle.far_field.values)

    def test_scattering_matrix_matches_phase_shifts(self, plane_solver, plane_spec, plane_dirs):
        S = scattering_matrix(None, None, ENERGY, 4, dirs=plane_dirs, ls=plane_solver)
        oracle = partialwave_oracle(plane_spec, ENERGY, 4)
        assert S.matrix.shape == (9, 9)
        assert np.max(np.abs(S.matrix - oracle.smatrix.matrix)) < 1e-3
        assert S.unitarity_defect < 1e-4
        assert S.path == "farfield"

    def test_reciprocity(self, plane_far_field):
        assert reciprocity_defect(plane_far_field) < 1e-8

    def test_total_field_matches_oracle_outside_support(self, plane_solver, plane_spec, plane_grid):
        solution = plane_solver.solve_plane_waves(np.array([[1.0, 0.0]]))[0]
        r = plane_grid.radius()
        ring = (r > 2.0) & (r < 3.5)
        oracle = partialwave_oracle(plane_spec, ENERGY, 12)
        expected = oracle_field(oracle, plane_grid.coordinates()[ring], np.array([1.0, 0.0]))
        error = np.max(np.abs(solution.field.values[ring] - expected))
        assert error <= 1e-3 * np.max(np.abs(expected))

    def test_solution_satisfies_the_equation(self, plane_solver, plane_grid, plane_spec):
        V, _ = sample(plane_spec, plane_grid)
        solution = plane_solver.solve_plane_waves(np.array([[0.6, 0.8]]))[0]
        assert solution.residual < 1e-10
        assert solution.monitor["method"] == "dense"
        assert equation_residual(solution, V, None) < 1e-4

    def test_born_limit(self, plane_grid, plane_dirs):
        V, _ = sample(gaussian_spec(2, amplitude=1e-3), plane_grid)
        exact = far_field(V, None, ENERGY, plane_dirs, method="dense")
        born = born_far_field(V, ENERGY, plane_dirs)
        assert np.linalg.norm(born.values - exact.values) <= 1e-2 * np.linalg.norm(exact.values)

    def test_degree_beyond_grid_resolution(self, plane_far_field):
        with pytest.raises(IndexRangeError):
            smatrix_from_farfield(plane_far_field, degree=6)


class TestFreeScattering:
    @pytest.fixture
    def V0(self, grid2) -> SampledField:
        return SampledField(grid2, np.zeros(grid2.shape), "V")

    def test_identity_scattering_matrix(self, V0):
        S = scattering_matrix(V0, None, ENERGY, 3)
        assert np.array_equal(S.matrix, np.eye(7))
        assert S.unitarity_defect == 0.0

    def test_zero_far_field(self, V0):
        ff = far_field(V0, None, ENERGY, sphere_rule(2, 4))
        assert not np.any(ff.values)

    def test_field_is_incident_wave(self, V0, grid2):
        omega = np.array([0.0, 1.0])
        solution = scattering_solution(V0, None, omega, ENERGY)
        incident, _ = plane_wave(grid2.coordinates(), omega, 1.0)
        assert np.allclose(solution.field.values, incident)
        assert solution.residual == 0.0

    def test_zero_trace(self, V0):
        assert not np.any(trace_values(ENERGY, V0, sphere_rule(2, 2).nodes))


class TestSolverOptions:
    def test_unknown_method(self, grid2, gaussian2):
        V, _ = sample(gaussian2, grid2)
        with pytest.raises(DomainError):
            LippmannSchwinger(V, None, ENERGY, method="lu")

    def test_wide_potential_refused(self, grid2):
        V, _ = sample(gaussian_spec(2, width=1.0), grid2)
        with pytest.raises(SupportMarginError):
            LippmannSchwinger(V, None, ENERGY)

    def test_support_tolerance_passed_through(self, grid2):
        V, _ = sample(gaussian_spec(2, width=0.8), grid2)
        with pytest.raises(SupportMarginError):
            LippmannSchwinger(V, None, ENERGY)
        ls = LippmannSchwinger(V, None, ENERGY, support_rtol=1e-3)
        assert ls.support_rtol == 1e-3
        assert ls.size > 0

    def test_unitarity_warning_level(self, grid2, weak_gaussian2, caplog):
        V, _ = sample(weak_gaussian2, grid2)
        S = scattering_matrix(V, None, ENERGY, 1, method="dense", unitarity_warn=0.0)
        assert S.unitarity_defect > 0.0
        assert "unitarity defect" in caplog.text

    def test_non_positive_energy(self, grid2, gaussian2):
        V, _ = sample(gaussian2, grid2)
        with pytest.raises(DomainError):
            LippmannSchwinger(V, None, 0.0)


class TestRadialOracle:
    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("l", [0, 1, 3])
    def test_integrated_matches_closed_form(self, n, l):
        spec = well_spec(n)
        ode = RadialSolution(spec, l, ENERGY, 1.0, method="ode")
        exact = RadialSolution(spec, l, ENERGY, 1.0, method="analytic")
        assert ode.log_derivative() == pytest.approx(exact.log_derivative(), rel=1e-7)

    def test_s_wave_phase_shift_of_well(self, well3):
        result = partialwave_oracle(well3, ENERGY, 3)
        k, kappa, a = 1.0, np.sqrt(1.5), 1.0
        expected = (k * np.tan(kappa * a) - kappa * np.tan(k * a)) / (kappa + k * np.tan(k * a) * np.tan(kappa * a))
        assert np.tan(result.phase_shifts[0]) == pytest.approx(expected, rel=1e-9)
        assert result.radius == 1.0

    def test_oracle_is_unitary_and_diagonal(self, well3):
        result = partialwave_oracle(well3, ENERGY, 4)
        S = result.smatrix.matrix
        assert unitarity_defect(S) <= 1e-12
        assert np.array_equal(S, np.diag(np.diag(S)))

    def test_integrated_oracle_agrees(self, well3):
        analytic = partialwave_oracle(well3, ENERGY, 3, method="analytic")
        integrated = partialwave_oracle(well3, ENERGY, 3, method="ode")
        assert np.allclose(integrated.phase_shifts, analytic.phase_shifts, atol=1e-8)

    def test_closed_form_needs_a_well(self):
        with pytest.raises(DomainError):
            RadialSolution(gaussian_spec(3), 0, ENERGY, 1.0, method="analytic")


@pytest.mark.slow
def test_optical_theorem_in_space():
    grid = CartesianGrid(3, 32, 8.0)
    V, _ = sample(gaussian_spec(3, amplitude=0.5, width=0.4), grid)
    omega = np.array([0.0, 0.0, 1.0])
    defect = optical_theorem_defect(V, None, omega, ENERGY, sphere_rule(3, 8), tol=1e-10, maxiter=200)
    assert defect <= 1e-3
