"""
Tests for the special functions, sphere rules and Green convolution.
"""
import numpy as np
import pytest
from scipy import special

from scatlab.exceptions import (
    DomainError,
    IndexRangeError,
    ShapeMismatchError,
    SingularEvaluationError,
    SupportMarginError,
)
from scatlab.models import CartesianGrid, SampledField
from scatlab.numkit import (
    GreenKernel,
    antipodes,
    check_margin,
    green_gradient,
    harmonic_count,
    harmonic_eval,
    harmonic_indices,
    harmonic_matrix,
    helmholtz_green,
    radial_wave,
    spectral_laplacian,
    sphere_rule,
    truncated_green_symbol,
    volume_convolve,
    wavenumber,
)

from .conftest import gaussian_field


class TestGreenFunction:
    def test_wavenumber_rejects_non_positive_energy(self):
        assert wavenumber(4.0) == pytest.approx(2.0)
        with pytest.raises(DomainError):
            wavenumber(0.0)
        with pytest.raises(DomainError):
            wavenumber(-1.0)

    def test_coincident_points_are_singular(self):
        x = np.zeros(3)
        with pytest.raises(SingularEvaluationError):
            helmholtz_green(x, x, 1.0, 3)

    @pytest.mark.parametrize("offset", [1e-12, 1e-11])
    def test_nearly_coincident_points_are_singular(self, offset):
        x = np.array([1.0, 2.0, 2.0])
        y = x + np.array([offset, 0.0, 0.0])
        with pytest.raises(SingularEvaluationError) as info:
            helmholtz_green(x, y, 1.0, 3)
        assert info.value.record["separation"] <= 3e-10
        with pytest.raises(SingularEvaluationError):
            green_gradient(y[None, :2], x[None, :2], 1.0, 2)

    def test_three_dimensional_closed_form(self):
        x = np.array([1.0, 2.0, 2.0])
        value = helmholtz_green(x, np.zeros(3), 4.0, 3)
        assert value == pytest.approx(np.exp(6j) / (12.0 * np.pi), rel=1e-13)

    @pytest.mark.parametrize("n", [2, 3])
    def test_symmetric_in_its_arguments(self, n, rng):
        x, y = rng.normal(size=(2, 5, n))
        assert np.allclose(helmholtz_green(x, y, 2.0, n), helmholtz_green(y, x, 2.0, n), rtol=0, atol=0)

    def test_plane_green_far_asymptotics(self):
        r = 200.0
        value = helmholtz_green(np.array([r, 0.0]), np.zeros(2), 1.0, 2)
        asymptotic = 0.25j * np.sqrt(2.0 / (np.pi * r)) * np.exp(1j * (r - np.pi / 4))
        assert abs(value - asymptotic) <= 2e-3 * abs(asymptotic)

    def test_plane_green_logarithmic_near_source(self):
        r = 1e-3
        value = helmholtz_green(np.array([0.0, r]), np.zeros(2), 1.0, 2)
        expected = 0.25j * (1.0 + 2j / np.pi * (np.log(r / 2.0) + np.euler_gamma))
        assert abs(value - expected) < 1e-5


class TestSphereRule:
    def test_plane_rule_of_degree_zero(self):
        dirs = sphere_rule(2, 0)
        assert dirs.size == 2
        assert np.allclose(dirs.weights, np.pi)

    @pytest.mark.parametrize("n,area", [(2, 2 * np.pi), (3, 4 * np.pi)])
    @pytest.mark.parametrize("L", [0, 3, 10])
    def test_weights_sum_to_sphere_area(self, n, area, L):
        dirs = sphere_rule(n, L)
        assert dirs.weights.sum() == pytest.approx(area, rel=1e-12)
        assert np.allclose(np.linalg.norm(dirs.nodes, axis=1), 1.0, atol=1e-14)

    @pytest.mark.parametrize("n", [2, 3])
    def test_harmonics_orthonormal_under_rule(self, n):
        L = 4
        dirs = sphere_rule(n, L)
        Y = harmonic_matrix(n, L, dirs.nodes)
        gram = Y.conj().T @ (dirs.weights[:, None] * Y)
        assert np.allclose(gram, np.eye(harmonic_count(n, L)), atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3])
    def test_rule_closed_under_antipodes(self, n):
        dirs = sphere_rule(n, 5)
        idx = antipodes(dirs)
        assert np.allclose(dirs.nodes[idx], -dirs.nodes, atol=1e-12)

    def test_negative_degree_rejected(self):
        with pytest.raises(IndexRangeError):
            sphere_rule(3, -1)
        with pytest.raises(DomainError):
            sphere_rule(4, 2)


class TestHarmonics:
    def test_plane_ordering(self):
        assert harmonic_indices(2, 2) == [(0, 0), (1, -1), (1, 1), (2, -2), (2, 2)]
        assert harmonic_count(2, 5) == len(harmonic_indices(2, 5)) == 11

    def test_space_ordering_and_count(self):
        labels = harmonic_indices(3, 3)
        assert labels[:4] == [(0, 0), (1, -1), (1, 0), (1, 1)]
        assert len(labels) == harmonic_count(3, 3) == 16

    def test_constant_harmonic(self, rng):
        nu = rng.normal(size=(7, 3))
        nu /= np.linalg.norm(nu, axis=1, keepdims=True)
        assert np.allclose(harmonic_eval(3, 0, 0, nu), 1.0 / np.sqrt(4.0 * np.pi))

    def test_plane_harmonic(self):
        theta = 0.7
        nu = np.array([np.cos(theta), np.sin(theta)])
        assert harmonic_eval(2, 3, 3, nu) == pytest.approx(np.exp(3j * theta) / np.sqrt(2 * np.pi))

    def test_addition_theorem(self, rng):
        L = 5
        a, b = rng.normal(size=(2, 3))
        a /= np.linalg.norm(a)
        b /= np.linalg.norm(b)
        Ya = harmonic_matrix(3, L, a[None])[0]
        Yb = harmonic_matrix(3, L, b[None])[0]
        offset = 0
        for l in range(L + 1):
            block = slice(offset, offset + 2 * l + 1)
            total = np.sum(Ya[block] * np.conj(Yb[block]))
            expected = (2 * l + 1) / (4 * np.pi) * special.eval_legendre(l, a @ b)
            assert total == pytest.approx(expected, abs=1e-12)
            offset += 2 * l + 1

    def test_index_out_of_range(self):
        with pytest.raises(IndexRangeError):
            harmonic_eval(3, 1, 2, np.array([0.0, 0.0, 1.0]))
        with pytest.raises(IndexRangeError):
            harmonic_indices(3, -1)

    def test_wrong_vector_length(self):
        with pytest.raises(ShapeMismatchError):
            harmonic_eval(3, 0, 0, np.ones(2))


class TestRadialWaves:
    def test_spherical_closed_forms(self):
        z = np.array([0.3, 2.0, 11.0])
        assert np.allclose(radial_wave(3, 0, "regular", z), np.sin(z) / z)
        assert np.allclose(radial_wave(3, 0, "outgoing", z), -1j * np.exp(1j * z) / z)

    @pytest.mark.parametrize("z", [0.5, 5.0, 50.0])
    @pytest.mark.parametrize("l", [0, 3])
    def test_spherical_wronskian(self, z, l):
        j = radial_wave(3, l, "regular", z)
        dj = radial_wave(3, l, "regular", z, derivative=True)
        h = radial_wave(3, l, "outgoing", z)
        dh = radial_wave(3, l, "outgoing", z, derivative=True)
        assert j * dh - dj * h == pytest.approx(1j / z ** 2, rel=1e-10)

    @pytest.mark.parametrize("z", [0.5, 5.0, 50.0])
    def test_cylindrical_wronskian(self, z):
        J = radial_wave(2, 2, "regular", z)
        dJ = radial_wave(2, 2, "regular", z, derivative=True)
        H = radial_wave(2, 2, "outgoing", z)
        dH = radial_wave(2, 2, "outgoing", z, derivative=True)
        assert J * dH - dJ * H == pytest.approx(2j / (np.pi * z), rel=1e-10)

    def test_invalid_arguments(self):
        with pytest.raises(DomainError):
            radial_wave(3, 0, "standing", 1.0)
        with pytest.raises(DomainError):
            radial_wave(3, 0, "outgoing", 0.0)


class TestSpectralCalculus:
    def test_laplacian_of_gaussian(self, grid2):
        f = gaussian_field(grid2, 0.5).values
        r2 = grid2.radius() ** 2
        expected = (64.0 * r2 - 16.0) * np.exp(-4.0 * r2)
        assert np.allclose(spectral_laplacian(f, grid2).real, expected, atol=1e-8)


class TestMargin:
    def test_compact_field_passes(self, grid2):
        check_margin(gaussian_field(grid2, 0.3))

    def test_wide_field_rejected_with_record(self, grid2):
        with pytest.raises(SupportMarginError) as info:
            check_margin(gaussian_field(grid2, 1.5, role="V"))
        assert info.value.record["role"] == "V"
        assert info.value.record["extent"] > info.value.record["allowed"]

    def test_zero_field_passes(self, grid2):
        check_margin(SampledField(grid2, np.zeros(grid2.shape), "V"))


class TestTruncatedSymbol:
    def test_origin_limit(self):
        k, L = 1.3, 7.0
        small = truncated_green_symbol(3, k, L, np.array([1e-5]))[0]
        origin = truncated_green_symbol(3, k, L, np.array([0.0]))[0]
        assert small == pytest.approx(origin, rel=1e-6)

    @pytest.mark.parametrize("n", [2, 3])
    def test_continuous_across_shell(self, n):
        k, L = 1.0, 11.0
        delta = 1e-4
        values = truncated_green_symbol(n, k, L, np.array([k - delta, k, k + delta]))
        assert values[1] == pytest.approx(0.5 * (values[0] + values[2]), rel=1e-3)


class TestVolumeConvolve:
    def test_spatial_closed_form_outside_source(self):
        grid = CartesianGrid(3, 48, 8.0)
        w, k = 0.4, 1.0
        u = volume_convolve(1.0, gaussian_field(grid, w)).values
        assert np.allclose(grid.coordinates()[42, 24, 24], [3.0, 0.0, 0.0])
        mass = np.pi ** 1.5 * w ** 3 * np.exp(-k ** 2 * w ** 2 / 4)
        expected = np.exp(3j * k) / (4 * np.pi * 3.0) * mass
        assert u[42, 24, 24] == pytest.approx(expected, rel=1e-4)

    def test_plane_closed_form_outside_source(self, grid2):
        w, k = 0.4, 1.0
        u = volume_convolve(1.0, gaussian_field(grid2, w)).values
        assert np.allclose(grid2.coordinates()[56, 32], [3.0, 0.0])
        mass = np.pi * w ** 2 * np.exp(-k ** 2 * w ** 2 / 4)
        expected = 0.25j * special.hankel1(0, 3.0 * k) * mass
        assert u[56, 32] == pytest.approx(expected, rel=1e-4)

    def test_inverts_helmholtz_operator(self, grid2):
        f = gaussian_field(grid2, 0.5).values
        out = GreenKernel(grid2, 1.0).apply_operator(f)
        assert np.max(np.abs(out - f)) <= 1e-8 * np.max(np.abs(f))

    def test_linear_and_translation_equivariant(self, grid2):
        f = gaussian_field(grid2, 0.3)
        g = SampledField(grid2, np.roll(f.values, 1, axis=0), "source")
        u = volume_convolve(1.0, f).values
        v = volume_convolve(1.0, g).values
        both = volume_convolve(1.0, SampledField(grid2, 2.0 * f.values + g.values, "source")).values
        scale = np.max(np.abs(u))
        assert np.max(np.abs(both - 2.0 * u - v)) <= 1e-12 * scale
        assert np.max(np.abs(v[1:] - u[:-1])) <= 1e-12 * scale

    def test_zero_source(self, grid2):
        u = volume_convolve(1.0, SampledField(grid2, np.zeros(grid2.shape), "source"))
        assert not np.any(u.values)

    def test_vector_source_rejected(self, grid2):
        field = SampledField(grid2, np.zeros((2,) + grid2.shape), "A")
        with pytest.raises(ShapeMismatchError):
            volume_convolve(1.0, field)

    def test_padding_factor_checked(self, grid2):
        with pytest.raises(DomainError):
            GreenKernel(grid2, 1.0, pad=2)
