"""
Tests for the S-matrix cache.
"""
import numpy as np
import pytest

from scatlab.cache import SMatrixCache, cache_get, cache_key, cache_put
from scatlab.models import CartesianGrid, ScatteringMatrix

from .conftest import gaussian_spec


@pytest.fixture
def smatrix() -> ScatteringMatrix:
    matrix = np.diag(np.exp(2j * np.array([0.3, 0.1, 0.1])))
    return ScatteringMatrix(1.0, 2, 1, matrix, "farfield", "harmonic", 2e-16)


@pytest.fixture
def key() -> str:
    return cache_key([gaussian_spec(2)], 1.0, CartesianGrid(2, 64, 8.0), 1)


class TestCacheKey:
    def test_stable(self, key):
        assert key == cache_key([gaussian_spec(2)], 1.0, CartesianGrid(2, 64, 8.0), 1)
        assert len(key) == 64

    @pytest.mark.parametrize(
        "changed",
        [
            dict(energy=1.5),
            dict(degree=2),
            dict(path="representation"),
            dict(version="0:test"),
            dict(grid=CartesianGrid(2, 32, 8.0)),
            dict(potentials=[gaussian_spec(2, amplitude=-1.0)]),
            dict(directions_degree=6),
            dict(solver={"method": "gmres"}),
            dict(solver={"tol": 1e-6}),
            dict(solver={"support_rtol": 1e-6}),
        ],
    )
    def test_sensitive_to_inputs(self, key, changed):
        arguments = dict(potentials=[gaussian_spec(2)], energy=1.0, grid=CartesianGrid(2, 64, 8.0), degree=1)
        arguments.update(changed)
        assert cache_key(**arguments) != key

    def test_execution_options_do_not_change_key(self, key):
        solver = {"workers": 4, "unitarity_warn": 1e-2}
        assert cache_key([gaussian_spec(2)], 1.0, CartesianGrid(2, 64, 8.0), 1, solver=solver) == key

    def test_name_changes_key(self, key):
        other = cache_key([gaussian_spec(2, name="renamed")], 1.0, CartesianGrid(2, 64, 8.0), 1)
        assert other != key


class TestSMatrixCache:
    def test_round_trip(self, tmp_path, key, smatrix):
        cache = SMatrixCache(tmp_path / "entries")
        assert cache.get(key) is None
        path = cache.put(key, smatrix)
        assert path.name == f"{key}.npz"
        restored = cache.get(key)
        assert np.array_equal(restored.matrix, smatrix.matrix)
        assert restored.path == "farfield"
        assert restored.unitarity_defect == smatrix.unitarity_defect
        assert not list((tmp_path / "entries").glob("*.tmp.npz"))

    def test_other_version_ignored(self, tmp_path, key, smatrix):
        SMatrixCache(tmp_path, version="0:old").put(key, smatrix)
        assert SMatrixCache(tmp_path).get(key) is None

    def test_corrupt_entry_removed(self, tmp_path, key, caplog):
        cache = SMatrixCache(tmp_path)
        entry = tmp_path / f"{key}.npz"
        entry.write_bytes(b"not an archive")
        assert cache.get(key) is None
        assert not entry.exists()
        assert "recomputing" in caplog.text

    def test_disabled_cache(self, key, smatrix):
        cache_put(None, key, smatrix)
        assert cache_get(None, key) is None
