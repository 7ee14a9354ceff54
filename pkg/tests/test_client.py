"""
Tests for the async ScatteringLab client.
"""
import asyncio

import numpy as np
import pytest

from scatlab import Lab, ScatteringLab
from scatlab.models import CartesianGrid, PotentialSpec
from scatlab.numkit import sphere_rule

from .conftest import gaussian_spec, well_spec


@pytest.fixture
def free() -> PotentialSpec:
    return PotentialSpec(dimension=2, name="free")


@pytest.fixture
async def lab(tmp_path):
    async with ScatteringLab(CartesianGrid(2, 32, 8.0), cache_dir=str(tmp_path), method="dense") as client:
        yield client


class TestScatteringLab:
    def test_alias(self):
        assert Lab is ScatteringLab

    async def test_free_scattering_matrix(self, lab, free, tmp_path):
        S = await lab.scattering_matrix(free, 1.0, 2)
        assert np.array_equal(S.matrix, np.eye(5))
        assert len(list(tmp_path.glob("*.npz"))) == 1
        again = await lab.scattering_matrix(free, 1.0, 2)
        assert np.array_equal(again.matrix, S.matrix)

    async def test_energies_solved_concurrently(self, lab):
        spec = gaussian_spec(2)
        matrices = await lab.scattering_matrices(spec, [0.5, 1.0, 2.0], 1)
        assert [S.energy for S in matrices] == [0.5, 1.0, 2.0]
        assert all(S.matrix.shape == (3, 3) for S in matrices)
        assert len(lab._materialized) == 1

    async def test_far_field_of_free_potential(self, lab, free):
        ff = await lab.far_field(free, 1.0, sphere_rule(2, 3))
        assert not np.any(ff.values)

    async def test_validate_many(self, lab):
        specs = [gaussian_spec(2, name="tight"), gaussian_spec(2, amplitude=-1e3, width=2.0, name="wide")]
        assert await lab.validate(specs) == {"tight": True, "wide": False}

    async def test_radial_tools(self, lab):
        oracle, dtn = await asyncio.gather(
            lab.partial_waves(well_spec(3), 1.0, 2),
            lab.dtn(well_spec(3, value=0.0), 1.0, 1.3, 1),
        )
        assert len(oracle.phase_shifts) == 3
        assert dtn.diagonal.shape == (2,)
