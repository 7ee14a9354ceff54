"""
scatlab client - unified async access to the forward and inverse solvers.
"""
import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .averaged import completeness_residual, default_targets, smatrix_via_representation
from .cache import SMatrixCache, cache_get, cache_key, cache_put
from .forward import LippmannSchwinger, far_field, partialwave_oracle, scattering_matrix
from .inverse import dtn_radial, fourier_difference, scenario_uniqueness
from .magnetic import gauge_invariance_defect, materialize
from .models import (
    CartesianGrid,
    CompletenessReport,
    DirectionGrid,
    DtnMap,
    FarField,
    FourierReconstruction,
    GaugeFunction,
    PartialWaveResult,
    PotentialSpec,
    SampledField,
    ScatteringMatrix,
    UniquenessReport,
)
from .potentials import spec_hash, validate_decay

logger = logging.getLogger(__name__)


class ScatteringLab:
    """
    Main client for scatlab providing unified access to the solvers.

    Blocking solves run on a thread pool so several potentials or energies can be processed
    concurrently with asyncio.gather:
    - Forward scattering (far fields, S-matrices, partial-wave oracle)
    - Averaged solutions and completeness
    - Gauge checks
    - Uniqueness scenarios, CGO reconstruction and DtN maps
    """

    def __init__(
        self,
        grid: CartesianGrid,
        cache_dir: Optional[str] = None,
        max_workers: Optional[int] = None,
        **solver_options,
    ):
        """
        Initialize the lab.

        Args:
            grid: Sampling grid shared by every experiment
            cache_dir: Optional S-matrix cache directory
            max_workers: Threads running blocking solves
            **solver_options: Passed to LippmannSchwinger
        """
        self.grid = grid
        self.solver_options = solver_options
        self.cache = SMatrixCache(cache_dir) if cache_dir else None
        self._executor = ThreadPoolExecutor(max_workers=max_workers)
        self._materialized: Dict[str, Tuple[SampledField, Optional[SampledField]]] = {}

    async def __aenter__(self) -> "ScatteringLab":
        return self

    async def __aexit__(self, *exc_info) -> None:
        await self.close()

    async def close(self) -> None:
        self._executor.shutdown(wait=True)

    async def _run(self, fn: Callable, *args, **kwargs) -> Any:
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(self._executor, partial(fn, *args, **kwargs))

    def _sampled(self, spec: PotentialSpec) -> Tuple[SampledField, Optional[SampledField]]:
        key = spec_hash(spec)
        if key not in self._materialized:
            V, A, _ = materialize(spec, self.grid)
            self._materialized[key] = (V, A)
        return self._materialized[key]

    # Forward scattering
    async def far_field(self, spec: PotentialSpec, energy: float, dirs: DirectionGrid) -> FarField:
        """Scattering amplitude on every pair of nodes of a direction grid."""
        V, A = await self._run(self._sampled, spec)
        return await self._run(far_field, V, A, energy, dirs, **self.solver_options)

    async def scattering_matrix(self, spec: PotentialSpec, energy: float, degree: int) -> ScatteringMatrix:
        """S(E) in the harmonic basis, served from the cache when one is configured."""
        key = cache_key([spec], energy, self.grid, degree, "farfield", solver=self.solver_options)
        cached = cache_get(self.cache, key)
        if cached is not None:
            return cached
        V, A = await self._run(self._sampled, spec)
        S = await self._run(scattering_matrix, V, A, energy, degree, **self.solver_options)
        cache_put(self.cache, key, S)
        return S

    async def scattering_matrices(
        self, spec: PotentialSpec, energies: Sequence[float], degree: int
    ) -> List[ScatteringMatrix]:
        """S(E) at several energies, solved concurrently."""
        await self._run(self._sampled, spec)
        return list(await asyncio.gather(*(self.scattering_matrix(spec, E, degree) for E in energies)))

    async def representation_matrix(self, spec: PotentialSpec, energy: float, degree: int) -> ScatteringMatrix:
        V, A = await self._run(self._sampled, spec)
        return await self._run(smatrix_via_representation, V, A, energy, degree, **self.solver_options)

    async def partial_waves(self, spec: PotentialSpec, energy: float, l_max: int) -> PartialWaveResult:
        return await self._run(partialwave_oracle, spec, energy, l_max)

    # Averaged solutions
    async def completeness(
        self, spec: PotentialSpec, energy: float, radius: float, degrees: Sequence[int]
    ) -> CompletenessReport:
        """Projection residuals of the default targets on a ball."""
        V, A = await self._run(self._sampled, spec)

        def work() -> CompletenessReport:
            ls = LippmannSchwinger(V, A, energy, **self.solver_options)
            targets = default_targets(V, A, energy, radius, max(degrees), ls=ls)
            return completeness_residual(V, A, radius, energy, targets, degrees, ls=ls)

        return await self._run(work)

    # Gauge and uniqueness
    async def gauge_defect(self, spec: PotentialSpec, psi: GaugeFunction, energy: float, degree: int) -> float:
        V, A = await self._run(self._sampled, spec)
        return await self._run(gauge_invariance_defect, V, A, psi, energy, degree, **self.solver_options)

    async def uniqueness(
        self, first: PotentialSpec, second: PotentialSpec, energy: float, degree: int, **kwargs
    ) -> UniquenessReport:
        options = {**self.solver_options, **kwargs}
        return await self._run(scenario_uniqueness, first, second, energy, self.grid, degree, **options)

    async def reconstruct(
        self,
        first: PotentialSpec,
        second: PotentialSpec,
        energy: float,
        radius: float,
        xi: Optional[np.ndarray] = None,
    ) -> FourierReconstruction:
        (V1, _), (V2, _) = await asyncio.gather(self._run(self._sampled, first), self._run(self._sampled, second))
        return await self._run(fourier_difference, V1, V2, energy, radius, xi)

    async def dtn(self, spec: PotentialSpec, energy: float, radius: float, degree: int) -> DtnMap:
        return await self._run(dtn_radial, spec, energy, radius, degree)

    async def validate(self, specs: Sequence[PotentialSpec]) -> Dict[str, bool]:
        """Decay check of several potentials at once; maps names to pass/fail."""
        reports = await asyncio.gather(*(self._run(validate_decay, s) for s in specs))
        return {s.name: r.passed for s, r in zip(specs, reports)}
