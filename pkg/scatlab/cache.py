"""
Content-addressed on-disk cache of scattering matrices.
"""
import fcntl
import hashlib
import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .exceptions import CacheError
from .models import CartesianGrid, PotentialSpec, ScatteringMatrix
from .potentials import spec_to_dict

logger = logging.getLogger(__name__)

# Solver options that change the computed matrix (workers and warning levels do not)
SOLVER_KEYS = ("method", "tol", "restart", "maxiter", "support_rtol")

# Bumped whenever the entry layout or any S-matrix convention changes
CACHE_VERSION = f"2:{__version__}"


def cache_key(
    potentials: Sequence[PotentialSpec],
    energy: float,
    grid: CartesianGrid,
    degree: int,
    path: str = "farfield",
    version: str = CACHE_VERSION,
    directions_degree: Optional[int] = None,
    solver: Optional[Dict[str, Any]] = None,
) -> str:
    """
    sha256 of the canonical JSON of everything that determines an S-matrix.

    directions_degree is the far-field quadrature degree (None for the solver default);
    solver holds LippmannSchwinger options, of which only SOLVER_KEYS enter the key.
    """
    solver = solver or {}
    options = {k: solver[k] for k in SOLVER_KEYS if k in solver}
    payload = {
        "potentials": [spec_to_dict(p) for p in potentials],
        "energy": float(energy),
        "grid": {"dimension": grid.dimension, "points": grid.points, "side": float(grid.side)},
        "degree": int(degree),
        "path": path,
        "version": version,
        "directions_degree": None if directions_degree is None else int(directions_degree),
        "solver": options,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class SMatrixCache:
    """
    Directory of `.npz` entries, one per key, each guarded by a sibling `.lock` file.

    Entries written by another cache version are ignored. Unreadable entries are logged,
    removed and reported as misses.
    """

    def __init__(self, directory: Union[str, Path], version: str = CACHE_VERSION):
        self.directory = Path(directory)
        self.version = version

    def _entry(self, key: str) -> Path:
        return self.directory / f"{key}.npz"

    @contextmanager
    def _locked(self, key: str) -> Iterator[None]:
        self.directory.mkdir(parents=True, exist_ok=True)
        with open(self.directory / f"{key}.lock", "a") as handle:
            fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(handle.fileno(), fcntl.LOCK_UN)

    def _read(self, path: Path) -> Tuple[Dict[str, Any], np.ndarray]:
        try:
            with np.load(path, allow_pickle=False) as data:
                meta = json.loads(str(data["meta"]))
                matrix = np.array(data["matrix"])
        except Exception as exc:
            raise CacheError(f"cannot read cache entry {path.name}: {exc}") from exc
        return meta, matrix

    def get(self, key: str) -> Optional[ScatteringMatrix]:
        path = self._entry(key)
        if not path.exists():
            return None
        with self._locked(key):
            try:
                meta, matrix = self._read(path)
            except CacheError as exc:
                logger.warning(f"{exc}; recomputing")
                path.unlink(missing_ok=True)
                return None
        if meta.get("version") != self.version:
            logger.info(f"Ignoring cache entry {key[:12]} from version {meta.get('version')}")
            return None
        logger.debug(f"Cache hit {key[:12]}")
        return ScatteringMatrix(
            energy=meta["energy"],
            dimension=meta["dimension"],
            degree=meta["degree"],
            matrix=matrix,
            path=meta["path"],
            basis=meta["basis"],
            unitarity_defect=meta["unitarity_defect"],
        )

    def put(self, key: str, smatrix: ScatteringMatrix) -> Path:
        meta: Dict[str, Any] = {
            "version": self.version,
            "energy": smatrix.energy,
            "dimension": smatrix.dimension,
            "degree": smatrix.degree,
            "path": smatrix.path,
            "basis": smatrix.basis,
            "unitarity_defect": smatrix.unitarity_defect,
        }
        path = self._entry(key)
        tmp = path.with_name(f"{key}.{os.getpid()}.tmp.npz")
        with self._locked(key):
            np.savez(tmp, matrix=np.asarray(smatrix.matrix, dtype=complex), meta=np.array(json.dumps(meta, sort_keys=True)))
            os.replace(tmp, path)
        return path


def cache_get(cache: Optional[SMatrixCache], key: str) -> Optional[ScatteringMatrix]:
    """Look up an S-matrix; a disabled cache (None) always misses."""
    return None if cache is None else cache.get(key)


def cache_put(cache: Optional[SMatrixCache], key: str, smatrix: ScatteringMatrix) -> None:
    if cache is not None:
        cache.put(key, smatrix)
