"""
Special functions, sphere quadrature and Green-kernel convolution shared by all solvers.

Units are hbar = 2m = 1, so H0 = -Laplacian and k = sqrt(E). Spherical harmonics are the
complex ones with the Condon-Shortley phase, conj(Y_l^m) = (-1)^m Y_l^{-m}; in the plane the
basis is e^{i m theta} / sqrt(2 pi).
"""
import logging
from functools import lru_cache
from typing import List, Tuple, Union

import numpy as np
from scipy import fft as spfft
from scipy import special

from .exceptions import DomainError, IndexRangeError, ShapeMismatchError, SingularEvaluationError, SupportMarginError
from .models import CartesianGrid, DirectionGrid, SampledField

try:
    from scipy.special import sph_harm_y as _sph_harm_y
except ImportError:  # scipy < 1.15
    _sph_harm_y = None
    from scipy.special import sph_harm as _sph_harm

logger = logging.getLogger(__name__)

SPHERE_AREA = {2: 2.0 * np.pi, 3: 4.0 * np.pi}

# Relative level below which sampled values count as outside the support
SUPPORT_RTOL = 1e-9

# Separations at or below this fraction of max(|x|, |y|, 1/k) count as coincident
COINCIDENT_RTOL = 1e-10

# Half-width of the window around s = k where the 2D symbol is interpolated
_NEAR_SHELL = 1e-6

ArrayLike = Union[float, np.ndarray]


def wavenumber(energy: float) -> float:
    """Return k = sqrt(E), refusing non-positive energies."""
    if not energy > 0:
        raise DomainError(f"energy must be positive, got {energy}")
    return float(np.sqrt(energy))


def _check_dimension(n: int) -> None:
    if n not in (2, 3):
        raise DomainError(f"dimension must be 2 or 3, got {n}")


def green_radial(r: ArrayLike, k: float, n: int) -> np.ndarray:
    """Outgoing free Green function as a function of distance."""
    r = np.asarray(r, dtype=float)
    if n == 3:
        return np.exp(1j * k * r) / (4.0 * np.pi * r)
    return 0.25j * special.hankel1(0, k * r)


def green_radial_derivative(r: ArrayLike, k: float, n: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if n == 3:
        return (1j * k - 1.0 / r) * np.exp(1j * k * r) / (4.0 * np.pi * r)
    return -0.25j * k * special.hankel1(1, k * r)


def _separation(x: np.ndarray, y: np.ndarray, k: float, what: str) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = np.linalg.norm(d, axis=-1)
    scale = np.maximum(np.maximum(np.linalg.norm(x, axis=-1), np.linalg.norm(y, axis=-1)), 1.0 / k)
    close = r <= COINCIDENT_RTOL * scale
    if np.any(close):
        raise SingularEvaluationError(
            f"{what} evaluated at coincident points",
            record={"separation": float(np.min(r[close] if np.ndim(r) else r))},
        )
    return d, r


def helmholtz_green(x: np.ndarray, y: np.ndarray, energy: float, n: int) -> np.ndarray:
    """
    Evaluate the outgoing Green function of -Laplacian - E.

    Args:
        x: Points of shape (..., n)
        y: Points of shape (..., n), broadcast against x
        energy: Energy E > 0
        n: Dimension, 2 or 3

    Returns:
        e^{ikr}/(4 pi r) for n=3, (i/4) H0(kr) for n=2, with r = |x - y|
    """
    _check_dimension(n)
    k = wavenumber(energy)
    _, r = _separation(x, y, k, "Green function")
    return green_radial(r, k, n)


def green_gradient(x: np.ndarray, y: np.ndarray, energy: float, n: int) -> np.ndarray:
    """Gradient in x of the outgoing Green function; components on the last axis."""
    _check_dimension(n)
    k = wavenumber(energy)
    d, r = _separation(x, y, k, "Green gradient")
    return (green_radial_derivative(r, k, n) / r)[..., None] * d


def sphere_rule(n: int, L: int) -> DirectionGrid:
    """
    Quadrature rule on the unit sphere exact for harmonic products of total degree 2L.

    n=2 uses 2L+2 equispaced angles. n=3 uses L+1 Gauss-Legendre nodes in cos(polar) times
    2L+2 equispaced azimuths. Both rules contain the antipode of every node.
    """
    _check_dimension(n)
    if L < 0:
        raise IndexRangeError(f"quadrature degree must be >= 0, got {L}")
    q = 2 * L + 2
    azimuth = 2.0 * np.pi * np.arange(q) / q
    if n == 2:
        nodes = np.stack([np.cos(azimuth), np.sin(azimuth)], axis=-1)
        weights = np.full(q, 2.0 * np.pi / q)
        return DirectionGrid(dimension=2, nodes=nodes, weights=weights, degree=L)

    mu, w = special.roots_legendre(L + 1)
    sin_polar = np.sqrt(1.0 - mu ** 2)
    nodes = np.stack(
        [
            np.outer(sin_polar, np.cos(azimuth)).ravel(),
            np.outer(sin_polar, np.sin(azimuth)).ravel(),
            np.repeat(mu, q),
        ],
        axis=-1,
    )
    weights = np.outer(w, np.full(q, 2.0 * np.pi / q)).ravel()
    return DirectionGrid(dimension=3, nodes=nodes, weights=weights, degree=L)


def antipodes(dirs: DirectionGrid) -> np.ndarray:
    """Index of -omega_q for every node omega_q of a rule that contains antipodes."""
    gram = dirs.nodes @ dirs.nodes.T
    idx = np.argmin(gram, axis=1)
    if not np.allclose(dirs.nodes[idx], -dirs.nodes, atol=1e-12):
        raise IndexRangeError("direction grid is not closed under antipodes")
    return idx


def harmonic_indices(n: int, L: int) -> List[Tuple[int, int]]:
    """Basis labels ordered by degree: (l, m) in 3D, (|m|, m) with m = 0, -1, 1, ... in 2D."""
    _check_dimension(n)
    if L < 0:
        raise IndexRangeError(f"harmonic degree must be >= 0, got {L}")
    if n == 3:
        return [(l, m) for l in range(L + 1) for m in range(-l, l + 1)]
    out = [(0, 0)]
    for m in range(1, L + 1):
        out.extend([(m, -m), (m, m)])
    return out


def harmonic_count(n: int, L: int) -> int:
    return (L + 1) ** 2 if n == 3 else 2 * L + 1


def harmonic_eval(n: int, l: int, m: int, nu: np.ndarray) -> np.ndarray:
    """
    Evaluate the orthonormal harmonic labelled (l, m) at unit vectors nu of shape (..., n).

    In 2D the label l is ignored and the value is e^{i m theta}/sqrt(2 pi).
    """
    _check_dimension(n)
    nu = np.asarray(nu, dtype=float)
    if nu.shape[-1] != n:
        raise ShapeMismatchError(f"expected vectors of length {n}, got shape {nu.shape}")
    if int(m) != m:
        raise IndexRangeError(f"harmonic index m must be an integer, got {m}")
    azimuth = np.arctan2(nu[..., 1], nu[..., 0])
    if n == 2:
        return np.exp(1j * m * azimuth) / np.sqrt(2.0 * np.pi)
    if l < 0 or abs(m) > l:
        raise IndexRangeError(f"harmonic index out of range: l={l}, m={m}")
    norm = np.linalg.norm(nu, axis=-1)
    polar = np.arccos(np.clip(nu[..., 2] / np.where(norm > 0, norm, 1.0), -1.0, 1.0))
    if _sph_harm_y is not None:
        return _sph_harm_y(l, m, polar, azimuth)
    return _sph_harm(m, l, azimuth, polar)


def harmonic_matrix(n: int, L: int, nodes: np.ndarray) -> np.ndarray:
    """Matrix Y[q, b] of every basis harmonic up to degree L at every node."""
    return np.stack([harmonic_eval(n, l, m, nodes) for l, m in harmonic_indices(n, L)], axis=-1)


def radial_wave(n: int, l: int, kind: str, z: ArrayLike, derivative: bool = False) -> np.ndarray:
    """
    Regular or outgoing radial wave of order l.

    n=3 gives j_l and h_l^(1) (spherical); n=2 gives J_l and H_l^(1) (cylindrical).
    """
    _check_dimension(n)
    z = np.asarray(z, dtype=float)
    if kind not in ("regular", "outgoing"):
        raise DomainError(f"kind must be 'regular' or 'outgoing', got {kind!r}")
    if kind == "outgoing" and np.any(z <= 0):
        raise DomainError("outgoing radial waves need z > 0")
    if n == 3:
        j = special.spherical_jn(l, z, derivative=derivative)
        if kind == "regular":
            return j + 0j
        return j + 1j * special.spherical_yn(l, z, derivative=derivative)
    if kind == "regular":
        return (special.jvp(l, z) if derivative else special.jv(l, z)) + 0j
    return special.h1vp(l, z) if derivative else special.hankel1(l, z)


def wavenumbers(grid: CartesianGrid) -> np.ndarray:
    return 2.0 * np.pi * spfft.fftfreq(grid.points, d=grid.spacing)


def spectral_derivative(values: np.ndarray, grid: CartesianGrid, axis: int) -> np.ndarray:
    """Spectral derivative along spatial axis `axis` on the periodic box."""
    ax = values.ndim - grid.dimension + axis
    s = wavenumbers(grid)
    s[grid.points // 2] = 0.0
    shape = [1] * values.ndim
    shape[ax] = grid.points
    return spfft.ifft(1j * s.reshape(shape) * spfft.fft(values, axis=ax), axis=ax)


def spectral_gradient(values: np.ndarray, grid: CartesianGrid) -> np.ndarray:
    """Gradient with the derivative index prepended."""
    return np.stack([spectral_derivative(values, grid, j) for j in range(grid.dimension)])


def spectral_divergence(vector: np.ndarray, grid: CartesianGrid) -> np.ndarray:
    """Divergence of a vector field whose first axis holds components."""
    return sum(spectral_derivative(vector[j], grid, j) for j in range(grid.dimension))


def spectral_laplacian(values: np.ndarray, grid: CartesianGrid) -> np.ndarray:
    return sum(
        spectral_derivative(spectral_derivative(values, grid, j), grid, j)
        for j in range(grid.dimension)
    )


def support_mask(values: np.ndarray, n: int, rtol: float = SUPPORT_RTOL) -> np.ndarray:
    """Grid points where any component exceeds rtol times the field maximum."""
    mag = np.abs(values)
    while mag.ndim > n:
        mag = mag.max(axis=0)
    peak = mag.max()
    if peak == 0.0:
        return np.zeros(mag.shape, dtype=bool)
    return mag > rtol * peak


def check_margin(field: SampledField, rtol: float = SUPPORT_RTOL) -> None:
    """Refuse fields whose support leaves the central half of the box."""
    grid = field.grid
    mask = support_mask(field.values, grid.dimension, rtol)
    if not mask.any():
        return
    allowed = 0.25 * grid.side + 1e-9 * grid.spacing
    extent = max(float(np.abs(c[mask]).max()) for c in grid.mesh())
    if extent > allowed:
        raise SupportMarginError(
            f"{field.role} field reaches |x_i| = {extent:.6g}, beyond the margin limit {allowed:.6g}",
            record={"role": field.role, "extent": extent, "allowed": allowed},
        )


def _chord(a: np.ndarray, L: float) -> np.ndarray:
    # (e^{iaL} - 1)/a, stable through a = 0
    return 1j * L * np.exp(0.5j * a * L) * np.sinc(a * L / (2.0 * np.pi))


def truncated_green_symbol(n: int, k: float, L: float, s: np.ndarray) -> np.ndarray:
    """
    Fourier transform of the outgoing Green function truncated to the ball |x| < L.

    The transform is entire in s; the removable singularity on |s| = k is handled by a
    cancellation-free form in 3D and by linear interpolation across a 1e-6 window in 2D.
    """
    s = np.asarray(s, dtype=float)
    out = np.empty(s.shape, dtype=complex)
    if n == 3:
        pos = s > 0
        sp = s[pos]
        out[pos] = -0.5 * (_chord(k + sp, L) - _chord(k - sp, L)) / sp
        out[~pos] = (np.exp(1j * k * L) * (1.0 - 1j * k * L) - 1.0) / k ** 2
        return out

    kL = k * L
    h0 = special.hankel1(0, kL)
    h1 = special.hankel1(1, kL)

    def value(sv: np.ndarray) -> np.ndarray:
        top = 0.5j * np.pi * L * (k * h1 * special.j0(sv * L) - sv * h0 * special.j1(sv * L)) - 1.0
        return top / (k ** 2 - sv ** 2)

    lo, hi = k * (1.0 - _NEAR_SHELL), k * (1.0 + _NEAR_SHELL)
    near = np.abs(s - k) < k * _NEAR_SHELL
    out[~near] = value(s[~near])
    if near.any():
        g_lo, g_hi = value(np.array([lo]))[0], value(np.array([hi]))[0]
        t = (s[near] - lo) / (hi - lo)
        out[near] = (1.0 - t) * g_lo + t * g_hi
    return out


class GreenKernel:
    """
    Truncated outgoing Green kernel applied by zero-padded FFT convolution.

    The kernel is cut off at L = sqrt(n) * side, the box diameter, and the box is padded
    threefold per axis so that periodic images never reach the box.
    """

    def __init__(self, grid: CartesianGrid, energy: float, pad: int = 3):
        if pad < 3:
            raise DomainError(f"padding factor must be >= 3, got {pad}")
        self.grid = grid
        self.energy = energy
        self.k = wavenumber(energy)
        self.pad = pad
        n, N = grid.dimension, grid.points
        M = pad * N
        self.padded_shape = (M,) * n
        self.truncation = np.sqrt(n) * grid.side
        freqs = 2.0 * np.pi * spfft.fftfreq(M, d=grid.spacing)
        axes = np.meshgrid(*([freqs] * n), indexing="ij", sparse=True)
        self._s2 = sum(a ** 2 for a in axes)
        self.symbol = truncated_green_symbol(n, self.k, self.truncation, np.sqrt(self._s2))
        deriv = freqs.copy()
        deriv[M // 2] = 0.0
        self._deriv = []
        for j in range(n):
            shape = [1] * n
            shape[j] = M
            self._deriv.append(1j * deriv.reshape(shape))
        self._box = (Ellipsis,) + (slice(0, N),) * n
        self._axes = tuple(range(-n, 0))
        logger.debug(f"Green kernel ready: n={n}, N={N}, E={energy}, L={self.truncation:.4g}")

    def _spectrum(self, values: np.ndarray) -> np.ndarray:
        n = self.grid.dimension
        if values.shape[values.ndim - n :] != self.grid.shape:
            raise ShapeMismatchError(f"expected trailing shape {self.grid.shape}, got {values.shape}")
        return self.symbol * spfft.fftn(values, s=self.padded_shape, axes=self._axes)

    def convolve(self, values: np.ndarray, gradient: bool = False):
        """
        Return G*values on the box, and also its gradient when requested.

        Leading axes of values are treated as a batch; gradient components are inserted just
        before the spatial axes.
        """
        spec = self._spectrum(values)
        u = spfft.ifftn(spec, axes=self._axes)[self._box]
        if not gradient:
            return u
        grad = np.stack(
            [spfft.ifftn(d * spec, axes=self._axes)[self._box] for d in self._deriv],
            axis=-self.grid.dimension - 1,
        )
        return u, grad

    def apply_operator(self, values: np.ndarray) -> np.ndarray:
        """(-Laplacian - E)(G*values) on the box, evaluated in Fourier space."""
        spec = self._spectrum(values)
        return spfft.ifftn((self._s2 - self.k ** 2) * spec, axes=self._axes)[self._box]


@lru_cache(maxsize=8)
def green_kernel(grid: CartesianGrid, energy: float, pad: int = 3) -> GreenKernel:
    """Shared kernel per (grid, energy); kernels are read-only after construction."""
    return GreenKernel(grid, energy, pad)


def volume_convolve(energy: float, field: SampledField) -> SampledField:
    """
    Apply the outgoing free resolvent to a compactly supported scalar field.

    Args:
        energy: Energy E > 0
        field: Scalar field supported in the central half of its box

    Returns:
        G_E * field sampled on the same grid
    """
    if field.rank != 0:
        raise ShapeMismatchError(f"volume_convolve needs a scalar field, got rank {field.rank}")
    check_margin(field)
    kernel = green_kernel(field.grid, float(energy))
    return SampledField(field.grid, kernel.convolve(field.values.astype(complex)), "wavefunction")
