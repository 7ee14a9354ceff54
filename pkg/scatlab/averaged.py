"""
Averaged scattering solutions, the sesquilinear S-matrix representation and the completeness
test on a ball.

A density f on the sphere is a vector of harmonic coefficients. The free averaged solution is
the Herglotz wave int e^{ik x.omega} f(omega) d omega; the perturbed one is the scattering
solution with that wave as incident field, which by linearity equals the angular average of
plane-wave scattering solutions.
"""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import special

from .exceptions import DomainError, IndexRangeError, PreconditionError
from .forward import LippmannSchwinger, unitarity_defect
from .models import (
    CartesianGrid,
    CompletenessReport,
    DensityOnSphere,
    DirectionGrid,
    SampledField,
    ScatteringMatrix,
    ScatteringSolution,
)
from .numkit import (
    green_gradient,
    harmonic_count,
    harmonic_eval,
    harmonic_indices,
    harmonic_matrix,
    helmholtz_green,
    sphere_rule,
    wavenumber,
)
from .potentials import probe_directions

logger = logging.getLogger(__name__)

# Points per block when summing plane waves
_CHUNK = 4096

# Relative singular value below which projection directions are dropped
SVD_CUTOFF = 1e-10

# Gram condition number above which a completeness run is flagged
GRAM_CONDITION_CAP = 1e16


def basis_density(n: int, degree: int, index: int) -> DensityOnSphere:
    """Density whose only nonzero coefficient is the index-th harmonic."""
    c = np.zeros(harmonic_count(n, degree), dtype=complex)
    c[index] = 1.0
    return DensityOnSphere(n, degree, c)


def density_values(f: DensityOnSphere, nodes: np.ndarray) -> np.ndarray:
    return harmonic_matrix(f.dimension, f.degree, nodes) @ f.coefficients


def default_herglotz_rule(n: int, energy: float, radius: float, degree: int) -> DirectionGrid:
    """Rule resolving e^{ik x.omega} f(omega) for |x| <= radius and f of the given degree."""
    bandwidth = wavenumber(energy) * radius + degree
    return sphere_rule(n, int(np.ceil(bandwidth / 2.0)) + 10)


def herglotz_values(
    values: np.ndarray, energy: float, points: np.ndarray, dirs: DirectionGrid, gradient: bool = False
):
    """
    Sum w_q g(omega_q) e^{ik x.omega_q} for nodal density values g.

    Returns values at points of shape (..., n), and the gradient (components first) when asked.
    """
    k = wavenumber(energy)
    x = np.asarray(points, dtype=float)
    flat = x.reshape(-1, dirs.dimension)
    g = dirs.weights * np.asarray(values)
    out = np.empty(flat.shape[0], dtype=complex)
    grad = np.empty((dirs.dimension, flat.shape[0]), dtype=complex) if gradient else None
    for start in range(0, flat.shape[0], _CHUNK):
        block = slice(start, start + _CHUNK)
        waves = np.exp(1j * k * (flat[block] @ dirs.nodes.T))
        out[block] = waves @ g
        if gradient:
            grad[:, block] = 1j * k * (dirs.nodes.T @ (waves * g).T)
    out = out.reshape(x.shape[:-1])
    if not gradient:
        return out
    return out, grad.reshape((dirs.dimension,) + x.shape[:-1])


def _check_rule(f: DensityOnSphere, dirs: DirectionGrid) -> None:
    if dirs.dimension != f.dimension:
        raise DomainError(f"density of dimension {f.dimension} on a rule of dimension {dirs.dimension}")
    if dirs.degree < f.degree:
        raise IndexRangeError(f"quadrature degree {dirs.degree} is below the density degree {f.degree}")


def herglotz(
    f: DensityOnSphere, energy: float, grid: CartesianGrid, dirs: Optional[DirectionGrid] = None
) -> SampledField:
    """
    Herglotz wave phi_{0,f} on a grid by sphere quadrature.

    Args:
        f: Density in the harmonic basis
        energy: Energy E > 0
        grid: Target grid
        dirs: Quadrature rule; chosen from the box radius when omitted

    Returns:
        The free averaged solution as a wavefunction field

    Raises:
        IndexRangeError: If the rule's degree is below the density's degree
    """
    radius = 0.5 * np.sqrt(grid.dimension) * grid.side
    dirs = dirs or default_herglotz_rule(grid.dimension, energy, radius, f.degree)
    _check_rule(f, dirs)
    values = herglotz_values(density_values(f, dirs.nodes), energy, grid.coordinates(), dirs)
    return SampledField(grid, values, "wavefunction")


def herglotz_closed_form(f: DensityOnSphere, energy: float, points: np.ndarray) -> np.ndarray:
    """Herglotz wave from the plane-wave expansion: 4 pi i^l j_l Y_lm in 3D, 2 pi i^m J_m e^{im theta}/sqrt(2 pi) in 2D."""
    k = wavenumber(energy)
    x = np.asarray(points, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    out = np.zeros(r.shape, dtype=complex)
    for c, (l, m) in zip(f.coefficients, harmonic_indices(f.dimension, f.degree)):
        if c == 0:
            continue
        if f.dimension == 3:
            radial = 4.0 * np.pi * 1j ** l * special.spherical_jn(l, k * r)
        else:
            radial = 2.0 * np.pi * 1j ** m * special.jv(m, k * r)
        out += c * radial * harmonic_eval(f.dimension, l, m, x)
    return out


def _rule_for(ls: LippmannSchwinger, degree: int, dirs: Optional[DirectionGrid]) -> DirectionGrid:
    radius = 0.5 * np.sqrt(ls.grid.dimension) * ls.grid.side
    return dirs or default_herglotz_rule(ls.grid.dimension, ls.energy, radius, degree)


def averaged_scattering(
    V: SampledField,
    A: Optional[SampledField],
    densities: Sequence[DensityOnSphere],
    energy: float,
    dirs: Optional[DirectionGrid] = None,
    ls: Optional[LippmannSchwinger] = None,
    **options,
) -> List[ScatteringSolution]:
    """Perturbed averaged solutions for a batch of densities, sharing one LS operator."""
    ls = ls or LippmannSchwinger(V, A, energy, **options)
    if not densities:
        return []
    dirs = _rule_for(ls, max(f.degree for f in densities), dirs)
    x = ls.grid.coordinates()
    incidents = []
    for f in densities:
        _check_rule(f, dirs)
        incidents.append(herglotz_values(density_values(f, dirs.nodes), energy, x, dirs, gradient=True))
    return ls.solve(incidents)


def averaged_solution(
    V: SampledField,
    A: Optional[SampledField],
    f: DensityOnSphere,
    energy: float,
    dirs: Optional[DirectionGrid] = None,
    **options,
) -> SampledField:
    """
    Perturbed averaged solution phi_{+,f} = int phi_+(., omega) f(omega) d omega.

    Args:
        V: Sampled electric potential
        A: Sampled vector potential or None
        f: Density in the harmonic basis
        energy: Energy E > 0
        dirs: Quadrature rule for the average
        **options: Solver options passed to LippmannSchwinger

    Returns:
        The averaged solution on V's grid
    """
    return averaged_scattering(V, A, [f], energy, dirs, **options)[0].field


def representation_constant(n: int, energy: float) -> complex:
    """c' in (S f, g) = (f, g) - c' (Q phi_{+,f}, phi_{0,g})."""
    return 1j * energy ** ((n - 2) / 2.0) / (2.0 * (2.0 * np.pi) ** (n - 1))


def smatrix_via_representation(
    V: SampledField,
    A: Optional[SampledField],
    energy: float,
    degree: int,
    dirs: Optional[DirectionGrid] = None,
    ls: Optional[LippmannSchwinger] = None,
    **options,
) -> ScatteringMatrix:
    """
    S(E) from the sesquilinear representation over harmonic basis pairs.

    Entry (a, b) is delta_ab - c' (Q phi_{+,Y_b}, phi_{0,Y_a}); the free waves are evaluated in
    closed form on the support of Q.
    """
    ls = ls or LippmannSchwinger(V, A, energy, **options)
    n = ls.grid.dimension
    count = harmonic_count(n, degree)
    basis = [basis_density(n, degree, b) for b in range(count)]
    solutions = averaged_scattering(V, A, basis, energy, dirs, ls=ls)
    pairing = np.zeros((count, count), dtype=complex)
    if ls.size:
        free = np.stack([herglotz_closed_form(f, energy, ls.points) for f in basis], axis=1)
        sources = np.stack([s.source.values.ravel()[ls.support] for s in solutions], axis=1)
        pairing = ls.grid.cell_volume * free.conj().T @ sources
    matrix = np.eye(count, dtype=complex) - representation_constant(n, energy) * pairing
    defect = unitarity_defect(matrix)
    logger.info(f"Representation S-matrix at E={energy}: degree {degree}, unitarity defect {defect:.3e}")
    if defect > ls.unitarity_warn:
        logger.warning(f"Representation S-matrix at E={energy} has unitarity defect {defect:.3e}")
    return ScatteringMatrix(float(energy), n, degree, matrix, "representation", "harmonic", defect)


def interior_target(
    V: SampledField,
    A: Optional[SampledField],
    pole: np.ndarray,
    energy: float,
    radius: float,
    ls: Optional[LippmannSchwinger] = None,
    **options,
) -> SampledField:
    """
    Solution of the equation on the ball |x| <= radius with a point source outside it.

    The incident field is G_E(. - pole); the LS solve adds the scattered part.

    Raises:
        PreconditionError: If the pole lies in the closed ball
        DomainError: If the pole lies outside the grid box
    """
    y = np.asarray(pole, dtype=float)
    grid = V.grid
    if np.linalg.norm(y) <= radius:
        raise PreconditionError(
            f"pole at distance {np.linalg.norm(y):.4g} lies inside the ball of radius {radius}",
            record={"pole": y.tolist(), "radius": radius},
        )
    if np.any(np.abs(y) >= 0.5 * grid.side):
        raise DomainError(f"pole {y.tolist()} lies outside the grid box")
    ls = ls or LippmannSchwinger(V, A, energy, **options)
    x = grid.coordinates()
    incident = helmholtz_green(x, y, energy, grid.dimension)
    incident_gradient = np.moveaxis(green_gradient(x, y, energy, grid.dimension), -1, 0)
    return ls.solve([(incident, incident_gradient)])[0].field


def ball_weights(grid: CartesianGrid, radius: float, order: int = 8) -> np.ndarray:
    """
    Volume of the intersection of every grid cell with the ball |x| <= radius.

    Cells cut by the sphere integrate the exact chord length along the last axis with a
    Gauss-Legendre rule over the remaining axes.
    """
    n, h = grid.dimension, grid.spacing
    r = grid.radius()
    half_diag = 0.5 * np.sqrt(n) * h
    weights = np.where(r <= radius - half_diag, grid.cell_volume, 0.0)
    cut = np.abs(r - radius) < half_diag
    if not cut.any():
        return weights
    centers = grid.coordinates()[cut]
    t, w = np.polynomial.legendre.leggauss(order)
    nodes = np.stack(np.meshgrid(*([t] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    node_w = np.prod(np.stack(np.meshgrid(*([w] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1), axis=-1)
    across = centers[:, None, :-1] + 0.5 * h * nodes[None, :, :]
    half = np.sqrt(np.maximum(radius ** 2 - np.sum(across ** 2, axis=-1), 0.0))
    last = centers[:, -1:]
    chord = np.clip(np.minimum(last + 0.5 * h, half) - np.maximum(last - 0.5 * h, -half), 0.0, None)
    weights[cut] = (0.5 * h) ** (n - 1) * (chord @ node_w)
    return weights


def _degree_blocks(n: int, degrees: Sequence[int]) -> List[int]:
    return [harmonic_count(n, L) for L in degrees]


def completeness_residual(
    V: SampledField,
    A: Optional[SampledField],
    radius: float,
    energy: float,
    targets: Dict[str, SampledField],
    degrees: Sequence[int],
    dirs: Optional[DirectionGrid] = None,
    condition_cap: float = GRAM_CONDITION_CAP,
    ls: Optional[LippmannSchwinger] = None,
    **options,
) -> CompletenessReport:
    """
    Projection residuals of target solutions onto spans of averaged scattering solutions.

    The averaged solutions phi_{+,Y} for every harmonic up to max(degrees) are orthonormalized
    in L^2(ball) degree by degree (block Gram-Schmidt with reorthogonalization and singular
    value truncation), so the spans are nested and residuals cannot increase with the degree.
    A degree whose Gram condition exceeds condition_cap raises the truncation level to
    sigma_max / sqrt(condition_cap) for that block and every later one.

    Args:
        V: Sampled electric potential
        A: Sampled vector potential or None
        radius: Radius of the ball K centred at the origin
        energy: Energy E > 0
        targets: Named solutions of the equation on K
        degrees: Increasing harmonic degrees L_1 < ... < L_m
        dirs: Quadrature rule for the averaged solutions
        condition_cap: Gram condition number above which a degree is flagged and truncated harder
        ls: Optional prebuilt LS operator
        **options: Solver options passed to LippmannSchwinger

    Returns:
        CompletenessReport with one residual per target and degree
    """
    degrees = sorted(int(L) for L in degrees)
    if not degrees or degrees[0] < 0:
        raise IndexRangeError(f"degrees must be non-negative, got {degrees}")
    grid = V.grid
    if radius >= 0.5 * grid.side:
        raise PreconditionError(
            f"ball of radius {radius} is not inside the box of side {grid.side}",
            record={"radius": radius, "side": grid.side},
        )
    n = grid.dimension
    weights = ball_weights(grid, radius)
    inside = weights.ravel() > 0
    root = np.sqrt(weights.ravel()[inside])

    ls = ls or LippmannSchwinger(V, A, energy, **options)
    L_max = degrees[-1]
    basis = [basis_density(n, L_max, b) for b in range(harmonic_count(n, L_max))]
    solutions = averaged_scattering(V, A, basis, energy, dirs, ls=ls)
    B = np.stack([s.field.values.ravel()[inside] for s in solutions], axis=1) * root[:, None]
    U = {name: t.values.ravel()[inside] * root for name, t in targets.items()}

    sigma_max = float(np.linalg.svd(B, compute_uv=False)[0]) if B.size else 0.0
    cutoff = SVD_CUTOFF * sigma_max
    Q = np.zeros((B.shape[0], 0), dtype=complex)
    report = CompletenessReport(
        energy=float(energy),
        radius=float(radius),
        degrees=list(degrees),
        residuals={name: [] for name in targets},
        gram_conditions=[],
        cutoffs=[],
        ranks=[],
    )
    done = 0
    for L, stop in zip(degrees, _degree_blocks(n, degrees)):
        sv_L = np.linalg.svd(B[:, :stop], compute_uv=False)
        eigenvalues = sv_L ** 2
        condition = float(eigenvalues[0] / eigenvalues[-1]) if eigenvalues[-1] > 0 else np.inf
        flagged = condition > condition_cap
        if flagged:
            # Applies to this and later blocks only
            cutoff = max(cutoff, sigma_max / np.sqrt(condition_cap))
            logger.warning(
                f"Gram matrix at degree {L} has condition {condition:.3e}; "
                f"truncation raised to {cutoff:.3e}"
            )

        block = B[:, done:stop]
        for _ in range(2):
            block = block - Q @ (Q.conj().T @ block)
        if block.shape[1]:
            left, sv, _ = np.linalg.svd(block, full_matrices=False)
            Q = np.concatenate([Q, left[:, sv > cutoff]], axis=1)
        done = stop

        report.gram_conditions.append(condition)
        report.cutoffs.append(cutoff)
        report.ranks.append(int(Q.shape[1]))
        report.eigenvalues.append(eigenvalues.tolist())
        report.flagged.append(bool(flagged))
        for name, u in U.items():
            norm = np.linalg.norm(u)
            rest = u - Q @ (Q.conj().T @ u)
            report.residuals[name].append(float(np.linalg.norm(rest) / norm) if norm > 0 else 0.0)
        logger.info(f"Completeness at degree {L}: rank {Q.shape[1]}, condition {condition:.3e}")
    return report


def default_targets(
    V: SampledField,
    A: Optional[SampledField],
    energy: float,
    radius: float,
    degree: int,
    distance: float = 2.5,
    ls: Optional[LippmannSchwinger] = None,
    **options,
) -> Dict[str, SampledField]:
    """
    Three Green-pole targets at distance * radius and one held-out averaged solution.

    The held-out density has every harmonic up to degree + 2 with coefficient 1/(1 + l).
    """
    n = V.grid.dimension
    ls = ls or LippmannSchwinger(V, A, energy, **options)
    # Fibonacci directions keep the poles off the grid lines
    directions = probe_directions(3, 3) if n == 3 else _plane_directions()
    targets = {}
    for i, omega in enumerate(directions):
        pole = distance * radius * omega / np.linalg.norm(omega)
        targets[f"pole{i}"] = interior_target(V, A, pole, energy, radius, ls=ls)
    held = degree + 2
    coefficients = np.array([1.0 / (1.0 + l) for l, _ in harmonic_indices(n, held)], dtype=complex)
    targets["held-out"] = averaged_scattering(V, A, [DensityOnSphere(n, held, coefficients)], energy, ls=ls)[0].field
    return targets


def _plane_directions() -> np.ndarray:
    theta = np.array([0.3, 2.4, 4.3]) + np.sqrt(2.0) / 10.0
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)

