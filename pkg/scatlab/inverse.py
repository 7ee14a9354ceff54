"""
Identities and experiments behind uniqueness at fixed energy.

Covers the Green identity for two electric potentials, the orthogonality functional that ties
interior differences to S-matrix differences, complex geometrical optics (CGO) solutions and
the Fourier inversion of potential differences, radial Dirichlet-to-Neumann maps, and drivers
for uniqueness scenarios and asymptotic expansions.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as spfft

from . import __version__
from .averaged import averaged_scattering, ball_weights, basis_density, representation_constant, smatrix_via_representation
from .exceptions import (
    AgreementError,
    DomainError,
    NeumannDivergenceError,
    PreconditionError,
    ResonanceProximityError,
)
from .forward import LippmannSchwinger, RadialSolution, scattering_matrix
from .magnetic import field_support_radius, materialize
from .models import (
    CartesianGrid,
    CgoParameter,
    CgoRemainder,
    DtnMap,
    ExpansionSpec,
    FourierReconstruction,
    PotentialSpec,
    SampledField,
    UniquenessReport,
)
from .numkit import harmonic_count, harmonic_indices, sphere_rule, wavenumber
from .potentials import (
    is_radial,
    materialize_expansion,
    radial_profile,
    sample,
    spec_hash,
    support_radius,
    validate_expansion,
)

logger = logging.getLogger(__name__)

# A solution evaluator maps points (..., n) to values and gradients (components last)
FieldEvaluator = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]
SampledPotential = Tuple[SampledField, Optional[SampledField]]

DEFAULT_TAU_FACTORS = (4.0, 8.0, 16.0, 32.0)

# Largest successive relative change of an accepted Fourier coefficient
TAU_ACCEPT = 0.02

# Radial solution value (relative to its peak) below which R is near a Dirichlet eigenvalue
DIRICHLET_THRESHOLD = 1e-6


def _laplacian_fd(evaluate: FieldEvaluator, points: np.ndarray, step: float) -> Tuple[np.ndarray, np.ndarray]:
    n = points.shape[-1]
    center, _ = evaluate(points)
    total = -2.0 * n * center
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        total = total + evaluate(points + e)[0] + evaluate(points - e)[0]
    return center, total / step ** 2


def check_solution(
    V: SampledField, evaluate: FieldEvaluator, energy: float, radius: float, probes: int = 12, tolerance: float = 1e-3
) -> float:
    """
    Finite-difference residual of (-Laplacian + V - E) phi at grid points inside the ball.

    Probe points next to a jump of V are skipped. Returns the worst relative residual.

    Raises:
        PreconditionError: If the residual exceeds tolerance
    """
    grid = V.grid
    n = grid.dimension
    x = grid.coordinates().reshape(-1, n)
    v = V.values.real.ravel()
    scale = max(float(np.abs(v).max()), 1e-300)
    smooth = np.ones(v.shape, dtype=bool)
    flat = V.values.real
    for axis in range(n):
        for shift in (1, -1):
            jump = np.abs(np.roll(flat, shift, axis=axis) - flat).ravel()
            smooth &= jump < 0.5 * scale
    candidates = np.flatnonzero((np.linalg.norm(x, axis=-1) < 0.9 * radius) & smooth)
    if candidates.size == 0:
        return 0.0
    chosen = candidates[np.linspace(0, candidates.size - 1, min(probes, candidates.size)).astype(int)]
    step = 5e-3 * max(radius, grid.spacing)
    phi, lap = _laplacian_fd(evaluate, x[chosen], step)
    residual = -lap + (v[chosen] - energy) * phi
    size = np.abs(lap) + (np.abs(v[chosen]) + energy) * np.abs(phi)
    worst = float(np.max(np.abs(residual) / np.maximum(size, 1e-300)))
    if worst > tolerance:
        raise PreconditionError(
            f"field does not solve the equation inside the ball: relative residual {worst:.3g}",
            record={"residual": worst, "tolerance": tolerance},
        )
    return worst


def green_identity_defect(
    V1: SampledField,
    V2: SampledField,
    phi1: FieldEvaluator,
    phi2: FieldEvaluator,
    radius: float,
    energy: float,
    boundary_degree: Optional[int] = None,
    check: bool = True,
) -> Tuple[complex, complex]:
    """
    Both sides of int_B (V1 - V2) phi1 conj(phi2) = int_dB (conj(phi2) d_nu phi1 - phi1 d_nu conj(phi2)).

    Args:
        V1: First electric potential
        V2: Second electric potential, on the same grid
        phi1: Evaluator of a solution for V1
        phi2: Evaluator of a solution for V2
        radius: Radius of the ball B
        energy: Energy E > 0
        boundary_degree: Degree of the sphere rule on dB; chosen from k * radius when omitted
        check: Verify that phi1 and phi2 solve their equations inside B

    Returns:
        (volume term, boundary term)
    """
    if V1.grid != V2.grid:
        raise DomainError("potentials of the pair are sampled on different grids")
    grid = V1.grid
    n = grid.dimension
    if check:
        check_solution(V1, phi1, energy, radius)
        check_solution(V2, phi2, energy, radius)

    weights = ball_weights(grid, radius)
    inside = weights > 0
    x = grid.coordinates()[inside]
    u1, _ = phi1(x)
    u2, _ = phi2(x)
    difference = (V1.values - V2.values)[inside]
    volume = complex(np.sum(weights[inside] * difference * u1 * np.conj(u2)))

    degree = boundary_degree or int(2 * wavenumber(energy) * radius) + 24
    dirs = sphere_rule(n, degree)
    y = radius * dirs.nodes
    w1, g1 = phi1(y)
    w2, g2 = phi2(y)
    d1 = np.sum(g1 * dirs.nodes, axis=-1)
    d2 = np.sum(g2 * dirs.nodes, axis=-1)
    integrand = np.conj(w2) * d1 - w1 * np.conj(d2)
    boundary = complex(radius ** (n - 1) * np.sum(dirs.weights * integrand))
    logger.debug(f"Green identity: volume {volume:.6e}, boundary {boundary:.6e}")
    return volume, boundary


def check_agreement(first: SampledPotential, second: SampledPotential, radius: float, rtol: float = 1e-9) -> None:
    """
    Refuse a pair whose sampled potentials differ at any grid point with |x| >= radius.

    Raises:
        AgreementError: Naming the grid point with the largest difference
    """
    V1, A1 = first
    V2, A2 = second
    grid = V1.grid
    if V2.grid != grid:
        raise DomainError("potentials of the pair are sampled on different grids")
    outside = grid.radius() >= radius
    parts = [("V", V1.values, V2.values)]
    if A1 is not None or A2 is not None:
        zero = np.zeros((grid.dimension,) + grid.shape)
        parts.append(("A", zero if A1 is None else A1.values, zero if A2 is None else A2.values))
    for role, a, b in parts:
        scale = max(float(np.abs(a).max()), float(np.abs(b).max()), 1e-300)
        diff = np.abs(a - b)
        while diff.ndim > grid.dimension:
            diff = diff.max(axis=0)
        diff = np.where(outside, diff, 0.0)
        worst = float(diff.max())
        if worst > rtol * scale:
            index = np.unravel_index(int(np.argmax(diff)), grid.shape)
            point = grid.coordinates()[index]
            raise AgreementError(
                f"{role} of the pair differs by {worst:.3g} at x={np.round(point, 6).tolist()}, "
                f"outside the ball of radius {radius}",
                record={
                    "role": role,
                    "index": [int(i) for i in index],
                    "point": [float(c) for c in point],
                    "difference": worst,
                    "radius": radius,
                },
            )


def _pairing_matrix(
    first: SampledPotential,
    second: SampledPotential,
    solutions1: List,
    solutions2: List,
) -> np.ndarray:
    """Phi[a, b] for phi1 = solutions1[b] (first pair) and phi2 = solutions2[a] (second pair)."""
    V1, A1 = first
    V2, A2 = second
    grid = V1.grid
    n = grid.dimension
    D = (V2.values - V1.values).astype(complex)
    dA = None
    if A1 is not None or A2 is not None:
        zero = np.zeros((n,) + grid.shape)
        a1 = zero if A1 is None else A1.values
        a2 = zero if A2 is None else A2.values
        D = D + np.sum(a2 ** 2, axis=0) - np.sum(a1 ** 2, axis=0)
        dA = (a2 - a1).reshape(n, -1)
    mask = np.abs(D.ravel()) > 0
    if dA is not None:
        mask |= np.any(np.abs(dA) > 0, axis=0)
    if not mask.any():
        return np.zeros((len(solutions2), len(solutions1)), dtype=complex)
    U = np.stack([s.field.values.ravel()[mask] for s in solutions1], axis=1)
    W = np.stack([s.field.values.ravel()[mask] for s in solutions2], axis=1)
    out = W.conj().T @ (D.ravel()[mask][:, None] * U)
    if dA is not None:
        a = dA[:, mask]
        GU = np.stack([s.gradient.values.reshape(n, -1)[:, mask] for s in solutions1], axis=-1)
        GW = np.stack([s.gradient.values.reshape(n, -1)[:, mask] for s in solutions2], axis=-1)
        # u conj(grad w) - conj(w) grad u, contracted with A2 - A1
        first_term = np.einsum("jx,jxa,xb->ab", a, GW.conj(), U)
        second_term = np.einsum("jx,xa,jxb->ab", a, W.conj(), GU)
        out = out - 1j * (first_term - second_term)
    return grid.cell_volume * out


def orthogonality_functional(
    first: SampledPotential,
    second: SampledPotential,
    f,
    g,
    energy: float,
    radius: float,
    **options,
) -> complex:
    """
    int (V2 - V1 + A2^2 - A1^2) phi1 conj(phi2) - i int (A2 - A1).(phi1 grad conj(phi2) - conj(phi2) grad phi1).

    phi1 is the averaged solution of density f for the first pair and phi2 that of density g for
    the second. It equals ((S1 f, S2 g) - (f, g)) / c'.

    Raises:
        AgreementError: If the pair differs outside the ball
    """
    check_agreement(first, second, radius)
    ls1 = LippmannSchwinger(*first, energy, **options)
    ls2 = LippmannSchwinger(*second, energy, **options)
    u = averaged_scattering(*first, [f], energy, ls=ls1)
    w = averaged_scattering(*second, [g], energy, ls=ls2)
    return complex(_pairing_matrix(first, second, u, w)[0, 0])


def orthogonality_matrix(
    first: SampledPotential,
    second: SampledPotential,
    energy: float,
    degree: int,
    radius: float,
    smatrices: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    solvers: Optional[Tuple[LippmannSchwinger, LippmannSchwinger]] = None,
    **options,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    The functional over harmonic basis pairs and its S-matrix counterpart.

    Returns (Phi, C) with Phi[a, b] for f = Y_b, g = Y_a and C = (S2^H S1 - I) / c', both S-matrices
    taken from the far-field path unless precomputed ones are passed.
    """
    check_agreement(first, second, radius)
    grid = first[0].grid
    n = grid.dimension
    count = harmonic_count(n, degree)
    basis = [basis_density(n, degree, b) for b in range(count)]
    if solvers is None:
        solvers = (LippmannSchwinger(*first, energy, **options), LippmannSchwinger(*second, energy, **options))
    ls1, ls2 = solvers
    u = averaged_scattering(*first, basis, energy, ls=ls1)
    w = averaged_scattering(*second, basis, energy, ls=ls2)
    phi = _pairing_matrix(first, second, u, w)
    if smatrices is None:
        smatrices = (
            scattering_matrix(*first, energy, degree, ls=ls1).matrix,
            scattering_matrix(*second, energy, degree, ls=ls2).matrix,
        )
    S1, S2 = smatrices
    counterpart = (S2.conj().T @ S1 - np.eye(count)) / representation_constant(n, energy)
    return phi, counterpart


def cgo_parameters(xi: np.ndarray, energy: float, tau: float) -> Tuple[CgoParameter, CgoParameter]:
    """
    Paired CGO parameters p1 = xi/2 + a e2 + i tau e3 and p2 = -xi/2 + a e2 - i tau e3.

    e1 is parallel to xi and (e1, e2, e3) is orthonormal; a = sqrt(E + tau^2 - |xi|^2/4), so that
    p.p = E for both.

    Raises:
        PreconditionError: If tau <= |xi|/2
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (3,):
        raise DomainError(f"CGO parameters need n = 3, got a frequency of shape {xi.shape}")
    wavenumber(energy)
    size = float(np.linalg.norm(xi))
    if not tau > 0.5 * size:
        raise PreconditionError(
            f"tau={tau} must exceed |xi|/2 = {0.5 * size:.6g}",
            record={"tau": tau, "xi_norm": size},
        )
    e1 = xi / size if size > 0 else np.array([1.0, 0.0, 0.0])
    helper = np.eye(3)[int(np.argmin(np.abs(e1)))]
    e2 = np.cross(e1, helper)
    e2 /= np.linalg.norm(e2)
    e3 = np.cross(e1, e2)
    a = np.sqrt(energy + tau ** 2 - 0.25 * size ** 2)
    p1 = 0.5 * xi + a * e2 + 1j * tau * e3
    p2 = -0.5 * xi + a * e2 - 1j * tau * e3
    return CgoParameter(p1, xi, tau, energy), CgoParameter(p2, xi, tau, energy)


def weighted_norm(field: SampledField, s: float = 1.0) -> float:
    """Norm in L^2 with weight (1 + |x|^2)^{-s}."""
    weight = (1.0 + field.grid.radius() ** 2) ** (-s)
    return float(np.sqrt(field.grid.cell_volume * np.sum(weight * np.abs(field.values) ** 2)))


class FaddeevInverse:
    """
    Regularized inverse of Delta + 2ip.grad on the zero-padded periodic box.

    The symbol sigma(s) = -|s|^2 - 2 p.s vanishes on a circle; 1/sigma is replaced by
    conj(sigma)/(|sigma|^2 + eps^2) with eps = c/tau.
    """

    def __init__(self, grid: CartesianGrid, parameter: CgoParameter, constant: float = 1.0, pad: int = 2):
        self.grid = grid
        self.pad = pad
        n, N = grid.dimension, grid.points
        M = pad * N
        self.padded_shape = (M,) * n
        freqs = 2.0 * np.pi * spfft.fftfreq(M, d=grid.spacing)
        axes = np.meshgrid(*([freqs] * n), indexing="ij", sparse=True)
        s2 = sum(a ** 2 for a in axes)
        ps = sum(p * a for p, a in zip(parameter.p, axes))
        self.sigma = -s2 - 2.0 * ps
        self.epsilon = constant / parameter.tau
        self.symbol = np.conj(self.sigma) / (np.abs(self.sigma) ** 2 + self.epsilon ** 2)
        self._box = (slice(0, N),) * n

    def __call__(self, values: np.ndarray) -> np.ndarray:
        spec = spfft.fftn(values, s=self.padded_shape)
        return spfft.ifftn(self.symbol * spec)[self._box]

    def regularized_fraction(self, values: np.ndarray) -> float:
        """Share of the spectral energy of values where |sigma| < eps."""
        spec = np.abs(spfft.fftn(values, s=self.padded_shape)) ** 2
        total = float(spec.sum())
        if total == 0.0:
            return 0.0
        return float(spec[np.abs(self.sigma) < self.epsilon].sum() / total)


def cgo_solve(
    V: SampledField,
    parameter: CgoParameter,
    radius: Optional[float] = None,
    tol: float = 1e-10,
    maxiter: int = 200,
    constant: float = 1.0,
    warn_fraction: float = 0.1,
) -> CgoRemainder:
    """
    Remainder psi of phi = e^{ip.x}(1 + psi) solving (Delta + 2ip.grad) psi = chi_B V (1 + psi).

    The equation is solved by the Neumann series psi = sum_j T^j psi_0 with T = L^{-1} chi_B V.

    Raises:
        NeumannDivergenceError: If the contraction ratio of the series reaches 1
    """
    grid = V.grid
    if grid.dimension != 3:
        raise DomainError("CGO solutions are implemented for n = 3")
    potential = V.values.astype(complex)
    if radius is not None:
        potential = potential * ball_weights(grid, radius) / grid.cell_volume
    inverse = FaddeevInverse(grid, parameter, constant)

    if not np.any(potential):
        zero = SampledField(grid, np.zeros(grid.shape, dtype=complex), "psi")
        return CgoRemainder(parameter, zero, 0.0, 0, 0.0, inverse.epsilon, [])

    fraction = inverse.regularized_fraction(potential)
    if fraction > warn_fraction:
        logger.warning(
            f"CGO regularization eps={inverse.epsilon:.3g} covers {fraction:.1%} of the source spectrum "
            f"at tau={parameter.tau}"
        )
    increment = inverse(potential)
    psi = increment.copy()
    history: List[float] = []
    previous = np.linalg.norm(increment)
    ratio = 0.0
    iterations = 1
    while iterations < maxiter:
        increment = inverse(potential * increment)
        size = np.linalg.norm(increment)
        ratio = float(size / previous) if previous > 0 else 0.0
        psi += increment
        history.append(float(size / max(np.linalg.norm(psi), 1e-300)))
        iterations += 1
        if ratio >= 1.0 and iterations > 3:
            raise NeumannDivergenceError(
                f"CGO Neumann series diverges at tau={parameter.tau}: contraction ratio {ratio:.3g}",
                spectral_radius=ratio,
                residual_history=history,
            )
        if history[-1] < tol:
            break
        previous = size
    else:
        raise NeumannDivergenceError(
            f"CGO Neumann series did not converge in {maxiter} terms at tau={parameter.tau} (ratio {ratio:.3g})",
            spectral_radius=ratio,
            residual_history=history,
        )
    field = SampledField(grid, psi, "psi")
    return CgoRemainder(parameter, field, weighted_norm(field), iterations, ratio, inverse.epsilon, history)


def xi_lattice(maximum: float, spacing: float, n: int = 3) -> np.ndarray:
    """Points of the cubic lattice spacing * Z^n inside the ball |xi| <= maximum."""
    count = int(np.floor(maximum / spacing + 1e-12))
    axis = spacing * np.arange(-count, count + 1)
    points = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    return points[np.linalg.norm(points, axis=-1) <= maximum + 1e-12]


def _coefficient(
    V1: SampledField, V2: SampledField, xi: np.ndarray, energy: float, tau: float, radius: float, options: Dict[str, Any]
) -> complex:
    p1, p2 = cgo_parameters(xi, energy, tau)
    psi1 = cgo_solve(V1, p1, radius, **options).psi.values
    psi2 = cgo_solve(V2, p2, radius, **options).psi.values
    grid = V1.grid
    weights = ball_weights(grid, radius)
    phase = np.exp(1j * (grid.coordinates() @ xi))
    integrand = (V2.values - V1.values) * phase * (1.0 + psi1) * np.conj(1.0 + psi2)
    return complex(np.sum(weights * integrand))


def _stabilize(
    V1: SampledField,
    V2: SampledField,
    xi: np.ndarray,
    energy: float,
    taus: Sequence[float],
    radius: float,
    options: Dict[str, Any],
    floor: float,
) -> Tuple[complex, float, float, bool]:
    values: List[complex] = []
    used = float("nan")
    for tau in taus:
        if not tau > 0.5 * np.linalg.norm(xi):
            continue
        try:
            values.append(_coefficient(V1, V2, xi, energy, tau, radius, options))
        except NeumannDivergenceError as exc:
            logger.debug(f"xi={xi.tolist()}: skipping tau={tau:.4g} ({exc})")
            continue
        used = float(tau)
    if not values:
        return 0j, used, float("inf"), False
    last = values[-1]
    if abs(last) <= floor:
        return last, used, 0.0, True
    if len(values) < 2:
        return last, used, float("inf"), False
    change = abs(last - values[-2]) / abs(last)
    return last, used, float(change), bool(change < TAU_ACCEPT)


def fourier_difference(
    V1: SampledField,
    V2: SampledField,
    energy: float,
    radius: float,
    xi: Optional[np.ndarray] = None,
    tau_factors: Sequence[float] = DEFAULT_TAU_FACTORS,
    workers: Optional[int] = None,
    **cgo_options,
) -> FourierReconstruction:
    """
    Recover Fourier coefficients of V2 - V1 from CGO solutions and invert them on the grid.

    For each frequency xi the pairing int_B (V2 - V1) phi1 conj(phi2) is evaluated along the
    whole tau schedule and the value at the largest tau is kept. It is accepted when the last
    doubling changed it by less than 2%; other coefficients are flagged. The reconstruction is
    compared with the same band-limited inversion of the exact coefficients.

    Args:
        V1: First electric potential
        V2: Second electric potential, equal to V1 outside the ball
        energy: Energy E > 0
        radius: Radius of the ball B
        xi: Frequencies, shape (m, 3); defaults to the unit lattice with |xi| <= 2
        tau_factors: tau schedule in units of sqrt(E)
        workers: Threads evaluating distinct frequencies
        **cgo_options: Passed to cgo_solve

    Returns:
        FourierReconstruction with coefficients, acceptance flags and reconstruction errors
    """
    check_agreement((V1, None), (V2, None), radius)
    grid = V1.grid
    xi = xi_lattice(2.0, 1.0) if xi is None else np.atleast_2d(np.asarray(xi, dtype=float))
    taus = [factor * np.sqrt(energy) for factor in tau_factors]

    floor = 1e-8 * float(np.sum(ball_weights(grid, radius) * np.abs(V2.values - V1.values)))

    def run(frequency: np.ndarray):
        return _stabilize(V1, V2, frequency, energy, taus, radius, cgo_options, floor)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, xi))
    coefficients = np.array([r[0] for r in results], dtype=complex)
    tau_used = np.array([r[1] for r in results])
    change = np.array([r[2] for r in results])
    accepted = np.array([r[3] for r in results])
    if not accepted.all():
        logger.warning(f"{int((~accepted).sum())} of {len(xi)} Fourier coefficients did not stabilize")

    x = grid.coordinates()
    weights = ball_weights(grid, radius)
    difference = (V2.values - V1.values).real
    exact = np.array([np.sum(weights * difference * np.exp(1j * (x @ q))) for q in xi])

    volume = _lattice_cell(xi)
    waves = np.exp(-1j * (x.reshape(-1, 3) @ xi.T))
    recon = (waves @ coefficients).reshape(grid.shape) * volume / (2.0 * np.pi) ** 3
    band_limited = (waves @ exact).reshape(grid.shape) * volume / (2.0 * np.pi) ** 3
    scale = max(float(np.abs(band_limited).max()), 1e-300)
    error = float(np.abs(recon - band_limited).max() / scale) if np.any(band_limited) else float(np.abs(recon).max())
    exact_scale = max(float(np.abs(exact).max()), 1e-300)
    return FourierReconstruction(
        xi=xi,
        coefficients=coefficients,
        exact=exact,
        tau_used=tau_used,
        relative_change=change,
        accepted=accepted,
        reconstruction=SampledField(grid, recon, "difference"),
        reconstruction_error=error,
        coefficient_errors=np.abs(coefficients - exact) / exact_scale,
    )


def _lattice_cell(xi: np.ndarray) -> float:
    if len(xi) < 2:
        return 1.0
    steps = np.diff(np.unique(xi[:, 0]))
    spacing = float(steps.min()) if steps.size else 1.0
    return spacing ** xi.shape[1]


def radial_dirichlet_solution(
    spec: PotentialSpec, energy: float, radius: float, l: int, threshold: float = DIRICHLET_THRESHOLD
) -> Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """
    Regular radial solution of order l scaled to the value 1 at r = radius.

    Raises:
        ResonanceProximityError: If |R(radius)| is below threshold times its peak
    """
    solution = RadialSolution(spec, l, energy, radius)
    value, _ = solution.boundary()
    if abs(value) < threshold:
        raise ResonanceProximityError(
            f"R={radius} is close to a Dirichlet eigenvalue at order l={l} (|u(R)|/max|u| = {abs(value):.3g}); "
            "choose a different radius",
            record={"l": l, "ratio": abs(value), "radius": radius},
        )

    def scaled(r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        R, dR = solution(r)
        return R / value, dR / value

    return scaled


def dtn_radial(
    spec: PotentialSpec, energy: float, radius: float, degree: int, threshold: float = DIRICHLET_THRESHOLD
) -> DtnMap:
    """
    Dirichlet-to-Neumann map of a radial electric potential on the ball of the given radius.

    Each order contributes the log-derivative R'(radius)/R(radius) of the radial solution regular
    at the origin; the map is diagonal in the harmonic basis.
    """
    if not is_radial(spec):
        raise DomainError(f"potential {spec.name} is not radial")
    n = spec.dimension
    diagonal = np.empty(degree + 1)
    for l in range(degree + 1):
        rho = radial_dirichlet_solution(spec, energy, radius, l, threshold)
        _, derivative = rho(np.array([radius]))
        diagonal[l] = derivative[0]
    entries = [diagonal[l] for l, _ in harmonic_indices(n, degree)]
    return DtnMap(float(energy), n, float(radius), degree, np.diag(entries), diagonal)


def _radial_panels(edges: Sequence[float], per_piece: int = 16, order: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        cuts = np.linspace(a, b, per_piece + 1)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            nodes.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
            weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def dtn_identity_defect(
    first: PotentialSpec, second: PotentialSpec, energy: float, radius: float, degree: int
) -> float:
    """
    Largest defect of R^{n-1} (L1_l - L2_l) = int_0^R (V1 - V2) rho1 rho2 r^{n-1} dr over orders l.

    rho_j are the radial Dirichlet solutions with rho_j(R) = 1 and L_j the DtN diagonals. The
    defect is relative to the largest side.
    """
    n = first.dimension
    V1, breaks1, _ = radial_profile(first)
    V2, breaks2, _ = radial_profile(second)
    edges = sorted({0.0, radius, *[b for b in breaks1 + breaks2 if 0.0 < b < radius]})
    r, w = _radial_panels(edges)
    L1 = dtn_radial(first, energy, radius, degree).diagonal
    L2 = dtn_radial(second, energy, radius, degree).diagonal
    lhs = radius ** (n - 1) * (L1 - L2)
    rhs = np.empty(degree + 1)
    dV = V1(r) - V2(r)
    for l in range(degree + 1):
        rho1, _ = radial_dirichlet_solution(first, energy, radius, l)(r)
        rho2, _ = radial_dirichlet_solution(second, energy, radius, l)(r)
        rhs[l] = np.sum(w * dV * rho1 * rho2 * r ** (n - 1))
    scale = max(float(np.abs(lhs).max()), float(np.abs(rhs).max()))
    if scale == 0.0:
        return 0.0
    return float(np.abs(lhs - rhs).max() / scale)


def _interior_norm(values: np.ndarray, weights: np.ndarray) -> float:
    magnitude = np.abs(values) ** 2
    while magnitude.ndim > weights.ndim:
        magnitude = magnitude.sum(axis=0)
    return float(np.sqrt(np.sum(weights * magnitude)))


def _blend(first: SampledPotential, second: SampledPotential, lam: float) -> SampledPotential:
    V1, A1 = first
    V2, A2 = second
    V = SampledField(V1.grid, V1.values + lam * (V2.values - V1.values), "V")
    if A1 is None and A2 is None:
        return V, None
    zero = np.zeros((V1.grid.dimension,) + V1.grid.shape)
    a1 = zero if A1 is None else A1.values
    a2 = zero if A2 is None else A2.values
    return V, SampledField(V1.grid, a1 + lam * (a2 - a1), "A")


def scenario_uniqueness(
    first: PotentialSpec,
    second: PotentialSpec,
    energy: float,
    grid: CartesianGrid,
    degree: int,
    radius: Optional[float] = None,
    lambdas: Sequence[float] = (1.0, 0.5, 0.25),
    reconstruct: bool = False,
    xi: Optional[np.ndarray] = None,
    tau_factors: Sequence[float] = DEFAULT_TAU_FACTORS,
    tolerances: Optional[Dict[str, float]] = None,
    **options,
) -> UniquenessReport:
    """
    Scattering data and interior differences of a potential pair that agrees outside a ball.

    S-matrices are computed by the far-field and representation paths; the interior difference
    is rescaled by each lambda to show that the S-matrix difference vanishes linearly with it.

    Args:
        first: First potential
        second: Second potential
        energy: Energy E > 0
        grid: Sampling grid
        degree: Harmonic degree of the S-matrices
        radius: Ball outside which the pair must agree; defaults to a quarter of the box side
        lambdas: Scale factors of the interior difference
        reconstruct: Also run the CGO Fourier inversion (electric pairs, n = 3)
        xi: Frequencies for the inversion
        tau_factors: tau schedule in units of sqrt(E)
        tolerances: Recorded in the provenance
        **options: Solver options passed to LippmannSchwinger

    Returns:
        UniquenessReport
    """
    radius = 0.25 * grid.side if radius is None else float(radius)
    if (first.magnetic or second.magnetic) and grid.dimension != 3:
        raise DomainError("magnetic pairs need n = 3")
    V1, A1, _ = materialize(first, grid)
    V2, A2, _ = materialize(second, grid)
    pair1: SampledPotential = (V1, A1)
    pair2: SampledPotential = (V2, A2)
    check_agreement(pair1, pair2, radius)

    ls1 = LippmannSchwinger(*pair1, energy, **options)
    ls2 = LippmannSchwinger(*pair2, energy, **options)
    far1 = scattering_matrix(*pair1, energy, degree, ls=ls1)
    far2 = scattering_matrix(*pair2, energy, degree, ls=ls2)
    rep1 = smatrix_via_representation(*pair1, energy, degree, ls=ls1)
    rep2 = smatrix_via_representation(*pair2, energy, degree, ls=ls2)
    differences = {
        "farfield": float(np.linalg.norm(far1.matrix - far2.matrix, 2)),
        "representation": float(np.linalg.norm(rep1.matrix - rep2.matrix, 2)),
    }
    defects = {
        "first/farfield": far1.unitarity_defect,
        "second/farfield": far2.unitarity_defect,
        "first/representation": rep1.unitarity_defect,
        "second/representation": rep2.unitarity_defect,
    }

    weights = ball_weights(grid, radius)
    potential_difference = _interior_norm(V1.values - V2.values, weights)
    _, F1 = sample(first, grid)
    _, F2 = sample(second, grid)
    field_difference = 0.0
    if F1 is not None or F2 is not None:
        f1 = 0.0 if F1 is None else F1.values
        f2 = 0.0 if F2 is None else F2.values
        field_difference = _interior_norm(np.asarray(f1 - f2), weights)

    phi, counterpart = orthogonality_matrix(
        pair1, pair2, energy, degree, radius, smatrices=(far1.matrix, far2.matrix), solvers=(ls1, ls2)
    )
    scale = max(float(np.abs(counterpart).max()), float(np.abs(phi).max()), 1e-300)
    orthogonality = float(np.abs(phi - counterpart).max() / scale) if np.any(phi) or np.any(counterpart) else 0.0
    identities = {"orthogonality": orthogonality}
    if is_radial(first) and is_radial(second):
        try:
            identities["dtn"] = dtn_identity_defect(first, second, energy, radius, degree)
        except (DomainError, ResonanceProximityError) as exc:
            logger.warning(f"DtN identity skipped: {exc}")

    scaling: Dict[float, float] = {}
    for lam in lambdas:
        if lam == 1.0:
            scaling[lam] = differences["farfield"]
            continue
        blended = _blend(pair1, pair2, lam)
        S = scattering_matrix(*blended, energy, degree, **options)
        scaling[float(lam)] = float(np.linalg.norm(far1.matrix - S.matrix, 2))

    reconstruction_error = None
    if reconstruct:
        if A1 is not None or A2 is not None or grid.dimension != 3:
            logger.warning("CGO reconstruction needs an electric pair in three dimensions; skipped")
        else:
            result = fourier_difference(V1, V2, energy, radius, xi, tau_factors)
            reconstruction_error = result.reconstruction_error

    report = UniquenessReport(
        names=(first.name, second.name),
        energy=float(energy),
        smatrix_difference=differences,
        unitarity_defects=defects,
        interior_potential_difference=potential_difference,
        interior_field_difference=field_difference,
        orthogonality_defect=orthogonality,
        identity_defects=identities,
        scaling=scaling,
        reconstruction_error=reconstruction_error,
        provenance={
            "grid": {"dimension": grid.dimension, "points": grid.points, "side": grid.side},
            "degree": degree,
            "radius": radius,
            "hashes": [spec_hash(first), spec_hash(second)],
            "solver": {"method": ls1.method, "condition": [ls1.condition, ls2.condition]},
            "tolerances": dict(tolerances or {}),
            "version": __version__,
        },
    )
    logger.info(
        f"Uniqueness {first.name} vs {second.name}: |S1-S2| = {differences['farfield']:.3e}, "
        f"interior |V1-V2| = {potential_difference:.3e}"
    )
    return report


def _term_signature(term) -> Tuple:
    coefficients = tuple(sorted((term.coefficients or {}).items()))
    return (term.kind, float(term.order), float(term.amplitude), coefficients, tuple(term.axis or ()))


def compare_terms(first: ExpansionSpec, second: ExpansionSpec) -> None:
    """
    Refuse expansions that differ in any homogeneous term.

    Raises:
        AgreementError: Naming the index of the first differing term
    """
    count = max(len(first.terms), len(second.terms))
    for index in range(count):
        a = first.terms[index] if index < len(first.terms) else None
        b = second.terms[index] if index < len(second.terms) else None
        if a is None or b is None or _term_signature(a) != _term_signature(b):
            raise AgreementError(
                f"expansions differ in homogeneous term {index}",
                record={"term": index},
            )


def _expansion_radius(first: ExpansionSpec, second: ExpansionSpec, grid: CartesianGrid) -> float:
    reach = 0.5 * max(first.R, second.R)
    for expansion in (first, second):
        interior = expansion.interior
        if interior.electric:
            reach = max(reach, support_radius(interior))
        if interior.magnetic:
            reach = max(reach, field_support_radius(interior))
    if not np.isfinite(reach):
        return 0.25 * grid.side
    return float(reach + grid.spacing)


def expansion_pipeline(
    first: ExpansionSpec,
    second: ExpansionSpec,
    energy: float,
    grid: CartesianGrid,
    degree: int,
    radius: Optional[float] = None,
    **kwargs,
) -> UniquenessReport:
    """
    Reduce a pair of asymptotic expansions with equal terms to a uniqueness scenario.

    Both expansions are validated and compared term by term, materialized, checked for pointwise
    agreement on the grid annulus outside the interior parts, and passed to scenario_uniqueness.
    Recovering the terms themselves from scattering data is not attempted.
    """
    validate_expansion(first)
    validate_expansion(second)
    compare_terms(first, second)
    spec1 = materialize_expansion(first, name=f"{first.interior.name}-expansion")
    spec2 = materialize_expansion(second, name=f"{second.interior.name}-expansion")
    if radius is None:
        radius = _expansion_radius(first, second, grid)
    V1, A1, _ = materialize(spec1, grid)
    V2, A2, _ = materialize(spec2, grid)
    check_agreement((V1, A1), (V2, A2), radius)
    logger.info(f"Expansions agree outside radius {radius}; running the uniqueness scenario")
    return scenario_uniqueness(spec1, spec2, energy, grid, degree, radius=radius, **kwargs)
