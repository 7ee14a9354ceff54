"""
Curl and divergence calculus, construction of magnetic potentials from fields, and gauge transformations.

Fields are antisymmetric tensors F^{(ij)} = d_i A^{(j)} - d_j A^{(i)} in three dimensions. The
construction splits the transversal gauge A_T(x) = -int_0^1 s F(sx) x ds into a part decaying like
the field (A_reg) and a homogeneous part of order -1 (A_inf), then removes the latter near infinity
with the gradient of eta * U, where U is a contour integral of A_inf.
"""
import logging
from typing import Dict, Literal, Optional, Tuple

import numpy as np

from . import forward
from .exceptions import ConstructionError, DecayClassError, DivergenceError, DomainError, ShapeMismatchError
from .models import CartesianGrid, DirectionGrid, GaugeFunction, PotentialConstruction, PotentialSpec, SampledField
from .numkit import spectral_derivative
from .potentials import ETA_INNER, ETA_OUTER, eta, eta_derivative, evaluate_field, probe_directions, sample

logger = logging.getLogger(__name__)

Contour = Literal["radial-arc", "arc-radial", "detour"]

# Gauss-Legendre rule used on every radial and arc panel
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)

# Upper bound on the radial integration range
MAX_TAIL = 1e6

# Quadrature nodes evaluated per batch (keeps field evaluations around 100 MB)
_NODE_BUDGET = 1 << 20


def curl(A: SampledField) -> SampledField:
    """F^{(ij)} = d_i A^{(j)} - d_j A^{(i)} by spectral differentiation."""
    if A.role != "A" or A.rank != 1:
        raise ShapeMismatchError(f"curl needs a vector potential, got role {A.role} of rank {A.rank}")
    if A.grid.dimension != 3:
        raise DomainError("curl is supported in three dimensions only")
    d = np.stack([np.stack([spectral_derivative(A.values[j], A.grid, i) for j in range(3)]) for i in range(3)])
    F = d - np.swapaxes(d, 0, 1)
    if np.isrealobj(A.values):
        F = F.real
    return SampledField(A.grid, F, "F")


def field_divergence(F: SampledField) -> np.ndarray:
    """Components sum_i d_i F^{(ij)}, indexed by j."""
    if F.rank != 2:
        raise ShapeMismatchError(f"divergence needs a tensor field, got rank {F.rank}")
    n = F.grid.dimension
    return np.stack([sum(spectral_derivative(F.values[i, j], F.grid, i) for i in range(n)) for j in range(n)])


def div_field(F: SampledField) -> float:
    """Max-norm of the divergence of a sampled field."""
    return float(np.abs(field_divergence(F)).max())


def probe_divergence(spec: PotentialSpec, radius: float, step: float = 1e-4, probes: int = 32) -> float:
    """Relative max-norm of div F by central differences at probe points inside the given radius."""
    dirs = probe_directions(3, probes)
    radii = np.linspace(0.05, 1.0, 12) * radius
    x = (radii[:, None, None] * dirs[None]).reshape(-1, 3)
    div = np.zeros((x.shape[0], 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        div += (evaluate_field(spec, x + e)[:, i, :] - evaluate_field(spec, x - e)[:, i, :]) / (2.0 * step)
    scale = max(float(np.abs(evaluate_field(spec, x)).max()), 1e-300)
    return float(np.abs(div).max() / scale)


def field_support_radius(spec: PotentialSpec, floor: float = 1e-17) -> float:
    """Radius beyond which the magnetic field vanishes, infinite for algebraic tails."""
    radius = 0.0
    for profile in spec.magnetic:
        p = profile.params
        offset = 0.0 if p.get("center") is None else float(np.linalg.norm(p["center"]))
        if profile.family == "uniform":
            radius = max(radius, offset + float(p.get("radius", 1.0)))
            continue
        kind = p.get("profile", "bump")
        width = float(p.get("width", 1.0))
        if kind == "bump":
            radius = max(radius, offset + width)
        elif kind == "gaussian":
            amp = abs(float(p.get("amplitude", 1.0)) * float(p.get("scale", 1.0)))
            if amp > floor:
                radius = max(radius, offset + width * np.sqrt(np.log(amp / floor)))
        else:
            radius = np.inf
    if spec.cutoff is not None:
        radius = min(radius, spec.cutoff)
    return float(radius)


def tail_radius(spec: PotentialSpec, tolerance: float) -> float:
    """
    Upper limit T of the radial integrals.

    Compactly supported fields integrate to their support radius. Otherwise T is chosen so that
    the declared bound C(1+t)^{-1-rho} leaves a tail below tolerance.
    """
    support = field_support_radius(spec)
    if np.isfinite(support):
        return support
    if spec.rho <= 1.0:
        raise DecayClassError(
            f"radial integrals diverge for rho={spec.rho}", record={"rho": spec.rho}
        )
    T = (spec.C / ((spec.rho - 1.0) * tolerance)) ** (1.0 / (spec.rho - 1.0))
    if T > MAX_TAIL:
        raise DecayClassError(
            f"field tail needs integration to T={T:.3g} for tolerance {tolerance:g}; loosen the tolerance or set a cutoff",
            record={"tail": T, "tolerance": tolerance, "rho": spec.rho},
        )
    return float(T)


def _panel_moment(spec: PotentialSpec, unit: np.ndarray, lo: np.ndarray, hi: np.ndarray, panels: int) -> np.ndarray:
    edges = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, panels + 1)[None, :]
    half = 0.5 * (edges[:, 1:] - edges[:, :-1])
    mid = 0.5 * (edges[:, 1:] + edges[:, :-1])
    t = (mid[:, :, None] + half[:, :, None] * _GL_X).reshape(len(unit), -1)
    w = (half[:, :, None] * _GL_W).reshape(len(unit), -1)
    F = evaluate_field(spec, t[..., None] * unit[:, None, :])
    Fu = np.einsum("mqij,mj->mqi", F, unit)
    return np.einsum("mq,mqi->mi", w * t, Fu)


def radial_moment(
    spec: PotentialSpec,
    unit: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    tolerance: float = 1e-10,
    max_panels: int = 512,
) -> np.ndarray:
    """
    Integral of t F(t u) u over t in [lower, upper] for every row u.

    Composite Gauss-Legendre; the panel count doubles until the result changes by less than tolerance.
    """
    unit = np.atleast_2d(unit)
    lower = np.broadcast_to(np.asarray(lower, float), unit.shape[:1])
    upper = np.broadcast_to(np.asarray(upper, float), unit.shape[:1])
    out = np.zeros(unit.shape)
    if not spec.magnetic or unit.shape[0] == 0:
        return out
    panels = 4
    change = np.inf
    while True:
        rows = max(1, _NODE_BUDGET // (panels * len(_GL_X) * 9))
        current = np.concatenate(
            [
                _panel_moment(spec, unit[s : s + rows], lower[s : s + rows], upper[s : s + rows], panels)
                for s in range(0, unit.shape[0], rows)
            ]
        )
        if panels > 4:
            change = float(np.abs(current - out).max())
            if change <= tolerance * (1.0 + float(np.abs(current).max())):
                return current
        if panels >= max_panels:
            logger.warning(f"Radial quadrature stopped at {panels} panels with change {change:.3g}")
            return current
        out = current
        panels *= 2


def _arc(u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Arc angle and in-plane unit vector w of the great circle y = cos(t) u + sin(t) w."""
    c = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    w = v - c[:, None] * u
    norm = np.linalg.norm(w, axis=-1)
    w = w / np.where(norm > 0, norm, 1.0)[:, None]
    return np.arccos(c), w


def arc_integral(construction: PotentialConstruction, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Integral of A_inf along the great-circle arc from direction u to direction v (radius free)."""
    theta, w = _arc(u, v)
    panels = max(1, int(np.ceil(theta.max(initial=0.0) / (np.pi / 8))))
    edges = np.linspace(0.0, 1.0, panels + 1)
    s = (0.5 * (edges[1:] + edges[:-1])[:, None] + 0.5 * (edges[1:] - edges[:-1])[:, None] * _GL_X).ravel()
    ws = (0.5 * (edges[1:] - edges[:-1])[:, None] * _GL_W).ravel()
    t = theta[:, None] * s[None, :]
    y = np.cos(t)[..., None] * u[:, None, :] + np.sin(t)[..., None] * w[:, None, :]
    tangent = -np.sin(t)[..., None] * u[:, None, :] + np.cos(t)[..., None] * w[:, None, :]
    m, q = t.shape
    a = radial_moment(
        construction.field_spec, y.reshape(-1, 3), 0.0, construction.tail, construction.tolerance
    ).reshape(m, q, 3)
    return -theta * np.einsum("q,mq->m", ws, np.sum(a * tangent, axis=-1))


def _radial_segment(construction: PotentialConstruction, u: np.ndarray, r0: np.ndarray, r1: np.ndarray) -> np.ndarray:
    a = radial_moment(construction.field_spec, u, 0.0, construction.tail, construction.tolerance)
    return -np.sum(a * u, axis=-1) * np.log(r1 / r0)


def _detour_direction(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    d = np.cross(u, v)
    norm = np.linalg.norm(d, axis=-1)
    fallback = np.cross(u, np.array([0.0, 0.0, 1.0]))
    small = np.linalg.norm(fallback, axis=-1) < 1e-8
    fallback[small] = np.cross(u[small], np.array([1.0, 0.0, 0.0]))
    d = np.where((norm > 1e-8)[:, None], d, fallback)
    return d / np.linalg.norm(d, axis=-1)[:, None]


def contour_potential(construction: PotentialConstruction, points: np.ndarray, contour: Contour = "radial-arc") -> np.ndarray:
    """
    U(x) = integral of A_inf along a contour from the base point to x avoiding the origin.

    radial-arc runs radially to |x| then along a great circle; arc-radial does the reverse;
    detour passes through a direction orthogonal to both end points.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise DomainError("the contour potential is undefined at the origin")
    v = x / r[:, None]
    x0 = np.asarray(construction.base_point, dtype=float)
    r0 = np.full(r.shape, np.linalg.norm(x0))
    u = np.broadcast_to(x0 / r0[0], x.shape).copy()
    antipodal = np.sum(u * v, axis=-1) < -1.0 + 1e-12
    if contour == "detour" or antipodal.any():
        d = _detour_direction(u, v)
        via = arc_integral(construction, u, d) + arc_integral(construction, d, v)
        if contour != "detour":
            direct = arc_integral(construction, u, v)
            via = np.where(antipodal, via, direct)
        return via + _radial_segment(construction, v, r0, r)
    arc = arc_integral(construction, u, v)
    if contour == "radial-arc":
        return _radial_segment(construction, u, r0, r) + arc
    if contour == "arc-radial":
        return arc + _radial_segment(construction, v, r0, r)
    raise DomainError(f"unknown contour {contour!r}")


def construction_parts(
    construction: PotentialConstruction, points: np.ndarray, contour: Contour = "radial-arc"
) -> Dict[str, np.ndarray]:
    """
    Evaluate A_reg, A_inf, U, eta and the assembled A at points of shape (..., 3).

    Values that are singular at the origin (A_reg, A_inf) are reported as 0 there; A itself is
    regular and equals the transversal gauge wherever eta = 0.
    """
    pts = np.asarray(points, dtype=float)
    x = pts.reshape(-1, 3)
    r = np.linalg.norm(x, axis=-1)
    R = construction.radius
    spec, T, tol = construction.field_spec, construction.tail, construction.tolerance
    nz = r > 0
    unit = np.zeros_like(x)
    unit[nz] = x[nz] / r[nz, None]

    A_reg = np.zeros_like(x)
    A_inf = np.zeros_like(x)
    U = np.zeros(r.shape)
    A = np.zeros_like(x)
    lo, hi = construction.inner, construction.outer
    e = eta(r, R, lo, hi)

    inner = nz & (r <= lo * R)
    outer = nz & ~inner
    if inner.any():
        A[inner] = -radial_moment(spec, unit[inner], 0.0, r[inner], tol) / r[inner, None]
    if nz.any():
        full = radial_moment(spec, unit[nz], 0.0, T, tol)
        upper = np.maximum(r[nz], T)
        tail = radial_moment(spec, unit[nz], r[nz], upper, tol)
        A_reg[nz] = tail / r[nz, None]
        A_inf[nz] = -full / r[nz, None]
    shell = nz & (r > lo * R) & (r < hi * R)
    if shell.any():
        U[shell] = contour_potential(construction, x[shell], contour)
    grad_eta = eta_derivative(r, R, lo, hi)[:, None] * unit
    A[outer] = A_reg[outer] + (1.0 - e[outer, None]) * A_inf[outer] - U[outer, None] * grad_eta[outer]

    shape = pts.shape[:-1]
    return {
        "A_reg": A_reg.reshape(shape + (3,)),
        "A_inf": A_inf.reshape(shape + (3,)),
        "U": U.reshape(shape),
        "eta": e.reshape(shape),
        "A": A.reshape(shape + (3,)),
    }


def _verification_points(construction: PotentialConstruction, count: int = 6) -> Tuple[np.ndarray, np.ndarray]:
    """Points inside the eta shell (contour checks) and across it (curl checks)."""
    R, lo, hi = construction.radius, construction.inner, construction.outer
    dirs = probe_directions(3, count)
    shell = 0.5 * (lo + hi) * R * dirs
    radii = np.array([0.5 * lo, 0.5 * (lo + hi), 0.5 * (hi + 1.0)]) * R
    return shell, (radii[:, None, None] * dirs[None]).reshape(-1, 3)


def curl_defect(construction: PotentialConstruction, points: np.ndarray, step: Optional[float] = None) -> float:
    """Relative max-norm of curl A - F at points, with curl A by central differences."""
    h = 1e-4 * construction.radius if step is None else step
    offsets = np.concatenate([np.zeros((1, 3)), h * np.eye(3), -h * np.eye(3)])
    A = construction_parts(construction, points[:, None, :] + offsets[None, :, :])["A"]
    jacobian = (A[:, 1:4, :] - A[:, 4:7, :]) / (2.0 * h)
    F = jacobian - np.swapaxes(jacobian, -1, -2)
    expected = evaluate_field(construction.field_spec, points)
    scale = float(np.abs(expected).max())
    error = float(np.abs(F - expected).max())
    defect = error / scale if scale > 0.0 else error
    construction.curl_defect = defect
    return defect


def potential_from_field(
    spec: PotentialSpec,
    grid: Optional[CartesianGrid] = None,
    radius: Optional[float] = None,
    base_point: Optional[np.ndarray] = None,
    cutoff: Tuple[float, float] = (ETA_INNER, ETA_OUTER),
    tolerance: float = 1e-10,
    div_tol: float = 1e-4,
    path_tol: float = 1e-6,
    curl_tol: float = 1e-4,
) -> PotentialConstruction:
    """
    Build a vector potential whose curl is the given magnetic field.

    Before anything is sampled the construction is checked at sample points: U must agree along
    the three contours, and the finite-difference curl of A must reproduce F.

    Args:
        spec: Potential whose magnetic part is the field F
        grid: When given, every part of the construction is sampled on it
        radius: Radius R beyond which A = A_reg (defaults to the decay radius)
        base_point: Start x0 of the contour integrals (defaults to R e_1)
        cutoff: Plateau ends (inner, outer) of eta as fractions of R; eta = 0 below inner R
            and eta = 1 above outer R, so 0 < inner < outer <= 1
        tolerance: Radial quadrature and tail tolerance
        div_tol: Largest accepted relative divergence of F
        path_tol: Largest accepted contour disagreement of U, relative to 1 + max |U|
        curl_tol: Largest accepted relative defect of curl A against F

    Returns:
        PotentialConstruction with sampled parts when a grid is given

    Raises:
        DivergenceError: If F is not divergence free
        DecayClassError: If the radial integrals cannot be truncated
        ConstructionError: If the contour or curl check fails
    """
    if spec.dimension != 3:
        raise DomainError("magnetic potentials are constructed in three dimensions only")
    inner, outer = (float(c) for c in cutoff)
    if not 0.0 < inner < outer <= 1.0:
        raise DomainError(f"eta cutoff needs 0 < inner < outer <= 1, got ({inner}, {outer})")
    R = float(radius if radius is not None else spec.R)
    x0 = np.array([R, 0.0, 0.0]) if base_point is None else np.asarray(base_point, dtype=float)
    if np.linalg.norm(x0) == 0.0:
        raise DomainError("the contour base point must differ from the origin")

    residual = 0.0
    T = 0.0
    if spec.magnetic:
        T = tail_radius(spec, tolerance)
        support = field_support_radius(spec)
        residual = probe_divergence(spec, min(T, support) if np.isfinite(support) else 4.0 * spec.R)
        if residual > div_tol:
            raise DivergenceError(
                f"magnetic field of {spec.name} has relative divergence {residual:.3g} > {div_tol:g}",
                record={"divergence": residual, "tolerance": div_tol},
            )
    construction = PotentialConstruction(
        field_spec=spec,
        base_point=x0,
        radius=R,
        tail=T,
        inner=inner,
        outer=outer,
        tolerance=tolerance,
        div_residual=residual,
    )
    if spec.magnetic:
        shell, across = _verification_points(construction)
        defect = path_defect(construction, shell)
        scale = 1.0 + float(np.abs(contour_potential(construction, shell)).max())
        if defect > path_tol * scale:
            raise ConstructionError(
                f"contour potential of {spec.name} depends on the path: {defect:.3g}",
                record={"path_defect": defect, "tolerance": path_tol * scale},
            )
        defect = curl_defect(construction, across)
        if defect > curl_tol:
            raise ConstructionError(
                f"curl of the constructed potential misses F of {spec.name} by {defect:.3g} (relative)",
                record={"curl_defect": defect, "tolerance": curl_tol},
            )
    if grid is None:
        return construction

    parts = construction_parts(construction, grid.coordinates())
    construction.A_reg = SampledField(grid, np.moveaxis(parts["A_reg"], -1, 0), "A")
    construction.A_inf = SampledField(grid, np.moveaxis(parts["A_inf"], -1, 0), "A")
    construction.U = SampledField(grid, parts["U"], "gauge")
    construction.eta = SampledField(grid, parts["eta"], "gauge")
    construction.A = SampledField(grid, np.moveaxis(parts["A"], -1, 0), "A")
    logger.info(f"Constructed A for {spec.name}: tail T={T:.3g}, div residual {residual:.2e}")
    return construction


def path_defect(construction: PotentialConstruction, points: np.ndarray) -> float:
    """Largest disagreement of U between the three contours at the given points."""
    values = [contour_potential(construction, points, c) for c in ("radial-arc", "arc-radial", "detour")]
    defect = max(float(np.abs(values[0] - v).max()) for v in values[1:])
    construction.path_defect = defect
    return defect


def materialize(
    spec: PotentialSpec, grid: CartesianGrid, oversample: int = 1, **construction_options
) -> Tuple[SampledField, Optional[SampledField], Optional[PotentialConstruction]]:
    """Sampled V and, for magnetic specs, the constructed A on a grid."""
    V, _ = sample(spec, grid, oversample)
    if not spec.magnetic:
        return V, None, None
    construction = potential_from_field(spec, grid=grid, **construction_options)
    return V, construction.A, construction


def evaluate_gauge(psi: GaugeFunction, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Values and gradients of a gauge function at points of shape (..., n)."""
    x = np.asarray(points, dtype=float)
    if psi.family == "zero" or psi.amplitude == 0.0:
        return np.zeros(x.shape[:-1]), np.zeros(x.shape)
    center = np.asarray(psi.center, dtype=float) if psi.center else np.zeros(psi.dimension)
    d = x - center
    r2 = np.sum(d ** 2, axis=-1)
    w2 = psi.width ** 2
    if psi.family == "gaussian":
        value = psi.amplitude * np.exp(-r2 / w2)
        return value, (-2.0 / w2 * value)[..., None] * d
    if psi.family == "bump":
        u = r2 / w2
        inside = u < 1.0
        denom = np.where(inside, 1.0 - u, 1.0)
        value = np.where(inside, psi.amplitude * np.exp(1.0 - 1.0 / denom), 0.0)
        return value, (np.where(inside, -2.0 / w2 / denom ** 2, 0.0) * value)[..., None] * d
    raise DomainError(f"unknown gauge family {psi.family!r}")


def validate_gauge(psi: GaugeFunction, probes: int = 16) -> None:
    """Check |psi| <= C(1+r)^{-mu} and |grad psi| <= C(1+r)^{-1-mu} on probe rays."""
    if psi.mu <= 0.0:
        raise DecayClassError(f"gauge decay exponent must be positive, got {psi.mu}", record={"mu": psi.mu})
    r = np.linspace(1.0, 4.0, 16)
    points = r[:, None, None] * probe_directions(psi.dimension, probes)[None]
    value, grad = evaluate_gauge(psi, points)
    weight = (1.0 + r)[:, None]
    worst = max(
        float((np.abs(value) * weight ** psi.mu).max()),
        float((np.linalg.norm(grad, axis=-1) * weight ** (1.0 + psi.mu)).max()),
    )
    if worst > psi.C:
        raise DecayClassError(
            f"gauge function violates its decay bound: {worst:.3g} > C={psi.C}",
            record={"worst": worst, "C": psi.C, "mu": psi.mu},
        )


def gauge_transform(
    A: Optional[SampledField], psi: GaugeFunction, grid: Optional[CartesianGrid] = None
) -> Optional[SampledField]:
    """
    Return A + grad psi sampled on the grid of A.

    A may be None (no magnetic potential) when a grid is given. A zero gauge returns A unchanged.
    """
    grid = A.grid if A is not None else grid
    if grid is None:
        raise ShapeMismatchError("gauge_transform needs a vector potential or a grid")
    if grid.dimension != 3 or psi.dimension != 3:
        raise DomainError("gauge transformations of vector potentials are three dimensional")
    if psi.family == "zero" or psi.amplitude == 0.0:
        return A
    validate_gauge(psi)
    _, grad = evaluate_gauge(psi, grid.coordinates())
    grad = np.moveaxis(grad, -1, 0)
    base = A.values if A is not None else 0.0
    return SampledField(grid, base + grad, "A")


def gauge_phase(psi: GaugeFunction, grid: CartesianGrid) -> np.ndarray:
    """Phase e^{i psi} mapping solutions for A to solutions for A + grad psi."""
    value, _ = evaluate_gauge(psi, grid.coordinates())
    return np.exp(1j * value)


def gauge_invariance_defect(
    V: SampledField,
    A: Optional[SampledField],
    psi: GaugeFunction,
    energy: float,
    degree: int,
    dirs: Optional[DirectionGrid] = None,
    **solver_options,
) -> float:
    """
    Operator norm of S(E; V, A) - S(E; V, A + grad psi) in the harmonic basis up to degree.

    Both matrices come from the far-field path of the forward solver.
    """
    A2 = gauge_transform(A, psi, V.grid)
    if A2 is A:
        return 0.0
    S1 = forward.scattering_matrix(V, A, energy, degree, dirs, **solver_options)
    S2 = forward.scattering_matrix(V, A2, energy, degree, dirs, **solver_options)
    defect = float(np.linalg.norm(S1.matrix - S2.matrix, 2))
    logger.info(f"Gauge invariance defect at E={energy}: {defect:.3e}")
    return defect
