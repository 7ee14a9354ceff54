"""
Potential descriptions, decay validation, grid sampling and the perturbation operator Q.
"""
import hashlib
import json
import logging
import struct
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .exceptions import (
    DecayClassError,
    DomainError,
    ScatlabError,
    ShapeMismatchError,
    SingularEvaluationError,
)
from .models import (
    CartesianGrid,
    DecayReport,
    ExpansionSpec,
    HomogeneousTerm,
    PotentialSpec,
    Profile,
    SampledField,
)
from .numkit import harmonic_eval, spectral_divergence

logger = logging.getLogger(__name__)

FIELD_MAGIC = b"SCFD"
FIELD_VERSION = 1

# Inner cutoff plateau, as fractions of the decay radius R
ETA_INNER = 0.2
ETA_OUTER = 0.5

PathLike = Union[str, Path]


def ramp(t: np.ndarray) -> np.ndarray:
    """Quintic smoothstep: 0 for t <= 0, 1 for t >= 1, C2 at both ends."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def ramp_derivative(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return 30.0 * t ** 2 * (1.0 - t) ** 2


def eta(r: np.ndarray, R: float, inner: float = ETA_INNER, outer: float = ETA_OUTER) -> np.ndarray:
    """Inner cutoff: 0 for r < inner R, 1 for r > outer R."""
    return ramp((np.asarray(r) - inner * R) / ((outer - inner) * R))


def eta_derivative(r: np.ndarray, R: float, inner: float = ETA_INNER, outer: float = ETA_OUTER) -> np.ndarray:
    width = (outer - inner) * R
    return ramp_derivative((np.asarray(r) - inner * R) / width) / width


def taper(r: np.ndarray, cutoff: float) -> np.ndarray:
    """Outer truncation: 1 for r < 0.8 cutoff, 0 for r > cutoff."""
    return 1.0 - ramp((np.asarray(r) - 0.8 * cutoff) / (0.2 * cutoff))


def taper_derivative(r: np.ndarray, cutoff: float) -> np.ndarray:
    return -ramp_derivative((np.asarray(r) - 0.8 * cutoff) / (0.2 * cutoff)) / (0.2 * cutoff)


def _center(params: Dict[str, Any], n: int) -> np.ndarray:
    c = params.get("center")
    return np.zeros(n) if c is None else np.asarray(c, dtype=float)


def _angular(params: Dict[str, Any], x: np.ndarray, r: np.ndarray) -> np.ndarray:
    harmonics = params.get("harmonics")
    if not harmonics:
        return np.ones(r.shape)
    n = x.shape[-1]
    unit = x / np.where(r > 0, r, 1.0)[..., None]
    total = np.zeros(r.shape, dtype=complex)
    for l, m, c in harmonics:
        total += complex(c) * harmonic_eval(n, int(l), int(m), unit)
    return total.real


def _electric_zero(params: Dict[str, Any], x: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    return np.zeros(x.shape[:-1])


def _electric_gaussian(params: Dict[str, Any], x: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    d = x - _center(params, x.shape[-1])
    width = float(params.get("width", 0.5))
    return float(params.get("amplitude", 1.0)) * np.exp(-np.sum(d ** 2, axis=-1) / width ** 2)


def _electric_well(params: Dict[str, Any], x: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    r = np.linalg.norm(x - _center(params, x.shape[-1]), axis=-1)
    return np.where(r < float(params.get("radius", 1.0)), float(params.get("value", -1.0)), 0.0)


def _electric_homogeneous(params: Dict[str, Any], x: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    r = np.linalg.norm(x, axis=-1)
    order = float(params["order"])
    amplitude = float(params.get("amplitude", 1.0))
    if not params.get("regularize", True):
        if np.any(r == 0.0):
            raise SingularEvaluationError(
                f"homogeneous term of order {order} evaluated at the origin without a cutoff"
            )
        return amplitude * r ** (-order) * _angular(params, x, r)
    safe = np.where(r > 0, r, 1.0)
    return amplitude * eta(r, spec.R) * safe ** (-order) * _angular(params, x, r)


def _electric_algebraic(params: Dict[str, Any], x: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    r = np.linalg.norm(x - _center(params, x.shape[-1]), axis=-1)
    return float(params.get("amplitude", 1.0)) * (1.0 + r) ** (-float(params["order"]))


def _electric_table(params: Dict[str, Any], x: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    r = np.linalg.norm(x, axis=-1)
    return np.interp(r, np.asarray(params["r"], float), np.asarray(params["values"], float), right=0.0)


ELECTRIC_FAMILIES: Dict[str, Callable[[Dict[str, Any], np.ndarray, PotentialSpec], np.ndarray]] = {
    "zero": _electric_zero,
    "gaussian": _electric_gaussian,
    "well": _electric_well,
    "homogeneous": _electric_homogeneous,
    "algebraic": _electric_algebraic,
    "table": _electric_table,
}


def vortex_profile(params: Dict[str, Any], r: np.ndarray, spec: PotentialSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Return g(r) and g'(r) of the vortex potential A = g(|x - c|) m x (x - c)."""
    kind = params.get("profile", "bump")
    a = float(params.get("width", 1.0))
    amp = float(params.get("amplitude", 1.0))
    r = np.asarray(r, dtype=float)
    if kind == "bump":
        u = (r / a) ** 2
        inside = u < 1.0
        denom = np.where(inside, 1.0 - u, 1.0)
        g = np.where(inside, amp * np.exp(1.0 - 1.0 / denom), 0.0)
        dg = np.where(inside, g * (-2.0 * r / a ** 2) / denom ** 2, 0.0)
    elif kind == "gaussian":
        g = amp * np.exp(-(r / a) ** 2)
        dg = -2.0 * r / a ** 2 * g
    elif kind == "power":
        q = float(params["order"])
        g = amp * (1.0 + (r / a) ** 2) ** (-0.5 * q)
        dg = -q * r / a ** 2 / (1.0 + (r / a) ** 2) * g
    elif kind == "homogeneous":
        q = float(params["order"])
        safe = np.where(r > 0, r, 1.0)
        e, de = eta(r, spec.R), eta_derivative(r, spec.R)
        g = amp * e * safe ** (-q)
        dg = amp * (de * safe ** (-q) - q * e * safe ** (-q - 1.0))
    else:
        raise DomainError(f"unknown vortex profile {kind!r}")
    if spec.cutoff is not None:
        t, dt = taper(r, spec.cutoff), taper_derivative(r, spec.cutoff)
        g, dg = g * t, dg * t + g * dt
    return g, dg


def vortex_potential(profile: Profile, points: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    """Closed-form vector potential of a vortex profile at points of shape (..., 3)."""
    params = profile.params
    scale = float(params.get("scale", 1.0))
    d = np.asarray(points, float) - _center(params, 3)
    m = np.asarray(params.get("axis", (0.0, 0.0, 1.0)), dtype=float)
    g, _ = vortex_profile(params, np.linalg.norm(d, axis=-1), spec)
    return scale * g[..., None] * np.cross(m, d)


def _levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k], eps[j, i, k] = 1.0, -1.0
    return eps


LEVI_CIVITA = _levi_civita()


def _magnetic_vortex(params: Dict[str, Any], x: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    d = x - _center(params, 3)
    r = np.linalg.norm(d, axis=-1)
    m = np.asarray(params.get("axis", (0.0, 0.0, 1.0)), dtype=float)
    g, dg = vortex_profile(params, r, spec)
    mx = np.cross(m, d)
    outer = np.einsum("...i,...j->...ij", d, mx)
    radial = np.where(r > 0, dg / np.where(r > 0, r, 1.0), 0.0)
    rot = np.einsum("ija,a->ij", LEVI_CIVITA, m)
    return 2.0 * g[..., None, None] * rot + radial[..., None, None] * (outer - np.swapaxes(outer, -1, -2))


def _magnetic_uniform(params: Dict[str, Any], x: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    b = np.asarray(params.get("b", (0.0, 0.0, 1.0)), dtype=float)
    r = np.linalg.norm(x - _center(params, 3), axis=-1)
    chi = taper(r, float(params.get("radius", 1.0)))
    return chi[..., None, None] * np.einsum("ijk,k->ij", LEVI_CIVITA, b)


MAGNETIC_FAMILIES: Dict[str, Callable[[Dict[str, Any], np.ndarray, PotentialSpec], np.ndarray]] = {
    "vortex": _magnetic_vortex,
    "uniform": _magnetic_uniform,
}


def _lookup(registry: Dict[str, Callable], family: str) -> Callable:
    try:
        return registry[family]
    except KeyError:
        raise DomainError(f"unknown potential family {family!r}; known: {sorted(registry)}")


def evaluate_electric(spec: PotentialSpec, points: np.ndarray) -> np.ndarray:
    """Electric potential V at points of shape (..., n)."""
    x = np.asarray(points, dtype=float)
    if x.shape[-1] != spec.dimension:
        raise ShapeMismatchError(f"points of shape {x.shape} do not match dimension {spec.dimension}")
    total = np.zeros(x.shape[:-1])
    for profile in spec.electric:
        fn = _lookup(ELECTRIC_FAMILIES, profile.family)
        total = total + float(profile.params.get("scale", 1.0)) * fn(profile.params, x, spec)
    if spec.cutoff is not None:
        total = total * taper(np.linalg.norm(x, axis=-1), spec.cutoff)
    return total


def evaluate_field(spec: PotentialSpec, points: np.ndarray) -> np.ndarray:
    """Magnetic field F^{(ij)} at points; trailing axes hold the 3x3 antisymmetric tensor."""
    x = np.asarray(points, dtype=float)
    total = np.zeros(x.shape[:-1] + (3, 3))
    if not spec.magnetic:
        return total
    if spec.dimension != 3:
        raise DomainError("magnetic fields are supported in three dimensions only")
    for profile in spec.magnetic:
        fn = _lookup(MAGNETIC_FAMILIES, profile.family)
        total = total + float(profile.params.get("scale", 1.0)) * fn(profile.params, x, spec)
    return total


def probe_directions(n: int, count: int) -> np.ndarray:
    """Deterministic, roughly uniform unit vectors (Fibonacci lattice in 3D)."""
    if n == 2:
        theta = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    phi = np.pi * (1.0 + np.sqrt(5.0)) * i
    s = np.sqrt(1.0 - z ** 2)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)


def validate_decay(spec: PotentialSpec, probes: int = 16, radii: int = 16) -> DecayReport:
    """
    Probe V (and F) on rays at r in [R, 4R] against the declared short-range bound.

    Args:
        spec: Potential with decay metadata (rho, C, R)
        probes: Number of rays, at least 8
        radii: Number of radii per ray

    Returns:
        DecayReport with the worst ratio |V|(1+r)^rho / C (and the field ratio when F is present)
    """
    if probes < 8:
        raise DomainError(f"at least 8 probe rays are required, got {probes}")
    if spec.rho <= 1.0:
        raise DecayClassError(
            f"decay exponent rho={spec.rho} is outside the short-range class rho > 1",
            record={"rho": spec.rho},
        )
    dirs = probe_directions(spec.dimension, probes)
    r = np.linspace(spec.R, 4.0 * spec.R, radii)
    points = r[:, None, None] * dirs[None, :, :]
    weight = (1.0 + r)[:, None]

    ratio = np.abs(evaluate_electric(spec, points)) * weight ** spec.rho / spec.C
    worst = np.unravel_index(np.argmax(ratio), ratio.shape)
    worst_ratio = float(ratio[worst])
    field_ratio = None
    passed = worst_ratio <= 1.0 + 1e-12
    if spec.magnetic:
        F = np.abs(evaluate_field(spec, points)).max(axis=(-1, -2))
        fr = F * weight ** (1.0 + spec.rho) / spec.C
        field_ratio = float(fr.max())
        passed = passed and field_ratio <= 1.0 + 1e-12
    if not passed:
        logger.warning(f"Potential {spec.name} violates its decay bound: worst ratio {worst_ratio:.4g}")
    return DecayReport(
        passed=passed,
        worst_ratio=worst_ratio,
        worst_point=tuple(float(v) for v in points[worst]),
        field_ratio=field_ratio,
        probes=probes,
    )


def tail_bound(spec: PotentialSpec) -> Optional[float]:
    """Bound on the neglected tail C(1 + cutoff)^{-rho}, None when nothing is truncated."""
    if spec.cutoff is None:
        return None
    return float(spec.C * (1.0 + spec.cutoff) ** (-spec.rho))


def _cell_offsets(grid: CartesianGrid, oversample: int) -> List[np.ndarray]:
    if oversample < 1:
        raise DomainError(f"oversample must be >= 1, got {oversample}")
    base = grid.spacing * ((np.arange(oversample) + 0.5) / oversample - 0.5)
    mesh = np.meshgrid(*([base] * grid.dimension), indexing="ij")
    return list(np.stack([m.ravel() for m in mesh], axis=-1))


def _cell_average(fn: Callable[[np.ndarray], np.ndarray], grid: CartesianGrid, oversample: int) -> np.ndarray:
    x = grid.coordinates()
    offsets = _cell_offsets(grid, oversample)
    total = sum(fn(x + off) for off in offsets)
    return total / len(offsets)


def sample(
    spec: PotentialSpec, grid: CartesianGrid, oversample: int = 1
) -> Tuple[SampledField, Optional[SampledField]]:
    """
    Sample V and F of a potential on a grid.

    Each value is the average over oversample^n sub-cell points; oversample=1 is the midpoint rule.
    Returns (V, F) with F None when the spec has no magnetic part.
    """
    if grid.dimension != spec.dimension:
        raise ShapeMismatchError(f"grid dimension {grid.dimension} differs from spec {spec.dimension}")
    if 0.5 * grid.side < 2.0 * spec.R:
        raise DomainError(f"grid box of side {grid.side} does not contain the ball of radius {2 * spec.R}")
    V = SampledField(grid, _cell_average(lambda x: evaluate_electric(spec, x), grid, oversample), "V")
    if not spec.magnetic:
        return V, None
    F = _cell_average(lambda x: evaluate_field(spec, x), grid, oversample)
    F = np.moveaxis(F, (-2, -1), (0, 1))
    return V, SampledField(grid, F, "F")


def perturbation_coefficient(V: SampledField, A: Optional[SampledField]) -> np.ndarray:
    """Multiplicative part V + A^2 + i div A of the perturbation Q."""
    c = V.values.astype(complex)
    if A is None:
        return c
    _check_pair(V, A)
    return c + np.sum(A.values ** 2, axis=0) + 1j * spectral_divergence(A.values, A.grid)


def _check_pair(V: SampledField, A: SampledField) -> None:
    if A.grid != V.grid:
        raise ShapeMismatchError("V and A are sampled on different grids")
    if A.rank != 1 or A.role != "A":
        raise ShapeMismatchError(f"expected a vector potential, got role {A.role} of rank {A.rank}")
    if A.grid.dimension != 3:
        raise DomainError("vector potentials are supported in three dimensions only")


def apply_Q(
    V: SampledField, A: Optional[SampledField], phi: SampledField, grad_phi: SampledField
) -> SampledField:
    """
    Apply Q = 2iA.grad + i div A + A^2 + V pointwise.

    Args:
        V: Electric potential
        A: Vector potential or None
        phi: Scalar field
        grad_phi: Gradient of phi, components first

    Returns:
        Q phi as a source field
    """
    for f in (phi, grad_phi):
        if f.grid != V.grid:
            raise ShapeMismatchError(f"{f.role} field is sampled on a different grid")
    if phi.rank != 0 or grad_phi.rank != 1:
        raise ShapeMismatchError("apply_Q needs a scalar field and its gradient")
    out = perturbation_coefficient(V, A) * phi.values
    if A is not None:
        out = out + 2j * np.sum(A.values * grad_phi.values, axis=0)
    return SampledField(V.grid, out, "source")


def support_radius(spec: PotentialSpec, floor: float = 1e-16) -> float:
    """Radius beyond which a radial potential vanishes (or drops below floor)."""
    radius = 0.0
    for profile in spec.electric:
        p = profile.params
        if profile.family == "zero":
            continue
        if profile.family == "well":
            radius = max(radius, float(p.get("radius", 1.0)))
        elif profile.family == "gaussian":
            amp = abs(float(p.get("amplitude", 1.0)) * float(p.get("scale", 1.0)))
            if amp > floor:
                radius = max(radius, float(p.get("width", 0.5)) * np.sqrt(np.log(amp / floor)))
        elif profile.family == "table":
            radius = max(radius, float(np.max(p["r"])))
        else:
            radius = np.inf
    if spec.cutoff is not None:
        radius = min(radius, spec.cutoff)
    return float(radius)


def is_radial(spec: PotentialSpec) -> bool:
    if spec.magnetic:
        return False
    for profile in spec.electric:
        p = profile.params
        if p.get("center") is not None and np.any(np.asarray(p["center"], float) != 0.0):
            return False
        if profile.family == "homogeneous" and p.get("harmonics"):
            return False
    return True


def radial_profile(spec: PotentialSpec) -> Tuple[Callable[[np.ndarray], np.ndarray], List[float], float]:
    """
    Radial function V(r), its breakpoints and its support radius.

    Raises:
        DomainError: If the spec is not radial or not compactly supported
    """
    if not is_radial(spec):
        raise DomainError(f"potential {spec.name} is not radial")
    support = support_radius(spec)
    if not np.isfinite(support):
        raise DomainError(f"potential {spec.name} has no finite support radius; set a cutoff")
    n = spec.dimension
    axis = np.zeros(n)
    axis[0] = 1.0

    def V(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return evaluate_electric(spec, r[..., None] * axis)

    breaks = set()
    for profile in spec.electric:
        if profile.family == "well":
            breaks.add(float(profile.params.get("radius", 1.0)))
        elif profile.family == "table":
            breaks.update(float(v) for v in profile.params["r"])
    if spec.cutoff is not None:
        breaks.update([0.8 * spec.cutoff, spec.cutoff])
    return V, sorted(b for b in breaks if 0.0 < b < support), support


def scale_spec(spec: PotentialSpec, factor: float, name: Optional[str] = None) -> PotentialSpec:
    """Multiply every electric and magnetic profile by factor."""

    def scaled(p: Profile) -> Profile:
        params = dict(p.params)
        params["scale"] = float(params.get("scale", 1.0)) * factor
        return Profile(p.family, params)

    return replace(
        spec,
        electric=[scaled(p) for p in spec.electric],
        magnetic=[scaled(p) for p in spec.magnetic],
        name=name or spec.name,
    )


def spec_to_dict(spec: PotentialSpec) -> Dict[str, Any]:
    return {
        "name": spec.name,
        "dimension": spec.dimension,
        "electric": [asdict(p) for p in spec.electric],
        "magnetic": [asdict(p) for p in spec.magnetic],
        "decay": {"rho": spec.rho, "C": spec.C, "R": spec.R},
        "cutoff": spec.cutoff,
    }


def spec_from_dict(data: Dict[str, Any]) -> PotentialSpec:
    decay = data.get("decay", {})
    return PotentialSpec(
        dimension=int(data["dimension"]),
        electric=[Profile(p["family"], dict(p.get("params", {}))) for p in data.get("electric", [])],
        magnetic=[Profile(p["family"], dict(p.get("params", {}))) for p in data.get("magnetic", [])],
        rho=float(decay.get("rho", 2.0)),
        C=float(decay.get("C", 1.0)),
        R=float(decay.get("R", 1.0)),
        cutoff=None if data.get("cutoff") is None else float(data["cutoff"]),
        name=data.get("name", "potential"),
    )


def spec_hash(spec: PotentialSpec) -> str:
    canonical = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def validate_expansion(expansion: ExpansionSpec) -> None:
    """Check that term orders increase strictly and stay in the short-range class."""
    last: Dict[str, float] = {}
    for index, term in enumerate(expansion.terms):
        floor = 1.0 if term.kind == "electric" else 2.0
        if term.order <= floor:
            raise DecayClassError(
                f"{term.kind} term {index} has order {term.order}, must exceed {floor}",
                record={"term": index, "order": term.order, "kind": term.kind},
            )
        if term.order <= last.get(term.kind, -np.inf):
            raise DecayClassError(
                f"{term.kind} orders must increase strictly; term {index} has order {term.order}",
                record={"term": index, "order": term.order, "kind": term.kind},
            )
        last[term.kind] = term.order
        if term.kind == "magnetic" and expansion.dimension != 3:
            raise DomainError("magnetic expansion terms need dimension 3")


def term_profile(term: HomogeneousTerm) -> Profile:
    """Profile realizing one homogeneous term, smoothly cut off near the origin."""
    if term.kind == "electric":
        params: Dict[str, Any] = {"order": term.order, "amplitude": term.amplitude}
        if term.coefficients:
            params["harmonics"] = [[l, m, c] for (l, m), c in term.coefficients.items()]
        return Profile("homogeneous", params)
    return Profile(
        "vortex",
        {
            "profile": "homogeneous",
            "order": term.order,
            "amplitude": term.amplitude,
            "axis": list(term.axis or (0.0, 0.0, 1.0)),
        },
    )


def materialize_expansion(expansion: ExpansionSpec, name: Optional[str] = None) -> PotentialSpec:
    """Interior part plus every homogeneous term as one potential spec."""
    validate_expansion(expansion)
    interior = expansion.interior
    electric = list(interior.electric)
    magnetic = list(interior.magnetic)
    for term in expansion.terms:
        (electric if term.kind == "electric" else magnetic).append(term_profile(term))
    orders = [t.order for t in expansion.terms if t.kind == "electric"]
    return replace(
        interior,
        electric=electric,
        magnetic=magnetic,
        R=expansion.R,
        rho=min(orders) if orders else interior.rho,
        name=name or interior.name,
    )


def write_field(field: SampledField, path: PathLike) -> None:
    """Write a sampled field: magic, uint32 header length, JSON header, complex128 data."""
    header = json.dumps(
        {
            "version": FIELD_VERSION,
            "dimension": field.grid.dimension,
            "points": field.grid.points,
            "side": field.grid.side,
            "spacing": field.grid.spacing,
            "role": field.role,
            "shape": list(field.values.shape),
        },
        sort_keys=True,
    ).encode("utf-8")
    data = np.ascontiguousarray(field.values, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC + struct.pack("<I", len(header)) + header + data)


def read_field(path: PathLike) -> SampledField:
    raw = Path(path).read_bytes()
    if raw[:4] != FIELD_MAGIC:
        raise ScatlabError(f"{path} is not a sampled-field file")
    (length,) = struct.unpack("<I", raw[4:8])
    header = json.loads(raw[8 : 8 + length].decode("utf-8"))
    if header.get("version") != FIELD_VERSION:
        raise ScatlabError(f"unsupported field format version {header.get('version')}")
    grid = CartesianGrid(header["dimension"], header["points"], header["side"])
    values = np.frombuffer(raw[8 + length :], dtype="<c16").reshape(header["shape"]).copy()
    return SampledField(grid, values, header["role"])


__all__ = [
    "ELECTRIC_FAMILIES",
    "MAGNETIC_FAMILIES",
    "apply_Q",
    "eta",
    "evaluate_electric",
    "evaluate_field",
    "materialize_expansion",
    "radial_profile",
    "read_field",
    "sample",
    "scale_spec",
    "spec_from_dict",
    "spec_hash",
    "spec_to_dict",
    "validate_decay",
    "validate_expansion",
    "write_field",
]
