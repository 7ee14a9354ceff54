"""
Core data models for scatlab.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np

from .exceptions import DomainError, ShapeMismatchError

Role = Literal["V", "A", "F", "wavefunction", "gradient", "gauge", "source", "difference", "psi"]


@dataclass(frozen=True)
class CartesianGrid:
    """Periodic Cartesian grid on the box [-side/2, side/2)^n."""
    dimension: int
    points: int
    side: float

    def __post_init__(self) -> None:
        if self.dimension not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {self.dimension}")
        if self.points < 4 or self.points % 2:
            raise DomainError(f"points must be even and >= 4, got {self.points}")
        if self.side <= 0:
            raise DomainError(f"side must be positive, got {self.side}")

    @property
    def spacing(self) -> float:
        return self.side / self.points

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points,) * self.dimension

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dimension

    def axis(self) -> np.ndarray:
        return -0.5 * self.side + self.spacing * np.arange(self.points)

    def mesh(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis()] * self.dimension), indexing="ij"))

    def coordinates(self) -> np.ndarray:
        """Grid points as an array of shape grid.shape + (n,)."""
        return np.stack(self.mesh(), axis=-1)

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c ** 2 for c in self.mesh()))


@dataclass
class DirectionGrid:
    """Quadrature nodes and weights on the unit sphere."""
    dimension: int
    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])


@dataclass
class SampledField:
    """Scalar, vector or antisymmetric tensor field sampled on a grid."""
    grid: CartesianGrid
    values: np.ndarray
    role: Role

    def __post_init__(self) -> None:
        n = self.grid.dimension
        lead = self.values.shape[: self.values.ndim - n]
        if self.values.shape[self.values.ndim - n:] != self.grid.shape or len(lead) > 2:
            raise ShapeMismatchError(
                f"values of shape {self.values.shape} do not fit grid {self.grid.shape}"
            )
        if any(d != n for d in lead):
            raise ShapeMismatchError(f"component axes {lead} do not match dimension {n}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError(f"sampled {self.role} field has non-finite values")

    @property
    def rank(self) -> int:
        return self.values.ndim - self.grid.dimension


@dataclass
class Profile:
    """A named parametric family with its parameters."""
    family: str
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass
class PotentialSpec:
    """Analytic descriptor of an electric potential and a magnetic field with decay metadata."""
    dimension: int
    electric: List[Profile] = field(default_factory=list)
    magnetic: List[Profile] = field(default_factory=list)
    rho: float = 2.0
    C: float = 1.0
    R: float = 1.0
    cutoff: Optional[float] = None
    name: str = "potential"


@dataclass
class DecayReport:
    """Outcome of probing a potential against its declared decay bound."""
    passed: bool
    worst_ratio: float
    worst_point: Tuple[float, ...]
    field_ratio: Optional[float] = None
    probes: int = 0


@dataclass
class HomogeneousTerm:
    """One homogeneous term of an asymptotic expansion at infinity."""
    order: float
    kind: Literal["electric", "magnetic"] = "electric"
    amplitude: float = 1.0
    coefficients: Optional[Dict[Tuple[int, int], complex]] = None
    axis: Optional[Tuple[float, float, float]] = None


@dataclass
class ExpansionSpec:
    """Interior part plus homogeneous terms describing a potential at infinity."""
    dimension: int
    interior: PotentialSpec
    terms: List[HomogeneousTerm] = field(default_factory=list)
    convergent: bool = False
    R: float = 1.0


@dataclass
class GaugeFunction:
    """Decaying scalar gauge function psi."""
    dimension: int
    family: Literal["zero", "gaussian", "bump"] = "gaussian"
    amplitude: float = 1.0
    width: float = 0.3
    center: Tuple[float, ...] = ()
    mu: float = 1.0
    C: float = 1.0


@dataclass
class PotentialConstruction:
    """Magnetic potential assembled from a field by radial and contour integrals."""
    field_spec: PotentialSpec
    base_point: np.ndarray
    radius: float
    tail: float
    inner: float = 0.2
    outer: float = 0.5
    tolerance: float = 1e-10
    div_residual: float = 0.0
    path_defect: float = 0.0
    curl_defect: float = 0.0
    A_reg: Optional[SampledField] = None
    A_inf: Optional[SampledField] = None
    U: Optional[SampledField] = None
    eta: Optional[SampledField] = None
    A: Optional[SampledField] = None


@dataclass
class ScatteringSolution:
    """Total field, its gradient and the induced source Q phi on a grid."""
    energy: float
    field: SampledField
    gradient: SampledField
    source: SampledField
    direction: Optional[np.ndarray] = None
    residual: float = 0.0
    iterations: int = 0
    residual_history: List[float] = field(default_factory=list)
    monitor: Dict[str, Any] = field(default_factory=dict)


@dataclass
class FarField:
    """Scattering amplitude f(nu_q, omega_q') on a direction grid; rows are nu."""
    energy: float
    dirs: DirectionGrid
    values: np.ndarray


@dataclass
class ScatteringMatrix:
    """Scattering matrix in the harmonic basis."""
    energy: float
    dimension: int
    degree: int
    matrix: np.ndarray
    path: str = "farfield"
    basis: Literal["harmonic", "direction"] = "harmonic"
    unitarity_defect: float = 0.0


@dataclass
class PartialWaveResult:
    """Phase shifts, far field and S-matrix of a radial potential."""
    energy: float
    dimension: int
    radius: float
    l_max: int
    phase_shifts: np.ndarray
    smatrix: ScatteringMatrix
    far_field: FarField
    radial: List[Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]] = field(
        default_factory=list
    )


@dataclass
class DensityOnSphere:
    """Harmonic coefficients of a density on the unit sphere."""
    dimension: int
    degree: int
    coefficients: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))


@dataclass
class CompletenessReport:
    """Projection residuals of target solutions onto averaged scattering solutions."""
    energy: float
    radius: float
    degrees: List[int]
    residuals: Dict[str, List[float]]
    gram_conditions: List[float]
    cutoffs: List[float]
    ranks: List[int]
    eigenvalues: List[List[float]] = field(default_factory=list)
    flagged: List[bool] = field(default_factory=list)


@dataclass
class CgoParameter:
    """Complex vector p with p.p = E, split into frequency and growth parts."""
    p: np.ndarray
    xi: np.ndarray
    tau: float
    energy: float


@dataclass
class CgoRemainder:
    """Remainder psi of a complex geometrical optics solution."""
    parameter: CgoParameter
    psi: SampledField
    weighted_norm: float
    iterations: int
    spectral_radius: float
    epsilon: float
    history: List[float] = field(default_factory=list)


@dataclass
class FourierReconstruction:
    """Fourier coefficients of a potential difference recovered from CGO solutions."""
    xi: np.ndarray
    coefficients: np.ndarray
    exact: np.ndarray
    tau_used: np.ndarray
    relative_change: np.ndarray
    accepted: np.ndarray
    reconstruction: SampledField
    reconstruction_error: float
    coefficient_errors: np.ndarray


@dataclass
class DtnMap:
    """Dirichlet-to-Neumann map of a radial potential in the harmonic basis."""
    energy: float
    dimension: int
    radius: float
    degree: int
    matrix: np.ndarray
    diagonal: np.ndarray


@dataclass
class UniquenessReport:
    """Scattering data and interior differences of a potential pair."""
    names: Tuple[str, str]
    energy: float
    smatrix_difference: Dict[str, float]
    unitarity_defects: Dict[str, float]
    interior_potential_difference: float
    interior_field_difference: float
    orthogonality_defect: float
    identity_defects: Dict[str, float] = field(default_factory=dict)
    scaling: Dict[float, float] = field(default_factory=dict)
    reconstruction_error: Optional[float] = None
    provenance: Dict[str, Any] = field(default_factory=dict)
