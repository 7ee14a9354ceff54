"""
scatlab - Fixed-energy quantum scattering and uniqueness experiments.
"""

# Version info (submodules read it while importing)
__version__ = "0.1.0"
__author__ = "scatlab Team"
__description__ = "Fixed-energy scattering matrices, averaged solutions and uniqueness experiments"

# Core models (import first to avoid circular dependencies)
from .models import (
    CartesianGrid,
    DirectionGrid,
    SampledField,
    Profile,
    PotentialSpec,
    DecayReport,
    HomogeneousTerm,
    ExpansionSpec,
    GaugeFunction,
    PotentialConstruction,
    ScatteringSolution,
    FarField,
    ScatteringMatrix,
    PartialWaveResult,
    DensityOnSphere,
    CompletenessReport,
    CgoParameter,
    CgoRemainder,
    FourierReconstruction,
    DtnMap,
    UniquenessReport,
)

# Numerical kernels
from .numkit import (
    GreenKernel,
    harmonic_eval,
    harmonic_indices,
    helmholtz_green,
    radial_wave,
    sphere_rule,
    volume_convolve,
)

# Potentials and magnetic construction
from .potentials import (
    apply_Q,
    materialize_expansion,
    read_field,
    sample,
    spec_from_dict,
    spec_hash,
    spec_to_dict,
    validate_decay,
    validate_expansion,
    write_field,
)
from .magnetic import (
    curl,
    div_field,
    gauge_invariance_defect,
    gauge_transform,
    materialize,
    potential_from_field,
)

# Forward and inverse problems
from .forward import (
    LippmannSchwinger,
    RadialSolution,
    far_field,
    partialwave_oracle,
    scattering_matrix,
    scattering_solution,
    smatrix_from_farfield,
    trace_T0,
    unitarity_defect,
)
from .averaged import (
    averaged_solution,
    completeness_residual,
    herglotz,
    interior_target,
    smatrix_via_representation,
)
from .inverse import (
    cgo_solve,
    dtn_radial,
    expansion_pipeline,
    fourier_difference,
    green_identity_defect,
    orthogonality_functional,
    scenario_uniqueness,
)

# Experiments
from .cache import SMatrixCache, cache_get, cache_key, cache_put
from .config import ExperimentConfig, load_config

# Main client
from .client import ScatteringLab

# Exceptions
from .exceptions import *

# Convenience aliases
Lab = ScatteringLab

# Main exports
__all__ = [
    # Main client
    "ScatteringLab",
    "Lab",

    # Core models
    "CartesianGrid",
    "DirectionGrid",
    "SampledField",
    "Profile",
    "PotentialSpec",
    "DecayReport",
    "HomogeneousTerm",
    "ExpansionSpec",
    "GaugeFunction",
    "PotentialConstruction",
    "ScatteringSolution",
    "FarField",
    "ScatteringMatrix",
    "PartialWaveResult",
    "DensityOnSphere",
    "CompletenessReport",
    "CgoParameter",
    "CgoRemainder",
    "FourierReconstruction",
    "DtnMap",
    "UniquenessReport",

    # Numerical kernels
    "GreenKernel",
    "harmonic_eval",
    "harmonic_indices",
    "helmholtz_green",
    "radial_wave",
    "sphere_rule",
    "volume_convolve",

    # Potentials
    "apply_Q",
    "materialize_expansion",
    "read_field",
    "sample",
    "spec_from_dict",
    "spec_hash",
    "spec_to_dict",
    "validate_decay",
    "validate_expansion",
    "write_field",
    "curl",
    "div_field",
    "gauge_invariance_defect",
    "gauge_transform",
    "materialize",
    "potential_from_field",

    # Forward problem
    "LippmannSchwinger",
    "RadialSolution",
    "far_field",
    "partialwave_oracle",
    "scattering_matrix",
    "scattering_solution",
    "smatrix_from_farfield",
    "trace_T0",
    "unitarity_defect",
    "averaged_solution",
    "completeness_residual",
    "herglotz",
    "interior_target",
    "smatrix_via_representation",

    # Inverse problem
    "cgo_solve",
    "dtn_radial",
    "expansion_pipeline",
    "fourier_difference",
    "green_identity_defect",
    "orthogonality_functional",
    "scenario_uniqueness",

    # Experiments
    "SMatrixCache",
    "cache_get",
    "cache_key",
    "cache_put",
    "ExperimentConfig",
    "load_config",

    # Metadata
    "__version__",
    "__author__",
    "__description__",
]
