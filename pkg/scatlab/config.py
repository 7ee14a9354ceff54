"""
Experiment configuration: JSON schema, loading and scalar overrides.
"""
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import jsonschema
import numpy as np

from .exceptions import ConfigError
from .inverse import xi_lattice
from .models import CartesianGrid, ExpansionSpec, GaugeFunction, HomogeneousTerm, PotentialSpec
from .potentials import materialize_expansion, spec_from_dict

logger = logging.getLogger(__name__)

SCENARIOS = ("forward", "smatrix", "completeness", "gauge-check", "uniqueness", "reconstruct", "dtn", "validate")

CACHE_ENV = "SCATLAB_CACHE_DIR"
WORKERS_ENV = "SCATLAB_WORKERS"
DEFAULT_CACHE_DIR = Path.home() / ".cache" / "scatlab"

_PROFILE = {
    "type": "object",
    "required": ["family"],
    "properties": {
        "family": {"type": "string"},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}

_POTENTIAL = {
    "type": "object",
    "required": ["dimension"],
    "properties": {
        "name": {"type": "string"},
        "dimension": {"enum": [2, 3]},
        "electric": {"type": "array", "items": _PROFILE},
        "magnetic": {"type": "array", "items": _PROFILE},
        "decay": {
            "type": "object",
            "properties": {
                "rho": {"type": "number", "exclusiveMinimum": 0},
                "C": {"type": "number", "exclusiveMinimum": 0},
                "R": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "cutoff": {"type": ["number", "null"], "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

_TERM = {
    "type": "object",
    "required": ["order"],
    "properties": {
        "order": {"type": "number"},
        "kind": {"enum": ["electric", "magnetic"]},
        "amplitude": {"type": "number"},
        "coefficients": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 4},
        },
        "axis": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
    },
    "additionalProperties": False,
}

_EXPANSION = {
    "type": "object",
    "required": ["interior"],
    "properties": {
        "dimension": {"enum": [2, 3]},
        "interior": _POTENTIAL,
        "terms": {"type": "array", "items": _TERM},
        "convergent": {"type": "boolean"},
        "R": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

EXPERIMENT_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "scatlab experiment",
    "type": "object",
    "required": ["scenario", "energy"],
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "dimension": {"enum": [2, 3]},
        "energy": {"type": "number", "exclusiveMinimum": 0},
        "grid": {
            "type": "object",
            "properties": {
                "points": {"type": "integer", "minimum": 4, "multipleOf": 2},
                "side": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "degree": {"type": "integer", "minimum": 0},
        "directions_degree": {"type": "integer", "minimum": 1},
        "potential": _POTENTIAL,
        "pair": {"type": "array", "items": _POTENTIAL, "minItems": 2, "maxItems": 2},
        "expansions": {"type": "array", "items": _EXPANSION, "minItems": 2, "maxItems": 2},
        "gauge": {
            "type": "object",
            "properties": {
                "family": {"enum": ["zero", "gaussian", "bump"]},
                "amplitude": {"type": "number"},
                "width": {"type": "number", "exclusiveMinimum": 0},
                "center": {"type": "array", "items": {"type": "number"}},
                "mu": {"type": "number"},
                "C": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "ball_radius": {"type": "number", "exclusiveMinimum": 0},
        "degrees": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "xi": {
            "type": "object",
            "properties": {
                "max": {"type": "number", "minimum": 0},
                "spacing": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "tau_factors": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "tolerances": {
            "type": "object",
            "properties": {
                "solver": {"type": "number", "exclusiveMinimum": 0},
                "unitarity": {"type": "number", "exclusiveMinimum": 0},
                "support": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "method": {"enum": ["auto", "gmres", "dense"]},
                "restart": {"type": "integer", "minimum": 1},
                "maxiter": {"type": "integer", "minimum": 1},
                "workers": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "output": {"type": "string"},
        "cache": {
            "type": "object",
            "properties": {
                "enabled": {"type": "boolean"},
                "directory": {"type": "string"},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

# Scenario -> keys that must be present
_REQUIRED = {
    "forward": ("potential",),
    "smatrix": ("potential",),
    "completeness": ("potential",),
    "gauge-check": ("potential", "gauge"),
    "uniqueness": (),
    "reconstruct": ("pair",),
    "dtn": ("potential",),
    "validate": (),
}


@dataclass
class ExperimentConfig:
    """A validated experiment with every default resolved."""
    scenario: str
    energy: float
    dimension: int = 3
    points: int = 32
    side: float = 8.0
    degree: int = 4
    directions_degree: Optional[int] = None
    potential: Optional[Dict[str, Any]] = None
    pair: Optional[List[Dict[str, Any]]] = None
    expansions: Optional[List[Dict[str, Any]]] = None
    gauge: Optional[Dict[str, Any]] = None
    ball_radius: Optional[float] = None
    degrees: List[int] = field(default_factory=lambda: [2, 4, 6, 8])
    xi_max: float = 2.0
    xi_spacing: float = 1.0
    tau_factors: List[float] = field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0])
    tolerances: Dict[str, float] = field(
        default_factory=lambda: {"solver": 1e-8, "unitarity": 1e-3, "support": 1e-9}
    )
    solver: Dict[str, Any] = field(default_factory=dict)
    output: str = "scatlab-output"
    cache_enabled: bool = True
    cache_directory: str = str(DEFAULT_CACHE_DIR)

    @property
    def grid(self) -> CartesianGrid:
        return CartesianGrid(self.dimension, self.points, self.side)

    def potential_spec(self) -> PotentialSpec:
        if self.potential is None:
            raise ConfigError(f"scenario {self.scenario} needs a potential")
        return spec_from_dict(self.potential)

    def pair_specs(self) -> Tuple[PotentialSpec, PotentialSpec]:
        if self.pair is None:
            raise ConfigError(f"scenario {self.scenario} needs a pair of potentials")
        return spec_from_dict(self.pair[0]), spec_from_dict(self.pair[1])

    def expansion_specs(self) -> Tuple[ExpansionSpec, ExpansionSpec]:
        if self.expansions is None:
            raise ConfigError(f"scenario {self.scenario} needs a pair of expansions")
        return expansion_from_dict(self.expansions[0]), expansion_from_dict(self.expansions[1])

    def gauge_function(self) -> GaugeFunction:
        data = dict(self.gauge or {})
        data["center"] = tuple(data.get("center", ()))
        return GaugeFunction(dimension=self.dimension, **data)

    def all_potentials(self) -> List[PotentialSpec]:
        specs = []
        if self.potential is not None:
            specs.append(self.potential_spec())
        if self.pair is not None:
            specs.extend(self.pair_specs())
        if self.expansions is not None:
            specs.extend(materialize_expansion(e) for e in self.expansion_specs())
        return specs

    def xi(self) -> np.ndarray:
        return xi_lattice(self.xi_max, self.xi_spacing, self.dimension)

    def solver_options(self) -> Dict[str, Any]:
        """LippmannSchwinger options: the solver section plus the solver, support and unitarity tolerances."""
        options = {
            "tol": self.tolerances.get("solver", 1e-8),
            "support_rtol": self.tolerances.get("support", 1e-9),
            "unitarity_warn": self.tolerances.get("unitarity", 1e-3),
        }
        options.update(self.solver)
        if "workers" not in options and os.environ.get(WORKERS_ENV):
            options["workers"] = int(os.environ[WORKERS_ENV])
        return options

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def expansion_from_dict(data: Dict[str, Any]) -> ExpansionSpec:
    interior = spec_from_dict(data["interior"])
    terms = []
    for t in data.get("terms", []):
        coefficients = None
        if t.get("coefficients"):
            coefficients = {
                (int(c[0]), int(c[1])): complex(c[2], c[3] if len(c) > 3 else 0.0) for c in t["coefficients"]
            }
        terms.append(
            HomogeneousTerm(
                order=float(t["order"]),
                kind=t.get("kind", "electric"),
                amplitude=float(t.get("amplitude", 1.0)),
                coefficients=coefficients,
                axis=tuple(t["axis"]) if "axis" in t else None,
            )
        )
    return ExpansionSpec(
        dimension=int(data.get("dimension", interior.dimension)),
        interior=interior,
        terms=terms,
        convergent=bool(data.get("convergent", False)),
        R=float(data.get("R", 1.0)),
    )


def validate_config(data: Dict[str, Any]) -> None:
    """
    Validate a raw experiment document.

    Raises:
        ConfigError: On any schema violation or a scenario missing its inputs
    """
    try:
        jsonschema.validate(data, EXPERIMENT_SCHEMA)
    except jsonschema.ValidationError as exc:
        location = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {location}: {exc.message}", record={"path": location}) from exc
    missing = [key for key in _REQUIRED[data["scenario"]] if key not in data]
    if data["scenario"] == "uniqueness" and "pair" not in data and "expansions" not in data:
        missing.append("pair|expansions")
    if data["scenario"] == "validate" and not any(k in data for k in ("potential", "pair", "expansions")):
        missing.append("potential")
    if missing:
        raise ConfigError(
            f"scenario {data['scenario']} is missing {', '.join(missing)}",
            record={"missing": missing},
        )


def resolve_config(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Apply scalar overrides, validate and fill defaults."""
    data = json.loads(json.dumps(data))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("points", "side"):
            data.setdefault("grid", {})[key] = value
        elif key == "no_cache":
            if value:
                data.setdefault("cache", {})["enabled"] = False
        elif key in ("energy", "degree", "output"):
            data[key] = value
        else:
            raise ConfigError(f"unknown override {key}", record={"override": key})
    validate_config(data)

    config = ExperimentConfig(scenario=data["scenario"], energy=float(data["energy"]))
    dimension = data.get("dimension")
    if dimension is None:
        if "potential" in data:
            dimension = data["potential"]["dimension"]
        if dimension is None and "pair" in data:
            dimension = data["pair"][0]["dimension"]
        if dimension is None and "expansions" in data:
            dimension = data["expansions"][0]["interior"]["dimension"]
    config.dimension = int(dimension or 3)
    grid = data.get("grid", {})
    config.points = int(grid.get("points", 64 if config.dimension == 2 else 32))
    config.side = float(grid.get("side", config.side))
    for key in ("degree", "directions_degree", "ball_radius", "output"):
        if key in data:
            setattr(config, key, data[key])
    for key in ("potential", "pair", "expansions", "gauge", "degrees", "tau_factors", "solver"):
        if key in data:
            setattr(config, key, data[key])
    if "xi" in data:
        config.xi_max = float(data["xi"].get("max", config.xi_max))
        config.xi_spacing = float(data["xi"].get("spacing", config.xi_spacing))
    config.tolerances.update(data.get("tolerances", {}))
    cache = data.get("cache", {})
    config.cache_enabled = bool(cache.get("enabled", True))
    config.cache_directory = str(cache.get("directory") or os.environ.get(CACHE_ENV) or DEFAULT_CACHE_DIR)

    for spec in config.all_potentials():
        if spec.dimension != config.dimension:
            raise ConfigError(
                f"potential {spec.name} has dimension {spec.dimension}, experiment has {config.dimension}",
                record={"potential": spec.name},
            )
    return config


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load an experiment from a JSON file.

    Args:
        path: Config file
        overrides: Scalar fields replacing those of the file (energy, degree, points, side,
            output, no_cache)

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: If the file is missing, not JSON, or violates the schema
    """
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found", record={"path": str(path)}) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not JSON: {exc}", record={"path": str(path)}) from exc
    config = resolve_config(data, overrides)
    logger.info(f"Loaded {config.scenario} experiment from {path}")
    return config
