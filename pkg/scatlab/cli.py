"""
Command-line experiment runner.

Every subcommand takes a JSON experiment config plus scalar overrides, writes CSV tables, binary
fields and a JSON manifest into the output directory, and exits nonzero on a refused input.
"""
import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .averaged import completeness_residual, default_targets, smatrix_via_representation
from .cache import SMatrixCache, cache_get, cache_key, cache_put
from .config import SCENARIOS, ExperimentConfig, load_config
from .exceptions import ConfigError, DomainError, ScatlabError
from .forward import (
    LippmannSchwinger,
    default_direction_degree,
    equation_residual,
    far_field,
    partialwave_oracle,
    scattering_matrix,
)
from .inverse import dtn_radial, expansion_pipeline, fourier_difference, scenario_uniqueness
from .magnetic import gauge_invariance_defect, materialize, validate_gauge
from .models import ScatteringMatrix
from .numkit import harmonic_indices, radial_wave, sphere_rule, wavenumber
from .potentials import (
    is_radial,
    spec_hash,
    support_radius,
    tail_bound,
    validate_decay,
    write_field,
)

logger = logging.getLogger(__name__)


def _format(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n", encoding="utf-8")


class ExperimentRun:
    """
    One experiment: its resolved config, output directory, stage records and S-matrix cache.

    Stage records carry no timestamps so that manifests of identical runs are byte-identical.
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.output = Path(config.output)
        self.output.mkdir(parents=True, exist_ok=True)
        self.stages: List[Dict[str, Any]] = []
        self.artifacts: List[str] = []
        self.cache = SMatrixCache(config.cache_directory) if config.cache_enabled else None
        self.options = config.solver_options()

    def stage(self, name: str, **extra) -> None:
        self.stages.append({"stage": name, "status": "ok", **extra})

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        with (self.output / name).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_format(v) for v in row])
        self.artifacts.append(name)

    def write_field(self, name: str, field) -> None:
        write_field(field, self.output / name)
        self.artifacts.append(name)

    def write_json(self, name: str, payload: Dict[str, Any]) -> None:
        write_json(self.output / name, payload)
        self.artifacts.append(name)

    def manifest(self, status: str, error: Optional[Dict[str, Any]] = None) -> None:
        payload = {
            "version": __version__,
            "scenario": self.config.scenario,
            "status": status,
            "config": self.config.to_dict(),
            "stages": self.stages,
            "artifacts": sorted(set(self.artifacts)),
            "tail_bounds": {},
        }
        for spec in self.config.all_potentials():
            payload["tail_bounds"][spec.name] = tail_bound(spec)
        if error is not None:
            payload["error"] = error
        write_json(self.output / "manifest.json", payload)

    def smatrix(self, spec, V, A, ls: Optional[LippmannSchwinger] = None) -> ScatteringMatrix:
        """Far-field S-matrix of a potential, served from the cache when possible."""
        config = self.config
        key = cache_key(
            [spec],
            config.energy,
            config.grid,
            config.degree,
            "farfield",
            directions_degree=config.directions_degree,
            solver=self.options,
        )
        cached = cache_get(self.cache, key)
        if cached is not None:
            self.stage("smatrix", potential=spec.name, cache="hit")
            return cached
        ls = ls or LippmannSchwinger(V, A, config.energy, **self.options)
        dirs = None
        if config.directions_degree is not None:
            dirs = sphere_rule(config.dimension, config.directions_degree)
        S = scattering_matrix(V, A, config.energy, config.degree, dirs, ls=ls)
        cache_put(self.cache, key, S)
        self.stage("smatrix", potential=spec.name, cache="miss" if self.cache else "off", method=ls.method)
        return S

    def write_matrix(self, name: str, S: np.ndarray, degree: int) -> None:
        labels = harmonic_indices(self.config.dimension, degree)
        rows = []
        for a, (la, ma) in enumerate(labels):
            for b, (lb, mb) in enumerate(labels):
                rows.append([la, ma, lb, mb, S[a, b].real, S[a, b].imag])
        self.write_csv(name, ["l_out", "m_out", "l_in", "m_in", "re", "im"], rows)


def run_forward(run: ExperimentRun) -> None:
    config = run.config
    spec = config.potential_spec()
    V, A, _ = materialize(spec, config.grid)
    ls = LippmannSchwinger(V, A, config.energy, **run.options)
    degree = config.directions_degree or default_direction_degree(ls, config.degree)
    dirs = sphere_rule(config.dimension, degree)
    ff = far_field(V, A, config.energy, dirs, ls=ls)
    rows = []
    for q, nu in enumerate(dirs.nodes):
        for p, omega in enumerate(dirs.nodes):
            value = ff.values[q, p]
            rows.append([q, p, *nu, *omega, value.real, value.imag])
    n = config.dimension
    header = ["nu_index", "omega_index"] + [f"nu_{i}" for i in range(n)] + [f"omega_{i}" for i in range(n)]
    run.write_csv("farfield.csv", header + ["re", "im"], rows)
    solution = ls.solve_plane_waves(dirs.nodes[:1])[0]
    run.write_field("phi.scfd", solution.field)
    residual = equation_residual(solution, V, A)
    run.stage("forward", directions=dirs.size, method=ls.method, residual=residual)


def run_smatrix(run: ExperimentRun) -> None:
    config = run.config
    spec = config.potential_spec()
    V, A, _ = materialize(spec, config.grid)
    ls = LippmannSchwinger(V, A, config.energy, **run.options)
    far = run.smatrix(spec, V, A, ls)
    run.write_matrix("smatrix.csv", far.matrix, far.degree)
    defects = [["farfield", far.unitarity_defect]]
    rep = smatrix_via_representation(V, A, config.energy, config.degree, ls=ls)
    defects.append(["representation", rep.unitarity_defect])
    agreement = float(np.abs(far.matrix - rep.matrix).max())
    if is_radial(spec) and np.isfinite(support_radius(spec)):
        oracle = partialwave_oracle(spec, config.energy, config.degree)
        defects.append(["oracle", oracle.smatrix.unitarity_defect])
        run.write_csv(
            "phase_shifts.csv",
            ["l", "delta"],
            [[l, delta] for l, delta in enumerate(oracle.phase_shifts)],
        )
        run.stage("oracle", difference=float(np.abs(far.matrix - oracle.smatrix.matrix).max()))
    run.write_csv("defects.csv", ["path", "unitarity_defect"], defects)
    run.stage("representation", agreement=agreement)


def run_completeness(run: ExperimentRun) -> None:
    config = run.config
    spec = config.potential_spec()
    V, A, _ = materialize(spec, config.grid)
    radius = config.ball_radius or 0.125 * config.side
    ls = LippmannSchwinger(V, A, config.energy, **run.options)
    targets = default_targets(V, A, config.energy, radius, max(config.degrees), ls=ls)
    report = completeness_residual(V, A, radius, config.energy, targets, config.degrees, ls=ls)
    rows = []
    for name in sorted(report.residuals):
        for degree, value in zip(report.degrees, report.residuals[name]):
            rows.append([name, degree, value])
    run.write_csv("residuals.csv", ["target", "degree", "residual"], rows)
    run.write_csv(
        "gram.csv",
        ["degree", "condition", "cutoff", "rank", "flagged"],
        zip(report.degrees, report.gram_conditions, report.cutoffs, report.ranks, report.flagged),
    )
    run.stage("completeness", radius=radius, flagged=int(sum(report.flagged)))


def run_gauge_check(run: ExperimentRun) -> None:
    config = run.config
    spec = config.potential_spec()
    psi = config.gauge_function()
    validate_gauge(psi)
    V, A, _ = materialize(spec, config.grid)
    defect = gauge_invariance_defect(V, A, psi, config.energy, config.degree, **run.options)
    run.write_csv("gauge.csv", ["energy", "degree", "defect"], [[config.energy, config.degree, defect]])
    run.stage("gauge-check", defect=defect)


def run_uniqueness(run: ExperimentRun) -> None:
    config = run.config
    options = dict(run.options)
    kwargs = dict(radius=config.ball_radius, tolerances=config.tolerances, **options)
    if config.expansions is not None:
        first, second = config.expansion_specs()
        report = expansion_pipeline(first, second, config.energy, config.grid, config.degree, **kwargs)
    else:
        first, second = config.pair_specs()
        report = scenario_uniqueness(first, second, config.energy, config.grid, config.degree, **kwargs)
    run.write_json("uniqueness.json", report.__dict__)
    run.write_csv("scaling.csv", ["lambda", "smatrix_difference"], sorted(report.scaling.items(), reverse=True))
    run.stage("uniqueness", farfield_difference=report.smatrix_difference["farfield"])


def run_reconstruct(run: ExperimentRun) -> None:
    config = run.config
    first, second = config.pair_specs()
    if first.magnetic or second.magnetic or config.dimension != 3:
        raise DomainError("CGO reconstruction needs an electric pair in three dimensions")
    V1, _, _ = materialize(first, config.grid)
    V2, _, _ = materialize(second, config.grid)
    radius = config.ball_radius or 0.25 * config.side
    result = fourier_difference(
        V1,
        V2,
        config.energy,
        radius,
        xi=config.xi(),
        tau_factors=config.tau_factors,
        workers=run.options.get("workers"),
    )
    rows = []
    for i, xi in enumerate(result.xi):
        c, e = result.coefficients[i], result.exact[i]
        rows.append(
            [*xi, c.real, c.imag, e.real, e.imag, result.tau_used[i], result.relative_change[i],
             result.accepted[i], result.coefficient_errors[i]]
        )
    header = ["xi_0", "xi_1", "xi_2", "re", "im", "exact_re", "exact_im", "tau", "change", "accepted", "error"]
    run.write_csv("fourier.csv", header, rows)
    run.write_field("reconstruction.scfd", result.reconstruction)
    run.stage("reconstruct", error=result.reconstruction_error, accepted=int(np.sum(result.accepted)))


def run_dtn(run: ExperimentRun) -> None:
    config = run.config
    spec = config.potential_spec()
    radius = config.ball_radius
    if radius is None:
        reach = support_radius(spec)
        radius = 1.5 * reach if 0 < reach < np.inf else spec.R
    dtn = dtn_radial(spec, config.energy, radius, config.degree)
    k = wavenumber(config.energy)
    rows = []
    for l, value in enumerate(dtn.diagonal):
        j = radial_wave(config.dimension, l, "regular", k * radius).real
        dj = radial_wave(config.dimension, l, "regular", k * radius, derivative=True).real
        rows.append([l, value, k * dj / j])
    run.write_csv("dtn.csv", ["l", "dtn", "free"], rows)
    run.stage("dtn", radius=radius)


def run_validate(run: ExperimentRun) -> None:
    rows = []
    for spec in run.config.all_potentials():
        report = validate_decay(spec)
        rows.append([spec.name, spec_hash(spec), report.passed, report.worst_ratio, report.field_ratio or 0.0])
    run.write_csv("decay.csv", ["potential", "hash", "passed", "worst_ratio", "field_ratio"], rows)
    failed = [r[0] for r in rows if not r[2]]
    run.stage("validate", failed=failed)


RUNNERS = {
    "forward": run_forward,
    "smatrix": run_smatrix,
    "completeness": run_completeness,
    "gauge-check": run_gauge_check,
    "uniqueness": run_uniqueness,
    "reconstruct": run_reconstruct,
    "dtn": run_dtn,
    "validate": run_validate,
}


def error_record(exc: BaseException) -> Dict[str, Any]:
    return {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": getattr(exc, "exit_code", 1),
        "record": getattr(exc, "record", {}),
    }


def run(config: ExperimentConfig) -> int:
    """
    Run one experiment and return its exit status.

    Refused inputs and solver failures are written to error.json next to the manifest.
    """
    experiment = ExperimentRun(config)
    started = time.perf_counter()
    try:
        RUNNERS[config.scenario](experiment)
    except Exception as exc:
        record = error_record(exc)
        logger.error(f"{config.scenario} failed: {record['error']}: {record['message']}")
        write_json(experiment.output / "error.json", record)
        experiment.manifest("failed", record)
        return int(record["exit_code"])
    experiment.manifest("ok")
    logger.info(f"{config.scenario} finished in {time.perf_counter() - started:.1f} s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="JSON experiment config")
    common.add_argument("--energy", type=float, help="override the energy E")
    common.add_argument("--degree", type=int, help="override the harmonic degree L")
    common.add_argument("--points", type=int, help="override grid points per axis")
    common.add_argument("--side", type=float, help="override the box side")
    common.add_argument("--output", help="override the output directory")
    common.add_argument("--no-cache", action="store_true", help="bypass the S-matrix cache")

    parser = argparse.ArgumentParser(prog="scatlab", description="Fixed-energy scattering experiments")
    parser.add_argument("--version", action="version", version=f"scatlab {__version__}")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="scenario", required=True)
    for scenario in SCENARIOS:
        sub.add_parser(scenario, parents=[common])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    overrides = {
        "energy": args.energy,
        "degree": args.degree,
        "points": args.points,
        "side": args.side,
        "output": args.output,
        "no_cache": args.no_cache,
    }
    try:
        config = load_config(args.config, overrides)
        if config.scenario != args.scenario:
            raise ConfigError(
                f"config describes scenario {config.scenario}, not {args.scenario}",
                record={"scenario": config.scenario},
            )
    except ScatlabError as exc:
        record = error_record(exc)
        logger.error(f"{record['error']}: {record['message']}")
        output = Path(args.output or ".")
        output.mkdir(parents=True, exist_ok=True)
        write_json(output / "error.json", record)
        return int(record["exit_code"])
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
