"""
Orchestration of one run: config → geometry → block system → solve → field,
residuals and optional oracle → report files.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from inclusion.exceptions import OracleMismatchError
from inclusion.models import RunConfig, load_config
from inclusion.services.closed_forms import (
    disk_cavity_coefficient,
    disk_transmission_coefficients,
    ellipse_cavity_first_mode,
)
from inclusion.services.field import (
    GridSpec,
    grid_field,
    traction_free_residual,
    transmission_residual,
)
from inclusion.services.geometry import ConformalMap, build_geometry, faber_derivative_matrices, faber_similarity
from inclusion.services.loading import LoadingSpec
from inclusion.services.material import MaterialPair, derive_constants
from inclusion.services.oracle import compare, solve_oracle
from inclusion.services.reports import RunResults, emit_reports
from inclusion.services.system import assemble_E, solve
from runner import config as env

logger = logging.getLogger(__name__)

RESIDUAL_ANGLES = 32


@dataclass
class Overrides:
    """Command-line values; None means "use the config file, then the environment"."""

    truncation: Optional[int] = None
    grid: Optional[str] = None
    oracle: bool = False
    out_dir: Optional[str] = None
    tolerance: Optional[float] = None


@dataclass
class Settings:
    truncation: int
    guard: Optional[int]
    tolerance: float
    epsilon: float
    grid: Optional[GridSpec]
    oracle: bool
    oracle_nodes: int
    oracle_tolerance: float
    out_dir: Path


def _first_set(*values):
    """First value that is not None."""
    return next((v for v in values if v is not None), None)


def resolve_settings(command: str, config: RunConfig, overrides: Overrides) -> Settings:
    grid = GridSpec.parse(overrides.grid) if overrides.grid is not None else config.grid
    if command == "field" and grid is None:
        gamma = config.map.gamma
        grid = GridSpec(x0=-3 * gamma, x1=3 * gamma, y0=-3 * gamma, y1=3 * gamma, nx=41, ny=41)
    return Settings(
        truncation=_first_set(overrides.truncation, config.truncation, env.TRUNCATION),
        guard=_first_set(config.guard, env.GUARD),
        tolerance=_first_set(overrides.tolerance, config.tolerance, env.TOLERANCE),
        epsilon=_first_set(config.boundary_epsilon, env.BOUNDARY_EPSILON),
        grid=grid,
        oracle=command == "oracle-check" or overrides.oracle or config.oracle.enabled,
        oracle_nodes=_first_set(config.oracle.nodes, env.ORACLE_NODES),
        oracle_tolerance=_first_set(config.oracle.tolerance, env.ORACLE_TOLERANCE),
        out_dir=Path(_first_set(overrides.out_dir, config.output.dir, env.OUTPUT_DIR)),
    )


def execute(command: str, config: RunConfig, settings: Settings) -> RunResults:
    cmap = config.map.to_map()
    cmap.validate()
    material = config.material.to_material()
    loading = config.loading.to_loading()

    bundle = build_geometry(cmap, settings.truncation, settings.guard)
    system = assemble_E(material, bundle, loading)
    solution = solve(system, settings.tolerance)

    angles = 2 * np.pi * np.arange(RESIDUAL_ANGLES) / RESIDUAL_ANGLES
    residuals = {}
    if settings.epsilon * cmap.gamma < cmap.delta:
        if material.cavity:
            residuals["traction_free_residual"] = traction_free_residual(
                solution, loading, bundle, material, angles, settings.epsilon
            )
        else:
            r_disp, r_trac = transmission_residual(solution, loading, bundle, material, angles, settings.epsilon)
            residuals["displacement_residual"] = r_disp
            residuals["traction_residual"] = r_trac
    else:
        logger.warning(f"Boundary epsilon {settings.epsilon} exceeds the analytic margin; residuals skipped")

    samples = None
    if settings.grid is not None:
        samples = grid_field(solution, loading, bundle, material, settings.grid)

    comparison = None
    if settings.oracle:
        mesh, oracle = solve_oracle(cmap, material, loading, bundle, settings.oracle_nodes)
        comparison = compare(oracle, solution, mesh, bundle, material, loading, config.oracle.samples, settings.epsilon)

    return RunResults(
        config=config,
        solution=solution,
        truncation=bundle.n,
        guard=bundle.guard,
        samples=samples,
        comparison=comparison,
        residuals=residuals,
    )


def run(command: str, config_path, overrides: Optional[Overrides] = None) -> int:
    """
    Run one subcommand end to end and return its exit code.

    Reports are written even when the oracle disagrees; the mismatch is then
    raised so the caller maps it to its exit code.
    """
    overrides = overrides or Overrides()
    config = load_config(config_path)
    settings = resolve_settings(command, config, overrides)
    logger.info(f"Running {command} for '{config.name}' at order {settings.truncation}")
    results = execute(command, config, settings)
    emit_reports(results, settings.out_dir)

    # absolute max over the far circle; relative values are reported only
    if results.comparison is not None and results.comparison.far_max > settings.oracle_tolerance:
        raise OracleMismatchError(
            f"oracle discrepancy {results.comparison.far_max:.3e} on |w| = 1.5γ "
            f"exceeds {settings.oracle_tolerance:.1e}"
        )
    return 0


# ── Self-test ─────────────────────────────────────────────────


def _check(name: str, computed, expected, tol: float) -> dict:
    error = float(np.max(np.abs(np.asarray(computed) - np.asarray(expected))))
    return {"check": name, "error": error, "tolerance": tol, "passed": error <= tol}


def self_test_checks(order: int = 8) -> List[dict]:
    """Closed-form checks on the built-in disk and ellipse fixtures."""
    rows = []
    rows.append(_check("constants (0,1)", derive_constants(0.0, 1.0), (0.75, 0.25, 3.0), 1e-15))
    rows.append(_check("constants (1,1)", derive_constants(1.0, 1.0), (2 / 3, 1 / 3, 2.0), 1e-15))

    disk = ConformalMap(gamma=1.0, a=np.array([0.5]))
    ellipse = ConformalMap(gamma=1.0, a=np.array([0.5, 0.3]))
    matrix = MaterialPair(lambda_ext=1.0, mu_ext=1.0, cavity=True)
    pair = MaterialPair(lambda_ext=1.0, mu_ext=1.0, lambda_int=2.0, mu_int=3.0)

    bundle = build_geometry(ellipse, order)
    expected_C = np.diag([0.0] + [0.3**m for m in range(1, order + 1)])
    rows.append(_check("ellipse Grunsky", bundle.C.data, expected_C, 1e-12))
    Dt, _ = faber_derivative_matrices(ellipse, order)
    rows.append(_check("Faber derivative", Dt.data, faber_similarity(bundle.P, bundle.diag.T).data, 1e-11))

    for m in (1, 2, 3):
        loading = LoadingSpec.single_mode(m, B=1.0)
        geometry = build_geometry(disk, order)
        solution = solve(assemble_E(matrix, geometry, loading))
        rows.append(
            _check(f"disk cavity m={m}", solution.xe_minus[m], disk_cavity_coefficient(matrix, 1.0, 1.0, m), 1e-10)
        )
        solution = solve(assemble_E(pair, geometry, loading))
        xe, xi = disk_transmission_coefficients(pair, 1.0, 1.0, m)
        rows.append(_check(f"disk inclusion m={m}", (solution.xe_minus[m], solution.xi_minus[m]), (xe, xi), 1e-10))

    solution = solve(assemble_E(matrix, bundle, LoadingSpec.single_mode(1, B=1.0)))
    plus, minus = ellipse_cavity_first_mode(matrix, 1.0, 0.3, 1.0)
    rows.append(_check("ellipse cavity m=1", (solution.xe_plus[1], solution.xe_minus[1]), (plus, minus), 1e-10))
    return rows


def self_test(order: int = 8) -> Tuple[bool, pd.DataFrame]:
    table = pd.DataFrame(self_test_checks(order), columns=["check", "error", "tolerance", "passed"])
    passed = bool(table["passed"].all())
    logger.info(f"Self-test: {int(table['passed'].sum())}/{len(table)} checks passed")
    return passed, table
