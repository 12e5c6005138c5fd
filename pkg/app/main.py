from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .artifacts import ArtifactWriter
from .bem import assemble_operators
from .config import AppPaths, RunConfig
from .coupling import TransmissionData, build_coupled, build_rhs, solve
from .errors import CalderonError, ConfigError, NumericalError
from .fem import interior_eigenpairs
from .models import SWEEP_CSV_FIELDS
from .potentials import postprocess_exterior, probe_circle
from .problem import Problem
from .settings import load_run_document, load_settings
from .spectral import SweepContext, disk_resonances, find_dips, sweep
from .verification import run_verification

logger = logging.getLogger("app")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

# 掃引列ごとの共鳴スペクトル (V と結合系は Dirichlet, W は Neumann)
_DIP_COLUMNS = {
    "V": ("sigma_min_v", "dirichlet"),
    "W": ("sigma_min_w", "neumann"),
    "coupled": ("sigma_min_coupled", "dirichlet"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calderon",
        description="Galerkin BEM-FEM toolkit for Helmholtz transmission problems and spurious resonances.",
    )
    parser.add_argument("--config", type=Path, help="JSON run document merged over the repository settings")
    parser.add_argument("--out", type=Path, help="output directory (created when missing)")
    parser.add_argument("--threads", type=int, help="worker threads for assembly and sweeps")
    parser.add_argument(
        "--matrix-format", choices=("bin", "csv"), help="solve: also dump the coupled matrix in this format"
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", help="run the named property checks and write verify.json")
    sub.add_parser("sweep", help="singular-value sweep over physics.kappa_grid")
    sub.add_parser("solve", help="solve the coupled problem at physics.kappa")
    sub.add_parser("eig", help="FEM eigenvalues with both boundary conditions")
    return parser


def load_config(args: argparse.Namespace, paths: AppPaths | None = None) -> RunConfig:
    paths = paths or AppPaths()
    base = load_settings(paths.root)
    document = load_run_document(args.config, base) if args.config is not None else base
    if args.out is not None:
        document.setdefault("output", {})["directory"] = str(Path(args.out).expanduser().resolve())
    if args.threads is not None:
        document.setdefault("parallel", {})["threads"] = args.threads
    if args.matrix_format is not None:
        document.setdefault("output", {})["matrix_format"] = args.matrix_format
    return RunConfig(settings=document, paths=paths)


def _writer(config: RunConfig) -> ArtifactWriter:
    return ArtifactWriter(config.ensure_output_dir(), config.config_hash)


# Commands ----------------------------------------------------------------------
def cmd_verify(config: RunConfig) -> int:
    report = run_verification(config, None if config.checks is None else list(config.checks))
    _writer(config).write_json("verify.json", report.to_dict())
    if not report.passed:
        logger.error("verification failed: %s", ", ".join(report.failures))
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def _fem_kappas(problem: Problem, spectrum: str) -> list[float]:
    modes = interior_eigenpairs(problem.interior, spectrum, problem.config.eigen_count)
    return [math.sqrt(mode.eigenvalue / problem.config.r0) for mode in modes if mode.eigenvalue > 0.0]


def _nearest(values: Sequence[float], target: float) -> float | None:
    if not values:
        return None
    return min(values, key=lambda value: abs(value - target))


def cmd_sweep(config: RunConfig) -> int:
    problem = Problem(config)
    context = SweepContext.prepare(
        problem.boundary, problem.interior, problem.material, problem.quad, problem.threads, config.eigen_count
    )
    records = sweep(
        problem.boundary,
        problem.interior,
        problem.material,
        config.kappa_grid,
        config.which,
        problem.quad,
        problem.threads,
        config.eigen_count,
        context,
    )
    writer = _writer(config)
    writer.write_csv("sweep.csv", SWEEP_CSV_FIELDS, (record.to_row() for record in records))

    fem = {spectrum: _fem_kappas(problem, spectrum) for spectrum in ("dirichlet", "neumann")}
    summary: dict[str, list[dict]] = {}
    for operator in config.which:
        column, spectrum = _DIP_COLUMNS[operator]
        exact = []
        if config.shape == "circle":
            exact = [item.kappa for item in disk_resonances(config.radius, config.r0, config.kappa_grid[-1] + 0.1, spectrum)]
        entries = []
        for dip in find_dips(records, column, config.null_ratio):
            entry = dip.to_dict()
            entry["spectrum"] = spectrum
            entry["fem_kappa"] = _nearest(fem[spectrum], dip.kappa)
            entry["bessel_kappa"] = _nearest([value for value in exact if value > 0.0], dip.kappa)
            entries.append(entry)
            logger.info("%s dip at kappa=%.4f (sigma ratio %.3e)", operator, dip.kappa, dip.ratio)
        summary[operator] = entries
    writer.write_json(
        "sweep_summary.json",
        {"shape": config.shape, "points": len(records), "dips": summary, "fem_kappa": fem},
    )
    return EXIT_OK


def _rows(points: np.ndarray, values: np.ndarray, side: str) -> list[list]:
    return [[x, y, v.real, v.imag, side] for (x, y), v in zip(points.tolist(), np.asarray(values, dtype=complex))]


def cmd_solve(config: RunConfig) -> int:
    problem = Problem(config)
    k = problem.wavenumber()
    ops = assemble_operators(problem.boundary, k, problem.quad, problem.threads)
    system = build_coupled(problem.interior, problem.material, k, ops)
    data = TransmissionData.from_incident(problem.interior, k, config.incident_direction, config.incident_amplitude)
    solution = solve(system, build_rhs(system, data), config.rcond, config.resonance_tol)

    points = probe_circle(config.probe_radius, config.probe_count)
    scattered = postprocess_exterior(problem.boundary, k, data.g, solution.field, solution.xi, points, problem.quad)
    amplitude = abs(config.incident_amplitude)
    ratio = float(np.abs(scattered.values).max() / amplitude) if amplitude > 0.0 else math.nan

    writer = _writer(config)
    header = ("x", "y", "re", "im", "side")
    writer.write_csv("solution_interior.csv", header, _rows(problem.interior.vertices, solution.field.coefficients, "interior"))
    writer.write_csv("solution_xi.csv", header, _rows(problem.boundary.midpoints, solution.xi, "boundary"))
    writer.write_csv("solution_probes.csv", header, scattered.to_rows())
    if config.matrix_format is not None:
        writer.write_matrix(f"coupled_matrix.{config.matrix_format}", system.matrix, config.matrix_format)
    writer.write_json(
        "solve_summary.json",
        {"kappa": config.kappa, "r0": config.r0, "scattered_ratio": ratio, **solution.to_dict()},
    )
    logger.info("scattered-field ratio at the probes: %.3e", ratio)
    return EXIT_OK


def cmd_eig(config: RunConfig) -> int:
    problem = Problem(config)
    rows = []
    for spectrum in ("dirichlet", "neumann"):
        modes = interior_eigenpairs(problem.interior, spectrum, config.eigen_count)
        exact = []
        if config.shape == "circle":
            kappa_max = math.sqrt(modes[-1].eigenvalue / config.r0) * 1.5
            exact = [item.kappa for item in disk_resonances(config.radius, config.r0, kappa_max, spectrum)]
        for index, mode in enumerate(modes):
            kappa = math.sqrt(max(mode.eigenvalue, 0.0) / config.r0)
            reference = _nearest(exact, kappa)
            rows.append([spectrum, index, mode.eigenvalue, kappa, math.nan if reference is None else reference])
    _writer(config).write_csv("eigenvalues.csv", ("bc", "index", "eigenvalue", "kappa", "disk_kappa"), rows)
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "solve": cmd_solve,
    "eig": cmd_eig,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args)
    except ConfigError as exc:
        logger.error("config: %s", exc)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](config)
    except ConfigError as exc:
        logger.error("%s: %s", args.command, exc)
        return EXIT_USAGE
    except NumericalError as exc:
        logger.error("%s: numerical failure: %s", args.command, exc)
        return EXIT_NUMERICAL
    except CalderonError as exc:
        logger.error("%s: %s", args.command, exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
