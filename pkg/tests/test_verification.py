from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from app.config import AppPaths, RunConfig
from app.errors import ConfigError, NumericalError
from app.models import KernelReport
from app.problem import Problem
from app.verification import CHECK_CATALOG, DISK_ONLY_CHECKS, CheckResult, VerificationSuite, run_verification
from app.verification import checks as check_module


def _config(tmp_path: Path, document: dict) -> RunConfig:
    return RunConfig(settings=document, paths=AppPaths(root=tmp_path))


def test_catalog_and_implementations_agree() -> None:
    assert set(CHECK_CATALOG) == set(check_module.CHECKS)
    assert DISK_ONLY_CHECKS <= set(CHECK_CATALOG)
    assert all(tolerance > 0.0 for _, tolerance in CHECK_CATALOG.values())


def test_check_result_pass_rule() -> None:
    assert CheckResult.measured(0.01, 0.02).passed
    assert not CheckResult.measured(0.03, 0.02).passed
    assert not CheckResult.measured(math.nan, 0.02).passed
    failed = CheckResult.failed(0.02, "boom")
    assert failed.to_dict() == {"value": failed.value, "tolerance": 0.02, "pass": False, "message": "boom"}
    assert "message" not in CheckResult.measured(0.0, 1.0).to_dict()


def test_kernel_checks_fail_on_dimension_mismatch(tmp_path: Path, settings_document: dict) -> None:
    context = check_module.VerificationContext(Problem(_config(tmp_path, settings_document)))
    basis = np.eye(8)
    # two near-null vectors against a single reference trace: the one angle that exists is zero
    context.__dict__["v_report"] = KernelReport(
        kappa_star=2.4,
        operator="V",
        resonant=True,
        null_vectors=basis[:, :2],
        reference_space=basis[:, :1],
        principal_angles=[0.0],
    )
    assert check_module.CHECKS["v_kernel"](context) == math.inf
    context.__dict__["w_report"] = KernelReport(
        kappa_star=1.8,
        operator="W",
        resonant=True,
        null_vectors=basis[:, :2],
        reference_space=basis[:, 2:4],
        principal_angles=[0.01, 0.02],
    )
    assert check_module.CHECKS["w_kernel"](context) == pytest.approx(0.02)


def test_unknown_check_names_are_rejected(tmp_path: Path, settings_document: dict) -> None:
    problem = Problem(_config(tmp_path, settings_document))
    with pytest.raises(ConfigError, match="no_such_check"):
        VerificationSuite(problem, ["v_symmetry", "no_such_check"])


def test_structural_checks_pass_on_coarse_disk(tmp_path: Path, settings_document: dict) -> None:
    names = ["projector_complement", "v_symmetry", "w_symmetry", "duality", "gauss_identity"]
    report = run_verification(_config(tmp_path, settings_document), names)
    assert list(report.results) == names
    assert report.passed, report.to_dict()
    payload = report.to_dict()
    assert payload["passed"] is True
    assert payload["skipped"] == []
    assert payload["checks"]["v_symmetry"]["tolerance"] == CHECK_CATALOG["v_symmetry"][1]


def test_raising_check_is_recorded_as_failure(
    tmp_path: Path, settings_document: dict, monkeypatch: pytest.MonkeyPatch
) -> None:
    def broken(ctx):
        raise NumericalError("factorization failed")

    monkeypatch.setitem(check_module.CHECKS, "w_symmetry", broken)
    report = run_verification(_config(tmp_path, settings_document), ["v_symmetry", "w_symmetry"])
    assert not report.passed
    assert report.failures == ["w_symmetry"]
    assert "factorization failed" in report.results["w_symmetry"].message
    assert report.results["v_symmetry"].passed


def test_disk_only_checks_are_skipped_for_the_kite(tmp_path: Path, settings_document: dict) -> None:
    settings_document["geometry"] = {"shape": "kite", "n_boundary": 32, "target_h": 0.3}
    report = run_verification(_config(tmp_path, settings_document), ["fem_dirichlet_eigenvalue", "v_symmetry"])
    assert report.skipped == ["fem_dirichlet_eigenvalue"]
    assert list(report.results) == ["v_symmetry"]
    assert report.passed


@pytest.mark.slow
def test_transmission_checks_on_refined_disk(tmp_path: Path, settings_document: dict) -> None:
    settings_document["geometry"] = {"shape": "circle", "radius": 1.0, "n_boundary": 64, "target_h": 0.1}
    settings_document["probes"] = {"radius": 3.0, "count": 8}
    names = [
        "transparency_interior",
        "transparency_exterior",
        "representation_formula",
        "plane_wave_interior_cauchy",
        "point_source_exterior_cauchy",
        "green_first_formula",
        "jump_relations",
    ]
    report = run_verification(_config(tmp_path, settings_document), names)
    assert report.passed, report.to_dict()


@pytest.mark.slow
def test_resonance_checks_on_refined_disk(tmp_path: Path, settings_document: dict) -> None:
    settings_document["geometry"] = {"shape": "circle", "radius": 1.0, "n_boundary": 64, "target_h": 0.1}
    settings_document["spectral"] = {"which": ["V"], "eigen_count": 12}
    names = [
        "v_kernel",
        "kadj_kernel_overlap",
        "w_kernel",
        "khalf_kernel_overlap",
        "coupled_kernel_interior_ratio",
        "coupled_kernel_angle",
        "coupled_neumann_regular",
        "kernel_annihilation",
    ]
    report = run_verification(_config(tmp_path, settings_document), names)
    assert report.passed, report.to_dict()
