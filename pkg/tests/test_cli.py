from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from app.artifacts import read_csv
from app.main import EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FAILED, build_parser, main


def _write(tmp_path: Path, document: dict) -> Path:
    path = tmp_path / "run.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    for name in ("CALDERON_OUTPUT_DIR", "CALDERON_THREADS", "CALDERON_SETTINGS_PATH"):
        monkeypatch.delenv(name, raising=False)


def test_parser_requires_a_command() -> None:
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    args = build_parser().parse_args(["--threads", "2", "--matrix-format", "csv", "solve"])
    assert args.command == "solve"
    assert args.threads == 2
    assert args.matrix_format == "csv"


def test_malformed_json_exits_with_usage_code(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["--config", str(path), "--out", str(tmp_path / "out"), "eig"]) == EXIT_USAGE


def test_missing_config_exits_with_usage_code(tmp_path: Path) -> None:
    assert main(["--config", str(tmp_path / "absent.json"), "eig"]) == EXIT_USAGE


def test_empty_grid_exits_with_usage_code(tmp_path: Path, settings_document: dict) -> None:
    settings_document["physics"]["kappa_grid"] = {"start": 2.5, "stop": 2.0, "step": 0.1}
    path = _write(tmp_path, settings_document)
    assert main(["--config", str(path), "--out", str(tmp_path / "out"), "sweep"]) == EXIT_USAGE


def test_eig_writes_both_spectra(tmp_path: Path, settings_document: dict) -> None:
    out = tmp_path / "missing" / "out"
    path = _write(tmp_path, settings_document)
    assert main(["--config", str(path), "--out", str(out), "eig"]) == EXIT_OK
    config_hash, header, rows = read_csv(out / "eigenvalues.csv")
    assert config_hash is not None and len(config_hash) == 64
    assert header == ["bc", "index", "eigenvalue", "kappa", "disk_kappa"]
    dirichlet = [row for row in rows if row[0] == "dirichlet"]
    neumann = [row for row in rows if row[0] == "neumann"]
    assert len(dirichlet) == len(neumann) == settings_document["spectral"]["eigen_count"]
    # coarse mesh: the first Dirichlet kappa is close to j_01
    assert float(dirichlet[0][3]) == pytest.approx(2.4048, rel=0.05)
    assert float(dirichlet[0][4]) == pytest.approx(2.404825557695773)
    assert float(neumann[0][2]) == pytest.approx(0.0, abs=1e-8)


def test_solve_writes_fields_and_matrix(tmp_path: Path, settings_document: dict) -> None:
    out = tmp_path / "out"
    path = _write(tmp_path, settings_document)
    code = main(["--config", str(path), "--out", str(out), "--matrix-format", "bin", "solve"])
    assert code == EXIT_OK
    for name in ("solution_interior.csv", "solution_xi.csv", "solution_probes.csv"):
        config_hash, header, rows = read_csv(out / name)
        assert config_hash is not None
        assert header == ["x", "y", "re", "im", "side"]
        assert rows
    summary = json.loads((out / "solve_summary.json").read_text(encoding="utf-8"))
    assert summary["rank_deficient"] is False
    # homogeneous r = r0: the medium is transparent up to discretization error
    assert summary["scattered_ratio"] <= 0.1
    assert (out / "coupled_matrix.bin").exists()
    sidecar = json.loads((out / "coupled_matrix.bin.json").read_text(encoding="utf-8"))
    assert sidecar["config_hash"] == summary["config_hash"]


def test_zero_amplitude_gives_zero_fields(tmp_path: Path, settings_document: dict) -> None:
    settings_document["physics"]["incident"] = {"direction": [1.0, 0.0], "amplitude": 0.0}
    out = tmp_path / "out"
    assert main(["--config", str(_write(tmp_path, settings_document)), "--out", str(out), "solve"]) == EXIT_OK
    _, _, rows = read_csv(out / "solution_interior.csv")
    values = np.array([[float(row[2]), float(row[3])] for row in rows])
    assert not values.any()
    summary = json.loads((out / "solve_summary.json").read_text(encoding="utf-8"))
    assert summary["scattered_ratio"] is None


def test_verify_subset_passes(tmp_path: Path, settings_document: dict) -> None:
    settings_document["verify"] = {"checks": ["projector_complement", "v_symmetry", "w_symmetry"]}
    out = tmp_path / "out"
    code = main(["--config", str(_write(tmp_path, settings_document)), "--out", str(out), "verify"])
    report = json.loads((out / "verify.json").read_text(encoding="utf-8"))
    assert code == EXIT_OK, report
    assert report["passed"] is True


def test_coarse_boundary_fails_idempotency(tmp_path: Path, settings_document: dict) -> None:
    settings_document["geometry"]["n_boundary"] = 8
    settings_document["geometry"]["target_h"] = 0.4
    settings_document["verify"] = {"checks": ["projector_idempotency_exterior"]}
    out = tmp_path / "out"
    code = main(["--config", str(_write(tmp_path, settings_document)), "--out", str(out), "verify"])
    report = json.loads((out / "verify.json").read_text(encoding="utf-8"))
    assert code == EXIT_VERIFY_FAILED
    assert report["checks"]["projector_idempotency_exterior"]["pass"] is False


@pytest.mark.slow
def test_sweep_reports_dirichlet_dip(tmp_path: Path, settings_document: dict) -> None:
    settings_document["geometry"]["n_boundary"] = 48
    settings_document["geometry"]["target_h"] = 0.15
    settings_document["physics"]["kappa_grid"] = {"start": 2.2, "stop": 2.6, "step": 0.01}
    out = tmp_path / "out"
    code = main(["--config", str(_write(tmp_path, settings_document)), "--out", str(out), "sweep"])
    assert code == EXIT_OK
    _, header, rows = read_csv(out / "sweep.csv")
    assert header[0] == "kappa"
    assert len(rows) == 41
    summary = json.loads((out / "sweep_summary.json").read_text(encoding="utf-8"))
    dips = summary["dips"]["V"]
    assert len(dips) == 1
    assert dips[0]["kappa"] == pytest.approx(2.4048, abs=0.03)
    assert dips[0]["bessel_kappa"] == pytest.approx(2.404825557695773)
