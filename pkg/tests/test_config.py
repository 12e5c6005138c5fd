from __future__ import annotations

from pathlib import Path

import pytest

from app.config import AppPaths, RunConfig
from app.errors import ConfigError


def _config(tmp_path: Path, document: dict) -> RunConfig:
    return RunConfig(settings=document, paths=AppPaths(root=tmp_path))


def test_defaults(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("CALDERON_THREADS", raising=False)
    config = _config(tmp_path, {})
    assert config.shape == "circle"
    assert config.n_boundary == 128
    assert config.kappa_grid[0] == 2.0
    assert config.kappa_grid[-1] == pytest.approx(2.8)
    assert len(config.kappa_grid) == 81
    assert config.output_dir == (tmp_path / "output").resolve()
    assert config.diameter == 2.0


def test_explicit_grid_and_material(tmp_path: Path) -> None:
    config = _config(
        tmp_path,
        {
            "physics": {
                "kappa_grid": {"values": [1.0, 1.5, 2.0]},
                "material": {"kind": "layered", "value": 2.0, "core_value": 3.0, "core_radius": 0.4},
            }
        },
    )
    assert config.kappa_grid == (1.0, 1.5, 2.0)
    assert config.material_kind == "layered"
    assert config.core_radius == 0.4


def test_config_hash_is_stable_and_sensitive(tmp_path: Path) -> None:
    first = _config(tmp_path, {"physics": {"kappa": 1.2}})
    again = _config(tmp_path, {"physics": {"kappa": 1.2}})
    other = _config(tmp_path, {"physics": {"kappa": 1.3}})
    assert first.config_hash == again.config_hash
    assert first.config_hash != other.config_hash
    assert len(first.config_hash) == 64


@pytest.mark.parametrize(
    "document, message",
    [
        ({"geometry": {"shape": "square"}}, "geometry.shape"),
        ({"geometry": {"n_boundary": 2}}, "n_boundary"),
        ({"physics": {"kappa": -1.0}}, "physics.kappa"),
        ({"physics": {"kappa_grid": {"start": 3.0, "stop": 2.0}}}, "empty"),
        ({"physics": {"kappa_grid": {"values": [2.0, 1.0]}}}, "ascending"),
        ({"physics": {"kappa": 30.0}}, "supported range"),
        ({"physics": {"incident": {"direction": [1.0, 1.0]}}}, "unit vector"),
        ({"physics": {"material": {"kind": "graded"}}}, "material.kind"),
        ({"spectral": {"which": ["X"]}}, "spectral.which"),
        ({"spectral": {"null_ratio": 1.5}}, "null_ratio"),
        ({"spectral": {"eigen_count": 40}}, "eigen_count"),
        ({"solver": {"rcond": 0.0}}, "solver.rcond"),
        ({"quadrature": {"gauss_points": 100}}, "gauss_points"),
        ({"parallel": {"threads": 0}}, "threads"),
        ({"output": {"matrix_format": "npy"}}, "matrix_format"),
    ],
)
def test_validation_errors(tmp_path: Path, document: dict, message: str) -> None:
    with pytest.raises((ConfigError, ValueError), match=message):
        _config(tmp_path, document)


def test_threads_from_environment(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("CALDERON_THREADS", "3")
    assert _config(tmp_path, {}).threads == 3
    monkeypatch.setenv("CALDERON_THREADS", "many")
    with pytest.raises(ConfigError):
        _config(tmp_path, {})


def test_output_directory_created_on_demand(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("CALDERON_OUTPUT_DIR", raising=False)
    config = _config(tmp_path, {"output": {"directory": "nested/out"}})
    path = config.ensure_output_dir()
    assert path.is_dir()
    assert path == (tmp_path / "nested" / "out").resolve()
    override = tmp_path / "override"
    monkeypatch.setenv("CALDERON_OUTPUT_DIR", str(override))
    assert config.ensure_output_dir() == override.resolve()
