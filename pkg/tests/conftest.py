from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app.bem import BoundaryOperatorSet, assemble_operators  # noqa: E402
from app.fem import MaterialField  # noqa: E402
from app.mesh import BoundaryMesh, InteriorMesh, circle_boundary, disk_triangulation, kite_boundary  # noqa: E402
from app.specialfn import Wavenumber  # noqa: E402


@pytest.fixture(scope="session")
def disk_boundary() -> BoundaryMesh:
    return circle_boundary(1.0, 64)


@pytest.fixture(scope="session")
def disk_interior(disk_boundary: BoundaryMesh) -> InteriorMesh:
    return disk_triangulation(disk_boundary, 0.1)


@pytest.fixture(scope="session")
def coarse_boundary() -> BoundaryMesh:
    return circle_boundary(1.0, 24)


@pytest.fixture(scope="session")
def coarse_interior(coarse_boundary: BoundaryMesh) -> InteriorMesh:
    return disk_triangulation(coarse_boundary, 0.25)


@pytest.fixture(scope="session")
def kite() -> BoundaryMesh:
    return kite_boundary(64)


@pytest.fixture(scope="session")
def unit_k() -> Wavenumber:
    return Wavenumber(1.0, 1.0)


@pytest.fixture(scope="session")
def disk_ops(disk_boundary: BoundaryMesh, unit_k: Wavenumber) -> BoundaryOperatorSet:
    return assemble_operators(disk_boundary, unit_k, threads=1)


@pytest.fixture(scope="session")
def coarse_ops(coarse_boundary: BoundaryMesh, unit_k: Wavenumber) -> BoundaryOperatorSet:
    return assemble_operators(coarse_boundary, unit_k, threads=1)


@pytest.fixture(scope="session")
def homogeneous(disk_interior: InteriorMesh) -> MaterialField:
    return MaterialField.constant(disk_interior, 1.0, 1.0)


@pytest.fixture()
def settings_document() -> dict:
    return {
        "geometry": {"shape": "circle", "radius": 1.0, "n_boundary": 24, "target_h": 0.25},
        "physics": {"kappa": 1.0, "kappa_grid": {"start": 2.3, "stop": 2.5, "step": 0.05}},
        "spectral": {"which": ["V"], "eigen_count": 6},
        "probes": {"radius": 3.0, "count": 4},
        "parallel": {"threads": 1},
    }
