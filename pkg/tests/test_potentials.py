from __future__ import annotations

import math

import numpy as np
import pytest

from app.bem import cauchy_data_point_source
from app.errors import ConfigError
from app.fem import InteriorField, interpolate
from app.mesh import BoundaryMesh, InteriorMesh
from app.potentials import (
    NearFieldError,
    eval_dl,
    eval_dl_gradient,
    eval_sl,
    eval_sl_gradient,
    incident_plane_wave,
    jump_defects,
    postprocess_exterior,
    probe_circle,
)
from app.specialfn import Wavenumber, greens_fn

SOURCE = (0.2, 0.1)


def test_double_layer_of_one_is_one_inside(disk_boundary: BoundaryMesh) -> None:
    small = Wavenumber(1e-3, 1.0)
    points = np.array([[0.0, 0.0], [0.3, -0.4], [2.0, 0.0], [0.0, -3.0]])
    sample = eval_dl(disk_boundary, small, np.ones(disk_boundary.n_nodes), points)
    assert sample.sides == ("interior", "interior", "exterior", "exterior")
    assert np.abs(sample.values[:2] - 1.0).max() <= 1e-2
    assert np.abs(sample.values[2:]).max() <= 1e-2


def test_representation_of_point_source(disk_boundary: BoundaryMesh, unit_k: Wavenumber) -> None:
    traces = cauchy_data_point_source(disk_boundary, unit_k, SOURCE)
    points = probe_circle(3.0, 12)
    field = (eval_sl(disk_boundary, unit_k, traces.neumann, points) + eval_dl(
        disk_boundary, unit_k, traces.dirichlet, points
    )).scaled(-1.0)
    exact = greens_fn(unit_k, np.linalg.norm(points - np.asarray(SOURCE), axis=1))
    assert np.abs(field.values - exact).max() / np.abs(exact).max() <= 0.02


def test_single_layer_gradient_matches_differences(disk_boundary: BoundaryMesh, unit_k: Wavenumber) -> None:
    xi = 1.0 + 0.5 * np.cos(np.arctan2(disk_boundary.midpoints[:, 1], disk_boundary.midpoints[:, 0]))
    point = np.array([[1.7, 0.4]])
    step = 1e-5
    gradient = eval_sl_gradient(disk_boundary, unit_k, xi, point)[0]
    for axis in (0, 1):
        shift = np.zeros((1, 2))
        shift[0, axis] = step
        difference = (
            eval_sl(disk_boundary, unit_k, xi, point + shift).values[0]
            - eval_sl(disk_boundary, unit_k, xi, point - shift).values[0]
        ) / (2.0 * step)
        assert gradient[axis] == pytest.approx(difference, rel=1e-4, abs=1e-8)


def test_double_layer_gradient_matches_differences(disk_boundary: BoundaryMesh, unit_k: Wavenumber) -> None:
    g = disk_boundary.nodes[:, 0] + 0.3j * disk_boundary.nodes[:, 1]
    point = np.array([[-0.2, 0.3]])
    step = 1e-5
    gradient = eval_dl_gradient(disk_boundary, unit_k, g, point)[0]
    for axis in (0, 1):
        shift = np.zeros((1, 2))
        shift[0, axis] = step
        difference = (
            eval_dl(disk_boundary, unit_k, g, point + shift).values[0]
            - eval_dl(disk_boundary, unit_k, g, point - shift).values[0]
        ) / (2.0 * step)
        assert gradient[axis] == pytest.approx(difference, rel=1e-4, abs=1e-8)


def test_near_points_are_rejected_unless_subdivided(disk_boundary: BoundaryMesh, unit_k: Wavenumber) -> None:
    near = np.array([[1.0 + 0.2 * disk_boundary.h, 0.0]])
    xi = np.ones(disk_boundary.n_segments)
    with pytest.raises(NearFieldError) as caught:
        eval_sl(disk_boundary, unit_k, xi, near)
    assert caught.value.distance < disk_boundary.h
    far = eval_sl(disk_boundary, unit_k, xi, near, near_field="subdivide")
    assert np.isfinite(far.values).all()
    with pytest.raises(ConfigError):
        eval_sl(disk_boundary, unit_k, xi, near, near_field="ignore")


def test_density_length_is_checked(disk_boundary: BoundaryMesh, unit_k: Wavenumber) -> None:
    with pytest.raises(ConfigError):
        eval_sl(disk_boundary, unit_k, np.ones(3), probe_circle(3.0, 2))
    with pytest.raises(ConfigError):
        eval_dl(disk_boundary, unit_k, np.ones(disk_boundary.n_nodes + 1), probe_circle(3.0, 2))


def test_jump_relations(disk_boundary: BoundaryMesh, unit_k: Wavenumber) -> None:
    s = 2.0 * math.pi * disk_boundary.arclength_nodes() / disk_boundary.perimeter
    s_mid = 2.0 * math.pi * disk_boundary.arclength_midpoints() / disk_boundary.perimeter
    g = np.cos(s) + 0.5 * np.sin(2.0 * s)
    xi = 1.0 + 0.5 * np.cos(s_mid)
    defects = jump_defects(disk_boundary, unit_k, g, xi, 0.1 * disk_boundary.h)
    assert set(defects) == {"sl_dirichlet", "sl_neumann", "dl_dirichlet", "dl_neumann"}
    assert max(defects.values()) <= 0.1
    with pytest.raises(ConfigError):
        jump_defects(disk_boundary, unit_k, g, xi, 2.0 * disk_boundary.h)


def test_postprocess_rejects_interior_points(
    disk_boundary: BoundaryMesh, disk_interior: InteriorMesh, unit_k: Wavenumber
) -> None:
    field = InteriorField(disk_interior, interpolate(disk_interior, lambda p: np.ones(p.shape[0])))
    g = np.ones(disk_boundary.n_nodes)
    xi = np.zeros(disk_boundary.n_segments)
    with pytest.raises(ConfigError):
        postprocess_exterior(disk_boundary, unit_k, g, field, xi, np.array([[0.0, 0.0]]))
    # T_D U = g and xi = 0 leave no scattered field
    sample = postprocess_exterior(disk_boundary, unit_k, g, field, xi, probe_circle(2.5, 4))
    assert np.abs(sample.values).max() < 1e-12
    assert set(sample.sides) == {"exterior"}


def test_plane_wave_and_probe_helpers(unit_k: Wavenumber) -> None:
    points = probe_circle(2.0, 4)
    assert points.shape == (4, 2)
    assert np.allclose(np.linalg.norm(points, axis=1), 2.0)
    values = incident_plane_wave(points, unit_k, (0.0, 1.0), 2.0)
    assert np.allclose(np.abs(values), 2.0)
    assert values[1] == pytest.approx(2.0 * np.exp(2.0j))
    with pytest.raises(ConfigError):
        incident_plane_wave(points, unit_k, (1.0, 1.0))
    with pytest.raises(ConfigError):
        probe_circle(0.0, 4)
