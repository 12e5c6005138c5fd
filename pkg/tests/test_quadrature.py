from __future__ import annotations

import math

import numpy as np
import pytest

from app.bem import LaplaceKernel, SingleLayerKernel
from app.mesh import circle_boundary
from app.quadrature import (
    QuadratureError,
    QuadratureSpec,
    gauss_legendre01,
    integrate_point_segments,
    integrate_segment_pairs,
    log_gauss01,
    scatter_tables,
    segment_distances,
)


def test_gauss_rule_integrates_polynomials() -> None:
    x, w = gauss_legendre01(5)
    for degree in range(10):
        assert np.sum(w * x**degree) == pytest.approx(1.0 / (degree + 1), abs=1e-14)


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_log_rule_is_exact_for_polynomials(n: int) -> None:
    u, w = log_gauss01(n)
    assert np.all((u > 0.0) & (u < 1.0))
    for degree in range(2 * n):
        # int_0^1 -ln(u) u^d du = 1 / (d + 1)^2
        assert np.sum(w * u**degree) == pytest.approx(1.0 / (degree + 1) ** 2, abs=1e-13)


def test_quadrature_spec_bounds() -> None:
    assert QuadratureSpec().to_dict() == {"gauss_points": 8, "log_points": 8, "duffy_points": 8}
    with pytest.raises(QuadratureError):
        QuadratureSpec(gauss_points=1)
    with pytest.raises(QuadratureError):
        QuadratureSpec(log_points=65)


def test_single_segment_self_integral_of_log_kernel() -> None:
    # int_0^1 int_0^1 ln|s - t| ds dt = -3/2 on a unit segment
    mesh = circle_boundary(1.0, 3)
    kernel = LaplaceKernel(1.0)
    tables = integrate_segment_pairs(mesh, kernel, QuadratureSpec(), threads=1)
    length = mesh.lengths[0]
    expected = -(length**2) * (math.log(length) - 1.5) / (2.0 * math.pi)
    assert tables[0, 0].sum().real == pytest.approx(expected, rel=1e-10)


def test_pair_tables_are_transpose_symmetric_for_symmetric_kernel() -> None:
    mesh = circle_boundary(1.0, 16)
    tables = integrate_segment_pairs(mesh, SingleLayerKernel(1.0), threads=1)
    matrix = scatter_tables(tables, mesh, trial="pc", test="pc")
    assert np.allclose(matrix, matrix.T, atol=1e-13)


def test_tables_do_not_depend_on_thread_count() -> None:
    mesh = circle_boundary(1.0, 32)
    one = integrate_segment_pairs(mesh, SingleLayerKernel(2.0), threads=1)
    four = integrate_segment_pairs(mesh, SingleLayerKernel(2.0), threads=4)
    assert np.array_equal(one, four)


def test_pc_scatter_sums_local_tables() -> None:
    mesh = circle_boundary(1.0, 8)
    tables = np.random.default_rng(0).standard_normal((8, 8, 2, 2)) + 0j
    pc = scatter_tables(tables, mesh, trial="pc", test="pc")
    pl = scatter_tables(tables, mesh, trial="pl", test="pl")
    assert np.allclose(pc, tables.sum(axis=(2, 3)))
    # summing a pl matrix over nodes collapses to the pc matrix
    assert pl.sum() == pytest.approx(pc.sum())


def test_far_point_integral_of_log_kernel() -> None:
    # the mean of ln|x - y| over a circle is ln|x| for |x| > 1
    mesh = circle_boundary(1.0, 64)
    values = integrate_point_segments(np.array([[10.0, 0.0]]), mesh, LaplaceKernel(1.0))
    expected = -mesh.perimeter * math.log(10.0) / (2.0 * math.pi)
    assert values.sum().real == pytest.approx(expected, rel=1e-6)


def test_near_field_subdivision_improves_accuracy() -> None:
    mesh = circle_boundary(1.0, 16)
    point = mesh.midpoints[:1] * (1.0 - 1e-3)
    kernel = LaplaceKernel(1.0)
    fine = integrate_point_segments(point, mesh, kernel, QuadratureSpec(gauss_points=32), near_radius=mesh.h)
    coarse = integrate_point_segments(point, mesh, kernel, QuadratureSpec(gauss_points=4))
    refined = integrate_point_segments(point, mesh, kernel, QuadratureSpec(gauss_points=4), near_radius=mesh.h)
    assert abs(refined.sum() - fine.sum()) < abs(coarse.sum() - fine.sum())


def test_segment_distances() -> None:
    mesh = circle_boundary(1.0, 4)
    distances = segment_distances(np.zeros((1, 2)), mesh)
    assert np.allclose(distances, math.sqrt(0.5))
