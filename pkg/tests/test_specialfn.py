from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.special as sps

from app.specialfn import (
    MAX_ARGUMENT,
    MAX_INDEX,
    MAX_ORDER,
    SpecialFunctionError,
    Wavenumber,
    bessel_j,
    bessel_j_derivative,
    bessel_table,
    bessel_y,
    bessel_zero,
    greens_fn,
    greens_fn_grad,
    greens_log_split,
    greens_radial,
    hankel1,
)


def test_wavenumber_derived_values() -> None:
    k = Wavenumber(2.0, 4.0)
    assert k.k == pytest.approx(4.0)
    assert k.lam == pytest.approx(16.0)
    assert k.to_dict() == {"kappa": 2.0, "r0": 4.0, "lambda": 16.0}


@pytest.mark.parametrize("kappa, r0", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (math.inf, 1.0)])
def test_wavenumber_rejects_non_positive(kappa: float, r0: float) -> None:
    with pytest.raises(SpecialFunctionError):
        Wavenumber(kappa, r0)


@pytest.mark.parametrize("order", [0, 1, 2, 5, 12])
def test_bessel_functions_match_scipy(order: int) -> None:
    x = np.array([0.3, 1.0, 2.4048, 7.5, 19.0, 45.0])
    assert np.allclose(bessel_j(order, x), sps.jv(order, x), atol=1e-12, rtol=1e-10)
    assert np.allclose(bessel_y(order, x), sps.yv(order, x), rtol=1e-9, atol=1e-12)
    assert np.allclose(hankel1(order, x), sps.hankel1(order, x), rtol=1e-9, atol=1e-12)
    assert np.allclose(bessel_j_derivative(order, x), sps.jvp(order, x), atol=1e-12, rtol=1e-10)


def test_scalar_input_returns_scalar() -> None:
    value = bessel_j(0, 1.0)
    assert isinstance(value, float)
    assert value == pytest.approx(0.7651976865579666, abs=1e-13)


def test_bessel_y_rejects_zero_argument() -> None:
    with pytest.raises(SpecialFunctionError):
        bessel_y(0, 0.0)


def test_order_out_of_range() -> None:
    with pytest.raises(SpecialFunctionError):
        bessel_j(MAX_ORDER + 1, 1.0)


@pytest.mark.parametrize(
    "order, index, kind, expected",
    [
        (0, 1, "J", 2.404825557695773),
        (1, 1, "J", 3.831705970207512),
        (0, 2, "J", 5.520078110286311),
        (1, 1, "Jprime", 1.841183781340659),
        (2, 1, "Jprime", 3.054236928227140),
        (0, 1, "Jprime", 3.831705970207512),
    ],
)
def test_bessel_zeros(order: int, index: int, kind: str, expected: float) -> None:
    assert bessel_zero(order, index, kind) == pytest.approx(expected, abs=1e-10)


def test_bessel_zero_validates_arguments() -> None:
    with pytest.raises(SpecialFunctionError):
        bessel_zero(0, 0)
    with pytest.raises(SpecialFunctionError):
        bessel_zero(0, MAX_INDEX + 1)
    with pytest.raises(SpecialFunctionError):
        bessel_zero(0, 1, "Y")


def test_greens_function_and_gradient() -> None:
    k = Wavenumber(1.5, 1.0)
    r = np.array([0.1, 0.7, 2.0])
    assert np.allclose(greens_fn(k, r), 0.25j * sps.hankel1(0, 1.5 * r), rtol=1e-10)
    x = np.array([[0.4, 0.3]])
    y = np.array([0.0, 0.0])
    step = 1e-6
    numeric = [
        (greens_fn(k, np.linalg.norm(x[0] + step * e - y)) - greens_fn(k, np.linalg.norm(x[0] - step * e - y)))
        / (2 * step)
        for e in np.eye(2)
    ]
    assert np.allclose(greens_fn_grad(k, x, y)[0], numeric, rtol=1e-6)
    with pytest.raises(SpecialFunctionError):
        greens_fn(k, np.array([0.0]))


def test_radial_derivatives_and_log_split_agree_with_greens_function() -> None:
    kk = 2.0
    r = np.array([0.05, 0.5, 1.3])
    g, dg, d2g = greens_radial(kk, r)
    assert np.allclose(g, 0.25j * sps.hankel1(0, kk * r), rtol=1e-10)
    assert np.allclose(dg, 0.25j * kk * sps.h1vp(0, kk * r), rtol=1e-9)
    assert np.allclose(d2g, 0.25j * kk * kk * sps.h1vp(0, kk * r, 2), rtol=1e-8)
    a, b = greens_log_split(kk, r)
    assert np.allclose(a * np.log(r) + b, g, rtol=1e-10)


def test_wronskian_holds_over_the_supported_range() -> None:
    x = np.geomspace(1e-3, MAX_ARGUMENT, 241)
    wronskian = bessel_j(1, x) * bessel_y(0, x) - bessel_j(0, x) * bessel_y(1, x)
    # J1 Y0 - J0 Y1 = 2 / (pi x)
    assert np.allclose(0.5 * math.pi * x * wronskian, 1.0, rtol=0.0, atol=1e-7)


def test_miller_table_satisfies_three_term_recurrence() -> None:
    x = np.concatenate([np.linspace(0.5, 50.0, 60), np.linspace(100.0, MAX_ARGUMENT, 10)])
    order_max = MAX_ORDER
    table, _, _ = bessel_table(x, order_max)
    n = np.arange(1, order_max)[:, None]
    lhs = table[:-2] + table[2:]
    rhs = (2.0 * n / x) * table[1:-1]
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-13)


def test_miller_table_satisfies_sum_of_squares() -> None:
    # J0^2 + 2 sum_n J_n^2 = 1, independent of the normalization the recurrence uses
    x = np.linspace(0.1, 50.0, 40)
    table, _, _ = bessel_table(x, 120)
    total = table[0] ** 2 + 2.0 * np.sum(table[1:] ** 2, axis=0)
    assert np.allclose(total, 1.0, rtol=0.0, atol=1e-12)


def test_greens_radial_solves_radial_helmholtz_equation() -> None:
    kk = 2.0
    r = np.linspace(0.2, 20.0, 45)
    g, dg, d2g = greens_radial(kk, r)
    scale = np.abs(d2g) + np.abs(dg) / r + kk * kk * np.abs(g)
    assert np.all(np.abs(d2g + dg / r + kk * kk * g) <= 1e-10 * scale)

    step = 1e-4
    g_plus, _, _ = greens_radial(kk, r + step)
    g_minus, _, _ = greens_radial(kk, r - step)
    fd_first = (g_plus - g_minus) / (2.0 * step)
    fd_second = (g_plus - 2.0 * g + g_minus) / step**2
    residual = fd_second + fd_first / r + kk * kk * g
    assert np.all(np.abs(residual) <= 1e-5 * scale)
