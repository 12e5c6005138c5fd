"""Bessel and Hankel functions of real argument and the 2D Helmholtz fundamental solution.

All evaluation goes through one vectorized backward (Miller) recurrence that
returns J_0 .. J_n normalized by J_0 + 2 sum J_2k = 1 together with the Neumann
sums that turn J into Y_0 and Y_1.  Higher Y orders follow by the (stable)
forward recurrence.  Zeros are bracketed on a grid and polished with Brent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import brentq

from .errors import NumericalError

EULER_GAMMA = 0.57721566490153286061
MAX_ORDER = 20
MAX_INDEX = 20
# 1000 を超える引数は扱わない (再帰回数が引数に比例する)
MAX_ARGUMENT = 1000.0

_RESCALE_AT = 1e200
_RESCALE_BY = 1e-200

ZeroKind = Literal["J", "Jprime"]


class SpecialFunctionError(NumericalError, ValueError):
    """Raised for arguments outside the supported domain."""


@dataclass(frozen=True)
class Wavenumber:
    """Exterior wavenumber kappa together with the exterior coefficient r0."""

    kappa: float
    exterior_coefficient: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kappa) and self.kappa > 0.0):
            raise SpecialFunctionError(f"kappa must be positive and finite, got {self.kappa!r}")
        if not (math.isfinite(self.exterior_coefficient) and self.exterior_coefficient > 0.0):
            raise SpecialFunctionError(
                f"exterior coefficient must be positive and finite, got {self.exterior_coefficient!r}"
            )

    @property
    def lam(self) -> float:
        return self.kappa * self.kappa * self.exterior_coefficient

    @property
    def k(self) -> float:
        """Effective wavenumber of the exterior Helmholtz operator, kappa * sqrt(r0)."""
        return self.kappa * math.sqrt(self.exterior_coefficient)

    def to_dict(self) -> dict[str, float]:
        return {"kappa": self.kappa, "r0": self.exterior_coefficient, "lambda": self.lam}


# Miller recurrence ----------------------------------------------------------
def _neumann_coefficients(m: int) -> tuple[float, float, float]:
    """Weights of f_m in the normalization sum and the Y_0 / Y_1 Neumann sums."""
    if m == 0:
        return 1.0, 0.0, 0.0
    if m % 2 == 0:
        half = m // 2
        return 2.0, (-1.0) ** half / half, 0.0
    up = (m + 1) // 2
    c1 = (-1.0) ** up / up
    if m >= 3:
        down = (m - 1) // 2
        c1 -= (-1.0) ** down / down
    return 0.0, 0.0, c1


def bessel_table(z: np.ndarray, order_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """J_0..J_order_max at z >= 0 plus S0 = sum (-1)^k J_2k / k and S1 = sum (-1)^k (J_2k-1 - J_2k+1) / k.

    Returns arrays shaped (order_max + 1, *z.shape), z.shape and z.shape.
    """
    z = np.asarray(z, dtype=float)
    shape = z.shape
    flat = z.reshape(-1)
    table = np.zeros((order_max + 1, flat.size))
    s0 = np.zeros(flat.size)
    s1 = np.zeros(flat.size)
    if flat.size == 0:
        return table.reshape((order_max + 1,) + shape), s0.reshape(shape), s1.reshape(shape)

    zero = flat == 0.0
    work = np.where(zero, 1.0, flat)
    zmax = float(work.max())
    start = int(zmax + 10.0 * zmax ** (1.0 / 3.0) + 30.0) + order_max
    start += start % 2

    norm = np.zeros(flat.size)
    f_next = np.zeros(flat.size)
    f_curr = np.full(flat.size, 1e-30)

    def accumulate(m: int, values: np.ndarray) -> None:
        w_norm, c0, c1 = _neumann_coefficients(m)
        if m <= order_max:
            table[m] = values
        if w_norm:
            norm[:] += w_norm * values
        if c0:
            s0[:] += c0 * values
        if c1:
            s1[:] += c1 * values

    accumulate(start, f_curr)
    for m in range(start, 0, -1):
        f_prev = (2.0 * m / work) * f_curr - f_next
        f_next, f_curr = f_curr, f_prev
        accumulate(m - 1, f_curr)
        big = np.abs(f_curr) > _RESCALE_AT
        if big.any():
            f_curr[big] *= _RESCALE_BY
            f_next[big] *= _RESCALE_BY
            norm[big] *= _RESCALE_BY
            s0[big] *= _RESCALE_BY
            s1[big] *= _RESCALE_BY
            table[:, big] *= _RESCALE_BY

    table /= norm
    s0 /= norm
    s1 /= norm
    if zero.any():
        table[:, zero] = 0.0
        table[0, zero] = 1.0
        s0[zero] = 0.0
        s1[zero] = 0.0
    return table.reshape((order_max + 1,) + shape), s0.reshape(shape), s1.reshape(shape)


def _y_orders(z: np.ndarray, order_max: int) -> tuple[np.ndarray, np.ndarray]:
    """J_0..J_order_max and Y_0..Y_order_max at strictly positive z."""
    table, s0, s1 = bessel_table(z, order_max + 1)
    log_term = np.log(z / 2.0) + EULER_GAMMA
    j0 = table[0]
    j1 = table[1]
    ys = np.empty((order_max + 1,) + z.shape)
    ys[0] = (2.0 / math.pi) * log_term * j0 - (4.0 / math.pi) * s0
    if order_max >= 1:
        ys[1] = -(2.0 / math.pi) * (j0 / z - log_term * j1) + (2.0 / math.pi) * s1
    for n in range(1, order_max):
        ys[n + 1] = (2.0 * n / z) * ys[n] - ys[n - 1]
    return table[: order_max + 1], ys


# Argument checking -----------------------------------------------------------
def _check_order(order: int) -> int:
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise SpecialFunctionError(f"order must be an integer, got {order!r}")
    if not 0 <= int(order) <= MAX_ORDER:
        raise SpecialFunctionError(f"order must lie in [0, {MAX_ORDER}], got {order}")
    return int(order)


def _check_argument(x, *, strictly_positive: bool) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise SpecialFunctionError("argument must be finite")
    if strictly_positive and np.any(arr <= 0.0):
        raise SpecialFunctionError("argument must be > 0 (logarithmic singularity at 0)")
    if np.any(arr < 0.0):
        raise SpecialFunctionError("argument must be >= 0")
    if np.any(arr > MAX_ARGUMENT):
        raise SpecialFunctionError(f"argument exceeds the supported range {MAX_ARGUMENT}")
    return arr, arr.ndim == 0


def _unwrap(values: np.ndarray, scalar: bool):
    return values.item() if scalar else values


# Public evaluators -------------------------------------------------------------
def bessel_j(order: int, x):
    n = _check_order(order)
    arr, scalar = _check_argument(x, strictly_positive=False)
    table, _, _ = bessel_table(np.atleast_1d(arr), n)
    return _unwrap(table[n].reshape(arr.shape), scalar)


def bessel_y(order: int, x):
    n = _check_order(order)
    arr, scalar = _check_argument(x, strictly_positive=True)
    _, ys = _y_orders(np.atleast_1d(arr), n)
    return _unwrap(ys[n].reshape(arr.shape), scalar)


def hankel1(order: int, x):
    n = _check_order(order)
    arr, scalar = _check_argument(x, strictly_positive=True)
    js, ys = _y_orders(np.atleast_1d(arr), n)
    return _unwrap((js[n] + 1j * ys[n]).reshape(arr.shape), scalar)


def bessel_j_derivative(order: int, x):
    """J'_n = (J_{n-1} - J_{n+1}) / 2 with J_{-1} = -J_1."""
    n = _check_order(order)
    arr, scalar = _check_argument(x, strictly_positive=False)
    table, _, _ = bessel_table(np.atleast_1d(arr), n + 1)
    lower = -table[1] if n == 0 else table[n - 1]
    values = 0.5 * (lower - table[n + 1])
    return _unwrap(values.reshape(arr.shape), scalar)


def hankel1_01(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """H0 and H1 at strictly positive z, no argument checks (assembly hot path)."""
    js, ys = _y_orders(np.asarray(z, dtype=float), 1)
    return js[0] + 1j * ys[0], js[1] + 1j * ys[1]


# Fundamental solution -----------------------------------------------------------
def greens_fn(k: Wavenumber, r):
    """G(r) = (i/4) H0(k r) with k = kappa sqrt(r0)."""
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise SpecialFunctionError("greens_fn requires r > 0")
    values = 0.25j * hankel1(0, k.k * arr)
    return values


def greens_fn_grad(k: Wavenumber, x, y) -> np.ndarray:
    """Gradient in x of G(|x - y|): -(i k / 4) H1(k r) (x - y) / r."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r <= 0.0):
        raise SpecialFunctionError("greens_fn_grad requires x != y")
    _, h1 = hankel1_01(k.k * r)
    return (-0.25j * k.k * h1 / r)[..., None] * diff


def greens_radial(kk: float, r: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """G, dG/dr and d2G/dr2 at r > 0 for effective wavenumber kk."""
    z = kk * np.asarray(r, dtype=float)
    h0, h1 = hankel1_01(z)
    g = 0.25j * h0
    dg = -0.25j * kk * h1
    d2g = -0.25j * kk * kk * (h0 - h1 / z)
    return g, dg, d2g


def greens_log_split(kk: float, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split G(r) = a(r) ln r + b(r) with a, b analytic; valid at r = 0."""
    z = kk * np.asarray(r, dtype=float)
    table, s0, _ = bessel_table(z, 0)
    j0 = table[0]
    a = -j0 / (2.0 * math.pi)
    b = (0.25j - (math.log(kk / 2.0) + EULER_GAMMA) / (2.0 * math.pi)) * j0 + s0 / math.pi
    return a, b


# Zeros ----------------------------------------------------------------------------
def bessel_zero(order: int, index: int, kind: ZeroKind = "J") -> float:
    """index-th positive zero of J_order or J'_order.

    The stationary point of J'_n at x = 0 is never counted, so
    bessel_zero(0, 1, "Jprime") is 3.8317...
    """
    n = _check_order(order)
    if isinstance(index, bool) or not isinstance(index, (int, np.integer)):
        raise SpecialFunctionError(f"index must be an integer, got {index!r}")
    if not 1 <= int(index) <= MAX_INDEX:
        raise SpecialFunctionError(f"index must lie in [1, {MAX_INDEX}], got {index}")
    if kind not in ("J", "Jprime"):
        raise SpecialFunctionError(f"kind must be 'J' or 'Jprime', got {kind!r}")

    def evaluate(x):
        if kind == "J":
            return bessel_j(n, x)
        return bessel_j_derivative(n, x)

    upper = n + (int(index) + 2) * math.pi + 10.0
    grid = np.arange(0.05, upper, 0.05)
    values = evaluate(grid)
    signs = np.sign(values)
    crossings = np.flatnonzero(signs[:-1] * signs[1:] < 0.0)
    if crossings.size < index:
        raise SpecialFunctionError(f"could not bracket zero {index} of {kind}_{n}")
    i = crossings[int(index) - 1]
    return float(brentq(lambda t: float(evaluate(t)), grid[i], grid[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200))
