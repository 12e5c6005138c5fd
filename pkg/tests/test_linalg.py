from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from app.linalg import (
    LinearAlgebraError,
    NotDefiniteError,
    SingularMatrixError,
    cholesky_lower,
    largest_singular,
    lu_factor,
    lu_solve,
    normalized_svd,
    null_space_basis,
    principal_angles,
    smallest_singular,
    svd,
    sym_generalized_eig,
    truncated_lstsq,
    unwhiten,
    whiten,
)

from .reference_linalg import generalized_eigenvalues, jacobi_singular_values, naive_lu_solve


def _random_complex(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def _spd(n: int, seed: int = 1) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


@pytest.mark.parametrize("n", [1, 5, 32, 64])
def test_lu_solve_matches_naive_elimination(n: int) -> None:
    a = _random_complex(n)
    b = np.arange(n) + 1j
    x = lu_solve(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b)
    assert np.allclose(x, naive_lu_solve(a, b), rtol=1e-8, atol=1e-10)


def test_lu_factor_reports_condition_and_solves_adjoint() -> None:
    a = _random_complex(12)
    factor = lu_factor(a)
    assert 0.0 < factor.rcond <= 1.0
    b = np.ones(12, dtype=complex)
    assert np.allclose(a.conj().T @ factor.solve_h(b), b)


def test_lu_detects_exact_singularity() -> None:
    a = np.zeros((3, 3))
    a[0, 0] = 1.0
    with pytest.raises(SingularMatrixError) as info:
        lu_factor(a)
    assert info.value.pivot == 1


def test_non_finite_input_is_rejected() -> None:
    with pytest.raises(LinearAlgebraError):
        lu_solve(np.eye(2), np.array([1.0, np.nan]))
    with pytest.raises(LinearAlgebraError):
        svd(np.array([[np.inf]]))


@pytest.mark.parametrize("n", [4, 16, 48])
def test_svd_matches_jacobi(n: int) -> None:
    a = _random_complex(n, seed=n)
    result = svd(a)
    assert np.all(np.diff(result.values) <= 0.0)
    assert np.allclose(result.values, jacobi_singular_values(a), rtol=1e-10)
    assert np.allclose(result.left @ np.diag(result.values) @ result.right_h, a)


def test_extreme_singular_values_by_iteration() -> None:
    a = _random_complex(20, seed=3)
    values = svd(a).values
    sigma, vector = smallest_singular(a)
    assert sigma == pytest.approx(values[-1], rel=1e-4)
    assert np.linalg.norm(vector) == pytest.approx(1.0)
    assert largest_singular(a) == pytest.approx(values[0], rel=1e-5)
    # fixed start vectors give identical repeated results
    assert smallest_singular(a)[0] == sigma


def test_smallest_singular_of_singular_matrix() -> None:
    a = np.diag([1.0, 2.0, 0.0]).astype(complex)
    sigma, vector = smallest_singular(a)
    assert sigma == pytest.approx(0.0, abs=1e-12)
    assert abs(vector[2]) == pytest.approx(1.0)


def test_cholesky_and_whitening() -> None:
    b = _spd(6)
    chol = cholesky_lower(b)
    assert np.allclose(chol @ chol.T, b)
    a = _random_complex(6, seed=4)
    white = whiten(a, chol)
    assert np.allclose(chol @ white @ chol.conj().T, a)
    result = normalized_svd(a, chol)
    assert np.allclose(result.values, svd(white).values)
    x = unwhiten(result.right, chol)
    assert np.allclose(chol.conj().T @ x, result.right)
    with pytest.raises(NotDefiniteError):
        cholesky_lower(-np.eye(3))


def test_truncated_least_squares_and_null_space() -> None:
    a = np.diag([3.0, 1.0, 1e-14]).astype(complex)
    result = svd(a)
    null = null_space_basis(result, 1e-8)
    assert null.shape == (3, 1)
    assert abs(null[2, 0]) == pytest.approx(1.0)
    x = truncated_lstsq(result, np.array([3.0, 2.0, 5.0]), 1e-8)
    assert np.allclose(x, [1.0, 2.0, 0.0])


@pytest.mark.parametrize("sparse", [False, True])
def test_generalized_eigenproblem(sparse: bool) -> None:
    n = 30
    a = _spd(n, seed=5)
    b = _spd(n, seed=6)
    reference = generalized_eigenvalues(a, b)[:4]
    if sparse:
        values, vectors = sym_generalized_eig(sp.csr_matrix(a), sp.csr_matrix(b), 4)
    else:
        values, vectors = sym_generalized_eig(a, b, 4)
    assert np.allclose(values, reference, rtol=1e-8)
    assert np.allclose(vectors.T @ b @ vectors, np.eye(4), atol=1e-8)
    assert np.allclose(a @ vectors, b @ vectors * values, atol=1e-7)


def test_generalized_eigenproblem_count_bounds() -> None:
    with pytest.raises(LinearAlgebraError):
        sym_generalized_eig(np.eye(3), np.eye(3), 4)


def test_principal_angles() -> None:
    e = np.eye(3)
    assert np.allclose(principal_angles(e[:, :1], e[:, :1]), 0.0)
    assert np.allclose(principal_angles(e[:, :1], e[:, 1:2]), np.pi / 2)
    tilted = np.array([[1.0], [1.0], [0.0]]) / np.sqrt(2.0)
    assert np.allclose(principal_angles(tilted, e[:, :1]), np.pi / 4)
    assert principal_angles(e[:, :0], e).size == 0
