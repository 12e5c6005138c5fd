"""Dense complex linear algebra used by every numeric module.

Thin contracts over LAPACK (through scipy.linalg) plus the energy-normalized
helpers used for resonance detection.  Everything else in the toolkit calls
these functions rather than scipy directly, so the residual contracts tested
in tests/test_linalg.py hold for the whole repository.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .errors import NumericalError

logger = logging.getLogger(__name__)

ARPACK_MAXITER = 5000


class LinearAlgebraError(NumericalError):
    """Base class for linear algebra failures."""


class SingularMatrixError(LinearAlgebraError):
    def __init__(self, pivot: int) -> None:
        super().__init__(f"matrix is exactly singular at pivot {pivot}")
        self.pivot = pivot


class ConvergenceError(LinearAlgebraError):
    """Raised when an iterative decomposition does not converge."""


class NotDefiniteError(LinearAlgebraError):
    """Raised when a matrix expected to be positive definite is not."""


@dataclass(frozen=True)
class SvdResult:
    values: np.ndarray
    left: np.ndarray
    right_h: np.ndarray

    @property
    def right(self) -> np.ndarray:
        return self.right_h.conj().T


@dataclass(frozen=True)
class LuFactor:
    lu: np.ndarray
    piv: np.ndarray
    rcond: float

    def solve(self, b: np.ndarray) -> np.ndarray:
        return sla.lu_solve((self.lu, self.piv), b, check_finite=False)

    def solve_h(self, b: np.ndarray) -> np.ndarray:
        """Solve A^H x = b with the same factors."""
        return sla.lu_solve((self.lu, self.piv), b, trans=2, check_finite=False)


def _dense(a) -> np.ndarray:
    matrix = a.toarray() if sp.issparse(a) else np.asarray(a)
    if matrix.ndim != 2:
        raise LinearAlgebraError(f"expected a matrix, got shape {matrix.shape}")
    if not np.isfinite(matrix).all():
        raise LinearAlgebraError("matrix has non-finite entries")
    return matrix


def lu_factor(a) -> LuFactor:
    """Partial-pivoting LU with a LAPACK 1-norm reciprocal condition estimate."""
    matrix = _dense(a)
    if matrix.shape[0] != matrix.shape[1]:
        raise LinearAlgebraError(f"LU needs a square matrix, got {matrix.shape}")
    lu, piv = sla.lu_factor(matrix, check_finite=False)
    zero = np.flatnonzero(np.diag(lu) == 0.0)
    if zero.size:
        raise SingularMatrixError(int(zero[0]))
    anorm = np.abs(matrix).sum(axis=0).max()
    gecon = lapack.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0:
        rcond = 0.0
    return LuFactor(lu=lu, piv=piv, rcond=float(rcond))


def lu_solve(a, b) -> np.ndarray:
    rhs = np.asarray(b)
    if not np.isfinite(rhs).all():
        raise LinearAlgebraError("right-hand side has non-finite entries")
    return lu_factor(a).solve(rhs)


def svd(a) -> SvdResult:
    """Thin SVD with singular values in descending order."""
    matrix = _dense(a)
    try:
        u, s, vh = sla.svd(matrix, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        logger.warning("gesdd did not converge, retrying with gesvd")
        try:
            u, s, vh = sla.svd(matrix, full_matrices=False, lapack_driver="gesvd", check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"SVD did not converge: {exc}") from exc
    return SvdResult(values=s, left=u, right_h=vh)


def smallest_singular(a, iterations: int = 60, tol: float = 1e-10) -> tuple[float, np.ndarray]:
    """sigma_min and a right singular vector by inverse iteration on A^H A.

    The start vector is fixed so repeated calls give identical results.
    """
    matrix = _dense(a)
    try:
        factor = lu_factor(matrix)
    except SingularMatrixError:
        result = svd(matrix)
        return 0.0, result.right[:, -1]
    n = matrix.shape[1]
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    previous = math.inf
    for _ in range(iterations):
        z = factor.solve(factor.solve_h(v))
        norm = np.linalg.norm(z)
        v = z / norm
        estimate = 1.0 / math.sqrt(norm)
        if abs(estimate - previous) <= tol * estimate:
            break
        previous = estimate
    return float(np.linalg.norm(matrix @ v)), v


def largest_singular(a, iterations: int = 100, tol: float = 1e-8) -> float:
    """sigma_max by power iteration on A^H A."""
    matrix = _dense(a)
    rng = np.random.default_rng(54321)
    v = rng.standard_normal(matrix.shape[1]) + 0j
    v /= np.linalg.norm(v)
    previous = 0.0
    estimate = 0.0
    for _ in range(iterations):
        w = matrix.conj().T @ (matrix @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        estimate = math.sqrt(norm)
        if abs(estimate - previous) <= tol * estimate:
            break
        previous = estimate
    return float(estimate)


def cholesky_lower(b) -> np.ndarray:
    matrix = _dense(b)
    try:
        return sla.cholesky(matrix, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotDefiniteError(f"matrix is not positive definite: {exc}") from exc


def whiten(a, left_chol: np.ndarray, right_chol: np.ndarray | None = None) -> np.ndarray:
    """L1^{-1} A L2^{-H}, the matrix of A between two Gram-orthonormalized bases."""
    right_chol = left_chol if right_chol is None else right_chol
    step = sla.solve_triangular(left_chol, _dense(a), lower=True, check_finite=False)
    return sla.solve_triangular(right_chol.conj(), step.T, lower=True, check_finite=False).T


def unwhiten(vectors: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Map right singular vectors of a whitened matrix back to coefficients: x = L^{-H} v."""
    return sla.solve_triangular(chol.conj().T, vectors, lower=False, check_finite=False)


def normalized_svd(a, left_chol: np.ndarray, right_chol: np.ndarray | None = None) -> SvdResult:
    return svd(whiten(a, left_chol, right_chol))


def sym_generalized_eig(a, b, count: int, shift: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Smallest ``count`` eigenpairs of A x = lam B x, B-orthonormal, ascending.

    Sparse input goes through ARPACK in shift-invert mode around a negative
    shift (A - shift B is then definite); dense input through LAPACK.
    """
    n = a.shape[0]
    if not 1 <= count <= n:
        raise LinearAlgebraError(f"count must lie in [1, {n}], got {count}")
    if sp.issparse(a) and count < n - 1:
        a_s = sp.csc_matrix(a)
        b_s = sp.csc_matrix(b)
        if shift is None:
            shift = -abs(a_s.diagonal()).mean() / max(abs(b_s.diagonal()).mean(), 1e-300) * 1e-2
        try:
            values, vectors = spla.eigsh(
                a_s, k=count, M=b_s, sigma=shift, which="LM", maxiter=ARPACK_MAXITER
            )
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"eigensolver did not converge after {ARPACK_MAXITER} iterations") from exc
        except RuntimeError as exc:
            raise NotDefiniteError(f"shift-invert factorization failed: {exc}") from exc
        order = np.argsort(values)
        values = values[order]
        vectors = vectors[:, order]
        gram = vectors.T @ (b_s @ vectors)
        factor = cholesky_lower(0.5 * (gram + gram.T))
        vectors = sla.solve_triangular(factor, vectors.T, lower=True).T
        return values, vectors

    a_d = _dense(a)
    b_d = _dense(b)
    try:
        values, vectors = sla.eigh(a_d, b_d, subset_by_index=[0, count - 1], check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotDefiniteError(f"B is not positive definite: {exc}") from exc
    return values, vectors


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles (ascending) between the column spans of a and b."""
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    if a.shape[1] == 0 or b.shape[1] == 0:
        return np.zeros(0)
    return np.sort(sla.subspace_angles(a, b))


def null_space_basis(result: SvdResult, threshold: float) -> np.ndarray:
    """Right singular vectors whose singular value is at most threshold."""
    mask = result.values <= threshold
    return result.right[:, mask]


def truncated_lstsq(result: SvdResult, rhs: np.ndarray, threshold: float) -> np.ndarray:
    """Minimum-norm least-squares solution discarding singular values below threshold."""
    keep = result.values > threshold
    coeffs = (result.left[:, keep].conj().T @ rhs) / result.values[keep]
    return result.right_h[keep].conj().T @ coeffs
