"""Linear solvers used by the time steppers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConvergenceError, PivotError


@dataclass
class TriDiagMatrix:
    """Square tridiagonal matrix; ``sub[i] = A[i+1, i]``, ``sup[i] = A[i, i+1]``."""

    sub: np.ndarray
    main: np.ndarray
    sup: np.ndarray

    @property
    def n(self) -> int:
        return self.main.size

    def todense(self) -> np.ndarray:
        return np.diag(self.main) + np.diag(self.sub, -1) + np.diag(self.sup, 1)

    def matvec(self, x):
        y = self.main * x
        y[:-1] += self.sup * x[1:]
        y[1:] += self.sub * x[:-1]
        return y

    def is_symmetric(self, rtol=1e-13) -> bool:
        scale = max(np.abs(self.main).max(initial=0.0), 1e-300)
        return bool(np.all(np.abs(self.sub - self.sup) <= rtol * scale))


def solve_tridiag_spd(A: TriDiagMatrix, b) -> np.ndarray:
    """Cholesky solve of a symmetric positive definite tridiagonal system."""
    b = np.asarray(b, dtype=float)
    if A.n == 0:
        return b.copy()
    ab = np.zeros((2, A.n))
    ab[0, 1:] = A.sup
    ab[1] = A.main
    try:
        c = sla.cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError as exc:
        # LAPACK reports the order of the failing leading minor (1-based)
        digits = "".join(ch if ch.isdigit() else " " for ch in str(exc)).split()
        index = int(digits[0]) - 1 if digits else -1
        raise PivotError(index) from exc
    return sla.cho_solve_banded((c, False), b)


@dataclass
class DenseSolve:
    x: np.ndarray
    rank_deficient: bool
    residual: float
    rcond: float


class DenseFactor:
    """Factor once, solve many right-hand sides.

    LU with partial pivoting when the matrix is numerically nonsingular;
    otherwise the minimum-norm least-squares solution via the SVD.
    """

    def __init__(self, A, rcond_tol: float = 1e-13):
        self.A = np.asarray(A, dtype=float)
        u, sv, vt = np.linalg.svd(self.A)
        self.rcond = float(sv[-1] / sv[0]) if sv.size and sv[0] > 0 else 0.0
        self.rank_deficient = not self.rcond > rcond_tol
        if self.rank_deficient:
            keep = sv > rcond_tol * (sv[0] if sv.size else 0.0)
            self._pinv = (vt[keep].T / sv[keep]) @ u[:, keep].T
        else:
            self._lu = sla.lu_factor(self.A, check_finite=False)

    def solve(self, b) -> DenseSolve:
        b = np.asarray(b, dtype=float)
        if self.rank_deficient:
            x = self._pinv @ b
        else:
            x = sla.lu_solve(self._lu, b)
        res = float(np.linalg.norm(self.A @ x - b))
        return DenseSolve(x, self.rank_deficient, res, self.rcond)


def solve_dense_lu(A, b, rcond_tol: float = 1e-13) -> DenseSolve:
    """Dense solve; rank-deficient systems get the flagged minimum-norm solution."""
    return DenseFactor(A, rcond_tol).solve(b)


class SparseSym:
    """Symmetric sparse matrix storing only its upper triangle (CSR)."""

    def __init__(self, A):
        A = sp.csr_matrix(A)
        self.upper = sp.triu(A, format="csr")
        self.diagonal = A.diagonal().copy()
        self.shape = A.shape

    def matvec(self, x):
        return self.upper @ x + self.upper.T @ x - self.diagonal * x

    def toarray(self):
        u = self.upper.toarray()
        return u + u.T - np.diag(self.diagonal)


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float


def solve_cg(A, b, tol: float = 1e-12, max_iter: int | None = None,
             x0=None) -> CGResult:
    """Jacobi-preconditioned conjugate gradients on ``A`` (SparseSym or array).

    Stops when ``|b - A x| <= tol |b|``.  Rows with a zero diagonal are held
    at zero, which is the minimum-norm answer when such rows are empty.
    """
    if not isinstance(A, SparseSym):
        A = SparseSym(A)
    b = np.asarray(b, dtype=float)
    n = b.size
    max_iter = max_iter or 10 * n + 10
    nb = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if nb == 0.0:
        return CGResult(np.zeros(n), 0, 0.0)
    d = A.diagonal
    active = d > 0
    inv_d = np.zeros(n)
    inv_d[active] = 1.0 / d[active]
    r = b - A.matvec(x)
    r[~active] = 0.0
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r)
    for k in range(1, max_iter + 1):
        if res <= tol * nb:
            return CGResult(x, k - 1, res / nb)
        Ap = A.matvec(p)
        Ap[~active] = 0.0
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r)
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if res <= tol * nb:
        return CGResult(x, max_iter, res / nb)
    raise ConvergenceError(
        f"CG did not reach tol {tol:g} in {max_iter} iterations (residual {res / nb:.3e})",
        residual=res / nb,
    )
