"""Deterministic numerical kernels.

Everything here is fixed-step and reproducible: classic RK4 on uniform
grids, composite Simpson quadrature, Gaussian elimination with partial
pivoting plus a mandatory residual check, Cholesky with an explicit
pivot threshold.  Spectral radii come from LAPACK's shifted-QR
eigenvalue solver (via numpy), wrapped to the local error taxonomy.

Matrix-valued ODEs are integrated by flattening row-major; symmetric
states can be re-projected onto the symmetric cone after every step to
suppress drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NoConvergence,
    NonFiniteState,
    NotPositiveDefinite,
    SingularMatrix,
    ValidationError,
)

__all__ = [
    "TimeGrid",
    "integrate_ode",
    "integrate_matrix_ode",
    "quadrature",
    "solve_linear",
    "spectral_radius",
    "factor_pd",
    "solve_pd",
    "vech",
    "unvech",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid from t0 to t1 (t1 < t0 integrates backward)."""

    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if self.t0 == self.t1:
            raise ValidationError("degenerate grid")

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.steps

    def nodes(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.steps + 1)


def integrate_ode(rhs, initial, grid: TimeGrid, project=None) -> np.ndarray:
    """Classic fixed-step RK4.

    rhs(t, y) -> dy/dt on 1-d arrays.  Returns the (steps+1, dim)
    trajectory with trajectory[0] == initial.  ``project``, if given, is
    applied to the state after every step (used to re-symmetrize matrix
    states).  Raises NonFiniteState as soon as the state leaves the
    finite range.
    """
    y = np.array(initial, dtype=float).copy()
    if y.ndim != 1:
        raise ValidationError("state must be 1-d; flatten matrix states")
    h = grid.h
    out = np.empty((grid.steps + 1, y.size))
    out[0] = y
    t = grid.t0
    half = 0.5 * h
    for k in range(grid.steps):
        k1 = rhs(t, y)
        k2 = rhs(t + half, y + half * k1)
        k3 = rhs(t + half, y + half * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if project is not None:
            y = project(y)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state at step {k + 1}")
        t = grid.t0 + (k + 1) * h
        out[k + 1] = y
    return out


def integrate_matrix_ode(rhs, initial, grid: TimeGrid, symmetric: bool = False):
    """RK4 for matrix states; rhs and initial take/return (n, m) arrays.

    Returns (steps+1, n, m).  With symmetric=True the state is replaced
    by (M + M') / 2 after every step.
    """
    M0 = np.asarray(initial, dtype=float)
    shape = M0.shape

    def flat_rhs(t, y):
        return rhs(t, y.reshape(shape)).reshape(-1)

    project = None
    if symmetric:
        def project(y):
            M = y.reshape(shape)
            return (0.5 * (M + M.T)).reshape(-1)

    traj = integrate_ode(flat_rhs, M0.reshape(-1), grid, project=project)
    return traj.reshape(grid.steps + 1, *shape)


def quadrature(values: np.ndarray, h: float) -> float:
    """Composite Simpson rule on uniformly spaced samples.

    ``values`` holds f at the panel endpoints, so len(values) must be
    odd (an even number of panels).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 3:
        raise ValidationError("need at least 3 samples")
    if values.size % 2 == 0:
        raise ValidationError("composite Simpson needs an even panel count")
    acc = values[0] + values[-1] + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-1:2].sum()
    return float(acc * h / 3.0)


def solve_linear(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting, then a residual check.

    Raises SingularMatrix when a pivot falls below 1e-13 * scale or the
    solution fails ||A x - b||_inf <= 1e-10 (1 + ||b||_inf).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("A must be square")
    if b.shape[0] != A.shape[0]:
        raise ValidationError("dimension mismatch")
    n = A.shape[0]
    scale = np.abs(A).max()
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    one_d = b.ndim == 1
    U = A.copy()
    rhs = (b[:, None] if one_d else b).astype(float).copy()
    for col in range(n):
        p = col + int(np.argmax(np.abs(U[col:, col])))
        if np.abs(U[p, col]) < 1e-13 * scale:
            raise SingularMatrix(f"pivot {np.abs(U[p, col]):.3e} below threshold")
        if p != col:
            U[[col, p]] = U[[p, col]]
            rhs[[col, p]] = rhs[[p, col]]
        factors = U[col + 1:, col] / U[col, col]
        U[col + 1:, col:] -= factors[:, None] * U[col, col:]
        rhs[col + 1:] -= factors[:, None] * rhs[col]
    x = np.zeros_like(rhs)
    for row in range(n - 1, -1, -1):
        x[row] = (rhs[row] - U[row, row + 1:] @ x[row + 1:]) / U[row, row]
    if one_d:
        x = x[:, 0]
    resid = np.abs(A @ x - b).max()
    if resid > 1e-10 * (1.0 + np.abs(b).max()):
        raise SingularMatrix(f"residual {resid:.3e} exceeds tolerance")
    return x


def spectral_radius(M: np.ndarray, max_iter: int = 10_000) -> float:
    """max |eigenvalue|, computed by the QR algorithm on the Hessenberg
    form (LAPACK).  NoConvergence if the eigen-iteration fails."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("square matrix required")
    if not np.all(np.isfinite(M)):
        raise ValidationError("non-finite entries")
    try:
        eigs = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover, LAPACK rarely fails
        raise NoConvergence(str(exc))
    return float(np.abs(eigs).max())


def factor_pd(M: np.ndarray) -> np.ndarray:
    """Cholesky factor L with M = L L', lower triangular.

    Raises NotPositiveDefinite if a diagonal pivot is <= 1e-12 * scale,
    scale being the largest diagonal entry of M.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("square matrix required")
    n = M.shape[0]
    scale = max(float(np.abs(np.diag(M)).max()), 1.0e-30)
    L = np.zeros((n, n))
    for j in range(n):
        s = M[j, j] - L[j, :j] @ L[j, :j]
        if s <= 1e-12 * scale:
            raise NotPositiveDefinite(f"pivot {s:.3e} at index {j}")
        L[j, j] = np.sqrt(s)
        if j + 1 < n:
            L[j + 1:, j] = (M[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def vech(M: np.ndarray) -> np.ndarray:
    """Stack the lower triangle of a symmetric matrix column-wise."""
    n = M.shape[0]
    i, j = np.tril_indices(n)
    return M[i, j]


def unvech(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of vech: rebuild the symmetric matrix."""
    M = np.zeros((n, n))
    i, j = np.tril_indices(n)
    M[i, j] = v
    M[j, i] = v
    return M


def solve_pd(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve M x = B for symmetric positive definite M via factor_pd."""
    L = factor_pd(M)
    B = np.asarray(B, dtype=float)
    one_d = B.ndim == 1
    Bm = B[:, None] if one_d else B
    n = L.shape[0]
    Y = np.zeros_like(Bm)
    for i in range(n):
        Y[i] = (Bm[i] - L[i, :i] @ Y[:i]) / L[i, i]
    X = np.zeros_like(Bm)
    Lt = L.T
    for i in range(n - 1, -1, -1):
        X[i] = (Y[i] - Lt[i, i + 1:] @ X[i + 1:]) / Lt[i, i]
    return X[:, 0] if one_d else X
