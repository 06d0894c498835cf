"""Problem data for periodic mean-field linear-quadratic control.

State dynamics (scalar Brownian motion W):

    dX = (A X + Abar E[X] + B u + Bbar E[u] + b) dt
       + (C X + Cbar E[X] + D u + Dbar E[u] + sigma) dW

running cost integrand:

    F = <Q X, X> + 2 <S X, u> + <R u, u> + 2 <q, X> + 2 <rho, u>
      + <Qbar E[X], E[X]> + 2 <Sbar E[X], E[u]> + <Rbar E[u], E[u]>

with all coefficients tau-periodic curves.  Feedback policies are
affine in the state and its mean: u = Theta X + Thetabar E[X] + v.

Aggregate ("hat") composites A+Abar etc. are exposed on every evaluated
sample since the mean dynamics and the aggregate Riccati equation are
written in terms of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingPolicy, SingularR, SizeMismatch, ValidationError

__all__ = [
    "PeriodicModel",
    "FeedbackPolicy",
    "CoefficientSample",
    "ClosedLoopMatrices",
    "CoercivityReport",
    "eval_coefficients",
    "check_cost_coercivity",
    "closed_loop_matrices",
]

_MATRIX_FIELDS = {
    "A": ("n", "n"), "Abar": ("n", "n"),
    "B": ("n", "m"), "Bbar": ("n", "m"),
    "C": ("n", "n"), "Cbar": ("n", "n"),
    "D": ("n", "m"), "Dbar": ("n", "m"),
    "Q": ("n", "n"), "Qbar": ("n", "n"),
    "S": ("m", "n"), "Sbar": ("m", "n"),
    "R": ("m", "m"), "Rbar": ("m", "m"),
    "b": ("n", 1), "sigma": ("n", 1),
    "q": ("n", 1), "rho": ("m", 1),
}

_SYMMETRIC_FIELDS = ("Q", "Qbar", "R", "Rbar")


@dataclass(frozen=True)
class PeriodicModel:
    """Coefficient bundle; every field is a periodic matrix curve."""

    tau: float
    n: int
    m: int
    A: object
    Abar: object
    B: object
    Bbar: object
    C: object
    Cbar: object
    D: object
    Dbar: object
    b: object
    sigma: object
    Q: object
    Qbar: object
    S: object
    Sbar: object
    R: object
    Rbar: object
    q: object
    rho: object
    name: str = ""

    def __post_init__(self):
        if self.tau <= 0:
            raise ValidationError("tau must be positive")
        if self.n < 1 or self.m < 1:
            raise ValidationError("state/control dimensions must be >= 1")
        dims = {"n": self.n, "m": self.m}
        for fname, (r, c) in _MATRIX_FIELDS.items():
            curve = getattr(self, fname)
            want = (dims.get(r, r), dims.get(c, c))
            if tuple(curve.shape) != want:
                raise SizeMismatch(
                    f"{fname}: expected shape {want}, got {tuple(curve.shape)}"
                )
            if abs(curve.period - self.tau) > 1e-12 * self.tau:
                raise ValidationError(f"{fname}: period differs from tau")
        # weights must be symmetric; checked on a sample grid, worst
        # asymmetry above 1e-12 is rejected, below it is symmetrized on eval
        ts = np.linspace(0.0, self.tau, 17)[:-1]
        for fname in _SYMMETRIC_FIELDS:
            curve = getattr(self, fname)
            for t in ts:
                M = curve.eval(t)
                if np.abs(M - M.T).max() > 1e-12 * (1.0 + np.abs(M).max()):
                    raise ValidationError(f"{fname} is not symmetric at t={t:g}")


@dataclass(frozen=True)
class FeedbackPolicy:
    """u = Theta X + Thetabar E[X] + v with tau-periodic curves."""

    theta: object
    thetabar: object
    v: object
    name: str = ""

    def __post_init__(self):
        m, n = self.theta.shape
        if tuple(self.thetabar.shape) != (m, n):
            raise SizeMismatch("thetabar shape differs from theta")
        if tuple(self.v.shape) != (m, 1):
            raise SizeMismatch("v must be an (m, 1) curve")
        p = self.theta.period
        for c in (self.thetabar, self.v):
            if abs(c.period - p) > 1e-12 * p:
                raise ValidationError("policy curves must share one period")

    @property
    def shape(self):
        return self.theta.shape

    def theta_at(self, t: float) -> np.ndarray:
        return self.theta.eval(t)

    def thetabar_at(self, t: float) -> np.ndarray:
        return self.thetabar.eval(t)

    def theta_hat_at(self, t: float) -> np.ndarray:
        return self.theta.eval(t) + self.thetabar.eval(t)

    def v_at(self, t: float) -> np.ndarray:
        return self.v.eval(t).reshape(-1)


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


@dataclass
class CoefficientSample:
    """All coefficients (and optional policy values) at one time."""

    t: float
    A: np.ndarray
    Abar: np.ndarray
    B: np.ndarray
    Bbar: np.ndarray
    C: np.ndarray
    Cbar: np.ndarray
    D: np.ndarray
    Dbar: np.ndarray
    b: np.ndarray
    sigma: np.ndarray
    Q: np.ndarray
    Qbar: np.ndarray
    S: np.ndarray
    Sbar: np.ndarray
    R: np.ndarray
    Rbar: np.ndarray
    q: np.ndarray
    rho: np.ndarray
    Theta: np.ndarray | None = None
    Thetabar: np.ndarray | None = None
    v: np.ndarray | None = None

    # aggregate composites
    @property
    def A_hat(self):
        return self.A + self.Abar

    @property
    def B_hat(self):
        return self.B + self.Bbar

    @property
    def C_hat(self):
        return self.C + self.Cbar

    @property
    def D_hat(self):
        return self.D + self.Dbar

    @property
    def Q_hat(self):
        return self.Q + self.Qbar

    @property
    def S_hat(self):
        return self.S + self.Sbar

    @property
    def R_hat(self):
        return self.R + self.Rbar

    @property
    def Theta_hat(self):
        if self.Theta is None:
            raise MissingPolicy("sample carries no policy")
        return self.Theta + self.Thetabar


def eval_coefficients(
    model: PeriodicModel, t: float, policy: FeedbackPolicy | None = None
) -> CoefficientSample:
    """Evaluate every coefficient curve at time t.

    Weight matrices are symmetrized; vectors come back 1-d.
    """
    vals = {}
    for fname in _MATRIX_FIELDS:
        M = getattr(model, fname).eval(t)
        if fname in _SYMMETRIC_FIELDS:
            M = _sym(M)
        if _MATRIX_FIELDS[fname][1] == 1:
            M = M.reshape(-1)
        vals[fname] = M
    sample = CoefficientSample(t=float(t), **vals)
    if policy is not None:
        sample.Theta = policy.theta_at(t)
        sample.Thetabar = policy.thetabar_at(t)
        sample.v = policy.v_at(t)
    return sample


@dataclass(frozen=True)
class CoercivityReport:
    """Uniform positivity margins of the cost weights over a time grid.

    min_eig_qs / min_eig_qs_hat are Schur complements Q - S' R^{-1} S and
    their aggregate counterparts; the standard sufficient condition for a
    well-posed ergodic problem is that all four margins stay positive.
    """

    min_eig_r: float
    min_eig_r_hat: float
    min_eig_qs: float
    min_eig_qs_hat: float
    grid_size: int
    threshold: float
    passed: bool


def check_cost_coercivity(
    model: PeriodicModel, grid_points: int = 2048, threshold: float = 1e-8
) -> CoercivityReport:
    """Scan [0, tau) and report worst-case eigenvalue margins.

    Raises SingularR if R or R+Rbar fails Cholesky at a grid point, since
    the Schur complements are then undefined.
    """
    if grid_points < 1:
        raise ValidationError("grid_points must be >= 1")
    ts = np.arange(grid_points) * (model.tau / grid_points)
    mins = [np.inf, np.inf, np.inf, np.inf]
    for t in ts:
        s = eval_coefficients(model, t)
        for idx, (Rm, Sm, Qm, label) in enumerate(
            (
                (s.R, s.S, s.Q, "R"),
                (s.R_hat, s.S_hat, s.Q_hat, "R_hat"),
            )
        ):
            try:
                np.linalg.cholesky(Rm)
            except np.linalg.LinAlgError:
                raise SingularR(f"{label} not positive definite at t={t:g}")
            mins[idx] = min(mins[idx], float(np.linalg.eigvalsh(Rm)[0]))
            schur = Qm - Sm.T @ np.linalg.solve(Rm, Sm)
            mins[2 + idx] = min(
                mins[2 + idx], float(np.linalg.eigvalsh(_sym(schur))[0])
            )
    passed = all(v >= threshold for v in mins)
    return CoercivityReport(
        min_eig_r=mins[0],
        min_eig_r_hat=mins[1],
        min_eig_qs=mins[2],
        min_eig_qs_hat=mins[3],
        grid_size=grid_points,
        threshold=threshold,
        passed=passed,
    )


@dataclass(frozen=True)
class ClosedLoopMatrices:
    """Coefficients of the loop closed by u = Theta X + Thetabar E[X] + v.

    Substituting the policy splits drift and diffusion into a part acting
    on X, a part acting on E[X], and an affine remainder:

        drift = drift_state X + drift_mean E[X] + drift_affine
        diff  = diff_state  X + diff_mean  E[X] + diff_affine
    """

    t: float
    drift_state: np.ndarray
    drift_mean: np.ndarray
    drift_affine: np.ndarray
    diff_state: np.ndarray
    diff_mean: np.ndarray
    diff_affine: np.ndarray


def closed_loop_matrices(sample: CoefficientSample) -> ClosedLoopMatrices:
    if sample.Theta is None or sample.Thetabar is None or sample.v is None:
        raise MissingPolicy("closed_loop_matrices needs a policy-bearing sample")
    Th, Tb, v = sample.Theta, sample.Thetabar, sample.v
    Th_hat = Th + Tb
    return ClosedLoopMatrices(
        t=sample.t,
        drift_state=sample.A + sample.B @ Th,
        drift_mean=sample.Abar + sample.B @ Tb + sample.Bbar @ Th_hat,
        drift_affine=sample.B_hat @ v + sample.b,
        diff_state=sample.C + sample.D @ Th,
        diff_mean=sample.Cbar + sample.D @ Tb + sample.Dbar @ Th_hat,
        diff_affine=sample.D_hat @ v + sample.sigma,
    )
