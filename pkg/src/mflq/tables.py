"""Phase-indexed coefficient tables.

The integrators in this package march on uniform grids whose step
divides the period, so every RK4 stage time lands on the half-step grid
t_j = j * tau / (2 S).  Evaluating the trigonometric coefficient curves
once on that grid and looking them up by index afterwards removes curve
evaluation from the hot loops and keeps multi-period marches exactly
phase-locked.

Internal helper; not part of the public surface.
"""

from __future__ import annotations

import numpy as np

from .model import FeedbackPolicy, PeriodicModel

_RAW = (
    "A", "Abar", "B", "Bbar", "C", "Cbar", "D", "Dbar",
    "b", "sigma", "Q", "Qbar", "S", "Sbar", "R", "Rbar", "q", "rho",
)


def _sym_t(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


class CoefficientTables:
    """Model (and optional policy) evaluated on the half-step grid of one
    period, with closed-loop composites precomputed."""

    def __init__(self, model: PeriodicModel, policy: FeedbackPolicy | None,
                 steps_per_period: int):
        self.model = model
        self.policy = policy
        self.steps = int(steps_per_period)
        self.h = model.tau / self.steps
        npts = 2 * self.steps + 1
        ts = (model.tau / (2 * self.steps)) * np.arange(npts)
        self.ts = ts

        for name in _RAW:
            arr = getattr(model, name).eval_many(ts)
            if name in ("Q", "Qbar", "R", "Rbar"):
                arr = _sym_t(arr)
            if name in ("b", "sigma", "q", "rho"):
                arr = arr[:, :, 0]
            setattr(self, name, arr)

        self.A_hat = self.A + self.Abar
        self.B_hat = self.B + self.Bbar
        self.C_hat = self.C + self.Cbar
        self.D_hat = self.D + self.Dbar
        self.Q_hat = self.Q + self.Qbar
        self.S_hat = self.S + self.Sbar
        self.R_hat = self.R + self.Rbar

        if policy is not None:
            th = policy.theta.eval_many(ts)
            tb = policy.thetabar.eval_many(ts)
            v = policy.v.eval_many(ts)[:, :, 0]
            self.Theta, self.Thetabar, self.v = th, tb, v
            self.Theta_hat = th + tb
            mm = np.matmul
            # closed-loop split: drift/diffusion on X, on E[X], affine
            self.drift_state = self.A + mm(self.B, th)
            self.drift_mean = (
                self.Abar + mm(self.B, tb) + mm(self.Bbar, self.Theta_hat)
            )
            self.drift_affine = (
                np.einsum("tij,tj->ti", self.B_hat, v) + self.b
            )
            self.diff_state = self.C + mm(self.D, th)
            self.diff_mean = (
                self.Cbar + mm(self.D, tb) + mm(self.Dbar, self.Theta_hat)
            )
            self.diff_affine = (
                np.einsum("tij,tj->ti", self.D_hat, v) + self.sigma
            )
            # generators of the mean flow and of the aggregate diffusion
            self.mean_drift = self.drift_state + self.drift_mean
            self.agg_diff = self.diff_state + self.diff_mean
            # running-cost decomposition blocks (quadratic in X, in E[X],
            # linear, constant), all under the closed loop
            thT = np.swapaxes(th, 1, 2)
            tbT = np.swapaxes(tb, 1, 2)
            thhT = np.swapaxes(self.Theta_hat, 1, 2)
            ST = np.swapaxes(self.S, 1, 2)
            SbarT = np.swapaxes(self.Sbar, 1, 2)
            ShatT = np.swapaxes(self.S_hat, 1, 2)
            RTh = mm(self.R, th)
            self.cost_state = (
                self.Q + mm(ST, th) + mm(thT, self.S) + mm(thT, RTh)
            )
            self.cost_mean = (
                mm(SbarT, self.Theta_hat) + mm(thhT, self.Sbar)
                + mm(tbT, self.S) + mm(ST, tb)
                + mm(thT, mm(self.R, tb)) + mm(tbT, RTh)
                + mm(tbT, mm(self.R, tb))
                + self.Qbar + mm(thhT, mm(self.Rbar, self.Theta_hat))
            )
            shrv = self.S_hat + mm(self.R_hat, self.Theta_hat)
            self.cost_lin = 2.0 * (
                np.einsum("tji,tj->ti", shrv, v)
                + self.q
                + np.einsum("tji,tj->ti", self.Theta_hat, self.rho)
            )
            self.cost_const = (
                np.einsum("tij,tj,ti->t", self.R_hat, v, v)
                + 2.0 * np.einsum("ti,ti->t", self.rho, v)
            )

    def stage_index(self, t: float) -> int:
        """Index of t on the half-step grid (t must lie on it)."""
        rel = (float(t) % self.model.tau) / (self.model.tau / (2 * self.steps))
        return min(int(round(rel)), 2 * self.steps)

    def node_slice(self, name: str) -> np.ndarray:
        """Values at the integer nodes only (every second half-grid point)."""
        return getattr(self, name)[:: 2]
