"""Periodic Riccati equations for the ergodic synthesis.

Two coupled equations are solved in a fixed order.  The state equation

    dP/dt + Q + A'P + PA + C'PC
          - (B'P + D'PC + S)' (R + D'PD)^{-1} (B'P + D'PC + S) = 0

is self-contained; the aggregate (mean) equation has the same shape in
the hat composites and is coupled to P through the C'PC-type term:

    dPi/dt + Q_hat + A_hat'Pi + Pi A_hat + C_hat' P C_hat
          - (B_hat'Pi + D_hat'P C_hat + S_hat)'
            (R_hat + D_hat'P D_hat)^{-1}
            (B_hat'Pi + D_hat'P C_hat + S_hat) = 0.

Both are solved for their unique positive periodic solution by backward
sweeps over one period from a zero terminal seed: backward in time the
periodic solution is attracting, so consecutive period traces converge
geometrically; sweeping stops when they agree in sup norm.

Solutions are stored as node values plus exact derivatives and
evaluated by cubic Hermite interpolation; the stored derivative makes
self-validation possible (the equation residual is re-checked at the
segment midpoints, which the construction does not touch).
"""

from __future__ import annotations

import numpy as np

from .curves import GridCurve
from .errors import NoConvergence, NotPositiveDefinite, ResidualTooLarge, ValidationError
from .model import PeriodicModel, eval_coefficients
from .numerics import TimeGrid, integrate_matrix_ode, solve_pd
from .tables import CoefficientTables

__all__ = [
    "PeriodicMatrixSolution",
    "state_riccati_rhs",
    "mean_riccati_rhs",
    "solve_state_riccati",
    "solve_mean_riccati",
    "state_feedback_gain",
    "mean_feedback_gain",
]

DEFAULT_GRID = 4096
DEFAULT_TOL = 1e-9
DEFAULT_MAX_SWEEPS = 500
DEFAULT_RESIDUAL_TOL = 1e-7


class PeriodicMatrixSolution(GridCurve):
    """Periodic matrix function on [0, tau]: node values plus exact
    derivatives (cubic Hermite in between) and convergence diagnostics."""

    def __init__(self, tau, nodes, values, derivs, *, sweeps, tol,
                 periodicity_gap, residual_sup, min_eig):
        super().__init__(tau, values, derivs)
        self.tau = float(tau)
        self.nodes = nodes
        self.sweeps = sweeps
        self.tol = tol
        self.periodicity_gap = periodicity_gap
        self.residual_sup = residual_sup
        self.min_eig = min_eig


def state_riccati_rhs(model: PeriodicModel, t: float, P: np.ndarray) -> np.ndarray:
    """dP/dt of the state Riccati equation at (t, P)."""
    s = eval_coefficients(model, t)
    return _state_rhs_from(s.A, s.B, s.C, s.D, s.Q, s.S, s.R, P)


def mean_riccati_rhs(
    model: PeriodicModel, t: float, Pi: np.ndarray, P: np.ndarray
) -> np.ndarray:
    """dPi/dt of the aggregate Riccati equation at (t, Pi), given P(t)."""
    s = eval_coefficients(model, t)
    return _mean_rhs_from(
        s.A_hat, s.B_hat, s.C_hat, s.D_hat, s.Q_hat, s.S_hat, s.R_hat, Pi, P
    )


def _state_rhs_from(A, B, C, D, Q, S, R, P):
    load = B.T @ P + D.T @ P @ C + S
    N = R + D.T @ P @ D
    gain_term = load.T @ solve_pd(N, load)
    val = Q + A.T @ P + P @ A + C.T @ P @ C - gain_term
    return -0.5 * (val + val.T)


def _mean_rhs_from(Ah, Bh, Ch, Dh, Qh, Sh, Rh, Pi, P):
    load = Bh.T @ Pi + Dh.T @ P @ Ch + Sh
    N = Rh + Dh.T @ P @ Dh
    gain_term = load.T @ solve_pd(N, load)
    val = Qh + Ah.T @ Pi + Pi @ Ah + Ch.T @ P @ Ch - gain_term
    return -0.5 * (val + val.T)


def _sweep_to_convergence(rhs, n, tau, grid_n, tol, max_sweeps, seed):
    grid = TimeGrid(tau, 0.0, grid_n)  # backward over one period
    P_end = np.zeros((n, n)) if seed is None else np.array(seed, dtype=float)
    prev = None
    for sweep in range(1, max_sweeps + 1):
        traj = integrate_matrix_ode(rhs, P_end, grid, symmetric=True)
        asc = traj[::-1]  # ascending in time, asc[0] at t=0, asc[-1] at t=tau
        if prev is not None:
            gap = np.abs(asc - prev).max()
            if gap <= tol:
                return asc, sweep
        prev = asc
        P_end = asc[0]  # periodic wrap: value at 0 feeds the next terminal
    raise NoConvergence(f"riccati sweep did not settle in {max_sweeps} sweeps")


def _finalize(tau, grid_n, asc, node_rhs, mid_rhs, sweeps, tol, residual_tol):
    nodes = np.linspace(0.0, tau, grid_n + 1)
    derivs = np.stack([node_rhs(k) for k in range(grid_n + 1)])
    sol = PeriodicMatrixSolution(
        tau, nodes, asc, derivs,
        sweeps=sweeps, tol=tol,
        periodicity_gap=float(np.abs(asc[0] - asc[-1]).max()),
        residual_sup=0.0, min_eig=0.0,
    )
    # self-check at segment midpoints, which Hermite interpolation does
    # not reproduce by construction
    h = tau / grid_n
    worst = 0.0
    for i in range(grid_n):
        tm = (i + 0.5) * h
        resid = sol.eval_deriv(tm) - mid_rhs(i, sol.eval(tm))
        worst = max(worst, float(np.abs(resid).max()))
    sol.residual_sup = worst
    if worst > residual_tol:
        raise ResidualTooLarge(
            f"riccati residual {worst:.3e} > {residual_tol:.3e}"
        )
    sol.min_eig = float(
        min(np.linalg.eigvalsh(asc[k])[0] for k in range(grid_n + 1))
    )
    if sol.min_eig <= 0.0:
        raise NotPositiveDefinite(
            f"periodic riccati solution not uniformly PD (min eig {sol.min_eig:.3e})"
        )
    return sol


def solve_state_riccati(
    model: PeriodicModel,
    grid: int = DEFAULT_GRID,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
    seed: np.ndarray | None = None,
    tables: CoefficientTables | None = None,
) -> PeriodicMatrixSolution:
    """Unique positive periodic solution of the state Riccati equation."""
    if grid < 2 or grid % 2:
        raise ValidationError("grid must be a positive even integer")
    tab = tables if tables is not None else CoefficientTables(model, None, grid)

    def rhs(t, P):
        j = tab.stage_index(t)
        return _state_rhs_from(
            tab.A[j], tab.B[j], tab.C[j], tab.D[j],
            tab.Q[j], tab.S[j], tab.R[j], P,
        )

    asc, sweeps = _sweep_to_convergence(
        rhs, model.n, model.tau, grid, tol, max_sweeps, seed
    )
    node_rhs = lambda k: rhs(tab.ts[2 * k], asc[k])
    mid_rhs = lambda i, P: rhs(tab.ts[2 * i + 1], P)
    return _finalize(model.tau, grid, asc, node_rhs, mid_rhs, sweeps, tol, residual_tol)


def solve_mean_riccati(
    model: PeriodicModel,
    state_solution: PeriodicMatrixSolution,
    grid: int = DEFAULT_GRID,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
    seed: np.ndarray | None = None,
    tables: CoefficientTables | None = None,
) -> PeriodicMatrixSolution:
    """Unique positive periodic solution of the aggregate Riccati
    equation, given the already-solved state equation (the API order
    enforces the coupling direction)."""
    if grid < 2 or grid % 2:
        raise ValidationError("grid must be a positive even integer")
    tab = tables if tables is not None else CoefficientTables(model, None, grid)
    # P on the half-step grid once; the sweep only ever samples there
    P_half = state_solution.eval_many(tab.ts)

    def rhs(t, Pi):
        j = tab.stage_index(t)
        return _mean_rhs_from(
            tab.A_hat[j], tab.B_hat[j], tab.C_hat[j], tab.D_hat[j],
            tab.Q_hat[j], tab.S_hat[j], tab.R_hat[j], Pi, P_half[j],
        )

    asc, sweeps = _sweep_to_convergence(
        rhs, model.n, model.tau, grid, tol, max_sweeps, seed
    )
    node_rhs = lambda k: rhs(tab.ts[2 * k], asc[k])
    mid_rhs = lambda i, Pi: rhs(tab.ts[2 * i + 1], Pi)
    return _finalize(model.tau, grid, asc, node_rhs, mid_rhs, sweeps, tol, residual_tol)


def state_feedback_gain(
    model: PeriodicModel, state_solution: PeriodicMatrixSolution, t: float
) -> np.ndarray:
    """Optimal gain on the centered state:
    -(R + D'PD)^{-1} (B'P + D'PC + S) at time t."""
    s = eval_coefficients(model, t)
    P = state_solution.eval(t)
    load = s.B.T @ P + s.D.T @ P @ s.C + s.S
    return -solve_pd(s.R + s.D.T @ P @ s.D, load)


def mean_feedback_gain(
    model: PeriodicModel,
    mean_solution: PeriodicMatrixSolution,
    state_solution: PeriodicMatrixSolution,
    t: float,
) -> np.ndarray:
    """Optimal aggregate gain (acts on the mean):
    -(R_hat + D_hat'P D_hat)^{-1} (B_hat'Pi + D_hat'P C_hat + S_hat)."""
    s = eval_coefficients(model, t)
    P = state_solution.eval(t)
    Pi = mean_solution.eval(t)
    load = s.B_hat.T @ Pi + s.D_hat.T @ P @ s.C_hat + s.S_hat
    return -solve_pd(s.R_hat + s.D_hat.T @ P @ s.D_hat, load)
