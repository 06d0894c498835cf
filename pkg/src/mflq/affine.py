"""Periodic offset equation, feedforward term, ergodic value, and the
full synthesis pipeline.

With both Riccati solutions in hand, the remaining unknown is the
periodic solution eta of the linear offset equation

    d eta/dt + F' eta + g = 0,
    F = A_hat + B_hat Th_hat,   Th_hat = optimal aggregate gain,
    g = (C_hat + D_hat Th_hat)' P sigma + Pi b + q + Th_hat' rho.

Uniqueness comes from the anchor construction: with psi the fundamental
matrix of dpsi/dt = F psi on [0, tau] and l = int_0^tau psi_s' g_s ds,
the anchor h solves (I - psi_tau)' h = l, and eta is the solution
passing through h at the period boundary.  The homogeneous modes of the
offset equation grow forward in time exactly as fast as the closed loop
contracts, so the ODE is integrated backward from eta(tau) = h, which
is the direction in which the periodic solution attracts.

The ergodic value is the period average

    V = (1/tau) int_0^tau ( -<N^{-1} l_p, l_p> + <P sigma, sigma>
                            + 2 <eta, b> ) dt,
    l_p = B_hat' eta + D_hat' P sigma + rho,   N = R_hat + D_hat' P D_hat.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .curves import GridCurve
from .errors import ResidualTooLarge, SingularAnchor, SingularMatrix, ValidationError
from .model import (
    FeedbackPolicy,
    PeriodicModel,
    check_cost_coercivity,
    eval_coefficients,
)
from .numerics import TimeGrid, integrate_matrix_ode, integrate_ode, quadrature, solve_linear, solve_pd
from .riccati import (
    PeriodicMatrixSolution,
    mean_feedback_gain,
    solve_mean_riccati,
    solve_state_riccati,
)
from .tables import CoefficientTables

__all__ = [
    "PeriodicVectorSolution",
    "ValueReport",
    "OptimalityReport",
    "Synthesis",
    "closed_loop_generator",
    "offset_forcing",
    "solve_periodic_offset",
    "feedforward_offset",
    "ergodic_value",
    "optimal_policy",
    "synthesize",
    "optimality_residuals",
]

DEFAULT_GRID = 4096
DEFAULT_RESIDUAL_TOL = 1e-7


class PeriodicVectorSolution(GridCurve):
    """Periodic vector function with anchor diagnostics."""

    def __init__(self, tau, nodes, values, derivs, *, anchor, psi_tau,
                 condition, periodicity_gap, residual_sup):
        super().__init__(tau, values, derivs)
        self.tau = float(tau)
        self.nodes = nodes
        self.anchor = anchor
        self.psi_tau = psi_tau
        self.condition = condition
        self.periodicity_gap = periodicity_gap
        self.residual_sup = residual_sup


def _batched_pd_solve(N, Bm):
    """Solve N[t] X[t] = Bm[t] over the leading time axis."""
    return np.linalg.solve(N, Bm)


def _gain_tables(tab: CoefficientTables, P_half, Pi_half, eta_half=None):
    """Optimal gains on the half-step grid (vectorized over time)."""
    out = {}
    loadP = (
        np.einsum("tji,tjk->tik", tab.B, P_half)
        + np.einsum("tji,tjk,tkl->til", tab.D, P_half, tab.C)
        + tab.S
    )
    NP = tab.R + np.einsum("tji,tjk,tkl->til", tab.D, P_half, tab.D)
    out["theta"] = -_batched_pd_solve(NP, loadP)
    loadH = (
        np.einsum("tji,tjk->tik", tab.B_hat, Pi_half)
        + np.einsum("tji,tjk,tkl->til", tab.D_hat, P_half, tab.C_hat)
        + tab.S_hat
    )
    NH = tab.R_hat + np.einsum("tji,tjk,tkl->til", tab.D_hat, P_half, tab.D_hat)
    out["theta_hat"] = -_batched_pd_solve(NH, loadH)
    out["N_hat"] = NH
    if eta_half is not None:
        lp = (
            np.einsum("tji,tj->ti", tab.B_hat, eta_half)
            + np.einsum("tji,tjk,tk->ti", tab.D_hat, P_half, tab.sigma)
            + tab.rho
        )
        out["l_p"] = lp
        out["v"] = -np.linalg.solve(NH, lp[..., None])[..., 0]
    return out


def closed_loop_generator(
    model: PeriodicModel,
    mean_solution: PeriodicMatrixSolution,
    state_solution: PeriodicMatrixSolution,
    t: float,
) -> np.ndarray:
    """F(t) = A_hat + B_hat Th_hat(t) under the optimal aggregate gain."""
    s = eval_coefficients(model, t)
    th_hat = mean_feedback_gain(model, mean_solution, state_solution, t)
    return s.A_hat + s.B_hat @ th_hat


def offset_forcing(
    model: PeriodicModel,
    state_solution: PeriodicMatrixSolution,
    mean_solution: PeriodicMatrixSolution,
    t: float,
) -> np.ndarray:
    """Inhomogeneity g(t) of the offset equation."""
    s = eval_coefficients(model, t)
    th_hat = mean_feedback_gain(model, mean_solution, state_solution, t)
    P = state_solution.eval(t)
    Pi = mean_solution.eval(t)
    agg_diff = s.C_hat + s.D_hat @ th_hat
    return agg_diff.T @ (P @ s.sigma) + Pi @ s.b + s.q + th_hat.T @ s.rho


def solve_periodic_offset(
    model: PeriodicModel,
    state_solution: PeriodicMatrixSolution,
    mean_solution: PeriodicMatrixSolution,
    grid: int = DEFAULT_GRID,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
    tables: CoefficientTables | None = None,
) -> PeriodicVectorSolution:
    """Unique periodic solution of the offset equation via its anchor.

    Steps: propagate psi forward, accumulate l by Simpson, solve the
    anchor system, then integrate the offset equation backward from the
    anchor (the contracting direction; forward integration amplifies
    anchor error by the inverse of the closed-loop contraction and is
    useless precisely when the loop is very stable).
    """
    if grid < 2 or grid % 2:
        raise ValidationError("grid must be a positive even integer")
    tab = tables if tables is not None else CoefficientTables(model, None, grid)
    n = model.n
    tau = model.tau

    P_half = state_solution.eval_many(tab.ts)
    Pi_half = mean_solution.eval_many(tab.ts)
    gains = _gain_tables(tab, P_half, Pi_half)
    th_hat = gains["theta_hat"]

    F_half = tab.A_hat + np.matmul(tab.B_hat, th_hat)
    agg_diff = tab.C_hat + np.matmul(tab.D_hat, th_hat)
    g_half = (
        np.einsum("tji,tjk,tk->ti", agg_diff, P_half, tab.sigma)
        + np.einsum("tij,tj->ti", Pi_half, tab.b)
        + tab.q
        + np.einsum("tji,tj->ti", th_hat, tab.rho)
    )

    fwd = TimeGrid(0.0, tau, grid)
    psi_traj = integrate_matrix_ode(
        lambda t, M: F_half[tab.stage_index(t)] @ M, np.eye(n), fwd
    )
    psi_tau = psi_traj[-1]

    # l = int psi' g over one period (Simpson on the node grid)
    integrand = np.einsum("tji,tj->ti", psi_traj, g_half[::2])
    h_step = tau / grid
    l_vec = np.array([quadrature(integrand[:, i], h_step) for i in range(n)])

    anchor_mat = (np.eye(n) - psi_tau).T
    try:
        h_anchor = solve_linear(anchor_mat, l_vec)
    except SingularMatrix as exc:
        raise SingularAnchor(
            f"anchor system singular (closed loop not contracting?): {exc}"
        )
    condition = float(np.linalg.cond(np.eye(n) - psi_tau))

    bwd = TimeGrid(tau, 0.0, grid)
    traj = integrate_ode(
        lambda t, e: -(F_half[tab.stage_index(t)].T @ e + g_half[tab.stage_index(t)]),
        h_anchor,
        bwd,
    )
    values = traj[::-1].copy()

    def rhs_at(j, e):
        return -(F_half[j].T @ e + g_half[j])

    derivs = np.stack([rhs_at(2 * k, values[k]) for k in range(grid + 1)])
    sol = PeriodicVectorSolution(
        tau, np.linspace(0.0, tau, grid + 1), values, derivs,
        anchor=h_anchor, psi_tau=psi_tau, condition=condition,
        periodicity_gap=float(np.abs(values[0] - h_anchor).max()),
        residual_sup=0.0,
    )
    worst = 0.0
    for i in range(grid):
        tm = (i + 0.5) * h_step
        resid = sol.eval_deriv(tm) - rhs_at(2 * i + 1, sol.eval(tm))
        worst = max(worst, float(np.abs(resid).max()))
    sol.residual_sup = worst
    if worst > residual_tol:
        raise ResidualTooLarge(
            f"offset residual {worst:.3e} exceeds {residual_tol:.3e}"
        )
    return sol


def feedforward_offset(
    model: PeriodicModel,
    offset_solution: PeriodicVectorSolution,
    state_solution: PeriodicMatrixSolution,
    t: float,
) -> np.ndarray:
    """Optimal feedforward v0(t) = -N^{-1}(B_hat' eta + D_hat' P sigma + rho)."""
    s = eval_coefficients(model, t)
    P = state_solution.eval(t)
    eta = offset_solution.eval(t)
    lp = s.B_hat.T @ eta + s.D_hat.T @ (P @ s.sigma) + s.rho
    N = s.R_hat + s.D_hat.T @ P @ s.D_hat
    return -solve_pd(N, lp)


@dataclass(frozen=True)
class ValueReport:
    """Ergodic value with its integrand decomposition (period averages)."""

    value: float
    quadratic_term: float  # -<N^{-1} l_p, l_p>
    noise_term: float      # <P sigma, sigma>
    offset_term: float     # 2 <eta, b>
    grid: int


def ergodic_value(
    model: PeriodicModel,
    state_solution: PeriodicMatrixSolution,
    offset_solution: PeriodicVectorSolution,
    grid: int = DEFAULT_GRID,
    tables: CoefficientTables | None = None,
) -> ValueReport:
    """Period-averaged optimal cost from the closed-form integrand."""
    tab = tables if tables is not None else CoefficientTables(model, None, grid)
    grid = tab.steps
    P_n = state_solution.eval_many(tab.ts[::2])
    eta_n = offset_solution.eval_many(tab.ts[::2])
    sig = tab.sigma[::2]
    b_n = tab.b[::2]
    D_h = tab.D_hat[::2]
    B_h = tab.B_hat[::2]
    R_h = tab.R_hat[::2]
    rho_n = tab.rho[::2]

    Psig = np.einsum("tij,tj->ti", P_n, sig)
    lp = (
        np.einsum("tji,tj->ti", B_h, eta_n)
        + np.einsum("tji,tj->ti", D_h, Psig)
        + rho_n
    )
    N = R_h + np.einsum("tji,tjk,tkl->til", D_h, P_n, D_h)
    Ninv_lp = np.linalg.solve(N, lp[..., None])[..., 0]

    quad = -np.einsum("ti,ti->t", Ninv_lp, lp)
    noise = np.einsum("ti,ti->t", Psig, sig)
    offs = 2.0 * np.einsum("ti,ti->t", eta_n, b_n)

    h_step = model.tau / grid
    avg = lambda series: quadrature(series, h_step) / model.tau
    q_avg, n_avg, o_avg = avg(quad), avg(noise), avg(offs)
    return ValueReport(
        value=q_avg + n_avg + o_avg,
        quadratic_term=q_avg,
        noise_term=n_avg,
        offset_term=o_avg,
        grid=grid,
    )


def optimal_policy(
    model: PeriodicModel,
    state_solution: PeriodicMatrixSolution,
    mean_solution: PeriodicMatrixSolution,
    offset_solution: PeriodicVectorSolution,
    grid: int = DEFAULT_GRID,
    tables: CoefficientTables | None = None,
) -> FeedbackPolicy:
    """Assemble the synthesized policy as dense periodic gain curves.

    The mean-shift gain is the derived difference (aggregate minus
    state gain); the curves interpolate node samples with cubic Hermite.
    """
    tab = tables if tables is not None else CoefficientTables(model, None, grid)
    nodes = tab.ts[::2]
    P_n = state_solution.eval_many(nodes)
    Pi_n = mean_solution.eval_many(nodes)
    eta_n = offset_solution.eval_many(nodes)
    # node-resolution view of the half-grid tables
    sub = SimpleNamespace(**{
        name: getattr(tab, name)[::2]
        for name in ("B", "D", "C", "S", "R", "B_hat", "D_hat", "C_hat",
                     "S_hat", "R_hat", "sigma", "rho")
    })
    gains = _gain_tables(sub, P_n, Pi_n, eta_n)
    theta = gains["theta"]
    theta_hat = gains["theta_hat"]
    v = gains["v"]

    tau = model.tau
    return FeedbackPolicy(
        theta=GridCurve.from_samples(theta, tau),
        thetabar=GridCurve.from_samples(theta_hat - theta, tau),
        v=GridCurve.from_samples(v[..., None], tau),
        name="synthesized",
    )


@dataclass(frozen=True)
class OptimalityReport:
    """Moment-level optimality conditions of a candidate policy.

    state_condition_sup: sup_t trace((Th* - Th0) V_t (Th* - Th0)')
    mean_condition_sup:  sup_t | v* - v0 + (Th_hat* - Th_hat0) Y_t |
    """

    state_condition_sup: float
    mean_condition_sup: float
    tol: float
    satisfied: bool


def optimality_residuals(
    candidate: FeedbackPolicy,
    optimal: FeedbackPolicy,
    orbit,
    tol: float = 1e-7,
) -> OptimalityReport:
    """Evaluate both optimality conditions along a periodic moment orbit
    of the candidate policy."""
    worst_state = 0.0
    worst_mean = 0.0
    for k, t in enumerate(orbit.nodes):
        dth = candidate.theta_at(t) - optimal.theta_at(t)
        dhat = candidate.theta_hat_at(t) - optimal.theta_hat_at(t)
        dv = candidate.v_at(t) - optimal.v_at(t)
        V = orbit.cov_values[k]
        Y = orbit.mean_values[k]
        worst_state = max(worst_state, float(np.trace(dth @ V @ dth.T)))
        worst_mean = max(
            worst_mean, float(np.linalg.norm(dv + dhat @ Y))
        )
    return OptimalityReport(
        state_condition_sup=worst_state,
        mean_condition_sup=worst_mean,
        tol=tol,
        satisfied=bool(worst_state <= tol and worst_mean <= tol),
    )


@dataclass(frozen=True)
class Synthesis:
    """Everything the synthesis pipeline produces."""

    model: PeriodicModel
    state_solution: PeriodicMatrixSolution
    mean_solution: PeriodicMatrixSolution
    offset_solution: PeriodicVectorSolution
    policy: FeedbackPolicy
    value: ValueReport


def synthesize(
    model: PeriodicModel,
    grid: int = DEFAULT_GRID,
    tol: float = 1e-9,
    require_coercive: bool = True,
) -> Synthesis:
    """Run the full pipeline: coercivity check, state Riccati, aggregate
    Riccati, periodic offset, gain assembly, ergodic value."""
    if require_coercive:
        rep = check_cost_coercivity(model)
        if not rep.passed:
            raise ValidationError(
                "cost weights fail uniform coercivity; synthesis undefined"
            )
    tab = CoefficientTables(model, None, grid)
    state_sol = solve_state_riccati(model, grid=grid, tol=tol, tables=tab)
    mean_sol = solve_mean_riccati(model, state_sol, grid=grid, tol=tol, tables=tab)
    offset_sol = solve_periodic_offset(model, state_sol, mean_sol, grid=grid, tables=tab)
    policy = optimal_policy(model, state_sol, mean_sol, offset_sol, grid=grid, tables=tab)
    value = ergodic_value(model, state_sol, offset_sol, grid=grid, tables=tab)
    return Synthesis(
        model=model,
        state_solution=state_sol,
        mean_solution=mean_sol,
        offset_solution=offset_sol,
        policy=policy,
        value=value,
    )
