"""Mean/covariance dynamics of the closed loop and moment-route costs.

For an admissible policy the pair (Y, V) = (E[X], Cov[X]) obeys a
closed ODE system: with Ds = A + B Theta, Dm the mean-coupling block,
G = Ds + Dm, Fs = C + D Theta, and m(t) the aggregate diffusion
evaluated on the mean,

    dY/dt = G Y + (B_hat v + b)
    dV/dt = Ds V + V Ds' + Fs V Fs' + m m',
    m = (C_hat + D_hat Th_hat) Y + D_hat v + sigma.

Both period maps are affine, so the unique periodic orbit comes from
two linear fixed-point solves (mean first, covariance second, since m
depends on the mean orbit).  The expected running cost along moments is
the quadratic/linear/constant decomposition

    E F = <Ka, V + Y Y'> + <Kb Y, Y> + <Kc, Y> + Kd,

which is also the bridge to the Monte Carlo route (the same identity
evaluated with empirical moments).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import GridCurve
from .errors import NotAdmissible, PeriodicityViolation, ValidationError
from .model import FeedbackPolicy, PeriodicModel, eval_coefficients
from .numerics import (
    TimeGrid,
    integrate_matrix_ode,
    integrate_ode,
    quadrature,
    solve_linear,
    spectral_radius,
    unvech,
    vech,
)
from .stability import second_moment_restricted
from .tables import CoefficientTables

__all__ = [
    "MomentState",
    "PeriodicMomentOrbit",
    "CostDecomposition",
    "moment_rhs",
    "periodic_moment_orbit",
    "propagate_moments",
    "cost_decomposition",
    "period_average_cost",
    "finite_horizon_average",
    "measure_flow_check",
]

DEFAULT_GRID = 4096


@dataclass(frozen=True)
class MomentState:
    t: float
    mean: np.ndarray
    cov: np.ndarray

    @property
    def second_moment(self) -> np.ndarray:
        return self.cov + np.outer(self.mean, self.mean)


def moment_rhs(
    model: PeriodicModel, policy: FeedbackPolicy, t: float, state: MomentState
) -> MomentState:
    """Time derivative of (mean, covariance) under the closed loop."""
    s = eval_coefficients(model, t, policy)
    Ds = s.A + s.B @ s.Theta
    Dm = s.Abar + s.B @ s.Thetabar + s.Bbar @ s.Theta_hat
    Fs = s.C + s.D @ s.Theta
    G = Ds + Dm
    da = s.B_hat @ s.v + s.b
    m = (s.C_hat + s.D_hat @ s.Theta_hat) @ state.mean + s.D_hat @ s.v + s.sigma
    dY = G @ state.mean + da
    V = state.cov
    dV = Ds @ V + V @ Ds.T + Fs @ V @ Fs.T + np.outer(m, m)
    return MomentState(t=t, mean=dY, cov=0.5 * (dV + dV.T))


class PeriodicMomentOrbit:
    """Periodic moment orbit with node values, Hermite interpolation and
    contraction diagnostics."""

    def __init__(self, tau, nodes, mean_values, mean_derivs, cov_values,
                 cov_derivs, *, gap, rho_mean, rho_cov):
        self.tau = float(tau)
        self.nodes = nodes
        self.mean_values = mean_values
        self.cov_values = cov_values
        self._mean_curve = GridCurve(tau, mean_values, mean_derivs)
        self._cov_curve = GridCurve(tau, cov_values, cov_derivs)
        self.gap = gap
        self.contraction_rho_mean = rho_mean
        self.contraction_rho_cov = rho_cov

    def mean_at(self, t: float) -> np.ndarray:
        return self._mean_curve.eval(t)

    def cov_at(self, t: float) -> np.ndarray:
        M = self._cov_curve.eval(t)
        return 0.5 * (M + M.T)

    def state_at(self, t: float) -> MomentState:
        return MomentState(t=float(t), mean=self.mean_at(t), cov=self.cov_at(t))


def _cov_rhs_factory(tab: CoefficientTables, mean_half: np.ndarray):
    """Covariance rhs with the mean orbit frozen in (half-grid lookup)."""
    Ds = tab.drift_state
    Fs = tab.diff_state
    Gm = tab.agg_diff
    fa = tab.diff_affine
    m_half = np.einsum("tij,tj->ti", Gm, mean_half) + fa

    def rhs(t, V):
        j = tab.stage_index(t)
        A_, C_, m = Ds[j], Fs[j], m_half[j]
        out = A_ @ V + V @ A_.T + C_ @ V @ C_.T + np.outer(m, m)
        return out

    return rhs


def periodic_moment_orbit(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    grid: int = DEFAULT_GRID,
    margin: float = 1e-6,
    periodicity_tol: float = 1e-7,
    tables: CoefficientTables | None = None,
) -> PeriodicMomentOrbit:
    """Unique periodic orbit of the moment flow.

    The mean period map Y0 -> Psi Y0 + r and the covariance period map
    vech(V0) -> T vech(V0) + f are both affine; their fixed points are
    linear solves, rejected with NotAdmissible when either spectral
    radius reaches 1 - margin.
    """
    if grid < 2 or grid % 2:
        raise ValidationError("grid must be a positive even integer")
    tab = tables if tables is not None else CoefficientTables(model, policy, grid)
    if tab.policy is None:
        raise ValidationError("tables lack policy data")
    n = model.n
    tau = model.tau
    G = tab.mean_drift
    da = tab.drift_affine

    span = TimeGrid(0.0, tau, grid)
    Psi = integrate_matrix_ode(
        lambda t, M: G[tab.stage_index(t)] @ M, np.eye(n), span
    )[-1]
    rho_mean = spectral_radius(Psi)
    if rho_mean >= 1.0 - margin:
        raise NotAdmissible(f"mean period map has spectral radius {rho_mean:.6f}")
    forced = integrate_ode(
        lambda t, y: G[tab.stage_index(t)] @ y + da[tab.stage_index(t)],
        np.zeros(n),
        span,
    )[-1]
    mean0 = solve_linear(np.eye(n) - Psi, forced)

    mean_traj = integrate_ode(
        lambda t, y: G[tab.stage_index(t)] @ y + da[tab.stage_index(t)],
        mean0,
        span,
    )
    mean_derivs = np.einsum("tij,tj->ti", G[::2], mean_traj) + da[::2]
    # covariance stages sample the mean at half-nodes; cubic Hermite
    # midpoints from the node values and exact derivatives are O(h^4)
    h_step = tau / grid
    mids = (
        0.5 * (mean_traj[:-1] + mean_traj[1:])
        + (h_step / 8.0) * (mean_derivs[:-1] - mean_derivs[1:])
    )
    mean_half = np.empty((2 * grid + 1, n))
    mean_half[::2] = mean_traj
    mean_half[1::2] = mids

    T_cov = second_moment_restricted(model, policy, tables=tab)
    rho_cov = spectral_radius(T_cov)
    if rho_cov >= 1.0 - margin:
        raise NotAdmissible(
            f"second-moment period map has spectral radius {rho_cov:.6f}"
        )
    cov_rhs = _cov_rhs_factory(tab, mean_half)
    f_forced = vech(
        integrate_matrix_ode(cov_rhs, np.zeros((n, n)), span, symmetric=True)[-1]
    )
    s_dim = n * (n + 1) // 2
    cov0 = unvech(solve_linear(np.eye(s_dim) - T_cov, f_forced), n)

    cov_traj = integrate_matrix_ode(cov_rhs, cov0, span, symmetric=True)

    gap = max(
        float(np.abs(mean_traj[-1] - mean_traj[0]).max()),
        float(np.abs(cov_traj[-1] - cov_traj[0]).max()),
    )
    if gap > periodicity_tol:
        raise PeriodicityViolation(f"moment orbit gap {gap:.3e}")

    cov_derivs = np.stack(
        [cov_rhs(tab.ts[2 * k], cov_traj[k]) for k in range(grid + 1)]
    )
    cov_derivs = 0.5 * (cov_derivs + np.swapaxes(cov_derivs, 1, 2))

    return PeriodicMomentOrbit(
        tau, np.linspace(0.0, tau, grid + 1),
        mean_traj, mean_derivs, cov_traj, cov_derivs,
        gap=gap, rho_mean=rho_mean, rho_cov=rho_cov,
    )


@dataclass(frozen=True)
class CostDecomposition:
    """Blocks of E F = <state_quad, V + YY'> + <mean_quad Y, Y>
    + <linear, Y> + constant under a fixed policy."""

    t: float
    state_quad: np.ndarray
    mean_quad: np.ndarray
    linear: np.ndarray
    constant: float

    def expected_cost(self, mean: np.ndarray, cov: np.ndarray) -> float:
        second = cov + np.outer(mean, mean)
        return float(
            np.tensordot(self.state_quad, second)
            + mean @ self.mean_quad @ mean
            + self.linear @ mean
            + self.constant
        )


def cost_decomposition(
    model: PeriodicModel, policy: FeedbackPolicy, t: float
) -> CostDecomposition:
    """Quadratic/linear/constant blocks of the expected running cost."""
    s = eval_coefficients(model, t, policy)
    Th, Tb, v = s.Theta, s.Thetabar, s.v
    Th_hat = s.Theta_hat
    Ka = s.Q + s.S.T @ Th + Th.T @ s.S + Th.T @ s.R @ Th
    Kb = (
        s.S.T @ Tb + Tb.T @ s.S
        + Th.T @ s.R @ Tb + Tb.T @ s.R @ Th + Tb.T @ s.R @ Tb
        + s.Qbar
        + s.Sbar.T @ Th_hat + Th_hat.T @ s.Sbar
        + Th_hat.T @ s.Rbar @ Th_hat
    )
    Kc = 2.0 * (
        (s.S_hat + s.R_hat @ Th_hat).T @ v + s.q + Th_hat.T @ s.rho
    )
    Kd = float(v @ s.R_hat @ v + 2.0 * s.rho @ v)
    return CostDecomposition(
        t=float(t),
        state_quad=0.5 * (Ka + Ka.T),
        mean_quad=0.5 * (Kb + Kb.T),
        linear=Kc,
        constant=Kd,
    )


def _cost_series(tab: CoefficientTables, means, covs):
    """E F at the node times corresponding to rows of means/covs, using
    the precomputed decomposition tables (phase-indexed)."""
    Ka = tab.cost_state[::2]
    Kb = tab.cost_mean[::2]
    Kc = tab.cost_lin[::2]
    Kd = tab.cost_const[::2]
    T = means.shape[0]
    spp = tab.steps
    idx = np.arange(T) % spp
    second = covs + np.einsum("ti,tj->tij", means, means)
    return (
        np.einsum("tij,tij->t", Ka[idx], second)
        + np.einsum("tij,ti,tj->t", Kb[idx], means, means)
        + np.einsum("ti,ti->t", Kc[idx], means)
        + Kd[idx]
    )


def period_average_cost(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    orbit: PeriodicMomentOrbit,
    tables: CoefficientTables | None = None,
) -> float:
    """Ergodic cost of the policy: Simpson average of E F over its
    periodic moment orbit."""
    grid = orbit.nodes.size - 1
    tab = tables if tables is not None else CoefficientTables(model, policy, grid)
    series = _cost_series(tab, orbit.mean_values, orbit.cov_values)
    return quadrature(series, model.tau / grid) / model.tau


def _packed_moment_stepper(tab: CoefficientTables):
    """RK4 stepper for the packed state [Y, vec(V)] using phase tables."""
    n = tab.A.shape[1]
    G = tab.mean_drift
    da = tab.drift_affine
    Ds = tab.drift_state
    Fs = tab.diff_state
    Gm = tab.agg_diff
    fa = tab.diff_affine

    def rhs(j, state):
        Y = state[:n]
        V = state[n:].reshape(n, n)
        m = Gm[j] @ Y + fa[j]
        dY = G[j] @ Y + da[j]
        dV = Ds[j] @ V + V @ Ds[j].T + Fs[j] @ V @ Fs[j].T + np.outer(m, m)
        return np.concatenate([dY, dV.reshape(-1)])

    def step(state, j0):
        # j0 = half-grid index of the step start; stages at j0, j0+1, j0+2
        h = tab.h
        k1 = rhs(j0, state)
        k2 = rhs(j0 + 1, state + 0.5 * h * k1)
        k3 = rhs(j0 + 1, state + 0.5 * h * k2)
        k4 = rhs(j0 + 2, state + h * k3)
        out = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        V = out[n:].reshape(n, n)
        out[n:] = (0.5 * (V + V.T)).reshape(-1)
        return out

    return step


def propagate_moments(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    x: np.ndarray,
    horizon: float,
    cov0: np.ndarray | None = None,
    steps_per_period: int = DEFAULT_GRID,
    record_stride: int = 1,
    tables: CoefficientTables | None = None,
):
    """March the moment ODE from a point (or distributed) start.

    Returns (times, means, covs) sampled every record_stride steps.  The
    horizon is snapped to the integration grid.
    """
    tab = tables if tables is not None else CoefficientTables(
        model, policy, steps_per_period
    )
    n = model.n
    h = tab.h
    steps = max(1, int(round(horizon / h)))
    spp = tab.steps
    V0 = np.zeros((n, n)) if cov0 is None else np.asarray(cov0, dtype=float)
    state = np.concatenate([np.asarray(x, dtype=float), V0.reshape(-1)])
    step = _packed_moment_stepper(tab)

    rec_idx = list(range(0, steps + 1, record_stride))
    if rec_idx[-1] != steps:
        rec_idx.append(steps)
    times = np.array([h * k for k in rec_idx])
    means = np.empty((len(rec_idx), n))
    covs = np.empty((len(rec_idx), n, n))
    r = 0
    for k in range(steps + 1):
        if r < len(rec_idx) and k == rec_idx[r]:
            means[r] = state[:n]
            covs[r] = state[n:].reshape(n, n)
            r += 1
        if k < steps:
            state = step(state, 2 * (k % spp))
    return times, means, covs


def finite_horizon_average(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    x: np.ndarray,
    horizon: float,
    cov0: np.ndarray | None = None,
    steps_per_period: int = DEFAULT_GRID,
    tables: CoefficientTables | None = None,
) -> float:
    """(1/T) int_0^T E F dt from a deterministic start at x (or a
    distributed start when cov0 is given).  Horizon snapped to the grid;
    the running cost is accumulated at every node and averaged by the
    trapezoid rule, which is spectrally accurate over whole periods."""
    tab = tables if tables is not None else CoefficientTables(
        model, policy, steps_per_period
    )
    n = model.n
    h = tab.h
    steps = max(1, int(round(horizon / h)))
    T = steps * h
    spp = tab.steps
    Ka = tab.cost_state[::2]
    Kb = tab.cost_mean[::2]
    Kc = tab.cost_lin[::2]
    Kd = tab.cost_const[::2]
    V0 = np.zeros((n, n)) if cov0 is None else np.asarray(cov0, dtype=float)
    state = np.concatenate([np.asarray(x, dtype=float), V0.reshape(-1)])
    step = _packed_moment_stepper(tab)

    def node_cost(k, st):
        j = k % spp
        Y = st[:n]
        V = st[n:].reshape(n, n)
        second = V + np.outer(Y, Y)
        return (
            float(np.tensordot(Ka[j], second))
            + float(Y @ Kb[j] @ Y)
            + float(Kc[j] @ Y)
            + float(Kd[j])
        )

    acc = 0.5 * node_cost(0, state)
    for k in range(1, steps + 1):
        state = step(state, 2 * ((k - 1) % spp))
        w = 0.5 if k == steps else 1.0
        acc += w * node_cost(k, state)
    return acc * h / T


def measure_flow_check(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    orbit: PeriodicMomentOrbit,
    s: float,
    t: float,
    tables: CoefficientTables | None = None,
) -> float:
    """Invariance check of the periodic orbit under the moment flow:
    start on the orbit at phase s, march t time units, compare with the
    orbit at phase (s + t) mod tau.  Both s and t are snapped to the
    orbit grid.  Returns the sup-norm distance over mean and cov."""
    grid = orbit.nodes.size - 1
    tab = tables if tables is not None else CoefficientTables(model, policy, grid)
    h = tab.h
    spp = tab.steps
    k0 = int(round((float(s) % model.tau) / h)) % spp
    steps = max(1, int(round(t / h)))
    start = orbit.state_at(orbit.nodes[k0])
    state = np.concatenate([start.mean, start.cov.reshape(-1)])
    step = _packed_moment_stepper(tab)
    for k in range(steps):
        state = step(state, 2 * ((k0 + k) % spp))
    k1 = (k0 + steps) % spp
    target = orbit.state_at(orbit.nodes[k1])
    n = model.n
    d_mean = np.abs(state[:n] - target.mean).max()
    d_cov = np.abs(state[n:].reshape(n, n) - target.cov).max()
    return float(max(d_mean, d_cov))
