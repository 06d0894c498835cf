"""Periodic stability certificates for closed-loop policies.

Two monodromy maps decide admissibility over one period:

* the mean flow  dY/dt = (A + Abar + (B + Bbar)(Theta + Thetabar)) Y,
* the second-moment flow  dM/dt = As M + M As' + Cs M Cs' with
  As = A + B Theta, Cs = C + D Theta, lifted to a linear map on
  vectorized matrices.

A policy is admissible when both spectral radii stay below 1 by the
requested margin; the certificate also reports the per-unit-time decay
rates -log(rho)/tau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import FeedbackPolicy, PeriodicModel
from .numerics import TimeGrid, integrate_matrix_ode, spectral_radius, unvech, vech
from .tables import CoefficientTables

__all__ = [
    "StabilityCertificate",
    "mean_monodromy",
    "second_moment_monodromy",
    "certify",
]

DEFAULT_STEPS = 4096


@dataclass(frozen=True)
class StabilityCertificate:
    rho_mean: float
    rho_second: float
    decay_rate_mean: float
    decay_rate_second: float
    margin: float
    admissible: bool


def _tables(model, policy, steps, tables):
    if tables is not None:
        return tables
    return CoefficientTables(model, policy, steps)


def mean_monodromy(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    steps: int = DEFAULT_STEPS,
    tables: CoefficientTables | None = None,
) -> np.ndarray:
    """Fundamental matrix of the closed-loop mean flow over [0, tau]."""
    tab = _tables(model, policy, steps, tables)
    G = tab.mean_drift

    def rhs(t, Psi):
        return G[tab.stage_index(t)] @ Psi

    grid = TimeGrid(0.0, model.tau, tab.steps)
    traj = integrate_matrix_ode(rhs, np.eye(model.n), grid)
    return traj[-1]


def second_moment_monodromy(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    steps: int = DEFAULT_STEPS,
    tables: CoefficientTables | None = None,
) -> np.ndarray:
    """Monodromy of the homogeneous second-moment flow, as an n^2 x n^2
    matrix acting on row-major vectorized matrices.

    The flow maps symmetric matrices to symmetric matrices, and only the
    symmetric sector carries covariance information, so the map is built
    by propagating the n(n+1)/2 symmetric basis matrices and embedding;
    the antisymmetric sector is sent to zero by convention.
    """
    tab = _tables(model, policy, steps, tables)
    n = model.n
    As = tab.drift_state
    Cs = tab.diff_state

    def rhs(t, M):
        j = tab.stage_index(t)
        A_, C_ = As[j], Cs[j]
        return A_ @ M + M @ A_.T + C_ @ M @ C_.T

    grid = TimeGrid(0.0, model.tau, tab.steps)
    i_idx, j_idx = np.tril_indices(n)
    s = i_idx.size
    propagated = np.empty((s, n, n))
    for col in range(s):
        E = np.zeros((n, n))
        E[i_idx[col], j_idx[col]] = 1.0
        E[j_idx[col], i_idx[col]] = 1.0
        traj = integrate_matrix_ode(rhs, E, grid, symmetric=True)
        propagated[col] = traj[-1]

    # embed the symmetric-sector map into vec-space: vec(M) -> sym part
    # -> propagate -> vec.  Basis above is E_ij + E_ji (unnormalized), so
    # expansion coefficients of sym(M) are M_ii on the diagonal and the
    # symmetrized off-diagonal average.
    L = np.zeros((n * n, n * n))
    for col in range(s):
        i, j = i_idx[col], j_idx[col]
        weight_cols = [(i, j, 1.0)] if i == j else [(i, j, 0.5), (j, i, 0.5)]
        for (a, b, w) in weight_cols:
            L[:, a * n + b] += w * propagated[col].reshape(-1)
    return L


def second_moment_restricted(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    steps: int = DEFAULT_STEPS,
    tables: CoefficientTables | None = None,
) -> np.ndarray:
    """Second-moment period map restricted to vech coordinates."""
    tab = _tables(model, policy, steps, tables)
    n = model.n
    As = tab.drift_state
    Cs = tab.diff_state

    def rhs(t, M):
        j = tab.stage_index(t)
        A_, C_ = As[j], Cs[j]
        return A_ @ M + M @ A_.T + C_ @ M @ C_.T

    grid = TimeGrid(0.0, model.tau, tab.steps)
    i_idx, j_idx = np.tril_indices(n)
    s = i_idx.size
    T = np.empty((s, s))
    for col in range(s):
        e = np.zeros(s)
        e[col] = 1.0
        E = unvech(e, n)
        traj = integrate_matrix_ode(rhs, E, grid, symmetric=True)
        T[:, col] = vech(traj[-1])
    return T


def certify(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    margin: float = 1e-6,
    steps: int = DEFAULT_STEPS,
    tables: CoefficientTables | None = None,
) -> StabilityCertificate:
    """Decide admissibility of a policy from its two monodromy spectra."""
    if margin < 0:
        raise ValidationError("margin must be nonnegative")
    tab = _tables(model, policy, steps, tables)
    rho_mean = spectral_radius(mean_monodromy(model, policy, tables=tab))
    rho_second = spectral_radius(second_moment_restricted(model, policy, tables=tab))

    def rate(rho):
        return float("inf") if rho == 0.0 else -np.log(rho) / model.tau

    return StabilityCertificate(
        rho_mean=rho_mean,
        rho_second=rho_second,
        decay_rate_mean=rate(rho_mean),
        decay_rate_second=rate(rho_second),
        margin=margin,
        admissible=bool(rho_mean < 1.0 - margin and rho_second < 1.0 - margin),
    )
