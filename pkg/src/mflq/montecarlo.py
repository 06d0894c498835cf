"""Path simulation, empirical laws, and measure-convergence diagnostics.

Two simulation modes share one Euler-Maruyama core.  In "exact-mean" mode
the mean-field input is the exact periodic-ODE mean, so each path is
independent and the ensemble size only affects statistical error.  In
"particle" mode the ensemble average replaces the mean, giving the
interacting particle system whose chaos limit is the exact-mean dynamics.

Noise is drawn from counter-based Philox streams keyed (seed, path index),
so path i sees identical increments regardless of ensemble size or
chunking.  That makes exact-mean ensembles nested: enlarging the ensemble
never perturbs existing paths.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import (
    InsufficientData,
    NonFiniteState,
    NotAdmissible,
    NotAGridNode,
    SizeMismatch,
    TooLarge,
    ValidationError,
)
from .model import FeedbackPolicy, PeriodicModel, eval_coefficients
from .stability import certify
from .tables import CoefficientTables

ASSIGNMENT_CAP = 4096

_CHUNK_STEPS = 2048


@dataclass(frozen=True)
class SimulationConfig:
    """Ensemble size and time discretization for one simulation run.

    dt must divide the model period; this is checked against the model in
    simulate_ensemble, not here.  snapshot_stride controls how often full
    ensemble states are retained when no explicit snapshot times are given.
    accumulate_cost=False skips the per-step moment accumulators and the
    cost series, trimming runs that only need terminal laws.
    """

    paths: int
    dt: float
    horizon: float
    seed: int = 42
    mode: str = "exact-mean"
    snapshot_stride: int = 256
    accumulate_cost: bool = True

    def __post_init__(self) -> None:
        if self.paths < 1:
            raise ValidationError("paths must be at least 1")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValidationError("dt must be positive and finite")
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValidationError("horizon must be positive and finite")
        if self.mode not in ("exact-mean", "particle"):
            raise ValidationError(
                f"mode must be 'exact-mean' or 'particle', got {self.mode!r}"
            )
        if self.snapshot_stride < 1:
            raise ValidationError("snapshot_stride must be at least 1")
        if self.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")


@dataclass
class PathEnsemble:
    """Simulated ensemble with snapshot states and a running cost series.

    states has shape (paths, snapshots, n) and means (snapshots, n); means
    holds the exact ODE mean in exact-mean mode and the ensemble average in
    particle mode.  cost_values is the per-step ensemble average of the
    running cost integrand on the full step grid (None if not accumulated).
    """

    model: PeriodicModel
    policy: FeedbackPolicy
    config: SimulationConfig
    mode: str
    t0: float
    times: np.ndarray
    states: np.ndarray
    means: np.ndarray
    cost_times: Optional[np.ndarray]
    cost_values: Optional[np.ndarray]

    @property
    def paths(self) -> int:
        return self.states.shape[0]

    @property
    def snapshots(self) -> int:
        return self.states.shape[1]

    def snapshot_index(self, t: float) -> int:
        tol = 1e-9 * max(1.0, self.model.tau)
        hits = np.nonzero(np.abs(self.times - t) <= tol)[0]
        if hits.size == 0:
            raise NotAGridNode(
                f"t={t!r} is not a stored snapshot time; stored times run "
                f"{self.times[0]!r}..{self.times[-1]!r}"
            )
        return int(hits[0])

    def controls_at(self, t: float) -> np.ndarray:
        """Per-path feedback controls at a snapshot time, shape (paths, m)."""
        j = self.snapshot_index(t)
        theta = self.policy.theta_at(t)
        thetabar = self.policy.thetabar_at(t)
        v = self.policy.v_at(t)
        shift = thetabar @ self.means[j] + v
        return self.states[:, j, :] @ theta.T + shift

    def write_csv(self, path: str) -> None:
        """Dump snapshot states as rows (path_id, t, x1..xn)."""
        n = self.states.shape[2]
        header = ["path_id", "t"] + [f"x{i + 1}" for i in range(n)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.paths):
                for j, t in enumerate(self.times):
                    row = [i, repr(float(t))]
                    row.extend(repr(float(z)) for z in self.states[i, j])
                    writer.writerow(row)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Finite point cloud standing in for the law at one time."""

    t: float
    points: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def covariance(self) -> np.ndarray:
        centered = self.points - self.points.mean(axis=0)
        return centered.T @ centered / self.points.shape[0]


def path_streams(seed: int, paths: int) -> list:
    """Independent per-path generators keyed (seed, path index)."""
    return [
        np.random.Generator(np.random.Philox(key=[seed, i])) for i in range(paths)
    ]


def _noise_block(gens: list, length: int) -> np.ndarray:
    """Per-path standard normals, one contiguous row per path.

    Single precision: the increments carry ~1e-7 relative rounding, far
    below the scheme's own weak error, and generation is the second-largest
    cost of a long run.
    """
    block = np.empty((len(gens), length), dtype=np.float32)
    for i, gen in enumerate(gens):
        gen.standard_normal(out=block[i], dtype=np.float32)
    return block


def _grid_index(t: float, dt: float, tau: float, what: str) -> int:
    k = int(round(t / dt))
    if abs(k * dt - t) > 1e-9 * max(tau, 1.0) or k < 0:
        raise ValidationError(f"{what}={t!r} is not a multiple of dt={dt!r}")
    return k


def _snapshot_steps(
    config: SimulationConfig,
    steps: int,
    t0: float,
    snapshot_times: Optional[Sequence[float]],
    dt: float,
    tau: float,
) -> np.ndarray:
    if snapshot_times is None:
        ks = list(range(0, steps + 1, config.snapshot_stride))
        if ks[-1] != steps:
            ks.append(steps)
        return np.asarray(ks, dtype=int)
    ks = []
    for t in snapshot_times:
        k = _grid_index(t - t0, dt, tau, "snapshot time offset")
        if k > steps:
            raise ValidationError(
                f"snapshot time {t!r} lies beyond the horizon {t0 + steps * dt!r}"
            )
        ks.append(k)
    arr = np.asarray(ks, dtype=int)
    if arr.size == 0:
        raise ValidationError("snapshot_times must not be empty")
    if np.any(np.diff(arr) <= 0):
        raise ValidationError("snapshot_times must be strictly increasing")
    return arr


def _one_step_maps(tab: CoefficientTables, offset: int) -> tuple:
    """Affine one-step transitions (Phi_k, r_k) of the closed-loop mean.

    One entry per step of a period, in march order starting at node phase
    `offset`, under the classic fourth-order scheme with stage coefficients
    read off the half-step tables.  The step is affine in the state, so its
    matrix and shift parts can be built separately, batched over phases.
    """
    per = tab.steps
    h = tab.model.tau / per
    n = tab.model.n
    j0 = 2 * ((offset + np.arange(per)) % per)
    G0, G1, G2 = tab.mean_drift[j0], tab.mean_drift[j0 + 1], tab.mean_drift[j0 + 2]
    a0, a1, a2 = tab.drift_affine[j0], tab.drift_affine[j0 + 1], tab.drift_affine[j0 + 2]
    eye = np.eye(n)
    K1 = G0
    K2 = G1 @ (eye + 0.5 * h * K1)
    K3 = G1 @ (eye + 0.5 * h * K2)
    K4 = G2 @ (eye + h * K3)
    Phi = eye + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
    k1 = a0
    k2 = np.einsum("kij,kj->ki", G1, 0.5 * h * k1) + a1
    k3 = np.einsum("kij,kj->ki", G1, 0.5 * h * k2) + a1
    k4 = np.einsum("kij,kj->ki", G2, h * k3) + a2
    r = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Phi, r


def _mean_series(
    tab: CoefficientTables, x: np.ndarray, steps: int, offset: int
) -> np.ndarray:
    """Closed-loop mean on the step grid.

    Composes the one-step maps into prefix maps over a single period and
    reuses them across periods, which reproduces node-by-node stepping up
    to roundoff at a fraction of the cost.
    """
    per = tab.steps
    n = x.size
    Phi, r = _one_step_maps(tab, offset)
    pre_m = np.empty((per + 1, n, n))
    pre_a = np.empty((per + 1, n))
    pre_m[0] = np.eye(n)
    pre_a[0] = 0.0
    for k in range(per):
        pre_m[k + 1] = Phi[k] @ pre_m[k]
        pre_a[k + 1] = Phi[k] @ pre_a[k] + r[k]
    out = np.empty((steps + 1, n))
    y = x.astype(float)
    whole, rem = divmod(steps, per)
    pos = 0
    for _ in range(whole):
        out[pos : pos + per] = pre_m[:per] @ y + pre_a[:per]
        y = pre_m[per] @ y + pre_a[per]
        pos += per
    if rem:
        out[pos : pos + rem] = pre_m[:rem] @ y + pre_a[:rem]
        y = pre_m[rem] @ y + pre_a[rem]
        pos += rem
    out[pos] = y
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("closed-loop mean diverged during simulation")
    return out


_COST_CHUNK = 1 << 16


def _cost_series(
    tab: CoefficientTables,
    node_phase: np.ndarray,
    second: np.ndarray,
    mean_emp: np.ndarray,
    mean_field: np.ndarray,
) -> np.ndarray:
    """Ensemble-average running cost at every step node.

    Works from sufficient statistics only: `second` is the empirical second
    moment E[x x^T] per node, `mean_emp` the empirical mean, `mean_field`
    the mean-field input the policy saw (exact mean or ensemble average).
    With controls u = Theta x + c, c = Thetabar y + v, every term of the
    cost is an exact contraction of these, so the result equals a per-path
    evaluation up to roundoff.
    """
    Qn = tab.Q[::2]
    Sn = tab.S[::2]
    Rn = tab.R[::2]
    qn = tab.q[::2]
    rhon = tab.rho[::2]
    Qbn = tab.Qbar[::2]
    Sbn = tab.Sbar[::2]
    Rbn = tab.Rbar[::2]
    Thn = tab.Theta[::2]
    Tbn = tab.Thetabar[::2]
    Thhn = tab.Theta_hat[::2]
    vn = tab.v[::2]
    TS = np.einsum("kji,kjl->kil", Thn, Sn)
    quad_w = (
        Qn
        + TS
        + TS.transpose(0, 2, 1)
        + np.einsum("kai,kab,kbj->kij", Thn, Rn, Thn)
    )
    RT = np.einsum("kab,kbj->kaj", Rn, Thn)
    theta_rho = np.einsum("kji,kj->ki", Thn, rhon)
    out = np.empty(node_phase.size)
    for a in range(0, node_phase.size, _COST_CHUNK):
        b = min(a + _COST_CHUNK, node_phase.size)
        ph = node_phase[a:b]
        M = second[a:b]
        xb = mean_emp[a:b]
        yb = mean_field[a:b]
        c = np.einsum("kij,kj->ki", Tbn[ph], yb) + vn[ph]
        ub = np.einsum("kij,kj->ki", Thhn[ph], yb) + vn[ph]
        lin_w = (
            np.einsum("kji,kj->ki", Sn[ph], c)
            + np.einsum("kji,kj->ki", RT[ph], c)
            + qn[ph]
            + theta_rho[ph]
        )
        out[a:b] = (
            np.einsum("kij,kij->k", quad_w[ph], M)
            + 2.0 * np.einsum("ki,ki->k", lin_w, xb)
            + np.einsum("ki,kij,kj->k", c, Rn[ph], c)
            + 2.0 * np.einsum("ki,ki->k", rhon[ph], c)
            + np.einsum("ki,kij,kj->k", yb, Qbn[ph], yb)
            + 2.0 * np.einsum("ki,kij,kj->k", ub, Sbn[ph], yb)
            + np.einsum("ki,kij,kj->k", ub, Rbn[ph], ub)
        )
    return out


def simulate_ensemble(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    x: Sequence[float],
    config: SimulationConfig,
    t0: float = 0.0,
    snapshot_times: Optional[Sequence[float]] = None,
    check_admissible: bool = True,
) -> PathEnsemble:
    """Simulate an ensemble started from the deterministic point x at t0.

    Raises NotAdmissible when the closed loop fails the stability
    certificate (skip with check_admissible=False when the caller already
    holds one).  Snapshot times are absolute and must sit on the step grid.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise ValidationError(f"x must have shape ({model.n},), got {x.shape}")
    per = int(round(model.tau / config.dt))
    if per < 1 or abs(per * config.dt - model.tau) > 1e-12 * model.tau:
        raise ValidationError(
            f"dt={config.dt!r} does not divide the period {model.tau!r}"
        )
    steps = int(round(config.horizon / config.dt))
    if steps < 1 or abs(steps * config.dt - config.horizon) > 1e-9 * max(
        model.tau, config.horizon
    ):
        raise ValidationError(
            f"horizon={config.horizon!r} is not a multiple of dt={config.dt!r}"
        )
    offset = _grid_index(t0, config.dt, model.tau, "t0") % per

    if check_admissible:
        cert = certify(model, policy)
        if not cert.admissible:
            raise NotAdmissible(
                "closed loop is not admissible: spectral radii "
                f"mean={cert.rho_mean:.6g}, second={cert.rho_second:.6g}"
            )

    tab = CoefficientTables(model, policy, per)
    dt = config.dt
    sq_dt = math.sqrt(dt)
    snap_ks = _snapshot_steps(config, steps, t0, snapshot_times, dt, model.tau)
    n = model.n
    N = config.paths

    exact = config.mode == "exact-mean"
    node_phase = (offset + np.arange(steps + 1)) % per
    phase_list = node_phase[:-1].tolist()

    # Node-grid table views and the fused drift map I + dt*(A + B Theta).
    drift_map = np.eye(n) + dt * tab.drift_state[::2]
    diff_state = np.ascontiguousarray(tab.diff_state[::2])
    if exact:
        mean_path = _mean_series(tab, x, steps, offset)
        shift = (
            np.einsum(
                "kij,kj->ki", tab.agg_diff[::2][node_phase[:-1]], mean_path[:-1]
            )
            + tab.diff_affine[::2][node_phase[:-1]]
        )
    else:
        drift_mean = tab.drift_mean[::2]
        drift_affine = tab.drift_affine[::2]
        diff_mean = tab.diff_mean[::2]
        diff_affine = tab.diff_affine[::2]
        mean_path = np.empty((steps + 1, n))

    states = np.empty((N, snap_ks.size, n))
    means = np.empty((snap_ks.size, n))
    track = config.accumulate_cost
    if track:
        sum_x = np.empty((steps + 1, n))
        sum_xx = np.empty((steps + 1, n, n))

    gens = path_streams(config.seed, N)
    # State is held (n, paths) so per-step work is a pair of small gemms.
    # In exact-mean mode Z is the fluctuation around the exact mean.
    Z = np.zeros((n, N))
    if not exact:
        Z += x[:, None]
    buf_d = np.empty_like(Z)
    buf_f = np.empty_like(Z)
    dW = np.empty((min(_CHUNK_STEPS, steps), N))

    snap_list = snap_ks.tolist()
    snap_ptr = 0
    next_snap = snap_list[0]
    k = 0
    while k < steps:
        length = min(_CHUNK_STEPS, steps - k)
        block = _noise_block(gens, length)
        np.multiply(block.T, sq_dt, out=dW[:length])
        if exact:
            for j in range(length):
                if track:
                    Z.sum(axis=1, out=sum_x[k])
                    np.matmul(Z, Z.T, out=sum_xx[k])
                if k == next_snap:
                    states[:, snap_ptr, :] = Z.T + mean_path[k]
                    means[snap_ptr] = mean_path[k]
                    snap_ptr += 1
                    next_snap = (
                        snap_list[snap_ptr] if snap_ptr < len(snap_list) else -1
                    )
                i = phase_list[k]
                np.matmul(drift_map[i], Z, out=buf_d)
                np.matmul(diff_state[i], Z, out=buf_f)
                buf_f += shift[k, :, None]
                buf_f *= dW[j]
                buf_d += buf_f
                Z, buf_d = buf_d, Z
                k += 1
        else:
            for j in range(length):
                if track:
                    Z.sum(axis=1, out=sum_x[k])
                    np.matmul(Z, Z.T, out=sum_xx[k])
                    xbar = sum_x[k] / N
                else:
                    xbar = Z.sum(axis=1) / N
                mean_path[k] = xbar
                if k == next_snap:
                    states[:, snap_ptr, :] = Z.T
                    means[snap_ptr] = xbar
                    snap_ptr += 1
                    next_snap = (
                        snap_list[snap_ptr] if snap_ptr < len(snap_list) else -1
                    )
                i = phase_list[k]
                np.matmul(drift_map[i], Z, out=buf_d)
                buf_d += (dt * (drift_mean[i] @ xbar + drift_affine[i]))[:, None]
                np.matmul(diff_state[i], Z, out=buf_f)
                buf_f += (diff_mean[i] @ xbar + diff_affine[i])[:, None]
                buf_f *= dW[j]
                buf_d += buf_f
                Z, buf_d = buf_d, Z
                k += 1
        if not np.all(np.isfinite(Z)):
            raise NonFiniteState(f"ensemble state left the finite range by step {k}")

    if track:
        Z.sum(axis=1, out=sum_x[steps])
        np.matmul(Z, Z.T, out=sum_xx[steps])
    if not exact:
        mean_path[steps] = Z.sum(axis=1) / N
    if steps == next_snap:
        if exact:
            states[:, snap_ptr, :] = Z.T + mean_path[steps]
        else:
            states[:, snap_ptr, :] = Z.T
        means[snap_ptr] = mean_path[steps]

    cost = None
    if track:
        emp_mean = sum_x / N
        emp_second = sum_xx / N
        if exact:
            cross = emp_mean[:, :, None] * mean_path[:, None, :]
            emp_second = (
                emp_second
                + cross
                + cross.transpose(0, 2, 1)
                + mean_path[:, :, None] * mean_path[:, None, :]
            )
            emp_mean = emp_mean + mean_path
        cost = _cost_series(tab, node_phase, emp_second, emp_mean, mean_path)

    times = t0 + snap_ks * dt
    cost_times = t0 + dt * np.arange(steps + 1) if cost is not None else None
    return PathEnsemble(
        model=model,
        policy=policy,
        config=config,
        mode=config.mode,
        t0=t0,
        times=times,
        states=states,
        means=means,
        cost_times=cost_times,
        cost_values=cost,
    )


def running_cost(
    model: PeriodicModel,
    t: float,
    x: Sequence[float],
    mean_x: Optional[Sequence[float]] = None,
    u: Optional[Sequence[float]] = None,
    mean_u: Optional[Sequence[float]] = None,
    policy: Optional[FeedbackPolicy] = None,
) -> float:
    """Running cost at one time, averaged over paths when x is 2-d.

    Either pass controls explicitly or pass a policy to derive them.  The
    mean arguments default to the ensemble average (2-d x) or to x itself
    (single path), matching the exact-mean convention only when the caller
    supplies the exact mean.
    """
    sample = eval_coefficients(model, t)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.shape[1] != model.n:
        raise ValidationError(f"state dimension mismatch: {pts.shape[1]} != {model.n}")
    if mean_x is None:
        xbar = pts.mean(axis=0)
    else:
        xbar = np.asarray(mean_x, dtype=float)
    if u is None:
        if policy is None:
            raise ValidationError("need either explicit controls or a policy")
        theta = policy.theta_at(t)
        shift = policy.thetabar_at(t) @ xbar + policy.v_at(t)
        ctrl = pts @ theta.T + shift
        ubar = policy.theta_hat_at(t) @ xbar + policy.v_at(t)
    else:
        ctrl = np.asarray(u, dtype=float)
        if ctrl.ndim == 1:
            ctrl = ctrl[None, :]
        if ctrl.shape != (pts.shape[0], model.m):
            raise ValidationError(
                f"controls must have shape ({pts.shape[0]}, {model.m})"
            )
        ubar = ctrl.mean(axis=0) if mean_u is None else np.asarray(mean_u, dtype=float)
    per_path = (
        np.einsum("pi,ij,pj->p", pts, sample.Q, pts)
        + 2.0 * np.einsum("pi,ij,pj->p", ctrl, sample.S, pts)
        + np.einsum("pi,ij,pj->p", ctrl, sample.R, ctrl)
        + 2.0 * pts @ sample.q
        + 2.0 * ctrl @ sample.rho
    )
    scalar = (
        xbar @ sample.Qbar @ xbar
        + 2.0 * ubar @ sample.Sbar @ xbar
        + ubar @ sample.Rbar @ ubar
    )
    return float(per_path.mean() + scalar)


@dataclass(frozen=True)
class TimeAverage:
    """Long-run cost estimate with a batch-means standard error."""

    value: float
    stderr: float
    batches: int
    burn_in: float
    window: float


def time_average_cost(
    ensemble: PathEnsemble, burn_in: float = 0.0, batches: int = 20
) -> TimeAverage:
    """Time average of the ensemble cost series past a burn-in offset.

    The standard error comes from batch means over contiguous windows; at
    least `batches` full windows of two or more steps must remain after
    burn-in or InsufficientData is raised.  Leftover steps that do not fill
    a whole window are discarded from the front, extending the burn-in.
    """
    if ensemble.cost_values is None:
        raise InsufficientData("ensemble was simulated without a cost series")
    if batches < 2:
        raise ValidationError("batches must be at least 2")
    if burn_in < 0.0:
        raise ValidationError("burn_in must be nonnegative")
    rel = ensemble.cost_times - ensemble.t0
    mask = rel >= burn_in - 1e-12
    vals = ensemble.cost_values[mask]
    if vals.size < 2:
        raise InsufficientData("burn-in leaves fewer than two cost samples")
    dt = ensemble.config.dt
    total = vals.size - 1
    estimate = (0.5 * vals[0] + vals[1:-1].sum() + 0.5 * vals[-1]) / total
    width = total // batches
    if width < 2:
        raise InsufficientData(
            f"window after burn-in holds {total} steps, too few for "
            f"{batches} batches of at least 2 steps"
        )
    start = total - width * batches
    means = np.empty(batches)
    for b in range(batches):
        seg = vals[start + b * width : start + (b + 1) * width + 1]
        means[b] = (0.5 * seg[0] + seg[1:-1].sum() + 0.5 * seg[-1]) / width
    stderr = float(means.std(ddof=1) / math.sqrt(batches))
    return TimeAverage(
        value=float(estimate),
        stderr=stderr,
        batches=batches,
        burn_in=burn_in,
        window=dt * total,
    )


def law_at(ensemble: PathEnsemble, t: float) -> EmpiricalMeasure:
    """Empirical law at a stored snapshot time."""
    j = ensemble.snapshot_index(t)
    return EmpiricalMeasure(t=float(ensemble.times[j]), points=ensemble.states[:, j, :].copy())


def wasserstein2(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Quadratic Wasserstein distance between equal-size point clouds.

    Solved exactly: by sorting in dimension one, by optimal assignment
    otherwise.  Clouds above ASSIGNMENT_CAP points are rejected (TooLarge)
    since the assignment solve grows cubically.
    """
    a = np.asarray(mu.points, dtype=float)
    b = np.asarray(nu.points, dtype=float)
    if a.shape != b.shape:
        raise SizeMismatch(
            f"point clouds must match in shape: {a.shape} vs {b.shape}"
        )
    if a.shape[0] > ASSIGNMENT_CAP:
        raise TooLarge(
            f"{a.shape[0]} points exceeds the assignment cap {ASSIGNMENT_CAP}; "
            "subsample first"
        )
    if a.shape[1] == 1:
        diff = np.sort(a[:, 0]) - np.sort(b[:, 0])
        return float(math.sqrt(np.mean(diff * diff)))
    costs = cdist(a, b, "sqeuclidean")
    rows, cols = linear_sum_assignment(costs)
    return float(math.sqrt(costs[rows, cols].mean()))


@dataclass(frozen=True)
class MeasureDiagnostics:
    """Convergence evidence for the periodic long-run law at a fixed phase.

    w2_consecutive[k] compares the law k periods in against the next one;
    floor is the same-law distance between two independent ensembles at the
    final period, the resolution limit of the ensemble size.  The log-linear
    fit runs over periods whose distance still clears twice the floor.
    """

    phase: float
    periods: int
    w2_consecutive: tuple
    floor: float
    fit_periods: tuple
    slope: Optional[float]
    intercept: Optional[float]
    r_squared: Optional[float]
    two_start_w2: Optional[float]
    subsampled: bool
    subsample_seed: int


def _subsampled_law(
    ensemble: PathEnsemble, t: float, cap: int, sub_seed: int
) -> EmpiricalMeasure:
    law = law_at(ensemble, t)
    if law.points.shape[0] <= cap:
        return law
    rng = np.random.Generator(np.random.Philox(key=[sub_seed, 0]))
    idx = rng.choice(law.points.shape[0], size=cap, replace=False)
    return EmpiricalMeasure(t=law.t, points=law.points[idx])


def periodic_measure_diagnostics(
    model: PeriodicModel,
    policy: FeedbackPolicy,
    x: Sequence[float],
    config: SimulationConfig,
    phase: float = 0.0,
    periods: int = 12,
    x_alt: Optional[Sequence[float]] = None,
    subsample_cap: int = 2048,
) -> MeasureDiagnostics:
    """Measure the approach to the periodic long-run law at one phase.

    Runs the primary ensemble plus an independent one (seed+1) for the
    floor, and optionally a third (seed+2) from x_alt to confirm the limit
    ignores the starting point.  Laws larger than subsample_cap are
    subsampled with a recorded auxiliary seed before the assignment solve.
    """
    tau = model.tau
    if not (0.0 <= phase < tau):
        raise ValidationError(f"phase must lie in [0, {tau!r}), got {phase!r}")
    if periods < 2:
        raise ValidationError("need at least 2 periods of snapshots")
    need = phase + periods * tau
    if config.horizon < need - 1e-9 * tau:
        raise ValidationError(
            f"horizon {config.horizon!r} too short for phase + periods*tau = {need!r}"
        )
    snap_times = [phase + k * tau for k in range(periods + 1)]
    base = replace(config, accumulate_cost=False)
    sim_a = simulate_ensemble(
        model, policy, x, base, snapshot_times=snap_times, check_admissible=True
    )
    sim_b = simulate_ensemble(
        model,
        policy,
        x,
        replace(base, seed=config.seed + 1),
        snapshot_times=snap_times,
        check_admissible=False,
    )
    sub_seed = config.seed + 7919
    cap = min(subsample_cap, ASSIGNMENT_CAP)
    laws = [
        _subsampled_law(sim_a, t, cap, sub_seed + k)
        for k, t in enumerate(snap_times)
    ]
    w2 = tuple(
        wasserstein2(laws[k], laws[k + 1]) for k in range(periods)
    )
    last = snap_times[-1]
    floor = wasserstein2(
        _subsampled_law(sim_a, last, cap, sub_seed + periods),
        _subsampled_law(sim_b, last, cap, sub_seed + periods + 1),
    )

    threshold = max(2.0 * floor, 1e-300)
    fit_ks = [k for k, val in enumerate(w2) if val > threshold]
    if len(fit_ks) < 2:
        fit_ks = [k for k, val in enumerate(w2) if val > 0.0][:2]
    slope = intercept = r_squared = None
    if len(fit_ks) >= 2:
        ks = np.asarray(fit_ks, dtype=float)
        logs = np.log([w2[k] for k in fit_ks])
        design = np.column_stack([ks, np.ones_like(ks)])
        coef, *_ = np.linalg.lstsq(design, logs, rcond=None)
        slope, intercept = float(coef[0]), float(coef[1])
        fitted = design @ coef
        ss_res = float(np.sum((logs - fitted) ** 2))
        ss_tot = float(np.sum((logs - logs.mean()) ** 2))
        r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot

    two_start = None
    if x_alt is not None:
        sim_c = simulate_ensemble(
            model,
            policy,
            x_alt,
            replace(base, seed=config.seed + 2),
            snapshot_times=[last],
            check_admissible=False,
        )
        two_start = wasserstein2(
            _subsampled_law(sim_a, last, cap, sub_seed + periods),
            _subsampled_law(sim_c, last, cap, sub_seed + periods + 2),
        )

    return MeasureDiagnostics(
        phase=phase,
        periods=periods,
        w2_consecutive=w2,
        floor=floor,
        fit_periods=tuple(fit_ks),
        slope=slope,
        intercept=intercept,
        r_squared=r_squared,
        two_start_w2=two_start,
        subsampled=config.paths > cap,
        subsample_seed=sub_seed,
    )
