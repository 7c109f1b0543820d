"""Control policies: clairvoyant optimum, prediction tracking, and a
receding-horizon baseline.

The prediction-tracking policy plans a full-horizon trajectory from the
initial state under the schedule frozen at the preview boundary, then
steers toward the planned state with a fixed stabilizing gain. The
baseline re-solves a short window from the current state at every step,
capping the tail with the fixed-point value matrix of the upper cost
bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostBounds, CostSchedule, FrozenScheduleView
from .riccati import (
    RiccatiSolution,
    Trajectory,
    TrajectoryOverflowError,
    affine_terms,
    backward_riccati,
    frozen_backward_sweep,
    rollout,
    schedule_cost,
    solve_dare,
)
from .systems import LinearSystem, _freeze, spectral_radius

DEFAULT_TRACKING_POLES_4 = (1e-3, 6e-3, 4e-3, 3e-3)


@dataclass(frozen=True)
class PolicyConfig:
    """Preview length W and the fixed tracking gain K_track."""

    W: int
    K_track: np.ndarray

    def __post_init__(self):
        if int(self.W) != self.W or self.W < 0:
            raise ValueError("W must be a nonnegative integer")
        object.__setattr__(self, "W", int(self.W))
        K = np.atleast_2d(np.asarray(self.K_track, dtype=float))
        object.__setattr__(self, "K_track", _freeze(K))


def default_tracking_poles(n: int):
    """Small real pole set used for the benchmark tracking gains."""
    if n == 4:
        return DEFAULT_TRACKING_POLES_4
    return tuple(1e-3 * (i + 1) for i in range(n))


def validate_policy_config(cfg: PolicyConfig, sys: LinearSystem, T: int):
    """Check W against the horizon and that the tracking loop is stable."""
    if not 0 <= cfg.W <= T - 2:
        raise ValueError(f"W must satisfy 0 <= W <= T - 2 = {T - 2}, got {cfg.W}")
    if cfg.K_track.shape != (sys.m, sys.n):
        raise ValueError(
            f"K_track must have shape {(sys.m, sys.n)}, got {cfg.K_track.shape}"
        )
    rho = spectral_radius(sys.A + sys.B @ cfg.K_track)
    if not rho < 1.0:
        raise ValueError(
            f"tracking gain does not stabilize the system: rho(A + B K) = {rho}"
        )


class FrozenPlanner:
    """Caches backward passes and nominal plans per freeze index.

    The plan under a schedule frozen at index s depends on s alone in the
    disturbance-free case, so repeated solves across time steps and across
    preview lengths reuse the same backward pass. Known disturbances only
    add affine terms on top of the cached quadratic pass.
    """

    def __init__(self, sys: LinearSystem, schedule: CostSchedule):
        self.sys = sys
        self.schedule = schedule
        self.T = schedule.horizon
        self._passes: dict[int, RiccatiSolution] = {}
        self._nominal: dict[int, tuple] = {}

    def prepare(self, W: int):
        """Batch-solve every frozen pass a preview-W run will touch."""
        needed = {min(t + W, self.T - 1) for t in range(self.T - 1)}
        needed -= self._passes.keys()
        if not needed:
            return
        s_arr, P_all, K_all = frozen_backward_sweep(self.sys, self.schedule, needed)
        for idx, s in enumerate(s_arr):
            self._passes[int(s)] = RiccatiSolution(
                P_all[idx], K_all[idx], FrozenScheduleView(self.schedule, int(s))
            )
        # Nominal plans for the new passes, rolled forward as one batch.
        T, n, m = self.T, self.sys.n, self.sys.m
        AT = self.sys.A.T.copy()
        BT = self.sys.B.T.copy()
        X = np.empty((s_arr.size, T, n))
        U = np.empty((s_arr.size, T - 1, m))
        X[:, 0] = self.sys.x0
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(T - 1):
                U[:, i] = (K_all[:, i] @ X[:, i, :, None])[..., 0]
                X[:, i + 1] = X[:, i] @ AT + U[:, i] @ BT
        if not np.all(np.isfinite(X)):
            bad = int(np.argwhere(~np.isfinite(X).all(axis=(0, 2)))[0, 0])
            raise TrajectoryOverflowError(bad, "non-finite planned state")
        for idx, s in enumerate(s_arr):
            self._nominal[int(s)] = (X[idx], U[idx])

    def solution(self, s: int) -> RiccatiSolution:
        """Backward pass for the schedule frozen at index s."""
        s = min(int(s), self.T - 1)
        sol = self._passes.get(s)
        if sol is None:
            sol = backward_riccati(self.sys, FrozenScheduleView(self.schedule, s))
            self._passes[s] = sol
        return sol

    def nominal_plan(self, s: int):
        """Disturbance-free plan (states, controls) from the initial state."""
        s = min(int(s), self.T - 1)
        plan = self._nominal.get(s)
        if plan is None:
            traj = rollout(self.sys, self.solution(s), self.sys.x0)
            plan = (traj.x, traj.u)
            self._nominal[s] = plan
        return plan

    def plan(self, t: int, W: int, known_w=None):
        """Full-horizon plan at time t with preview W.

        ``known_w`` may be the full disturbance array or any prefix of it;
        entries at indices 0..t enter the planning dynamics and later ones
        are treated as zero.
        """
        s = min(t + W, self.T - 1)
        if known_w is None:
            return self.nominal_plan(s)
        w = np.atleast_2d(np.asarray(known_w, dtype=float))
        if w.shape[1] != self.sys.n:
            raise ValueError(f"known_w rows must have length {self.sys.n}")
        upto = min(t + 1, self.T - 1, w.shape[0])
        if not np.any(w[:upto]):
            return self.nominal_plan(s)
        sol = self.solution(s)
        w_plan = np.zeros((self.T - 1, self.sys.n))
        w_plan[:upto] = w[:upto]
        q, k = affine_terms(self.sys, sol, w_plan, last=t)
        A, B = self.sys.A, self.sys.B
        xs = np.zeros((self.T, self.sys.n))
        us = np.zeros((self.T - 1, self.sys.m))
        xs[0] = self.sys.x0
        for i in range(self.T - 1):
            us[i] = sol.K[i] @ xs[i] + k[i]
            xs[i + 1] = A @ xs[i] + B @ us[i] + w_plan[i]
        return xs, us


def predict_trajectory(
    sys: LinearSystem,
    schedule: CostSchedule,
    t: int,
    W: int,
    known_w=None,
    planner: FrozenPlanner | None = None,
):
    """Predicted optimal states and controls given the information at time t.

    Plans from the initial state using entries revealed up to t + W and the
    frozen tail, with disturbances known up to index t. Returns the full
    horizon (states, controls) pair.
    """
    T = schedule.horizon
    if not 0 <= t <= T - 2:
        raise ValueError(f"t must satisfy 0 <= t <= T - 2 = {T - 2}, got {t}")
    if W < 0:
        raise ValueError("W must be nonnegative")
    if planner is None:
        planner = FrozenPlanner(sys, schedule)
    return planner.plan(t, W, known_w)


def clairvoyant_policy(sys: LinearSystem, schedule: CostSchedule, w=None) -> Trajectory:
    """Full-information optimal trajectory used as the regret comparator.

    With disturbances present, the comparator knows the whole sequence and
    applies the exact affine minimizer.
    """
    if w is not None and np.any(np.asarray(w)):
        from .riccati import affine_backward_riccati

        sol = affine_backward_riccati(sys, schedule, w)
        return rollout(sys, sol, sys.x0, w)
    sol = backward_riccati(sys, schedule)
    return rollout(sys, sol, sys.x0)


def prediction_tracking_policy(
    sys: LinearSystem,
    schedule: CostSchedule,
    cfg: PolicyConfig,
    w=None,
    planner: FrozenPlanner | None = None,
) -> Trajectory:
    """Run the prediction-tracking policy over the whole horizon.

    At each step the policy re-plans under the currently revealed costs and
    applies u = K_track (x - x_planned) + u_planned; the realized state then
    advances with the true disturbance.
    """
    T = schedule.horizon
    validate_policy_config(cfg, sys, T)
    if planner is None:
        planner = FrozenPlanner(sys, schedule)
    planner.prepare(cfg.W)
    A, B = sys.A, sys.B
    w_arr = np.zeros((T - 1, sys.n)) if w is None else np.asarray(w, dtype=float)
    if w_arr.shape != (T - 1, sys.n):
        raise ValueError(f"w must have shape {(T - 1, sys.n)}")
    known = w_arr if np.any(w_arr) else None
    x = np.zeros((T, sys.n))
    u = np.zeros((T - 1, sys.m))
    x[0] = sys.x0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T - 1):
            xs_plan, us_plan = planner.plan(t, cfg.W, known)
            ut = cfg.K_track @ (x[t] - xs_plan[t]) + us_plan[t]
            xn = A @ x[t] + B @ ut + w_arr[t]
            if not np.all(np.isfinite(xn)):
                raise TrajectoryOverflowError(t + 1)
            u[t] = ut
            x[t + 1] = xn
        cost = schedule_cost(x, u, schedule)
    if not np.isfinite(cost):
        raise TrajectoryOverflowError(T - 1, "non-finite cost")
    return Trajectory(x, u, cost)


def mpc_baseline_policy(
    sys: LinearSystem,
    schedule: CostSchedule,
    bounds: CostBounds,
    W: int,
    w=None,
    P_max=None,
) -> Trajectory:
    """Receding-horizon baseline with a fixed worst-case terminal value.

    At each step it solves the W+1 stage problem from the current state with
    the revealed costs and terminal weight P_max, the fixed point computed
    from the upper cost bounds, then applies the first control. Near the end
    of the horizon (terminal index past T-1) the window truncates and the
    true final state cost is used instead.
    """
    T = schedule.horizon
    if not 0 <= W <= T - 2:
        raise ValueError(f"W must satisfy 0 <= W <= T - 2 = {T - 2}, got {W}")
    A, B = sys.A, sys.B
    if P_max is None:
        P_max = solve_dare(A, B, bounds.Q_max, bounds.R_max)
    P_max = np.asarray(P_max, dtype=float)
    w_arr = np.zeros((T - 1, sys.n)) if w is None else np.asarray(w, dtype=float)
    if w_arr.shape != (T - 1, sys.n):
        raise ValueError(f"w must have shape {(T - 1, sys.n)}")
    # The window plan is a pure quadratic from the current state, so the
    # applied control is state feedback with a precomputable gain.
    AT, BT = A.T.copy(), B.T.copy()
    scalar_control = sys.m == 1
    gains = []
    for t in range(T - 1):
        if t + W + 1 > T - 1:
            last_stage = T - 2
            P = np.asarray(schedule.Q[T - 1], dtype=float)
        else:
            last_stage = t + W
            P = P_max
        Kt = None
        for k in range(last_stage, t - 1, -1):
            PA = P @ A
            PB = P @ B
            G = schedule.R[k] + BT @ PB
            if scalar_control:
                Kk = (BT @ PA) / (-G[0, 0])
            else:
                Kk = -np.linalg.solve(G, BT @ PA)
            P = AT @ PA + schedule.Q[k] + (AT @ PB) @ Kk
            P = 0.5 * (P + P.T)
            Kt = Kk
        gains.append(Kt)
    x = np.zeros((T, sys.n))
    u = np.zeros((T - 1, sys.m))
    x[0] = sys.x0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T - 1):
            ut = gains[t] @ x[t]
            xn = A @ x[t] + B @ ut + w_arr[t]
            if not np.all(np.isfinite(xn)):
                raise TrajectoryOverflowError(t + 1)
            u[t] = ut
            x[t + 1] = xn
        cost = schedule_cost(x, u, schedule)
    if not np.isfinite(cost):
        raise TrajectoryOverflowError(T - 1, "non-finite cost")
    return Trajectory(x, u, cost)
