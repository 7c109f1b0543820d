"""Finite-horizon Riccati solvers, forward rollout, and a brute-force oracle.

The backward pass produces value matrices P[0..T-1] and gains K[0..T-2] for
a time-varying schedule. An affine extension handles known additive
disturbances exactly. A stacked quadratic-program oracle solves small
instances by normal equations and is used only for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostSchedule
from .systems import LinearSystem, _freeze

try:
    from scipy.linalg import solve_discrete_are as _scipy_dare
except ImportError:  # pragma: no cover
    _scipy_dare = None


class DareConvergenceError(RuntimeError):
    """Fixed-point iteration did not reach the requested tolerance."""


class OracleSizeError(ValueError):
    """Instance exceeds the brute-force oracle's size cap."""


class TrajectoryOverflowError(FloatingPointError):
    """A simulated state became non-finite."""

    def __init__(self, time_index: int, message: str | None = None):
        self.time_index = time_index
        super().__init__(
            message or f"non-finite state at time index {time_index}"
        )


@dataclass(frozen=True)
class RiccatiSolution:
    """Backward-pass value matrices and gains, plus the schedule they solve.

    ``P`` stacks the T value matrices as a (T, n, n) array and ``K`` the
    T-1 gains as (T-1, m, n), so ``P[i]`` and ``K[i]`` index per time step.
    """

    P: np.ndarray
    K: np.ndarray
    schedule: CostSchedule

    def __post_init__(self):
        object.__setattr__(self, "P", _freeze_stack(self.P))
        object.__setattr__(self, "K", _freeze_stack(self.K))


def _freeze_stack(seq) -> np.ndarray:
    arr = seq if isinstance(seq, np.ndarray) else np.stack([np.asarray(M) for M in seq])
    return _freeze(arr)


@dataclass(frozen=True)
class AffineRiccatiSolution:
    """Riccati solution extended with affine value terms q and feedforward k.

    With all known disturbances zero, q and k vanish and the solution
    reduces to the plain quadratic one.
    """

    P: np.ndarray
    K: np.ndarray
    q: np.ndarray
    k: np.ndarray
    schedule: CostSchedule

    def __post_init__(self):
        object.__setattr__(self, "P", _freeze_stack(self.P))
        object.__setattr__(self, "K", _freeze_stack(self.K))
        object.__setattr__(self, "q", _freeze_stack(self.q))
        object.__setattr__(self, "k", _freeze_stack(self.k))


@dataclass(frozen=True)
class Trajectory:
    """Realized states, controls, and total cost of one closed-loop run."""

    x: np.ndarray
    u: np.ndarray
    cost: float

    def __post_init__(self):
        object.__setattr__(self, "x", _freeze(np.atleast_2d(self.x)))
        object.__setattr__(self, "u", _freeze(np.atleast_2d(self.u)))
        object.__setattr__(self, "cost", float(self.cost))


def schedule_cost(x, u, schedule) -> float:
    """Total quadratic cost of a state/control pair under a schedule."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    T = len(schedule.Q)
    if x.shape[0] != T:
        raise ValueError(f"expected {T} states, got {x.shape[0]}")
    if u.shape[0] != T - 1:
        raise ValueError(f"expected {T - 1} controls, got {u.shape[0]}")
    total = 0.0
    for t in range(T - 1):
        total += float(x[t] @ schedule.Q[t] @ x[t])
        total += float(u[t] @ schedule.R[t] @ u[t])
    total += float(x[T - 1] @ schedule.Q[T - 1] @ x[T - 1])
    return total


def backward_riccati(sys: LinearSystem, schedule: CostSchedule) -> RiccatiSolution:
    """Backward pass for the finite-horizon time-varying problem.

    P[T-1] is the terminal state cost; each earlier step uses
    K[i] = -(R[i] + B' P[i+1] B)^-1 B' P[i+1] A and
    P[i] = A' P[i+1] A + Q[i] + A' P[i+1] B K[i], with P re-symmetrized
    to suppress drift.
    """
    A, B = sys.A, sys.B
    if schedule.n != sys.n or schedule.m != sys.m:
        raise ValueError("schedule dimensions do not match the system")
    AT, BT = A.T.copy(), B.T.copy()
    scalar_control = sys.m == 1
    T = schedule.horizon
    P = [None] * T
    K = [None] * (T - 1)
    P[T - 1] = np.asarray(schedule.Q[T - 1], dtype=float)
    for i in range(T - 2, -1, -1):
        Pn = P[i + 1]
        PnA = Pn @ A
        PnB = Pn @ B
        G = schedule.R[i] + BT @ PnB
        if scalar_control:
            Ki = (BT @ PnA) / (-G[0, 0])
        else:
            Ki = -np.linalg.solve(G, BT @ PnA)
        Pi = AT @ PnA + schedule.Q[i] + (AT @ PnB) @ Ki
        P[i] = 0.5 * (Pi + Pi.T)
        K[i] = Ki
    return RiccatiSolution(tuple(P), tuple(K), schedule)


def frozen_backward_sweep(sys: LinearSystem, schedule: CostSchedule, freeze_indices):
    """Backward passes for many frozen schedules in one batched recursion.

    ``freeze_indices`` lists the freeze points s; the pass for s uses entry
    i of the schedule when i <= s and repeats entry s afterwards. Returns
    (P_all, K_all) with shapes (S, T, n, n) and (S, T-1, m, n), ordered as
    the sorted unique freeze indices.
    """
    A, B = sys.A, sys.B
    AT, BT = A.T.copy(), B.T.copy()
    T = schedule.horizon
    n, m = sys.n, sys.m
    s_arr = np.array(sorted(set(int(s) for s in freeze_indices)), dtype=int)
    if s_arr.size == 0:
        raise ValueError("freeze_indices must be nonempty")
    if s_arr[0] < 0 or s_arr[-1] > T - 1:
        raise ValueError("freeze indices must lie in [0, T - 1]")
    S = s_arr.size
    Qs = np.stack([np.asarray(M, dtype=float) for M in schedule.Q])
    Rs = np.stack([np.asarray(M, dtype=float) for M in schedule.R])
    Q_frozen = Qs[s_arr]
    R_frozen = Rs[np.minimum(s_arr, T - 2)]
    P_all = np.empty((S, T, n, n))
    K_all = np.empty((S, T - 1, m, n))
    P = Q_frozen.copy()
    P_all[:, T - 1] = P
    scalar_control = m == 1
    for i in range(T - 2, -1, -1):
        cut = int(np.searchsorted(s_arr, i))
        Qi = Q_frozen.copy()
        Qi[cut:] = Qs[i]
        Ri = R_frozen.copy()
        Ri[cut:] = Rs[i]
        # Flattened products keep each step at a few large BLAS calls.
        PA = (P.reshape(S * n, n) @ A).reshape(S, n, n)
        PB = (P.reshape(S * n, n) @ B).reshape(S, n, m)
        ATPA = np.tensordot(A, PA, axes=(0, 1)).transpose(1, 0, 2)
        ATPB = np.tensordot(A, PB, axes=(0, 1)).transpose(1, 0, 2)
        BPA = np.tensordot(B, PA, axes=(0, 1)).transpose(1, 0, 2)
        G = Ri + np.tensordot(B, PB, axes=(0, 1)).transpose(1, 0, 2)
        if scalar_control:
            K = BPA / (-G)
        else:
            K = -np.linalg.solve(G, BPA)
        P = ATPA + Qi + ATPB @ K
        P = 0.5 * (P + P.transpose(0, 2, 1))
        P_all[:, i] = P
        K_all[:, i] = K
    return s_arr, P_all, K_all


def affine_terms(sys: LinearSystem, solution: RiccatiSolution, known_w, last=None):
    """Affine value vectors q and feedforward controls k for known disturbances.

    ``known_w`` is a (T-1, n) array. Indices above ``last`` are assumed zero
    and skipped; by default the full horizon is processed. The recursion is
    q[T-1] = 0, k[i] = -(R[i] + B' P[i+1] B)^-1 B' (P[i+1] w[i] + q[i+1]),
    q[i] = (A + B K[i])' (q[i+1] + P[i+1] w[i]).
    """
    A, B = sys.A, sys.B
    schedule = solution.schedule
    T = schedule.horizon
    w = np.zeros((T - 1, sys.n)) if known_w is None else np.asarray(known_w, dtype=float)
    if w.shape != (T - 1, sys.n):
        raise ValueError(f"known_w must have shape {(T - 1, sys.n)}, got {w.shape}")
    q = [np.zeros(sys.n)] * T
    k = [np.zeros(sys.m)] * (T - 1)
    start = T - 2 if last is None else min(int(last), T - 2)
    for i in range(start, -1, -1):
        Pn = solution.P[i + 1]
        Pw = Pn @ w[i]
        G = schedule.R[i] + B.T @ Pn @ B
        k[i] = -np.linalg.solve(G, B.T @ (Pw + q[i + 1]))
        q[i] = (A + B @ solution.K[i]).T @ (q[i + 1] + Pw)
    return tuple(q), tuple(k)


def affine_backward_riccati(
    sys: LinearSystem, schedule: CostSchedule, known_w
) -> AffineRiccatiSolution:
    """Exact minimizer structure for the problem with known disturbances."""
    base = backward_riccati(sys, schedule)
    q, k = affine_terms(sys, base, known_w)
    return AffineRiccatiSolution(base.P, base.K, q, k, schedule)


def solve_dare(
    A,
    B,
    Q,
    R,
    tol: float = 1e-10,
    max_iter: int = 100000,
    init=None,
) -> np.ndarray:
    """Fixed point of the Riccati map P -> Q + A'PA - A'PB(R + B'PB)^-1 B'PA.

    Iterates until the step size drops below tol * max(1, ||P||). When scipy
    is available its direct solver seeds the iteration, which then converges
    in a handful of steps; otherwise the iteration starts at Q.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    if A.ndim == 0 or A.ndim == 1:
        A = A.reshape(1, 1)
    if B.ndim < 2:
        B = B.reshape(A.shape[0], -1)
    if Q.ndim < 2:
        Q = Q.reshape(1, 1)
    if R.ndim < 2:
        R = R.reshape(1, 1)
    P = None
    if init is not None:
        P = 0.5 * (np.asarray(init, dtype=float) + np.asarray(init, dtype=float).T)
    elif _scipy_dare is not None:
        try:
            cand = _scipy_dare(A, B, Q, R)
            if np.all(np.isfinite(cand)):
                P = 0.5 * (cand + cand.T)
        except Exception:
            P = None
    if P is None:
        P = Q.copy()
    for _ in range(max_iter):
        PA = P @ A
        PB = P @ B
        G = R + B.T @ PB
        Pn = Q + A.T @ PA - (A.T @ PB) @ np.linalg.solve(G, B.T @ PA)
        Pn = 0.5 * (Pn + Pn.T)
        step = np.linalg.norm(Pn - P, 2)
        if step <= tol * max(1.0, np.linalg.norm(Pn, 2)):
            return Pn
        P = Pn
    raise DareConvergenceError(
        f"no fixed point within {max_iter} iterations at tolerance {tol}"
    )


def rollout(sys: LinearSystem, sol, x0, w=None) -> Trajectory:
    """Forward-simulate the closed loop u = K x (+ k) and fill in the cost.

    The cost is evaluated under the schedule the solution was built from.
    Raises TrajectoryOverflowError with the failing time index if a state
    becomes non-finite.
    """
    A, B = sys.A, sys.B
    schedule = sol.schedule
    T = schedule.horizon
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != sys.n:
        raise ValueError(f"x0 must have length {sys.n}")
    w_arr = np.zeros((T - 1, sys.n)) if w is None else np.asarray(w, dtype=float)
    if w_arr.shape != (T - 1, sys.n):
        raise ValueError(f"w must have shape {(T - 1, sys.n)}")
    feedforward = getattr(sol, "k", None)
    x = np.zeros((T, sys.n))
    u = np.zeros((T - 1, sys.m))
    x[0] = x0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T - 1):
            ut = sol.K[t] @ x[t]
            if feedforward is not None:
                ut = ut + feedforward[t]
            xn = A @ x[t] + B @ ut + w_arr[t]
            if not np.all(np.isfinite(xn)):
                raise TrajectoryOverflowError(t + 1)
            u[t] = ut
            x[t + 1] = xn
        cost = schedule_cost(x, u, schedule)
    if not np.isfinite(cost):
        raise TrajectoryOverflowError(T - 1, "non-finite cost")
    return Trajectory(x, u, cost)


def brute_force_lqr_oracle(
    sys: LinearSystem, schedule: CostSchedule, w=None
) -> Trajectory:
    """Exact minimizer of a small instance via stacked normal equations.

    States are expressed affinely in the stacked control vector, and the
    strictly convex quadratic is minimized directly. Only intended as an
    independent cross-check; refuses instances with T * m > 64.
    """
    T = schedule.horizon
    n, m = sys.n, sys.m
    if T * m > 64:
        raise OracleSizeError(
            f"oracle limited to T * m <= 64, got {T} * {m} = {T * m}"
        )
    A, B = sys.A, sys.B
    w_arr = np.zeros((T - 1, n)) if w is None else np.asarray(w, dtype=float)
    if w_arr.shape != (T - 1, n):
        raise ValueError(f"w must have shape {(T - 1, n)}")
    nu = (T - 1) * m
    # c holds the uncontrolled trajectory, F the control-to-state map:
    # x[t] = c[t] + F[t] @ u_stacked.
    c = np.zeros((T, n))
    c[0] = sys.x0
    F = np.zeros((T, n, nu))
    for t in range(1, T):
        c[t] = A @ c[t - 1] + w_arr[t - 1]
        F[t] = A @ F[t - 1]
        F[t][:, (t - 1) * m : t * m] += B
    H = np.zeros((nu, nu))
    g = np.zeros(nu)
    for t in range(T):
        QF = schedule.Q[t] @ F[t]
        H += F[t].T @ QF
        g += QF.T @ c[t]
    for j in range(T - 1):
        H[j * m : (j + 1) * m, j * m : (j + 1) * m] += schedule.R[j]
    u_stacked = np.linalg.solve(H, -g)
    u = u_stacked.reshape(T - 1, m)
    x = np.zeros((T, n))
    x[0] = sys.x0
    for t in range(T - 1):
        x[t + 1] = A @ x[t] + B @ u[t] + w_arr[t]
    return Trajectory(x, u, schedule_cost(x, u, schedule))
