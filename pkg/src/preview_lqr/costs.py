"""Time-varying quadratic cost schedules and Loewner-order utilities.

A schedule holds T state-cost matrices Q[0..T-1] and T-1 control-cost
matrices R[0..T-2]. The preview machinery works with "frozen" schedules
that repeat the last revealed matrices over the unrevealed tail.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass

import numpy as np

from .systems import _freeze


class IncomparableScheduleError(ValueError):
    """The schedule has no Loewner-comparable extremum."""


EIG_TOL = 1e-9


def min_eigenvalue(M) -> float:
    M = np.asarray(M, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def max_eigenvalue(M) -> float:
    M = np.asarray(M, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])


def is_psd(M, tol: float = EIG_TOL) -> bool:
    """Positive semidefinite up to a relative eigenvalue tolerance."""
    eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
    if eigs.size == 0:
        return True
    scale = max(1.0, float(np.abs(eigs).max()))
    return bool(eigs[0] >= -tol * scale)


def loewner_leq(F, G, tol: float = EIG_TOL) -> bool:
    """True when F is below G in the Loewner order (G - F is PSD)."""
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    return is_psd(G - F, tol)


def _check_symmetric(M: np.ndarray, name: str):
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > 1e-9 * scale:
        raise ValueError(f"{name} must be symmetric")


@dataclass(frozen=True)
class CostSchedule:
    """Sequences of state costs Q (length T) and control costs R (length T-1).

    Every Q must be symmetric PSD and every R symmetric positive definite.
    Pass ``validate=False`` to skip the eigenvalue checks when the entries
    are known to be valid by construction.
    """

    Q: tuple
    R: tuple
    validate: InitVar[bool] = True

    def __post_init__(self, validate):
        Q = tuple(np.asarray(M, dtype=float) for M in self.Q)
        R = tuple(np.asarray(M, dtype=float) for M in self.R)
        if len(Q) < 2:
            raise ValueError("a schedule needs at least two state costs")
        if len(R) != len(Q) - 1:
            raise ValueError(
                f"need len(R) = len(Q) - 1, got {len(R)} and {len(Q)}"
            )
        n = Q[0].shape[0]
        m = R[0].shape[0]
        for i, M in enumerate(Q):
            if M.shape != (n, n):
                raise ValueError(f"Q[{i}] has shape {M.shape}, expected {(n, n)}")
        for i, M in enumerate(R):
            if M.shape != (m, m):
                raise ValueError(f"R[{i}] has shape {M.shape}, expected {(m, m)}")
        if validate:
            for i, M in enumerate(Q):
                _check_symmetric(M, f"Q[{i}]")
                if not is_psd(M):
                    raise ValueError(f"Q[{i}] is not positive semidefinite")
            for i, M in enumerate(R):
                _check_symmetric(M, f"R[{i}]")
                if min_eigenvalue(M) <= 0.0:
                    raise ValueError(f"R[{i}] is not positive definite")
        object.__setattr__(self, "Q", tuple(_freeze(M) for M in Q))
        object.__setattr__(self, "R", tuple(_freeze(M) for M in R))

    @property
    def horizon(self) -> int:
        return len(self.Q)

    @property
    def n(self) -> int:
        return self.Q[0].shape[0]

    @property
    def m(self) -> int:
        return self.R[0].shape[0]


@dataclass(frozen=True)
class CostBounds:
    """A priori lower and upper matrices bracketing every schedule entry."""

    Q_min: np.ndarray
    Q_max: np.ndarray
    R_min: np.ndarray
    R_max: np.ndarray

    def __post_init__(self):
        for name in ("Q_min", "Q_max", "R_min", "R_max"):
            M = np.asarray(getattr(self, name), dtype=float)
            _check_symmetric(M, name)
            if min_eigenvalue(M) <= 0.0:
                raise ValueError(f"{name} must be positive definite")
            object.__setattr__(self, name, _freeze(M))
        if not loewner_leq(self.Q_min, self.Q_max):
            raise ValueError("Q_min must be below Q_max in the Loewner order")
        if not loewner_leq(self.R_min, self.R_max):
            raise ValueError("R_min must be below R_max in the Loewner order")


@dataclass(frozen=True)
class CostExtrema:
    """Loewner-order extrema of a schedule's Q and R sequences."""

    Qbar_min: np.ndarray
    Qbar_max: np.ndarray
    Rbar_min: np.ndarray
    Rbar_max: np.ndarray

    def __post_init__(self):
        for name in ("Qbar_min", "Qbar_max", "Rbar_min", "Rbar_max"):
            M = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, _freeze(M))


def verify_bounds(schedule: CostSchedule, bounds: CostBounds) -> bool:
    """True when every schedule entry sits between the configured bounds."""
    for Q in schedule.Q:
        if not (loewner_leq(bounds.Q_min, Q) and loewner_leq(Q, bounds.Q_max)):
            return False
    for R in schedule.R:
        if not (loewner_leq(bounds.R_min, R) and loewner_leq(R, bounds.R_max)):
            return False
    return True


def random_uniform_schedule(
    bounds: CostBounds, T: int, rng: np.random.Generator
) -> CostSchedule:
    """Schedule with entries drawn uniformly on the segment between the bounds.

    Each matrix uses a single scalar blend U ~ Uniform(0, 1), so the whole
    sequence lies on one Loewner chain and extrema always exist.
    """
    if T < 2:
        raise ValueError("T must be at least 2")
    uq = np.asarray(rng.random(T), dtype=float)
    ur = np.asarray(rng.random(T - 1), dtype=float)
    dQ = bounds.Q_max - bounds.Q_min
    dR = bounds.R_max - bounds.R_min
    Q = tuple(bounds.Q_min + u * dQ for u in uq)
    R = tuple(bounds.R_min + u * dR for u in ur)
    return CostSchedule(Q, R, validate=False)


def frozen_schedule(schedule, t: int, W: int) -> CostSchedule:
    """Schedule revealed up to index t + W, with the tail held at that entry.

    Entries at indices <= t + W are kept; later ones repeat the entry at
    t + W. When t + W already reaches the final index the input schedule is
    returned unchanged.
    """
    if t < 0 or W < 0:
        raise ValueError("t and W must be nonnegative")
    T = len(schedule.Q)
    s = t + W
    if s >= T - 1:
        return schedule
    Q = tuple(schedule.Q[i] for i in range(s + 1))
    Q = Q + (schedule.Q[s],) * (T - 1 - s)
    R = tuple(schedule.R[i] for i in range(s + 1))
    R = R + (schedule.R[s],) * (T - 2 - s)
    return CostSchedule(Q, R, validate=False)


class _ClampedSeq:
    """Sequence view returning base[min(i, limit)] without copying."""

    __slots__ = ("_base", "_limit", "_length")

    def __init__(self, base, limit: int, length: int):
        self._base = base
        self._limit = limit
        self._length = length

    def __len__(self) -> int:
        return self._length

    def __getitem__(self, i):
        i = int(i)
        if i < 0:
            i += self._length
        if not 0 <= i < self._length:
            raise IndexError(i)
        return self._base[min(i, self._limit)]

    def __iter__(self):
        return (self[i] for i in range(self._length))


class FrozenScheduleView:
    """Zero-copy equivalent of frozen_schedule for hot paths.

    Entry i reads the underlying schedule at min(i, s), which is exactly
    the frozen construction, without building new matrix tuples.
    """

    __slots__ = ("Q", "R", "_horizon", "_n", "_m")

    def __init__(self, schedule, s: int):
        T = len(schedule.Q)
        s = min(int(s), T - 1)
        if s < 0:
            raise ValueError("freeze index must be nonnegative")
        self.Q = _ClampedSeq(schedule.Q, s, T)
        self.R = _ClampedSeq(schedule.R, min(s, T - 2), T - 1)
        self._horizon = T
        self._n = schedule.Q[0].shape[0]
        self._m = schedule.R[0].shape[0]

    @property
    def horizon(self) -> int:
        return self._horizon

    @property
    def n(self) -> int:
        return self._n

    @property
    def m(self) -> int:
        return self._m


def _loewner_extremum(mats, want_max: bool):
    # A Loewner maximum must maximize the trace, and max-trace candidates
    # coincide when a maximum exists, so checking one candidate decides.
    stack = np.stack([np.asarray(M, dtype=float) for M in mats])
    traces = np.trace(stack, axis1=1, axis2=2)
    idx = int(np.argmax(traces)) if want_max else int(np.argmin(traces))
    cand = stack[idx]
    diffs = (cand - stack) if want_max else (stack - cand)
    diffs = 0.5 * (diffs + np.transpose(diffs, (0, 2, 1)))
    eigs = np.linalg.eigvalsh(diffs)
    scale = np.maximum(1.0, np.abs(eigs).max(axis=1))
    if not np.all(eigs[:, 0] >= -EIG_TOL * scale):
        kind = "maximum" if want_max else "minimum"
        raise IncomparableScheduleError(
            f"no Loewner {kind} exists; fall back to a priori cost bounds"
        )
    return mats[idx]


def sequence_extrema(schedule: CostSchedule) -> CostExtrema:
    """Loewner extrema of the Q and R sequences.

    Raises IncomparableScheduleError when some sequence has no element
    dominating (or dominated by) all others; callers should then fall back
    to the a priori cost bounds.
    """
    return CostExtrema(
        Qbar_min=_loewner_extremum(schedule.Q, want_max=False),
        Qbar_max=_loewner_extremum(schedule.Q, want_max=True),
        Rbar_min=_loewner_extremum(schedule.R, want_max=False),
        Rbar_max=_loewner_extremum(schedule.R, want_max=True),
    )


def _matrix_text(M: np.ndarray) -> str:
    return " ".join(format(v, ".17g") for v in np.asarray(M, dtype=float).ravel())


def _matrix_from_text(text: str, rows: int, cols: int, name: str) -> np.ndarray:
    values = [float(v) for v in text.split()]
    if len(values) != rows * cols:
        raise ValueError(f"{name}: expected {rows * cols} entries, got {len(values)}")
    return np.array(values).reshape(rows, cols)


def schedule_to_config_text(schedule: CostSchedule) -> str:
    """Serialize a schedule as a flat key-value text block.

    Matrices are written row-major with 17 significant digits, so parsing
    reproduces the schedule exactly.
    """
    lines = [
        "type = explicit",
        f"T = {schedule.horizon}",
        f"n = {schedule.n}",
        f"m = {schedule.m}",
    ]
    for i, Q in enumerate(schedule.Q):
        lines.append(f"Q{i} = {_matrix_text(Q)}")
    for i, R in enumerate(schedule.R):
        lines.append(f"R{i} = {_matrix_text(R)}")
    return "\n".join(lines) + "\n"


def schedule_from_config_text(text: str) -> CostSchedule:
    """Parse a schedule from flat key-value text.

    Two block types are accepted: ``type = explicit`` with row-major
    matrices Q0..Q(T-1) and R0..R(T-2), or ``type = uniform`` with bounds
    matrices q_min/q_max/r_min/r_max plus T and seed, which regenerates the
    schedule deterministically.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    kind = values.get("type")
    if kind == "explicit":
        T = int(values["T"])
        n = int(values["n"])
        m = int(values["m"])
        Q = tuple(
            _matrix_from_text(values[f"Q{i}"], n, n, f"Q{i}") for i in range(T)
        )
        R = tuple(
            _matrix_from_text(values[f"R{i}"], m, m, f"R{i}") for i in range(T - 1)
        )
        return CostSchedule(Q, R)
    if kind == "uniform":
        T = int(values["T"])
        seed = int(values["seed"])
        n = int(values["n"])
        m = int(values["m"])
        bounds = CostBounds(
            Q_min=_matrix_from_text(values["q_min"], n, n, "q_min"),
            Q_max=_matrix_from_text(values["q_max"], n, n, "q_max"),
            R_min=_matrix_from_text(values["r_min"], m, m, "r_min"),
            R_max=_matrix_from_text(values["r_max"], m, m, "r_max"),
        )
        return random_uniform_schedule(bounds, T, np.random.default_rng(seed))
    raise ValueError(f"unknown schedule type {kind!r}; use 'explicit' or 'uniform'")
