import numpy as np
import pytest

from preview_lqr.costs import (
    CostBounds,
    CostSchedule,
    FrozenScheduleView,
    IncomparableScheduleError,
    frozen_schedule,
    loewner_leq,
    random_uniform_schedule,
    schedule_from_config_text,
    schedule_to_config_text,
    sequence_extrema,
    verify_bounds,
)


def pendulum_bounds():
    return CostBounds(
        8e3 * np.eye(4), 3.2e4 * np.eye(4), [[2e3]], [[9.8e4]]
    )


def constant_schedule(Q, R, T):
    return CostSchedule(tuple(Q for _ in range(T)), tuple(R for _ in range(T - 1)))


class _ForcedRng:
    """Stub generator returning a constant for every uniform draw."""

    def __init__(self, value):
        self.value = value

    def random(self, size=None):
        return np.full(size, self.value)


class TestCostSchedule:
    def test_rejects_short_schedule(self):
        with pytest.raises(ValueError):
            CostSchedule((np.eye(2),), ())

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            CostSchedule((np.eye(2), np.eye(2)), (np.eye(1), np.eye(1)))

    def test_rejects_indefinite_state_cost(self):
        bad = np.diag([1.0, -1.0])
        with pytest.raises(ValueError, match="semidefinite"):
            CostSchedule((bad, np.eye(2)), (np.eye(1),))

    def test_rejects_semidefinite_control_cost(self):
        with pytest.raises(ValueError, match="positive definite"):
            CostSchedule((np.eye(2), np.eye(2)), (np.zeros((1, 1)),))

    def test_rejects_asymmetric(self):
        bad = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            CostSchedule((bad, np.eye(2)), (np.eye(1),))


class TestVerifyBounds:
    def test_constant_at_bounds(self):
        bounds = pendulum_bounds()
        sched = constant_schedule(8e3 * np.eye(4), np.array([[2e3]]), 5)
        assert verify_bounds(sched, bounds)

    def test_violation_detected(self):
        bounds = pendulum_bounds()
        sched = constant_schedule(2 * 3.2e4 * np.eye(4), np.array([[2e3]]), 5)
        assert not verify_bounds(sched, bounds)

    def test_generator_output_always_within(self):
        bounds = pendulum_bounds()
        for seed in range(10):
            sched = random_uniform_schedule(bounds, 12, np.random.default_rng(seed))
            assert verify_bounds(sched, bounds)


class TestRandomUniformSchedule:
    def test_forced_zero_hits_lower_bound(self):
        bounds = pendulum_bounds()
        sched = random_uniform_schedule(bounds, 4, _ForcedRng(0.0))
        for Q in sched.Q:
            np.testing.assert_array_equal(Q, bounds.Q_min)
        for R in sched.R:
            np.testing.assert_array_equal(R, bounds.R_min)

    def test_forced_one_hits_upper_bound(self):
        bounds = pendulum_bounds()
        sched = random_uniform_schedule(bounds, 4, _ForcedRng(1.0))
        for Q in sched.Q:
            np.testing.assert_array_equal(Q, bounds.Q_max)

    def test_isotropic_draws_stay_isotropic(self):
        bounds = pendulum_bounds()
        sched = random_uniform_schedule(bounds, 8, np.random.default_rng(0))
        for Q in sched.Q:
            c = Q[0, 0]
            assert 8e3 <= c <= 3.2e4
            np.testing.assert_allclose(Q, c * np.eye(4))

    def test_rejects_short_horizon(self):
        with pytest.raises(ValueError):
            random_uniform_schedule(pendulum_bounds(), 1, np.random.default_rng(0))


class TestFrozenSchedule:
    def test_full_information_returns_input(self):
        sched = constant_schedule(np.eye(2), np.eye(1), 5)
        assert frozen_schedule(sched, 3, 1) is sched
        assert frozen_schedule(sched, 0, 4) is sched

    def test_constant_schedule_unchanged(self):
        sched = constant_schedule(2.0 * np.eye(2), np.eye(1), 6)
        frozen = frozen_schedule(sched, 1, 1)
        for a, b in zip(frozen.Q, sched.Q):
            np.testing.assert_array_equal(a, b)

    def test_tail_repeats_freeze_entry(self):
        Q = tuple(float(i + 1) * np.eye(1) for i in range(4))
        R = tuple(np.eye(1) for _ in range(3))
        sched = CostSchedule(Q, R)
        frozen = frozen_schedule(sched, 1, 0)
        values = [float(M[0, 0]) for M in frozen.Q]
        assert values == [1.0, 2.0, 2.0, 2.0]

    def test_prefix_agreement(self):
        rng = np.random.default_rng(2)
        sched = random_uniform_schedule(pendulum_bounds(), 10, rng)
        for t, W in [(0, 0), (2, 3), (4, 1)]:
            frozen = frozen_schedule(sched, t, W)
            for i in range(t + W + 1):
                np.testing.assert_array_equal(frozen.Q[i], sched.Q[i])
                if i <= len(sched.R) - 1:
                    np.testing.assert_array_equal(frozen.R[i], sched.R[i])

    def test_rejects_negative_indices(self):
        sched = constant_schedule(np.eye(1), np.eye(1), 4)
        with pytest.raises(ValueError):
            frozen_schedule(sched, -1, 0)

    def test_view_matches_materialized(self):
        sched = random_uniform_schedule(pendulum_bounds(), 9, np.random.default_rng(4))
        for s in (0, 3, 7, 8):
            view = FrozenScheduleView(sched, s)
            made = frozen_schedule(sched, s, 0)
            assert view.horizon == made.horizon
            for i in range(made.horizon):
                np.testing.assert_array_equal(view.Q[i], made.Q[i])
            for i in range(made.horizon - 1):
                np.testing.assert_array_equal(view.R[i], made.R[i])


class TestSequenceExtrema:
    def test_constant_schedule(self):
        sched = constant_schedule(3.0 * np.eye(2), 2.0 * np.eye(1), 4)
        ext = sequence_extrema(sched)
        np.testing.assert_array_equal(ext.Qbar_min, 3.0 * np.eye(2))
        np.testing.assert_array_equal(ext.Qbar_max, 3.0 * np.eye(2))
        np.testing.assert_array_equal(ext.Rbar_min, 2.0 * np.eye(1))

    def test_scalar_sequence(self):
        Q = tuple(np.array([[v]]) for v in (3.0, 1.0, 2.0))
        R = tuple(np.eye(1) for _ in range(2))
        ext = sequence_extrema(CostSchedule(Q, R))
        assert ext.Qbar_min[0, 0] == pytest.approx(1.0)
        assert ext.Qbar_max[0, 0] == pytest.approx(3.0)

    def test_incomparable_pair_raises(self):
        Q = (np.diag([1.0, 2.0]), np.diag([2.0, 1.0]))
        R = (np.eye(1),)
        with pytest.raises(IncomparableScheduleError):
            sequence_extrema(CostSchedule(Q, R))

    def test_generated_schedules_always_ordered(self):
        bounds = pendulum_bounds()
        for seed in range(8):
            sched = random_uniform_schedule(bounds, 15, np.random.default_rng(seed))
            ext = sequence_extrema(sched)
            for Q in sched.Q:
                assert loewner_leq(ext.Qbar_min, Q)
                assert loewner_leq(Q, ext.Qbar_max)
            for R in sched.R:
                assert loewner_leq(ext.Rbar_min, R)
                assert loewner_leq(R, ext.Rbar_max)


class TestCostBounds:
    def test_rejects_unordered(self):
        with pytest.raises(ValueError):
            CostBounds(2.0 * np.eye(2), np.eye(2), np.eye(1), np.eye(1))

    def test_rejects_semidefinite(self):
        with pytest.raises(ValueError):
            CostBounds(np.zeros((2, 2)), np.eye(2), np.eye(1), np.eye(1))


class TestScheduleSerialization:
    def test_explicit_round_trip_exact(self):
        sched = random_uniform_schedule(pendulum_bounds(), 7, np.random.default_rng(3))
        text = schedule_to_config_text(sched)
        back = schedule_from_config_text(text)
        for a, b in zip(back.Q, sched.Q):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(back.R, sched.R):
            np.testing.assert_array_equal(a, b)

    def test_generator_spec_is_deterministic(self):
        text = (
            "type = uniform\n"
            "T = 6\nseed = 9\nn = 2\nm = 1\n"
            "q_min = 1 0 0 1\n"
            "q_max = 3 0 0 3\n"
            "r_min = 0.5\n"
            "r_max = 2.0\n"
        )
        a = schedule_from_config_text(text)
        b = schedule_from_config_text(text)
        for x, y in zip(a.Q, b.Q):
            np.testing.assert_array_equal(x, y)
        assert a.horizon == 6

    def test_unknown_type_rejected(self):
        with pytest.raises(ValueError, match="unknown schedule type"):
            schedule_from_config_text("type = banana\n")

    def test_entry_count_validated(self):
        with pytest.raises(ValueError, match="expected"):
            schedule_from_config_text(
                "type = explicit\nT = 2\nn = 2\nm = 1\nQ0 = 1 0 0\nQ1 = 1 0 0 1\nR0 = 1\n"
            )
