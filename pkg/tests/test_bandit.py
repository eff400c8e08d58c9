import math
import unittest
import warnings

import numpy as np

from sibandit.bandit import (BanditConfig, BanditState, EpochSchedule, active_masks,
                             active_set, build_schedule, choose_uniform, epoch_length,
                             run_epoch, run_policy, run_single_index)
from sibandit.environment import EnvironmentSpec, LinkSpec, NoiseSpec, sample_covariates
from sibandit.estimation.sireg import ConstantEstimator
from sibandit.exceptions import ConfigError, SibanditWarning
from sibandit.params import validate_constants

FAST_MRC = {"max_generations": 20, "restarts": 1, "subsample_cap": 300}


def small_env(K=2, noise=0.0):
    indices = [[1.0, 0.5], [1.0, -0.8], [1.0, 1.2]][:K]
    links = [LinkSpec("power_sgn", beta=1.5, scale=s) for s in (0.8, 1.5, 0.5)[:K]]
    return EnvironmentSpec(d=2, K=K, indices=indices, links=links,
                           noise=NoiseSpec(variance=noise))


def constants(**extra):
    block = {"beta": 1.5, "C_T": 0.05, "mrc": dict(FAST_MRC)}
    block.update(extra)
    return validate_constants(block, "single_index")


def spreadsheet_length(m, n, d, beta, C_T, c_eps):
    eps = c_eps / 2 ** m
    L = math.log(n)
    return math.ceil(C_T * ((d + L * L) / eps ** (2 / min(1, beta))
                            + (L / eps ** 2) ** ((2 * beta + 1) / (2 * beta))))


class TestSchedule(unittest.TestCase):
    def test_closed_form(self):
        schedule = build_schedule(12000, 4, 1.5, C_T=1.0, c_eps=0.5)
        for m in range(1, schedule.M + 1):
            self.assertEqual(schedule.lengths[m - 1],
                             spreadsheet_length(m, 12000, 4, 1.5, 1.0, 0.5))
        self.assertGreaterEqual(schedule.cum[-1], 12000)
        self.assertLess(schedule.cum[-2] if schedule.M > 1 else 0, 12000)

    def test_study_constant(self):
        schedule = build_schedule(12000, 4, 1.5, C_T=0.05)
        self.assertEqual(schedule.M, 4)
        self.assertEqual(list(schedule.lengths[:3]), [114, 549, 2792])
        self.assertEqual(list(schedule.lengths),
                         [spreadsheet_length(m, 12000, 4, 1.5, 0.05, 0.5) for m in range(1, 5)])
        self.assertEqual(schedule.played_lengths.sum(), 12000)
        self.assertEqual(schedule.bounds(4), (3455, 12000))
        self.assertEqual(build_schedule(12000, 4, 2.5, C_T=0.05).M, 5)

    def test_spreadsheet_grid(self):
        grid = [(12000, 4, 1.5, 0.05, 0.5), (12000, 4, 2.5, 0.05, 0.5), (500, 2, 1.5, 0.05, 0.5),
                (2000, 3, 0.8, 0.01, 0.5), (5000, 6, 1.2, 0.02, 0.3), (100, 2, 2.0, 0.5, 0.6),
                (30000, 4, 1.9, 0.05, 0.5), (8000, 10, 1.5, 0.01, 0.4), (1000, 1, 0.5, 0.001, 0.5),
                (20000, 5, 3.5, 0.1, 0.2), (3000, 2, 1.0, 0.03, 0.45), (777, 7, 2.7, 0.2, 0.6)]
        for n, d, beta, C_T, c_eps in grid:
            schedule = build_schedule(n, d, beta, C_T, c_eps)
            lengths, total = [], 0
            while total < n:
                m = len(lengths) + 1
                lengths.append(max(spreadsheet_length(m, n, d, beta, C_T, c_eps), 1))
                total += lengths[-1]
            self.assertEqual(list(schedule.lengths), lengths, (n, d, beta))
            self.assertEqual(schedule.M, len(lengths))
            self.assertEqual(schedule.played_lengths.sum(), n)

    def test_epsilons(self):
        schedule = build_schedule(1000, 2, 1.5, C_T=0.05, c_eps=0.4)
        np.testing.assert_allclose(schedule.eps, 0.4 * 2.0 ** -np.arange(schedule.M + 1))
        self.assertAlmostEqual(schedule.epsilon(3), 0.05)

    def test_calibration(self):
        schedule = build_schedule(12000, 4, 1.5)
        self.assertLessEqual(schedule.lengths[0], 12000 / 4)
        self.assertEqual(epoch_length(1, 12000, 4, 1.5, schedule.C_T, 0.5),
                         schedule.lengths[0])

    def test_single_epoch(self):
        schedule = build_schedule(50, 4, 1.5, C_T=1.0)
        self.assertEqual(schedule.M, 1)
        self.assertEqual(schedule.bounds(1), (0, 50))

    def test_rejects(self):
        with self.assertRaises(ConfigError):
            build_schedule(0, 4, 1.5)
        with self.assertRaises(ConfigError):
            build_schedule(100, 4, 1.5, c_eps=0.7)


class TestActiveSets(unittest.TestCase):
    def setUp(self):
        self.schedule = build_schedule(1000, 2, 1.5, C_T=0.05, c_eps=0.5)
        zeros = [ConstantEstimator(0.0) for _ in range(3)]
        first = [ConstantEstimator(v) for v in (0.5, 0.45, 0.2)]
        second = [ConstantEstimator(v) for v in (0.30, 0.50, 0.9)]
        self.estimators = [zeros, first, second]
        self.X = np.zeros((1, 2))

    def test_epoch_zero_keeps_all(self):
        mask = active_masks(self.estimators, self.X, 0, self.schedule)
        self.assertEqual(mask.tolist(), [[True, True, True]])

    def test_hand_table(self):
        # epoch 1: 0.5 - 0.2 > eps_1 = 0.25 drops arm 2
        self.assertEqual(active_masks(self.estimators, self.X, 1, self.schedule).tolist(),
                         [[True, True, False]])
        # epoch 2: arm 2 stays out, arm 0 is 0.2 > eps_2 = 0.125 behind arm 1
        self.assertEqual(active_masks(self.estimators, self.X, 2, self.schedule).tolist(),
                         [[False, True, False]])

    def test_chain_is_monotone(self):
        rng = np.random.RandomState(0)
        estimators = [[ConstantEstimator(0.0)] * 4]
        for _ in range(4):
            estimators.append([ConstantEstimator(v) for v in rng.uniform(0, 0.3, 4)])
        mask, chain = active_masks(estimators, self.X, 4, self.schedule, return_chain=True)
        self.assertEqual(len(chain), 9)
        for before, after in zip(chain[:-1], chain[1:]):
            self.assertTrue(np.all(after <= before))
            self.assertTrue(after.any())
        np.testing.assert_array_equal(mask, chain[-1])

    def test_exact_estimators_isolate_best(self):
        gap = self.schedule.epsilon(0)
        estimators = [[ConstantEstimator(0.0)] * 3,
                      [ConstantEstimator(v) for v in (1.0, 1.0 - gap, 1.0 - 2 * gap)]]
        mask = active_masks(estimators, self.X, 1, self.schedule)
        self.assertEqual(mask.tolist(), [[True, False, False]])

    def test_active_set(self):
        state = BanditState(K=3, estimators=self.estimators, epoch=2)
        self.assertEqual(active_set(state, np.zeros(2), 1, self.schedule), {0, 1})
        with self.assertRaises(ValueError):
            active_set(state, np.zeros(2), 3, self.schedule)


class TestChooseUniform(unittest.TestCase):
    def test_only_active_arms(self):
        mask = np.array([[True, False, True]] * 3000)
        arms = choose_uniform(mask, np.random.RandomState(0))
        self.assertEqual(set(arms.tolist()), {0, 2})
        self.assertAlmostEqual(np.mean(arms == 0), 0.5, delta=0.05)

    def test_singleton(self):
        mask = np.array([[False, True, False], [False, False, True]])
        np.testing.assert_array_equal(choose_uniform(mask, np.random.RandomState(1)), [1, 2])


class TestPolicy(unittest.TestCase):
    def test_one_arm_has_no_regret(self):
        trace = run_single_index(small_env(K=1), 600, constants(), random_state=0)
        self.assertEqual(trace.n, 600)
        self.assertTrue(np.all(trace.arms == 0))
        self.assertEqual(trace.cum_regret[-1], 0.0)

    def test_zero_horizon(self):
        trace = run_single_index(small_env(), 0, constants(), random_state=0)
        self.assertEqual(trace.n, 0)
        self.assertEqual(trace.epoch_ends, [])

    def test_replay_is_identical(self):
        env = small_env(noise=0.1)
        a = run_single_index(env, 2000, constants(), random_state=5, seed=5)
        b = run_single_index(env, 2000, constants(), random_state=5, seed=5)
        np.testing.assert_array_equal(a.arms, b.arms)
        np.testing.assert_array_equal(a.inst_regret, b.inst_regret)
        self.assertEqual(a.index_diagnostics, b.index_diagnostics)

    def test_trace_shape(self):
        env = small_env(noise=0.1)
        trace = run_single_index(env, 2000, constants(), random_state=1, seed=1)
        schedule = build_schedule(2000, 2, 1.5, C_T=0.05)
        self.assertEqual(trace.n, 2000)
        self.assertTrue(np.all(trace.inst_regret >= 0))
        self.assertTrue(np.all(np.diff(trace.cum_regret) >= 0))
        self.assertEqual(trace.epoch_ends, [min(int(c), 2000) for c in schedule.cum])
        epochs = {row["epoch"] for row in trace.index_diagnostics}
        self.assertEqual(epochs, set(range(1, schedule.M + 1)))

    def test_eliminates_after_first_epoch(self):
        env = EnvironmentSpec(d=2, K=2, indices=[[1.0, 0.9], [1.0, -0.9]],
                              links=[LinkSpec("power_sgn", beta=1.5, scale=2.0)] * 2,
                              noise=NoiseSpec(variance=0.0))
        schedule = build_schedule(2000, 2, 1.5, C_T=0.05)
        config = BanditConfig.from_constants(constants(), seed=3)
        state = BanditState(K=2)
        run_epoch(state, env, schedule, config, np.random.RandomState(3))
        self.assertEqual(state.epoch, 1)
        X = np.array([[0.0, 0.9], [0.0, -0.9]])
        best = env.true_rewards(X).argmax(axis=1)
        mask = active_masks(state.estimators, X, 1, schedule)
        for i in range(2):
            self.assertTrue(mask[i, best[i]])
            self.assertEqual(mask[i].sum(), 1)

    def test_continues_a_state(self):
        env = small_env(noise=0.1)
        schedule = build_schedule(2000, 2, 1.5, C_T=0.05)
        config = BanditConfig.from_constants(constants(), seed=0)
        rng = np.random.RandomState(0)
        state = BanditState(K=2)
        run_epoch(state, env, schedule, config, rng)
        trace = run_policy(env, schedule, config, rng, state=state)
        self.assertEqual(trace.n, 2000)
        self.assertEqual(state.epoch, schedule.M)
        with self.assertRaises(ValueError):
            run_epoch(state, env, schedule, config, rng)

    def test_truncated_final_epoch_keeps_estimators(self):
        # the horizon stops epoch 3 after 60 of its 1000 rounds
        lengths = np.array([60, 300, 1000])
        schedule = EpochSchedule(420, 2, 1.5, 0.05, 0.5, 0.5 * 2.0 ** -np.arange(4),
                                 lengths, np.cumsum(lengths))
        config = BanditConfig.from_constants(constants(), seed=0)
        state = BanditState(K=2)
        run_policy(small_env(noise=0.1), schedule, config, np.random.RandomState(0), state=state)
        self.assertEqual(state.trace.epoch_ends, [60, 360, 420])
        for k in range(2):
            self.assertLess(len(state.logs[k][1]), state.estimators[2][k].n_samples)
            self.assertIs(state.estimators[3][k], state.estimators[2][k])
        rows = state.trace.index_diagnostics
        second = [(r["arm"], r["index_error"]) for r in rows if r["epoch"] == 2]
        third = [(r["arm"], r["index_error"]) for r in rows if r["epoch"] == 3]
        self.assertEqual(second, third)

    def test_active_sets_never_empty(self):
        env = small_env(K=3, noise=0.1)
        schedule = build_schedule(2000, 2, 1.5, C_T=0.05)
        state = BanditState(K=3)
        run_policy(env, schedule, BanditConfig.from_constants(constants(), seed=4),
                   np.random.RandomState(4), state=state)
        rng = np.random.RandomState(5)
        X = sample_covariates(env.covariate_law, 10000, rng)
        epochs = rng.randint(0, schedule.M + 1, 10000)
        for m in range(schedule.M + 1):
            rows = X[epochs == m]
            mask, chain = active_masks(state.estimators, rows, m, schedule, return_chain=True)
            self.assertTrue(np.all(mask.any(axis=1)), m)
            for before, after in zip(chain[:-1], chain[1:]):
                self.assertTrue(np.all(after <= before))

    def test_decisions_ignore_later_rewards(self):
        env = small_env(noise=0.1)
        loud = small_env(noise=2.0)
        schedule = build_schedule(2000, 2, 1.5, C_T=0.05)
        config = BanditConfig.from_constants(constants(), seed=6)

        def play(switch):
            # rewards come from the noisier environment from epoch ``switch`` on
            rng = np.random.RandomState(6)
            state = BanditState(K=2)
            for m in range(1, schedule.M + 1):
                run_epoch(state, loud if m >= switch else env, schedule, config, rng)
            return state.trace.arms

        reference = play(schedule.M + 1)
        for switch in range(1, schedule.M + 1):
            end = schedule.bounds(switch)[1]
            np.testing.assert_array_equal(play(switch)[:end], reference[:end])

    def test_single_epoch_warns(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            run_single_index(small_env(), 20, constants(C_T=1.0), random_state=0)
        self.assertTrue(any(issubclass(w.category, SibanditWarning) for w in caught))

    def test_fit_threshold(self):
        self.assertEqual(BanditConfig(beta=1.5).fit_threshold, 12)
        self.assertEqual(BanditConfig(beta=2.5).fit_threshold, 16)
        self.assertEqual(BanditConfig(beta=1.5, min_fit_samples=40).fit_threshold, 40)


if __name__ == "__main__":
    unittest.main()
