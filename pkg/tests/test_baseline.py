import math
import unittest

import numpy as np

from sibandit.baseline import BinPolicy, bin_epoch_length, build_bin_schedule, run_smoothbandit
from sibandit.environment import EnvironmentSpec, LinkSpec, NoiseSpec, generate_environment
from sibandit.exceptions import ConfigError


class TestBinSchedule(unittest.TestCase):
    def test_epoch_length(self):
        eps = 0.5 * 2.0 ** -2
        expected = math.ceil(0.1 * (1 / eps ** 2) ** ((2 * 1.5 + 2) / (2 * 1.5)))
        self.assertEqual(bin_epoch_length(2, 2, 1.5, 0.1, 0.5), expected)

    def test_covers_horizon(self):
        schedule = build_bin_schedule(5000, 2, 1.5)
        self.assertGreaterEqual(schedule.cum[-1], 5000)
        self.assertEqual(schedule.played_lengths.sum(), 5000)
        self.assertTrue(np.all(np.diff(schedule.bandwidths) < 0))
        self.assertLessEqual(schedule.lengths[0], 5000 / 4)

    def test_rejects_empty_horizon(self):
        with self.assertRaises(ConfigError):
            build_bin_schedule(0, 2, 1.5)


class TestBinPolicy(unittest.TestCase):
    def setUp(self):
        self.schedule = build_bin_schedule(20000, 2, 1.5, C_T=0.5)
        self.policy = BinPolicy(self.schedule, 2, -np.ones(2), np.ones(2))

    def test_cells_are_nested(self):
        cells = self.policy.cells
        self.assertEqual(len(cells), self.schedule.M)
        for c in cells:
            self.assertEqual(c & (c - 1), 0)
        self.assertTrue(all(b >= a for a, b in zip(cells[:-1], cells[1:])))
        self.assertGreater(cells[-1], cells[0])

    def test_cube_ids(self):
        X = np.array([[-1.0, -1.0], [0.999, 0.999], [1.0, 1.0], [-0.01, 0.01]])
        cells = self.policy.cells[0]
        coords = self.policy.cube_coordinates(X, 1)
        self.assertTrue(np.all((coords >= 0) & (coords < cells)))
        np.testing.assert_array_equal(coords[0], [0, 0])
        np.testing.assert_array_equal(coords[1], coords[2])
        ids = self.policy.cube_ids(X, 1)
        self.assertEqual(ids[0], 0)
        self.assertEqual(ids[2], cells * cells - 1)

    def test_inherits_from_parent(self):
        m = next(j for j in range(2, self.schedule.M + 1)
                 if self.policy.cells[j - 1] > self.policy.cells[j - 2])
        parent_cells = self.policy.cells[m - 2]
        ratio = self.policy.cells[m - 1] // parent_cells
        coords = np.array([ratio + 1, 0])
        parent = (coords // ratio)[0] * parent_cells + (coords // ratio)[1]
        self.policy.active = [{} for _ in range(m - 2)] + [{int(parent): np.array([False, True])}]
        np.testing.assert_array_equal(self.policy.inherited(coords, m), [False, True])
        np.testing.assert_array_equal(self.policy.inherited(np.array([0, 0]), m), [True, True])

    def test_eliminate(self):
        mask = np.array([True, True])
        counts = np.array([1000, 1000])
        # width 2 sqrt(2) sqrt(log(100) 2 / 1000) = 0.271
        dropped = self.policy.eliminate(mask, np.array([1000.0, 500.0]), counts, 100)
        np.testing.assert_array_equal(dropped, [True, False])
        kept = self.policy.eliminate(mask, np.array([1000.0, 900.0]), counts, 100)
        np.testing.assert_array_equal(kept, [True, True])
        unplayed = self.policy.eliminate(mask, np.array([10.0, 0.0]), np.array([10, 0]), 100)
        np.testing.assert_array_equal(unplayed, [True, True])


class TestRun(unittest.TestCase):
    def test_run(self):
        env = generate_environment(0, d=2, K=3)
        trace = run_smoothbandit(env, 3000, 1.5, random_state=0)
        self.assertEqual(trace.n, 3000)
        self.assertTrue(np.all(trace.inst_regret >= 0))
        self.assertEqual(trace.epoch_ends[-1], 3000)
        self.assertEqual(trace.index_diagnostics, [])

    def test_deterministic(self):
        env = generate_environment(1, d=2, K=2)
        a = run_smoothbandit(env, 1500, 1.5, random_state=4)
        b = run_smoothbandit(env, 1500, 1.5, random_state=4)
        np.testing.assert_array_equal(a.arms, b.arms)
        np.testing.assert_array_equal(a.inst_regret, b.inst_regret)

    def test_one_arm(self):
        env = EnvironmentSpec(d=2, K=1, indices=[[1.0, 0.3]], links=[LinkSpec()],
                              noise=NoiseSpec(variance=0.1))
        trace = run_smoothbandit(env, 800, 1.5, random_state=0)
        self.assertEqual(trace.cum_regret[-1], 0.0)

    def test_zero_horizon(self):
        env = generate_environment(0, d=2, K=2)
        self.assertEqual(run_smoothbandit(env, 0, 1.5).n, 0)

    def test_unknown_constant(self):
        env = generate_environment(0, d=2, K=2)
        with self.assertRaises(ConfigError):
            run_smoothbandit(env, 100, 1.5, params={"c_width": 1.0})


if __name__ == "__main__":
    unittest.main()
