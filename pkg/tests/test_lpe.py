import math
import unittest
import warnings

import numpy as np

from sibandit.estimation.lpe import (LinkModel, bandwidth_hn, fit_link, fit_predict,
                                     floor_strict)
from sibandit.exceptions import InsufficientDataError, SibanditWarning

# fixed 10-point dataset for the normal-equations check
Z10 = np.array([-0.9, -0.55, -0.2, 0.0, 0.15, 0.3, 0.42, 0.61, 0.8, 1.3])
Y10 = np.array([0.3, -0.1, 0.8, 1.1, 0.9, 1.6, 1.4, 2.2, 1.9, 3.5])


def normal_equations(z, y, a, h, degree):
    inside = np.abs(z - a) <= h
    u = (z[inside] - a) / h
    B = np.column_stack([u ** j for j in range(degree + 1)])
    return np.linalg.solve(B.T @ B, B.T @ y[inside])[0]


class TestBandwidth(unittest.TestCase):
    def test_floor_strict(self):
        self.assertEqual(floor_strict(1.0), 0)
        self.assertEqual(floor_strict(1.5), 1)
        self.assertEqual(floor_strict(2.5), 2)
        self.assertEqual(floor_strict(3.0), 2)
        with self.assertRaises(ValueError):
            floor_strict(0.0)

    def test_log_n_one(self):
        for beta in (0.5, 1.5, 2.5):
            self.assertAlmostEqual(bandwidth_hn(math.e, 3, beta, C_H=0.0),
                                   (1.0 / math.e) ** (1.0 / (2.0 * beta + 1.0)))

    def test_study_horizon(self):
        self.assertAlmostEqual(bandwidth_hn(12000, 4, 1.5, 1.0), 0.1673, places=4)
        self.assertAlmostEqual(math.sqrt((4 + math.log(12000) ** 2) / 12000), 0.0877, places=4)

    def test_variance_term_dominates_for_large_C_H(self):
        h = bandwidth_hn(500, 4, 1.5, C_H=10.0)
        self.assertAlmostEqual(h, 10.0 * math.sqrt((4 + math.log(500) ** 2) / 500))


class TestLinkModel(unittest.TestCase):
    def test_constant_reproduced(self):
        z = np.linspace(-1, 1, 40)
        for degree in (0, 1, 2, 3):
            model = fit_link(z, np.full(40, 3.0), degree, 0.3)
            for a in (-0.5, 0.0, 0.77):
                self.assertAlmostEqual(fit_predict(model, a), 3.0, places=10)

    def test_linear_reproduced(self):
        z = np.random.RandomState(0).uniform(-1, 1, 60)
        model = fit_link(z, 2.0 * z + 1.0, 1, 0.25)
        for a in (-0.6, 0.1, 0.45):
            estimate = model.evaluate(a)
            self.assertEqual(estimate.degree, 1)
            self.assertAlmostEqual(estimate.value, 2.0 * a + 1.0, delta=1e-8)

    def test_polynomials_reproduced(self):
        rng = np.random.RandomState(2)
        with warnings.catch_warnings():
            warnings.simplefilter("error", SibanditWarning)
            for degree in (0, 1, 2):
                for _ in range(50):
                    z = rng.uniform(-1, 1, 80)
                    coefs = rng.standard_normal(degree + 1)
                    model = fit_link(z, np.polyval(coefs, z), degree, 0.3)
                    queries = rng.uniform(-0.6, 0.6, 10)
                    values, degrees, _, _ = model.evaluate_many(queries)
                    np.testing.assert_array_equal(degrees, degree)
                    np.testing.assert_allclose(values, np.polyval(coefs, queries),
                                               rtol=0, atol=1e-8)

    def test_fallbacks_warn_from_batches(self):
        model = fit_link([0.0, 0.1, 0.2, 5.0], [1.0, 2.0, 3.0, 4.0], 1, 0.05)
        with self.assertWarns(SibanditWarning):
            _, _, expanded, _ = model.evaluate_many([0.1, 2.5])
        self.assertEqual(list(expanded), [False, True])

    def test_normal_equations(self):
        model = fit_link(Z10, Y10, 1, 0.5)
        self.assertAlmostEqual(fit_predict(model, 0.31), normal_equations(Z10, Y10, 0.31, 0.5, 1),
                               places=10)

    def test_quadratic_normal_equations(self):
        model = fit_link(Z10, Y10, 2, 0.8)
        self.assertAlmostEqual(fit_predict(model, 0.1), normal_equations(Z10, Y10, 0.1, 0.8, 2),
                               places=8)

    def test_locality(self):
        model = fit_link(Z10, Y10, 1, 0.5)
        moved = Y10.copy()
        moved[Z10 > 0.8] += 100.0
        self.assertEqual(fit_predict(model, 0.1), fit_predict(fit_link(Z10, moved, 1, 0.5), 0.1))

    def test_linear_in_responses(self):
        rng = np.random.RandomState(1)
        z = rng.uniform(-1, 1, 50)
        y1, y2 = rng.standard_normal(50), rng.standard_normal(50)
        f = [fit_predict(fit_link(z, y, 2, 0.4), 0.2) for y in (y1, y2, 2.0 * y1 - y2)]
        self.assertAlmostEqual(f[2], 2.0 * f[0] - f[1], places=10)

    def test_degree_falls_back(self):
        model = fit_link([0.0, 0.0, 0.0, 2.0], [1.0, 2.0, 3.0, 10.0], 2, 0.5)
        with self.assertWarns(SibanditWarning):
            estimate = model.evaluate(0.1)
        self.assertEqual(estimate.degree, 0)
        self.assertAlmostEqual(estimate.value, 2.0)
        self.assertFalse(estimate.expanded)

    def test_empty_window_expands(self):
        model = fit_link([0.0, 0.1, 0.2, 5.0], [1.0, 2.0, 3.0, 4.0], 1, 0.05)
        with self.assertWarns(SibanditWarning):
            estimate = model.evaluate(-3.0)
        self.assertTrue(estimate.expanded)
        self.assertEqual(estimate.degree, 0)
        self.assertAlmostEqual(estimate.value, 1.5)

    def test_domain_flag(self):
        model = fit_link([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], 1, 0.6)
        self.assertTrue(model.evaluate(0.25).in_domain)
        self.assertFalse(model.evaluate(1.2).in_domain)
        wide = LinkModel([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], 1, 0.6, (-1.0, 2.0))
        self.assertTrue(wide.evaluate(1.2).in_domain)

    def test_clamp(self):
        model = fit_link([0.0, 0.5, 1.0], [-1.0, 0.5, 2.0], 1, 0.6, clamp=True)
        values = model([0.0, 1.0])
        np.testing.assert_array_equal(values, [0.0, 1.0])

    def test_evaluate_many(self):
        model = fit_link(Z10, Y10, 1, 0.5)
        values, degrees, expanded, in_domain = model.evaluate_many([0.0, 0.3, 5.0])
        self.assertEqual(values[1], fit_predict(model, 0.3))
        self.assertEqual(list(expanded), [False, False, True])
        self.assertEqual(list(in_domain), [True, True, False])
        self.assertEqual(model.evaluate_many([])[0].shape, (0,))

    def test_empty_training_set(self):
        with self.assertRaises(InsufficientDataError):
            fit_link([], [], 1, 0.5)


if __name__ == "__main__":
    unittest.main()
