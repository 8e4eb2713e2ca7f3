import math

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import DomainError, EmptyInput
from .models import LossKind, LossModel
from .utils import conjugate_value, loss_derivative, loss_value, smoothness_constants

QUADRATIC = LossModel(LossKind.QUADRATIC)
LOGISTIC = LossModel(LossKind.LOGISTIC)


class LossValueTests(SimpleTestCase):

    def test_quadratic_values(self):
        self.assertEqual(loss_value(QUADRATIC, 1.0, 1.0), 0.0)
        self.assertEqual(loss_value(QUADRATIC, 3.0, 1.0), 2.0)

    def test_logistic_at_zero_margin(self):
        self.assertAlmostEqual(loss_value(LOGISTIC, 0.0, 1.0), math.log(2.0), places=12)

    def test_logistic_is_finite_for_huge_margins(self):
        z = np.linspace(-1e4, 1e4, 201)
        for y in (-1.0, 1.0):
            values = loss_value(LOGISTIC, z, np.full_like(z, y))
            grads = loss_derivative(LOGISTIC, z, np.full_like(z, y))
            self.assertTrue(np.all(np.isfinite(values)))
            self.assertTrue(np.all(np.isfinite(grads)))

    def test_from_name(self):
        self.assertIs(LossModel.from_name('Logistic').kind, LossKind.LOGISTIC)


class LossDerivativeTests(SimpleTestCase):

    def test_known_values(self):
        self.assertEqual(loss_derivative(QUADRATIC, 1.0, 1.0), 0.0)
        self.assertAlmostEqual(loss_derivative(LOGISTIC, 0.0, 1.0), -0.5, places=15)

    def test_matches_central_differences(self):
        rng = np.random.default_rng(3)
        h = 1e-5
        for model in (QUADRATIC, LOGISTIC):
            for z in np.concatenate([[0.7], rng.uniform(-5, 5, 50)]):
                for y in (-1.0, 1.0):
                    numeric = (loss_value(model, z + h, y) - loss_value(model, z - h, y)) / (2 * h)
                    self.assertAlmostEqual(loss_derivative(model, z, y), numeric, delta=1e-6)

    def test_derivative_is_lipschitz(self):
        rng = np.random.default_rng(4)
        for model in (QUADRATIC, LOGISTIC):
            z = rng.uniform(-20, 20, 500)
            delta = rng.uniform(-3, 3, 500)
            y = rng.choice([-1.0, 1.0], 500)
            gap = np.abs(model.derivative(z, y) - model.derivative(z + delta, y))
            self.assertTrue(np.all(gap <= model.smoothness * np.abs(delta) + 1e-15))


class ConjugateTests(SimpleTestCase):

    def test_known_values(self):
        self.assertEqual(conjugate_value(QUADRATIC, 0.0, 1.0), 0.0)
        self.assertEqual(conjugate_value(QUADRATIC, 2.0, 1.0), 0.0)
        self.assertAlmostEqual(conjugate_value(LOGISTIC, 0.5, 1.0), math.log(0.5), places=12)

    def test_logistic_endpoints_are_exact(self):
        self.assertEqual(conjugate_value(LOGISTIC, 0.0, 1.0), 0.0)
        self.assertEqual(conjugate_value(LOGISTIC, -1.0, -1.0), 0.0)

    def test_logistic_domain_error(self):
        with self.assertRaises(DomainError):
            conjugate_value(LOGISTIC, 1.5, 1.0)
        with self.assertRaises(DomainError):
            conjugate_value(LOGISTIC, 0.5, -1.0)

    def test_fenchel_young_equality_at_mapped_point(self):
        rng = np.random.default_rng(5)
        for model in (QUADRATIC, LOGISTIC):
            z = rng.uniform(-8, 8, 300)
            y = rng.choice([-1.0, 1.0], 300)
            alpha = -model.derivative(z, y)
            lhs = model.value(z, y) + model.conjugate(alpha, y)
            np.testing.assert_allclose(lhs, -alpha * z, atol=1e-9)


class SmoothnessTests(SimpleTestCase):

    def test_per_sample_constants(self):
        np.testing.assert_array_equal(smoothness_constants(QUADRATIC, [1, 1]).per_sample, [1, 1])
        np.testing.assert_array_equal(smoothness_constants(LOGISTIC, [4, 8]).per_sample, [1, 2])
        constants = smoothness_constants(QUADRATIC, [0.25, 9])
        np.testing.assert_array_equal(constants.per_sample, [0.25, 9])
        self.assertEqual(constants.L, 9.0)
        self.assertEqual(constants.L_tilde, 1.0)

    def test_empty_input(self):
        with self.assertRaises(EmptyInput):
            smoothness_constants(QUADRATIC, [])
