import numpy as np
from django.apps import apps as app_registry
from django.test import SimpleTestCase, override_settings, tag
from scipy import sparse

from apps.core.exceptions import Converged, RangeError
from apps.data.models import Dataset, Regime
from apps.data.utils import iteration_bound, make_synthetic, theory_constants
from apps.losses.models import LossKind, LossModel
from apps.metrics.utils import epochs_to_tolerance, primal_gradient, primal_objective
from .apps import SolverAppConfig
from .engine import DualFreeSolver, RunStatus, reference_solve, solve
from .models import SolverConfig, SolverState, ThetaMode, Variant
from .signals import epoch_completed, iteration_completed
from .utils import (
    adaptive_probabilities,
    apply_update,
    check_mapping,
    check_margins,
    closed_form_ridge,
    dual_residuals,
    expected_update_direction,
    init_state,
    potential,
    theta,
    variance_of_update,
)

QUADRATIC = LossModel(LossKind.QUADRATIC)
LOGISTIC = LossModel(LossKind.LOGISTIC)


def desk_dataset():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return Dataset(sparse.csr_matrix(X), [1.0, 2.0, 3.0])


def mapped_state(ds, lam, rng):
    """حالة عشوائية تحقق علاقة الربط w = (1/λn)Σα_i x_i"""
    state = SolverState(ds.n, ds.d, lam)
    state.alpha = rng.standard_normal(ds.n)
    state.w = ds.X.T @ state.alpha / (lam * ds.n)
    state.z = ds.X @ state.w
    return state


def theta_star(v, gamma, lam, n, b=1):
    return n * lam * lam * b / np.sum(np.asarray(v) * gamma + n * lam * lam)


class Capture:
    """مستقبل مؤقت لإشارة المحلل"""

    def __init__(self, signal, handler=None):
        self.signal = signal
        self.handler = handler
        self.calls = []

    def __call__(self, sender, **kwargs):
        if self.handler is not None:
            self.handler(**kwargs)
        else:
            self.calls.append(kwargs)

    def __enter__(self):
        self.signal.connect(self, weak=False)
        return self

    def __exit__(self, *exc):
        self.signal.disconnect(self)


class DualResidualTests(SimpleTestCase):

    def test_initial_residue_is_derivative_at_zero(self):
        ds = Dataset(sparse.csr_matrix([[1.0]]), [1.0])
        state = init_state(ds, QUADRATIC, 1.0)
        np.testing.assert_array_equal(dual_residuals(state, ds, QUADRATIC), [-1.0])

    def test_zero_at_optimum(self):
        ds = desk_dataset()
        state = closed_form_ridge(ds, 0.5)
        np.testing.assert_allclose(dual_residuals(state, ds, QUADRATIC), 0.0, atol=1e-12)

    def test_one_hand_computed_step(self):
        ds = desk_dataset()
        state = init_state(ds, QUADRATIC, 1.0)
        np.testing.assert_array_equal(state.kappa, [-1.0, -2.0, -3.0])
        apply_update(state, 2, 0.5, 0.5, ds, QUADRATIC)
        np.testing.assert_allclose(state.alpha, [0.0, 0.0, 3.0])
        np.testing.assert_allclose(state.w, [1.0, 1.0])
        np.testing.assert_allclose(state.z, [1.0, 1.0, 2.0])
        np.testing.assert_allclose(state.kappa, [0.0, -1.0, 2.0])
        np.testing.assert_allclose(dual_residuals(state, ds, QUADRATIC), [0.0, -1.0, 2.0])


class AdaptiveProbabilityTests(SimpleTestCase):

    def test_symmetric(self):
        np.testing.assert_allclose(adaptive_probabilities([1.0, 1.0], [1.0, 1.0], 3.0, 0.2, 2), [0.5, 0.5])

    def test_support_restriction(self):
        np.testing.assert_array_equal(adaptive_probabilities([3.0, 0.0], [1.0, 1.0], 1.0, 1.0, 2), [1.0, 0.0])

    def test_weighted_by_row_norm(self):
        p = adaptive_probabilities([1.0, 1.0], [1.0, 3.0], 2.0, 1.0, 2)
        expected = np.array([2.0, np.sqrt(8.0)]) / (2.0 + np.sqrt(8.0))
        np.testing.assert_allclose(p, expected, rtol=1e-12)
        np.testing.assert_allclose(p, [0.41421, 0.58579], atol=1e-5)

    def test_zero_residue_signals_convergence(self):
        with self.assertRaises(Converged):
            adaptive_probabilities([0.0, 0.0], [1.0, 1.0], 1.0, 1.0, 2)


class ThetaTests(SimpleTestCase):

    def test_symmetric_instance_equals_theta_star(self):
        value = theta([1.0, 1.0], [0.5, 0.5], [1.0, 1.0], 1.0, 1.0, 2)
        self.assertAlmostEqual(value, 1.0 / 3.0, places=15)
        self.assertAlmostEqual(value, theta_star([1.0, 1.0], 1.0, 1.0, 2), places=15)

    def test_single_coordinate(self):
        self.assertAlmostEqual(theta([1.0, 0.0], [1.0, 0.0], [1.0, 5.0], 1.0, 1.0, 2), 2.0 / 3.0, places=15)

    def test_clamped_below_one(self):
        value = theta([1.0], [1.0], [0.0], 1.0, 1.0, 1, b=4)
        self.assertLess(value, 1.0)
        self.assertGreater(value, 0.999)

    def test_optimal_probabilities_maximize_theta(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(2, 17))
            kappa = rng.standard_normal(n)
            kappa[rng.random(n) < 0.3] = 0.0
            if not kappa.any():
                kappa[0] = 1.0
            v = rng.uniform(0.1, 10.0, n)
            gamma = rng.uniform(0.01, 5.0)
            lam = rng.uniform(0.01, 2.0)
            support = kappa != 0

            p_star = adaptive_probabilities(kappa, v, gamma, lam, n)
            best = theta(kappa, p_star, v, gamma, lam, n)
            self.assertGreaterEqual(best, theta_star(v, gamma, lam, n) * (1 - 1e-12))
            for _ in range(100):
                p = np.zeros(n)
                p[support] = rng.dirichlet(np.ones(support.sum()))
                self.assertGreaterEqual(best, theta(kappa, p, v, gamma, lam, n) - 1e-9)


class ApplyUpdateTests(SimpleTestCase):

    def test_zero_residue_is_noop(self):
        ds = desk_dataset()
        state = init_state(ds, QUADRATIC, 1.0)
        state.kappa[1] = 0.0
        before = state.copy()
        apply_update(state, 1, 0.5, 0.5, ds, QUADRATIC)
        np.testing.assert_array_equal(state.alpha, before.alpha)
        np.testing.assert_array_equal(state.w, before.w)
        np.testing.assert_array_equal(state.z, before.z)

    def test_full_step_sets_alpha_to_negative_derivative(self):
        ds = desk_dataset()
        rng = np.random.default_rng(4)
        state = mapped_state(ds, 0.7, rng)
        dual_residuals(state, ds, LOGISTIC)
        z_old = state.z[0]
        apply_update(state, 0, 1.0, 1.0, ds, LOGISTIC)
        self.assertAlmostEqual(state.alpha[0], float(-LOGISTIC.derivative(z_old, ds.y[0])), places=14)

    def test_mapping_preserved(self):
        ds = Dataset(sparse.csr_matrix(np.array([[1.0, 2.0], [0.5, -1.0]])), [1.0, -1.0])
        state = init_state(ds, LOGISTIC, 0.3)
        apply_update(state, 1, 0.4, 0.25, ds, LOGISTIC)
        recomputed = ds.X.T @ state.alpha / (state.lam * ds.n)
        np.testing.assert_allclose(state.w, recomputed, rtol=0, atol=1e-12)
        np.testing.assert_allclose(state.z, ds.X @ state.w, rtol=0, atol=1e-12)
        self.assertLess(check_mapping(state, ds), 1e-12)
        self.assertLess(check_margins(state, ds), 1e-12)

    def test_batch_update_divides_by_batch_size(self):
        ds = desk_dataset()
        state = init_state(ds, QUADRATIC, 1.0)
        apply_update(state, 0, 0.5, 0.25, ds, QUADRATIC, b=2)
        # θκ/(b p) = 0.5·(-1)/(2·0.25) = -1
        self.assertAlmostEqual(state.alpha[0], 1.0)


class PotentialTests(SimpleTestCase):

    def test_zero_at_reference(self):
        ds = desk_dataset()
        reference = closed_form_ridge(ds, 1.0)
        self.assertEqual(potential(reference.copy(), reference, 2.0), 0.0)

    def test_primal_part_only(self):
        ds = desk_dataset()
        reference = closed_form_ridge(ds, 1.0)
        state = reference.copy()
        state.w = state.w + np.array([1.0, -2.0])
        self.assertAlmostEqual(potential(state, reference, 0.5), 0.5 * 5.0)

    def test_direct_formula(self):
        ds = desk_dataset()
        rng = np.random.default_rng(6)
        reference = closed_form_ridge(ds, 1.0)
        state = mapped_state(ds, 1.0, rng)
        expected = np.sum((state.alpha - reference.alpha) ** 2) / 3 + 0.3 * np.sum((state.w - reference.w) ** 2)
        self.assertAlmostEqual(potential(state, reference, 0.3), expected, places=12)


class UnbiasednessTests(SimpleTestCase):

    def finite_difference_gradient(self, state, ds, loss, lam, h=1e-6):
        gradient = np.zeros(ds.d)
        for j in range(ds.d):
            shifted = []
            for sign in (1.0, -1.0):
                nudged = state.copy()
                nudged.w[j] += sign * h
                nudged.z = ds.X @ nudged.w
                shifted.append(primal_objective(nudged, ds, loss, lam))
            gradient[j] = (shifted[0] - shifted[1]) / (2 * h)
        return gradient

    def test_direction_matches_gradient(self):
        rng = np.random.default_rng(7)
        for loss in (QUADRATIC, LOGISTIC):
            ds = make_synthetic(12, 5, density=0.5, spread=1.0, loss_kind=loss.kind, seed=8)
            lam = 0.2
            for _ in range(5):
                state = mapped_state(ds, lam, rng)
                kappa = dual_residuals(state, ds, loss)
                coherent = adaptive_probabilities(kappa, ds.v, lam, lam, ds.n)
                arbitrary = rng.dirichlet(np.ones(ds.n))
                gradient = primal_gradient(state, ds, loss, lam)
                for p in (coherent, arbitrary):
                    np.testing.assert_allclose(
                        expected_update_direction(state, p, ds, loss), gradient, rtol=0, atol=1e-10
                    )
                np.testing.assert_allclose(
                    self.finite_difference_gradient(state, ds, loss, lam), gradient, rtol=0, atol=1e-6
                )

    def test_initial_direction(self):
        ds = desk_dataset()
        state = init_state(ds, QUADRATIC, 1.0)
        direction = expected_update_direction(state, np.full(3, 1.0 / 3.0), ds, QUADRATIC)
        np.testing.assert_allclose(direction, ds.X.T @ (-ds.y) / 3)

    def test_zero_at_optimum(self):
        ds = desk_dataset()
        state = closed_form_ridge(ds, 1.0)
        direction = expected_update_direction(state, np.full(3, 1.0 / 3.0), ds, QUADRATIC)
        np.testing.assert_allclose(direction, 0.0, atol=1e-12)

    def test_variance_of_update(self):
        ds = desk_dataset()
        state = init_state(ds, QUADRATIC, 1.0)
        p = np.array([0.5, 0.25, 0.25])
        # Σ κ² v/(n² p) = (1·1/0.5 + 4·1/0.25 + 9·2/0.25)/9
        self.assertAlmostEqual(variance_of_update(state, p, ds), (2.0 + 16.0 + 72.0) / 9.0)


class SolverConfigTests(SimpleTestCase):

    def test_rejects_non_positive_lambda(self):
        with self.assertRaises(RangeError):
            SolverConfig(lam=0.0).clean()

    def test_rejects_small_shrink(self):
        with self.assertRaises(RangeError):
            SolverConfig(lam=1.0, variant=Variant.HEURISTIC, shrink=0.5).clean()
        SolverConfig(lam=1.0, variant=Variant.HEURISTIC, shrink=1.0).clean()

    def test_rejects_batch_larger_than_n(self):
        with self.assertRaises(RangeError):
            DualFreeSolver(desk_dataset(), QUADRATIC, SolverConfig(lam=1.0, variant=Variant.MINIBATCH, batch_size=4))

    def test_labels(self):
        self.assertEqual(SolverConfig(lam=1.0).label, 'adfsdca')
        self.assertEqual(SolverConfig(lam=1.0, variant=Variant.HEURISTIC, shrink=10).label, 'plus-s10')
        self.assertEqual(
            SolverConfig(lam=1.0, variant=Variant.MINIBATCH, batch_size=8, theta_mode=ThetaMode.FIXED).label,
            'minibatch-b8-fixed',
        )

    def test_app_config_is_distinct_from_run_config(self):
        app_config = app_registry.get_app_config('solver')
        self.assertIsInstance(app_config, SolverAppConfig)
        self.assertIsNot(SolverAppConfig, SolverConfig)
        self.assertEqual(app_config.name, 'apps.solver')


@override_settings(SOLVER_SETTINGS={'record_wall_time': False})
class SolveTests(SimpleTestCase):

    def test_desk_instance_reaches_tolerance(self):
        ds = desk_dataset()
        config = SolverConfig(lam=1.0, epochs=50, seed=1, gap_tolerance=1e-10)
        result = solve(ds, QUADRATIC, config)
        self.assertLess(result.final.gap, 1e-10)
        self.assertIn(result.status, (RunStatus.TOLERANCE, RunStatus.CONVERGED))
        optimum = closed_form_ridge(ds, 1.0)
        self.assertAlmostEqual(result.final.primal, primal_objective(optimum, ds, QUADRATIC, 1.0), delta=1e-10)

    def test_every_variant_keeps_mapping(self):
        ds = make_synthetic(30, 6, seed=2)
        variants = [
            dict(variant=Variant.ADAPTIVE),
            dict(variant=Variant.HEURISTIC, shrink=10.0),
            dict(variant=Variant.MINIBATCH, batch_size=4),
            dict(variant=Variant.UNIFORM),
            dict(variant=Variant.ADAPTIVE, theta_mode=ThetaMode.FIXED, regime=Regime.AVERAGE_CONVEX),
        ]
        for options in variants:
            config = SolverConfig(lam=0.1, epochs=5, seed=3, gap_tolerance=None, **options)
            result = solve(ds, QUADRATIC, config)
            self.assertLess(check_mapping(result.state, ds), 1e-8, config.label)
            self.assertLess(check_margins(result.state, ds), 1e-8, config.label)
            self.assertLess(result.final.gap, result.records[0].gap, config.label)
            for record in result.records:
                self.assertGreaterEqual(record.gap, -1e-9)

    def test_one_record_per_epoch(self):
        ds = make_synthetic(10, 4, seed=4)
        result = solve(ds, QUADRATIC, SolverConfig(lam=0.1, epochs=3, seed=0, gap_tolerance=None))
        self.assertEqual([r.epoch for r in result.records], [0.0, 1.0, 2.0, 3.0])
        self.assertEqual(result.status, RunStatus.BUDGET)
        self.assertEqual(result.records[0].theta_used, 0.0)
        self.assertTrue(all(r.wall_ms == 0.0 for r in result.records))

    def test_minibatch_epochs_are_fractional(self):
        ds = make_synthetic(10, 4, seed=4)
        config = SolverConfig(lam=0.1, variant=Variant.MINIBATCH, batch_size=4, epochs=2, seed=0, gap_tolerance=None)
        result = solve(ds, QUADRATIC, config)
        np.testing.assert_allclose([r.epoch for r in result.records], [0.0, 1.2, 2.0])

    def test_callbacks_and_signal_receive_records(self):
        ds = make_synthetic(10, 4, seed=4)
        received = []
        with Capture(epoch_completed) as capture:
            result = solve(ds, QUADRATIC, SolverConfig(lam=0.1, epochs=2, seed=0, gap_tolerance=None),
                           callbacks=[received.append])
        self.assertEqual(received, result.records)
        self.assertEqual([call['record'] for call in capture.calls], result.records)

    def test_deterministic_for_fixed_seed(self):
        ds = make_synthetic(20, 5, seed=5)
        config = SolverConfig(lam=0.05, variant=Variant.MINIBATCH, batch_size=3, epochs=4, seed=9, gap_tolerance=None)
        first = solve(ds, QUADRATIC, config)
        second = solve(ds, QUADRATIC, config)
        self.assertEqual(first.records, second.records)
        np.testing.assert_array_equal(first.state.alpha, second.state.alpha)

    def test_logistic_weak_duality_and_progress(self):
        ds = make_synthetic(40, 6, loss_kind=LossKind.LOGISTIC, seed=6)
        result = solve(ds, LOGISTIC, SolverConfig(lam=0.2, loss=LossKind.LOGISTIC, epochs=20, seed=1))
        for record in result.records:
            self.assertGreaterEqual(record.gap, -1e-9)
        self.assertLess(result.final.gap, result.records[0].gap * 1e-3)

    def test_residual_decay(self):
        ds = make_synthetic(30, 6, seed=7)
        result = solve(ds, QUADRATIC, SolverConfig(lam=1.0, epochs=100, seed=2, gap_tolerance=None))
        self.assertLess(result.final.residual_sq_norm, 1e-8)

    def test_step_size_dominates_theta_star(self):
        ds = make_synthetic(25, 5, seed=8)
        constants = theory_constants(ds, QUADRATIC, 0.1)
        with Capture(iteration_completed) as capture:
            solve(ds, QUADRATIC, SolverConfig(lam=0.1, epochs=3, seed=4, gap_tolerance=None))
        self.assertEqual(len(capture.calls), 75)
        for call in capture.calls:
            self.assertGreaterEqual(call['theta'], constants.theta_star * (1 - 1e-12))

    def test_step_size_dominates_theta_star_under_average_convexity(self):
        ds = make_synthetic(25, 5, seed=8)
        constants = theory_constants(ds, QUADRATIC, 0.1, Regime.AVERAGE_CONVEX)
        config = SolverConfig(lam=0.1, epochs=3, seed=4, gap_tolerance=None, regime=Regime.AVERAGE_CONVEX)
        with Capture(iteration_completed) as capture:
            solve(ds, QUADRATIC, config)
        self.assertEqual(len(capture.calls), 75)
        for call in capture.calls:
            self.assertGreaterEqual(call['theta'], constants.theta_star * (1 - 1e-12))
            p = call['probabilities']
            self.assertAlmostEqual(p.sum(), 1.0, places=12)

    def test_uniform_baseline_step(self):
        ds = make_synthetic(25, 5, seed=8)
        with Capture(iteration_completed) as capture:
            solve(ds, QUADRATIC, SolverConfig(lam=0.1, variant=Variant.UNIFORM, epochs=1, seed=4,
                                              gap_tolerance=None))
        expected = 0.1 / (0.1 * 25 + 1.0 * ds.v.max())
        self.assertTrue(all(call['theta'] == expected for call in capture.calls))
        np.testing.assert_allclose(capture.calls[0]['probabilities'], np.full(25, 1 / 25))

    def test_heuristic_shrinks_sampled_weight(self):
        ds = make_synthetic(20, 5, seed=9)
        solver = DualFreeSolver(ds, QUADRATIC, SolverConfig(lam=0.1, variant=Variant.HEURISTIC, shrink=4.0, seed=3))
        p_star = adaptive_probabilities(solver.state.kappa, ds.v, solver.gamma, 0.1, ds.n)
        with Capture(iteration_completed) as capture:
            solver.step()
        i = int(capture.calls[0]['batch'][0])
        np.testing.assert_allclose(capture.calls[0]['probabilities'], p_star, rtol=1e-12)
        self.assertAlmostEqual(solver._tree[i], p_star[i] / 4.0, places=15)

    def test_minibatch_of_one_matches_adaptive_distribution(self):
        ds = make_synthetic(15, 5, seed=10)
        config = SolverConfig(lam=0.1, variant=Variant.MINIBATCH, batch_size=1, epochs=2, seed=5, gap_tolerance=None)
        with Capture(iteration_completed) as capture:
            solve(ds, QUADRATIC, config)
        self.assertEqual(len(capture.calls), 30)
        for call in capture.calls:
            self.assertEqual(len(call['batch']), 1)
            np.testing.assert_allclose(call['marginals'], call['probabilities'], rtol=0, atol=1e-9)

    def test_minibatch_draws_distinct_coordinates(self):
        ds = make_synthetic(15, 5, seed=10)
        config = SolverConfig(lam=0.1, variant=Variant.MINIBATCH, batch_size=4, epochs=2, seed=5, gap_tolerance=None)
        with Capture(iteration_completed) as capture:
            solve(ds, QUADRATIC, config)
        for call in capture.calls:
            self.assertEqual(len(set(call['batch'].tolist())), 4)
            self.assertAlmostEqual(call['marginals'].sum(), 4.0, places=9)

    def test_reference_solve_logistic(self):
        ds = make_synthetic(12, 4, loss_kind=LossKind.LOGISTIC, seed=11)
        reference = reference_solve(ds, LOGISTIC, 0.5, epochs=300)
        gradient = primal_gradient(reference, ds, LOGISTIC, 0.5)
        self.assertLess(np.linalg.norm(gradient), 1e-6)

    def test_iteration_bound_from_final_state(self):
        ds = make_synthetic(20, 4, seed=12)
        result = solve(ds, QUADRATIC, SolverConfig(lam=0.5, epochs=30, seed=1, gap_tolerance=None))
        self.assertIsNone(result.iteration_bound(None))
        c0 = potential(SolverState(ds.n, ds.d, 0.5), result.state, result.constants.gamma)
        expected = iteration_bound(result.constants, c0, 1e-8)
        self.assertEqual(result.iteration_bound(1e-8), expected)
        self.assertGreater(expected, 0)
        self.assertGreater(result.iteration_bound(1e-12), expected)


@tag('slow')
@override_settings(SOLVER_SETTINGS={'record_wall_time': False})
class ConvergenceRateTests(SimpleTestCase):
    """الخصائص الإحصائية على مسارات عدة بذور"""

    def setUp(self):
        self.lam = 0.1
        self.ds = make_synthetic(50, 10, spread=1.0, seed=12)
        self.reference = reference_solve(self.ds, QUADRATIC, self.lam)
        self.constants = theory_constants(self.ds, QUADRATIC, self.lam)

    def fixed_config(self, seed, regime=Regime.ALL_CONVEX):
        return SolverConfig(lam=self.lam, epochs=10, seed=seed, theta_mode=ThetaMode.FIXED, gap_tolerance=None,
                            regime=regime)

    def median_potential_ratio(self, constants, regime):
        trajectories = []
        for seed in range(20):
            values = []
            solver = DualFreeSolver(self.ds, QUADRATIC, self.fixed_config(seed, regime))
            initial = potential(solver.state, self.reference, constants.gamma)

            def track(state, **kwargs):
                values.append(potential(state, self.reference, constants.gamma))

            with Capture(iteration_completed, track):
                solver.run()
            trajectories.append(np.array(values) / initial)
        return np.median(np.vstack(trajectories), axis=0)

    def test_linear_rate(self):
        median = self.median_potential_ratio(self.constants, Regime.ALL_CONVEX)
        steps = np.arange(1, median.size + 1)
        self.assertEqual(median.size, 10 * self.ds.n)
        bound = 1.5 * (1.0 - self.constants.theta_star) ** steps
        self.assertTrue(np.all(median <= bound), f"worst ratio {np.max(median / bound):.3f}")

    def test_linear_rate_under_average_convexity(self):
        constants = theory_constants(self.ds, QUADRATIC, self.lam, Regime.AVERAGE_CONVEX)
        self.assertEqual(constants.gamma, float(np.mean((self.ds.v * QUADRATIC.smoothness) ** 2)))
        self.assertLess(constants.theta_star, self.constants.theta_star)

        median = self.median_potential_ratio(constants, Regime.AVERAGE_CONVEX)
        steps = np.arange(1, median.size + 1)
        self.assertEqual(median.size, 10 * self.ds.n)
        bound = 1.5 * (1.0 - constants.theta_star) ** steps
        self.assertTrue(np.all(median <= bound), f"worst ratio {np.max(median / bound):.3f}")
        self.assertLess(median[-1], 1.0)

    def test_variance_bound(self):
        ds, reference, constants = self.ds, self.reference, self.constants
        checked = []

        def check(state, **kwargs):
            p = adaptive_probabilities(state.kappa, ds.v, constants.gamma, self.lam, ds.n)
            variance = variance_of_update(state, p, ds)
            dual_distance = float(np.sum((state.alpha - reference.alpha) ** 2))
            primal_distance = float(np.sum((state.w - reference.w) ** 2))
            self.assertLessEqual(variance, 2 * constants.M * (dual_distance + constants.L * primal_distance))

            residual = float(np.dot(state.kappa, state.kappa))
            self.assertLessEqual(variance, constants.M * residual * (1 + 1e-12))
            # κ = (α - α*) + (φ'(z) - φ'(z*))
            margin_part = QUADRATIC.derivative(state.z, ds.y) - QUADRATIC.derivative(reference.z, ds.y)
            bound = 2 * constants.M * (dual_distance + np.sum(margin_part ** 2))
            self.assertLessEqual(variance, bound * (1 + 1e-9))
            checked.append(variance)

        with Capture(epoch_completed, check):
            solve(ds, QUADRATIC, self.fixed_config(0))
        self.assertEqual(len(checked), 11)
        self.assertLess(checked[-1], checked[0])


@tag('slow')
@override_settings(SOLVER_SETTINGS={'record_wall_time': False})
class VariantOrderingTests(SimpleTestCase):
    """ترتيب النسخ بعدد الدورات اللازمة لبلوغ فجوة 1e-6"""

    tolerance = 1e-6

    def median_epochs(self, ds, lam, budget, **options):
        counts = []
        for seed in range(20):
            config = SolverConfig(lam=lam, epochs=budget, seed=seed, gap_tolerance=self.tolerance, **options)
            epochs = epochs_to_tolerance(solve(ds, QUADRATIC, config).records, self.tolerance)
            counts.append(np.inf if epochs is None else epochs)
        return float(np.median(counts))

    def test_adaptive_beats_heuristic_beats_uniform(self):
        ds = make_synthetic(60, 10, spread=2.0, seed=13)
        lam = 0.1
        adaptive = self.median_epochs(ds, lam, 150, variant=Variant.ADAPTIVE)
        plus_ten = self.median_epochs(ds, lam, 150, variant=Variant.HEURISTIC, shrink=10.0)
        plus_one = self.median_epochs(ds, lam, 150, variant=Variant.HEURISTIC, shrink=1.0)
        uniform = self.median_epochs(ds, lam, 150, variant=Variant.UNIFORM)
        self.assertTrue(np.isfinite(plus_ten))
        self.assertLess(adaptive, plus_ten)
        self.assertLess(plus_ten, uniform)
        self.assertGreaterEqual(plus_one, plus_ten)

    def test_minibatch_passes_stay_close(self):
        ds = make_synthetic(64, 8, spread=1.0, seed=14)
        lam = 1.0
        serial = self.median_epochs(ds, lam, 80, variant=Variant.MINIBATCH, batch_size=1)
        self.assertTrue(np.isfinite(serial))
        for b in (2, 4, 8):
            batched = self.median_epochs(ds, lam, 80, variant=Variant.MINIBATCH, batch_size=b)
            self.assertLessEqual(batched, 2 * serial, f"b={b}")
