import io
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings, tag
from scipy import sparse

from apps.core.exceptions import DataIOError, ParseError, RangeError
from apps.data.models import Dataset
from apps.data.utils import make_synthetic
from apps.losses.models import LossKind, LossModel
from apps.solver.engine import RunStatus, solve
from apps.solver.models import SolverConfig, SolverState
from apps.solver.utils import closed_form_ridge
from .models import RunRecord
from .utils import (
    duality_gap,
    dual_objective_mapped,
    epochs_to_tolerance,
    histogram_rows,
    make_record,
    primal_gradient,
    primal_objective,
    read_csv,
    residual_histogram,
    write_csv,
    write_histogram_csv,
)

QUADRATIC = LossModel(LossKind.QUADRATIC)
LOGISTIC = LossModel(LossKind.LOGISTIC)


def record(epoch, gap, **overrides):
    values = dict(epoch=epoch, primal=gap, dual=0.0, gap=gap, residual_sq_norm=1.0, theta_used=0.5, wall_ms=0.0)
    values.update(overrides)
    return RunRecord(**values)


class ObjectiveTests(SimpleTestCase):

    def setUp(self):
        self.ds = Dataset(sparse.csr_matrix([[1.0], [1.0]]), [1.0, 1.0])
        self.zero = SolverState(2, 1, 1.0)

    def test_quadratic_primal_at_zero(self):
        self.assertAlmostEqual(primal_objective(self.zero, self.ds, QUADRATIC, 1.0), 0.5)

    def test_logistic_primal_at_zero(self):
        self.assertAlmostEqual(primal_objective(self.zero, self.ds, LOGISTIC, 1.0), math.log(2.0))

    def test_regularizer_is_included(self):
        state = SolverState(2, 1, 2.0)
        state.w = np.array([1.0])
        state.z = self.ds.X @ state.w
        # الخسارة صفرية عند z = y فيبقى λ/2·‖w‖²
        self.assertAlmostEqual(primal_objective(state, self.ds, QUADRATIC, 2.0), 1.0)

    def test_gradient_vanishes_at_closed_form(self):
        ds = make_synthetic(40, 6, seed=3)
        state = closed_form_ridge(ds, 0.1)
        gradient = primal_gradient(state, ds, QUADRATIC, 0.1)
        self.assertLess(np.linalg.norm(gradient), 1e-9)


class DualityGapTests(SimpleTestCase):

    def test_strong_duality_at_optimum(self):
        ds = make_synthetic(50, 8, seed=4)
        state = closed_form_ridge(ds, 0.2)
        self.assertLess(abs(duality_gap(state, ds, QUADRATIC, 0.2)), 1e-9)

    def test_weak_duality_at_random_points(self):
        rng = np.random.default_rng(5)
        for loss in (QUADRATIC, LOGISTIC):
            ds = make_synthetic(30, 5, loss_kind=loss.kind, seed=6)
            for _ in range(20):
                state = SolverState(ds.n, ds.d, 0.3)
                state.w = rng.standard_normal(ds.d)
                state.z = ds.X @ state.w
                self.assertGreaterEqual(duality_gap(state, ds, loss, 0.3), -1e-12)

    def test_logistic_dual_point_stays_in_domain(self):
        ds = make_synthetic(20, 4, loss_kind=LossKind.LOGISTIC, seed=7)
        state = SolverState(ds.n, ds.d, 0.1)
        state.w = np.full(ds.d, 50.0)
        state.z = ds.X @ state.w
        self.assertTrue(math.isfinite(dual_objective_mapped(state, ds, LOGISTIC, 0.1)))

    def test_record_gap_matches_parts(self):
        ds = make_synthetic(20, 4, seed=8)
        state = SolverState(ds.n, ds.d, 0.5)
        result = make_record(state, ds, QUADRATIC, theta_used=0.25, wall_ms=3.0)
        self.assertEqual(result.gap, result.primal - result.dual)
        self.assertEqual(result.epoch, 0.0)
        self.assertEqual(result.theta_used, 0.25)
        self.assertAlmostEqual(result.residual_sq_norm, float(np.dot(ds.y, ds.y)))

    def test_precomputed_objectives_are_reused(self):
        ds = make_synthetic(10, 3, seed=9)
        state = SolverState(ds.n, ds.d, 0.5)
        self.assertEqual(duality_gap(state, ds, QUADRATIC, 0.5, primal=3.0, dual=1.0), 2.0)
        self.assertEqual(
            duality_gap(state, ds, QUADRATIC, 0.5),
            primal_objective(state, ds, QUADRATIC, 0.5) - dual_objective_mapped(state, ds, QUADRATIC, 0.5),
        )


@tag('slow')
@override_settings(SOLVER_SETTINGS={'record_wall_time': False})
class GapTrajectoryTests(SimpleTestCase):

    def test_median_gap_does_not_increase_after_first_epoch(self):
        ds = make_synthetic(30, 5, spread=1.0, seed=15)
        trajectories = []
        for seed in range(20):
            config = SolverConfig(lam=0.1, epochs=8, seed=seed, gap_tolerance=None)
            result = solve(ds, QUADRATIC, config)
            self.assertEqual(result.status, RunStatus.BUDGET)
            trajectories.append([record.gap for record in result.records])

        median = np.median(np.array(trajectories), axis=0)
        self.assertEqual(median.size, 9)
        self.assertTrue(np.all(np.diff(median[1:]) <= 0), median)
        self.assertLess(median[-1], median[0])


class ResidualHistogramTests(SimpleTestCase):

    def test_zero_residues_fall_in_first_bin(self):
        counts, _edges = residual_histogram(np.zeros(5), bins=4)
        np.testing.assert_array_equal(counts, [5, 0, 0, 0])

    def test_equal_residues_fall_in_last_bin(self):
        counts, _edges = residual_histogram([1.0, -1.0, 1.0], bins=3)
        np.testing.assert_array_equal(counts, [0, 0, 3])

    def test_counts_sum_to_sample_count(self):
        kappa = np.random.default_rng(9).standard_normal(101)
        counts, edges = residual_histogram(kappa, bins=7)
        self.assertEqual(int(counts.sum()), 101)
        self.assertEqual(edges.size, 8)

    def test_needs_a_bin(self):
        for bins in (0, -1):
            with self.subTest(bins=bins), self.assertRaises(RangeError):
                residual_histogram([1.0], bins=bins)

    def test_default_bin_count(self):
        counts, _edges = residual_histogram([0.5, 1.0])
        self.assertEqual(counts.size, 20)

    def test_rows_and_file(self):
        rows = histogram_rows(2.0, [0.0, 1.0, -2.0], bins=2)
        self.assertEqual(rows, [(2.0, 0, 0.0, 1.0, 1), (2.0, 1, 1.0, 2.0, 2)])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'residuals.csv'
            write_histogram_csv(rows, path)
            lines = path.read_text(encoding='utf-8').splitlines()
        self.assertEqual(lines, ['epoch,bin,lower,upper,count', '2,0,0,1,1', '2,1,1,2,2'])


class CsvTests(SimpleTestCase):

    def test_empty_input_writes_header_only(self):
        sink = io.StringIO()
        write_csv([], sink)
        self.assertEqual(sink.getvalue(), 'epoch,primal,dual,gap,residual_sq_norm,theta_used,wall_ms\n')

    def test_one_record_writes_two_lines(self):
        sink = io.StringIO()
        write_csv([record(0.0, 0.1)], sink)
        self.assertEqual(len(sink.getvalue().splitlines()), 2)

    def test_values_read_back_bit_exact(self):
        rng = np.random.default_rng(10)
        records = [record(float(k), float(rng.random()) / 3.0, primal=float(rng.random()) * 1e-7) for k in range(5)]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'run.csv'
            write_csv(records, path)
            self.assertEqual(read_csv(path), records)

    def test_unwritable_path(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(DataIOError):
                write_csv([], Path(tmp) / 'missing' / 'run.csv')

    def test_bad_header(self):
        with self.assertRaises(ParseError) as ctx:
            read_csv(io.StringIO('epoch,gap\n0,1\n'))
        self.assertEqual(ctx.exception.line, 1)

    def test_bad_value_reports_line(self):
        header = ','.join(RunRecord.columns())
        with self.assertRaises(ParseError) as ctx:
            read_csv(io.StringIO(f'{header}\n0,1,1,0,1,0,0\n1,x,1,0,1,0,0\n'))
        self.assertEqual(ctx.exception.line, 3)


class EpochsToToleranceTests(SimpleTestCase):

    def test_first_epoch_below_tolerance(self):
        records = [record(0.0, 1.0), record(1.0, 1e-3), record(2.0, 1e-6), record(3.0, 1e-9)]
        self.assertEqual(epochs_to_tolerance(records, 1e-5), 2.0)
        self.assertEqual(epochs_to_tolerance(records, 1.0), 0.0)

    def test_never_reached(self):
        self.assertIsNone(epochs_to_tolerance([record(0.0, 1.0)], 1e-3))
