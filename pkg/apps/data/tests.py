import gzip
import io
import os
import tempfile

import numpy as np
from scipy import sparse
from django.test import SimpleTestCase

from apps.core.exceptions import DataIOError, FeatureIndexError, ParseError, RangeError
from apps.losses.models import LossKind, LossModel
from .models import Dataset, Regime
from .utils import (
    eso_constants,
    iteration_bound,
    load_dataset,
    make_synthetic,
    parse_libsvm,
    theory_constants,
    write_libsvm,
)

TWO_SAMPLES = "+1 1:1 3:2\n-1 2:1\n"
QUADRATIC = LossModel(LossKind.QUADRATIC)


def dense_dataset(rows, labels):
    return Dataset(sparse.csr_matrix(np.asarray(rows, dtype=float)), labels)


class ParseLibsvmTests(SimpleTestCase):

    def test_small_example(self):
        ds = parse_libsvm(TWO_SAMPLES)
        self.assertEqual((ds.n, ds.d), (2, 3))
        np.testing.assert_array_equal(ds.v, [5.0, 1.0])
        np.testing.assert_array_equal(ds.feature_nnz, [1, 1, 1])
        np.testing.assert_array_equal(ds.y, [1.0, -1.0])

    def test_empty_input(self):
        with self.assertRaises(ParseError):
            parse_libsvm("")

    def test_malformed_token_reports_line(self):
        with self.assertRaises(ParseError) as ctx:
            parse_libsvm("1 1:1\n1 2-3\n")
        self.assertEqual(ctx.exception.line, 2)

    def test_non_increasing_indices(self):
        with self.assertRaises(FeatureIndexError):
            parse_libsvm("1 3:1 2:1\n")

    def test_duplicate_index_is_rejected(self):
        with self.assertRaises(ParseError):
            parse_libsvm("1 2:1 2:1\n")

    def test_label_normalization(self):
        np.testing.assert_array_equal(parse_libsvm("0 1:1\n1 1:2\n").y, [-1.0, 1.0])
        np.testing.assert_array_equal(parse_libsvm("2 1:1\n1 1:2\n").y, [1.0, -1.0])
        np.testing.assert_array_equal(parse_libsvm("0.5 1:1\n1.5 1:2\n").y, [0.5, 1.5])

    def test_feature_count_override(self):
        self.assertEqual(parse_libsvm(TWO_SAMPLES, n_features=10).d, 10)
        with self.assertRaises(ParseError):
            parse_libsvm(TWO_SAMPLES, n_features=2)

    def test_round_trip(self):
        ds = make_synthetic(30, 12, density=0.4, seed=7)
        buffer = io.StringIO()
        write_libsvm(ds, buffer)
        again = parse_libsvm(buffer.getvalue(), n_features=ds.d)
        self.assertEqual((again.X != ds.X).nnz, 0)
        np.testing.assert_array_equal(again.y, ds.y)
        np.testing.assert_array_equal(again.v, ds.v)
        np.testing.assert_array_equal(again.feature_nnz, ds.feature_nnz)

    def test_row_and_column_views_agree(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            dense = np.where(rng.random((9, 7)) < 0.3, rng.standard_normal((9, 7)), 0.0)
            dense[:, 0] += 1.0
            ds = dense_dataset(dense, np.ones(9))
            rebuilt = np.zeros_like(dense)
            for f in range(ds.d):
                samples, values = ds.column(f)
                rebuilt[samples, f] = values
            np.testing.assert_array_equal(rebuilt, dense)
            for i in range(ds.n):
                indices, values = ds.row(i)
                np.testing.assert_array_equal(dense[i, indices], values)


class LoadDatasetTests(SimpleTestCase):

    def test_plain_and_gzip_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            plain = os.path.join(tmp, 'small.txt')
            packed = os.path.join(tmp, 'small.txt.gz')
            with open(plain, 'w', encoding='utf-8') as f:
                f.write(TWO_SAMPLES)
            with gzip.open(packed, 'wt', encoding='utf-8') as f:
                f.write(TWO_SAMPLES)
            np.testing.assert_array_equal(load_dataset(plain).v, load_dataset(packed).v)

    def test_missing_file(self):
        with self.assertRaises(DataIOError) as ctx:
            load_dataset('/nonexistent/data.txt')
        self.assertIn('/nonexistent/data.txt', str(ctx.exception))

    def test_invalid_utf8_names_path_and_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'latin.txt')
            with open(path, 'wb') as f:
                f.write(b'1 1:1.0\n\xff\xfe 2:1\n')
            with self.assertRaises(ParseError) as ctx:
                load_dataset(path)
        self.assertEqual(ctx.exception.line, 2)
        self.assertIn(path, str(ctx.exception))

    def test_truncated_gzip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'cut.txt.gz')
            payload = gzip.compress(TWO_SAMPLES.encode('utf-8') * 50)
            with open(path, 'wb') as f:
                f.write(payload[:len(payload) // 2])
            with self.assertRaises(DataIOError):
                load_dataset(path)


class EsoConstantsTests(SimpleTestCase):

    def test_serial_batch_keeps_v(self):
        ds = make_synthetic(10, 4, seed=1)
        np.testing.assert_array_equal(eso_constants(ds, 1), ds.v)

    def test_capped_by_column_count(self):
        ds = dense_dataset([[np.sqrt(3.0), 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]], np.ones(4))
        self.assertEqual(ds.max_feature_nnz, 2)
        self.assertAlmostEqual(eso_constants(ds, 4)[0], 6.0, places=12)

    def test_two_sample_example(self):
        ds = parse_libsvm(TWO_SAMPLES)
        np.testing.assert_array_equal(eso_constants(ds, 2), ds.v)

    def test_range(self):
        ds = parse_libsvm(TWO_SAMPLES)
        with self.assertRaises(RangeError):
            eso_constants(ds, 0)
        with self.assertRaises(RangeError):
            eso_constants(ds, 3)


class TheoryConstantsTests(SimpleTestCase):

    def setUp(self):
        self.ds = dense_dataset([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])

    def test_serial_theta_star(self):
        constants = theory_constants(self.ds, QUADRATIC, 1.0)
        self.assertAlmostEqual(constants.gamma, 1.0)
        self.assertAlmostEqual(constants.theta_star, 1.0 / 3.0, places=15)

    def test_batch_theta_star(self):
        constants = theory_constants(self.ds, QUADRATIC, 1.0, b=2)
        self.assertAlmostEqual(constants.theta_star, 2.0 / 3.0, places=15)

    def test_zero_sample_gives_unit_theta(self):
        ds = Dataset(sparse.csr_matrix((1, 1)), [1.0])
        self.assertEqual(theory_constants(ds, QUADRATIC, 1.0).theta_star, 1.0)

    def test_invalid_lambda(self):
        with self.assertRaises(RangeError):
            theory_constants(self.ds, QUADRATIC, 0.0)

    def test_q_between_extremes(self):
        ds = make_synthetic(40, 8, spread=2.0, seed=2)
        constants = theory_constants(ds, QUADRATIC, 0.1)
        self.assertLessEqual(ds.v.min(), constants.Q)
        self.assertLessEqual(constants.Q, ds.v.max())
        self.assertAlmostEqual(constants.M, constants.Q * (1 + constants.gamma * constants.Q / (0.01 * 40)))

    def test_theta_star_decreases_with_gamma(self):
        ds = make_synthetic(20, 5, seed=3)
        logistic = theory_constants(ds, LossModel(LossKind.LOGISTIC), 0.1)
        quadratic = theory_constants(ds, QUADRATIC, 0.1)
        self.assertLess(quadratic.gamma, 1.0)
        self.assertGreater(logistic.theta_star, quadratic.theta_star)

    def test_average_regime_uses_gamma_bar(self):
        ds = make_synthetic(20, 5, seed=3)
        constants = theory_constants(ds, QUADRATIC, 0.1, regime=Regime.AVERAGE_CONVEX)
        self.assertAlmostEqual(constants.gamma, float(np.mean(ds.v ** 2)))
        self.assertEqual(constants.gamma_kind, 'gamma_bar')

    def test_iteration_bound(self):
        constants = theory_constants(self.ds, QUADRATIC, 1.0)
        self.assertEqual(iteration_bound(constants, 1.0, 10.0), 0)
        # (2 + 1) * log(2 / 2e-6)
        self.assertEqual(iteration_bound(constants, 1.0, 1e-6), int(np.ceil(3 * np.log(1e6))))


class SyntheticTests(SimpleTestCase):

    def test_norm_spread(self):
        ds = make_synthetic(50, 10, spread=2.0, seed=0)
        self.assertAlmostEqual(ds.v.max() / ds.v.min(), 100.0, places=6)

    def test_reproducible(self):
        a = make_synthetic(15, 6, seed=9)
        b = make_synthetic(15, 6, seed=9)
        np.testing.assert_array_equal(a.X.toarray(), b.X.toarray())
        np.testing.assert_array_equal(a.y, b.y)
