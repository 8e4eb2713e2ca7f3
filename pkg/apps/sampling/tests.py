from collections import Counter
from itertools import combinations

import numpy as np
from django.test import SimpleTestCase, tag

from apps.core.exceptions import DegenerateDistribution, InfeasibleMarginal, InvalidMarginal
from .utils import (
    alias_build,
    alias_sample,
    clip_marginals,
    minibatch_decompose,
    minibatch_sample,
    mixture_marginals,
    subset_probability,
    sumtree_build,
    sumtree_sample,
    sumtree_total,
    sumtree_update,
    sumtree_weights,
)

FIGURE_MARGINALS = [0.8, 0.6, 0.4, 0.2]


def six_sigma(p, draws):
    return 6.0 * np.sqrt(p * (1.0 - p) / draws)


def random_marginals(rng, n, b):
    return clip_marginals(rng.dirichlet(np.ones(n)), b)


class AliasTableTests(SimpleTestCase):

    def test_point_mass(self):
        rng = np.random.default_rng(0)
        table = alias_build([1.0, 0.0])
        self.assertTrue(all(alias_sample(table, rng) == 0 for _ in range(1000)))
        table = alias_build([1.0, 0.0, 0.0])
        self.assertTrue(all(alias_sample(table, rng) == 0 for _ in range(1000)))

    def test_reconstruction_small(self):
        np.testing.assert_allclose(alias_build([0.5, 0.5]).probabilities(), [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(
            alias_build([0.1, 0.2, 0.3, 0.4]).probabilities(), [0.1, 0.2, 0.3, 0.4], atol=1e-12
        )

    def test_reconstruction_random(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(2, 65))
            p = rng.dirichlet(np.ones(n))
            p[rng.random(n) < 0.2] = 0.0
            if p.sum() == 0:
                p[0] = 1.0
            p /= p.sum()
            table = alias_build(p)
            np.testing.assert_allclose(table.probabilities(), p, rtol=0, atol=1e-12)

    def test_degenerate(self):
        with self.assertRaises(DegenerateDistribution):
            alias_build([0.0, 0.0])

    @tag('slow')
    def test_frequencies(self):
        rng = np.random.default_rng(2)
        draws = 10 ** 6
        for p in ([0.5, 0.5], [0.1, 0.9]):
            table = alias_build(p)
            counts = np.bincount([alias_sample(table, rng) for _ in range(draws)], minlength=2)
            for k in range(2):
                self.assertLessEqual(abs(counts[k] / draws - p[k]), six_sigma(p[k], draws))
            if p[0] == 0.5:
                self.assertTrue(0.497 <= counts[0] / draws <= 0.503)


class SumTreeTests(SimpleTestCase):

    def test_root_sum(self):
        self.assertEqual(sumtree_total(sumtree_build([1, 2, 3])), 6.0)

    def test_point_mass(self):
        rng = np.random.default_rng(3)
        tree = sumtree_build([3, 0, 0])
        self.assertTrue(all(sumtree_sample(tree, rng) == 0 for _ in range(1000)))

    def test_single_leaf(self):
        rng = np.random.default_rng(3)
        tree = sumtree_build([2.0])
        self.assertEqual(sumtree_sample(tree, rng), 0)
        sumtree_update(tree, 0, 5.0)
        self.assertEqual(sumtree_total(tree), 5.0)

    def test_update_then_sample(self):
        rng = np.random.default_rng(4)
        tree = sumtree_build([1, 1, 1, 1])
        sumtree_update(tree, 0, 0)
        draws = 10 ** 5
        counts = np.bincount([sumtree_sample(tree, rng) for _ in range(draws)], minlength=4)
        self.assertEqual(counts[0], 0)
        for k in range(1, 4):
            self.assertLessEqual(abs(counts[k] / draws - 1 / 3), six_sigma(1 / 3, draws))

    def test_degenerate(self):
        with self.assertRaises(DegenerateDistribution):
            sumtree_build([0, 0, 0])
        tree = sumtree_build([1.0, 0.0])
        sumtree_update(tree, 0, 0.0)
        with self.assertRaises(DegenerateDistribution):
            sumtree_sample(tree, np.random.default_rng(0))

    def test_consistency_under_fuzzed_updates(self):
        rng = np.random.default_rng(5)
        n = 37
        tree = sumtree_build(rng.random(n))
        for _ in range(10 ** 4):
            sumtree_update(tree, int(rng.integers(n)), float(rng.exponential()))
        nodes = tree.nodes
        internal = np.arange(1, tree.capacity)
        tolerance = n * 1e-12 * tree.total
        self.assertTrue(np.all(np.abs(nodes[internal] - nodes[2 * internal] - nodes[2 * internal + 1]) <= tolerance))
        self.assertTrue(np.all(sumtree_weights(tree) >= 0))
        self.assertAlmostEqual(tree.total, float(sumtree_weights(tree).sum()), delta=tolerance)


class DecomposeTests(SimpleTestCase):

    def test_worked_example(self):
        mixture = minibatch_decompose(FIGURE_MARGINALS, 2)
        self.assertEqual(mixture.m, 3)
        np.testing.assert_allclose(mixture.r, [0.2, 0.4, 0.4], rtol=0, atol=1e-12)
        self.assertEqual([(i, j) for _, i, j in mixture.components], [(2, 2), (2, 3), (1, 4)])

    def test_uniform_single_component(self):
        n, b = 7, 3
        mixture = minibatch_decompose(np.full(n, b / n), b)
        self.assertEqual(mixture.m, 1)
        self.assertAlmostEqual(mixture.r[0], 1.0, places=12)
        self.assertEqual(mixture.components[0][1:], (1, n))

    def test_invalid_marginals(self):
        with self.assertRaises(InvalidMarginal):
            minibatch_decompose([0.5, 0.5, 1.0], 2)
        with self.assertRaises(InvalidMarginal):
            minibatch_decompose([0.5, 0.5, 0.5], 2)
        with self.assertRaises(InvalidMarginal):
            minibatch_decompose([0.5, 0.5], 2)

    def test_analytic_marginals_are_exact(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            n = int(rng.integers(2, 65))
            b = int(rng.integers(1, n))
            q = random_marginals(rng, n, b)
            mixture = minibatch_decompose(q, b)
            np.testing.assert_allclose(mixture_marginals(mixture), q, rtol=0, atol=1e-9)
            self.assertAlmostEqual(float(mixture.r.sum()), 1.0, delta=1e-9)
            self.assertTrue(np.all(mixture.r > 0))
            self.assertTrue(np.all(mixture.starts <= b) and np.all(b <= mixture.ends))
            self.assertTrue(np.all(1 <= mixture.starts) and np.all(mixture.ends <= n))
            self.assertLessEqual(mixture.m, n)

    def test_random_instance_n8_b3(self):
        rng = np.random.default_rng(7)
        q = random_marginals(rng, 8, 3)
        np.testing.assert_allclose(mixture_marginals(minibatch_decompose(q, 3)), q, atol=1e-9)

    def test_every_subset_has_positive_probability(self):
        rng = np.random.default_rng(8)
        for n in range(2, 7):
            for b in range(1, n):
                q = random_marginals(rng, n, b)
                mixture = minibatch_decompose(q, b)
                probabilities = [subset_probability(mixture, s) for s in combinations(range(n), b)]
                self.assertTrue(all(p > 0 for p in probabilities))
                self.assertAlmostEqual(sum(probabilities), 1.0, places=9)

    def test_serial_batch_reproduces_distribution(self):
        p = np.array([0.5, 0.25, 0.125, 0.125])
        np.testing.assert_allclose(mixture_marginals(minibatch_decompose(p, 1)), p, atol=1e-12)


class MinibatchSampleTests(SimpleTestCase):

    def test_forced_first_component(self):
        mixture = minibatch_decompose(FIGURE_MARGINALS, 2)
        batch = minibatch_sample(mixture, np.random.default_rng(0), component=0)
        self.assertEqual(batch.tolist(), [0, 1])

    def test_batches_have_fixed_size_without_duplicates(self):
        rng = np.random.default_rng(9)
        q = random_marginals(rng, 12, 4)
        mixture = minibatch_decompose(q, 4)
        for _ in range(2000):
            batch = minibatch_sample(mixture, rng)
            self.assertEqual(batch.size, 4)
            self.assertEqual(np.unique(batch).size, 4)

    def test_uniform_mixture_covers_all_subsets(self):
        rng = np.random.default_rng(10)
        mixture = minibatch_decompose(np.full(5, 0.4), 2)
        draws = 10 ** 5
        counts = Counter(tuple(minibatch_sample(mixture, rng).tolist()) for _ in range(draws))
        self.assertEqual(len(counts), 10)
        for count in counts.values():
            self.assertLessEqual(abs(count / draws - 0.1), six_sigma(0.1, draws))

    @tag('slow')
    def test_empirical_marginals(self):
        rng = np.random.default_rng(11)
        mixture = minibatch_decompose(FIGURE_MARGINALS, 2)
        draws = 10 ** 5
        counts = np.zeros(4)
        for _ in range(draws):
            counts[minibatch_sample(mixture, rng)] += 1
        for k, q in enumerate(FIGURE_MARGINALS):
            self.assertLessEqual(abs(counts[k] / draws - q), six_sigma(q, draws))


class ClipMarginalsTests(SimpleTestCase):

    def test_uniform(self):
        np.testing.assert_allclose(clip_marginals([0.25] * 4, 2), [0.5] * 4)

    def test_capping(self):
        q = clip_marginals([0.7, 0.1, 0.1, 0.1], 2)
        self.assertAlmostEqual(q[0], 1 - 1e-9, places=15)
        np.testing.assert_allclose(q[1:], (1 + 1e-9) / 3, rtol=1e-12)
        self.assertAlmostEqual(float(q.sum()), 2.0, delta=1e-9)

    def test_infeasible(self):
        with self.assertRaises(InfeasibleMarginal):
            clip_marginals([1.0, 0.0, 0.0], 2)

    def test_zero_entries_stay_zero(self):
        q = clip_marginals([0.6, 0.0, 0.2, 0.2], 2)
        self.assertEqual(q[1], 0.0)
        self.assertTrue(np.all(q < 1))
        self.assertAlmostEqual(float(q.sum()), 2.0, delta=1e-9)
