import math
from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase

from mil.instance import (ActiveSet, InstanceModel, LabelingCandidate, admissible_labelings, check_labeling,
                          initial_labeling, labeling_value, most_violated_labeling, restricted_mkl,
                          score_instance, train_instance_model)
from mil.kernels import GramMatrix, KernelSpec, augment, gram_matrix
from mil.solvers import simplex_qp_max
from utils.exceptions import EnumerationTooLarge, InfeasibleLabeling, InputError, KernelStateError
from .helpers import cluster, make_problem, negative, positive


def random_bags(rng, sizes, n_negative=1, dim=2):
    bags = [positive(f'p{i}', rng.standard_normal((size, dim)) + 1.0) for i, size in enumerate(sizes)]
    bags += [negative(f'n{i}', rng.standard_normal((2, dim)) - 1.0) for i in range(n_negative)]
    return bags


def forms(gram, labelings, C):
    return [np.outer(y, y) * gram.entries + np.eye(gram.n) / C for y in labelings]


class LabelingTestCase(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_initial_labeling(self):
        bags = [positive('p', np.zeros((3, 2))), negative('n', np.zeros((2, 2)))]
        self.assertEqual(initial_labeling(bags).y, (1, 1, 1, -1, -1))

    def test_admissible_counts(self):
        neg = negative('n', np.zeros((2, 1)))
        pair = positive('p', np.zeros((2, 1)))
        self.assertEqual(len(list(admissible_labelings([pair, neg], 0.7))), 1)
        self.assertEqual(len(list(admissible_labelings([pair, neg], 0.5))), 3)
        other = positive('q', np.zeros((2, 1)))
        labelings = list(admissible_labelings([pair, other, neg], 0.5))
        self.assertEqual(len(labelings), 9)
        self.assertEqual(len(set(labelings)), 9)
        self.assertEqual(labelings[0].y, (1, 1, 1, 1, -1, -1))

    def test_unit_delta_has_single_labeling(self):
        bags = random_bags(self.rng, [3, 2])
        labelings = list(admissible_labelings(bags, 1.0))
        self.assertEqual(labelings, [initial_labeling(bags, 1.0)])

    def test_emitted_labelings_satisfy_portion_constraint(self):
        """Test every enumerated labeling keeps ceil(delta |B|) positives per positive bag"""
        checked = 0
        for trial in range(60):
            sizes = [int(s) for s in self.rng.integers(1, 5, size=3)]
            delta = [0.3, 0.5, 0.7, 1.0][trial % 4]
            bags = random_bags(self.rng, sizes)
            labelings = list(admissible_labelings(bags, delta))
            expected = math.prod(
                sum(math.comb(s, j) for j in range(math.ceil(Fraction(str(delta)) * s), s + 1)) for s in sizes)
            self.assertEqual(len(labelings), expected)
            self.assertEqual(len(set(labelings)), expected)
            for labeling in labelings:
                start = 0
                for bag in bags:
                    part = labeling.y[start:start + bag.size]
                    start += bag.size
                    if bag.is_positive:
                        self.assertGreaterEqual(part.count(1), math.ceil(Fraction(str(delta)) * bag.size))
                    else:
                        self.assertEqual(set(part), {-1})
                checked += 1
        self.assertGreaterEqual(checked, 1000)

    def test_check_labeling_rejects(self):
        bags = [positive('p', np.zeros((2, 1))), negative('n', np.zeros((1, 1)))]
        with self.assertRaises(InfeasibleLabeling):
            check_labeling(LabelingCandidate((1, 1, 1)), bags, 0.5)
        with self.assertRaises(InfeasibleLabeling):
            check_labeling(LabelingCandidate((-1, -1, -1)), bags, 0.5)
        with self.assertRaises(InfeasibleLabeling):
            check_labeling(LabelingCandidate((1, -1)), bags, 0.5)
        self.assertEqual(check_labeling(LabelingCandidate((1, -1, -1)), bags, 0.5).y, (1, -1, -1))

    def test_enumeration_guard_is_eager(self):
        bags = [positive('p', np.zeros((21, 1))), negative('n', np.zeros((1, 1)))]
        with self.assertRaises(EnumerationTooLarge):
            admissible_labelings(bags, 0.5)

    def test_active_set_invariants(self):
        y = LabelingCandidate((1, -1))
        with self.assertRaises(InputError):
            ActiveSet(())
        with self.assertRaises(InputError):
            ActiveSet((y, y))
        active = ActiveSet((y,)).with_labeling(LabelingCandidate((1, 1)))
        self.assertEqual(len(active), 2)
        self.assertIn(y, active)
        np.testing.assert_array_equal(active.matrix, [[1, -1], [1, 1]])


class MostViolatedLabelingTestCase(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(1)

    def test_forced_labeling(self):
        bags = random_bags(self.rng, [3, 2])
        alpha = self.rng.uniform(size=7)
        gram = gram_matrix(np.vstack([bag.matrix for bag in bags]), KernelSpec())
        self.assertEqual(most_violated_labeling(alpha, gram, bags, 1.0), initial_labeling(bags))

    def test_labeling_independent_value_picks_first(self):
        """Test K = I with uniform alpha returns the lexicographically first labeling"""
        bags = random_bags(self.rng, [2, 3])
        n = 7
        violator = most_violated_labeling(np.full(n, 1.0 / n), GramMatrix(np.eye(n)), bags, 0.5)
        self.assertEqual(violator.y, (1, 1, 1, 1, 1, -1, -1))

    def test_matches_exhaustive_argmax(self):
        for seed in range(15):
            rng = np.random.default_rng(seed)
            bags = [positive('a', rng.standard_normal((2, 3))), positive('b', rng.standard_normal((2, 3)))]
            if seed % 2:
                bags.append(negative('n', rng.standard_normal((2, 3))))
            n = sum(bag.size for bag in bags)
            alpha = rng.uniform(size=n)
            alpha[rng.integers(n)] = 0.0
            gram = gram_matrix(np.vstack([bag.matrix for bag in bags]), KernelSpec(kind='rbf', gamma=0.4))
            candidates = list(admissible_labelings(bags, 0.5))
            best = max(labeling_value(alpha, gram, y) for y in candidates)
            violator = most_violated_labeling(alpha, gram, bags, 0.5)
            self.assertAlmostEqual(labeling_value(alpha, gram, violator), best, places=10)
            for y in candidates:
                self.assertGreaterEqual(labeling_value(alpha, gram, violator) + 1e-12, labeling_value(alpha, gram, y))

    def test_size_mismatch(self):
        bags = random_bags(self.rng, [2])
        with self.assertRaises(InputError):
            most_violated_labeling(np.ones(3), GramMatrix(np.eye(4)), bags, 0.5)

    def test_guard_counts_every_positive_instance(self):
        bags = [positive('p', np.zeros((21, 1))), negative('n', np.zeros((1, 1)))]
        alpha = np.zeros(22)
        alpha[[0, 21]] = 0.5
        with self.assertRaises(EnumerationTooLarge):
            most_violated_labeling(alpha, GramMatrix(np.eye(22)), bags, 0.5)
        violator = most_violated_labeling(alpha, GramMatrix(np.eye(22)), bags, 0.5, limit=21)
        self.assertEqual(violator.y, (1,) * 21 + (-1,))


class RestrictedMklTestCase(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(2)
        self.bags = [positive('p', rng.standard_normal((2, 2)) + 1), negative('n', rng.standard_normal((2, 2)) - 1)]
        points = np.vstack([bag.matrix for bag in self.bags])
        self.gram = augment(gram_matrix(points, KernelSpec(kind='linear')))
        self.y1 = LabelingCandidate((1, 1, -1, -1))
        self.y2 = LabelingCandidate((1, -1, -1, -1))

    def test_requires_augmented_gram(self):
        with self.assertRaises(KernelStateError):
            restricted_mkl(GramMatrix(np.eye(4)), ActiveSet((self.y1,)), C=1.0)

    def test_single_labeling_is_plain_qp(self):
        state = restricted_mkl(self.gram, ActiveSet((self.y1,)), C=1.0)
        np.testing.assert_array_equal(state.u, [1.0])
        expected = simplex_qp_max(forms(self.gram, [self.y1.vector], 1.0)[0])
        self.assertAlmostEqual(state.objective, expected.value, delta=2e-6)

    def test_identical_base_kernels(self):
        """Test two labelings with the same kernel form leave the objective unchanged"""
        mirrored = LabelingCandidate(tuple(-v for v in self.y1.y))
        single = restricted_mkl(self.gram, ActiveSet((self.y1,)), C=1.0)
        double = restricted_mkl(self.gram, ActiveSet((self.y1, mirrored)), C=1.0)
        self.assertAlmostEqual(double.objective, single.objective, delta=1e-6)
        self.assertAlmostEqual(double.u.sum(), 1.0)

    def test_matches_grid_search_over_u(self):
        state = restricted_mkl(self.gram, ActiveSet((self.y1, self.y2)), C=1.0)
        M1, M2 = forms(self.gram, [self.y1.vector, self.y2.vector], 1.0)
        grid = min(simplex_qp_max(u * M1 + (1 - u) * M2).value for u in np.linspace(0.0, 1.0, 1001))
        self.assertAlmostEqual(state.objective, grid, delta=1e-3)
        self.assertTrue(np.all(state.u >= 0))
        self.assertAlmostEqual(state.u.sum(), 1.0)
        self.assertAlmostEqual(state.alpha.sum(), 1.0)
        self.assertLessEqual(state.gap, 1e-6)


class TrainInstanceModelTestCase(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(3)

    def separable_problem(self, delta=0.7):
        bags = []
        for i in range(2):
            rows = np.vstack([cluster(self.rng, [3.0, 0.0], 3), cluster(self.rng, [-3.0, 0.0], 1)])
            bags.append(positive(f'p{i}', rows))
        bags += [negative(f'n{i}', cluster(self.rng, [-3.0, 0.0], 4)) for i in range(2)]
        return make_problem(bags, delta=delta, C=10.0)

    def test_separable_fixture(self):
        """Test planted noise inside positive bags scores below zero and clean instances above"""
        problem = self.separable_problem()
        model = train_instance_model(problem, tol=1e-6, max_iter=20)
        self.assertLessEqual(model.iterations, 5)
        self.assertGreater(model.active_set_size, 1)
        for bag in problem.positive_bags:
            scores = model.decision_function(bag.matrix)
            self.assertTrue(np.all(scores[:3] > 0), scores)
            self.assertTrue(np.all(scores[3:] < 0), scores)
        self.assertTrue(np.all(model.alpha > 0))
        self.assertTrue(np.all(np.abs(model.y_tilde) <= 1.0))

    def test_unit_delta_stops_after_one_round(self):
        model = train_instance_model(self.separable_problem(delta=1.0))
        self.assertEqual(model.iterations, 1)
        self.assertEqual(model.active_set_size, 1)

    def test_objective_is_non_increasing(self):
        bags = random_bags(self.rng, [3, 3, 2], n_negative=2)
        model = train_instance_model(make_problem(bags, delta=0.5, C=5.0))
        trace = model.objective_trace
        self.assertEqual(len(trace), model.iterations)
        self.assertTrue(all(b <= a + 2e-6 for a, b in zip(trace, trace[1:])), trace)

    def test_converged_objective_matches_full_master(self):
        """Test the cutting plane reaches the master over every feasible labeling"""
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            sizes = [int(s) for s in rng.integers(2, 4, size=2)]
            kernel = KernelSpec(kind='linear') if seed % 2 else KernelSpec()
            problem = make_problem(random_bags(rng, sizes, n_negative=1), delta=0.5, C=2.0, kernel=kernel)
            model = train_instance_model(problem, tol=1e-6, max_iter=50)
            self.assertLess(model.iterations, 50)

            gram = augment(gram_matrix(problem.features, problem.resolved_kernel))
            full = restricted_mkl(gram, ActiveSet(tuple(admissible_labelings(problem.bags, 0.5))), C=2.0)
            self.assertAlmostEqual(model.objective_trace[-1], full.objective, delta=1e-6)


class ScoreInstanceTestCase(SimpleTestCase):
    def test_hand_evaluation(self):
        model = InstanceModel(support=[[1.0, 2.0]], alpha=[1.0], y_tilde=[1.0], kernel=KernelSpec(kind='linear'))
        self.assertEqual(score_instance(model, [1.0, 2.0]), 6.0)

    def test_zero_labels_score_zero(self):
        model = InstanceModel(support=[[1.0, 2.0], [0.0, 1.0]], alpha=[0.5, 0.5], y_tilde=[0.0, 0.0],
                              kernel=KernelSpec())
        for x in ([0.0, 0.0], [3.0, -1.0]):
            self.assertEqual(score_instance(model, x), 0.0)

    def test_linear_in_alpha_and_permutation_invariant(self):
        rng = np.random.default_rng(4)
        support = rng.standard_normal((5, 3))
        alpha = rng.uniform(0.1, 1.0, 5)
        y_tilde = rng.uniform(-1.0, 1.0, 5)
        model = InstanceModel(support=support, alpha=alpha, y_tilde=y_tilde, kernel=KernelSpec())
        doubled = InstanceModel(support=support, alpha=2 * alpha, y_tilde=y_tilde, kernel=KernelSpec())
        order = rng.permutation(5)
        permuted = InstanceModel(support=support[order], alpha=alpha[order], y_tilde=y_tilde[order],
                                 kernel=KernelSpec())
        for x in rng.standard_normal((10, 3)):
            self.assertAlmostEqual(score_instance(doubled, x), 2 * score_instance(model, x), places=12)
            self.assertAlmostEqual(score_instance(permuted, x), score_instance(model, x), places=12)

    def test_dimension_mismatch(self):
        model = InstanceModel(support=[[1.0, 2.0]], alpha=[1.0], y_tilde=[1.0], kernel=KernelSpec(kind='linear'))
        with self.assertRaises(InputError):
            score_instance(model, [1.0, 2.0, 3.0])
