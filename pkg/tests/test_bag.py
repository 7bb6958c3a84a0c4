import itertools
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase

from mil.bag import (BagModel, LatentAssignment, WeightParams, bag_score, best_assignment, calibrate_weight_params,
                     calibration_scores, compound_topk_feature, filter_bags, instance_weights, topk_by_score,
                     train_bag_model, weight_grid, weighted_feature)
from utils.exceptions import CalibrationError, CardinalityError, ConfigurationError, InputError
from .helpers import cluster, negative, positive, quick_config


def exhaustive_best(contributions, xi, k):
    return max(sum(contributions[i] for i in subset) / sum(xi[i] for i in subset)
               for subset in itertools.combinations(range(len(xi)), k))


def labeled_bags(rng, count, noise=1, size=5):
    """Positive bags around +e1 with planted noise at -e1, negative bags around -e1."""
    pos = [positive(f'p{i}', np.vstack([cluster(rng, [1.0, 0.0], size - noise, 0.1),
                                         cluster(rng, [-1.0, 0.0], noise, 0.1)])) for i in range(count)]
    neg = [negative(f'n{i}', cluster(rng, [-1.0, 0.0], size, 0.1)) for i in range(count)]
    return pos, neg


class WeightingTestCase(SimpleTestCase):
    def test_unit_distance_gives_half(self):
        bag = positive('b', [[1.0, 0.0], [-1.0, 0.0]])
        for xi_alpha in (0.5, 1.0, 7.0):
            np.testing.assert_allclose(instance_weights(bag, WeightParams(xi_alpha=xi_alpha)), [0.5, 0.5])

    def test_center_instance_is_clamped(self):
        bag = positive('b', [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
        xi = instance_weights(bag, WeightParams(xi_alpha=1.0, d_clamp=1e-6))
        self.assertAlmostEqual(xi[0], 1.0 / (1.0 + 1e-6), places=12)
        self.assertEqual(int(np.argmax(xi)), 0)

    def test_weights_decrease_with_distance(self):
        rng = np.random.default_rng(0)
        bag = positive('b', rng.standard_normal((8, 3)))
        params = WeightParams(xi_alpha=2.0, xi_beta=0.3)
        xi = instance_weights(bag, params)
        distances = np.linalg.norm(bag.matrix - bag.matrix.mean(axis=0), axis=1)
        self.assertTrue(np.all((xi > 0) & (xi < 1)))
        for i, j in itertools.permutations(range(8), 2):
            if distances[i] <= distances[j]:
                self.assertGreaterEqual(xi[i], xi[j])

    def test_invalid_params(self):
        for values in ({'xi_alpha': 0.0}, {'xi_alpha': -1.0}, {'d_clamp': 0.0}, {'xi_beta': float('inf')}):
            with self.subTest(values=values):
                with self.assertRaises(ConfigurationError):
                    WeightParams(**values)


class AssignmentTestCase(SimpleTestCase):
    def test_topk_by_score(self):
        bag = positive('b', np.zeros((3, 2)))
        self.assertEqual(topk_by_score(lambda m: np.array([0.9, 0.1, 0.5]), bag, 2).selected, (0, 2))
        self.assertEqual(topk_by_score(lambda m: np.zeros(3), bag, 2).selected, (0, 1))
        self.assertEqual(topk_by_score(lambda m: np.zeros(3), bag, 3).selected, (0, 1, 2))
        with self.assertRaises(CardinalityError):
            topk_by_score(lambda m: np.zeros(3), bag, 4)

    def test_compound_feature_is_mean_of_top_instances(self):
        bag = positive('b', [[0.0, 2.0], [2.0, 0.0], [5.0, 5.0]])
        scorer = lambda m: np.array([1.0, 1.0, 0.0])  # noqa: E731
        np.testing.assert_allclose(compound_topk_feature(scorer, bag, 2), [1.0, 1.0])
        np.testing.assert_allclose(compound_topk_feature(scorer, bag, 1), [0.0, 2.0])
        h = topk_by_score(scorer, bag, 2)
        np.testing.assert_allclose(weighted_feature(bag, np.ones(3), h), compound_topk_feature(scorer, bag, 2))

    def test_unit_weights_reduce_to_compound_feature(self):
        rng = np.random.default_rng(10)
        for i in range(100):
            size = int(rng.integers(1, 13))
            k = int(rng.integers(1, size + 1))
            bag = positive(f'b{i}', rng.standard_normal((size, 3)))
            direction = rng.standard_normal(3)

            def scorer(matrix):
                return matrix @ direction

            h = topk_by_score(scorer, bag, k)
            np.testing.assert_array_equal(weighted_feature(bag, np.ones(size), h),
                                          compound_topk_feature(scorer, bag, k))

    def test_best_assignment_hand_fixture(self):
        bag = positive('b', [[3.0], [1.0], [2.0]])
        assignment = best_assignment([1.0], bag, np.ones(3), 2)
        self.assertEqual(assignment.selected, (0, 2))
        self.assertAlmostEqual(assignment.value, 2.5)
        self.assertEqual(best_assignment([5.0], bag, np.ones(3), 2).selected, (0, 2))
        self.assertEqual(best_assignment([1.0], bag, np.ones(3), 3).selected, (0, 1, 2))

    def test_best_assignment_matches_exhaustive_search(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            size = int(rng.integers(1, 13))
            k = int(rng.integers(1, size + 1))
            bag = positive('b', rng.standard_normal((size, 3)))
            omega = rng.standard_normal(3)
            xi = rng.uniform(0.05, 1.0, size)
            assignment = best_assignment(omega, bag, xi, k)
            self.assertEqual(assignment.k, k)
            expected = exhaustive_best(bag.matrix @ omega, xi, k)
            self.assertAlmostEqual(assignment.value, expected, places=9)
            scaled = best_assignment(3.0 * omega, bag, xi, k)
            self.assertAlmostEqual(float(bag.matrix[list(scaled.selected)] @ omega / xi[list(scaled.selected)].sum()),
                                   expected, places=9)

    def test_weighted_feature(self):
        bag = positive('b', [[2.0, 0.0], [0.0, 2.0]])
        np.testing.assert_allclose(weighted_feature(bag, [1.0, 1.0], [1, 1]), [1.0, 1.0])
        np.testing.assert_allclose(weighted_feature(bag, [0.5, 0.5], [1, 1]), [2.0, 2.0])
        np.testing.assert_allclose(weighted_feature(bag, [1.0, 1.0], [1, 0]), [2.0, 0.0])
        with self.assertRaises(InputError):
            weighted_feature(bag, [1.0], [1, 1])

    def test_invalid_assignment_and_model(self):
        with self.assertRaises(CardinalityError):
            LatentAssignment(h=[0, 0, 0])
        with self.assertRaises(CardinalityError):
            BagModel(omega=[1.0], k=0)
        with self.assertRaises(InputError):
            BagModel(omega=[float('nan')], k=1)


class BagScoreTestCase(SimpleTestCase):
    def test_zero_model_scores_zero(self):
        rng = np.random.default_rng(2)
        model = BagModel(omega=np.zeros(2), k=2)
        for i in range(5):
            self.assertEqual(bag_score(model, positive(f'b{i}', rng.standard_normal((4, 2)))), 0.0)

    def test_single_instance_bag(self):
        model = BagModel(omega=[2.0, -1.0], k=1)
        bag = positive('b', [[1.5, 0.5]])
        xi = instance_weights(bag, model.weights)[0]
        self.assertAlmostEqual(xi, 1.0 / (1.0 + 1e-6))
        self.assertAlmostEqual(bag_score(model, bag), 2.5 / xi)

    def test_matches_exhaustive_and_ignores_order(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            bag = positive('b', rng.standard_normal((3, 2)))
            for k in (1, 2, 3):
                model = BagModel(omega=rng.standard_normal(2), k=k, weights=WeightParams(xi_alpha=1.5))
                xi = instance_weights(bag, model.weights)
                expected = exhaustive_best(bag.matrix @ model.omega, xi, k)
                self.assertAlmostEqual(bag_score(model, bag), expected, places=9)
                shuffled = positive('b', bag.matrix[rng.permutation(3)])
                self.assertAlmostEqual(bag_score(model, shuffled), expected, places=9)

    def test_k_larger_than_bag(self):
        with self.assertRaises(CardinalityError):
            bag_score(BagModel(omega=[1.0, 0.0], k=3), positive('b', [[1.0, 0.0]]))


class TrainBagModelTestCase(SimpleTestCase):
    def test_separable_fixture(self):
        """Test bags at +e1 with planted noise and bags at -e1 are all classified by sign"""
        pos, neg = labeled_bags(np.random.default_rng(4), 4)
        model = train_bag_model(pos, neg, quick_config(k=2))
        self.assertEqual(model.k, 2)
        self.assertFalse(model.degenerate)
        for bag in pos:
            self.assertGreater(bag_score(model, bag), 0.0)
        for bag in neg:
            self.assertLess(bag_score(model, bag), 0.0)

    def test_cccp_objective_is_non_increasing(self):
        config = quick_config(k=2, cccp_max_iter=4, subgradient_steps=20)
        for seed in range(100):
            rng = np.random.default_rng(seed)
            pos = [positive(f'p{i}', rng.standard_normal((3, 2)) + 0.5) for i in range(2)]
            neg = [negative(f'n{i}', rng.standard_normal((3, 2)) - 0.5) for i in range(2)]
            trace = train_bag_model(pos, neg, config).objective_trace
            self.assertTrue(all(b <= a for a, b in zip(trace, trace[1:])), (seed, trace))

    def test_per_problem_k_override(self):
        pos, neg = labeled_bags(np.random.default_rng(5), 2)
        self.assertEqual(train_bag_model(pos, neg, quick_config(k=2), k=3).k, 3)

    def test_identical_bag_sets_are_degenerate(self):
        rng = np.random.default_rng(6)
        rows = [rng.standard_normal((3, 2)) for _ in range(2)]
        pos = [positive(f'p{i}', r) for i, r in enumerate(rows)]
        neg = [negative(f'n{i}', r) for i, r in enumerate(rows)]
        with self.assertLogs('mil.bag', level='WARNING') as logs:
            model = train_bag_model(pos, neg, quick_config(k=1))
        self.assertTrue(model.degenerate)
        self.assertTrue(any('degenerate' in line for line in logs.output))

    def test_cardinality_error_names_bag(self):
        pos = [positive('p', np.ones((3, 2)))]
        neg = [negative('tiny', np.ones((2, 2)))]
        with self.assertRaisesMessage(CardinalityError, 'tiny'):
            train_bag_model(pos, neg, quick_config(k=3))

    def test_needs_both_classes(self):
        with self.assertRaises(InputError):
            train_bag_model([positive('p', np.ones((3, 2)))], [], quick_config())


class FilterBagsTestCase(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(7)
        self.model = BagModel(omega=[1.0, 0.0], k=2)
        self.clean = [positive(f'c{i}', cluster(rng, [1.0, 0.0], 4, 0.1)) for i in range(4)]
        self.noisy = [positive(f'x{i}', cluster(rng, [-1.0, 0.0], 4, 0.1)) for i in range(2)]

    def test_all_negative_scores(self):
        retained, scores = filter_bags(self.model, self.noisy)
        self.assertEqual(retained, ())
        self.assertEqual(set(scores), {'x0', 'x1'})

    def test_planted_noise_bags_removed(self):
        bags = [self.clean[0], self.noisy[0], self.clean[1], self.clean[2], self.noisy[1], self.clean[3]]
        retained, scores = filter_bags(self.model, bags)
        self.assertEqual(retained, ('c0', 'c1', 'c2', 'c3'))
        self.assertEqual(len(scores), 6)
        reversed_retained, _ = filter_bags(self.model, bags[::-1])
        self.assertEqual(set(reversed_retained), set(retained))

    def test_bag_smaller_than_k_is_scored_over_all_instances(self):
        single = positive('single', [[1.5, 0.0]])
        with self.assertLogs('mil.bag', level='WARNING') as logs:
            retained, scores = filter_bags(self.model, [self.clean[0], single, self.noisy[0]])
        self.assertEqual(retained, ('c0', 'single'))
        xi = instance_weights(single, self.model.weights)[0]
        self.assertAlmostEqual(scores['single'], 1.5 / xi)
        self.assertTrue(any('single' in line for line in logs.output))


class CalibrationTestCase(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(8)
        self.config = quick_config(k=2, cccp_max_iter=3, subgradient_steps=20)
        self.sets = [labeled_bags(rng, 2) for _ in range(2)]

    def test_single_point_grid(self):
        point = WeightParams(xi_alpha=2.0)
        self.assertEqual(calibrate_weight_params(self.sets, [point], self.config), point)

    def test_empty_grid(self):
        with self.assertRaises(CalibrationError):
            calibrate_weight_params(self.sets, [], self.config)

    def test_larger_xi_alpha_wins_when_it_classifies_held_out_bags_better(self):
        """Test calibration picks the weighting whose held-out folds are classified correctly"""
        config = quick_config(k=1)
        sets = [labeled_bags(np.random.default_rng(11 + i), 2) for i in range(2)]
        small, large = WeightParams(xi_alpha=0.5), WeightParams(xi_alpha=4.0)

        def trainer(positive_bags, negative_bags, config, k=None, weights=None):
            # the larger weighting recovers +e1, the smaller one is pulled onto the noise at -e1
            omega = [1.0, 0.0] if weights.xi_alpha > 1.0 else [-1.0, 0.0]
            return BagModel(omega=omega, k=1, weights=weights)

        with patch('mil.bag.train_bag_model', side_effect=trainer):
            self.assertEqual(calibration_scores(sets, [small, large], config), [0.5, 1.0])
            self.assertEqual(calibrate_weight_params(sets, [small, large], config), large)
            self.assertEqual(calibrate_weight_params(sets, [large, small], config), large)

    def test_ties_go_to_first_grid_point(self):
        config = quick_config(k=1)
        grid = [WeightParams(xi_alpha=4.0), WeightParams(xi_alpha=0.5)]

        def trainer(positive_bags, negative_bags, config, k=None, weights=None):
            return BagModel(omega=[1.0, 0.0], k=1, weights=weights)

        with patch('mil.bag.train_bag_model', side_effect=trainer):
            self.assertEqual(calibrate_weight_params(self.sets, grid, config), grid[0])
            self.assertEqual(calibrate_weight_params(self.sets, grid[::-1], config), grid[1])

    def test_scores_match_direct_evaluation_of_each_grid_point(self):
        grid = [WeightParams(xi_alpha=0.5), WeightParams(xi_alpha=4.0)]
        expected = []
        for params in grid:
            accuracies = []
            for held_out in range(2):
                train_pos, train_neg = self.sets[1 - held_out]
                model = train_bag_model(train_pos, train_neg, self.config, weights=params)
                pos, neg = self.sets[held_out]
                hits = sum(bag_score(model, bag) > 0.0 for bag in pos) + sum(bag_score(model, bag) <= 0.0
                                                                            for bag in neg)
                accuracies.append(hits / (len(pos) + len(neg)))
            expected.append(float(np.mean(accuracies)))
        self.assertEqual(calibration_scores(self.sets, grid, self.config), expected)
        best = grid[1] if expected[1] > expected[0] else grid[0]
        self.assertEqual(calibrate_weight_params(self.sets, grid, self.config), best)

    def test_single_set_uses_stratified_folds(self):
        rng = np.random.default_rng(9)
        pos, neg = labeled_bags(rng, 3)
        means = calibration_scores([(pos, neg)], [WeightParams()], self.config.with_overrides(calibration_folds=3))
        self.assertEqual(len(means), 1)
        with self.assertRaises(CalibrationError):
            calibration_scores([(pos[:1], neg)], [WeightParams()], self.config)

    def test_weight_grid_from_config(self):
        config = quick_config(xi_alpha_grid=[1.0, 2.0], xi_beta_grid=[0.0, 0.5])
        grid = weight_grid(config)
        self.assertEqual(len(grid), 4)
        self.assertEqual((grid[1].xi_alpha, grid[1].xi_beta), (1.0, 0.5))
