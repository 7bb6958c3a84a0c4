import math

import numpy as np
from django.test import SimpleTestCase

from components.services import (ComponentGraph, coverage_objective, exact_select, greedy_select,
                                 marginal_gain)
from utils.exceptions import EnumerationTooLarge, InputError


def random_graph(rng, n):
    e = rng.uniform(0.0, 1.0, (n, n)) * (rng.uniform(size=(n, n)) < 0.5)
    np.fill_diagonal(e, 0.0)
    return ComponentGraph(d=rng.uniform(0.0, 1.0, n), e=e)


class CoverageObjectiveTestCase(SimpleTestCase):
    def setUp(self):
        e = np.zeros((3, 3))
        e[0, 1] = e[1, 0] = e[0, 2] = e[2, 0] = 0.5
        self.graph = ComponentGraph(d=[1.0, 1.0, 1.0], e=e)

    def test_hand_fixture(self):
        self.assertEqual(coverage_objective([0], self.graph), 2.0)
        self.assertEqual(coverage_objective([1], self.graph), 1.5)
        self.assertEqual(coverage_objective([1, 2], self.graph), 2.75)
        self.assertEqual(coverage_objective([0, 1, 2], self.graph), 3.0)
        self.assertEqual(coverage_objective([], self.graph), 0.0)

    def test_no_spillover(self):
        graph = ComponentGraph(d=[0.3, 0.9], e=np.zeros((2, 2)))
        self.assertAlmostEqual(coverage_objective([0], graph), 0.3)

    def test_directional_affinity(self):
        e = np.zeros((2, 2))
        e[0, 1] = 1.0
        graph = ComponentGraph(d=[1.0, 1.0], e=e)
        self.assertEqual(coverage_objective([1], graph), 2.0)
        self.assertEqual(coverage_objective([0], graph), 1.0)

    def test_invalid_graphs_and_nodes(self):
        for d, e in (([1.0], [[0.5]]), ([-1.0], [[0.0]]), ([1.0, 1.0], [[0.0, 1.5], [0.0, 0.0]]),
                     ([1.0, 1.0], [[0.0]]), ([float('nan')], [[0.0]])):
            with self.subTest(d=d, e=e):
                with self.assertRaises(InputError):
                    ComponentGraph(d=d, e=e)
        with self.assertRaises(InputError):
            coverage_objective([3], self.graph)

    def test_monotone_and_submodular(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            graph = random_graph(rng, 7)
            small = [int(i) for i in rng.choice(7, size=2, replace=False)]
            large = small + [int(i) for i in rng.choice([j for j in range(7) if j not in small], size=2,
                                                        replace=False)]
            self.assertGreaterEqual(coverage_objective(large, graph) + 1e-12, coverage_objective(small, graph))
            for v in range(7):
                if v in large:
                    continue
                self.assertGreaterEqual(marginal_gain(v, small, graph), marginal_gain(v, large, graph) - 1e-12)


class SelectTestCase(SimpleTestCase):
    def setUp(self):
        e = np.zeros((3, 3))
        e[0, 1] = e[1, 0] = e[0, 2] = e[2, 0] = 0.5
        self.graph = ComponentGraph(d=[1.0, 1.0, 1.0], e=e)

    def test_budget_one(self):
        self.assertEqual(greedy_select(self.graph, 1).nodes, (0,))
        self.assertEqual(exact_select(self.graph, 1).nodes, (0,))
        self.assertEqual(greedy_select(self.graph, 1).objective, 2.0)

    def test_budget_two(self):
        """Test greedy commits to the hub while the exact optimum pairs the two leaves"""
        greedy = greedy_select(self.graph, 2)
        exact = exact_select(self.graph, 2)
        self.assertEqual((greedy.nodes, greedy.objective), ((0, 1), 2.5))
        self.assertEqual((exact.nodes, exact.objective), ((1, 2), 2.75))
        self.assertGreaterEqual(greedy.objective, (1 - 1 / math.e) * exact.objective)

    def test_full_budget(self):
        for select in (greedy_select, exact_select):
            result = select(self.graph, 3)
            self.assertEqual(result.nodes, (0, 1, 2))
            self.assertEqual(result.objective, 3.0)

    def test_single_node(self):
        graph = ComponentGraph(d=[0.4], e=[[0.0]])
        self.assertEqual(exact_select(graph, 1).nodes, (0,))
        self.assertEqual(greedy_select(graph, 1).nodes, (0,))

    def test_budget_out_of_range(self):
        for budget in (0, 4):
            with self.assertRaises(InputError):
                greedy_select(self.graph, budget)
            with self.assertRaises(InputError):
                exact_select(self.graph, budget)

    def test_exact_size_guard(self):
        with self.assertRaises(EnumerationTooLarge):
            exact_select(ComponentGraph(d=np.ones(21), e=np.zeros((21, 21))), 2)

    def test_greedy_guarantee_on_random_graphs(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(2, 13))
            graph = random_graph(rng, n)
            budget = int(rng.integers(1, min(n, 4) + 1))
            greedy = greedy_select(graph, budget)
            exact = exact_select(graph, budget)
            self.assertEqual(len(greedy.nodes), budget)
            self.assertLessEqual(greedy.objective, exact.objective + 1e-12)
            self.assertGreaterEqual(greedy.objective, (1 - 1 / math.e) * exact.objective - 1e-12)
            self.assertAlmostEqual(greedy.objective, coverage_objective(greedy.nodes, graph), places=12)
