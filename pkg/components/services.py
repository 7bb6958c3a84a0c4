"""
Component Coverage Selection
============================

Picks a representative subset S of components under a budget by maximizing

    F(S) = sum_i d_i * theta(i, S),   theta(i, S) = 1 if i in S else 1 - prod_{j in S} (1 - e_ij)

F is monotone and submodular, so greedy selection is the production solver;
exact enumeration is kept as an oracle for small graphs.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from utils.exceptions import EnumerationTooLarge, InputError

logger = logging.getLogger(__name__)

EXACT_LIMIT = 20


@dataclass(frozen=True, eq=False)
class ComponentGraph:
    d: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float).ravel()
        e = np.array(self.e, dtype=float)
        n = d.shape[0]
        if e.shape != (n, n):
            raise InputError(f'affinity matrix must be {n}x{n}, got {e.shape}')
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise InputError('graph weights must be finite')
        if np.any(d < 0):
            raise InputError('node scores must be nonnegative')
        if np.any(e < 0) or np.any(e > 1):
            raise InputError('affinities must lie in [0, 1]')
        if np.any(np.diag(e) != 0):
            raise InputError('affinity diagonal must be zero')
        for name, value in (('d', d), ('e', e)):
            value.flags.writeable = False
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @classmethod
    def from_dict(cls, data: dict) -> 'ComponentGraph':
        return cls(d=data['d'], e=data['e'])


@dataclass(frozen=True)
class CoverageSelection:
    nodes: Tuple[int, ...]
    objective: float


def _check_nodes(nodes: Iterable[int], graph: ComponentGraph) -> Tuple[int, ...]:
    nodes = tuple(sorted(set(int(i) for i in nodes)))
    for node in nodes:
        if node < 0 or node >= graph.n:
            raise InputError(f'node {node} out of range for {graph.n} components')
    return nodes


def _coverage(selected: Tuple[int, ...], graph: ComponentGraph) -> float:
    if not selected:
        return 0.0
    uncovered = np.prod(1.0 - graph.e[:, list(selected)], axis=1)
    theta = 1.0 - uncovered
    theta[list(selected)] = 1.0
    return float(graph.d @ theta)


def coverage_objective(nodes, graph: ComponentGraph) -> float:
    """F(S); the empty set scores 0."""
    return _coverage(_check_nodes(nodes, graph), graph)


def marginal_gain(node: int, nodes, graph: ComponentGraph) -> float:
    selected = _check_nodes(nodes, graph)
    return _coverage(_check_nodes(set(selected) | {node}, graph), graph) - _coverage(selected, graph)


def _check_budget(graph: ComponentGraph, budget: int):
    if budget < 1 or budget > graph.n:
        raise InputError(f'budget {budget} outside 1..{graph.n}')


def greedy_select(graph: ComponentGraph, budget: int) -> CoverageSelection:
    """Add the node of largest marginal gain until the budget is spent, ties to the lowest index."""
    _check_budget(graph, budget)
    selected = ()
    value = 0.0
    for _ in range(budget):
        best_node, best_value = None, -np.inf
        for node in range(graph.n):
            if node in selected:
                continue
            candidate = _coverage(tuple(sorted(selected + (node,))), graph)
            if candidate > best_value:
                best_node, best_value = node, candidate
        selected = tuple(sorted(selected + (best_node,)))
        value = best_value
        logger.debug('greedy coverage: picked %d, objective %.6g', best_node, value)
    return CoverageSelection(nodes=selected, objective=value)


def exact_select(graph: ComponentGraph, budget: int) -> CoverageSelection:
    """Exhaustive maximum over subsets of size <= budget; ties to the lexicographically smallest subset."""
    if graph.n > EXACT_LIMIT:
        raise EnumerationTooLarge(f'exact selection supports at most {EXACT_LIMIT} components, got {graph.n}')
    _check_budget(graph, budget)
    best, best_value = None, -np.inf
    candidates = itertools.chain.from_iterable(
        itertools.combinations(range(graph.n), size) for size in range(1, budget + 1))
    for subset in sorted(candidates):
        value = _coverage(subset, graph)
        if value > best_value:
            best, best_value = subset, value
    return CoverageSelection(nodes=best, objective=best_value)
