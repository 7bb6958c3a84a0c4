"""
Instance-Level MIL
==================

Filters individual noise inside positive bags. A positive bag is only known to
hold at least m_I = ceil(delta * |B_I|) true positives, so the learner searches
over the feasible labelings of positive-bag instances while it trains:

- the restricted master over an active set of labelings is a multiple kernel
  problem, min over u of max over alpha of -1/2 a'(sum_t u_t K~ o y_t y_t' + I/C)a
- each round adds the feasible labeling maximizing sum a_i a_j y_i y_j k_ij
- the learned decision function is f(x) = sum a_i y~_i (k(x, x_i) + 1)
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Tuple

import cvxpy as cp
import numpy as np

from curation.domain import Bag, MilProblem
from utils.exceptions import (EnumerationTooLarge, InfeasibleLabeling, InputError,
                              KernelStateError, SolverNonConvergence)
from utils.helpers import ceil_portion, first_argmax
from .kernels import GramMatrix, KernelSpec, augment, cross_kernel, gram_matrix
from .solvers import simplex_qp_max

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 20
SUPPORT_EPS = 1e-10
VIOLATOR_CHUNK = 1 << 16


@dataclass(frozen=True)
class LabelingCandidate:
    y: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'y', tuple(int(v) for v in self.y))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.y, dtype=float)

    def __len__(self):
        return len(self.y)


@dataclass(frozen=True)
class ActiveSet:
    """The labelings the restricted master currently optimizes over, initialization first."""
    labelings: Tuple[LabelingCandidate, ...]

    def __post_init__(self):
        if not self.labelings:
            raise InputError('active set must hold at least one labeling')
        if len(set(self.labelings)) != len(self.labelings):
            raise InputError('active set labelings must be distinct')

    def __contains__(self, labeling):
        return labeling in self.labelings

    def __len__(self):
        return len(self.labelings)

    def with_labeling(self, labeling: LabelingCandidate) -> 'ActiveSet':
        return ActiveSet(labelings=self.labelings + (labeling,))

    @property
    def matrix(self) -> np.ndarray:
        """Labelings as rows, shape (T, n)."""
        return np.array([labeling.y for labeling in self.labelings], dtype=float)


@dataclass(frozen=True, eq=False)
class MklState:
    u: np.ndarray
    alpha: np.ndarray
    objective: float
    gap: float = 0.0


@dataclass(frozen=True, eq=False)
class InstanceModel:
    support: np.ndarray
    alpha: np.ndarray
    y_tilde: np.ndarray
    kernel: KernelSpec
    iterations: int = 0
    objective_trace: Tuple[float, ...] = field(default_factory=tuple)
    gap_trace: Tuple[float, ...] = field(default_factory=tuple)
    active_set_size: int = 0

    def __post_init__(self):
        for name in ('support', 'alpha', 'y_tilde'):
            value = np.array(getattr(self, name), dtype=float)
            value.flags.writeable = False
            object.__setattr__(self, name, value)

    @property
    def dim(self) -> int:
        return self.support.shape[1] if self.support.ndim == 2 else 0

    def decision_function(self, vectors) -> np.ndarray:
        matrix = np.atleast_2d(np.asarray(vectors, dtype=float))
        if not len(self.alpha):
            return np.zeros(matrix.shape[0])
        if matrix.shape[1] != self.dim:
            raise InputError(f'dimension mismatch: {matrix.shape[1]} vs {self.dim}')
        augmented = cross_kernel(matrix, self.support, self.kernel) + 1.0
        return augmented @ (self.alpha * self.y_tilde)


def _positive_counts(bags: Sequence[Bag], delta: float):
    return [(bag, ceil_portion(delta, bag.size) if bag.is_positive else 0) for bag in bags]


def check_labeling(labeling: LabelingCandidate, bags: Sequence[Bag], delta: float) -> LabelingCandidate:
    """Raise InfeasibleLabeling unless every negative instance is -1 and every positive bag has m_I positives."""
    y = labeling.y
    expected = sum(bag.size for bag in bags)
    if len(y) != expected:
        raise InfeasibleLabeling(f'labeling has {len(y)} entries, expected {expected}')
    start = 0
    for bag, m in _positive_counts(bags, delta):
        part = y[start:start + bag.size]
        start += bag.size
        if any(v not in (1, -1) for v in part):
            raise InfeasibleLabeling(f'bag {bag.id}: labels must be +1 or -1')
        if not bag.is_positive:
            if any(v != -1 for v in part):
                raise InfeasibleLabeling(f'negative bag {bag.id} has a positive instance')
        elif part.count(1) < m:
            raise InfeasibleLabeling(f'positive bag {bag.id} has {part.count(1)} positives, needs {m}')
    return labeling


def initial_labeling(bags: Sequence[Bag], delta: float = 1.0) -> LabelingCandidate:
    """y_i = Y_I: +1 throughout positive bags, -1 throughout negative ones."""
    y = [1 if bag.is_positive else -1 for bag in bags for _ in bag.instances]
    return check_labeling(LabelingCandidate(y), bags, delta)


def _bag_patterns(size: int, max_negatives: int) -> np.ndarray:
    """Sign patterns of one bag with at most max_negatives entries at -1, +1 before -1."""
    rows = [p for p in itertools.product((1, -1), repeat=size) if p.count(-1) <= max_negatives]
    return np.array(rows, dtype=np.int8).reshape(len(rows), size)


def _pattern_product(blocks) -> np.ndarray:
    """Cartesian product of per-bag pattern blocks, the last bag varying fastest."""
    result = np.ones((1, 0), dtype=np.int8)
    for block in blocks:
        result = np.hstack([
            np.repeat(result, block.shape[0], axis=0),
            np.tile(block, (result.shape[0], 1)),
        ])
    return result


def admissible_labelings(bags: Sequence[Bag], delta: float,
                         limit: int = ENUMERATION_LIMIT) -> Iterator[LabelingCandidate]:
    """
    Yield every labeling with m_I positives per positive bag, each exactly once.

    Order is lexicographic over the full vector with +1 before -1.
    """
    total = sum(bag.size for bag in bags if bag.is_positive)
    if total > limit:
        raise EnumerationTooLarge(f'{total} positive-bag instances exceed the enumeration limit {limit}')

    segments = []
    for bag, m in _positive_counts(bags, delta):
        if bag.is_positive:
            segments.append([p for p in itertools.product((1, -1), repeat=bag.size)
                             if p.count(-1) <= bag.size - m])
        else:
            segments.append([(-1,) * bag.size])
    return (
        check_labeling(LabelingCandidate(tuple(itertools.chain.from_iterable(combo))), bags, delta)
        for combo in itertools.product(*segments)
    )


def labeling_value(alpha, gram, labeling: LabelingCandidate) -> float:
    """sum_ij a_i a_j y_i y_j k_ij."""
    entries = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)
    z = np.asarray(alpha, dtype=float) * labeling.vector
    return float(z @ entries @ z)


def most_violated_labeling(alpha, gram, bags: Sequence[Bag], delta: float,
                           limit: int = ENUMERATION_LIMIT) -> LabelingCandidate:
    """
    Feasible labeling maximizing sum_ij a_i a_j y_i y_j k_ij.

    Only positive-bag instances with a_i > 1e-10 affect the value; the rest are
    held at +1 and enumeration runs over the others. Ties go to the labeling
    that comes first in lexicographic order, +1 before -1.
    """
    alpha = np.asarray(alpha, dtype=float).ravel()
    entries = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)
    n = sum(bag.size for bag in bags)
    if alpha.shape[0] != n or entries.shape != (n, n):
        raise InputError(f'alpha and gram must cover all {n} instances')

    y = np.empty(n)
    free, blocks = [], []
    start = 0
    for bag, m in _positive_counts(bags, delta):
        positions = np.arange(start, start + bag.size)
        start += bag.size
        if not bag.is_positive:
            y[positions] = -1.0
            continue
        y[positions] = 1.0
        active = positions[alpha[positions] > SUPPORT_EPS]
        if active.size:
            free.extend(active.tolist())
            blocks.append(_bag_patterns(active.size, bag.size - m))
    positives = sum(bag.size for bag in bags if bag.is_positive)
    if positives > limit:
        raise EnumerationTooLarge(f'{positives} positive-bag instances exceed the enumeration limit {limit}')

    if free:
        free = np.array(free)
        fixed = np.setdiff1d(np.arange(n), free)
        v = alpha[fixed] * y[fixed]
        a_free = alpha[free]
        constant = float(v @ entries[np.ix_(fixed, fixed)] @ v)
        linear = 2.0 * a_free * (entries[np.ix_(free, fixed)] @ v)
        quadratic = a_free[:, None] * entries[np.ix_(free, free)] * a_free[None, :]

        patterns = _pattern_product(blocks)
        values = np.empty(patterns.shape[0])
        for lo in range(0, patterns.shape[0], VIOLATOR_CHUNK):
            rows = patterns[lo:lo + VIOLATOR_CHUNK].astype(float)
            values[lo:lo + rows.shape[0]] = (
                constant + rows @ linear + np.einsum('ij,ij->i', rows @ quadratic, rows))
        best = first_argmax(values)
        y[free] = patterns[best]
        logger.debug('violator search over %d labelings, best value %.6g', patterns.shape[0], values[best])

    return check_labeling(LabelingCandidate(y.astype(int)), bags, delta)


def _labeling_forms(gram: GramMatrix, active: ActiveSet, C: float):
    entries = gram.entries
    n = gram.n
    ridge = np.eye(n) / C
    return [np.outer(y, y) * entries + ridge for y in active.matrix]


def _epigraph_solve(gram: GramMatrix, active: ActiveSet, C: float, **solver_opts):
    """min theta s.t. theta >= 1/2 a'(K~ o y_t y_t' + I/C)a for every active y_t, a in the simplex."""
    eigvals, eigvecs = np.linalg.eigh(gram.entries)
    factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    n = gram.n

    alpha = cp.Variable(n)
    theta = cp.Variable()
    constraints = []
    for y in active.matrix:
        rows = (factor * y[:, None]).T
        constraints.append(0.5 * cp.sum_squares(rows @ alpha) + (0.5 / C) * cp.sum_squares(alpha) <= theta)
    problem = cp.Problem(cp.Minimize(theta), constraints + [alpha >= 0, cp.sum(alpha) == 1])
    try:
        problem.solve(**solver_opts)
    except cp.error.SolverError as exc:
        raise SolverNonConvergence(f'restricted MKL master failed: {exc}') from exc
    if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or alpha.value is None:
        raise SolverNonConvergence(f'restricted MKL master ended with status {problem.status}')

    u = np.array([max(float(c.dual_value), 0.0) for c in constraints])
    u = u / u.sum() if u.sum() > 0 else np.full(len(constraints), 1.0 / len(constraints))
    alpha_value = np.clip(np.asarray(alpha.value, dtype=float), 0.0, None)
    return u, alpha_value / alpha_value.sum()


def _certify(forms, u, alpha_master, tol):
    mixed = sum(weight * form for weight, form in zip(u, forms))
    mixed = 0.5 * (mixed + mixed.T)
    inner = simplex_qp_max(mixed, tol=tol)
    upper = inner.value + inner.gap
    lower = max(-max(0.5 * float(a @ form @ a) for form in forms)
                for a in (alpha_master, inner.alpha))
    return inner, max(upper - lower, 0.0)


def restricted_mkl(gram: GramMatrix, active: ActiveSet, C: float, tol: float = 1e-6) -> MklState:
    """
    Solve the restricted master over the active labelings.

    u comes from the constraint duals of the epigraph problem; alpha is then
    recomputed for that u by simplex_qp_max, and the state carries the
    primal-dual gap between the two.

    Raises:
        KernelStateError: gram is not augmented
        SolverNonConvergence: the gap stays above tol after a tightened retry
    """
    if not gram.augmented:
        raise KernelStateError('restricted MKL needs the augmented gram matrix')
    forms = _labeling_forms(gram, active, C)
    if len(active) == 1:
        inner = simplex_qp_max(forms[0], tol=tol)
        return MklState(u=np.ones(1), alpha=inner.alpha, objective=inner.value, gap=inner.gap)

    attempts = (
        {},
        {'solver': cp.CLARABEL, 'tol_gap_abs': 1e-10, 'tol_gap_rel': 1e-10, 'tol_feas': 1e-10, 'max_iter': 400},
    )
    gap = np.inf
    for options in attempts:
        try:
            u, alpha_master = _epigraph_solve(gram, active, C, **options)
        except SolverNonConvergence as exc:
            logger.warning('%s', exc)
            continue
        inner, gap = _certify(forms, u, alpha_master, tol / 10.0)
        if gap <= tol:
            logger.debug('restricted MKL over %d labelings: objective %.9g, gap %.2e',
                         len(active), inner.value, gap)
            return MklState(u=u, alpha=inner.alpha, objective=inner.value, gap=gap)
        logger.warning('restricted MKL gap %.3e above %.1e, retrying with tighter solver settings', gap, tol)
    raise SolverNonConvergence(f'restricted MKL gap {gap:.3e} above tolerance {tol:.1e}')


def train_instance_model(problem: MilProblem, tol: float = 1e-6, max_iter: int = 20,
                         limit: int = ENUMERATION_LIMIT) -> InstanceModel:
    """
    Cutting-plane training of the instance decision function.

    Starts from y_i = Y_I, then alternates the restricted master and the violator
    search. Stops once the violator is already active, its value exceeds the best
    active value by no more than tol, or max_iter rounds have run.
    """
    bags = problem.bags
    gram = augment(gram_matrix(problem.features, problem.resolved_kernel))
    active = ActiveSet((initial_labeling(bags, problem.delta),))

    trace, gaps = [], []
    state = None
    iteration = 0
    for iteration in range(1, max_iter + 1):
        state = restricted_mkl(gram, active, problem.C, tol=tol)
        trace.append(state.objective)
        gaps.append(state.gap)
        violator = most_violated_labeling(state.alpha, gram, bags, problem.delta, limit=limit)
        if violator in active:
            logger.debug('cutting plane: violator already active after %d rounds', iteration)
            break
        best_active = max(labeling_value(state.alpha, gram, y) for y in active.labelings)
        violation = labeling_value(state.alpha, gram, violator) - best_active
        if violation <= tol:
            logger.debug('cutting plane: violation %.3e within tolerance after %d rounds', violation, iteration)
            break
        if iteration == max_iter:
            logger.info('cutting plane stopped at max_iter=%d with violation %.3e', max_iter, violation)
            break
        active = active.with_labeling(violator)

    for labeling in active.labelings:
        check_labeling(labeling, bags, problem.delta)
    y_tilde = np.clip(state.u @ active.matrix, -1.0, 1.0)
    keep = state.alpha > SUPPORT_EPS
    logger.info('instance model: %d support vectors of %d instances, %d rounds, objective %.6g',
                int(keep.sum()), problem.n, iteration, trace[-1])
    return InstanceModel(
        support=problem.features[keep],
        alpha=state.alpha[keep],
        y_tilde=y_tilde[keep],
        kernel=problem.resolved_kernel,
        iterations=iteration,
        objective_trace=tuple(trace),
        gap_trace=tuple(gaps),
        active_set_size=len(active),
    )


def score_instance(model: InstanceModel, x) -> float:
    """f(x) = sum_i a_i y~_i (k(x, x_i) + 1)."""
    vector = np.asarray(x, dtype=float).ravel()
    if len(model.alpha) and vector.shape[0] != model.dim:
        raise InputError(f'dimension mismatch: {vector.shape[0]} vs {model.dim}')
    return float(model.decision_function(vector)[0])
