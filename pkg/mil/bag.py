"""
Bag-Level MIL
=============

Filters group noise: whole bags produced by noisy query expansions.

A bag is summarized by a weighted compound feature over k latent instances,
phi(X, h) = Xh / (xi'h), where xi down-weights instances far from the bag
center. The bag rule is f(X) = max_h w'phi(X, h) over assignments with exactly
k ones; training is a latent SVM solved by the concave-convex procedure.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit
from sklearn.model_selection import StratifiedKFold

from curation.domain import Bag
from utils.exceptions import CalibrationError, CardinalityError, ConfigurationError, InputError
from utils.helpers import top_k_indices
from .solvers import dinkelbach_topk, train_linear_svm

logger = logging.getLogger(__name__)

XI_FLOOR = np.finfo(float).tiny


@dataclass(frozen=True)
class WeightParams:
    xi_alpha: float = 1.0
    xi_beta: float = 0.0
    d_clamp: float = 1e-6

    def __post_init__(self):
        if not (math.isfinite(self.xi_alpha) and self.xi_alpha > 0):
            raise ConfigurationError('xi_alpha must be a positive finite number')
        if not math.isfinite(self.xi_beta):
            raise ConfigurationError('xi_beta must be finite')
        if not (math.isfinite(self.d_clamp) and self.d_clamp > 0):
            raise ConfigurationError('d_clamp must be positive')

    @classmethod
    def from_config(cls, config) -> 'WeightParams':
        return cls(xi_alpha=config.xi_alpha, xi_beta=config.xi_beta, d_clamp=config.d_clamp)


@dataclass(frozen=True, eq=False)
class BagModel:
    omega: np.ndarray
    k: int
    weights: WeightParams = field(default_factory=WeightParams)
    iterations: int = 0
    objective_trace: Tuple[float, ...] = field(default_factory=tuple)
    degenerate: bool = False

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float).ravel()
        if not np.all(np.isfinite(omega)):
            raise InputError('bag model weights must be finite')
        if self.k < 1:
            raise CardinalityError('k must be at least 1')
        omega.flags.writeable = False
        object.__setattr__(self, 'omega', omega)


@dataclass(frozen=True, eq=False)
class LatentAssignment:
    h: np.ndarray
    value: Optional[float] = None

    def __post_init__(self):
        h = np.array(self.h, dtype=int).ravel()
        if not h.any():
            raise CardinalityError('latent assignment selects no instance')
        h.flags.writeable = False
        object.__setattr__(self, 'h', h)

    @property
    def k(self) -> int:
        return int(self.h.sum())

    @property
    def selected(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.h))


def _check_k(bag: Bag, k: int):
    if k < 1 or k > bag.size:
        raise CardinalityError(f'k={k} does not fit bag {bag.id} of size {bag.size}')


def instance_weights(bag: Bag, params: WeightParams) -> np.ndarray:
    """xi_i = 1 / (1 + exp(xi_alpha * log d_i + xi_beta)), d_i the clamped distance to the bag mean."""
    matrix = bag.matrix
    distances = np.linalg.norm(matrix - matrix.mean(axis=0), axis=1)
    distances = np.maximum(distances, params.d_clamp)
    xi = expit(-(params.xi_alpha * np.log(distances) + params.xi_beta))
    return np.maximum(xi, XI_FLOOR)


def topk_by_score(scorer: Callable, bag: Bag, k: int) -> LatentAssignment:
    """The k highest-scoring instances under scorer (applied to the bag matrix), ties to the lowest index."""
    _check_k(bag, k)
    scores = np.asarray(scorer(bag.matrix), dtype=float).ravel()
    h = np.zeros(bag.size, dtype=int)
    chosen = top_k_indices(scores, k)
    h[chosen] = 1
    return LatentAssignment(h=h, value=float(scores[chosen].sum()))


def compound_topk_feature(scorer: Callable, bag: Bag, k: int) -> np.ndarray:
    assignment = topk_by_score(scorer, bag, k)
    return bag.matrix[np.flatnonzero(assignment.h)].mean(axis=0)


def best_assignment(omega, bag: Bag, xi, k: int, tol: float = 1e-12) -> LatentAssignment:
    """argmax_h (w'Xh) / (xi'h) with exactly k ones."""
    _check_k(bag, k)
    contributions = bag.matrix @ np.asarray(omega, dtype=float)
    result = dinkelbach_topk(contributions, xi, k, tol=tol)
    return LatentAssignment(h=result.h, value=result.ratio)


def weighted_feature(bag: Bag, xi, h) -> np.ndarray:
    """phi(X, h) = Xh / (xi'h)."""
    h = h.h if isinstance(h, LatentAssignment) else np.asarray(h, dtype=float).ravel()
    xi = np.asarray(xi, dtype=float).ravel()
    if h.shape[0] != bag.size or xi.shape[0] != bag.size:
        raise InputError(f'assignment and weights must have {bag.size} entries for bag {bag.id}')
    # row-wise sum, so unit weights give exactly the compound top-k mean
    return (bag.matrix * h[:, None]).sum(axis=0) / float(xi @ h)


def bag_score(model: BagModel, bag: Bag, tol: float = 1e-12) -> float:
    """f(X) = max_h w'phi(X, h); the bag is positive iff the score is > 0."""
    xi = instance_weights(bag, model.weights)
    return best_assignment(model.omega, bag, xi, model.k, tol=tol).value


class _PreparedBag:
    """A bag with its weights fixed, as CCCP sees it."""

    def __init__(self, bag: Bag, params: WeightParams, k: int, tol: float):
        self.bag = bag
        self.xi = instance_weights(bag, params)
        self.k = k
        self.tol = tol

    def latent(self, omega) -> Tuple[float, np.ndarray]:
        """(f(X), phi at the maximizing assignment)."""
        assignment = best_assignment(omega, self.bag, self.xi, self.k, tol=self.tol)
        return assignment.value, weighted_feature(self.bag, self.xi, assignment)


def _latent_objective(omega, positives, negatives, C) -> float:
    """1/2|w|^2 + C sum_neg max(0, 1 + f) + C sum_pos (max(f, 1) - f)."""
    total = 0.5 * float(omega @ omega)
    for prepared in negatives:
        total += C * max(0.0, 1.0 + prepared.latent(omega)[0])
    for prepared in positives:
        score = prepared.latent(omega)[0]
        total += C * (max(score, 1.0) - score)
    return total


def _upper_bound(omega, positives, negatives, anchors, C):
    """Convex majorizer with the positive-bag assignments fixed; returns (value, subgradient)."""
    value = 0.5 * float(omega @ omega)
    grad = omega.copy()
    for prepared in negatives:
        score, phi = prepared.latent(omega)
        if 1.0 + score > 0.0:
            value += C * (1.0 + score)
            grad += C * phi
    for prepared, anchor in zip(positives, anchors):
        score, phi = prepared.latent(omega)
        if score > 1.0:
            value += C * score
            grad += C * phi
        else:
            value += C
        value -= C * float(omega @ anchor)
        grad -= C * anchor
    return value, grad


def _minimize_upper_bound(start, positives, negatives, anchors, C, radius, steps):
    """Projected subgradient with step radius / (|g| sqrt(t)), best iterate kept."""
    best_value, grad = _upper_bound(start, positives, negatives, anchors, C)
    best = start.copy()
    omega = start.copy()
    for t in range(1, steps + 1):
        norm = float(np.linalg.norm(grad))
        if norm == 0.0:
            break
        omega = omega - (radius / (norm * math.sqrt(t))) * grad
        length = float(np.linalg.norm(omega))
        if length > radius:
            omega *= radius / length
        value, grad = _upper_bound(omega, positives, negatives, anchors, C)
        if value < best_value:
            best_value, best = value, omega.copy()
    return best, best_value


def train_bag_model(positive_bags: Sequence[Bag], negative_bags: Sequence[Bag], config,
                    k: Optional[int] = None, weights: Optional[WeightParams] = None) -> BagModel:
    """
    Latent SVM over weighted compound bag features, trained by CCCP.

    w starts as a linear SVM on bag means. Each outer round fixes the best
    assignment of every positive bag and minimizes the resulting convex upper
    bound by projected subgradient steps started at the current w, so the exact
    objective never increases. Stops when it decreases by no more than cccp_tol
    or after cccp_max_iter rounds.

    Args:
        positive_bags: bags labeled positive
        negative_bags: bags labeled negative
        config: CurationConfig
        k: per-problem override of config.k
        weights: override of the weighting parameters in config

    Raises:
        CardinalityError: k exceeds the size of some bag (the bag is named)
    """
    if not positive_bags or not negative_bags:
        raise InputError('bag model needs positive and negative bags')
    k = k or config.k
    weights = weights or WeightParams.from_config(config)
    for bag in list(positive_bags) + list(negative_bags):
        _check_k(bag, k)
    C = config.c_bag
    tol = config.dinkelbach_tol

    degenerate = _same_bags(positive_bags, negative_bags)
    if degenerate:
        logger.warning('positive and negative bag sets coincide: bag scores are degenerate')

    init = train_linear_svm(
        [bag.matrix.mean(axis=0) for bag in positive_bags],
        [bag.matrix.mean(axis=0) for bag in negative_bags],
        C=C, tol=config.svm_tol,
    )
    omega = init.w.copy()
    positives = [_PreparedBag(bag, weights, k, tol) for bag in positive_bags]
    negatives = [_PreparedBag(bag, weights, k, tol) for bag in negative_bags]
    radius = math.sqrt(2.0 * C * (len(positives) + len(negatives)))

    trace = [_latent_objective(omega, positives, negatives, C)]
    rounds = 0
    for rounds in range(1, config.cccp_max_iter + 1):
        anchors = [prepared.latent(omega)[1] for prepared in positives]
        candidate, _ = _minimize_upper_bound(omega, positives, negatives, anchors, C, radius,
                                             config.subgradient_steps)
        value = _latent_objective(candidate, positives, negatives, C)
        if value > trace[-1]:
            logger.debug('CCCP round %d: no improvement, keeping previous iterate', rounds)
            value, candidate = trace[-1], omega
        decrease = trace[-1] - value
        omega = candidate
        trace.append(value)
        logger.debug('CCCP round %d: objective %.9g', rounds, value)
        if decrease <= config.cccp_tol:
            break

    logger.info('bag model: %d CCCP rounds, objective %.6g -> %.6g', rounds, trace[0], trace[-1])
    return BagModel(omega=omega, k=k, weights=weights, iterations=rounds,
                    objective_trace=tuple(trace), degenerate=degenerate or init.degenerate)


def _same_bags(positive_bags, negative_bags) -> bool:
    def key(bags):
        return sorted(tuple(np.round(bag.matrix, 12).ravel()) for bag in bags)
    return len(positive_bags) == len(negative_bags) and key(positive_bags) == key(negative_bags)


def filter_bags(model: BagModel, bags: Sequence[Bag]) -> Tuple[Tuple[str, ...], Dict[str, float]]:
    """
    Bags scoring > 0 are kept; every score is returned for reporting.

    A bag with fewer than model.k instances is scored over all of its
    instances, so filtering never fails on a valid problem.
    """
    scores = {}
    for bag in bags:
        if bag.size < model.k:
            logger.warning('bag %s has %d instances, fewer than k=%d: scored with k=%d',
                           bag.id, bag.size, model.k, bag.size)
            xi = instance_weights(bag, model.weights)
            scores[bag.id] = best_assignment(model.omega, bag, xi, bag.size).value
        else:
            scores[bag.id] = bag_score(model, bag)
    retained = tuple(bag.id for bag in bags if scores[bag.id] > 0.0)
    logger.info('bag filter kept %d of %d bags', len(retained), len(bags))
    return retained, scores


def _calibration_folds(labeled_sets, config):
    """(train positives, train negatives, held-out bags) per fold."""
    if len(labeled_sets) >= 2:
        for held_out in range(len(labeled_sets)):
            train_pos = [b for i, (pos, _) in enumerate(labeled_sets) if i != held_out for b in pos]
            train_neg = [b for i, (_, neg) in enumerate(labeled_sets) if i != held_out for b in neg]
            pos, neg = labeled_sets[held_out]
            yield held_out, train_pos, train_neg, list(pos) + list(neg)
        return

    pos, neg = labeled_sets[0]
    bags = list(pos) + list(neg)
    labels = np.array([1] * len(pos) + [0] * len(neg))
    n_splits = min(config.calibration_folds, len(pos), len(neg))
    if n_splits < 2:
        raise CalibrationError('a single labeled set needs at least two bags of each label')
    splitter = StratifiedKFold(n_splits=n_splits, shuffle=True, random_state=config.seed % (2 ** 32))
    for fold, (train_idx, test_idx) in enumerate(splitter.split(np.zeros(len(bags)), labels)):
        yield (fold,
               [bags[i] for i in train_idx if labels[i] == 1],
               [bags[i] for i in train_idx if labels[i] == 0],
               [bags[i] for i in test_idx])


def calibration_scores(labeled_sets, grid: Sequence[WeightParams], config) -> List[float]:
    """Mean held-out bag accuracy of every grid point."""
    if not grid:
        raise CalibrationError('weighting grid is empty')
    if not labeled_sets:
        raise CalibrationError('no labeled bag sets to calibrate on')

    folds = []
    for fold, train_pos, train_neg, held_out in _calibration_folds(labeled_sets, config):
        if not train_pos or not train_neg or not held_out:
            logger.warning('calibration fold %s skipped: a split has a single class', fold)
            continue
        folds.append((train_pos, train_neg, held_out))
    if not folds:
        raise CalibrationError('every calibration fold was skipped')

    means = []
    for params in grid:
        accuracies = []
        for train_pos, train_neg, held_out in folds:
            model = train_bag_model(train_pos, train_neg, config, weights=params)
            hits = sum((bag_score(model, bag) > 0.0) == bag.is_positive for bag in held_out)
            accuracies.append(hits / len(held_out))
        means.append(float(np.mean(accuracies)))
        logger.debug('calibration %s: mean accuracy %.4f', params, means[-1])
    return means


def calibrate_weight_params(labeled_sets, grid: Sequence[WeightParams], config) -> WeightParams:
    """Grid point with the highest mean held-out accuracy, ties to the earliest."""
    means = calibration_scores(labeled_sets, grid, config)
    best = int(np.argmax(means))
    logger.info('calibrated weighting: %s (accuracy %.4f)', grid[best], means[best])
    return grid[best]


def weight_grid(config) -> List[WeightParams]:
    return [WeightParams(xi_alpha=a, xi_beta=b, d_clamp=config.d_clamp)
            for a in config.xi_alpha_grid for b in config.xi_beta_grid]
