"""
Optimization Kernels
====================

Small, deterministic solvers shared by the expansion filter and both MIL stages.

- train_linear_svm: L2-loss linear SVM with a penalized bias, dual coordinate descent
- simplex_qp_max: max -1/2 a'Ma over the probability simplex, pairwise Frank-Wolfe
- dinkelbach_topk: max (c'h)/(xi'h) over 0/1 vectors with exactly k ones
- charnes_cooper_topk: LP relaxation of the same fractional program (cross-check)
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.optimize import linprog

from utils.exceptions import CardinalityError, DomainError, InputError, NumericError
from utils.helpers import top_k_indices
from .kernels import is_symmetric

logger = logging.getLogger(__name__)

SVM_MAX_SWEEPS = 10000
QP_MAX_ITER = 200000
QP_REFRESH_EVERY = 200


@dataclass(frozen=True, eq=False)
class LinearSvmModel:
    w: np.ndarray
    b: float
    C: float
    duality_gap: float = 0.0
    sweeps: int = 0
    objective_trace: Tuple[float, ...] = field(default_factory=tuple)
    degenerate: bool = False

    def decision_function(self, vectors) -> np.ndarray:
        matrix = np.atleast_2d(np.asarray(vectors, dtype=float))
        return matrix @ self.w + self.b

    def predict(self, vectors) -> np.ndarray:
        return np.where(self.decision_function(vectors) >= 0, 1, -1)


@dataclass(frozen=True, eq=False)
class SimplexQpSolution:
    alpha: np.ndarray
    value: float
    gap: float
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class DinkelbachResult:
    h: np.ndarray
    ratio: float
    lambdas: Tuple[float, ...]

    @property
    def selected(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.h))


def _primal_objective(w_aug, X_aug, y, C) -> float:
    slack = np.maximum(0.0, 1.0 - y * (X_aug @ w_aug))
    return 0.5 * float(w_aug @ w_aug) + C * float(slack @ slack)


def train_linear_svm(pos, neg, C: float = 1.0, tol: float = 1e-6, max_sweeps: int = SVM_MAX_SWEEPS) -> LinearSvmModel:
    """
    Train f(x) = w'x + b minimizing 1/2(||w||^2 + b^2) + C * sum(max(0, 1 - y f(x))^2).

    The bias is learned as the weight of a constant feature, which gives the squared
    bias penalty. Coordinates are swept in a fixed order; training stops once the
    duality gap is at most tol * max(1, primal objective).

    Args:
        pos: positive vectors, shape (n_pos, D)
        neg: negative vectors, shape (n_neg, D)
        C: loss weight
        tol: duality-gap tolerance

    Returns:
        LinearSvmModel with the dual objective recorded after every sweep
    """
    pos = np.atleast_2d(np.asarray(pos, dtype=float))
    neg = np.atleast_2d(np.asarray(neg, dtype=float))
    if pos.size == 0 or neg.size == 0:
        raise InputError('both classes must be non-empty')
    if pos.shape[1] != neg.shape[1]:
        raise InputError(f'dimension mismatch: {pos.shape[1]} vs {neg.shape[1]}')
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise NumericError('non-finite value in SVM training data')
    if C <= 0:
        raise DomainError('C must be positive')

    degenerate = pos.shape == neg.shape and np.array_equal(
        np.unique(pos, axis=0), np.unique(neg, axis=0))
    if degenerate:
        logger.warning('positive and negative sets coincide: zero-margin degenerate problem')

    X = np.vstack([pos, neg])
    X_aug = np.hstack([X, np.ones((X.shape[0], 1))])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    n = X_aug.shape[0]
    diag = 1.0 / (2.0 * C)
    q_diag = np.einsum('ij,ij->i', X_aug, X_aug) + diag

    alpha = np.zeros(n)
    w_aug = np.zeros(X_aug.shape[1])
    trace = []
    gap = np.inf
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        for i in range(n):
            grad = y[i] * float(w_aug @ X_aug[i]) - 1.0 + diag * alpha[i]
            new = max(alpha[i] - grad / q_diag[i], 0.0)
            delta = new - alpha[i]
            if delta != 0.0:
                w_aug += delta * y[i] * X_aug[i]
                alpha[i] = new
        dual = 0.5 * float(w_aug @ w_aug) + 0.5 * diag * float(alpha @ alpha) - float(alpha.sum())
        trace.append(dual)
        primal = _primal_objective(w_aug, X_aug, y, C)
        gap = primal + dual
        if gap <= tol * max(1.0, primal):
            break
    else:
        logger.warning('linear SVM stopped after %d sweeps with duality gap %.3e', max_sweeps, gap)

    logger.debug('linear SVM: %d sweeps, gap %.3e', sweep, gap)
    return LinearSvmModel(
        w=w_aug[:-1].copy(),
        b=float(w_aug[-1]),
        C=float(C),
        duality_gap=float(gap),
        sweeps=sweep,
        objective_trace=tuple(trace),
        degenerate=bool(degenerate),
    )


def simplex_qp_max(M, tol: float = 1e-9, max_iter: int = QP_MAX_ITER) -> SimplexQpSolution:
    """
    Maximize -1/2 a'Ma over {a >= 0, sum(a) = 1}.

    Pairwise Frank-Wolfe with exact line search from the uniform point. The
    returned gap a'Ma - min_i (Ma)_i bounds the distance to the optimum.
    """
    M = np.asarray(M, dtype=float)
    if not is_symmetric(M, tol=1e-10):
        raise InputError('quadratic form must be a symmetric square matrix')
    n = M.shape[0]
    if n == 1:
        return SimplexQpSolution(alpha=np.ones(1), value=-0.5 * float(M[0, 0]), gap=0.0)

    alpha = np.full(n, 1.0 / n)
    grad = M @ alpha
    gap = float(alpha @ grad - grad.min())
    iteration = 0
    for iteration in range(1, max_iter + 1):
        if gap <= tol:
            break
        s = int(np.argmin(grad))
        v = int(np.argmax(np.where(alpha > 0.0, grad, -np.inf)))
        slope = grad[v] - grad[s]
        if slope <= 0.0:
            break
        curvature = M[s, s] + M[v, v] - 2.0 * M[s, v]
        step = alpha[v] if curvature <= 1e-16 else min(slope / curvature, alpha[v])
        alpha[s] += step
        if step >= alpha[v]:
            alpha[v] = 0.0
        else:
            alpha[v] -= step
        if iteration % QP_REFRESH_EVERY == 0:
            grad = M @ alpha
        else:
            grad += step * (M[:, s] - M[:, v])
        gap = float(alpha @ grad - grad.min())
    else:
        logger.warning('simplex QP stopped after %d iterations with gap %.3e', max_iter, gap)

    alpha = np.maximum(alpha, 0.0)
    alpha /= alpha.sum()
    return SimplexQpSolution(
        alpha=alpha,
        value=-0.5 * float(alpha @ M @ alpha),
        gap=max(gap, 0.0),
        iterations=iteration,
    )


def _check_fractional_inputs(c, xi, k):
    c = np.asarray(c, dtype=float).ravel()
    xi = np.asarray(xi, dtype=float).ravel()
    if c.shape != xi.shape:
        raise InputError('numerator and denominator weights differ in length')
    n = c.size
    if k < 1 or k > n:
        raise CardinalityError(f'cannot select k={k} of {n} items')
    if np.any(xi <= 0) or not np.all(np.isfinite(xi)):
        raise DomainError('denominator weights must be positive and finite')
    return c, xi


def dinkelbach_topk(c, xi, k: int, tol: float = 1e-12) -> DinkelbachResult:
    """
    Maximize (c'h)/(xi'h) over h in {0,1}^n with sum(h) = k.

    Each parametric step picks the k largest c_i - lambda * xi_i (ties to the lowest
    index); lambda strictly increases until it improves by no more than tol.
    """
    c, xi = _check_fractional_inputs(c, xi, k)
    chosen = top_k_indices(c, k)
    lam = c[chosen].sum() / xi[chosen].sum()
    lambdas = [float(lam)]
    while True:
        candidate = top_k_indices(c - lam * xi, k)
        new_lam = c[candidate].sum() / xi[candidate].sum()
        if new_lam - lam <= tol:
            if new_lam > lam:
                chosen, lam = candidate, new_lam
                lambdas.append(float(lam))
            break
        chosen, lam = candidate, new_lam
        lambdas.append(float(lam))

    h = np.zeros(c.size, dtype=int)
    h[chosen] = 1
    return DinkelbachResult(h=h, ratio=float(lam), lambdas=tuple(lambdas))


def charnes_cooper_topk(c, xi, k: int) -> Tuple[float, np.ndarray]:
    """
    Box relaxation of the top-k fractional program as an LP in (z, t):
    max c'z  s.t.  xi'z = 1, 1'z = k t, 0 <= z <= t.

    Returns the optimal ratio and the relaxed indicator z / t.
    """
    c, xi = _check_fractional_inputs(c, xi, k)
    n = c.size
    objective = np.concatenate([-c, [0.0]])
    a_eq = np.vstack([
        np.concatenate([xi, [0.0]]),
        np.concatenate([np.ones(n), [-float(k)]]),
    ])
    b_eq = np.array([1.0, 0.0])
    a_ub = np.hstack([np.eye(n), -np.ones((n, 1))])
    b_ub = np.zeros(n)
    result = linprog(objective, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                     bounds=[(0, None)] * (n + 1), method='highs')
    if not result.success:
        raise NumericError(f'fractional LP failed: {result.message}')
    z, t = result.x[:n], result.x[n]
    return float(-result.fun), z / t
