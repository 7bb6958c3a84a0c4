"""
Kernel Algebra
==============

Kernel evaluation and Gram matrices for the instance-level learner, including
the augmented kernel K + 11' that folds the bias into the kernel.

Kernels:
- linear: k(x, y) = x'y
- rbf:    k(x, y) = exp(-gamma * ||x - y||^2)
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from utils.exceptions import ConfigurationError, InputError, KernelStateError, NumericError

logger = logging.getLogger(__name__)

KERNEL_KINDS = ('linear', 'rbf')
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    kind: str = 'rbf'
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigurationError(f'unknown kernel kind {self.kind!r}')
        if self.kind == 'rbf' and self.gamma is not None:
            if not math.isfinite(self.gamma) or self.gamma <= 0:
                raise ConfigurationError('rbf gamma must be finite and > 0')

    @classmethod
    def default_for(cls, dim: int) -> 'KernelSpec':
        """rbf with gamma = 1/D."""
        return cls(kind='rbf', gamma=1.0 / max(dim, 1))

    def resolved(self, dim: int) -> 'KernelSpec':
        if self.kind == 'rbf' and self.gamma is None:
            return KernelSpec(kind='rbf', gamma=1.0 / max(dim, 1))
        return self

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'gamma': self.gamma}

    @classmethod
    def from_dict(cls, data: dict) -> 'KernelSpec':
        return cls(kind=data['kind'], gamma=data.get('gamma'))


@dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray
    augmented: bool = False

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        entries.flags.writeable = False
        object.__setattr__(self, 'entries', entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def _as_matrix(vectors) -> np.ndarray:
    try:
        matrix = np.asarray(vectors, dtype=float)
    except ValueError as exc:
        raise InputError(f'instances do not share one dimension: {exc}') from exc
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.ndim != 2:
        raise InputError('expected a list of feature vectors')
    return matrix


def cross_kernel(left, right, spec: KernelSpec) -> np.ndarray:
    """k(left_i, right_j) for every pair of rows."""
    a = _as_matrix(left)
    b = _as_matrix(right)
    if a.shape[1] != b.shape[1]:
        raise InputError(f'dimension mismatch: {a.shape[1]} vs {b.shape[1]}')
    spec = spec.resolved(a.shape[1])
    if spec.kind == 'linear':
        return a @ b.T
    return np.exp(-spec.gamma * cdist(a, b, 'sqeuclidean'))


def gram_matrix(instances, spec: KernelSpec) -> GramMatrix:
    matrix = _as_matrix(instances)
    entries = cross_kernel(matrix, matrix, spec)
    bad = np.argwhere(~np.isfinite(entries))
    if bad.size:
        i, j = (int(v) for v in bad[0])
        raise NumericError(f'non-finite kernel entry at ({i}, {j})')
    entries = 0.5 * (entries + entries.T)
    logger.debug('gram matrix %dx%d (%s)', matrix.shape[0], matrix.shape[0], spec.kind)
    return GramMatrix(entries=entries)


def augment(gram: GramMatrix) -> GramMatrix:
    """K~ = K + 11'."""
    if gram.augmented:
        raise KernelStateError('gram matrix is already augmented')
    return GramMatrix(entries=gram.entries + 1.0, augmented=True)


def is_symmetric(matrix, tol: float = SYMMETRY_TOL) -> bool:
    matrix = np.asarray(matrix, dtype=float)
    return matrix.ndim == 2 and matrix.shape[0] == matrix.shape[1] and bool(
        np.all(np.abs(matrix - matrix.T) <= tol * max(1.0, float(np.abs(matrix).max(initial=0.0))))
    )


def smallest_eigenvalue(gram: GramMatrix) -> float:
    return float(np.linalg.eigvalsh(gram.entries)[0])
