import math
from fractions import Fraction

import numpy as np


def exact_fraction(value: float) -> Fraction:
    """Decimal reading of a float, so that 0.7 means 7/10 rather than its binary neighbour."""
    return Fraction(str(value))


def ceil_portion(portion: float, size: int) -> int:
    return math.ceil(exact_fraction(portion) * size)


def floor_portion(portion: float, size: int) -> int:
    return math.floor(exact_fraction(portion) * size)


def top_k_indices(values, k: int) -> np.ndarray:
    """Indices of the k largest values, ties broken by lowest index, returned in index order."""
    order = np.argsort(-np.asarray(values, dtype=float), kind='stable')
    return np.sort(order[:k])


def first_argmax(values, rel_tol: float = 1e-12) -> int:
    """First index whose value is within rel_tol of the maximum."""
    values = np.asarray(values, dtype=float)
    best = values.max()
    slack = rel_tol * max(1.0, abs(best))
    return int(np.flatnonzero(values >= best - slack)[0])
