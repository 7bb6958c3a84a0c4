"""
Curation Domain Model
=====================

Immutable value types shared by every stage of the curation engine.

Types:
- Instance: one feature vector with identity, bag membership and source rank
- Bag: a weakly labeled group of instances (one query expansion)
- MilProblem: bags plus the portion delta, regularization C and kernel
- ValidationReport: every violated invariant of a problem, as text

Instance labels are +1/-1 internally; a bag label "positive" corresponds to
Y_I = 1 and "negative" to Y_I = 0.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from mil.kernels import KernelSpec
from utils.helpers import ceil_portion

POSITIVE = 'positive'
NEGATIVE = 'negative'
BAG_LABELS = (POSITIVE, NEGATIVE)


@dataclass(frozen=True, eq=False)
class Instance:
    id: str
    bag_id: str
    features: np.ndarray
    rank: int = 0

    def __post_init__(self):
        features = np.array(self.features, dtype=float).ravel()
        features.flags.writeable = False
        object.__setattr__(self, 'features', features)

    @property
    def dim(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True, eq=False)
class Bag:
    id: str
    label: str
    instances: Tuple[Instance, ...] = ()
    expansion_text: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'instances', tuple(self.instances))

    @property
    def is_positive(self) -> bool:
        return self.label == POSITIVE

    @property
    def size(self) -> int:
        return len(self.instances)

    def __len__(self):
        return len(self.instances)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Instances as rows, shape (|B|, D)."""
        matrix = np.vstack([inst.features for inst in self.instances])
        matrix.flags.writeable = False
        return matrix

    def min_positive(self, delta: float) -> int:
        """m_I = ceil(delta * |B_I|) for a positive bag, 0 for a negative one."""
        return ceil_portion(delta, self.size) if self.is_positive else 0


@dataclass(frozen=True, eq=False)
class MilProblem:
    bags: Tuple[Bag, ...]
    delta: float = 0.7
    C: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        object.__setattr__(self, 'bags', tuple(self.bags))

    @property
    def positive_bags(self) -> Tuple[Bag, ...]:
        return tuple(bag for bag in self.bags if bag.is_positive)

    @property
    def negative_bags(self) -> Tuple[Bag, ...]:
        return tuple(bag for bag in self.bags if not bag.is_positive)

    @cached_property
    def instances(self) -> Tuple[Instance, ...]:
        return tuple(inst for bag in self.bags for inst in bag.instances)

    @property
    def n(self) -> int:
        return len(self.instances)

    @cached_property
    def dim(self) -> int:
        return self.instances[0].dim if self.instances else 0

    @cached_property
    def features(self) -> np.ndarray:
        matrix = np.vstack([inst.features for inst in self.instances])
        matrix.flags.writeable = False
        return matrix

    @cached_property
    def resolved_kernel(self) -> KernelSpec:
        return self.kernel.resolved(self.dim)

    def min_positive(self, bag: Bag) -> int:
        return bag.min_positive(self.delta)

    def bag(self, bag_id: str) -> Bag:
        for bag in self.bags:
            if bag.id == bag_id:
                return bag
        raise KeyError(bag_id)

    def subproblem(self, bags) -> 'MilProblem':
        return MilProblem(bags=tuple(bags), delta=self.delta, C=self.C, kernel=self.kernel)


@dataclass(frozen=True)
class ValidationReport:
    issues: Tuple[str, ...] = ()

    @property
    def is_valid(self) -> bool:
        return not self.issues

    def __bool__(self):
        return self.is_valid


def validate_problem(problem: MilProblem) -> ValidationReport:
    """
    Collect every violated invariant of a problem.

    The report is empty iff the problem is well-formed; nothing is raised.
    """
    issues = []
    if not 0 < problem.delta <= 1:
        issues.append(f'delta {problem.delta} outside (0, 1]')
    if not problem.C > 0:
        issues.append(f'C {problem.C} must be positive')
    if not problem.bags:
        issues.append('no bags')
    if not any(bag.is_positive for bag in problem.bags):
        issues.append('no positive bag')
    if not any(bag.label == NEGATIVE for bag in problem.bags):
        issues.append('no negative bag')

    dim = None
    seen_instances = set()
    seen_bags = set()
    for bag in problem.bags:
        if bag.label not in BAG_LABELS:
            issues.append(f'bag {bag.id} has unknown label {bag.label!r}')
        if bag.id in seen_bags:
            issues.append(f'duplicate bag id {bag.id}')
        seen_bags.add(bag.id)
        if not bag.instances:
            issues.append(f'empty bag {bag.id}')
        for inst in bag.instances:
            if inst.bag_id != bag.id:
                issues.append(f'instance {inst.id} claims bag {inst.bag_id} but sits in bag {bag.id}')
            if inst.id in seen_instances:
                issues.append(f'duplicate instance id {inst.id}')
            seen_instances.add(inst.id)
            if inst.rank < 0:
                issues.append(f'instance {inst.id} has negative rank {inst.rank}')
            if dim is None:
                dim = inst.dim
            elif inst.dim != dim:
                issues.append(f'dimension mismatch: instance {inst.id} has {inst.dim}, expected {dim}')
            if not np.all(np.isfinite(inst.features)):
                issues.append(f'non-finite feature in instance {inst.id}')
    return ValidationReport(issues=tuple(issues))
