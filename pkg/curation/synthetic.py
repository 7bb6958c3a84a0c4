"""
Synthetic Benchmark
===================

Desk-scale stand-in for web image collections with known ground truth.

Geometry (s = separation, e_j the unit vectors of R^D):
- class distribution j:   center s*e_0 + s*e_{1+j}
- background (negatives): center -s*e_0
- noise expansion j:      center -s*e_0 + s*e_{D-1-j}

Positive bags draw floor(noise_fraction * |B|) instances from the background
and the rest from their class distribution; noise bags are positive-labeled
bags drawn entirely from a noise expansion.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from curation.domain import NEGATIVE, POSITIVE, Bag, Instance, MilProblem
from mil.kernels import KernelSpec
from utils.helpers import floor_portion

logger = logging.getLogger(__name__)

CLEAN = 'clean'
NOISE = 'noise'
BACKGROUND = 'negative'
REFERENCE_STREAM = 7


class SyntheticSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    dim: int = Field(default=16, ge=2)
    separation: float = Field(default=6.0, gt=0)
    scale: float = Field(default=1.0, gt=0)
    n_positive_bags: int = Field(default=8, ge=1)
    n_noise_bags: int = Field(default=2, ge=0)
    n_negative_bags: int = Field(default=4, ge=1)
    instances_per_bag: int = Field(default=10, ge=1)
    noise_fraction: float = Field(default=0.3, ge=0.0, lt=1.0)
    n_distributions: int = Field(default=3, ge=1)
    delta: float = Field(default=0.7, gt=0.0, le=1.0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @model_validator(mode='after')
    def _fits_dimension(self):
        if self.n_noise_bags >= self.n_positive_bags:
            raise ValueError('noise bags must leave at least one clean positive bag')
        if 1 + self.n_distributions + self.n_noise_bags > self.dim:
            raise ValueError('dim too small for the requested distributions and noise expansions')
        return self


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    problem: MilProblem
    instance_truth: Dict[str, str]
    bag_truth: Dict[str, str]
    reference_bags: Tuple[Bag, ...] = field(default_factory=tuple)

    def truth_dict(self) -> dict:
        return {'bags': dict(sorted(self.bag_truth.items())),
                'instances': dict(sorted(self.instance_truth.items()))}


class _Generator:
    def __init__(self, spec: SyntheticSpec, rng: np.random.Generator, prefix: str):
        self.spec = spec
        self.rng = rng
        self.prefix = prefix
        s, D = spec.separation, spec.dim
        basis = np.eye(D)
        self.background = -s * basis[0]
        self.classes = [s * basis[0] + s * basis[1 + j] for j in range(spec.n_distributions)]
        self.noise = [-s * basis[0] + s * basis[D - 1 - j] for j in range(max(spec.n_noise_bags, 1))]

    def _draw(self, center, count):
        return center + self.spec.scale * self.rng.standard_normal((count, self.spec.dim))

    def _bag(self, bag_id, label, rows, kinds, text, instance_truth):
        order = self.rng.permutation(len(rows))
        instances = []
        for rank, position in enumerate(order):
            instance_id = f'{bag_id}-{rank}'
            instances.append(Instance(id=instance_id, bag_id=bag_id, features=rows[position], rank=rank))
            instance_truth[instance_id] = kinds[position]
        return Bag(id=bag_id, label=label, instances=tuple(instances), expansion_text=text)

    def positive_bag(self, index, distribution, instance_truth):
        size = self.spec.instances_per_bag
        n_noise = floor_portion(self.spec.noise_fraction, size)
        rows = np.vstack([
            self._draw(self.classes[distribution], size - n_noise),
            self._draw(self.background, n_noise),
        ])
        kinds = [CLEAN] * (size - n_noise) + [NOISE] * n_noise
        return self._bag(f'{self.prefix}p{index}', POSITIVE, rows, kinds,
                         f'class expansion {distribution}', instance_truth)

    def noise_bag(self, index, label, instance_truth):
        size = self.spec.instances_per_bag
        rows = self._draw(self.noise[index % len(self.noise)], size)
        return self._bag(f'{self.prefix}x{index}', label, rows, [NOISE] * size,
                         f'noise expansion {index}', instance_truth)

    def negative_bag(self, index, instance_truth):
        size = self.spec.instances_per_bag
        rows = self._draw(self.background, size)
        return self._bag(f'{self.prefix}n{index}', NEGATIVE, rows, [BACKGROUND] * size,
                         None, instance_truth)


def _labeled_bags(generator: _Generator, noise_label: str, instance_truth, bag_truth):
    spec = generator.spec
    bags = []
    for index in range(spec.n_positive_bags - spec.n_noise_bags):
        bag = generator.positive_bag(index, index % spec.n_distributions, instance_truth)
        bag_truth[bag.id] = CLEAN
        bags.append(bag)
    for index in range(spec.n_noise_bags):
        bag = generator.noise_bag(index, noise_label, instance_truth)
        bag_truth[bag.id] = NOISE
        bags.append(bag)
    for index in range(spec.n_negative_bags):
        bag = generator.negative_bag(index, instance_truth)
        bag_truth[bag.id] = BACKGROUND
        bags.append(bag)
    return bags


def generate_synthetic(spec: SyntheticSpec, C: float = 10.0, kernel: KernelSpec = None) -> SyntheticDataset:
    """
    Bags plus per-instance and per-bag ground truth; identical for identical specs.

    The reference set is a separately drawn labeled collection in which noise
    expansions carry the negative label, for training the bag classifier.
    """
    instance_truth, bag_truth = {}, {}
    generator = _Generator(spec, np.random.default_rng(spec.seed), prefix='')
    bags = _labeled_bags(generator, POSITIVE, instance_truth, bag_truth)

    reference = _Generator(spec, np.random.default_rng([spec.seed, REFERENCE_STREAM]), prefix='ref-')
    reference_bags = _labeled_bags(reference, NEGATIVE, {}, {})

    problem = MilProblem(bags=tuple(bags), delta=spec.delta, C=C, kernel=kernel or KernelSpec())
    logger.info('synthetic problem: %d bags, %d instances, seed %d', len(bags), problem.n, spec.seed)
    return SyntheticDataset(problem=problem, instance_truth=instance_truth, bag_truth=bag_truth,
                            reference_bags=tuple(reference_bags))
