"""Small bag factories shared by the test modules."""
import numpy as np

from curation.conf import CurationConfig
from curation.domain import NEGATIVE, POSITIVE, Bag, Instance, MilProblem
from mil.kernels import KernelSpec


def make_bag(bag_id, label, rows, expansion=None):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    instances = tuple(
        Instance(id=f'{bag_id}-{i}', bag_id=bag_id, features=row, rank=i) for i, row in enumerate(rows)
    )
    return Bag(id=bag_id, label=label, instances=instances, expansion_text=expansion)


def positive(bag_id, rows, expansion=None):
    return make_bag(bag_id, POSITIVE, rows, expansion)


def negative(bag_id, rows):
    return make_bag(bag_id, NEGATIVE, rows)


def make_problem(bags, delta=0.7, C=10.0, kernel=None):
    return MilProblem(bags=tuple(bags), delta=delta, C=C, kernel=kernel or KernelSpec())


def quick_config(**values):
    """A config with short solver schedules for unit tests."""
    defaults = {'cccp_max_iter': 8, 'subgradient_steps': 60}
    defaults.update(values)
    return CurationConfig.build(**defaults)


def cluster(rng, center, count, scale=0.3):
    center = np.asarray(center, dtype=float)
    return center + scale * rng.standard_normal((count, center.shape[0]))
