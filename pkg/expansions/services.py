"""
Expansion Filtering Service
===========================

Prunes query expansions before any bag is built:

1. Salience: a linear SVM separates an expansion's top images from a random
   negative pool; its held-out accuracy S_i must reach the salience threshold.
2. Relevance: every salient expansion becomes a 2-D point (semantic distance,
   visual distance) to the target query, classified by a linear relevance model.

Semantic distance is the normalized page-count distance
    NGD(x, y) = (max(log f(x), log f(y)) - log f(x, y)) / (log N - min(log f(x), log f(y)))
over an offline page-count fixture.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from mil.solvers import train_linear_svm
from utils.exceptions import (ConfigurationError, DegenerateData,
                              DegenerateDenominator, InputError, InsufficientImages,
                              UndefinedDistance)

logger = logging.getLogger(__name__)

PENDING = 'pending'
SALIENT = 'salient'
NON_SALIENT = 'non_salient'
RELEVANT = 'relevant'
IRRELEVANT = 'irrelevant'
UNDEFINED = 'undefined'

SALIENCE_STREAM = 1
RELEVANCE_STREAM = 2


def pair_key(x: str, y: str) -> str:
    return '|'.join(sorted((x, y)))


@dataclass(frozen=True)
class PageCounts:
    single: Dict[str, int]
    pair: Dict[str, int]
    total: int

    def __post_init__(self):
        if self.total <= 0:
            raise InputError('page-count total must be positive')
        for term, count in self.single.items():
            if count < 0:
                raise InputError(f'negative page count for {term!r}')
            if count > self.total:
                raise InputError(f'page count for {term!r} exceeds the total')
        for key, count in self.pair.items():
            terms = key.split('|')
            if len(terms) != 2 or key != pair_key(*terms):
                raise InputError(f'pair key {key!r} must be two lexicographically ordered terms joined by "|"')
            missing = [term for term in terms if term not in self.single]
            if missing:
                raise InputError(f'pair {key!r} names unknown term {missing[0]!r}')
            if count < 0 or count > min(self.single[t] for t in terms):
                raise InputError(f'pair count for {key!r} must lie between 0 and both single counts')

    def occurrences(self, term: str) -> int:
        return self.single.get(term, 0)

    def co_occurrences(self, x: str, y: str) -> int:
        key = pair_key(x, y)
        if key not in self.pair and x == y:
            return self.occurrences(x)
        return self.pair.get(key, 0)

    @classmethod
    def from_dict(cls, data: dict) -> 'PageCounts':
        return cls(single=dict(data['single']), pair=dict(data.get('pair', {})), total=data['total'])


@dataclass(frozen=True, eq=False)
class ExpansionCandidate:
    text: str
    images: np.ndarray
    salience: Optional[float] = None
    semantic_distance: Optional[float] = None
    visual_distance: Optional[float] = None
    status: str = PENDING
    diagnostic: Optional[str] = None

    def __post_init__(self):
        images = np.array(self.images, dtype=float)
        if images.ndim == 1:
            images = images.reshape(0 if images.size == 0 else 1, -1)
        images.flags.writeable = False
        object.__setattr__(self, 'images', images)

    @property
    def image_count(self) -> int:
        return self.images.shape[0]

    def summary(self) -> dict:
        return {
            'text': self.text,
            'status': self.status,
            'salience': self.salience,
            'semantic_distance': self.semantic_distance,
            'visual_distance': self.visual_distance,
            'diagnostic': self.diagnostic,
        }


@dataclass(frozen=True, eq=False)
class RelevanceModel:
    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if w.shape != (2,):
            raise InputError('relevance model weights must be a 2-vector')
        object.__setattr__(self, 'w', w)

    def decision(self, semantic_distance: float, visual_distance: float) -> float:
        return float(self.w @ np.array([semantic_distance, visual_distance]) + self.b)

    def is_relevant(self, semantic_distance: float, visual_distance: float) -> bool:
        return self.decision(semantic_distance, visual_distance) >= 0.0

    def to_dict(self) -> dict:
        return {'w': [float(v) for v in self.w], 'b': float(self.b)}

    @classmethod
    def from_dict(cls, data: dict) -> 'RelevanceModel':
        return cls(w=data['w'], b=data['b'])


@dataclass(frozen=True)
class SalienceSplit:
    train_pos: int = 75
    val_pos: int = 25
    train_neg: int = 25
    val_neg: int = 25

    @classmethod
    def from_config(cls, config) -> 'SalienceSplit':
        return cls(config.train_pos, config.val_pos, config.train_neg, config.val_neg)


def ngd(x: str, y: str, counts: PageCounts) -> float:
    """Normalized page-count distance between two terms; symmetric and independent of the log base."""
    fx = counts.occurrences(x)
    if fx <= 0:
        raise UndefinedDistance(x)
    fy = counts.occurrences(y)
    if fy <= 0:
        raise UndefinedDistance(y)
    fxy = counts.co_occurrences(x, y)
    if fxy <= 0:
        raise UndefinedDistance(pair_key(x, y))

    log_x, log_y, log_xy = math.log(fx), math.log(fy), math.log(fxy)
    denominator = math.log(counts.total) - min(log_x, log_y)
    if denominator <= 0:
        raise DegenerateDenominator(f'total {counts.total} does not exceed the counts of {x!r} and {y!r}')
    return (max(log_x, log_y) - log_xy) / denominator


def compound_visual_feature(vectors, k: int) -> np.ndarray:
    """Mean of the first k rank-ordered vectors."""
    matrix = np.atleast_2d(np.asarray(vectors, dtype=float))
    available = matrix.shape[0] if matrix.size else 0
    if k < 1 or k > available:
        raise InsufficientImages(f'need {k} images, {available} available')
    return matrix[:k].mean(axis=0)


def visual_distance(candidate: ExpansionCandidate, target: ExpansionCandidate, k: int) -> float:
    left = compound_visual_feature(candidate.images, k)
    right = compound_visual_feature(target.images, k)
    return float(np.linalg.norm(left - right))


def salience_score(candidate: ExpansionCandidate, negatives, split: SalienceSplit,
                   C: float = 1.0, seed: int = 0, tol: float = 1e-6) -> float:
    """
    Held-out accuracy of a linear SVM telling the candidate's images from random negatives.

    Positive and negative images are shuffled with the seed before the
    train/validation partition.
    """
    sizes = (split.train_pos, split.val_pos, split.train_neg, split.val_neg)
    if min(sizes) < 1:
        raise ConfigurationError(f'salience split has an empty partition: {sizes}')
    negatives = np.atleast_2d(np.asarray(negatives, dtype=float))
    if candidate.image_count < split.train_pos + split.val_pos:
        raise ConfigurationError(f'expansion {candidate.text!r} has {candidate.image_count} images, '
                                 f'split needs {split.train_pos + split.val_pos}')
    if negatives.shape[0] < split.train_neg + split.val_neg:
        raise ConfigurationError(f'negative pool has {negatives.shape[0]} images, '
                                 f'split needs {split.train_neg + split.val_neg}')

    rng = np.random.default_rng(seed)
    positives = candidate.images[rng.permutation(candidate.image_count)]
    negatives = negatives[rng.permutation(negatives.shape[0])]
    model = train_linear_svm(positives[:split.train_pos], negatives[:split.train_neg], C=C, tol=tol)

    val_pos = positives[split.train_pos:split.train_pos + split.val_pos]
    val_neg = negatives[split.train_neg:split.train_neg + split.val_neg]
    correct = int((model.predict(val_pos) == 1).sum()) + int((model.predict(val_neg) == -1).sum())
    return correct / (len(val_pos) + len(val_neg))


def train_relevance_model(positive, negative, C: float = 1.0, tol: float = 1e-6) -> RelevanceModel:
    """Linear SVM over (semantic distance, visual distance) points."""
    positive = np.atleast_2d(np.asarray(positive, dtype=float))
    negative = np.atleast_2d(np.asarray(negative, dtype=float))
    if positive.size == 0 or negative.size == 0:
        raise InputError('relevance training needs relevant and irrelevant pairs')
    points = np.vstack([positive, negative])
    if points.shape[1] != 2:
        raise InputError('relevance features are (semantic distance, visual distance) pairs')
    if np.all(points == points[0]):
        raise DegenerateData('all relevance training points are identical')
    model = train_linear_svm(positive, negative, C=C, tol=tol)
    return RelevanceModel(w=model.w, b=model.b)


def relevance_training_pairs(positive_pool, negative_pool, n_positive: int, n_negative: int,
                             seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded sample (without replacement) of labeled pairs from each pool."""
    rng = np.random.default_rng([seed, RELEVANCE_STREAM])
    sampled = []
    for pool, count in ((positive_pool, n_positive), (negative_pool, n_negative)):
        pool = np.atleast_2d(np.asarray(pool, dtype=float))
        take = min(count, pool.shape[0])
        sampled.append(pool[np.sort(rng.choice(pool.shape[0], size=take, replace=False))])
    return sampled[0], sampled[1]


def _evaluate(index: int, candidate: ExpansionCandidate, target: ExpansionCandidate,
              counts: PageCounts, model: RelevanceModel, negatives, config) -> ExpansionCandidate:
    split = SalienceSplit.from_config(config)
    top_ranked = replace(candidate, images=candidate.images[:config.top_n])
    salience = salience_score(top_ranked, negatives, split, C=config.c_bag,
                              seed=[config.seed, SALIENCE_STREAM, index], tol=config.svm_tol)
    if salience < config.salience_threshold:
        return replace(candidate, salience=salience, status=NON_SALIENT)
    candidate = replace(candidate, salience=salience, status=SALIENT)

    try:
        semantic = ngd(candidate.text, target.text, counts)
    except (UndefinedDistance, DegenerateDenominator) as exc:
        logger.warning('expansion %r excluded: %s', candidate.text, exc)
        return replace(candidate, status=UNDEFINED, diagnostic=str(exc))
    k = min(config.compound_k, candidate.image_count, target.image_count)
    visual = visual_distance(candidate, target, k)
    status = RELEVANT if model.is_relevant(semantic, visual) else IRRELEVANT
    return replace(candidate, semantic_distance=semantic, visual_distance=visual, status=status)


def evaluate_expansions(candidates: Sequence[ExpansionCandidate], target: ExpansionCandidate,
                        counts: PageCounts, model: RelevanceModel, negatives, config) -> List[ExpansionCandidate]:
    """Every candidate with its final status, in input order."""
    negatives = np.atleast_2d(np.asarray(negatives, dtype=float))
    jobs = list(enumerate(candidates))

    def run(job):
        index, candidate = job
        return _evaluate(index, candidate, target, counts, model, negatives, config)

    if config.max_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            evaluated = list(pool.map(run, jobs))
    else:
        evaluated = [run(job) for job in jobs]

    tally = {}
    for candidate in evaluated:
        tally[candidate.status] = tally.get(candidate.status, 0) + 1
    logger.info('expansion filter: %s', ', '.join(f'{k}={v}' for k, v in sorted(tally.items())) or 'no candidates')
    return evaluated


def filter_expansions(candidates: Sequence[ExpansionCandidate], target: ExpansionCandidate,
                      counts: PageCounts, model: RelevanceModel, negatives, config) -> List[ExpansionCandidate]:
    """The relevant candidates, in input order."""
    evaluated = evaluate_expansions(candidates, target, counts, model, negatives, config)
    return [candidate for candidate in evaluated if candidate.status == RELEVANT]


def load_candidates(records) -> List[ExpansionCandidate]:
    return [ExpansionCandidate(text=record['text'], images=record['images']) for record in records]


def split_target(candidates: Sequence[ExpansionCandidate], target_text: str):
    """(target, remaining candidates) for the target query named target_text."""
    matches = [c for c in candidates if c.text == target_text]
    if not matches:
        raise InputError(f'target query {target_text!r} not found among the expansions')
    return matches[0], [c for c in candidates if c.text != target_text]
