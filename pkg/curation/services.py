"""
Curation Pipeline
=================

End-to-end curation of a validated bag problem:

1. instance stage: cutting-plane MIL model(s), every instance scored
2. bag stage: latent bag classifier, positive bags filtered by sign
3. retention: instances of retained bags kept by score (> 0, or top-m per bag)
4. selection: round-robin even selection up to the quota

Every stage's failure is re-raised as StageError naming the stage.
"""
import hashlib
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from curation.domain import Bag, MilProblem, validate_problem
from mil.bag import BagModel, filter_bags, train_bag_model
from mil.instance import InstanceModel, train_instance_model
from utils.exceptions import CurationError, InputError, QuotaError, StageError, ValidationFailed

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA = 'curation.manifest/v1'


@dataclass(frozen=True)
class RetainedBag:
    """A retained bag with (instance id, score, rank) for each retained instance."""
    id: str
    score: float
    instances: Tuple[Tuple[str, float, int], ...]


@dataclass(frozen=True)
class CurationManifest:
    config: dict
    bag_scores: Dict[str, float]
    retained_bags: Tuple[str, ...]
    instance_scores: Dict[str, Dict[str, float]]
    retained_instances: Dict[str, Tuple[str, ...]]
    selection: Tuple[str, ...]
    quota: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'schema': MANIFEST_SCHEMA,
            'config': self.config,
            'bags': {
                'scores': self.bag_scores,
                'retained': list(self.retained_bags),
            },
            'instances': {
                'scores': self.instance_scores,
                'retained': {bag_id: list(ids) for bag_id, ids in self.retained_instances.items()},
            },
            'selection': list(self.selection),
            'quota': self.quota,
            'diagnostics': self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + '\n'

    @classmethod
    def from_dict(cls, data: dict) -> 'CurationManifest':
        if data.get('schema') != MANIFEST_SCHEMA:
            raise InputError(f'unknown manifest schema {data.get("schema")!r}')
        return cls(
            config=data['config'],
            bag_scores=data['bags']['scores'],
            retained_bags=tuple(data['bags']['retained']),
            instance_scores=data['instances']['scores'],
            retained_instances={k: tuple(v) for k, v in data['instances']['retained'].items()},
            selection=tuple(data['selection']),
            quota=data.get('quota'),
            diagnostics=data.get('diagnostics', {}),
        )

    def consistency_issues(self) -> List[str]:
        """Violations of the manifest invariants; empty when consistent."""
        issues = []
        retained = set(self.retained_bags)
        for bag_id in self.retained_instances:
            if bag_id not in retained:
                issues.append(f'instances kept from bag {bag_id}, which was not retained')
        kept = {inst for ids in self.retained_instances.values() for inst in ids}
        stray = [inst for inst in self.selection if inst not in kept]
        if stray:
            issues.append(f'selected instances outside the retained set: {", ".join(stray)}')
        if len(set(self.selection)) != len(self.selection):
            issues.append('selection repeats an instance')
        if self.quota is not None and len(self.selection) != self.quota:
            issues.append(f'selection has {len(self.selection)} instances, quota is {self.quota}')
        return issues


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except CurationError as exc:
        logger.error('stage %s failed: %s', name, exc)
        raise StageError(name, exc) from exc


def resolve_scope(problem: MilProblem, config) -> str:
    if config.instance_scope != 'auto':
        return config.instance_scope
    positives = sum(bag.size for bag in problem.positive_bags)
    return 'pooled' if positives <= config.enumeration_limit else 'per_bag'


def _model_diagnostics(model: InstanceModel, bag_ids) -> dict:
    return {
        'bags': list(bag_ids),
        'iterations': model.iterations,
        'objective_trace': [float(v) for v in model.objective_trace],
        'gap_trace': [float(v) for v in model.gap_trace],
        'active_set_size': model.active_set_size,
        'support_size': int(len(model.alpha)),
    }


def score_instances(problem: MilProblem, config) -> Tuple[Dict[str, Dict[str, float]], List[dict]]:
    """Instance scores per positive bag, plus one diagnostics entry per trained model."""
    scope = resolve_scope(problem, config)
    scores, diagnostics = {}, []
    if scope == 'pooled':
        groups = [problem.positive_bags]
    else:
        groups = [(bag,) for bag in problem.positive_bags]
    logger.info('instance stage: %s scope, %d model(s)', scope, len(groups))

    for group in groups:
        subproblem = problem.subproblem(tuple(group) + problem.negative_bags)
        model = train_instance_model(subproblem, tol=config.mkl_tol, max_iter=config.max_iter,
                                     limit=config.enumeration_limit)
        for bag in group:
            values = model.decision_function(bag.matrix)
            scores[bag.id] = {inst.id: float(v) for inst, v in zip(bag.instances, values)}
        entry = _model_diagnostics(model, [bag.id for bag in group])
        entry['scope'] = scope
        diagnostics.append(entry)
    return scores, diagnostics


def _split_labeled(bags: Sequence[Bag]):
    return [b for b in bags if b.is_positive], [b for b in bags if not b.is_positive]


def retain_instances(bag: Bag, scores: Dict[str, float], top_m: Optional[int] = None) -> Tuple[str, ...]:
    """Instances scoring > 0, or the top-m by score (ties by rank) when top_m is set."""
    if top_m is None:
        return tuple(inst.id for inst in bag.instances if scores[inst.id] > 0.0)
    ordered = sorted(bag.instances, key=lambda inst: (-scores[inst.id], inst.rank))
    keep = {inst.id for inst in ordered[:top_m]}
    return tuple(inst.id for inst in bag.instances if inst.id in keep)


def even_select(retained: Sequence[RetainedBag], quota: int) -> List[str]:
    """
    Round-robin over bags by descending score (ties in input order), each turn
    taking the bag's best remaining instance (descending score, then rank).
    """
    total = sum(len(bag.instances) for bag in retained)
    if quota < 0 or quota > total:
        raise QuotaError(f'quota {quota} exceeds the {total} retained instances')

    order = sorted(range(len(retained)), key=lambda i: (-retained[i].score, i))
    queues = [
        [inst_id for inst_id, _, _ in sorted(retained[i].instances, key=lambda item: (-item[1], item[2]))]
        for i in order
    ]
    selection = []
    depth = 0
    while len(selection) < quota:
        for queue in queues:
            if depth < len(queue) and len(selection) < quota:
                selection.append(queue[depth])
        depth += 1
    return selection


def run_curation(problem: MilProblem, config, reference_bags: Optional[Sequence[Bag]] = None,
                 bag_model: Optional[BagModel] = None,
                 expansion_statuses: Optional[List[dict]] = None) -> CurationManifest:
    """
    Curate a problem into a manifest.

    The bag classifier is, in order of preference, the supplied bag_model, one
    trained on reference_bags, or one trained on the problem's own bags.

    Raises:
        ValidationFailed: the problem is ill-formed
        StageError: a stage failed; wraps the original error
    """
    report = validate_problem(problem)
    if not report.is_valid:
        raise ValidationFailed(report)
    problem = MilProblem(bags=problem.bags, delta=config.delta, C=config.c_instance,
                         kernel=config.kernel_spec)

    with _stage('instance'):
        instance_scores, instance_diagnostics = score_instances(problem, config)

    with _stage('bag'):
        if bag_model is not None:
            source = 'supplied'
        else:
            if reference_bags:
                positives, negatives = _split_labeled(reference_bags)
                source = 'reference'
            else:
                positives, negatives = problem.positive_bags, problem.negative_bags
                source = 'problem'
            bag_model = train_bag_model(positives, negatives, config)
        retained_bags, bag_scores = filter_bags(bag_model, problem.positive_bags)

    with _stage('retention'):
        retained_instances = {}
        retained = []
        for bag in problem.positive_bags:
            if bag.id not in retained_bags:
                continue
            kept = retain_instances(bag, instance_scores[bag.id], config.retain_top_m)
            retained_instances[bag.id] = kept
            ranks = {inst.id: inst.rank for inst in bag.instances}
            retained.append(RetainedBag(
                id=bag.id,
                score=bag_scores[bag.id],
                instances=tuple((i, instance_scores[bag.id][i], ranks[i]) for i in kept),
            ))

    with _stage('selection'):
        total = sum(len(bag.instances) for bag in retained)
        quota = config.quota if config.quota is not None else total
        selection = even_select(retained, quota)

    diagnostics = {
        'instance_stage': instance_diagnostics,
        'bag_stage': {
            'source': source,
            'k': bag_model.k,
            'iterations': bag_model.iterations,
            'objective_trace': [float(v) for v in bag_model.objective_trace],
            'degenerate': bool(bag_model.degenerate),
            'omega': [float(v) for v in bag_model.omega],
        },
        'labelings_checked': True,
        'counts': {
            'positive_bags': len(problem.positive_bags),
            'retained_bags': len(retained_bags),
            'retained_instances': int(sum(len(v) for v in retained_instances.values())),
            'selected': len(selection),
        },
    }
    if expansion_statuses is not None:
        diagnostics['expansions'] = expansion_statuses

    manifest = CurationManifest(
        config=config.snapshot(),
        bag_scores={bag_id: float(score) for bag_id, score in bag_scores.items()},
        retained_bags=tuple(retained_bags),
        instance_scores=instance_scores,
        retained_instances=retained_instances,
        selection=tuple(selection),
        quota=config.quota,
        diagnostics=diagnostics,
    )
    issues = manifest.consistency_issues()
    if issues:
        raise StageError('manifest', InputError('; '.join(issues)))
    logger.info('curation kept %d/%d bags and selected %d instances',
                len(retained_bags), len(problem.positive_bags), len(selection))
    return manifest


def manifest_digest(manifest: CurationManifest) -> str:
    return hashlib.sha256(manifest.to_json().encode('utf-8')).hexdigest()
