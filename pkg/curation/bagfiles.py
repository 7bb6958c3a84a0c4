"""
Bag File I/O
============

Line-delimited JSON, one bag per line:

    {"id":"b1","label":"pos","expansion":"jumping horse","instances":[{"id":"b1-0","rank":0,"features":[0.1,2.0]}]}

save_bags writes the canonical form (compact separators, fixed key order), so
loading and saving a canonical file reproduces it byte for byte.
"""
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional

from curation.domain import NEGATIVE, POSITIVE, Bag, Instance, MilProblem, validate_problem
from mil.kernels import KernelSpec
from utils.exceptions import BagFileError, InputError, ValidationFailed
from .serializers import BagRecordSerializer

logger = logging.getLogger(__name__)

FILE_LABELS = {'pos': POSITIVE, 'neg': NEGATIVE}
LABEL_CODES = {POSITIVE: 'pos', NEGATIVE: 'neg'}


def _describe(errors) -> str:
    return json.dumps(errors, sort_keys=True, default=str)


def read_bags(path) -> List[Bag]:
    """Parse a bag file into bags without checking problem-level invariants."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f'bag file {path} not found')

    bags = []
    with path.open('r', encoding='utf-8') as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BagFileError(f'malformed JSON: {exc.msg}', line=number) from exc
            serializer = BagRecordSerializer(data=record)
            if not serializer.is_valid():
                raise BagFileError(f'invalid bag record: {_describe(serializer.errors)}', line=number)
            data = serializer.validated_data
            instances = tuple(
                Instance(id=item['id'], bag_id=data['id'], features=item['features'], rank=item['rank'])
                for item in data['instances']
            )
            bags.append(Bag(
                id=data['id'],
                label=FILE_LABELS[data['label']],
                instances=instances,
                expansion_text=data.get('expansion'),
            ))
    if not bags:
        raise BagFileError('no bags')
    return bags


def load_bags(path, config=None, delta: Optional[float] = None, C: Optional[float] = None,
              kernel: Optional[KernelSpec] = None) -> MilProblem:
    """
    Parse and validate a bag file.

    Problem parameters come from config (delta, c_instance, kernel) unless
    given explicitly.

    Raises:
        BagFileError: unreadable line (with its line number) or no bags at all
        ValidationFailed: the parsed problem breaks an invariant; carries the report
    """
    bags = read_bags(path)
    if config is not None:
        delta = delta if delta is not None else config.delta
        C = C if C is not None else config.c_instance
        kernel = kernel or config.kernel_spec
    problem = MilProblem(
        bags=tuple(bags),
        delta=0.7 if delta is None else delta,
        C=1.0 if C is None else C,
        kernel=kernel or KernelSpec(),
    )
    report = validate_problem(problem)
    if not report.is_valid:
        raise ValidationFailed(report)
    logger.info('loaded %d bags (%d instances) from %s', len(bags), problem.n, path)
    return problem


def encode_bag(bag: Bag) -> str:
    record = {
        'id': bag.id,
        'label': LABEL_CODES[bag.label],
        'expansion': bag.expansion_text,
        'instances': [
            {'id': inst.id, 'rank': inst.rank, 'features': [float(v) for v in inst.features]}
            for inst in bag.instances
        ],
    }
    return json.dumps(record, separators=(',', ':'), allow_nan=False)


def save_bags(bags: Iterable[Bag], path) -> Path:
    if isinstance(bags, MilProblem):
        bags = bags.bags
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        for bag in bags:
            handle.write(encode_bag(bag) + '\n')
    return path
