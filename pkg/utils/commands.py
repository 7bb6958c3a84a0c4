"""
Shared plumbing for the curation management commands.

Subclasses implement ``run(**options)`` instead of ``handle``; any
CurationError escaping it becomes a CommandError whose return code is the
error's exit code (2 for input problems, 3 for solver non-convergence).
"""
import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from curation.conf import CurationConfig
from .exceptions import CurationError, InputError


def read_json(path, serializer_class=None, label='file'):
    """Load a JSON document, optionally validated through a DRF serializer."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f'{label} {path} not found')
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f'{label} {path} is not valid JSON: {exc}') from exc
    if serializer_class is None:
        return data
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        raise InputError(f'{label} {path} is invalid: {json.dumps(serializer.errors, default=str)}')
    return serializer.validated_data


def read_json_lines(path, serializer_class, label='file'):
    path = Path(path)
    if not path.is_file():
        raise InputError(f'{label} {path} not found')
    records = []
    with path.open('r', encoding='utf-8') as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f'{label} {path}, line {number}: malformed JSON: {exc.msg}') from exc
            serializer = serializer_class(data=data)
            if not serializer.is_valid():
                raise InputError(f'{label} {path}, line {number}: '
                                 f'{json.dumps(serializer.errors, default=str)}')
            records.append(serializer.validated_data)
    return records


def dump_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + '\n'


class CurationCommand(BaseCommand):
    def add_arguments(self, parser):
        parser.add_argument('--config', help='key=value file overriding the CURATION settings')
        parser.add_argument('--seed', type=int, help='Random seed (overrides the configured one)')
        parser.add_argument('--out', help='Write the result here instead of stdout')

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except CurationError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def run(self, **options):
        raise NotImplementedError

    def load_config(self, options, **overrides) -> CurationConfig:
        return CurationConfig.load(options.get('config'), seed=options.get('seed'), **overrides)

    def emit(self, text: str, out=None):
        if out:
            path = Path(out)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding='utf-8')
            self.stdout.write(self.style.SUCCESS(f'Wrote {path}'))
        else:
            self.stdout.write(text, ending='')
