from pathlib import Path

from pydantic import ValidationError

from curation.bagfiles import save_bags
from curation.synthetic import SyntheticSpec, generate_synthetic
from utils.commands import CurationCommand, dump_json, read_json
from utils.exceptions import ConfigurationError


class Command(CurationCommand):
    help = 'Generates a synthetic bag file with planted noise and its ground-truth file.'

    def add_arguments(self, parser):
        parser.add_argument('--spec', help='JSON file of generator settings (dim, separation, noise_fraction, ...)')
        parser.add_argument('--seed', type=int, help='Random seed (overrides the spec)')
        parser.add_argument('--out', required=True, help='Bag file to write')
        parser.add_argument('--truth', help='Ground-truth file (default: <out> with .truth.json suffix)')
        parser.add_argument('--reference', help='Also write the labeled reference bag set here')

    def run(self, **options):
        values = read_json(options['spec'], label='synthetic spec') if options['spec'] else {}
        if not isinstance(values, dict):
            raise ConfigurationError('synthetic spec must be a JSON object')
        if options['seed'] is not None:
            values['seed'] = options['seed']
        try:
            spec = SyntheticSpec(**values)
        except ValidationError as exc:
            raise ConfigurationError(f'invalid synthetic spec: {exc}') from exc

        dataset = generate_synthetic(spec)
        out = save_bags(dataset.problem, options['out'])
        truth = Path(options['truth']) if options['truth'] else out.with_suffix('.truth.json')
        truth.parent.mkdir(parents=True, exist_ok=True)
        truth.write_text(dump_json(dataset.truth_dict()), encoding='utf-8')
        if options['reference']:
            save_bags(dataset.reference_bags, options['reference'])

        self.stdout.write(self.style.SUCCESS(
            f'Wrote {len(dataset.problem.bags)} bags to {out} and ground truth to {truth}'))
