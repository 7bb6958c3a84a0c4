from django.core.management.base import CommandError

from curation.models import CurationRun
from curation.reports import render_manifest
from curation.services import CurationManifest
from utils.commands import CurationCommand, read_json
from utils.exceptions import InputError


class Command(CurationCommand):
    help = 'Renders a curation manifest, from a file or a recorded run, as a plain-text report.'

    def add_arguments(self, parser):
        parser.add_argument('manifest', nargs='?', help='Manifest file written by curate')
        parser.add_argument('--run', type=int, help='Id of a recorded curation run')
        parser.add_argument('--out', help='Write the report here instead of stdout')

    def run(self, **options):
        if bool(options['manifest']) == (options['run'] is not None):
            raise CommandError('give either a manifest file or --run', returncode=2)
        if options['manifest']:
            data = read_json(options['manifest'], label='manifest')
        else:
            run = CurationRun.objects.filter(pk=options['run']).first()
            if run is None:
                raise InputError(f'no curation run #{options["run"]}')
            if run.status != 'completed':
                raise InputError(f'curation run #{run.pk} failed and has no manifest')
            data = run.manifest
        if not isinstance(data, dict):
            raise InputError('manifest must be a JSON object')
        try:
            CurationManifest.from_dict(data)
        except (KeyError, TypeError) as exc:
            raise InputError(f'manifest is missing {exc}') from exc
        self.emit(render_manifest(data), options['out'])
