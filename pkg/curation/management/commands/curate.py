from curation.bagfiles import load_bags
from curation.models import CurationRun
from curation.persistence import load_models
from curation.services import manifest_digest, run_curation
from utils.commands import CurationCommand, read_json
from utils.exceptions import ConfigurationError, CurationError, InputError


class Command(CurationCommand):
    help = 'Curates a bag file into a manifest of retained bags, retained instances and an even selection.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('bags', help='Bag file (one JSON bag per line)')
        parser.add_argument('--quota', type=int, help='Number of instances to select evenly (default: all retained)')
        parser.add_argument('--bag-train', help='Labeled reference bag file for the bag classifier')
        parser.add_argument('--bag-model', help='Model file holding a trained bag classifier')
        parser.add_argument('--expansions', help='Output of filter_expansions, recorded in the diagnostics')
        parser.add_argument('--record', action='store_true', help='Store the run in the database')

    def run(self, **options):
        if options['bag_train'] and options['bag_model']:
            raise ConfigurationError('give at most one of --bag-train and --bag-model')
        config = self.load_config(options, quota=options['quota'])

        try:
            manifest = self._curate(config, options)
        except CurationError as exc:
            if options['record']:
                CurationRun.objects.create(source=options['bags'], seed=config.seed, status='failed',
                                           config=config.snapshot(), manifest={'error': str(exc)})
            raise

        self.emit(manifest.to_json(), options['out'])
        if options['record']:
            run = CurationRun.objects.create(
                source=options['bags'],
                seed=config.seed,
                status='completed',
                retained_bag_count=len(manifest.retained_bags),
                selected_count=len(manifest.selection),
                config=manifest.config,
                manifest=manifest.to_dict(),
            )
            self.stdout.write(self.style.SUCCESS(f'Recorded curation run #{run.pk}'))
        self.stdout.write(self.style.SUCCESS(
            f'Retained {len(manifest.retained_bags)} of {len(manifest.bag_scores)} positive bags, '
            f'selected {len(manifest.selection)} instances (manifest {manifest_digest(manifest)[:12]})'))

    def _curate(self, config, options):
        problem = load_bags(options['bags'], config=config)

        reference_bags, bag_model = None, None
        if options['bag_train']:
            reference_bags = load_bags(options['bag_train'], config=config).bags
        if options['bag_model']:
            bag_model = load_models(options['bag_model']).bag_model
            if bag_model is None:
                raise InputError(f'model file {options["bag_model"]} holds no bag model')

        statuses = None
        if options['expansions']:
            document = read_json(options['expansions'], label='expansion statuses')
            if not isinstance(document, dict) or not isinstance(document.get('expansions'), list):
                raise InputError('expansion statuses must be the output of filter_expansions')
            statuses = [{'text': entry['text'], 'status': entry['status']} for entry in document['expansions']]

        return run_curation(problem, config, reference_bags=reference_bags, bag_model=bag_model,
                            expansion_statuses=statuses)
