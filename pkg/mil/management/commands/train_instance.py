from curation.bagfiles import load_bags
from curation.persistence import models_json
from mil.instance import train_instance_model
from utils.commands import CurationCommand
from utils.exceptions import InputError


class Command(CurationCommand):
    help = 'Trains the cutting-plane instance model on a bag file and writes it as a model file.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('bags', help='Bag file (one JSON bag per line)')
        parser.add_argument('--positive-bags', help='Comma-separated positive bag ids to train on (default: all)')

    def run(self, **options):
        config = self.load_config(options)
        problem = load_bags(options['bags'], config=config)
        if options['positive_bags']:
            wanted = [bag_id.strip() for bag_id in options['positive_bags'].split(',') if bag_id.strip()]
            try:
                chosen = [problem.bag(bag_id) for bag_id in wanted]
            except KeyError as exc:
                raise InputError(f'unknown bag {exc.args[0]!r}') from exc
            if any(not bag.is_positive for bag in chosen):
                raise InputError('--positive-bags may only name positive bags')
            problem = problem.subproblem(tuple(chosen) + problem.negative_bags)

        model = train_instance_model(problem, tol=config.mkl_tol, max_iter=config.max_iter,
                                     limit=config.enumeration_limit)
        self.emit(models_json(instance_model=model), options['out'])
        self.stdout.write(self.style.SUCCESS(
            f'Instance model: {model.iterations} rounds, {len(model.alpha)} support vectors, '
            f'{model.active_set_size} labelings'))
