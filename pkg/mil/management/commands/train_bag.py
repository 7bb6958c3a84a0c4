from curation.bagfiles import load_bags
from curation.persistence import models_json
from mil.bag import calibrate_weight_params, train_bag_model, weight_grid
from utils.commands import CurationCommand


class Command(CurationCommand):
    help = 'Trains the latent bag classifier on one or more labeled bag files.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('bags', nargs='+', help='Labeled bag file(s); several files form calibration sets')
        parser.add_argument('--calibrate', action='store_true',
                            help='Pick the weighting parameters by cross-validation over the configured grid')

    def run(self, **options):
        config = self.load_config(options)
        problems = [load_bags(path, config=config) for path in options['bags']]
        labeled_sets = [(problem.positive_bags, problem.negative_bags) for problem in problems]

        weights = None
        if options['calibrate']:
            weights = calibrate_weight_params(labeled_sets, weight_grid(config), config)
            self.stdout.write(self.style.SUCCESS(
                f'Calibrated weighting: xi_alpha={weights.xi_alpha} xi_beta={weights.xi_beta}'))

        positives = [bag for pos, _ in labeled_sets for bag in pos]
        negatives = [bag for _, neg in labeled_sets for bag in neg]
        model = train_bag_model(positives, negatives, config, weights=weights)
        if model.degenerate:
            self.stderr.write(self.style.WARNING('Bag classifier is degenerate: positive and negative bags coincide'))
        self.emit(models_json(bag_model=model), options['out'])
        self.stdout.write(self.style.SUCCESS(f'Bag model: k={model.k}, {model.iterations} CCCP rounds'))
