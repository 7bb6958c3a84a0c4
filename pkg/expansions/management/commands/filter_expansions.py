from expansions.serializers import (ExpansionRecordSerializer, NegativePoolSerializer,
                                    PageCountsSerializer, RelevanceModelSerializer,
                                    RelevancePairsSerializer)
from expansions.services import (RELEVANT, PageCounts, RelevanceModel, evaluate_expansions,
                                 load_candidates, relevance_training_pairs, split_target,
                                 train_relevance_model)
from utils.commands import CurationCommand, dump_json, read_json, read_json_lines
from utils.exceptions import ConfigurationError


class Command(CurationCommand):
    help = 'Filters query expansions by salience and relevance to the target query.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('expansions', help='JSON-lines file of {"text", "images"} records, target included')
        parser.add_argument('counts', help='Page-count fixture {"total", "single", "pair"}')
        parser.add_argument('--target', required=True, help='Text of the target query')
        parser.add_argument('--negatives', required=True, help='Random negative image pool {"images"}')
        parser.add_argument('--model', help='Relevance model {"w", "b"}')
        parser.add_argument('--train-pairs', help='Labeled distance pairs {"positive", "negative"}')

    def run(self, **options):
        if bool(options['model']) == bool(options['train_pairs']):
            raise ConfigurationError('give exactly one of --model and --train-pairs')
        config = self.load_config(options)

        records = read_json_lines(options['expansions'], ExpansionRecordSerializer, label='expansion file')
        target, candidates = split_target(load_candidates(records), options['target'])
        counts = PageCounts.from_dict(read_json(options['counts'], PageCountsSerializer, label='counts file'))
        negatives = read_json(options['negatives'], NegativePoolSerializer, label='negative pool')['images']

        if options['model']:
            model = RelevanceModel.from_dict(
                read_json(options['model'], RelevanceModelSerializer, label='relevance model'))
        else:
            pairs = read_json(options['train_pairs'], RelevancePairsSerializer, label='training pairs')
            positive, negative = relevance_training_pairs(
                pairs['positive'], pairs['negative'],
                config.relevance_positive, config.relevance_negative, seed=config.seed)
            model = train_relevance_model(positive, negative, C=config.c_bag, tol=config.svm_tol)
            self.stdout.write(self.style.SUCCESS(
                f'Trained relevance model on {len(positive)} relevant and {len(negative)} irrelevant pairs'))

        evaluated = evaluate_expansions(candidates, target, counts, model, negatives, config)
        result = {
            'target': target.text,
            'relevance_model': model.to_dict(),
            'expansions': [candidate.summary() for candidate in evaluated],
            'relevant': [candidate.text for candidate in evaluated if candidate.status == RELEVANT],
        }
        self.emit(dump_json(result), options['out'])
        self.stdout.write(self.style.SUCCESS(
            f'{len(result["relevant"])} of {len(evaluated)} expansions are relevant'))
