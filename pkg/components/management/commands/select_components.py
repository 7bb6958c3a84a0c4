from components.serializers import ComponentGraphSerializer
from components.services import ComponentGraph, exact_select, greedy_select
from utils.commands import CurationCommand, dump_json, read_json
from utils.exceptions import ConfigurationError


class Command(CurationCommand):
    help = 'Selects a budgeted subset of components that maximizes weighted coverage.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('graph', help='Component graph {"d": scores, "e": affinity matrix}')
        parser.add_argument('--budget', type=int, help='Number of components to select (default: coverage_budget)')
        parser.add_argument('--exact', action='store_true', help='Exhaustive search instead of greedy (small graphs)')

    def run(self, **options):
        config = self.load_config(options)
        budget = options['budget'] if options['budget'] is not None else config.coverage_budget
        if budget is None:
            raise ConfigurationError('no budget: pass --budget or set coverage_budget')
        graph = ComponentGraph.from_dict(read_json(options['graph'], ComponentGraphSerializer, label='graph file'))

        selection = exact_select(graph, budget) if options['exact'] else greedy_select(graph, budget)
        result = {
            'method': 'exact' if options['exact'] else 'greedy',
            'budget': budget,
            'nodes': list(selection.nodes),
            'objective': selection.objective,
        }
        self.emit(dump_json(result), options['out'])
        self.stdout.write(self.style.SUCCESS(
            f'Selected {len(selection.nodes)} of {graph.n} components, coverage {selection.objective:.6g}'))
