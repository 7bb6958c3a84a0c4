"""Plain-text summaries of curation manifests."""
from typing import List


def _trace(values, limit: int = 6) -> str:
    values = list(values)
    shown = [f'{v:.6g}' for v in values[:limit]]
    if len(values) > limit:
        shown.append(f'... {values[-1]:.6g}')
    return ' -> '.join(shown) if shown else '-'


def render_manifest(manifest: dict) -> str:
    """Human-readable report of a manifest dict (as written by `curate`)."""
    bags = manifest['bags']
    instances = manifest['instances']
    diagnostics = manifest.get('diagnostics', {})
    retained = set(bags['retained'])
    lines: List[str] = []

    lines.append('Curation report')
    lines.append('=' * 15)
    config = manifest.get('config', {})
    lines.append(f"delta={config.get('delta')}  k={config.get('k')}  kernel={config.get('kernel')}  "
                 f"seed={config.get('seed')}  quota={manifest.get('quota')}")
    lines.append('')

    lines.append(f'Bags: {len(retained)} of {len(bags["scores"])} positive bags retained')
    for bag_id, score in sorted(bags['scores'].items(), key=lambda item: (-item[1], item[0])):
        mark = 'kept' if bag_id in retained else 'dropped'
        kept = instances['retained'].get(bag_id, [])
        total = len(instances['scores'].get(bag_id, {}))
        lines.append(f'  {bag_id:<20} score {score:+.4f}  {mark:<7}  instances {len(kept)}/{total}')
    lines.append('')

    lines.append(f'Selection: {len(manifest["selection"])} instances')
    if manifest['selection']:
        lines.append('  ' + ', '.join(manifest['selection'][:20])
                     + (' ...' if len(manifest['selection']) > 20 else ''))
    lines.append('')

    stages = diagnostics.get('instance_stage', [])
    if stages:
        lines.append(f'Instance stage: {len(stages)} model(s), scope {stages[0].get("scope")}')
        for entry in stages:
            lines.append(f'  {",".join(entry["bags"])[:40]:<40} rounds {entry["iterations"]:>3}  '
                         f'objective {_trace(entry["objective_trace"])}')
    bag_stage = diagnostics.get('bag_stage')
    if bag_stage:
        lines.append(f'Bag stage: trained on {bag_stage["source"]}, {bag_stage["iterations"]} CCCP rounds, '
                     f'objective {_trace(bag_stage["objective_trace"])}')
        if bag_stage.get('degenerate'):
            lines.append('  warning: degenerate bag classifier')
    expansions = diagnostics.get('expansions')
    if expansions:
        lines.append(f'Expansions: {len(expansions)} evaluated')
        for entry in expansions:
            lines.append(f'  {entry["text"]:<30} {entry["status"]}')
    return '\n'.join(lines) + '\n'
