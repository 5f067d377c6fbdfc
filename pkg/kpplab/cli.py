"""Command-line front-end: `kpplab <kind> --config scenario.yaml [--config ...] --out results --jobs 2`

Exit statuses
-------------
0 success, 1 failed verdict, 2 invalid scenario, 3 MarginViolated, 4 NotSqueezed, 5 PoorFit,
6 other numerical errors. With several scenarios the largest status is returned.
"""
import argparse
import logging
from dataclasses import replace
from typing import Optional, Sequence, get_args

from joblib import Parallel, delayed

from .api import EXIT_INVALID_SCENARIO, bounds_table, exit_code, run_scenario
from .forcing import Forcing
from .io import SCENARIO_KIND, Scenario, ScenarioParseError, ScenarioValidationError, read_scenario
from .reaction import Reaction

logger = logging.getLogger(__name__)

VERBOSITY = (logging.WARNING, logging.INFO, logging.DEBUG)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='kpplab', description='Lattice Fisher-KPP laboratory')
    subparsers = parser.add_subparsers(dest='kind', required=True)
    for kind in get_args(SCENARIO_KIND):
        sub = subparsers.add_parser(kind, help=f"run {kind} scenarios")
        sub.add_argument('--config', action='append', default=[], metavar='PATH',
                         help='scenario file (repeatable); the subcommand sets the scenario kind')
        sub.add_argument('--out', default=None, metavar='DIR', help='output directory (overrides output.dir)')
        sub.add_argument('--jobs', type=int, default=1, metavar='N', help='scenarios run in parallel')
        sub.add_argument('--seed', type=int, default=None, help='overrides scenario.seed')
        sub.add_argument('--no-plot', action='store_true', help='skip the SVG plots')
        sub.add_argument('-v', '--verbose', action='count', default=0, help='-v for INFO, -vv for DEBUG')
    return parser


def _default_scenario(kind: str) -> Scenario:
    """Scenario used when no config is given: logistic reaction with constant growth rate 1"""
    return Scenario(kind, kind, Forcing.constant(1.), Reaction.logistic(Forcing.constant(1.)))


def _reseed(scenario: Scenario, seed: int) -> Scenario:
    """Switching levels are redrawn with `seed`"""
    if scenario.forcing.kind != 'switching':
        return scenario
    forcing = replace(scenario.forcing, seed=seed)
    return replace(scenario, forcing=forcing, reaction=replace(scenario.reaction, forcing=forcing))


def _run_one(scenario: Scenario, out_dir: Optional[str]) -> tuple[str, int, str]:
    """Run one scenario and return (name, exit status, text for stdout)"""
    try:
        result = run_scenario(scenario, out_dir)
    except Exception as error:
        status = exit_code(error)
        logger.error('Scenario %s stopped: %s', scenario.name, error)
        return scenario.name, status, f"{scenario.name}: {type(error).__name__} (exit {status})"

    text = f"{scenario.name}: {scenario.kind} verdict {result.report['verdict']} (exit {result.status})"
    if scenario.kind == 'bounds':
        text += '\n' + bounds_table(result)
    return scenario.name, result.status, text


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=VERBOSITY[min(args.verbose, len(VERBOSITY) - 1)],
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    scenarios, statuses = [], []
    for path in args.config:
        try:
            scenarios.append(read_scenario(path))
        except (ScenarioParseError, ScenarioValidationError, OSError) as error:
            print(error)
            statuses.append(EXIT_INVALID_SCENARIO)
    if not args.config:
        scenarios.append(_default_scenario(args.kind))

    overrides = {'kind': args.kind}
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.no_plot:
        overrides['plot'] = False
    scenarios = [replace(scenario, **overrides) for scenario in scenarios]
    if args.seed is not None:
        scenarios = [_reseed(scenario, args.seed) for scenario in scenarios]

    names = [scenario.name for scenario in scenarios]
    if len(set(names)) < len(names):
        print(f"Scenario names should be unique, got {names}")
        return EXIT_INVALID_SCENARIO

    outcomes = Parallel(n_jobs=args.jobs)(delayed(_run_one)(scenario, args.out) for scenario in scenarios)
    for _, status, text in outcomes:
        print(text)
        statuses.append(status)
    return max(statuses, default=0)
