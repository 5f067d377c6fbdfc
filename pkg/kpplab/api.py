"""Module with high-level functions to run kpplab scenarios

The proposed functions are:
* run_scenario(scenario) to run the experiment of a scenario and write its tables, report and plots
* exit_code(error) to map the errors of the numerical modules to the documented exit statuses
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import pandas as pd

from . import experiments as exps, suites
from .dispersion import AssumptionViolated, BracketError, DomainError, NoRoot, speed_bounds
from .dynamics import BlowUp, MarginViolated, StepSizeError, UndefinedMetric
from .forcing import NonPositiveMean, UnboundedCorrector, block_average_inf, estimate_averages
from .fronts import AlphaLadderExhausted, KTooSmall, NoCrossing, NotSqueezed, pulsating_profile, squeeze_front
from .io import Scenario, ScenarioParseError, ScenarioValidationError, write_csv, write_report, write_svg
from .reaction import check_hypotheses

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERDICT_FAILED = 1
EXIT_INVALID_SCENARIO = 2
EXIT_MARGIN_VIOLATED = 3
EXIT_NOT_SQUEEZED = 4
EXIT_POOR_FIT = 5
EXIT_NUMERICAL_ERROR = 6

NUMERICAL_ERRORS = (
    UnboundedCorrector, NonPositiveMean, DomainError, BracketError, NoRoot, AssumptionViolated,
    StepSizeError, BlowUp, UndefinedMetric, KTooSmall, AlphaLadderExhausted, NoCrossing,
)


def exit_code(error: BaseException) -> int:
    """Exit status of a scenario stopped by `error`

    Examples
    --------
    exit_code(MarginViolated(10., 'right', 50.)) --> 3
    """
    if isinstance(error, (ScenarioParseError, ScenarioValidationError)):
        return EXIT_INVALID_SCENARIO
    if isinstance(error, MarginViolated):
        return EXIT_MARGIN_VIOLATED
    if isinstance(error, NotSqueezed):
        return EXIT_NOT_SQUEEZED
    if isinstance(error, exps.PoorFit):
        return EXIT_POOR_FIT
    if isinstance(error, NUMERICAL_ERRORS):
        return EXIT_NUMERICAL_ERROR
    raise error


@dataclass
class ScenarioResult:
    """Outcome of a scenario: the verdict (None when the kind has none), the tables and the flat report"""
    scenario: Scenario
    verdict: Optional[bool]
    tables: dict[str, pd.DataFrame]
    report: dict[str, object]
    plots: dict[str, tuple[str, str, tuple[str, ...]]] = field(default_factory=dict)  # name -> (table, x, ys)
    artifacts: list[Path] = field(default_factory=list)

    @property
    def status(self) -> int:
        return EXIT_VERDICT_FAILED if self.verdict is False else EXIT_OK


def _kwargs(**kwargs) -> dict[str, object]:
    """Drop the unset (None) parameters so that the experiment defaults apply"""
    return {k: v for k, v in kwargs.items() if v is not None}


def _averages(scenario: Scenario):
    run = scenario.run
    return estimate_averages(scenario.forcing, run.horizon, [T for T in run.windows if T <= run.horizon / 4])


#####################
# Scenario runners  #
#####################
def _run_bounds(scenario: Scenario, use_tqdm: bool) -> ScenarioResult:
    avg = _averages(scenario)
    bounds = speed_bounds(avg)
    hypotheses = check_hypotheses(scenario.reaction, horizon=scenario.run.horizon)
    report = bounds.as_row() | avg.as_row() | {f"hypothesis_{k}": v for k, v in hypotheses.passed.items()}
    tables = {'bounds': bounds.to_frame(), 'averages': avg.to_frame(), 'hypotheses': hypotheses.to_frame()}
    return ScenarioResult(scenario, None, tables, report)


def _run_averages(scenario: Scenario, use_tqdm: bool) -> ScenarioResult:
    run = scenario.run
    avg = estimate_averages(scenario.forcing, run.horizon, [T for T in run.windows if T <= run.horizon / 4], use_tqdm)
    blocks = pd.DataFrame({'T': list(avg.windows),
                           'block_average_inf': [block_average_inf(scenario.forcing, T, run.horizon) for T in avg.windows]})
    report = avg.as_row() | {'all_converged': avg.all_converged}
    return ScenarioResult(scenario, None, {'averages': avg.to_frame(), 'block_averages': blocks}, report)


def _datum(scenario: Scenario) -> exps.Datum:
    return exps.Datum(scenario.run.datum_width, scenario.run.datum_height)


def _run_speed(scenario: Scenario, use_tqdm: bool) -> ScenarioResult:
    run = scenario.run
    meas = exps.measure_spreading_speed(
        scenario.reaction, _datum(scenario), window=run.window, dt=run.dt, level_fraction=run.level_fraction,
        start_time=run.start_time, averages=_averages(scenario), margin=run.margin, use_tqdm=use_tqdm,
        **_kwargs(duration=run.duration, tol=run.tol),
    )
    tables = {'interfaces': meas.interfaces, 'window_speeds': meas.window_speeds, 'bounds': meas.bounds.to_frame()}
    plots = {'interfaces': ('interfaces', 't', ('left', 'right'))}
    return ScenarioResult(scenario, meas.passed, tables, meas.as_row(), plots)


def _run_hairtrigger(scenario: Scenario, use_tqdm: bool) -> ScenarioResult:
    run = scenario.run
    if run.gamma is None:
        raise ScenarioValidationError('gamma', 'is required for the hairtrigger scenario')
    rep = exps.hairtrigger_inside(
        scenario.reaction, run.gamma, _datum(scenario), window=run.window, dt=run.dt, start_times=run.start_times,
        averages=_averages(scenario), **_kwargs(duration=run.duration, tol=run.tol),
    )
    return ScenarioResult(scenario, rep.passed, {'runs': rep.runs}, rep.as_row())


def _run_front(scenario: Scenario, use_tqdm: bool) -> ScenarioResult:
    run = scenario.run
    if (run.gamma is None) == (run.mu is None):
        raise ScenarioValidationError('gamma', 'or mu (exactly one of them) is required for the front scenario')
    front = squeeze_front(
        scenario.reaction, gamma=run.gamma, mu=run.mu, subcells=run.subcells, tau_ladder=run.tau_ladder,
        output_times=run.output_times, dt=run.dt, frame_resampling=run.frame_resampling,
        averages=_averages(scenario), margin=run.margin, use_tqdm=use_tqdm, **_kwargs(tol=run.tol),
    )
    tables = {'profile': front.to_frame(), 'interfaces': front.interfaces, 'gaps': front.gaps}
    slices = pd.DataFrame({'x': front.positions} | {f"t={t:g}": slc for t, slc in zip(front.times, front.values)})
    tables['slices'] = slices
    plots = {'slices': ('slices', 'x', tuple(slices.columns[1:]))}
    if run.pulsating:
        tables['pulsating_profile'] = pulsating_profile(front, scenario.reaction).to_frame()
    return ScenarioResult(scenario, front.passed, tables, front.summary(), plots)


def _run_critical(scenario: Scenario, use_tqdm: bool) -> ScenarioResult:
    run = scenario.run
    rep = exps.critical_front_run(
        scenario.reaction, lo=-200, hi=max(1000, run.window), dt=run.dt, windows=run.windows,
        level_fraction=run.level_fraction, margin=run.margin, averages=_averages(scenario), use_tqdm=use_tqdm,
        **_kwargs(duration=run.duration, tol=run.tol),
    )
    tables = {'interfaces': rep.interfaces, 'window_speeds': rep.window_speeds}
    return ScenarioResult(scenario, rep.passed, tables, rep.as_row(), {'interfaces': ('interfaces', 't', ('J',))})


def _run_bracket(scenario: Scenario, use_tqdm: bool) -> ScenarioResult:
    run = scenario.run
    rep = exps.tilde_cstar_bracket(
        scenario.reaction, run.gammas, _datum(scenario), window=run.window, dt=run.dt,
        level_fraction=run.level_fraction, averages=_averages(scenario), **_kwargs(duration=run.duration, tol=run.tol),
    )
    return ScenarioResult(scenario, rep.passed, {'runs': rep.runs}, rep.as_row())


def _run_stability(scenario: Scenario, use_tqdm: bool) -> ScenarioResult:
    run = scenario.run
    start_times = run.start_times if len(run.start_times) > 1 else (0., 0.3, 0.7)
    rep = exps.stability_experiment(
        scenario.reaction, n_members=run.n_members, start_times=start_times, seed=scenario.seed, dt=run.dt,
        use_tqdm=use_tqdm, **_kwargs(duration=run.duration, tol=run.tol),
    )
    ages = (rep.distances['t'] - rep.distances['start_time']).round(9)
    worst = rep.distances.assign(age=ages).groupby('age', as_index=False)['distance'].max()
    tables = {'distances': rep.distances, 'worst_distances': worst}
    return ScenarioResult(scenario, rep.passed, tables, rep.as_row(), {'distances': ('worst_distances', 'age', ('distance',))})


def _run_verify(scenario: Scenario, use_tqdm: bool) -> ScenarioResult:
    outcomes = suites.run_all(scenario.run.n_trials, scenario.seed, use_tqdm=use_tqdm)
    report = {f"{row.suite}_violations": row.violations for row in outcomes.itertuples()}
    report['all_passed'] = bool(outcomes['passed'].all())
    return ScenarioResult(scenario, report['all_passed'], {'suites': outcomes}, report)


RUNNERS: dict[str, Callable[[Scenario, bool], ScenarioResult]] = {
    'bounds': _run_bounds,
    'averages': _run_averages,
    'speed': _run_speed,
    'hairtrigger': _run_hairtrigger,
    'front': _run_front,
    'critical': _run_critical,
    'bracket': _run_bracket,
    'stability': _run_stability,
    'verify': _run_verify,
}


def run_scenario(
        scenario: Scenario,
        out_dir: Union[str, Path, None] = None,
        use_tqdm: bool = False,
) -> ScenarioResult:
    """Run the experiment of `scenario` and write its artifacts into `out_dir`/`scenario.name`

    Parameters
    ----------
    scenario: Scenario
        A validated scenario (see `io.read_scenario`)
    out_dir: str or Path, optional
        Output directory. Defaults to the scenario's output directory. Nothing is written when it is an empty string
    use_tqdm: bool
        A flag whether to visualise the progress bars of the experiments

    Returns
    -------
    result: ScenarioResult
        Artifacts are one CSV per table, `report.json` (the flat report with the scenario description
        and the verdict) and, when plotting is on, one SVG per plot.
        Errors of the numerical modules propagate; see `exit_code` for their statuses.
    """
    logger.info('Running the %s scenario %s', scenario.kind, scenario.name)
    result = RUNNERS[scenario.kind](scenario, use_tqdm)
    result.report = scenario.describe() | result.report | {
        'verdict': 'none' if result.verdict is None else ('pass' if result.verdict else 'fail'),
        'exit_status': result.status,
    }

    out_dir = scenario.out_dir if out_dir is None else out_dir
    if out_dir == '':
        return result
    target = Path(out_dir) / scenario.name
    for name, table in result.tables.items():
        result.artifacts.append(write_csv(table, target / f"{name}.csv"))
    result.artifacts.append(write_report(result.report, target / 'report.json'))
    if scenario.plot:
        for name, (table, x, ys) in result.plots.items():
            df = result.tables[table]
            result.artifacts.append(write_svg(df, x, ys, target / f"{name}.svg", title=f"{scenario.name}: {name}"))
    logger.info('Wrote %d artifacts into %s', len(result.artifacts), target)
    return result


def bounds_table(result: ScenarioResult) -> str:
    """Plain-text speed bounds table of a `bounds` result"""
    table = result.tables['bounds'].copy()
    table['speed'] = table['speed'].map(lambda v: f"{v:.6f}")
    table['a'] = table['a'].map(lambda v: f"{v:.6f}")
    table['mu_star'] = table['mu_star'].map(lambda v: f"{v:.6f}")
    return table.to_string(index=False)
