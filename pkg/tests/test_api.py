import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from kpplab import api, io
from kpplab.dynamics import BlowUp, MarginViolated
from kpplab.experiments import PoorFit
from kpplab.forcing import NonPositiveMean, estimate_averages
from kpplab.fronts import AlphaLadderExhausted, NotSqueezed


BOUNDS = """
scenario:
  name: logistic-bounds
  kind: bounds
forcing:
  kind: constant
  r0: 1.0
"""


def test_run_bounds(tmp_path):
    result = api.run_scenario(io.parse_scenario(BOUNDS), tmp_path)
    assert result.verdict is None
    assert result.status == api.EXIT_OK
    assert set(result.tables) == {'bounds', 'averages', 'hypotheses'}
    assert np.allclose(result.tables['bounds']['speed'], 2.0734, atol=1e-4)
    assert result.tables['hypotheses']['passed'].all()

    names = sorted(path.name for path in result.artifacts)
    assert names == ['averages.csv', 'bounds.csv', 'hypotheses.csv', 'report.json']
    assert all(path.parent == tmp_path / 'logistic-bounds' for path in result.artifacts)

    report = json.loads((tmp_path / 'logistic-bounds' / 'report.json').read_text())
    assert report['verdict'] == 'none'
    assert report['exit_status'] == 0
    assert report['scenario_kind'] == 'bounds'
    assert np.isclose(report['c0_minus'], 2.0734, atol=1e-4)

    assert '2.0734' in api.bounds_table(result)


def test_reruns_are_byte_identical(tmp_path):
    scenario = io.parse_scenario(BOUNDS)
    api.run_scenario(scenario, tmp_path / 'first')
    api.run_scenario(scenario, tmp_path / 'second')
    for name in ['bounds.csv', 'averages.csv', 'hypotheses.csv', 'report.json']:
        first = (tmp_path / 'first' / 'logistic-bounds' / name).read_bytes()
        second = (tmp_path / 'second' / 'logistic-bounds' / name).read_bytes()
        assert first == second, f"Problematic file: {name}"


def test_empty_out_dir_writes_nothing(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    result = api.run_scenario(io.parse_scenario(BOUNDS), '')
    assert result.artifacts == []
    assert list(tmp_path.iterdir()) == []


def test_exit_code():
    assert api.exit_code(io.ScenarioValidationError('dt', 'must be positive')) == api.EXIT_INVALID_SCENARIO
    assert api.exit_code(MarginViolated(10., 'right', 50.)) == api.EXIT_MARGIN_VIOLATED
    assert api.exit_code(NotSqueezed(pd.DataFrame({'tau': [5.], 'gap': [1e-3]}), 1e-6)) == api.EXIT_NOT_SQUEEZED
    assert api.exit_code(PoorFit('left', 0.5)) == api.EXIT_POOR_FIT
    assert api.exit_code(BlowUp(1., 100., 10.)) == api.EXIT_NUMERICAL_ERROR
    assert api.exit_code(NonPositiveMean(-1.)) == api.EXIT_NUMERICAL_ERROR
    assert api.exit_code(AlphaLadderExhausted(30, -0.1)) == api.EXIT_NUMERICAL_ERROR
    with pytest.raises(KeyError):
        api.exit_code(KeyError('unexpected'))


def test_required_parameters():
    hairtrigger = io.parse_scenario(BOUNDS.replace('kind: bounds', 'kind: hairtrigger'))
    with pytest.raises(io.ScenarioValidationError) as excinfo:
        api.run_scenario(hairtrigger, '')
    assert str(excinfo.value).startswith('gamma is required')

    front = io.parse_scenario(BOUNDS.replace('kind: bounds', 'kind: front') + "run:\n  gamma: 2.5\n  mu: 0.5\n")
    with pytest.raises(io.ScenarioValidationError):
        api.run_scenario(front, '')


def test_run_averages():
    periodic = BOUNDS.replace('kind: bounds', 'kind: averages').replace(
        'kind: constant\n  r0: 1.0', 'kind: periodic\n  r0: 1.0\n  amplitude: 0.5\n  period: 1.0')
    result = api.run_scenario(io.parse_scenario(periodic), '')
    assert result.verdict is None
    assert np.isclose(result.report['fbar_inf'], 1., atol=2e-3)
    assert result.tables['block_averages']['T'].tolist() == [10., 25., 50., 100.]


def test_run_speed(tmp_path):
    speed = BOUNDS.replace('kind: bounds', 'kind: speed')
    result = api.run_scenario(io.parse_scenario(speed), tmp_path)
    assert result.verdict
    assert result.report['verdict'] == 'pass'
    assert (tmp_path / 'logistic-bounds' / 'interfaces.svg').exists()
    assert (tmp_path / 'logistic-bounds' / 'interfaces.csv').exists()

    no_plot = io.parse_scenario(speed + "output:\n  plot: false\n")
    result = api.run_scenario(no_plot, tmp_path / 'no-plot')
    assert not any(path.suffix == '.svg' for path in result.artifacts)


@pytest.mark.slow
def test_run_verify():
    verify = BOUNDS.replace('kind: bounds', 'kind: verify') + "run:\n  n_trials: 5\n"
    result = api.run_scenario(io.parse_scenario(verify), '')
    assert result.verdict
    assert result.tables['suites']['suite'].tolist()[-1] == 'residuals'
    assert result.report['all_passed']


SCENARIOS = Path(__file__).parent.parent / 'scenarios'
QUICK_SCENARIOS = {'switching_bounds.yaml'}


def scenario_params():
    for path in sorted(SCENARIOS.glob('*.yaml')):
        marks = () if path.name in QUICK_SCENARIOS else (pytest.mark.slow,)
        yield pytest.param(path, id=path.stem, marks=marks)


@pytest.mark.parametrize('path', scenario_params())
def test_shipped_scenarios_rerun_identically(path, tmp_path):
    scenario = io.read_scenario(path)
    first = api.run_scenario(scenario, tmp_path / 'first')
    api.run_scenario(scenario, tmp_path / 'second')
    names = sorted(p.name for p in first.artifacts if p.suffix in ('.csv', '.json'))
    assert 'report.json' in names
    for name in names:
        first_bytes = (tmp_path / 'first' / scenario.name / name).read_bytes()
        second_bytes = (tmp_path / 'second' / scenario.name / name).read_bytes()
        assert first_bytes == second_bytes, f"Problematic file: {name}"


@pytest.mark.slow
def test_periodic_speed_scenario():
    scenario = io.read_scenario(SCENARIOS / 'periodic_speed.yaml')
    assert estimate_averages(scenario.forcing).all_converged
    result = api.run_scenario(scenario, '')
    assert result.verdict
    report = result.report
    for flank in ('left', 'right'):
        assert report['c0_minus'] * 0.97 <= report[f"{flank}_slope"] <= report['c0_plus'] * 1.03


@pytest.mark.slow
@pytest.mark.parametrize('seed', [1, 2, 3, 4, 5])
def test_switching_speed_scenarios(seed):
    scenario = io.read_scenario(SCENARIOS / f"switching_speed_seed{seed}.yaml")
    result = api.run_scenario(scenario, '')
    assert result.status == api.EXIT_OK
    assert result.verdict
    report = result.report
    assert report['c0_minus_tilde'] <= report['c0_minus'] <= report['c0_plus'] <= report['c0_plus_tilde']
    for flank in ('left', 'right'):
        assert report['c0_minus'] * 0.97 <= report[f"{flank}_slope"] <= report['c0_plus'] * 1.03


@pytest.mark.slow
def test_front_verdict_follows_checks(monkeypatch):
    scenario = io.read_scenario(SCENARIOS / 'periodic_front.yaml')
    result = api.run_scenario(scenario, '')
    assert result.verdict
    assert result.report['check_periodicity_passed']
    assert result.report['passed']

    squeeze = api.squeeze_front

    def degraded(*args, **kwargs):
        front = squeeze(*args, **kwargs)
        return replace(front, mu_hat=3 * front.mu, values=front.values * 0.5)

    monkeypatch.setattr(api, 'squeeze_front', degraded)
    result = api.run_scenario(scenario, '')
    assert result.verdict is False
    assert result.status == api.EXIT_VERDICT_FAILED
    assert result.report['verdict'] == 'fail'
    assert not result.report['check_tail_passed']
    assert not result.report['check_left_limit_passed']
