import numpy as np
import pytest

from kpplab import experiments as exps
from kpplab.dispersion import c_min
from kpplab.forcing import Forcing, block_average_inf
from kpplab.reaction import Reaction


LOGISTIC = Reaction.logistic(Forcing.constant(1.))


def test_datum():
    assert exps.Datum(width=3, anchor=5).support() == (4, 6)
    assert exps.Datum(width=4).support() == (-2, 1)

    values = exps.Datum(width=3).values(np.arange(-3, 4), 0.7)
    assert values.tolist() == [0., 0., 0.7, 0.7, 0.7, 0., 0.]
    assert exps.Datum(height=2.).values(np.arange(-1, 2), 0.7).tolist() == [0., 2., 0.]
    assert np.isnan(exps.Datum().describe()['datum_height'])


def test_poor_fit_message():
    assert 'right flank' in str(exps.PoorFit('right', 0.9))


def test_measure_spreading_speed():
    meas = exps.measure_spreading_speed(LOGISTIC)
    left, right = meas.speeds
    assert np.isclose(right, 2.0734, rtol=0.03)
    assert np.isclose(left, 2.0734, rtol=0.03)
    assert meas.passed
    assert meas.right_fit.r_squared >= exps.MIN_R2

    assert list(meas.interfaces.columns) == ['t', 'left', 'right', 'level', 'left_width', 'right_width']
    assert set(meas.window_speeds['window']) == {150 / 8, 150 / 4, 150 / 2}
    row = meas.as_row()
    assert row['passed'] and row['right_slope'] == right
    assert 'right_min_speed_W75' in row
    assert row['right_width_bounded'] and row['left_width_bounded']
    assert abs(row['right_width_slope']) <= 1e-3


def test_homogenized_speed_check():
    switching = Forcing.switching((0.2, 1., 1.8), dwell=1., seed=7)
    meas = exps.homogenized_speed_check(switching, T=10., duration=100., window=400)
    assert meas.passed
    assert np.isclose(meas.right_fit.slope, c_min(block_average_inf(switching, 10.)), rtol=0.03)


def test_hairtrigger_inside():
    report = exps.hairtrigger_inside(LOGISTIC, 1., duration=100., window=300)
    assert report.expected_inside
    assert report.passed
    assert report.as_row()['max_deviation'] < 1e-3

    report = exps.hairtrigger_inside(LOGISTIC, 3., duration=100., window=300)
    assert not report.expected_inside
    assert not report.passed


def test_stability_closed_form():
    report = exps.stability_experiment(LOGISTIC, start_times=(0.,), ensemble=[3.], duration=20., window=8)
    dist = report.distances.set_index('t')['distance']
    exact = lambda t: (2 / 3) * np.exp(-t) / (1 - (2 / 3) * np.exp(-t))
    assert np.isclose(dist.loc[5.], exact(5.), rtol=0, atol=1e-7)
    assert np.isclose(dist.loc[0.], 2.)
    assert report.passed
    assert np.isclose(report.decay_rate, 1., rtol=0.05)


def test_stability_ensemble():
    report = exps.stability_experiment(LOGISTIC, n_members=3, start_times=(0., 0.5), duration=20., window=16)
    assert list(report.distances.columns) == ['start_time', 'member', 't', 'distance']
    assert set(report.distances['member']) == {0, 1, 2}
    assert set(report.distances['start_time']) == {0., 0.5}
    assert report.passed
    assert report.as_row()['final_distance'] <= exps.STABILITY_TOL

    with pytest.raises(AssertionError):
        exps.stability_experiment(LOGISTIC, low=0.)


def test_reflection_defect():
    values = np.where(np.arange(-10, 11) < 3, 0.8, 0.)
    assert exps.reflection_defect(LOGISTIC, values, 10, 2.) <= 1e-14


def test_bracket_statuses():
    report = exps.tilde_cstar_bracket(LOGISTIC, gammas=[2., 2.6], datum=exps.Datum(width=5))
    assert report.runs['status'].tolist() == ['below_minimal_speed', 'rejected']
    assert not report.passed
    assert np.isnan(report.inf_certified)
    assert np.isclose(report.c_tilde, 2.0734, atol=1e-4)


@pytest.mark.slow
def test_bracket():
    report = exps.tilde_cstar_bracket(LOGISTIC)
    assert (report.runs['status'] == 'ok').all()
    assert report.runs['dominated_throughout'].all()
    assert report.runs['barrier_below_super'].all()
    assert report.passed
    assert report.inf_certified >= report.c_tilde
    assert report.as_row()['gap_to_minimal'] >= 0


@pytest.mark.slow
def test_critical_front_run():
    report = exps.critical_front_run(LOGISTIC)
    assert np.isclose(report.c_target, 2.0734, atol=1e-4)
    assert np.isclose(report.liminf_estimate, report.c_target, rtol=exps.CRITICAL_RTOL)
    assert report.monotone_violation <= exps.MONOTONE_TOL
    assert report.passed
    assert report.window_speeds['window'].tolist() == list(exps.CRITICAL_WINDOWS)
    assert report.as_row()['width_bounded']
    assert report.interfaces['width'].iloc[-1] > 0
