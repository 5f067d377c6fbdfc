import numpy as np
import pytest

from kpplab import reaction as rct
from kpplab.forcing import Forcing
from kpplab.reaction import Reaction


def test_reaction_shapes():
    logistic = Reaction.logistic(Forcing.constant(1.))
    assert logistic.M0 == 1.
    assert rct.eval_reaction(logistic, 0., 0.3) == 0.7
    assert rct.eval_reaction(logistic, 0., -0.5) == 1.
    assert np.isclose(rct.eval_reaction(Reaction.logistic(Forcing.periodic(1, 0.5, 1)), 0.25, 0.3), 1.2)

    assert Reaction.logistic(Forcing.constant(1.), slope=2.).M0 == 0.5
    assert Reaction.logistic(Forcing.periodic(1, 0.5, 1)).M0 == 1.5

    saturating = Reaction(Forcing.constant(1.), 'saturating', 1., 2.)
    assert np.isclose(saturating.g(1.), 1.5)
    assert np.isclose(saturating.g(saturating.M0), 1.)
    assert saturating.M0 < 1.

    polynomial = Reaction(Forcing.constant(2.), 'polynomial', 1., 3., coefficients=(1., 1.))
    assert np.isclose(polynomial.M0, 1.)
    assert polynomial.describe()['reaction_coefficients'] == '1.0;1.0'

    with pytest.raises(AssertionError):
        Reaction(Forcing.constant(1.), 'linear', 1., 2.)
    with pytest.raises(AssertionError):
        Reaction(Forcing.constant(1.), 'saturating', 2., 1.)
    with pytest.raises(AssertionError):
        Reaction(Forcing.constant(1.), 'polynomial')


def test_sup_abs_growth():
    reaction = Reaction.logistic(Forcing.periodic(1, 0.5, 1))
    assert rct.sup_abs_growth(reaction, 1.) == 1.5
    assert rct.sup_abs_growth(reaction, 3.) == 2.5


def test_homogenized_reaction():
    switching = Forcing.switching((0.2, 1., 1.8), dwell=1., seed=7)
    reaction = rct.homogenized_reaction(switching, 10., 2.)
    assert reaction.forcing.kind == 'constant'
    assert reaction.m0_tilde == reaction.M0_tilde == 2.
    assert reaction.forcing.r0 == rct.block_average_inf(switching, 10.)

    with pytest.raises(AssertionError):
        rct.homogenized_reaction(Forcing.constant(-1.), 10., 1.)


def test_check_hypotheses():
    report = rct.check_hypotheses(Reaction.logistic(Forcing.periodic(1, 0.5, 1)))
    assert report.all_passed
    assert report.margins['negative_above_saturation'] >= 0
    assert report.margins['upper_slope'] >= 0 and report.margins['lower_slope'] >= 0
    assert list(report.to_frame().columns) == ['hypothesis', 'passed', 'margin', 'note']
    assert set(report.passed) == {
        'time_regularity', 'negative_above_saturation', 'decreasing_in_u', 'positive_mean', 'upper_slope', 'lower_slope'
    }

    saturating = Reaction(Forcing.quasiperiodic(1., [(0.3, 1.), (0.2, np.sqrt(2))]), 'saturating', 0.5, 1.5)
    assert rct.check_hypotheses(saturating).all_passed

    report = rct.check_hypotheses(Reaction.logistic(Forcing.switching((0.5, 1.5), 1., 0)))
    assert not report.passed['time_regularity']
    assert report.notes['time_regularity']
    assert report.passed['positive_mean']

    report = rct.check_hypotheses(Reaction(Forcing.periodic(-0.2, 1., 1.), M0=1.))
    assert not report.passed['positive_mean']

    report = rct.check_hypotheses(Reaction.logistic(Forcing.constant(1.)), u_grid=[0., 0.5, 1., 2.])
    assert report.all_passed
    assert report.margins['negative_above_saturation'] == 0.

    with pytest.raises(AssertionError):
        rct.check_hypotheses(Reaction.logistic(Forcing.constant(1.)), u_grid=[0., 5.])
