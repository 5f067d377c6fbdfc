from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from kpplab import fronts
from kpplab.dispersion import DomainError, chi1
from kpplab.forcing import Forcing
from kpplab.reaction import Reaction


LOGISTIC = Reaction.logistic(Forcing.constant(1.))
PERIODIC = Reaction.logistic(Forcing.periodic(1, 0.5, 1))


def test_supersolution():
    sup = fronts.build_supersolution(LOGISTIC, 0.5)
    assert np.isclose(sup.kink(0.3), 0.)
    assert np.isclose(sup.profile(-10 / 0.5, 0.), 1.)
    assert np.isclose(sup.profile(4., 0.), np.exp(-2))
    assert np.isclose(sup.frame_offset(2.), 2 * chi1(0.5, 1.))
    assert np.isclose(sup.value(2 * chi1(0.5, 1.) + 4., 2.), np.exp(-2))

    report = fronts.verify_supersolution(sup)
    assert report.passed
    assert report.min_residual >= -1e-6
    assert report.n_excluded > 0
    assert report.as_row()['kind'] == 'super'

    assert fronts.verify_supersolution(fronts.build_supersolution(PERIODIC, 0.5)).passed

    with pytest.raises(DomainError):
        fronts.build_supersolution(LOGISTIC, 1.)
    with pytest.raises(AssertionError):
        fronts.verify_supersolution(sup, subcells=8)


def test_subsolution():
    sub = fronts.build_subsolution(LOGISTIC, 0.5, 0.75)
    B = -(np.exp(-0.75) + np.exp(0.75) - 2) + 0.75 * chi1(0.5, 1.) - 1
    assert np.isclose(sub.correction(0.), B)
    assert np.isclose(sub.corrector(0.), sub.corrector(5.))
    assert sub.alpha >= 1
    assert sub.zero(0.) > 0
    assert np.isclose(sub.psi(sub.zero(0.), 0.), 0., atol=1e-12)

    x1, x2 = sub.crossings(0.)
    assert x2 - x1 > 1
    assert np.isclose(sub.psi(x1, 0.), sub.uplus_K(0.))
    assert sub.profile(x1 - 5, 0.) == sub.uplus_K(0.)

    sup = fronts.build_supersolution(LOGISTIC, 0.5)
    y = np.linspace(-30, 60, 721)
    assert (sub.value(y, 0.5) <= sup.value(y, 0.5)).all()

    report = fronts.verify_subsolution(sub)
    assert report.passed
    assert report.max_residual <= 1e-6
    assert report.as_row()['kind'] == 'sub'

    assert fronts.verify_subsolution(fronts.build_subsolution(PERIODIC, 0.5)).passed

    assert 0.5 < fronts.best_mu_tilde(0.5, 1.) < 1.

    with pytest.raises(fronts.KTooSmall) as excinfo:
        fronts.build_subsolution(LOGISTIC, 0.5, 0.75, K=1.)
    assert 'too small' in str(excinfo.value)
    with pytest.raises(AssertionError):
        fronts.build_subsolution(LOGISTIC, 0.5, 1.2)


def test_interface_trajectory():
    slices = SimpleNamespace(times=[0.], positions=np.arange(5.), values=[np.array([1., 1., .5, 0., 0.])])
    df = fronts.interface_trajectory(slices, lambda t: 1.)
    assert list(df.columns) == ['t', 'J', 'width']
    assert df['J'].tolist() == [2.]
    assert np.isclose(df['width'].iloc[0], 1.8)

    with pytest.raises(fronts.NoCrossing):
        fronts.interface_trajectory(SimpleNamespace(times=[0.], positions=np.arange(5.), values=[np.zeros(5)]),
                                    lambda t: 1.)
    with pytest.raises(ValueError):
        fronts.interface_trajectory(SimpleNamespace(times=[0.], positions=np.arange(3.), values=[np.array([0., 1., 0.])]),
                                    lambda t: 1.)
    with pytest.raises(AssertionError):
        fronts.interface_trajectory(slices, lambda t: 1., level_fraction=1.)


def test_squeeze_front_errors():
    with pytest.raises(DomainError):
        fronts.squeeze_front(LOGISTIC, gamma=2.)
    with pytest.raises(AssertionError):
        fronts.squeeze_front(LOGISTIC, gamma=2.5, mu=0.5)

    with pytest.raises(fronts.NotSqueezed) as excinfo:
        fronts.squeeze_front(LOGISTIC, gamma=2.5, tau_ladder=(1.,))
    assert 'Gap history' in str(excinfo.value)
    assert excinfo.value.gaps['tau'].tolist() == [1.]


@pytest.mark.slow
def test_squeeze_front():
    front = fronts.squeeze_front(LOGISTIC, gamma=2.5, output_times=(0., 1.))
    assert front.final_gap < 1e-6
    assert (front.gaps['order_violation'] <= 1e-9).all()
    assert (front.gaps['monotone_violation'] <= 1e-9).all()
    assert front.gaps['gap'].is_monotonic_decreasing
    assert np.isclose(front.gamma, 2.5)
    assert np.isclose(front.mu_hat, front.mu, rtol=0.02)

    assert front.times.tolist() == [0., 1.]
    assert list(front.to_frame().columns) == ['t', 'x', 'phi']
    assert list(front.interfaces.columns) == ['t', 'J', 'J_frame', 'width']
    J = front.interfaces['J'].to_numpy()
    assert np.isclose(J[1] - J[0], 2.5, atol=1e-3)
    assert np.isclose(front.interfaces['J_frame'].iloc[0], front.interfaces['J_frame'].iloc[1], atol=1e-3)

    summary = front.summary()
    assert summary['tau_used'] == front.tau_used
    assert 'gap_tau_5' in summary and 'J_t_0' in summary
    checks = front.checks()
    assert checks['invariance'][0] < fronts.INVARIANCE_TOL
    assert np.isnan(checks['periodicity'][0]) and checks['periodicity'][1] is None
    assert checks['left_limit'][0] >= 0.99
    assert np.interp(-60., front.positions, front.slice(1.)) >= 0.99 * front.uplus_values[1]
    assert front.passed and summary['passed']
    assert summary['check_tail_passed'] and summary['check_width_passed'] is None

    # constant forcing: the pulsating frame coincides with the moving frame
    pulsating = fronts.pulsating_profile(front, LOGISTIC)
    assert np.array_equal(pulsating.positions, front.positions)
    assert np.allclose(pulsating.values, front.values)


@pytest.mark.slow
def test_squeeze_periodic_front():
    times = (0., 0.25, 0.5, 0.75, 1.)
    front = fronts.squeeze_front(PERIODIC, gamma=2.5, output_times=times)
    assert front.forcing_kind == 'periodic' and front.forcing_period == 1.
    assert front.final_gap < 1e-6
    assert np.abs(front.slice(1.) - front.slice(0.)).max() < fronts.PERIODICITY_TOL

    checks = front.checks()
    assert checks['periodicity'][1]
    assert checks['invariance'][1] is None
    assert checks['left_limit'][0] >= 0.99
    assert checks['monotone'][1] and checks['range'][1]
    assert front.passed


def synthetic_front(kind='constant', times=(0., 1.), period=None):
    positions = np.linspace(-100., 60., 1601)
    slc = 1 / (1 + np.exp(0.5 * positions))
    values = np.tile(slc, (len(times), 1))
    interfaces = pd.DataFrame({'t': list(times), 'J': 0., 'J_frame': 0., 'width': 11.8})
    gaps = pd.DataFrame({'tau': [5., 10.], 'gap': [1e-4, 1e-7], 'order_violation': 0., 'monotone_violation': 0.})
    return fronts.FrontProfile(
        mu=0.5, mu_tilde=0.75, gamma=2.5, subcells=16, times=np.array(times), positions=positions, values=values,
        uplus_values=np.ones(len(times)), frame_offsets=2.5 * np.array(times), interfaces=interfaces, gaps=gaps,
        mu_hat=0.5, alpha=1., K=2., resampling='spline', forcing_kind=kind, forcing_period=period,
    )


def test_front_checks():
    front = synthetic_front()
    assert front.passed
    summary = front.summary()
    assert summary['passed'] and summary['check_invariance'] == 0.
    assert summary['order_violation'] == 0.

    degraded = replace(front, mu_hat=3 * front.mu, values=front.values * 0.5)
    checks = degraded.checks()
    assert not checks['tail'][1]
    assert np.isclose(checks['tail'][0], 2.)
    assert not checks['left_limit'][1]
    assert checks['monotone'][1] and checks['range'][1]
    assert not degraded.passed
    assert not degraded.summary()['passed']

    shifted = replace(front, values=front.values + np.array([[0.], [1e-5]]))
    assert not shifted.checks()['invariance'][1]
    assert shifted.checks()['range'][1] is False

    unordered = replace(front, gaps=front.gaps.assign(order_violation=[0., 1e-3]))
    assert unordered.summary()['order_violation'] == 1e-3
    assert not unordered.passed

    periodic = synthetic_front('periodic', (0., 0.5, 1.), 1.)
    assert periodic.checks()['periodicity'] == (0., True)
    drifting = replace(periodic, values=periodic.values * np.array([[1.], [1.], [0.999]]))
    value, ok = drifting.checks()['periodicity']
    assert not ok and np.isclose(value, 1e-3, rtol=1e-3)


def test_width_trend():
    assert fronts.width_trend([0., 10., 20.], [2., 2., 2.]) == {'width_slope': 0., 'width_bounded': True}
    growing = fronts.width_trend(np.arange(50.), 2 + 0.01 * np.arange(50.), prefix='right_')
    assert np.isclose(growing['right_width_slope'], 0.01)
    assert growing['right_width_bounded'] is False
    assert fronts.width_trend([0., 1.], [2., 3.])['width_bounded'] is None
    assert fronts.width_trend([0., 5., 20.], [2., 2., np.nan])['width_bounded'] is None


def test_error_messages():
    message = str(fronts.AlphaLadderExhausted(30, -0.25))
    assert '2^30' in message and '-0.25' in message
    assert isinstance(fronts.AlphaLadderExhausted(30, -0.25), ArithmeticError)
