import numpy as np
import pytest

from kpplab import dispersion as disp
from kpplab.forcing import AverageReport, Forcing, estimate_averages
from kpplab.reaction import Reaction


def test_chi1_chi2():
    assert np.isclose(disp.chi1(1, 1), np.e + 1 / np.e - 1)
    assert np.isclose(disp.chi2(1), np.e - 1 / np.e)
    assert disp.chi1(np.array([0.5, 1., 2.]), 1.).shape == (3,)
    # small decay rates keep precision
    assert np.isclose(disp.chi1(1e-8, 0.), 1e-8, rtol=1e-6)

    with pytest.raises(disp.DomainError):
        disp.chi1(0., 1.)
    with pytest.raises(disp.DomainError):
        disp.chi2(-1.)


def test_minimal_speed():
    mus = np.linspace(0.5, 1.5, 100_001)
    speeds = disp.chi1(mus, 1.)
    assert np.isclose(disp.mu_star(1.), mus[speeds.argmin()], atol=1e-4)
    assert np.isclose(disp.c_min(1.), speeds.min(), atol=1e-8)
    assert np.isclose(disp.mu_star(1.), 0.9071, atol=1e-4)
    assert np.isclose(disp.c_min(1.), 2.0734, atol=1e-4)

    mu, speed = disp.minimal_speed(1.)
    assert np.isclose(disp.chi1(mu, 1.), disp.chi2(mu))
    assert speed == disp.c_min(1.)

    assert disp.c_min(0.5) < disp.c_min(1.) < disp.c_min(2.)

    with pytest.raises(disp.BracketError):
        disp.mu_star(0.)
    with pytest.raises(disp.BracketError):
        disp.minimal_speed(-1.)


def test_root_pair():
    mu_low, mu_high = disp.root_pair(3., 1.)
    assert mu_low < disp.mu_star(1.) < mu_high
    assert np.isclose(disp.chi1(mu_low, 1.), 3.)
    assert np.isclose(disp.chi1(mu_high, 1.), 3.)

    mu_double = disp.root_pair(disp.c_min(1.), 1.)
    assert mu_double[0] == mu_double[1]

    with pytest.raises(disp.NoRoot) as excinfo:
        disp.root_pair(1., 1.)
    assert 'below the minimal speed' in str(excinfo.value)

    assert np.isclose(disp.decay_for_speed(disp.speed_for_decay(0.5, 1.), 1.), 0.5)


def test_wave_speed_signal():
    signal = disp.wave_speed_signal(Reaction.logistic(Forcing.constant(1.)), 0.7)
    assert np.isclose(signal(3.), disp.chi1(0.7, 1.))

    signal = disp.wave_speed_signal(Reaction.logistic(Forcing.periodic(1, 0.5, 1)), 0.7)
    assert np.isclose(signal.long_run_mean, disp.chi1(0.7, 1.))
    assert np.isclose(signal.integral(0., 2.), 2 * disp.chi1(0.7, 1.))

    with pytest.raises(disp.DomainError):
        disp.wave_speed_signal(Reaction.logistic(Forcing.constant(1.)), 0.)


def test_speed_bounds():
    bounds = disp.speed_bounds(estimate_averages(Forcing.constant(1.)))
    for name in ['c0_minus_tilde', 'c0_minus', 'c0_plus', 'c0_plus_tilde']:
        assert np.isclose(getattr(bounds, name), 2.0734, atol=1e-4)
    assert bounds.a_used == 1.
    assert bounds.provenance['c0_minus'] == 'fbar_inf_plus'

    df = bounds.to_frame()
    assert df['bound'].tolist() == ['c0_minus_tilde', 'c0_minus', 'c0_plus', 'c0_plus_tilde']
    assert df['average'].tolist() == ['fbar_inf', 'fbar_inf_plus', 'fbar_sup_plus', 'fbar_sup']

    switching = Forcing.switching((0.2, 1., 1.8), dwell=1., seed=7)
    bounds = disp.speed_bounds(estimate_averages(switching))
    assert bounds.c0_minus_tilde <= bounds.c0_minus <= bounds.c0_plus <= bounds.c0_plus_tilde

    with pytest.raises(disp.AssumptionViolated):
        disp.speed_bounds(estimate_averages(Forcing.constant(-0.5)))


def test_speed_bounds_reordering(caplog):
    noisy = AverageReport(horizon=100., windows=(10.,), fbar_T=(1.,), fbar_inf=1., fbar_sup=1.2,
                          fbar_inf_plus=0.9, fbar_sup_plus=1.1)
    with caplog.at_level('WARNING', logger='kpplab.dispersion'):
        bounds = disp.speed_bounds(noisy)
    assert bounds.reordered
    assert bounds.as_row()['bounds_reordered']
    assert bounds.c0_minus == bounds.c0_minus_tilde == disp.c_min(1.)
    assert np.isclose(bounds.c0_plus, disp.c_min(1.1))
    assert 'out of order' in caplog.text
