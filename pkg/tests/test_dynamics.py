import numpy as np
import pytest

from kpplab import dynamics as dyn
from kpplab.forcing import Forcing
from kpplab.reaction import Reaction


LOGISTIC = Reaction.logistic(Forcing.constant(1.))


def test_lattice_states():
    state = dyn.lattice_state(-3, 5, 0.5)
    assert state.n_points == 9
    assert state.positions.tolist() == list(range(-3, 6))

    grid = dyn.lattice_state(-3, 3, lambda x: np.exp(-x ** 2), subcells=4)
    assert isinstance(grid, dyn.GridState)
    assert grid.shift == 4 and grid.n_points == 25
    assert np.isclose(grid.positions[1] - grid.positions[0], 0.25)

    reflected = dyn.lattice_state(-3, 5, lambda x: x + 10.).reflected()
    assert (reflected.lo, reflected.hi) == (-5, 3)
    assert reflected.values.tolist() == list(range(15, 6, -1))

    with pytest.raises(AssertionError):
        dyn.LatticeState(0, 2, np.zeros(3))
    with pytest.raises(AssertionError):
        dyn.LatticeState(0, 10, np.zeros(5))


def test_rhs():
    spike = dyn.lattice_state(-3, 3, lambda x: (x == 0) * 1.)
    derivative = dyn.rhs(spike, LOGISTIC)
    assert derivative.tolist() == [0., 0., 1., -2., 1., 0., 0.]

    grid_spike = dyn.lattice_state(-3, 3, lambda x: (x == 0) * 1., subcells=4)
    derivative = dyn.rhs(grid_spike, LOGISTIC)
    assert derivative[12] == -2.
    assert derivative[8] == derivative[16] == 1.
    assert np.count_nonzero(derivative) == 3

    fixed = dyn.lattice_state(0, 4, 0., boundary=dyn.Boundary.fixed(1., lambda t: 2 * t))
    fixed = fixed.with_values(fixed.values, 1.)
    derivative = dyn.rhs(fixed, LOGISTIC)
    assert derivative[0] == 1. and derivative[-1] == 2.


def test_step_size_limit():
    assert np.isclose(dyn.dt_max(LOGISTIC, 1.), 0.25 / 6)
    assert dyn.dt_max(LOGISTIC, 3.) < dyn.dt_max(LOGISTIC, 1.)

    state = dyn.lattice_state(-5, 5, 0.5)
    assert dyn.step_rk4(state, LOGISTIC).t == dyn.DEFAULT_DT
    with pytest.raises(dyn.StepSizeError) as excinfo:
        dyn.step_rk4(state, LOGISTIC, dt=0.05)
    assert 'exceeds the explicit stability limit' in str(excinfo.value)
    with pytest.raises(dyn.StepSizeError):
        dyn.integrate(state, LOGISTIC, 1., dt=0.05)


def test_integrate_homogeneous():
    saturated = dyn.integrate(dyn.lattice_state(-5, 5, 1.), LOGISTIC, 2.)
    assert (saturated.final.values == 1.).all()

    c = 0.1
    traj = dyn.integrate(dyn.lattice_state(-5, 5, c), LOGISTIC, 1., stride=10)
    exact = c * np.e / (1 - c + c * np.e)
    assert np.allclose(traj.final.values, exact, rtol=0, atol=1e-8)
    assert len(traj.times) == 11
    assert traj.report.steps == 100
    assert traj.report.clipped == 0
    assert traj.final.t == 1.

    df = traj.to_frame()
    assert list(df.columns) == ['t', 'x', 'u']
    assert len(df) == 11 * 11
    assert np.array_equal(traj.at(1.), traj.final.values)


def test_output_times():
    traj = dyn.integrate(dyn.lattice_state(-5, 5, 0.2), LOGISTIC, 1., output_times=[0.5, 0.505, 1.])
    assert traj.times.tolist() == [0.5, 0.505, 1.]
    assert traj.values.shape == (3, 11)

    with pytest.raises(AssertionError):
        dyn.integrate(dyn.lattice_state(-5, 5, 0.2), LOGISTIC, 1., output_times=[2.])


def test_margin_guard():
    guard = dyn.MarginGuard(margin=2, level=0.5)
    u = np.zeros(20)
    guard(0., u)

    u[0] = 1.
    with pytest.raises(dyn.MarginViolated) as excinfo:
        guard(1., u)
    assert excinfo.value.side == 'left'
    dyn.MarginGuard(margin=2, level=0.5, sides=('right',))(1., u)

    u = np.zeros(20)
    u[-2] = 1.
    with pytest.raises(dyn.MarginViolated) as excinfo:
        guard(1., u)
    assert excinfo.value.side == 'right'

    state = dyn.lattice_state(-20, 20, lambda x: (x <= 0) * 1.)
    with pytest.raises(dyn.MarginViolated):
        dyn.integrate(state, LOGISTIC, 15., monitor=dyn.MarginGuard(margin=5, level=0.5, sides=('right',)))


def test_reflection_symmetry():
    state = dyn.lattice_state(-10, 10, lambda x: np.where(x < 3, 0.8, 0.) + 0.05 * (x > -4))
    forward = dyn.integrate(state, LOGISTIC, 2.).final.values
    mirrored = dyn.integrate(state.reflected(), LOGISTIC, 2.).final.values
    assert np.allclose(forward, mirrored[::-1], rtol=0, atol=1e-14)


def test_pullback_uplus():
    uplus = dyn.pullback_uplus(LOGISTIC, np.linspace(0, 5, 11))
    assert uplus.converged
    assert uplus.monotone_in_depth
    assert uplus.inf == uplus.sup == 1.
    assert np.isclose(uplus(2.3), 1.)

    periodic = Reaction.logistic(Forcing.periodic(1, 0.5, 1))
    uplus = dyn.pullback_uplus(periodic, np.linspace(0, 5, 51))
    assert uplus.converged
    assert 0 < uplus.inf <= uplus.sup <= periodic.M0
    assert np.isclose(uplus(0.3), uplus(1.3), rtol=0, atol=1e-8)
    assert uplus.ode_residual() < 1e-6
    assert np.isclose(uplus.derivative(0.4), uplus(0.4) * (periodic.forcing(0.4) - uplus(0.4)))

    switching = Reaction.logistic(Forcing.switching((0.5, 1.5), dwell=1., seed=3))
    uplus = dyn.pullback_uplus(switching, np.linspace(0, 10, 101))
    assert uplus.converged
    assert 0 < uplus.inf <= uplus.sup <= 1.5
    assert uplus.ode_residual() < 1e-6

    with pytest.raises(AssertionError):
        dyn.pullback_uplus(LOGISTIC, [0., 1.], depth_ladder=(50., 25.))


def test_part_metric():
    assert np.isclose(dyn.part_metric([1, 4], [2, 1]), np.log(4))
    assert dyn.part_metric([1, 2], [1, 2]) == 0.
    with pytest.raises(dyn.UndefinedMetric):
        dyn.part_metric([1, 0], [1, 1])


def test_sign_change_profile():
    assert dyn.sign_change_profile([1, 1, -1, -1], [0, 0, 0, 0]) == dyn.SignChangeProfile(1, 1.)
    assert dyn.sign_change_profile([1, -1, 1], [0, 0, 0]) == dyn.SignChangeProfile(2, None)
    assert dyn.sign_change_profile([2, 1, 2], [1, 1, 1]) == dyn.SignChangeProfile(0, np.inf)
    assert dyn.sign_change_profile([0, 0], [1, 0]) == dyn.SignChangeProfile(0, -np.inf)
    assert dyn.sign_change_profile([0, 0], [0, 0]) == dyn.SignChangeProfile(0, np.inf)
    assert dyn.sign_change_profile([-1, 1], [0, 0]) == dyn.SignChangeProfile(1, None)
    assert dyn.sign_change_profile([1e-14, -1], [0, 0], atol=1e-12) == dyn.SignChangeProfile(0, -np.inf)
    # zeros between the two signs are skipped
    assert dyn.sign_change_profile([1, 0, 0, -1], [0, 0, 0, 0]) == dyn.SignChangeProfile(1, 2.)


def test_probe_continuity():
    limit = dyn.lattice_state(-10, 10, 0.5)
    sequence = [dyn.lattice_state(-10, 10, 0.5 + eps) for eps in (1e-1, 1e-2, 1e-3)]
    report = dyn.probe_continuity(LOGISTIC, sequence, limit, t=1., window=(-3, 3))
    assert report['n'].tolist() == [0, 1, 2]
    assert (report['deviation'] <= report['gronwall_bound']).all()
    assert report['deviation'].is_monotonic_decreasing
    assert np.allclose(report['input_distance'], [1e-1, 1e-2, 1e-3])
