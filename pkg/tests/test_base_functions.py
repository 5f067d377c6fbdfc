import numpy as np

from kpplab import base_functions as bfunc


def test_linear_fit():
    fit = bfunc.linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
    assert np.isclose(fit.slope, 2)
    assert np.isclose(fit.intercept, 1)
    assert np.isclose(fit.r_squared, 1)

    fit = bfunc.linear_fit([0, 1, 2], [4, 4, 4])
    assert fit == bfunc.LinearFit(0., 4., 1.)
    assert fit.as_dict('right_') == {'right_slope': 0., 'right_intercept': 4., 'right_r2': 1.}


def test_theil_sen_slope():
    x = np.arange(10.)
    y = 0.5 * x
    y[3] = 100
    assert np.isclose(bfunc.theil_sen_slope(x, y), 0.5)
    assert bfunc.theil_sen_slope([1.], [2.]) == 0.


def test_level_crossing():
    assert bfunc.level_crossing([0, 1, 2], [1., .5, 0.], .25) == 1.5
    assert bfunc.level_crossing([0, 1, 2], [1., .5, 0.], .5) == 1.
    assert bfunc.level_crossing([0, 1, 2], [1., .5, 0.], 2.) is None
    assert bfunc.level_crossing([0, 1, 2], [1., .5, .3], .1) is None


def test_flank_crossings():
    positions = np.arange(-3, 4)
    values = np.array([0, 0, .5, 1, .5, 0, 0])
    assert bfunc.flank_crossings(positions, values, .25) == (-1.5, 1.5)
    assert bfunc.flank_crossings(positions, values, 1.) == (0., 0.)
    assert bfunc.flank_crossings(positions, values, 2.) is None

    values = np.array([1, 1, 1, 1, .5, 0, 0])
    assert bfunc.flank_crossings(positions, values, .25) == (-3., 1.5)


def test_nonzero_signs():
    idxs, signs = bfunc.nonzero_signs([1e-3, 0, -2, 1e-14, 5], atol=1e-12)
    assert idxs.tolist() == [0, 2, 4]
    assert signs.tolist() == [1, -1, 1]


def test_trailing_window_speeds():
    times = np.arange(0, 11.)
    positions = 2 * times + np.where(times > 5, 1, 0)
    speeds = bfunc.trailing_window_speeds(times, positions, 5)
    assert len(speeds) == 6
    assert np.allclose(speeds, [2, 2.2, 2.2, 2.2, 2.2, 2.2])
    assert len(bfunc.trailing_window_speeds(times, positions, 20)) == 0
