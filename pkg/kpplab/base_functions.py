from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy import stats


################
# Math notions #
################
@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float

    def as_dict(self, prefix: str = '') -> dict[str, float]:
        return {f"{prefix}slope": self.slope, f"{prefix}intercept": self.intercept, f"{prefix}r2": self.r_squared}


def linear_fit(x: npt.ArrayLike, y: npt.ArrayLike) -> LinearFit:
    """Least-squares line through the points (x, y) together with its coefficient of determination"""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    assert len(x) == len(y) and len(x) >= 2, 'At least two points are required to fit a line'
    if np.ptp(y) == 0:
        return LinearFit(0., float(y[0]), 1.)
    res = stats.linregress(x, y)
    return LinearFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2))


def theil_sen_slope(x: npt.ArrayLike, y: npt.ArrayLike) -> float:
    """Median-of-slopes trend estimate, robust to a few outlying points"""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2:
        return 0.
    return float(stats.theilslopes(y, x)[0])


def level_crossing(positions: npt.ArrayLike, values: npt.ArrayLike, level: float) -> Optional[float]:
    """Position where a nonincreasing profile passes below `level`, by linear interpolation

    The crossing is taken between the last index with ``values >= level`` and its right neighbour.
    Return None when the level is not attained inside the window.

    Examples
    --------
    level_crossing([0, 1, 2], [1., .5, 0.], .25) --> 1.5
    """
    positions, values = np.asarray(positions, dtype=float), np.asarray(values, dtype=float)
    above = np.flatnonzero(values >= level)
    if len(above) == 0 or above[-1] == len(values) - 1:
        return None

    j = above[-1]
    u_left, u_right = values[j], values[j + 1]
    if u_left == u_right:
        return float(positions[j])
    theta = (u_left - level) / (u_left - u_right)
    return float(positions[j] + theta * (positions[j + 1] - positions[j]))


def flank_crossings(positions: npt.ArrayLike, values: npt.ArrayLike, level: float) -> Optional[tuple[float, float]]:
    """Leftmost and rightmost interpolated crossings of `level` of a bump-shaped profile

    Return None if no value reaches the level.
    """
    positions, values = np.asarray(positions, dtype=float), np.asarray(values, dtype=float)
    above = np.flatnonzero(values >= level)
    if len(above) == 0:
        return None

    right = level_crossing(positions[above[0]:], values[above[0]:], level)
    left = level_crossing(-positions[:above[-1] + 1][::-1], values[:above[-1] + 1][::-1], level)
    right = float(positions[-1]) if right is None else right
    left = float(positions[0]) if left is None else -left
    return left, right


def nonzero_signs(differences: npt.ArrayLike, atol: float = 0.) -> tuple[np.ndarray, np.ndarray]:
    """Indices and signs (+1/-1) of the entries of `differences` exceeding `atol` in absolute value"""
    differences = np.asarray(differences, dtype=float)
    idxs = np.flatnonzero(np.abs(differences) > atol)
    return idxs, np.sign(differences[idxs]).astype(int)


def trailing_window_speeds(times: Sequence[float], positions: Sequence[float], window: float) -> np.ndarray:
    """Mean speeds (J(t) - J(t - window)) / window over all output times t admitting a full window

    Output times are assumed equally spaced.
    """
    times, positions = np.asarray(times, dtype=float), np.asarray(positions, dtype=float)
    if len(times) < 2:
        return np.array([])
    lag = int(round(window / (times[1] - times[0])))
    if lag <= 0 or lag >= len(times):
        return np.array([])
    return (positions[lag:] - positions[:-lag]) / (times[lag:] - times[:-lag])
