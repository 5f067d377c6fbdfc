"""Dispersion relation of the lattice KPP equation and the resulting spreading-speed intervals

chi1(mu, a) = (e^-mu + e^mu - 2 + a) / mu is the speed of the exponential e^{-mu x} under the
linearized equation with growth rate a, chi2(mu) = d(mu chi1)/dmu. The minimal speed inf_mu chi1
is reached at mu_star where chi1 = chi2.
"""
import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy import optimize

from .forcing import AffineSignal, AverageReport
from .reaction import Reaction

logger = logging.getLogger(__name__)

SOLVER_TOL = 1e-12
MU_BRACKET = (1e-6, 50.)
BOUND_SOURCES = {
    'c0_minus_tilde': 'fbar_inf', 'c0_minus': 'fbar_inf_plus',
    'c0_plus': 'fbar_sup_plus', 'c0_plus_tilde': 'fbar_sup',
}


class DomainError(ValueError):
    pass


class BracketError(ValueError):
    pass


@dataclass
class NoRoot(ValueError):
    gamma: float
    c_min: float

    def __str__(self) -> str:
        return f"Speed {self.gamma:.12g} is below the minimal speed {self.c_min:.12g}: chi1(mu) = gamma has no root"


@dataclass
class AssumptionViolated(ValueError):
    fbar_inf: float

    def __str__(self) -> str:
        return f"The lower long-run average of the growth rate should be positive, got fbar_inf = {self.fbar_inf:.6g}"


def _check_mu(mu: npt.ArrayLike):
    if np.any(np.asarray(mu) <= 0):
        raise DomainError(f"Decay rate mu should be positive, got {mu}")


def chi1(mu: npt.ArrayLike, a: npt.ArrayLike) -> Union[float, np.ndarray]:
    """Linearized front speed (e^-mu + e^mu - 2 + a) / mu of the decay rate `mu` under growth rate `a`

    e^-mu + e^mu - 2 is evaluated as 4 sinh(mu/2)^2 to keep precision for small mu.

    Examples
    --------
    chi1(1, 1) --> e + 1/e - 1 ~= 3.086161
    """
    _check_mu(mu)
    mu = np.asarray(mu, dtype=float)
    vals = (4 * np.sinh(mu / 2) ** 2 + a) / mu
    return float(vals) if np.ndim(vals) == 0 else vals


def chi2(mu: npt.ArrayLike) -> Union[float, np.ndarray]:
    """Derivative e^mu - e^-mu of mu * chi1(mu) with respect to mu"""
    _check_mu(mu)
    vals = 2 * np.sinh(np.asarray(mu, dtype=float))
    return float(vals) if np.ndim(vals) == 0 else vals


def _tangency(mu: float, a: float) -> float:
    """mu * (chi2 - chi1): increasing in mu, negative at 0+, zero at mu_star"""
    return 2 * mu * np.sinh(mu) - 4 * np.sinh(mu / 2) ** 2 - a


def _polish(mu: float, a: float) -> float:
    """Newton polish of the tangency condition chi1 = chi2 started from `mu`"""
    return float(optimize.newton(_tangency, mu, fprime=lambda m, a_: 2 * m * np.cosh(m), args=(a,), tol=1e-15, maxiter=50))


def mu_star(a: float) -> float:
    """Unique decay rate minimizing chi1(., a): the root of chi2 - chi1, by bisection then Newton polish

    Examples
    --------
    mu_star(1) --> 0.9071...
    """
    if a <= 0:
        raise BracketError(f"Growth rate a should be positive for chi1 to diverge at both ends, got {a}")

    lo, hi = MU_BRACKET
    while _tangency(hi, a) < 0:
        hi *= 2
    mu = optimize.bisect(_tangency, lo, hi, args=(a,), xtol=1e-6)
    mu = _polish(mu, a)
    residual = abs(chi2(mu) - chi1(mu, a))
    if residual > SOLVER_TOL * max(1., chi1(mu, a)):
        logger.warning('mu_star(%g) residual %.3g exceeds the solver tolerance', a, residual)
    return mu


def minimal_speed(a: float) -> tuple[float, float]:
    """Minimum of chi1(., a) by golden-section search, polished on chi1 = chi2. Return (mu_star, c_min)"""
    if a <= 0:
        raise BracketError(f"Growth rate a should be positive for chi1 to have a minimum, got {a}")
    lo, hi = MU_BRACKET
    mid = mu_star(a)
    res = optimize.minimize_scalar(lambda m: chi1(m, a), bracket=(lo, mid, hi), method='golden', tol=1e-10)
    mu = _polish(float(res.x), a)
    logger.debug('Golden-section minimum of chi1(., %g) at %.12g, polished to %.15g', a, res.x, mu)
    return mu, chi1(mu, a)


def c_min(a: float) -> float:
    """Minimal speed inf_mu chi1(mu, a)"""
    return minimal_speed(a)[1]


def root_pair(gamma: float, a: float) -> tuple[float, float]:
    """The two decay rates mu_low < mu_star < mu_high with chi1(mu, a) = gamma

    A speed equal to the minimal one (within SOLVER_TOL) returns the double root (mu_star, mu_star).
    """
    ms = mu_star(a)
    speed_min = chi1(ms, a)
    if gamma < speed_min - SOLVER_TOL:
        raise NoRoot(gamma, speed_min)
    if abs(gamma - speed_min) <= SOLVER_TOL:
        logger.info('Speed %.12g equals the minimal speed: returning the double root', gamma)
        return ms, ms

    def excess(m: float) -> float:
        return chi1(m, a) - gamma

    lo = ms / 2
    while excess(lo) <= 0:
        lo /= 2
    hi = 2 * ms
    while excess(hi) <= 0:
        hi *= 2
    mu_low = optimize.brentq(excess, lo, ms, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    mu_high = optimize.brentq(excess, ms, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(mu_low), float(mu_high)


def speed_for_decay(mu: float, a: float) -> float:
    """Speed of the front with decay rate `mu` (chi1)"""
    return chi1(mu, a)


def decay_for_speed(gamma: float, a: float) -> float:
    """Decay rate of the front moving at mean speed `gamma` (the smaller root of chi1 = gamma)"""
    return root_pair(gamma, a)[0]


def wave_speed_signal(reaction: Reaction, mu: float) -> AffineSignal:
    """Instantaneous wave speed c(t) = (e^-mu + e^mu - 2 + f(t, 0)) / mu with exact running integral"""
    _check_mu(mu)
    return AffineSignal(reaction.forcing, offset=4 * np.sinh(mu / 2) ** 2 / mu, scale=1 / mu)


################
# Speed bounds #
################
@dataclass(frozen=True)
class SpeedBounds:
    """Theoretical speed bounds, each equal to inf_mu chi1(mu, a) for one of the long-run averages a"""
    a_used: float
    mu_star: float
    c_min: float
    c0_minus: float
    c0_plus: float
    c0_minus_tilde: float
    c0_plus_tilde: float
    averages: dict[str, float] = field(default_factory=dict)
    decays: dict[str, float] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=lambda: dict(BOUND_SOURCES))
    reordered: bool = False  # raw bounds were raised to a nondecreasing sequence

    def as_row(self) -> dict[str, object]:
        return {'a_used': self.a_used, 'mu_star': self.mu_star, 'c_min': self.c_min,
                'c0_minus_tilde': self.c0_minus_tilde, 'c0_minus': self.c0_minus,
                'c0_plus': self.c0_plus, 'c0_plus_tilde': self.c0_plus_tilde, 'bounds_reordered': self.reordered}

    def to_frame(self) -> pd.DataFrame:
        """One row per bound: the average it uses, its value, the minimizing decay rate and the bound"""
        names = ['c0_minus_tilde', 'c0_minus', 'c0_plus', 'c0_plus_tilde']
        return pd.DataFrame({
            'bound': names,
            'average': [self.provenance[n] for n in names],
            'a': [self.averages[self.provenance[n]] for n in names],
            'mu_star': [self.decays[n] for n in names],
            'speed': [getattr(self, n) for n in names],
        })


def speed_bounds(avg: AverageReport) -> SpeedBounds:
    """Spreading-speed bounds c0_minus_tilde <= c0_minus <= c0_plus <= c0_plus_tilde from the averages

    Parameters
    ----------
    avg: AverageReport
        The output of `forcing.estimate_averages`

    Returns
    -------
    bounds: SpeedBounds
        c0_minus uses fbar_inf_plus, c0_plus uses fbar_sup_plus,
        the tilde versions use fbar_inf and fbar_sup.
    """
    averages = {name: float(getattr(avg, name)) for name in set(BOUND_SOURCES.values())}
    assert all(np.isfinite(v) for v in averages.values()), f"All averages should be finite: {averages}"
    if averages['fbar_inf'] <= 0:
        raise AssumptionViolated(averages['fbar_inf'])

    decays, speeds = {}, {}
    for bound, source in BOUND_SOURCES.items():
        decays[bound], speeds[bound] = minimal_speed(averages[source])

    ordered = np.maximum.accumulate([speeds[b] for b in BOUND_SOURCES])
    reordered = not np.array_equal(ordered, [speeds[b] for b in BOUND_SOURCES])
    if reordered:
        logger.warning('Speed bounds are out of order, raised to a nondecreasing sequence: %s', speeds)
    speeds = dict(zip(BOUND_SOURCES, ordered.tolist()))

    return SpeedBounds(
        a_used=averages['fbar_inf'], mu_star=decays['c0_minus_tilde'], c_min=speeds['c0_minus_tilde'],
        averages=averages, decays=decays, reordered=reordered, **speeds
    )
