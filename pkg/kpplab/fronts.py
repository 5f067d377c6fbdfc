"""Transition fronts of the lattice KPP equation squeezed between explicit super- and sub-solutions

In the moving frame x = y - int_0^t c(tau) dtau, with c(t) = (e^-mu + e^mu - 2 + r(t)) / mu,
* the super-solution is min(e^{-mu x}, u+(t))
* the sub-solution is psi(x, t) = e^{-mu x} - e^{A(t) - mu_tilde x} to the right of its crossing X1(t)
  with the entire solution u+_K(t) of u' = u (r(t) - K u), and u+_K(t) to the left of it.
Solutions started from either barrier at t = -tau squeeze the front as tau grows.
"""
import logging
from dataclasses import dataclass, replace
from typing import Callable, Literal, Optional, Sequence, Union, get_args

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy import optimize
from scipy.interpolate import CubicSpline
from tqdm.auto import tqdm

from .base_functions import level_crossing, linear_fit, theil_sen_slope
from .dispersion import DomainError, chi1, mu_star, root_pair, wave_speed_signal
from .dynamics import (
    DEFAULT_DT, EntireSolution, MarginGuard, Trajectory, lattice_state, integrate, pullback_uplus, DEFAULT_DEPTH_LADDER
)
from .forcing import AffineSignal, AverageReport, Corrector, build_corrector, estimate_averages
from .reaction import Reaction, eval_reaction

logger = logging.getLogger(__name__)

FRAME_RESAMPLING = Literal['spline', 'round']

DEFAULT_SUBCELLS = 16
DEFAULT_TAU_LADDER = (5., 10., 20., 40., 80.)
SQUEEZE_TOL = 1e-6
ORDER_TOL = 1e-9
RESIDUAL_TIME_STEP = 1e-4
RESIDUAL_TOL = 1e-6
KINK_CELLS = 2  # residual checks skip 2/N around a kink
ALPHA_MARGIN = 0.5  # the alpha ladder stops when M0_tilde * max psi^2 e^{mu_tilde x - A} <= (1 - ALPHA_MARGIN) * Bbar
ALPHA_LADDER_SIZE = 30
K_LADDER_SIZE = 20
DEFAULT_MARGIN = 50.
DEFAULT_FRAME_WINDOW = (-100., 60.)
TAIL_RANGE = (20., 40.)
WIDTH_LEVELS = (0.05, 0.95)
TIME_SAMPLING = 0.05
INVARIANCE_TOL = 1e-6
PERIODICITY_TOL = 1e-5
TAIL_RTOL = 0.02
LEFT_LIMIT = (-60., 0.99)  # phi(-60, t) >= 0.99 u+(t)
WIDTH_SLOPE_TOL = 1e-3
WIDTH_TREND_SPAN = 10.  # shorter samples do not judge the width trend
RANGE_TOL = 1e-7


@dataclass
class KTooSmall(RuntimeError):
    K: float
    reason: str

    def __str__(self) -> str:
        return f"Plateau parameter K = {self.K:.6g} is too small: {self.reason}"


@dataclass
class AlphaLadderExhausted(ArithmeticError):
    ladder_size: int
    margin: float

    def __str__(self) -> str:
        return f"No corrector shift up to 2^{self.ladder_size} satisfies the sub-solution inequality " \
               f"(best margin {self.margin:.6g})"


@dataclass
class NotSqueezed(RuntimeError):
    gaps: pd.DataFrame
    tol: float

    def __str__(self) -> str:
        history = ', '.join(f"tau={row.tau:g}: {row.gap:.3g}" for row in self.gaps.itertuples())
        return f"Squeeze did not reach the tolerance {self.tol:g}. Gap history: {history}"


@dataclass
class NoCrossing(ValueError):
    t: float
    level: float

    def __str__(self) -> str:
        return f"Level {self.level:.6g} is not attained by the slice at t = {self.t:.6g}"


def _exp(z: npt.ArrayLike) -> np.ndarray:
    return np.exp(np.minimum(z, 700.))


def _time_samples(t_range: tuple[float, float]) -> np.ndarray:
    n = int(np.ceil((t_range[1] - t_range[0]) / TIME_SAMPLING)) + 1
    return np.linspace(t_range[0], t_range[1], max(n, 2))


def _fbar_inf(reaction: Reaction, averages: Optional[AverageReport]) -> float:
    return (estimate_averages(reaction.forcing) if averages is None else averages).fbar_inf


##################
# Super-solution #
##################
@dataclass(frozen=True)
class SuperSolution:
    """Super-solution v(y, t) = min(e^{-mu x}, u+(t)) with x = y - int_0^t c"""
    reaction: Reaction
    mu: float
    uplus: EntireSolution
    speed: AffineSignal

    def profile(self, x: npt.ArrayLike, t: float) -> np.ndarray:
        return np.minimum(_exp(-self.mu * np.asarray(x, dtype=float)), self.uplus(t))

    def frame_offset(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        return self.speed.running_integral(t)

    def value(self, y: npt.ArrayLike, t: float) -> np.ndarray:
        return self.profile(np.asarray(y, dtype=float) - self.frame_offset(t), t)

    def kink(self, t: float) -> float:
        """Frame position where the exponential meets the plateau"""
        return float(-np.log(self.uplus(t)) / self.mu)


def build_supersolution(
        reaction: Reaction,
        mu: float,
        t_range: tuple[float, float] = (-10., 10.),
        uplus: Optional[EntireSolution] = None,
        averages: Optional[AverageReport] = None,
        depth_ladder: Sequence[float] = DEFAULT_DEPTH_LADDER,
) -> SuperSolution:
    """Super-solution of decay rate `mu`, valid for 0 < mu < mu_star(fbar_inf)

    The entire solution u+ is pulled back over `t_range` unless given.
    """
    limit = mu_star(_fbar_inf(reaction, averages))
    if not 0 < mu < limit:
        raise DomainError(f"Decay rate should lie in (0, mu_star) = (0, {limit:.12g}), got {mu}")
    if uplus is None:
        uplus = pullback_uplus(reaction, _time_samples(t_range), depth_ladder)
    return SuperSolution(reaction, float(mu), uplus, wave_speed_signal(reaction, mu))


################
# Sub-solution #
################
@dataclass(frozen=True)
class SubSolution:
    """Sub-solution psi(x, t) = e^{-mu x} - e^{A(t) - mu_tilde x} glued to the plateau u+_K(t) left of X1(t)"""
    reaction: Reaction
    mu: float
    mu_tilde: float
    K: float
    corrector: Corrector
    correction: AffineSignal  # B(t)
    speed: AffineSignal
    uplus_K: EntireSolution

    @property
    def alpha(self) -> float:
        return self.corrector.alpha

    def frame_offset(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        return self.speed.running_integral(t)

    def psi(self, x: npt.ArrayLike, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(over='ignore', invalid='ignore'):
            return np.exp(-self.mu * x) - np.exp(self.corrector(t) - self.mu_tilde * x)

    def zero(self, t: float) -> float:
        """x0(t) = A(t) / (mu_tilde - mu): psi < 0 on the left of it, psi > 0 on the right"""
        return float(self.corrector(t) / (self.mu_tilde - self.mu))

    def peak(self, t: float) -> tuple[float, float]:
        """Position and value of the maximum of psi(., t)"""
        x_peak = float((self.corrector(t) + np.log(self.mu_tilde / self.mu)) / (self.mu_tilde - self.mu))
        return x_peak, float(np.exp(-self.mu * x_peak) * (1 - self.mu / self.mu_tilde))

    def crossings(self, t: float) -> tuple[float, float]:
        """X1(t) < X2(t) where psi(., t) crosses the plateau level u+_K(t), found by bracketing"""
        level = float(self.uplus_K(t))
        x_peak, psi_max = self.peak(t)
        if psi_max <= level:
            raise KTooSmall(self.K, f"plateau {level:.6g} is above the peak {psi_max:.6g} of psi at t = {t:.6g}")

        def excess(x: float) -> float:
            return float(self.psi(x, t)) - level

        right = x_peak + 1 / self.mu
        while excess(right) > 0:
            right += 10 / self.mu
        x1 = optimize.brentq(excess, self.zero(t), x_peak, xtol=1e-14)
        x2 = optimize.brentq(excess, x_peak, right, xtol=1e-14)
        return float(x1), float(x2)

    def profile(self, x: npt.ArrayLike, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        x1 = self.crossings(t)[0]
        return np.where(x >= x1, self.psi(x, t), self.uplus_K(t))

    def value(self, y: npt.ArrayLike, t: float) -> np.ndarray:
        return self.profile(np.asarray(y, dtype=float) - self.frame_offset(t), t)


def correction_signal(reaction: Reaction, mu: float, mu_tilde: float) -> AffineSignal:
    """B(t) = -(e^-mu_tilde + e^mu_tilde - 2) + c(t) mu_tilde - f(t, 0)"""
    return AffineSignal(reaction.forcing,
                        offset=-4 * np.sinh(mu_tilde / 2) ** 2 + mu_tilde * 4 * np.sinh(mu / 2) ** 2 / mu,
                        scale=mu_tilde / mu - 1)


def best_mu_tilde(mu: float, a: float) -> float:
    """mu_tilde in (mu, 2 mu) maximizing the lower average mu_tilde (chi1(mu, a) - chi1(mu_tilde, a)) of B"""
    gamma = chi1(mu, a)
    res = optimize.minimize_scalar(lambda m: -m * (gamma - chi1(m, a)), bounds=(mu * (1 + 1e-6), 2 * mu * (1 - 1e-6)),
                                   method='bounded', options={'xatol': 1e-10})
    return float(res.x)


def _alpha_margin(corrector: Corrector, ts: np.ndarray, mu: float, mu_tilde: float, M0_tilde: float) -> float:
    """Bbar minus the largest M0_tilde psi^2 e^{mu_tilde x - A} over x >= x0(t), t in ts (-inf when A <= 0)"""
    A = corrector(ts)
    if A.min() <= 0:
        return -np.inf
    x0 = A / (mu_tilde - mu)
    xx = x0[:, None] + np.linspace(0, 60 / mu, 600)[None, :]
    psi = np.exp(-mu * xx) - np.exp(A[:, None] - mu_tilde * xx)
    excess = M0_tilde * psi ** 2 * np.exp(mu_tilde * xx - A[:, None])
    return float(corrector.ess_inf - excess.max() / (1 - ALPHA_MARGIN))


def build_subsolution(
        reaction: Reaction,
        mu: float,
        mu_tilde: Optional[float] = None,
        K: Optional[float] = None,
        t_range: tuple[float, float] = (-10., 10.),
        averages: Optional[AverageReport] = None,
        depth_ladder: Sequence[float] = DEFAULT_DEPTH_LADDER,
) -> SubSolution:
    """Sub-solution of decay rate `mu` with the corrector shift alpha and the plateau K chosen on ladders

    Parameters
    ----------
    reaction: Reaction
    mu: float
        Decay rate of the front, in (0, mu_star)
    mu_tilde: float, optional
        Faster decay rate in (mu, 2 mu). By default the one maximizing the lower average of B(t)
    K: float, optional
        Plateau parameter. By default 4 M0_tilde sup r, doubled until the crossing geometry
        (u+_K below the peak of psi and X2 - X1 > 1) holds on t_range.
        An explicit K failing the geometry raises KTooSmall
    t_range: tuple[float, float]
        Time range where the alpha and K conditions are checked
    averages: AverageReport, optional
    depth_ladder: Sequence[float]
        Pull-back ladder for u+_K

    Returns
    -------
    sub: SubSolution
        alpha is the first of 1, 2, 4, ... with A > 0 and
        A' + B >= M0_tilde psi^2 e^{mu_tilde x - A} (with a safety factor) on the sample grid
    """
    a = _fbar_inf(reaction, averages)
    if mu_tilde is None:
        mu_tilde = best_mu_tilde(mu, a)
    assert mu < mu_tilde < 2 * mu, f"mu_tilde should lie in (mu, 2 mu) = ({mu}, {2 * mu}), got {mu_tilde}"

    B = correction_signal(reaction, mu, mu_tilde)
    ts = _time_samples(t_range)
    base = build_corrector(B, horizon=max(100., 2 * max(abs(t_range[0]), abs(t_range[1]))))
    for k in range(ALPHA_LADDER_SIZE):
        corrector = base.shifted(2. ** k - base.min_value if base.min_value < 0 else 2. ** k)
        margin = _alpha_margin(corrector, ts, mu, mu_tilde, reaction.M0_tilde)
        if margin >= 0:
            break
    else:
        raise AlphaLadderExhausted(ALPHA_LADDER_SIZE, margin)
    logger.info('Sub-solution corrector shift alpha = %g (mu = %g, mu_tilde = %g)', corrector.alpha, mu, mu_tilde)

    speed = wave_speed_signal(reaction, mu)
    explicit_K = K is not None
    K = 4 * reaction.M0_tilde * reaction.forcing.value_range()[1] if K is None else float(K)
    for _ in range(K_LADDER_SIZE):
        uplus_K = pullback_uplus(Reaction.logistic(reaction.forcing, slope=K), ts, depth_ladder)
        sub = SubSolution(reaction, float(mu), float(mu_tilde), K, corrector, B, speed, uplus_K)
        try:
            widths = [x2 - x1 for x1, x2 in map(sub.crossings, ts[::10])]
        except KTooSmall:
            widths = [0.]
        if min(widths) > 1:
            logger.info('Sub-solution plateau parameter K = %g', K)
            return sub
        if explicit_K:
            raise KTooSmall(K, f"X2 - X1 = {min(widths):.6g} should exceed 1")
        K *= 2
    raise KTooSmall(K, f"crossing geometry not reached within {K_LADDER_SIZE} doublings")


###################
# Residual checks #
###################
@dataclass(frozen=True)
class ResidualReport:
    kind: str
    min_residual: float
    max_residual: float
    n_points: int
    n_excluded: int
    tol: float
    passed: bool

    def as_row(self) -> dict[str, object]:
        return {'kind': self.kind, 'min_residual': self.min_residual, 'max_residual': self.max_residual,
                'n_points': self.n_points, 'n_excluded': self.n_excluded, 'tol': self.tol, 'passed': self.passed}


def _frame_grid(x_range: tuple[float, float], subcells: int) -> np.ndarray:
    n = int(round((x_range[1] - x_range[0]) * subcells))
    return x_range[0] + np.arange(n + 1) / subcells


def verify_supersolution(
        sup: SuperSolution,
        subcells: int = DEFAULT_SUBCELLS,
        t_range: tuple[float, float] = (0., 1.),
        n_times: int = 21,
        x_range: tuple[float, float] = (-30., 60.),
        tol: float = RESIDUAL_TOL,
) -> ResidualReport:
    """Scan D = dv/dt - Hv - v f(t, v) of the super-solution; pass iff min D >= -tol

    dv/dt is the centered difference with step 1e-4 at fixed lab position;
    frame points within 2/N of the kink are skipped.
    """
    assert subcells >= 16, 'Residual checks need at least 16 sub-cells per unit'
    h = RESIDUAL_TIME_STEP
    xs = _frame_grid(x_range, subcells)
    residuals, n_excluded = [], 0
    for t in np.linspace(*t_range, n_times):
        keep = np.abs(xs - sup.kink(t)) > KINK_CELLS / subcells
        n_excluded += int((~keep).sum())
        y = xs[keep] + sup.frame_offset(t)
        v = sup.value(y, t)
        v_t = (sup.value(y, t + h) - sup.value(y, t - h)) / (2 * h)
        h_v = (sup.value(y + 1, t) + sup.value(y - 1, t)) - 2 * v
        residuals.append(v_t - h_v - v * eval_reaction(sup.reaction, t, v))
    residuals = np.concatenate(residuals)
    min_res = float(residuals.min())
    return ResidualReport('super', min_res, float(residuals.max()), len(residuals), n_excluded, tol, min_res >= -tol)


def verify_subsolution(
        sub: SubSolution,
        subcells: int = DEFAULT_SUBCELLS,
        t_range: tuple[float, float] = (0., 1.),
        n_times: int = 21,
        x_range: Optional[tuple[float, float]] = None,
        tol: float = RESIDUAL_TOL,
) -> ResidualReport:
    """Scan R = dphi/dt - H phi - c(t) dphi/dx - phi f(t, phi) of the sub-solution in the frame; pass iff max R <= tol

    dphi/dx is the centered difference at spacing 1/N, dphi/dt the centered one with step 1e-4;
    points within 2/N of X1(t) are skipped.
    """
    assert subcells >= 16, 'Residual checks need at least 16 sub-cells per unit'
    h, dx = RESIDUAL_TIME_STEP, 1 / subcells
    times = np.linspace(*t_range, n_times)
    if x_range is None:
        x_range = (np.floor(min(sub.crossings(t)[0] for t in times)) - 20,
                   np.ceil(max(sub.zero(t) for t in times) + 60 / sub.mu))
    xs = _frame_grid(x_range, subcells)

    residuals, n_excluded = [], 0
    for t in times:
        keep = np.abs(xs - sub.crossings(t)[0]) > KINK_CELLS / subcells
        n_excluded += int((~keep).sum())
        x = xs[keep]
        phi = sub.profile(x, t)
        phi_t = (sub.profile(x, t + h) - sub.profile(x, t - h)) / (2 * h)
        h_phi = (sub.profile(x + 1, t) + sub.profile(x - 1, t)) - 2 * phi
        phi_x = (sub.profile(x + dx, t) - sub.profile(x - dx, t)) / (2 * dx)
        residuals.append(phi_t - h_phi - sub.speed(t) * phi_x - phi * eval_reaction(sub.reaction, t, phi))
    residuals = np.concatenate(residuals)
    max_res = float(residuals.max())
    return ResidualReport('sub', float(residuals.min()), max_res, len(residuals), n_excluded, tol, max_res <= tol)


##############
# Interfaces #
##############
def interface_trajectory(
        trajectory: Union[Trajectory, 'FrontProfile'],
        uplus: Callable[[float], float],
        level_fraction: float = 0.5,
        width_levels: tuple[float, float] = WIDTH_LEVELS,
        monotone_tol: float = 1e-8,
) -> pd.DataFrame:
    """Interface J(t) where the slice crosses level_fraction * u+(t), and the interface width per slice

    Parameters
    ----------
    trajectory: Trajectory or FrontProfile
        Slices should be nonincreasing in space (within `monotone_tol`)
    uplus: Callable[[float], float]
        The entire solution u+(t)
    level_fraction: float
        Level of the interface as a fraction of u+(t), in (0, 1)
    width_levels: tuple[float, float]
        The width is the distance between the crossings of width_levels[0] * u+ and width_levels[1] * u+

    Returns
    -------
    interfaces: pd.DataFrame
        Columns t, J, width
    """
    assert 0 < level_fraction < 1, 'Level fraction should lie in (0, 1)'
    rows = []
    for t, values in zip(trajectory.times, trajectory.values):
        if np.diff(values).max(initial=0.) > monotone_tol:
            raise ValueError(f"Slice at t = {t:.6g} is not nonincreasing in space")
        top = float(uplus(t))
        J = level_crossing(trajectory.positions, values, level_fraction * top)
        if J is None:
            raise NoCrossing(float(t), level_fraction * top)
        outer = level_crossing(trajectory.positions, values, width_levels[0] * top)
        inner = level_crossing(trajectory.positions, values, width_levels[1] * top)
        width = np.nan if outer is None or inner is None else outer - inner
        rows.append({'t': float(t), 'J': J, 'width': width})
    return pd.DataFrame(rows, columns=['t', 'J', 'width'])


def width_trend(times: npt.ArrayLike, widths: npt.ArrayLike, tol: float = WIDTH_SLOPE_TOL,
                prefix: str = '') -> dict[str, object]:
    """Theil-Sen slope of the interface width and whether the width grows by at most `tol` per unit time

    NaN widths are skipped. The flag is None when the remaining samples span less than WIDTH_TREND_SPAN.

    Examples
    --------
    width_trend([0, 10, 20], [2., 2., 2.]) --> {'width_slope': 0.0, 'width_bounded': True}
    """
    times, widths = np.asarray(times, dtype=float), np.asarray(widths, dtype=float)
    keep = np.isfinite(widths)
    t, w = times[keep], widths[keep]
    slope = theil_sen_slope(t, w) if len(t) >= 2 else np.nan
    bounded = None if len(t) < 2 or np.ptp(t) < WIDTH_TREND_SPAN else bool(slope <= tol)
    return {f"{prefix}width_slope": slope, f"{prefix}width_bounded": bounded}


###########
# Squeeze #
###########
@dataclass(frozen=True)
class FrontProfile:
    """Front phi(x, t) in the moving frame x = y - frame_offsets, sampled at `times`

    `interfaces` holds J (lab coordinates), J_frame and the width per output time;
    `gaps` holds the sup-distance between the upper and lower squeeze runs at t = 0 per tau.
    """
    mu: float
    mu_tilde: float
    gamma: float
    subcells: int
    times: np.ndarray
    positions: np.ndarray
    values: np.ndarray
    uplus_values: np.ndarray
    frame_offsets: np.ndarray
    interfaces: pd.DataFrame
    gaps: pd.DataFrame
    mu_hat: float
    alpha: float
    K: float
    resampling: str
    forcing_kind: str = 'constant'
    forcing_period: Optional[float] = None

    @property
    def tau_used(self) -> float:
        return float(self.gaps['tau'].iloc[-1])

    @property
    def final_gap(self) -> float:
        return float(self.gaps['gap'].iloc[-1])

    def slice(self, t: float) -> np.ndarray:
        return self.values[int(np.argmin(np.abs(self.times - t)))]

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns (t, x, phi)"""
        return pd.DataFrame({
            't': np.repeat(self.times, len(self.positions)),
            'x': np.tile(self.positions, len(self.times)),
            'phi': self.values.ravel(),
        })

    def checks(self) -> dict[str, tuple[float, Optional[bool]]]:
        """Front diagnostics as (value, passed); `passed` is None where a check does not apply

        * invariance: sup |phi(x, t) - phi(x, t0)| over the output times, for constant forcing
        * periodicity: sup |phi(x, t + period) - phi(x, t)| over the output times one period apart,
          for periodic forcing
        * tail: |mu_hat / mu - 1|
        * left_limit: the smallest phi(-60, t) / u+(t)
        * monotone: the largest increase of a slice between neighbouring frame points
        * range: the smallest of phi and u+ - phi
        * ordering: the largest ordering violation of the squeeze runs
        * width: Theil-Sen slope of the interface width
        """
        checks = {}

        invariance = np.nan
        if self.forcing_kind == 'constant' and len(self.times) > 1:
            invariance = float(np.abs(self.values - self.values[0]).max())
        checks['invariance'] = (invariance, None if np.isnan(invariance) else invariance < INVARIANCE_TOL)

        periodicity = np.nan
        if self.forcing_kind == 'periodic':
            lags = self.times[None, :] - self.times[:, None]
            pairs = np.argwhere(np.abs(lags - self.forcing_period) < 1e-9)
            if len(pairs):
                periodicity = max(float(np.abs(self.values[j] - self.values[i]).max()) for i, j in pairs)
        checks['periodicity'] = (periodicity, None if np.isnan(periodicity) else periodicity < PERIODICITY_TOL)

        tail = abs(self.mu_hat / self.mu - 1)
        checks['tail'] = (tail, bool(tail <= TAIL_RTOL))

        x_left, fraction = LEFT_LIMIT
        if self.positions[0] <= x_left <= self.positions[-1]:
            left = min(float(np.interp(x_left, self.positions, slc)) / top
                       for slc, top in zip(self.values, self.uplus_values))
            checks['left_limit'] = (left, left >= fraction)
        else:
            checks['left_limit'] = (np.nan, None)

        monotone = float(np.diff(self.values, axis=1).max(initial=0.))
        checks['monotone'] = (monotone, monotone <= RANGE_TOL)

        below_top = float((self.uplus_values[:, None] - self.values).min())
        checks['range'] = (min(float(self.values.min()), below_top),
                           bool(self.values.min() > 0) and below_top >= -RANGE_TOL)

        ordering = float(self.gaps[['order_violation', 'monotone_violation']].to_numpy().max())
        checks['ordering'] = (ordering, ordering <= RANGE_TOL)

        trend = width_trend(self.interfaces['t'], self.interfaces['width'])
        checks['width'] = (trend['width_slope'], trend['width_bounded'])
        return checks

    @property
    def passed(self) -> bool:
        """True when every applicable check of `checks` passes"""
        return all(ok is not False for _, ok in self.checks().values())

    def summary(self) -> dict[str, object]:
        summary = {'mu': self.mu, 'mu_tilde': self.mu_tilde, 'gamma': self.gamma, 'subcells': self.subcells,
                   'mu_hat': self.mu_hat, 'alpha': self.alpha, 'K': self.K, 'resampling': self.resampling,
                   'tau_used': self.tau_used, 'final_gap': self.final_gap,
                   'order_violation': float(self.gaps['order_violation'].max()),
                   'monotone_violation': float(self.gaps['monotone_violation'].max())}
        summary.update({f"gap_tau_{row.tau:g}": row.gap for row in self.gaps.itertuples()})
        summary.update({f"J_t_{row.t:g}": row.J for row in self.interfaces.itertuples()})
        for name, (value, ok) in self.checks().items():
            summary[f"check_{name}"] = value
            summary[f"check_{name}_passed"] = ok
        summary['passed'] = self.passed
        return summary


def _to_frame(positions: np.ndarray, values: np.ndarray, offset: float, xs: np.ndarray, subcells: int,
              method: FRAME_RESAMPLING) -> np.ndarray:
    """Sample the lab slice `values` at the frame points xs, i.e. at lab positions xs + offset"""
    if method == 'spline':
        return CubicSpline(positions, values)(xs + offset)
    shift = int(round(offset * subcells))
    logger.debug('Frame offset %.12g rounded to %d sub-cells (remainder %.3g)', offset, shift, offset - shift / subcells)
    idxs = np.rint((xs - positions[0]) * subcells).astype(int) + shift
    return values[idxs]


def _resolve_decay(gamma: Optional[float], mu: Optional[float], a: float) -> tuple[float, float]:
    assert (gamma is None) != (mu is None), 'Exactly one of gamma and mu should be given'
    ms = mu_star(a)
    if mu is None:
        if gamma <= chi1(ms, a):
            raise DomainError(f"Speed {gamma} should exceed the minimal speed {chi1(ms, a):.12g}")
        mu = root_pair(gamma, a)[0]
    if not 0 < mu < ms:
        raise DomainError(f"Decay rate should lie in (0, mu_star) = (0, {ms:.12g}), got {mu}")
    return float(mu), float(chi1(mu, a))


def squeeze_front(
        reaction: Reaction,
        gamma: Optional[float] = None,
        mu: Optional[float] = None,
        subcells: int = DEFAULT_SUBCELLS,
        tau_ladder: Sequence[float] = DEFAULT_TAU_LADDER,
        tol: float = SQUEEZE_TOL,
        output_times: Sequence[float] = (0.,),
        dt: float = DEFAULT_DT,
        frame_window: tuple[float, float] = DEFAULT_FRAME_WINDOW,
        frame_resampling: FRAME_RESAMPLING = 'spline',
        averages: Optional[AverageReport] = None,
        mu_tilde: Optional[float] = None,
        K: Optional[float] = None,
        margin: float = DEFAULT_MARGIN,
        use_tqdm: bool = False,
) -> FrontProfile:
    """Construct the transition front of mean speed `gamma` (or decay `mu`) by the backward squeeze

    Parameters
    ----------
    reaction: Reaction
    gamma: float, optional
        Mean front speed, above the minimal one. The decay rate is the smaller root of chi1 = gamma
    mu: float, optional
        Decay rate in (0, mu_star), when gamma is not given
    subcells: int
        Sub-cells per unit of the real-line grid
    tau_ladder: Sequence[float]
        Increasing start depths; the squeeze stops at the first tau with gap < tol
    tol: float
        Squeeze tolerance on sup |v^tau - v_tau| at t = 0
    output_times: Sequence[float]
        Non-negative times where the front is sampled
    dt: float
        RK4 time step
    frame_window: tuple[float, float]
        Frame positions where the front is sampled
    frame_resampling: 'spline' or 'round'
        Sampling of lab slices at frame positions: cubic spline, or rounding the offset to the nearest sub-cell
    averages: AverageReport, optional
    mu_tilde, K: float, optional
        Sub-solution parameters (see `build_subsolution`)
    margin: float
        The front should stay this many units away from the right window edge
    use_tqdm: bool
        A flag whether to visualise the progress bar over the tau ladder

    Returns
    -------
    front: FrontProfile

    Notes
    -----
    At every stage the ordering sub <= v_tau <= v^tau <= super and the monotonicity in tau are checked
    (tolerance 1e-9) and logged when violated; the violations are recorded in the gap history.
    """
    assert frame_resampling in get_args(FRAME_RESAMPLING), f"Unknown frame resampling {frame_resampling}"
    assert list(tau_ladder) == sorted(tau_ladder) and tau_ladder[0] > 0, 'Tau ladder should be increasing'
    assert min(output_times) >= 0, 'Output times should be non-negative'
    averages = estimate_averages(reaction.forcing) if averages is None else averages
    mu, gamma_mean = _resolve_decay(gamma, mu, averages.fbar_inf)
    tau_max, t_out = float(tau_ladder[-1]), float(max(output_times))

    t_range = (-tau_max - 1, t_out + 1)
    sup = build_supersolution(reaction, mu, t_range, averages=averages)
    sub = build_subsolution(reaction, mu, mu_tilde, K, t_range, averages=averages)

    c_max = sup.speed.value_range()[1]
    width = int(np.ceil(4 * tau_max * c_max + 100))
    lo = int(np.floor(sup.frame_offset(-tau_max) - 2 * tau_max * c_max - 50))
    hi = max(lo + width, int(np.ceil(sup.frame_offset(t_out) + frame_window[1] + 150)))
    lo = min(lo, int(np.floor(sup.frame_offset(0.) + frame_window[0] - 10)))
    logger.info('Squeeze window [%d, %d] with %d sub-cells per unit, mu = %.6g', lo, hi, subcells, mu)

    snapshots = sorted({0.} | {float(t) for t in output_times})
    guard = MarginGuard(margin, 0.5 * sup.uplus.inf, subcells, sides=('right',))
    rows, previous = [], None
    for tau in tqdm(tau_ladder, disable=not use_tqdm, desc='Squeeze ladder'):
        upper0 = lattice_state(lo, hi, lambda y: sup.value(y, -tau), -tau, subcells=subcells)
        lower0 = lattice_state(lo, hi, lambda y: sub.value(y, -tau), -tau, subcells=subcells)
        upper = integrate(upper0, reaction, t_out, dt, output_times=snapshots, monitor=guard)
        lower = integrate(lower0, reaction, t_out, dt, output_times=snapshots, monitor=guard)

        y = upper0.positions
        up, low = upper.at(0.), lower.at(0.)
        order = max(float((low - up).max()), float((sub.value(y, 0.) - low).max()), float((up - sup.value(y, 0.)).max()))
        monotone = 0. if previous is None else max(float((up - previous[0]).max()), float((previous[1] - low).max()))
        gap = float(np.abs(up - low).max())
        if max(order, monotone) > ORDER_TOL:
            logger.warning('Squeeze ordering violated at tau = %g by %.3g', tau, max(order, monotone))
        logger.info('Squeeze gap at tau = %g: %.3g', tau, gap)
        rows.append({'tau': float(tau), 'gap': gap, 'order_violation': order, 'monotone_violation': monotone})
        previous = (up, low)
        if gap < tol:
            break
    gaps = pd.DataFrame(rows)
    if gaps['gap'].iloc[-1] >= tol:
        raise NotSqueezed(gaps, tol)

    xs = _frame_grid(frame_window, subcells)
    keep = np.isin(upper.times, np.asarray(output_times, dtype=float))
    times = upper.times[keep]
    offsets = np.asarray(sup.frame_offset(times), dtype=float)
    lab = (upper.values[keep] + lower.values[keep]) / 2
    phi = np.vstack([_to_frame(y, slc, off, xs, subcells, frame_resampling) for slc, off in zip(lab, offsets)])

    uplus_values = np.asarray(sup.uplus(times), dtype=float)
    frame_lines = replace(upper, times=times, positions=xs, values=phi)
    interfaces = interface_trajectory(frame_lines, sup.uplus)
    interfaces = interfaces.rename(columns={'J': 'J_frame'})
    interfaces.insert(1, 'J', interfaces['J_frame'] + offsets)

    tail = (xs >= TAIL_RANGE[0]) & (xs <= TAIL_RANGE[1]) & (phi[0] > 0)
    mu_hat = -linear_fit(xs[tail], np.log(phi[0][tail])).slope if tail.sum() >= 2 else np.nan

    front = FrontProfile(
        mu=mu, mu_tilde=sub.mu_tilde, gamma=gamma_mean, subcells=subcells, times=times, positions=xs, values=phi,
        uplus_values=uplus_values, frame_offsets=offsets, interfaces=interfaces, gaps=gaps, mu_hat=float(mu_hat),
        alpha=sub.alpha, K=sub.K, resampling=frame_resampling, forcing_kind=reaction.forcing.kind,
        forcing_period=reaction.forcing.period if reaction.forcing.kind == 'periodic' else None,
    )
    failed = [name for name, (_, ok) in front.checks().items() if ok is False]
    if failed:
        logger.warning('Front checks failed: %s', failed)
    return front


def pulsating_profile(front: FrontProfile, reaction: Reaction) -> FrontProfile:
    """Reframe a front so that the frame moves at the constant speed chi1(mu, mean of r)

    psi(x, t) = phi(x - s(t), t) with s(t) = (int_0^t r - mean * t) / mu. For periodic forcing psi is
    periodic in t with the period of the forcing. Points whose source falls outside the sampled range are dropped.
    """
    mean = reaction.forcing.long_run_mean
    assert mean is not None, 'Pulsating reframing needs a forcing with an exact long-run mean'
    shifts = (reaction.forcing.antiderivative(front.times) - mean * front.times) / front.mu
    shifts = np.atleast_1d(shifts)
    keep = (front.positions - shifts.max() >= front.positions[0]) & (front.positions - shifts.min() <= front.positions[-1])
    xs = front.positions[keep]
    values = np.vstack([CubicSpline(front.positions, slc)(xs - s) for slc, s in zip(front.values, shifts)])
    interfaces = front.interfaces.assign(J_frame=front.interfaces['J_frame'] + shifts)
    return replace(front, positions=xs, values=values, frame_offsets=front.frame_offsets - shifts, interfaces=interfaces)
