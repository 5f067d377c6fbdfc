"""Desk-scale experiments on spreading speeds, stability of u+ and critical fronts

The proposed functions are:
* measure_spreading_speed: level-set tracking of both flanks of a compactly supported solution
* hairtrigger_inside: convergence to u+ inside the cone |i| <= gamma t
* stability_experiment: convergence of strictly positive data to u+, uniformly in the start time
* critical_front_run: the front started from min(e^{-mu_star i}, M0) and its liminf speed
* tilde_cstar_bracket: front-speed upper bounds certified by comparison with the gamma-fronts
* homogenized_speed_check: exact speed recovery for the block-averaged comparison reaction
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import numpy.typing as npt
import pandas as pd
from tqdm.auto import tqdm

from .base_functions import LinearFit, flank_crossings, level_crossing, linear_fit, trailing_window_speeds
from .dispersion import SpeedBounds, chi1, mu_star, root_pair, speed_bounds
from .dynamics import DEFAULT_DT, IntegrationReport, MarginGuard, integrate, lattice_state, pullback_uplus
from .forcing import AverageReport, DEFAULT_HORIZON, Forcing, estimate_averages
from .fronts import WIDTH_LEVELS, build_supersolution, width_trend
from .reaction import Reaction, homogenized_reaction

logger = logging.getLogger(__name__)

DEFAULT_DURATION = 150.
DEFAULT_WINDOW = 600
DEFAULT_MARGIN = 50.
SPEED_RTOL = 0.03
MIN_R2 = 0.99
HAIRTRIGGER_TOL = 1e-3
HAIRTRIGGER_FRACTION = 0.9
STABILITY_TOL = 1e-4
CRITICAL_RTOL = 0.05
CRITICAL_WINDOWS = (25., 50., 100.)
MONOTONE_TOL = 1e-10
BRACKET_OFFSETS = (0.25, 0.5, 1.0)
DOMINATION_TOL = 1e-10


@dataclass
class PoorFit(RuntimeError):
    flank: str
    r_squared: float

    def __str__(self) -> str:
        return f"Interface of the {self.flank} flank is not linear in time: R^2 = {self.r_squared:.6f} < {MIN_R2}"


@dataclass(frozen=True)
class Datum:
    """Compactly supported initial datum: `height` on `width` consecutive sites ending at `anchor` + (width-1)//2

    The default height is u+ at the start time.
    """
    width: int = 1
    height: Optional[float] = None
    anchor: int = 0

    def support(self) -> tuple[int, int]:
        first = self.anchor - self.width // 2
        return first, first + self.width - 1

    def values(self, positions: np.ndarray, default_height: float) -> np.ndarray:
        first, last = self.support()
        height = default_height if self.height is None else self.height
        return np.where((positions >= first) & (positions <= last), height, 0.)

    def describe(self) -> dict[str, object]:
        return {'datum_width': self.width, 'datum_height': np.nan if self.height is None else self.height,
                'datum_anchor': self.anchor}


def _bounds(reaction: Reaction, bounds: Optional[SpeedBounds], averages: Optional[AverageReport]) -> SpeedBounds:
    if bounds is not None:
        return bounds
    return speed_bounds(estimate_averages(reaction.forcing) if averages is None else averages)


def _unit_stride(dt: float) -> int:
    return max(1, int(round(1 / dt)))


#####################
# Spreading speeds  #
#####################
@dataclass(frozen=True)
class SpeedMeasurement:
    """Flank speeds of a spreading solution compared to the theoretical interval [c0_minus, c0_plus]"""
    datum: Datum
    level_fraction: float
    start_time: float
    duration: float
    right_fit: LinearFit
    left_fit: LinearFit
    window_speeds: pd.DataFrame
    bounds: SpeedBounds
    tol: float
    passed: bool
    interfaces: pd.DataFrame = field(repr=False)
    report: IntegrationReport = field(repr=False)

    def width_trends(self) -> dict[str, object]:
        """Width trends of both flanks over the trailing half of the run"""
        trailing = self.interfaces[self.interfaces['t'] >= self.start_time + self.duration / 2]
        return width_trend(trailing['t'], trailing['right_width'], prefix='right_') \
            | width_trend(trailing['t'], trailing['left_width'], prefix='left_')

    @property
    def speeds(self) -> tuple[float, float]:
        """Leftward and rightward speeds"""
        return self.left_fit.slope, self.right_fit.slope

    def as_row(self) -> dict[str, object]:
        row = {'level_fraction': self.level_fraction, 'start_time': self.start_time, 'duration': self.duration,
               'tol': self.tol, 'passed': self.passed}
        row |= self.datum.describe()
        row |= self.right_fit.as_dict('right_') | self.left_fit.as_dict('left_')
        row |= self.bounds.as_row()
        row |= self.width_trends()
        for wsp in self.window_speeds.itertuples():
            row[f"{wsp.flank}_min_speed_W{wsp.window:g}"] = wsp.min_speed
            row[f"{wsp.flank}_max_speed_W{wsp.window:g}"] = wsp.max_speed
        return row | self.report.as_dict()


def measure_spreading_speed(
        reaction: Reaction,
        datum: Datum = Datum(),
        duration: float = DEFAULT_DURATION,
        window: int = DEFAULT_WINDOW,
        dt: float = DEFAULT_DT,
        level_fraction: float = 0.5,
        start_time: float = 0.,
        bounds: Optional[SpeedBounds] = None,
        averages: Optional[AverageReport] = None,
        margin: float = DEFAULT_MARGIN,
        tol: float = SPEED_RTOL,
        use_tqdm: bool = False,
) -> SpeedMeasurement:
    """Measure both flank speeds of the solution started at `start_time` from a compact datum

    Parameters
    ----------
    reaction: Reaction
    datum: Datum
        Compactly supported initial datum
    duration: float
        Length of the run
    window: int
        The lattice is [-window, window] with clamp boundaries
    dt: float
        RK4 time step
    level_fraction: float
        Interfaces are the outermost crossings of level_fraction * u+(t)
    start_time: float
        Initial time s of the run
    bounds: SpeedBounds, optional
        Theoretical interval; computed from the forcing averages when not given
    averages: AverageReport, optional
    margin: float
        The run aborts (MarginViolated) when the interface level is reached within `margin` sites of an edge
    tol: float
        Relative tolerance of the verdict
    use_tqdm: bool
        A flag whether to visualise the progress bar over the steps

    Returns
    -------
    measurement: SpeedMeasurement
        Interfaces are fitted linearly over the trailing half of the run (PoorFit when R^2 < 0.99).
        PASS iff both flank speeds lie in [c0_minus (1 - tol), c0_plus (1 + tol)].
    """
    bounds = _bounds(reaction, bounds, averages)
    s, T = float(start_time), float(duration)
    uplus = pullback_uplus(reaction, np.linspace(s, s + T, int(np.ceil(T)) + 1))

    state = lattice_state(-window, window, lambda x: datum.values(x, uplus(s)), t=s)
    guard = MarginGuard(margin, level_fraction * uplus.inf)
    traj = integrate(state, reaction, s + T, dt, stride=_unit_stride(dt), monitor=guard, use_tqdm=use_tqdm)

    rows = []
    for t, u in zip(traj.times, traj.values):
        level = level_fraction * uplus(t)
        flanks = flank_crossings(traj.positions, u, level)
        left, right = (np.nan, np.nan) if flanks is None else flanks
        outer, inner = (flank_crossings(traj.positions, u, f * uplus(t)) for f in WIDTH_LEVELS)
        right_width = np.nan if outer is None or inner is None else outer[1] - inner[1]
        left_width = np.nan if outer is None or inner is None else inner[0] - outer[0]
        rows.append({'t': t, 'left': left, 'right': right, 'level': level,
                     'left_width': left_width, 'right_width': right_width})
    interfaces = pd.DataFrame(rows)

    trailing = interfaces[(interfaces['t'] >= s + T / 2) & interfaces['right'].notna()]
    right_fit = linear_fit(trailing['t'], trailing['right'])
    left_fit = linear_fit(trailing['t'], -trailing['left'])
    for flank, fit in [('right', right_fit), ('left', left_fit)]:
        if fit.r_squared < MIN_R2:
            raise PoorFit(flank, fit.r_squared)

    window_rows = []
    for W in (T / 8, T / 4, T / 2):
        for flank, sign in [('right', 1), ('left', -1)]:
            speeds = trailing_window_speeds(trailing['t'], sign * trailing[flank], W)
            if len(speeds):
                window_rows.append({'window': W, 'flank': flank, 'min_speed': speeds.min(), 'max_speed': speeds.max()})
    window_speeds = pd.DataFrame(window_rows, columns=['window', 'flank', 'min_speed', 'max_speed'])

    lower, upper = bounds.c0_minus * (1 - tol), bounds.c0_plus * (1 + tol)
    passed = all(lower <= fit.slope <= upper for fit in (left_fit, right_fit))
    logger.info('Flank speeds %.6g (left), %.6g (right) vs [%.6g, %.6g]: %s',
                left_fit.slope, right_fit.slope, bounds.c0_minus, bounds.c0_plus, 'PASS' if passed else 'FAIL')
    return SpeedMeasurement(datum, level_fraction, s, T, right_fit, left_fit, window_speeds, bounds, tol, passed,
                            interfaces, traj.report)


def homogenized_speed_check(forcing: Forcing, T: float, M: float = 1., horizon: float = DEFAULT_HORIZON,
                            **kwargs) -> SpeedMeasurement:
    """Spreading speed of the comparison reaction fbar_T - M u, whose exact speed is the minimal speed of fbar_T"""
    return measure_spreading_speed(homogenized_reaction(forcing, T, M, horizon), **kwargs)


################
# Hair trigger #
################
@dataclass(frozen=True)
class HairTriggerReport:
    gamma: float
    expected_inside: bool
    runs: pd.DataFrame
    tol: float

    @property
    def passed(self) -> bool:
        return bool((self.runs['max_deviation'] < self.tol).all())

    def as_row(self) -> dict[str, object]:
        return {'gamma': self.gamma, 'expected_inside': self.expected_inside, 'tol': self.tol,
                'max_deviation': float(self.runs['max_deviation'].max()), 'passed': self.passed}


def hairtrigger_inside(
        reaction: Reaction,
        gamma: float,
        datum: Datum = Datum(),
        duration: float = 200.,
        window: int = DEFAULT_WINDOW,
        dt: float = DEFAULT_DT,
        start_times: Sequence[float] = (0.,),
        bounds: Optional[SpeedBounds] = None,
        averages: Optional[AverageReport] = None,
        tol: float = HAIRTRIGGER_TOL,
) -> HairTriggerReport:
    """Check that max_{|i| <= gamma (t - s)} |u_i(t) - u+(t)| < tol over the final quarter of each run

    Inside the spreading cone (gamma below 0.9 c0_minus) the check is expected to pass,
    for gamma above the spreading speed it is expected to fail.
    """
    bounds = _bounds(reaction, bounds, averages)
    expected = gamma < HAIRTRIGGER_FRACTION * bounds.c0_minus
    if not expected:
        logger.info('Cone speed %.6g is not below %.2f c0_minus = %.6g: convergence is not expected',
                    gamma, HAIRTRIGGER_FRACTION, HAIRTRIGGER_FRACTION * bounds.c0_minus)

    rows = []
    for s in start_times:
        uplus = pullback_uplus(reaction, np.linspace(s, s + duration, int(np.ceil(duration)) + 1))
        state = lattice_state(-window, window, lambda x: datum.values(x, uplus(s)), t=s)
        traj = integrate(state, reaction, s + duration, dt, stride=_unit_stride(dt))
        deviations = []
        for t, u in zip(traj.times, traj.values):
            if t < s + 0.75 * duration:
                continue
            cone = np.abs(traj.positions) <= gamma * (t - s)
            deviations.append(float(np.abs(u[cone] - uplus(t)).max()) if cone.any() else 0.)
        rows.append({'start_time': s, 'max_deviation': max(deviations)})
    return HairTriggerReport(float(gamma), expected, pd.DataFrame(rows), tol)


#############
# Stability #
#############
@dataclass(frozen=True)
class StabilityReport:
    """Sup-distances to u+ of an ensemble of positive solutions, per start time, member and unit time"""
    distances: pd.DataFrame
    duration: float
    tol: float
    decay_rate: float

    @property
    def final_distance(self) -> float:
        last = self.distances['t'] - self.distances['start_time'] >= self.duration - 1e-9
        return float(self.distances.loc[last, 'distance'].max())

    @property
    def passed(self) -> bool:
        return self.final_distance <= self.tol

    def as_row(self) -> dict[str, object]:
        return {'duration': self.duration, 'tol': self.tol, 'final_distance': self.final_distance,
                'decay_rate': self.decay_rate, 'passed': self.passed}


def stability_experiment(
        reaction: Reaction,
        n_members: int = 8,
        low: float = 0.2,
        high: float = 3.,
        start_times: Sequence[float] = (0., 0.3, 0.7),
        duration: float = 20.,
        window: int = 64,
        seed: int = 0,
        dt: float = DEFAULT_DT,
        ensemble: Optional[Sequence[Union[float, npt.ArrayLike]]] = None,
        tol: float = STABILITY_TOL,
        use_tqdm: bool = False,
) -> StabilityReport:
    """Distance to u+(t) of solutions started at several times s from strictly positive data in [low, high]

    Parameters
    ----------
    reaction: Reaction
    n_members: int
        Number of random data per start time (uniform in [low, high] site by site)
    low, high: float
        Bounds of the random data
    start_times: Sequence[float]
        Start times s
    duration: float
        Distances are reported up to t - s = duration
    window: int
        The lattice is [-window, window] with clamp boundaries
    seed: int
        Seed of the ensemble generator
    dt: float
    ensemble: Sequence, optional
        Explicit data (constants or arrays) replacing the random ensemble
    tol: float
        Bound on the final distance
    use_tqdm: bool
        A flag whether to visualise the progress bar over the start times

    Returns
    -------
    report: StabilityReport
        With the exponential decay rate fitted on the worst distance per time
    """
    assert 0 < low <= high, 'Ensemble should be strictly positive and bounded'
    rng = np.random.default_rng(seed)
    n_sites = 2 * window + 1
    if ensemble is None:
        ensemble = [rng.uniform(low, high, n_sites) for _ in range(n_members)]

    uplus = pullback_uplus(reaction, np.linspace(min(start_times), max(start_times) + duration,
                                                 int(np.ceil(max(start_times) - min(start_times) + duration)) * 4 + 1))
    rows = []
    for s in tqdm(start_times, disable=not use_tqdm, desc='Start times'):
        for member, datum in enumerate(ensemble):
            values = np.broadcast_to(np.asarray(datum, dtype=float), (n_sites,)).copy()
            traj = integrate(lattice_state(-window, window, lambda x: values, t=s), reaction, s + duration, dt,
                             stride=_unit_stride(dt))
            for t, u in zip(traj.times, traj.values):
                rows.append({'start_time': s, 'member': member, 't': t, 'distance': float(np.abs(u - uplus(t)).max())})
    distances = pd.DataFrame(rows)

    worst = distances.assign(age=(distances['t'] - distances['start_time']).round(9)).groupby('age')['distance'].max()
    fitted = worst[worst > 1e-12]
    decay_rate = -linear_fit(fitted.index, np.log(fitted.values)).slope if len(fitted) >= 2 else np.nan
    return StabilityReport(distances, float(duration), tol, float(decay_rate))


##################
# Critical front #
##################
@dataclass(frozen=True)
class CriticalFrontReport:
    """Interface J*(t) of the solution started from min(e^{-mu_star i}, M0) and its windowed mean speeds"""
    mu_star: float
    c_target: float
    interfaces: pd.DataFrame
    window_speeds: pd.DataFrame
    liminf_estimate: float
    converged: bool
    monotone_violation: float
    tol: float

    def width_trends(self) -> dict[str, object]:
        settled = self.interfaces[self.interfaces['t'] >= self.interfaces['t'].iloc[-1] / 4]
        return width_trend(settled['t'], settled['width'])

    @property
    def passed(self) -> bool:
        return abs(self.liminf_estimate - self.c_target) <= self.tol * self.c_target \
            and self.monotone_violation <= MONOTONE_TOL

    def as_row(self) -> dict[str, object]:
        row = {'mu_star': self.mu_star, 'c_target': self.c_target, 'liminf_estimate': self.liminf_estimate,
               'converged': self.converged, 'monotone_violation': self.monotone_violation, 'tol': self.tol,
               'passed': self.passed} | self.width_trends()
        row.update({f"min_speed_W{r.window:g}": r.min_speed for r in self.window_speeds.itertuples()})
        return row


def critical_front_run(
        reaction: Reaction,
        duration: float = 300.,
        lo: int = -200,
        hi: int = 1000,
        dt: float = DEFAULT_DT,
        windows: Sequence[float] = CRITICAL_WINDOWS,
        level_fraction: float = 0.5,
        margin: float = DEFAULT_MARGIN,
        averages: Optional[AverageReport] = None,
        tol: float = CRITICAL_RTOL,
        use_tqdm: bool = False,
) -> CriticalFrontReport:
    """Evolve the monotone datum min(e^{-mu_star i}, M0) and estimate the liminf of its interface speed

    The liminf over t - s -> infinity is estimated by the smallest mean speed (J*(t) - J*(s)) / (t - s)
    over windows of the largest length, with s in the last three quarters of the run.
    The estimate is converged when the two largest windows agree within 1e-2 relative.
    """
    a = (estimate_averages(reaction.forcing) if averages is None else averages).fbar_inf
    ms = mu_star(a)
    c_target = chi1(ms, a)
    uplus = pullback_uplus(reaction, np.linspace(0, duration, int(np.ceil(duration)) + 1))

    state = lattice_state(lo, hi, lambda x: np.minimum(np.exp(np.minimum(-ms * x, 700.)), reaction.M0))
    guard = MarginGuard(margin, level_fraction * uplus.inf, sides=('right',))
    traj = integrate(state, reaction, duration, dt, stride=_unit_stride(dt), monitor=guard, use_tqdm=use_tqdm)

    monotone_violation = max(0., float(np.diff(traj.values, axis=1).max()))
    J = [level_crossing(traj.positions, u, level_fraction * uplus(t)) for t, u in zip(traj.times, traj.values)]
    widths = []
    for t, u in zip(traj.times, traj.values):
        outer, inner = (level_crossing(traj.positions, u, f * uplus(t)) for f in WIDTH_LEVELS)
        widths.append(np.nan if outer is None or inner is None else outer - inner)
    interfaces = pd.DataFrame({'t': traj.times, 'J': [np.nan if j is None else j for j in J], 'width': widths})

    settled = interfaces[(interfaces['t'] >= duration / 4) & interfaces['J'].notna()]
    rows = []
    for W in sorted(windows):
        speeds = trailing_window_speeds(settled['t'], settled['J'], W)
        if len(speeds):
            rows.append({'window': W, 'min_speed': speeds.min(), 'max_speed': speeds.max(), 'mean_speed': speeds.mean()})
    window_speeds = pd.DataFrame(rows, columns=['window', 'min_speed', 'max_speed', 'mean_speed'])
    assert len(window_speeds), 'No window fits into the settled part of the run'

    liminf = float(window_speeds['min_speed'].iloc[-1])
    converged = len(window_speeds) >= 2 and \
        abs(liminf - window_speeds['min_speed'].iloc[-2]) <= 1e-2 * abs(liminf)
    if not converged:
        logger.warning('Windowed minimal speeds did not converge: %s', window_speeds['min_speed'].tolist())
    logger.info('Critical front liminf speed %.6g vs minimal speed %.6g', liminf, c_target)
    return CriticalFrontReport(ms, c_target, interfaces, window_speeds, liminf, converged, monotone_violation, tol)


###################
# c_tilde bracket #
###################
@dataclass(frozen=True)
class BracketReport:
    """Per gamma: domination of a compact solution by the gamma-front barrier and the certified speed bound"""
    c_tilde: float
    runs: pd.DataFrame
    tol: float

    @property
    def inf_certified(self) -> float:
        accepted = self.runs[self.runs['status'] == 'ok']
        return float(accepted['certified_bound'].min()) if len(accepted) else np.nan

    @property
    def passed(self) -> bool:
        accepted = self.runs[self.runs['status'] == 'ok']
        if not len(accepted):
            return False
        bounds_increase = bool((np.diff(accepted.sort_values('gamma')['certified_bound']) > 0).all())
        return bool(accepted['dominated_throughout'].all()) and bounds_increase \
            and bool((accepted['measured_speed'] <= accepted['certified_bound'] * (1 + self.tol)).all()) \
            and bool((accepted['measured_speed'] >= self.c_tilde * (1 - self.tol)).all())

    def as_row(self) -> dict[str, object]:
        return {'c_tilde': self.c_tilde, 'inf_certified': self.inf_certified,
                'gap_to_minimal': self.inf_certified - self.c_tilde, 'tol': self.tol, 'passed': self.passed}


def tilde_cstar_bracket(
        reaction: Reaction,
        gammas: Optional[Sequence[float]] = None,
        datum: Datum = Datum(),
        duration: float = 60.,
        window: int = DEFAULT_WINDOW,
        dt: float = DEFAULT_DT,
        level_fraction: float = 0.5,
        averages: Optional[AverageReport] = None,
        tol: float = SPEED_RTOL,
) -> BracketReport:
    """Certify upper bounds on the spreading speed by comparison with the fronts of speeds `gammas`

    For each gamma the compact datum should lie below the super-solution barrier v(., 0) of decay rate
    mu_low(gamma) (otherwise the run is rejected). The compact solution and the lattice solution started
    at the barrier are evolved together; the first should stay below the second (and the second below
    the barrier) at every unit time, which certifies the mean frame speed as a bound on the spread.
    """
    averages = estimate_averages(reaction.forcing) if averages is None else averages
    a = averages.fbar_inf
    c_tilde = chi1(mu_star(a), a)
    gammas = [c_tilde + off for off in BRACKET_OFFSETS] if gammas is None else list(gammas)

    rows = []
    for gamma in gammas:
        row = {'gamma': gamma}
        if gamma <= c_tilde:
            rows.append(row | {'status': 'below_minimal_speed'})
            continue
        mu = root_pair(gamma, a)[0]
        sup = build_supersolution(reaction, mu, (0., duration), averages=averages)
        barrier0 = lattice_state(-window, window, lambda y: sup.value(y, 0.))
        compact0 = barrier0.with_values(datum.values(barrier0.positions, sup.uplus(0.)), 0.)
        if (compact0.values > barrier0.values).any():
            rows.append(row | {'mu': mu, 'status': 'rejected'})
            continue

        stride = _unit_stride(dt)
        compact = integrate(compact0, reaction, duration, dt, stride=stride)
        barrier = integrate(barrier0, reaction, duration, dt, stride=stride)
        dominated = all((u <= w + DOMINATION_TOL).all() for u, w in zip(compact.values, barrier.values))
        below_super = all((w <= sup.value(barrier.positions, t) + 1e-9).all() for t, w in zip(barrier.times, barrier.values))

        crossings = [flank_crossings(compact.positions, u, level_fraction * sup.uplus(t))
                     for t, u in zip(compact.times, compact.values)]
        tracked = [(t, c[1]) for t, c in zip(compact.times, crossings) if c is not None and t >= duration / 2]
        measured = linear_fit(*zip(*tracked)).slope if len(tracked) >= 2 else np.nan
        rows.append(row | {
            'mu': mu, 'status': 'ok', 'dominated_throughout': dominated, 'barrier_below_super': below_super,
            'certified_bound': float(sup.speed.integral(0., duration)) / duration, 'measured_speed': measured,
        })
    columns = ['gamma', 'mu', 'status', 'dominated_throughout', 'barrier_below_super', 'certified_bound', 'measured_speed']
    return BracketReport(float(c_tilde), pd.DataFrame(rows, columns=columns), tol)


def reflection_defect(reaction: Reaction, values: npt.ArrayLike, window: int, duration: float,
                      dt: float = DEFAULT_DT) -> float:
    """max |u(reflected datum) - reflected u| at the end of a run on [-window, window]"""
    state = lattice_state(-window, window, lambda x: np.asarray(values, dtype=float))
    direct = integrate(state, reaction, duration, dt).final.values
    mirrored = integrate(state.reflected(), reaction, duration, dt).final.values
    return float(np.abs(direct[::-1] - mirrored).max())
