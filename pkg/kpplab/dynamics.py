"""Lattice KPP equation u_i' = u_{i+1} - 2 u_i + u_{i-1} + u_i f(t, u_i) on truncated windows

The module covers:
* LatticeState (integer sites) and GridState (N sub-cells per unit, so that the shift by one unit
  is an exact index shift by N) with clamp or fixed boundary ghosts
* rhs, step_rk4 and integrate: the fixed-step fourth order Runge-Kutta integrator
* pullback_uplus: the spatially homogeneous entire solution u+(t) as a pull-back limit
* part_metric, sign_change_profile, probe_continuity: diagnostics of the comparison principle
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Optional, Sequence, Union

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.integrate import solve_ivp
from tqdm.auto import tqdm

from .base_functions import nonzero_signs
from .reaction import Reaction, eval_reaction, sup_abs_growth

logger = logging.getLogger(__name__)

BOUNDARY_KIND = Literal['clamp', 'fixed']
ValueSignal = Union[float, Callable[[float], float]]

DEFAULT_DT = 0.01
STABILITY_FACTOR = 0.25
NEGATIVE_TOL = -1e-13
BLOWUP_FACTOR = 10.
DEFAULT_DEPTH_LADDER = (25., 50., 100., 200.)
PULLBACK_AGREEMENT = 1e-9
PULLBACK_FLAG = 1e-6
ODE_RTOL, ODE_ATOL = 1e-12, 1e-14
RESIDUAL_STEP = 1e-3


@dataclass
class StepSizeError(ValueError):
    dt: float
    dt_max: float

    def __str__(self) -> str:
        return f"Time step {self.dt:g} exceeds the explicit stability limit dt_max = {self.dt_max:.6g}"


@dataclass
class BlowUp(ArithmeticError):
    t: float
    value: float
    threshold: float

    def __str__(self) -> str:
        return f"Solution blew up at t = {self.t:.6g}: value {self.value:.6g} exceeds {self.threshold:.6g}"


class UndefinedMetric(ValueError):
    pass


@dataclass
class MarginViolated(RuntimeError):
    t: float
    side: str
    margin: float

    def __str__(self) -> str:
        return f"Front came within {self.margin:g} units of the {self.side} window edge at t = {self.t:.6g}"


##########
# States #
##########
def _signal_value(signal: ValueSignal, t: float) -> float:
    return float(signal(t)) if callable(signal) else float(signal)


@dataclass(frozen=True)
class Boundary:
    """Ghost values outside the window: copies of the edge values (clamp) or prescribed signals (fixed)"""
    kind: BOUNDARY_KIND = 'clamp'
    left: Optional[ValueSignal] = None
    right: Optional[ValueSignal] = None

    @classmethod
    def clamp(cls) -> 'Boundary':
        return cls('clamp')

    @classmethod
    def fixed(cls, left: ValueSignal, right: ValueSignal) -> 'Boundary':
        return cls('fixed', left, right)

    def ghosts(self, t: float, u: np.ndarray, shift: int) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == 'clamp':
            return np.full(shift, u[0]), np.full(shift, u[-1])
        return np.full(shift, _signal_value(self.left, t)), np.full(shift, _signal_value(self.right, t))


@dataclass(frozen=True)
class LatticeState:
    """Values u_lo, ..., u_hi of the lattice solution at time t"""
    lo: int
    hi: int
    values: np.ndarray
    t: float = 0.
    boundary: Boundary = field(default_factory=Boundary)

    def __post_init__(self):
        object.__setattr__(self, 'values', np.asarray(self.values, dtype=float))
        assert self.hi - self.lo >= 4, 'Window should contain at least 5 sites'
        assert len(self.values) == self.n_points, \
            f"Expected {self.n_points} values for the window [{self.lo}, {self.hi}], got {len(self.values)}"

    @property
    def shift(self) -> int:
        """Index shift equivalent to one unit in space"""
        return 1

    @property
    def n_points(self) -> int:
        return (self.hi - self.lo) * self.shift + 1

    @property
    def positions(self) -> np.ndarray:
        return self.lo + np.arange(self.n_points) / self.shift

    def with_values(self, values: npt.ArrayLike, t: float) -> 'LatticeState':
        return replace(self, values=np.asarray(values, dtype=float), t=float(t))

    def reflected(self) -> 'LatticeState':
        """Mirror image x -> -x of the state (boundary signals swap sides)"""
        return replace(self, lo=-self.hi, hi=-self.lo, values=self.values[::-1].copy(),
                       boundary=replace(self.boundary, left=self.boundary.right, right=self.boundary.left))


@dataclass(frozen=True)
class GridState(LatticeState):
    """Values on the real line sampled at spacing 1/subcells over [lo, hi]"""
    subcells: int = 16

    def __post_init__(self):
        assert self.subcells >= 1, 'Number of sub-cells per unit should be positive'
        super().__post_init__()

    @property
    def shift(self) -> int:
        return self.subcells


def lattice_state(lo: int, hi: int, fill: Union[float, Callable[[np.ndarray], np.ndarray]], t: float = 0.,
                  boundary: Optional[Boundary] = None, subcells: Optional[int] = None) -> LatticeState:
    """Build a LatticeState (or a GridState when `subcells` is given) from a constant or a function of position"""
    boundary = Boundary() if boundary is None else boundary
    n = (hi - lo) * (subcells or 1) + 1
    positions = lo + np.arange(n) / (subcells or 1)
    values = fill(positions) if callable(fill) else np.full(n, float(fill))
    if subcells is None:
        return LatticeState(lo, hi, values, t, boundary)
    return GridState(lo, hi, values, t, boundary, subcells)


#######################
# Right-hand side     #
#######################
def _rhs_values(t: float, u: np.ndarray, shift: int, boundary: Boundary, reaction: Reaction) -> np.ndarray:
    left, right = boundary.ghosts(t, u, shift)
    padded = np.concatenate([left, u, right])
    neighbours = padded[2 * shift:] + padded[:-2 * shift]
    return (neighbours - 2 * u) + u * eval_reaction(reaction, t, u)


def rhs(state: LatticeState, reaction: Reaction) -> np.ndarray:
    """Time derivative of the state: discrete Laplacian with unit shifts plus the reaction term

    Examples
    --------
    A unit spike e_0 under the logistic reaction with r = 1 (clamp boundary):
    rhs at 0 --> -2 + f(t, 1) = -2, rhs at +-1 --> 1
    """
    return _rhs_values(state.t, state.values, state.shift, state.boundary, reaction)


def _rk4(t: float, u: np.ndarray, dt: float, shift: int, boundary: Boundary, reaction: Reaction) -> np.ndarray:
    k1 = _rhs_values(t, u, shift, boundary, reaction)
    k2 = _rhs_values(t + dt / 2, u + dt / 2 * k1, shift, boundary, reaction)
    k3 = _rhs_values(t + dt / 2, u + dt / 2 * k2, shift, boundary, reaction)
    k4 = _rhs_values(t + dt, u + dt * k3, shift, boundary, reaction)
    return u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def dt_max(reaction: Reaction, value_sup: float) -> float:
    """Explicit stability limit 0.25 / (4 + L) with L = sup|f| + M0 * M0_tilde on the run's value range"""
    u_max = max(reaction.M0, value_sup)
    lipschitz = sup_abs_growth(reaction, u_max) + reaction.M0 * reaction.M0_tilde
    return STABILITY_FACTOR / (4 + lipschitz)


def _clip_negatives(u: np.ndarray) -> tuple[int, float]:
    negative = u < 0
    if not negative.any():
        return 0, 0.
    worst = float(u[negative].min())
    u[negative] = 0.
    return int(negative.sum()), worst


def step_rk4(state: LatticeState, reaction: Reaction, dt: float = DEFAULT_DT) -> LatticeState:
    """One RK4 step of length dt; round-off negatives are clipped to zero"""
    limit = dt_max(reaction, float(state.values.max(initial=0.)))
    if dt > limit:
        raise StepSizeError(dt, limit)
    u = _rk4(state.t, state.values, dt, state.shift, state.boundary, reaction)
    n_clipped, worst = _clip_negatives(u)
    if worst < NEGATIVE_TOL:
        logger.warning('Clipped %d negative values (worst %.3g) at t = %.6g', n_clipped, worst, state.t + dt)
    return state.with_values(u, state.t + dt)


###############
# Integration #
###############
@dataclass(frozen=True)
class IntegrationReport:
    steps: int
    dt: float
    dt_max: float
    clipped: int
    worst_negative: float

    def as_dict(self) -> dict[str, float]:
        return {'steps': self.steps, 'dt': self.dt, 'dt_max': self.dt_max,
                'clipped': self.clipped, 'worst_negative': self.worst_negative}


@dataclass(frozen=True)
class Trajectory:
    """Recorded slices values[k] = u(., times[k]) of a run"""
    times: np.ndarray
    positions: np.ndarray
    values: np.ndarray
    final: LatticeState
    report: IntegrationReport

    def to_frame(self, position_name: str = 'x') -> pd.DataFrame:
        """Long table with columns (t, x, u)"""
        return pd.DataFrame({
            't': np.repeat(self.times, len(self.positions)),
            position_name: np.tile(self.positions, len(self.times)),
            'u': self.values.ravel(),
        })

    def at(self, t: float) -> np.ndarray:
        return self.values[int(np.argmin(np.abs(self.times - t)))]


@dataclass
class MarginGuard:
    """Abort a run when `level` is reached within `margin` units of a window edge"""
    margin: float
    level: float
    shift: int = 1
    sides: tuple[str, ...] = ('left', 'right')

    def __call__(self, t: float, u: np.ndarray):
        n = max(1, int(round(self.margin * self.shift)))
        if 'left' in self.sides and u[:n].max() >= self.level:
            raise MarginViolated(t, 'left', self.margin)
        if 'right' in self.sides and u[-n:].max() >= self.level:
            raise MarginViolated(t, 'right', self.margin)


def _time_grid(t0: float, t_end: float, dt: float, stride: int,
               output_times: Optional[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    """Step times from t0 to t_end and the mask of those to record"""
    n_full = int(np.floor((t_end - t0) / dt + 1e-9))
    grid = t0 + dt * np.arange(n_full + 1)
    if t_end - grid[-1] > 1e-12:
        grid = np.append(grid, t_end)
    grid[-1] = t_end

    if output_times is None:
        record = np.zeros(len(grid), dtype=bool)
        record[::stride] = True
        record[-1] = True
        return grid, record

    outs = np.unique(np.asarray(output_times, dtype=float))
    assert outs.min() >= t0 - 1e-12 and outs.max() <= t_end + 1e-12, 'Output times should lie inside the run'
    idxs = np.clip(np.searchsorted(grid, outs), 0, len(grid) - 1)
    snapped = []
    for out, idx in zip(outs, idxs):
        near = min((j for j in (idx - 1, idx) if 0 <= j < len(grid)), key=lambda j: abs(grid[j] - out))
        if abs(grid[near] - out) <= 1e-9:
            grid[near] = out
        else:
            snapped.append(out)
    grid = np.union1d(grid, snapped)
    return grid, np.isin(grid, outs)


def integrate(
        state: LatticeState,
        reaction: Reaction,
        t_end: float,
        dt: float = DEFAULT_DT,
        stride: int = 1,
        output_times: Optional[Sequence[float]] = None,
        monitor: Optional[Callable[[float, np.ndarray], None]] = None,
        use_tqdm: bool = False,
) -> Trajectory:
    """Integrate the lattice equation from state.t to t_end with the fixed-step RK4 scheme

    Parameters
    ----------
    state: LatticeState
        Initial state (a GridState integrates the shift-by-one equation on the real line)
    reaction: Reaction
    t_end: float
        Final time; the last step is shortened to land on it exactly
    dt: float
        Time step. Should not exceed `dt_max` of the run (otherwise StepSizeError is raised)
    stride: int
        Record every `stride`-th step (plus the final state). Ignored when `output_times` are given
    output_times: Sequence[float], optional
        Exact recording times; steps are split to land on them
    monitor: Callable[[float, np.ndarray], None], optional
        Called after every step with (t, values); may raise (e.g. MarginGuard)
    use_tqdm: bool
        A flag whether to visualise the progress bar over the steps

    Returns
    -------
    trajectory: Trajectory
    """
    assert t_end >= state.t, 'Final time should not precede the initial one'
    initial_sup = float(state.values.max(initial=0.))
    limit = dt_max(reaction, initial_sup)
    if dt > limit:
        raise StepSizeError(dt, limit)
    logger.info('Integrating on %d points up to t = %g with dt = %g (dt_max = %.4g)', len(state.values), t_end, dt, limit)
    threshold = BLOWUP_FACTOR * max(reaction.M0, initial_sup)

    grid, record = _time_grid(state.t, t_end, dt, stride, output_times)
    u = state.values.copy()
    times, slices = [], []
    if record[0]:
        times.append(grid[0])
        slices.append(u.copy())

    n_clipped, worst = 0, 0.
    for k in tqdm(range(len(grid) - 1), disable=not use_tqdm, desc='RK4 steps'):
        u = _rk4(grid[k], u, grid[k + 1] - grid[k], state.shift, state.boundary, reaction)
        n_step, worst_step = _clip_negatives(u)
        n_clipped, worst = n_clipped + n_step, min(worst, worst_step)
        u_max = u.max()
        if not u_max <= threshold:
            raise BlowUp(float(grid[k + 1]), float(u_max), threshold)
        if monitor is not None:
            monitor(float(grid[k + 1]), u)
        if record[k + 1]:
            times.append(grid[k + 1])
            slices.append(u.copy())

    if worst < NEGATIVE_TOL:
        logger.warning('Clipped %d negative values during the run (worst %.3g)', n_clipped, worst)
    elif n_clipped:
        logger.debug('Clipped %d round-off negative values during the run', n_clipped)

    report = IntegrationReport(len(grid) - 1, dt, limit, n_clipped, worst)
    return Trajectory(np.asarray(times), state.positions, np.vstack(slices), state.with_values(u, t_end), report)


######################
# Entire solution u+ #
######################
@dataclass(frozen=True)
class _ScalarFlow:
    """Piecewise dense output of the scalar ODE u' = u f(t, u)"""
    starts: np.ndarray
    pieces: tuple

    def __call__(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        assert t_arr.min() >= self.starts[0] - 1e-9, 'Entire solution evaluated before its pull-back start'
        idxs = np.clip(np.searchsorted(self.starts, t_arr, side='right') - 1, 0, len(self.pieces) - 1)
        out = np.empty(t_arr.shape)
        for idx in np.unique(idxs):
            mask = idxs == idx
            out[mask] = self.pieces[idx](t_arr[mask])[0]
        return float(out[0]) if np.ndim(t) == 0 else out


def _solve_scalar(reaction: Reaction, start: float, end: float, u0: float) -> _ScalarFlow:
    bounds = np.concatenate([[start], reaction.forcing.breakpoints(start, end), [end]])
    starts, pieces, u = [], [], u0
    for a, b in zip(bounds[:-1], bounds[1:]):
        last_inside = np.nextafter(b, a)

        def growth(t, y, a=a, last_inside=last_inside):
            return y * eval_reaction(reaction, min(max(t, a), last_inside), y)

        sol = solve_ivp(growth, (a, b), [u], method='DOP853', rtol=ODE_RTOL, atol=ODE_ATOL, dense_output=True)
        assert sol.success, f"Scalar ODE failed on [{a}, {b}]: {sol.message}"
        starts.append(a)
        pieces.append(sol.sol)
        u = float(sol.y[0, -1])
    return _ScalarFlow(np.asarray(starts), tuple(pieces))


@dataclass(frozen=True)
class EntireSolution:
    """Spatially homogeneous entire positive solution u+(t), callable on [start, times[-1] + 1]"""
    times: np.ndarray
    values: np.ndarray
    depth: float
    converged: bool
    disagreement: float
    monotone_in_depth: bool
    reaction: Reaction = field(repr=False)
    flow: _ScalarFlow = field(repr=False)

    def __call__(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        return self.flow(t)

    def derivative(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        u = self(t)
        return u * eval_reaction(self.reaction, t, u)

    @property
    def inf(self) -> float:
        return float(self.values.min())

    @property
    def sup(self) -> float:
        return float(self.values.max())

    def ode_residual(self, h: float = RESIDUAL_STEP) -> float:
        """max |u' - u f(t, u)| on the sample grid with u' by fourth order central differences

        Grid points within 2h of a jump of the forcing are skipped.
        """
        ts = self.times
        jumps = self.reaction.forcing.breakpoints(ts[0] - 1, ts[-1] + 1)
        if len(jumps):
            ts = ts[np.abs(ts[:, None] - jumps[None, :]).min(axis=1) > 2 * h]
        fd = (-self(ts + 2 * h) + 8 * self(ts + h) - 8 * self(ts - h) + self(ts - 2 * h)) / (12 * h)
        u = self(ts)
        return float(np.abs(fd - u * eval_reaction(self.reaction, ts, u)).max())


def pullback_uplus(
        reaction: Reaction,
        t_grid: Sequence[float],
        depth_ladder: Sequence[float] = DEFAULT_DEPTH_LADDER,
) -> EntireSolution:
    """Entire solution u+(t) = lim u(t; t0 - depth, M0) as the depth grows

    Parameters
    ----------
    reaction: Reaction
    t_grid: Sequence[float]
        Increasing sample times; the pull-back starts `depth` before the first of them
    depth_ladder: Sequence[float]
        Increasing depths. The deepest run is returned

    Returns
    -------
    uplus: EntireSolution
        `converged` when the last two depths agree within 1e-9 on the grid;
        `monotone_in_depth` when deeper runs never exceed shallower ones.

    Notes
    -----
    Each depth solves u' = u f(t, u) with DOP853 (rtol 1e-12, atol 1e-14), piecewise between jumps of the forcing.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    assert len(t_grid) and np.all(np.diff(t_grid) >= 0), 'Time grid should be nonempty and sorted'
    assert list(depth_ladder) == sorted(depth_ladder) and depth_ladder[0] > 0, 'Depth ladder should be increasing'

    flows, samples = [], []
    for depth in depth_ladder:
        flow = _solve_scalar(reaction, t_grid[0] - depth, t_grid[-1] + 1, reaction.M0)
        flows.append(flow)
        samples.append(flow(t_grid))

    monotone = all(np.all(deep <= shallow + 1e-12) for shallow, deep in zip(samples[:-1], samples[1:]))
    disagreement = float(np.abs(samples[-1] - samples[-2]).max()) if len(samples) > 1 else np.inf
    if disagreement > PULLBACK_FLAG:
        logger.warning('Pull-back did not converge: depths %g and %g disagree by %.3g',
                       depth_ladder[-2] if len(depth_ladder) > 1 else np.nan, depth_ladder[-1], disagreement)
    if not monotone:
        logger.warning('Pull-back runs are not monotone in depth')

    return EntireSolution(t_grid, samples[-1], float(depth_ladder[-1]), disagreement <= PULLBACK_AGREEMENT,
                          disagreement, monotone, reaction, flows[-1])


###############
# Diagnostics #
###############
def part_metric(u: npt.ArrayLike, v: npt.ArrayLike) -> float:
    """Part metric rho(u, v) = max_i |ln u_i - ln v_i| of two strictly positive states

    Examples
    --------
    part_metric([1, 4], [2, 1]) --> ln 4
    """
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if (u <= 0).any() or (v <= 0).any():
        raise UndefinedMetric('Part metric is defined for strictly positive states only')
    return float(np.abs(np.log(u) - np.log(v)).max())


@dataclass(frozen=True)
class SignChangeProfile:
    """Number of sign changes of u - v and, for a single (+ then -) crossing, the last index j_t with u >= v

    j_t is +inf when u >= v everywhere, -inf when u <= v everywhere (with u != v) and None otherwise.
    """
    count: int
    j_t: Optional[float]


def sign_change_profile(u: npt.ArrayLike, v: npt.ArrayLike, atol: float = 0.) -> SignChangeProfile:
    """Count the strict sign changes of (u_j - v_j) ignoring zeros (entries within `atol` of zero)

    Examples
    --------
    u - v = [+, +, -, -] --> count 1, j_t = 1
    u - v = [+, -, +] --> count 2, j_t = None
    """
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    assert u.shape == v.shape, 'States should live on the same window'
    idxs, signs = nonzero_signs(u - v, atol)
    count = int((signs[1:] != signs[:-1]).sum())
    if len(signs) == 0 or (count == 0 and signs[0] > 0):
        return SignChangeProfile(count, np.inf)
    if count == 0:
        return SignChangeProfile(count, -np.inf)
    if count == 1 and signs[0] > 0:
        first_negative = idxs[np.argmax(signs < 0)]
        return SignChangeProfile(count, float(first_negative - 1))
    return SignChangeProfile(count, None)


def probe_continuity(
        reaction: Reaction,
        u0_sequence: Sequence[LatticeState],
        u0_limit: LatticeState,
        t: float,
        window: tuple[float, float],
        dt: float = DEFAULT_DT,
) -> pd.DataFrame:
    """Deviation at time t, over the probe window, of solutions started at u0_sequence from the one started at u0_limit

    Returns
    -------
    report: pd.DataFrame
        One row per datum n with columns
        input_distance (sup over the lattice), window_input_distance (sup over the probe window),
        deviation (sup over the probe window at time t) and
        gronwall_bound = exp(C t) input_distance with C = 2 + sup|f| + lip
    """
    in_window = (u0_limit.positions >= window[0]) & (u0_limit.positions <= window[1])
    assert in_window.any(), 'Probe window does not intersect the lattice'
    u_max = max([reaction.M0, float(u0_limit.values.max())] + [float(s.values.max()) for s in u0_sequence])
    growth_const = 2 + sup_abs_growth(reaction, u_max) + u_max * reaction.M0_tilde

    t_end = u0_limit.t + t
    reference = integrate(u0_limit, reaction, t_end, dt).final.values
    rows = []
    for n, datum in enumerate(u0_sequence):
        assert datum.values.shape == u0_limit.values.shape, 'All data should live on the same lattice'
        evolved = integrate(datum, reaction, t_end, dt).final.values
        input_distance = float(np.abs(datum.values - u0_limit.values).max())
        rows.append({
            'n': n, 'input_distance': input_distance,
            'window_input_distance': float(np.abs(datum.values - u0_limit.values)[in_window].max()),
            'deviation': float(np.abs(evolved - reference)[in_window].max()),
            'gronwall_bound': float(np.exp(growth_const * t) * input_distance),
        })
    return pd.DataFrame(rows)
