"""Time-heterogeneous growth rate r(t) = f(t, 0) and its long-run statistics

The proposed objects are:
* Forcing: the four families of growth rates (constant, periodic, quasiperiodic, switching)
* AffineSignal: signals offset + scale * r(t), e.g. the instantaneous wave speed of a front
* windowed_average / estimate_averages / block_average_inf: finite-window Birkhoff averages
* build_corrector: the bounded corrector A(t) = alpha + int_0^t (Bbar - B) of a signal B
"""
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Literal, Optional, Protocol, Sequence, Union, get_args

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.integrate import simpson
from tqdm.auto import tqdm

logger = logging.getLogger(__name__)

FORCING_KIND = Literal['constant', 'periodic', 'quasiperiodic', 'switching']
AVERAGE_NAME = Literal['fbar_inf', 'fbar_sup', 'fbar_inf_plus', 'fbar_sup_plus']

DEFAULT_HORIZON = 400.
DEFAULT_WINDOWS = (10., 25., 50., 100.)
STARTS_PER_WINDOW = 50  # start-time grid step is T / STARTS_PER_WINDOW
CONVERGENCE_RTOL = 1e-2
SIMPSON_MAX_STEP = 0.01
CORRECTOR_STEP = 0.01
CORRECTOR_CAP = 1e3
SWITCHING_CHUNK = 4096  # segments drawn per generator key


@dataclass
class UnboundedCorrector(ArithmeticError):
    sup_abs: float
    cap: float

    def __str__(self) -> str:
        return f"Corrector is unbounded on the horizon: sup|A| = {self.sup_abs:.6g} exceeds the cap {self.cap:.6g}. " \
               f"The signal is likely outside of the constructive (mean-corrected) class"


@dataclass
class NonPositiveMean(ValueError):
    fbar_inf: float

    def __str__(self) -> str:
        return f"The lower long-run average of the signal should be positive, got {self.fbar_inf:.6g}"


class TimeSignal(Protocol):
    """Anything that can be evaluated and integrated exactly in time"""
    def __call__(self, t: npt.ArrayLike) -> Union[float, np.ndarray]: ...

    def integral(self, s: npt.ArrayLike, t: npt.ArrayLike) -> Union[float, np.ndarray]: ...

    def window_mean(self, s: npt.ArrayLike, T: float) -> Union[float, np.ndarray]: ...

    @property
    def long_run_mean(self) -> Optional[float]: ...

    @property
    def is_smooth(self) -> bool: ...

    def value_range(self) -> tuple[float, float]: ...

    def characteristic_step(self) -> float: ...


#######################
# Switching machinery #
#######################
def _zigzag(k: int) -> int:
    """Map an integer to a non-negative one injectively: 0, -1, 1, -2, ... -> 0, 1, 2, 3, ..."""
    return 2 * k if k >= 0 else -2 * k - 1


@lru_cache(maxsize=1024)
def _switching_chunk(seed: int, chunk: int, levels: tuple[float, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Levels of the segments SWITCHING_CHUNK*chunk ... SWITCHING_CHUNK*(chunk+1)-1 and their inner cumulative sums"""
    rng = np.random.default_rng([seed, _zigzag(chunk)])
    values = np.asarray(levels)[rng.integers(len(levels), size=SWITCHING_CHUNK)]
    values.setflags(write=False)
    cumsum = np.concatenate([[0.], np.cumsum(values)])
    cumsum.setflags(write=False)
    return values, cumsum


@lru_cache(maxsize=4096)
def _chunk_prefix(seed: int, chunk: int, levels: tuple[float, ...]) -> float:
    """Sum of all segment levels between segment 0 and the first segment of `chunk` (signed for negative chunks)"""
    if chunk == 0:
        return 0.
    if chunk > 0:
        return _chunk_prefix(seed, chunk - 1, levels) + _switching_chunk(seed, chunk - 1, levels)[1][-1]
    return _chunk_prefix(seed, chunk + 1, levels) - _switching_chunk(seed, chunk, levels)[1][-1]


def _segment_levels(seed: int, segments: np.ndarray, levels: tuple[float, ...]) -> np.ndarray:
    chunks, offsets = np.divmod(segments, SWITCHING_CHUNK)
    out = np.empty(segments.shape, dtype=float)
    for chunk in np.unique(chunks):
        mask = chunks == chunk
        out[mask] = _switching_chunk(seed, int(chunk), levels)[0][offsets[mask]]
    return out


def _segment_prefix(seed: int, segments: np.ndarray, levels: tuple[float, ...]) -> np.ndarray:
    """Sum of levels of segments 0..k-1 (minus the sum of k..-1 when k < 0)"""
    chunks, offsets = np.divmod(segments, SWITCHING_CHUNK)
    out = np.empty(segments.shape, dtype=float)
    for chunk in np.unique(chunks):
        mask = chunks == chunk
        # walk to the chunk from 0 one step at a time so that the recursion depth stays bounded
        for c in range(0, int(chunk), 1 if chunk > 0 else -1):
            _chunk_prefix(seed, c, levels)
        out[mask] = _chunk_prefix(seed, int(chunk), levels) + _switching_chunk(seed, int(chunk), levels)[1][offsets[mask]]
    return out


###########
# Forcing #
###########
@dataclass(frozen=True)
class Forcing:
    """Growth rate r(t) = f(t, 0) from one of the supported families

    Use the constructors ``Forcing.constant``, ``Forcing.periodic``, ``Forcing.quasiperiodic``
    and ``Forcing.switching`` rather than filling the fields by hand.

    Notes
    -----
    * periodic: r(t) = r0 + amplitude * sin(2 pi t / period + phase)
    * quasiperiodic: r(t) = r0 + sum_k a_k sin(2 pi nu_k t) for modes (a_k, nu_k)
    * switching: r is constant on segments [k dwell, (k+1) dwell) with the level drawn from `levels`
      by a generator keyed with (seed, chunk of k). Same seed gives the same signal on the whole line.
    """
    kind: FORCING_KIND
    r0: float = 0.
    amplitude: float = 0.
    period: float = 1.
    phase: float = 0.
    modes: tuple[tuple[float, float], ...] = ()
    levels: tuple[float, ...] = ()
    dwell: float = 1.
    seed: int = 0

    def __post_init__(self):
        assert self.kind in get_args(FORCING_KIND), \
            f"Unknown forcing kind {self.kind}. Supported kinds are: {get_args(FORCING_KIND)}"
        assert self.period > 0, 'Period of the forcing should be positive'
        assert self.dwell > 0, 'Dwell time of the switching forcing should be positive'
        if self.kind == 'switching':
            assert len(self.levels) > 0, 'Switching forcing needs at least one level'

    @classmethod
    def constant(cls, r0: float) -> 'Forcing':
        return cls('constant', r0=float(r0))

    @classmethod
    def periodic(cls, r0: float, amplitude: float, period: float, phase: float = 0.) -> 'Forcing':
        return cls('periodic', r0=float(r0), amplitude=float(amplitude), period=float(period), phase=float(phase))

    @classmethod
    def quasiperiodic(cls, r0: float, modes: Sequence[tuple[float, float]]) -> 'Forcing':
        modes = tuple((float(a), float(nu)) for a, nu in modes)
        assert all(nu > 0 for _, nu in modes), 'Frequencies of quasiperiodic modes should be positive'
        return cls('quasiperiodic', r0=float(r0), modes=modes)

    @classmethod
    def switching(cls, levels: Sequence[float], dwell: float, seed: int) -> 'Forcing':
        return cls('switching', levels=tuple(float(lvl) for lvl in levels), dwell=float(dwell), seed=int(seed))

    def __call__(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        t_arr = np.asarray(t, dtype=float)
        if self.kind == 'constant':
            vals = np.full(t_arr.shape, self.r0)
        elif self.kind == 'periodic':
            vals = self.r0 + self.amplitude * np.sin(2 * np.pi * t_arr / self.period + self.phase)
        elif self.kind == 'quasiperiodic':
            vals = np.full(t_arr.shape, self.r0)
            for a, nu in self.modes:
                vals = vals + a * np.sin(2 * np.pi * nu * t_arr)
        else:  # switching
            segments = np.floor(t_arr / self.dwell).astype(np.int64)
            vals = _segment_levels(self.seed, np.atleast_1d(segments), self.levels).reshape(t_arr.shape)
        return float(vals) if vals.ndim == 0 else vals

    def antiderivative(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        """Exact primitive F(t) = int_0^t r(tau) dtau"""
        t_arr = np.asarray(t, dtype=float)
        if self.kind == 'constant':
            vals = self.r0 * t_arr
        elif self.kind == 'periodic':
            omega = 2 * np.pi / self.period
            vals = self.r0 * t_arr - self.amplitude / omega * (np.cos(omega * t_arr + self.phase) - np.cos(self.phase))
        elif self.kind == 'quasiperiodic':
            vals = self.r0 * t_arr
            for a, nu in self.modes:
                omega = 2 * np.pi * nu
                vals = vals - a / omega * (np.cos(omega * t_arr) - 1)
        else:  # switching
            t_flat = np.atleast_1d(t_arr)
            segments = np.floor(t_flat / self.dwell).astype(np.int64)
            prefix = _segment_prefix(self.seed, segments, self.levels)
            current = _segment_levels(self.seed, segments, self.levels)
            vals = (self.dwell * prefix + (t_flat - segments * self.dwell) * current).reshape(t_arr.shape)
        return float(vals) if np.ndim(vals) == 0 else vals

    def integral(self, s: npt.ArrayLike, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        """Exact integral of r over [s, t]"""
        if self.kind == 'constant':
            vals = self.r0 * (np.asarray(t, dtype=float) - np.asarray(s, dtype=float))
            return float(vals) if np.ndim(vals) == 0 else vals
        return self.antiderivative(t) - self.antiderivative(s)

    def window_mean(self, s: npt.ArrayLike, T: float) -> Union[float, np.ndarray]:
        """(1/T) int_s^{s+T} r computed from the exact primitive"""
        if self.kind == 'constant':
            vals = np.full(np.shape(s), self.r0)
            return float(vals) if vals.ndim == 0 else vals
        s = np.asarray(s, dtype=float)
        return self.integral(s, s + T) / T

    @property
    def long_run_mean(self) -> Optional[float]:
        """Exact mean value of r over long windows, None when the family has no closed form for it"""
        return None if self.kind == 'switching' else self.r0

    @property
    def is_smooth(self) -> bool:
        return self.kind != 'switching'

    def value_range(self) -> tuple[float, float]:
        if self.kind == 'constant':
            return self.r0, self.r0
        if self.kind == 'periodic':
            return self.r0 - abs(self.amplitude), self.r0 + abs(self.amplitude)
        if self.kind == 'quasiperiodic':
            spread = sum(abs(a) for a, _ in self.modes)
            return self.r0 - spread, self.r0 + spread
        return min(self.levels), max(self.levels)

    def characteristic_step(self) -> float:
        """Quadrature step resolving the signal: min(T_p/64, 0.01) for smooth families, the dwell for switching"""
        if self.kind == 'periodic':
            return min(self.period / 64, SIMPSON_MAX_STEP)
        if self.kind == 'quasiperiodic' and self.modes:
            return min(1 / (64 * max(nu for _, nu in self.modes)), SIMPSON_MAX_STEP)
        if self.kind == 'switching':
            return self.dwell
        return SIMPSON_MAX_STEP

    def breakpoints(self, s: float, t: float) -> np.ndarray:
        """Times in (s, t) where r jumps (switching family only)"""
        if self.kind != 'switching':
            return np.array([])
        first, last = np.floor(s / self.dwell) + 1, np.ceil(t / self.dwell) - 1
        return np.arange(first, last + 1) * self.dwell

    def describe(self) -> dict[str, object]:
        """Flat key/value description used in reports"""
        desc = {'forcing_kind': self.kind}
        if self.kind in {'constant', 'periodic', 'quasiperiodic'}:
            desc['forcing_r0'] = self.r0
        if self.kind == 'periodic':
            desc.update(forcing_amplitude=self.amplitude, forcing_period=self.period, forcing_phase=self.phase)
        if self.kind == 'quasiperiodic':
            desc['forcing_modes'] = ';'.join(f"{a}@{nu}" for a, nu in self.modes)
        if self.kind == 'switching':
            desc.update(forcing_levels=';'.join(map(str, self.levels)), forcing_dwell=self.dwell, forcing_seed=self.seed)
        return desc


def eval_forcing(forcing: Forcing, t: npt.ArrayLike) -> Union[float, np.ndarray]:
    """Evaluate the growth rate r(t) = f(t, 0)

    Examples
    --------
    eval_forcing(Forcing.periodic(1, 0.5, 1), 0.25) --> 1.5
    """
    return forcing(t)


@dataclass(frozen=True)
class AffineSignal:
    """Time signal offset + scale * base(t) inheriting the exact integrals of its base

    Both the instantaneous wave speed c(t) = (e^-mu + e^mu - 2 + r(t)) / mu
    and the correction signal of the sub-solution are of this form.
    """
    base: Forcing
    offset: float = 0.
    scale: float = 1.

    def __call__(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        return self.offset + self.scale * self.base(t)

    def integral(self, s: npt.ArrayLike, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        length = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
        vals = self.offset * length + self.scale * self.base.integral(s, t)
        return float(vals) if np.ndim(vals) == 0 else vals

    def running_integral(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        """int_0^t of the signal"""
        return self.integral(0., t)

    def window_mean(self, s: npt.ArrayLike, T: float) -> Union[float, np.ndarray]:
        return self.offset + self.scale * self.base.window_mean(s, T)

    @property
    def long_run_mean(self) -> Optional[float]:
        base_mean = self.base.long_run_mean
        return None if base_mean is None else self.offset + self.scale * base_mean

    @property
    def is_smooth(self) -> bool:
        return self.base.is_smooth

    def value_range(self) -> tuple[float, float]:
        lo, hi = self.base.value_range()
        lo, hi = self.offset + self.scale * lo, self.offset + self.scale * hi
        return min(lo, hi), max(lo, hi)

    def characteristic_step(self) -> float:
        return self.base.characteristic_step()


############
# Averages #
############
@dataclass(frozen=True)
class AverageReport:
    """Finite-horizon estimates of the lower/upper long-run averages of a signal

    fbar_T holds the block statistic inf_k (1/T) int_{(k-1)T}^{kT} per window of `windows`.
    """
    horizon: float
    windows: tuple[float, ...]
    fbar_T: tuple[float, ...]
    fbar_inf: float
    fbar_sup: float
    fbar_inf_plus: float
    fbar_sup_plus: float
    converged: dict[str, bool] = field(default_factory=dict)
    per_window: Optional[pd.DataFrame] = field(default=None, compare=False, repr=False)

    @property
    def all_converged(self) -> bool:
        return all(self.converged.values())

    def as_row(self) -> dict[str, object]:
        row = {'horizon': self.horizon, 'windows': ';'.join(map(str, self.windows)),
               'fbar_inf': self.fbar_inf, 'fbar_sup': self.fbar_sup,
               'fbar_inf_plus': self.fbar_inf_plus, 'fbar_sup_plus': self.fbar_sup_plus}
        row.update({f"fbar_T_{T:g}": v for T, v in zip(self.windows, self.fbar_T)})
        row.update({f"converged_{k}": v for k, v in self.converged.items()})
        return row

    def to_frame(self) -> pd.DataFrame:
        """One-row DataFrame with named columns"""
        return pd.DataFrame([self.as_row()])


def windowed_average(forcing: TimeSignal, s: float, T: float) -> float:
    """Mean value (1/T) int_s^{s+T} r(tau) dtau

    Smooth families are integrated by composite Simpson with step min(T_p/64, 0.01),
    refined once and Richardson-extrapolated; switching signals are summed segment by segment (exact).
    """
    assert T > 0, 'Window length T should be positive'
    if not forcing.is_smooth or np.ptp(forcing.value_range()) == 0:
        return float(forcing.window_mean(s, T))

    n_steps = int(np.ceil(T / forcing.characteristic_step()))
    n_steps += n_steps % 2
    coarse_ts, fine_ts = np.linspace(s, s + T, n_steps + 1), np.linspace(s, s + T, 2 * n_steps + 1)
    coarse, fine = simpson(forcing(coarse_ts), x=coarse_ts), simpson(forcing(fine_ts), x=fine_ts)
    return float((fine + (fine - coarse) / 15) / T)


def _start_grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(np.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def estimate_averages(
        forcing: TimeSignal,
        horizon: float = DEFAULT_HORIZON,
        windows: Sequence[float] = DEFAULT_WINDOWS,
        use_tqdm: bool = False
) -> AverageReport:
    """Estimate the lower and upper long-run averages of `forcing` by window scans

    Parameters
    ----------
    forcing: TimeSignal
        A Forcing or any signal with exact integrals (e.g. AffineSignal)
    horizon: float
        Start times are scanned over [-horizon, horizon - T] (full-line averages)
        and over [0, horizon - T] (forward averages)
    windows: Sequence[float]
        Increasing window lengths; the reported values come from the largest one
    use_tqdm: bool
        A flag whether to visualise the progress bar over the windows

    Returns
    -------
    report: AverageReport
        Includes a convergence flag per average: the last two windows agree within 1e-2 relative.

    Notes
    -----
    Forward averages are scanned on a subset of the full-line start grid,
    so fbar_inf <= fbar_inf_plus <= fbar_sup_plus <= fbar_sup holds exactly.
    """
    windows = tuple(sorted(float(T) for T in windows))
    assert windows and windows[0] > 0, 'Windows should be positive'
    assert windows[-1] <= horizon / 4, f"The largest window ({windows[-1]}) should not exceed horizon/4 ({horizon / 4})"

    rows = []
    for T in tqdm(windows, disable=not use_tqdm, desc='Window scans'):
        starts = _start_grid(-horizon, horizon - T, T / STARTS_PER_WINDOW)
        means = np.asarray(forcing.window_mean(starts, T), dtype=float) * np.ones(len(starts))
        fwd = means[starts >= -1e-12]
        rows.append({'window': T, 'fbar_T': block_average_inf(forcing, T, horizon),
                     'fbar_inf': means.min(), 'fbar_sup': means.max(),
                     'fbar_inf_plus': fwd.min(), 'fbar_sup_plus': fwd.max()})
    per_window = pd.DataFrame(rows)

    last = per_window.iloc[-1]
    converged = {}
    for name in get_args(AVERAGE_NAME):
        if len(per_window) < 2:
            converged[name] = False
            continue
        prev = per_window.iloc[-2][name]
        converged[name] = bool(abs(last[name] - prev) <= CONVERGENCE_RTOL * max(abs(last[name]), 1e-12))
    if not all(converged.values()):
        logger.warning('Window averages did not converge: %s', [k for k, v in converged.items() if not v])

    return AverageReport(
        horizon=float(horizon), windows=windows, fbar_T=tuple(per_window['fbar_T'].tolist()),
        fbar_inf=float(last['fbar_inf']), fbar_sup=float(last['fbar_sup']),
        fbar_inf_plus=float(last['fbar_inf_plus']), fbar_sup_plus=float(last['fbar_sup_plus']),
        converged=converged, per_window=per_window,
    )


def block_average_inf(forcing: TimeSignal, T: float, horizon: float = DEFAULT_HORIZON) -> float:
    """Block statistic inf_k (1/T) int_{(k-1)T}^{kT} r over k = 1..floor(horizon/T)"""
    assert 0 < T <= horizon, 'Block length should be positive and not exceed the horizon'
    n_blocks = int(np.floor(horizon / T + 1e-9))
    starts = T * np.arange(n_blocks)
    means = np.asarray(forcing.window_mean(starts, T), dtype=float) * np.ones(n_blocks)
    return float(means.min())


#############
# Corrector #
#############
@dataclass(frozen=True)
class Corrector:
    """Bounded corrector A(t) = alpha + Bbar t - int_0^t B, so that A' + B = Bbar

    Evaluation uses the exact running integral of the signal, the sample grid only feeds the diagnostics.
    """
    signal: TimeSignal
    mean: float
    horizon: float
    alpha: float = 0.
    ess_inf: float = np.nan  # ess-inf of A' + B over the sample grid
    sup_abs: float = np.nan  # sup |A - alpha| over the sample grid
    min_value: float = np.nan  # min of A - alpha over the sample grid

    def __call__(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        t_arr = np.asarray(t, dtype=float)
        vals = self.alpha + self.mean * t_arr - self.signal.integral(0., t_arr)
        return float(vals) if np.ndim(vals) == 0 else vals

    def derivative(self, t: npt.ArrayLike) -> Union[float, np.ndarray]:
        return self.mean - self.signal(t)

    def shifted(self, alpha: float) -> 'Corrector':
        """The same corrector with the constant alpha in place of the current one"""
        return replace(self, alpha=float(alpha))


def build_corrector(
        signal: TimeSignal,
        horizon: float = DEFAULT_HORIZON,
        step: float = CORRECTOR_STEP,
        cap: float = CORRECTOR_CAP,
        windows: Optional[Sequence[float]] = None,
) -> Corrector:
    """Construct the mean-corrected antiderivative A(t) = int_0^t (Bbar - B) of a signal B

    Parameters
    ----------
    signal: TimeSignal
        The signal B. Its long-run lower average (from `estimate_averages`) should be positive.
    horizon: float
        A is sampled over [-horizon, horizon] to compute the diagnostics
    step: float
        Sampling step of the diagnostics grid
    cap: float
        Maximal allowed sup |A| over the horizon
    windows: Sequence[float], optional
        Windows for `estimate_averages`; defaults to those of DEFAULT_WINDOWS fitting into horizon/4

    Returns
    -------
    corrector: Corrector
        with `ess_inf` (the minimum of the midpoint finite difference of A plus B) and `sup_abs` diagnostics

    Notes
    -----
    Bbar is the exact long-run mean when the signal family has one.
    Otherwise (switching forcing) it is the mean of B over [-horizon, horizon], which keeps A bounded
    on the sampled range; the lower average is still required to be positive.
    """
    if windows is None:
        windows = [T for T in DEFAULT_WINDOWS if T <= horizon / 4] or [horizon / 4]
    averages = estimate_averages(signal, horizon, windows)
    if averages.fbar_inf <= 0:
        raise NonPositiveMean(averages.fbar_inf)

    mean = signal.long_run_mean
    if mean is None:
        mean = float(signal.integral(-horizon, horizon)) / (2 * horizon)
    corrector = Corrector(signal, float(mean), float(horizon))

    n_half = int(round(horizon / step))
    ts = step * np.arange(-n_half, n_half + 1)
    values = corrector(ts)
    slopes = np.diff(values) / np.diff(ts) + signal(ts[:-1] + step / 2)
    sup_abs = float(np.abs(values).max())
    if sup_abs > cap:
        raise UnboundedCorrector(sup_abs, cap)

    logger.debug('Corrector built with mean %.12g, sup|A| = %.6g', mean, sup_abs)
    return replace(corrector, ess_inf=float(slopes.min()), sup_abs=sup_abs, min_value=float(values.min()))
