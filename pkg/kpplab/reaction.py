"""KPP nonlinearities f(t, u) = r(t) - g(u) and numerical checks of their hypotheses"""
import logging
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Union, get_args

import numpy as np
import numpy.typing as npt
import pandas as pd

from .forcing import Forcing, estimate_averages, block_average_inf, DEFAULT_HORIZON

logger = logging.getLogger(__name__)

SHAPE_KIND = Literal['linear', 'saturating', 'polynomial']
HYPOTHESIS_NAME = Literal[
    'time_regularity', 'negative_above_saturation', 'decreasing_in_u', 'positive_mean', 'upper_slope', 'lower_slope'
]

N_GRID_POINTS = 256
MEAN_TOL = 1e-9  # the lower long-run average of r should exceed this value


@dataclass(frozen=True)
class Reaction:
    """Per-capita growth f(t, u) = r(t) - g(u) with g(0) = 0 and m0_tilde <= g' <= M0_tilde

    Shapes
    ------
    * linear: g(u) = m0_tilde * u (needs m0_tilde == M0_tilde); slope 1 gives the logistic f = r - u
    * saturating: g(u) = m0_tilde * u + (M0_tilde - m0_tilde) * u^2 / (1 + u)
    * polynomial: g(u) = sum_k coefficients[k] * u^(k+1)

    For u < 0 the growth is frozen: f(t, u) = f(t, 0).
    """
    forcing: Forcing
    shape: SHAPE_KIND = 'linear'
    m0_tilde: float = 1.
    M0_tilde: float = 1.
    M0: Optional[float] = None
    coefficients: tuple[float, ...] = ()

    def __post_init__(self):
        assert self.shape in get_args(SHAPE_KIND), f"Unknown reaction shape {self.shape}"
        assert 0 < self.m0_tilde <= self.M0_tilde, 'Slopes should satisfy 0 < m0_tilde <= M0_tilde'
        if self.shape == 'linear':
            assert self.m0_tilde == self.M0_tilde, 'Linear shape has a single slope: m0_tilde == M0_tilde'
        if self.shape == 'polynomial':
            assert len(self.coefficients) > 0, 'Polynomial shape needs coefficients'
        if self.M0 is None:
            object.__setattr__(self, 'M0', self.default_saturation())
        assert self.M0 > 0, 'Saturation level M0 should be positive'

    @classmethod
    def logistic(cls, forcing: Forcing, slope: float = 1.) -> 'Reaction':
        return cls(forcing, 'linear', slope, slope)

    def g(self, u: npt.ArrayLike) -> np.ndarray:
        u = np.maximum(np.asarray(u, dtype=float), 0.)
        if self.shape == 'linear':
            return self.m0_tilde * u
        if self.shape == 'saturating':
            return self.m0_tilde * u + (self.M0_tilde - self.m0_tilde) * u * u / (1 + u)
        return sum(c * u ** (k + 1) for k, c in enumerate(self.coefficients))

    def default_saturation(self) -> float:
        """Smallest level above which f < 0 for every t: solves g(M0) = sup r"""
        r_max = self.forcing.value_range()[1]
        if self.shape == 'linear':
            return r_max / self.m0_tilde
        lo, hi = 0., r_max / self.m0_tilde  # g(u) >= m0_tilde * u
        for _ in range(200):
            mid = (lo + hi) / 2
            lo, hi = (mid, hi) if self.g(mid) < r_max else (lo, mid)
        return hi

    def describe(self) -> dict[str, object]:
        desc = {'reaction_shape': self.shape, 'reaction_m0_tilde': self.m0_tilde,
                'reaction_M0_tilde': self.M0_tilde, 'reaction_M0': self.M0}
        if self.coefficients:
            desc['reaction_coefficients'] = ';'.join(map(str, self.coefficients))
        return desc | self.forcing.describe()


def eval_reaction(reaction: Reaction, t: npt.ArrayLike, u: npt.ArrayLike) -> Union[float, np.ndarray]:
    """Evaluate f(t, u); negative u are treated as u = 0

    Examples
    --------
    eval_reaction(Reaction.logistic(Forcing.periodic(1, 0.5, 1)), 0.25, 0.3) --> 1.2
    """
    vals = reaction.forcing(t) - reaction.g(u)
    return float(vals) if np.ndim(vals) == 0 else vals


def sup_abs_growth(reaction: Reaction, u_max: float) -> float:
    """sup |f(t, u)| over all t and u in [0, u_max]"""
    r_lo, r_hi = reaction.forcing.value_range()
    g_max = float(reaction.g(u_max))
    return max(abs(r_lo), abs(r_hi), abs(r_lo - g_max), abs(r_hi - g_max))


def homogenized_reaction(forcing: Forcing, T: float, M: float, horizon: float = DEFAULT_HORIZON) -> Reaction:
    """Comparison reaction f(t, u) = fbar_T - M u with fbar_T the block statistic of `forcing`

    Its spreading speed is exactly inf_mu chi1(mu, fbar_T).
    """
    fbar_T = block_average_inf(forcing, T, horizon)
    assert fbar_T > 0, f"Block average of the forcing should be positive, got {fbar_T}"
    return Reaction.logistic(Forcing.constant(fbar_T), slope=M)


##############
# Hypotheses #
##############
@dataclass(frozen=True)
class HypothesisReport:
    """Per-hypothesis verdicts with the worst margin found on the grids (margin >= 0 means satisfied)"""
    passed: dict[str, bool]
    margins: dict[str, float]
    notes: dict[str, str] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'hypothesis': list(self.passed),
            'passed': [self.passed[k] for k in self.passed],
            'margin': [self.margins[k] for k in self.passed],
            'note': [self.notes.get(k, '') for k in self.passed],
        })


def check_hypotheses(
        reaction: Reaction,
        t_grid: Optional[Sequence[float]] = None,
        u_grid: Optional[Sequence[float]] = None,
        horizon: float = DEFAULT_HORIZON,
) -> HypothesisReport:
    """Sample the KPP hypotheses of `reaction` on a (t, u) grid

    Parameters
    ----------
    reaction: Reaction
    t_grid: Sequence[float], optional
        Defaults to 256 points over [0, horizon]
    u_grid: Sequence[float], optional
        Defaults to 256 points over [0, 4 M0]. Should be inside [0, 4 M0]
    horizon: float
        Horizon of the long-run average estimation

    Returns
    -------
    report: HypothesisReport
        Checked properties:
        * time_regularity: Hoelder continuity in t (fails for the piecewise-constant switching forcing)
        * negative_above_saturation: f(t, u) <= 0 at u = M0 and f < 0 for u > M0
        * decreasing_in_u: f strictly decreasing along every t-slice of the u-grid
        * positive_mean: the lower long-run average of r is positive
        * upper_slope: f(t, u) <= f(t, 0) - m0_tilde u
        * lower_slope: f(t, u) >= f(t, 0) - M0_tilde u
    """
    t_grid = np.linspace(0, horizon, N_GRID_POINTS) if t_grid is None else np.asarray(t_grid, dtype=float)
    u_grid = np.linspace(0, 4 * reaction.M0, N_GRID_POINTS) if u_grid is None else np.asarray(u_grid, dtype=float)
    assert len(t_grid) and len(u_grid), 'Grids should be nonempty'
    assert u_grid.min() >= 0 and u_grid.max() <= 4 * reaction.M0 * (1 + 1e-12), 'u-grid should lie in [0, 4 M0]'
    u_grid = np.unique(u_grid)

    tt, uu = np.meshgrid(t_grid, u_grid, indexing='ij')
    f_vals = eval_reaction(reaction, tt, uu)
    f_zero = eval_reaction(reaction, tt, np.zeros_like(uu))

    passed, margins, notes = {}, {}, {}

    passed['time_regularity'] = reaction.forcing.is_smooth
    margins['time_regularity'] = 0. if reaction.forcing.is_smooth else -np.inf
    if not reaction.forcing.is_smooth:
        notes['time_regularity'] = 'not satisfied: piecewise constant forcing'

    above = uu >= reaction.M0
    strictly_above = uu > reaction.M0
    margin_at = -float(f_vals[above].max()) if above.any() else np.inf
    margin_strict = -float(f_vals[strictly_above].max()) if strictly_above.any() else np.inf
    margins['negative_above_saturation'] = margin_at
    passed['negative_above_saturation'] = margin_at >= 0 and margin_strict > 0

    decrements = f_vals[:, :-1] - f_vals[:, 1:]
    margins['decreasing_in_u'] = float(decrements.min()) if decrements.size else np.inf
    passed['decreasing_in_u'] = margins['decreasing_in_u'] > 0

    fbar_inf = estimate_averages(reaction.forcing, horizon, [T for T in (10., 25., 50., 100.) if T <= horizon / 4]).fbar_inf
    margins['positive_mean'] = fbar_inf - MEAN_TOL
    passed['positive_mean'] = fbar_inf > MEAN_TOL
    if not passed['positive_mean']:
        logger.warning('Lower long-run average of the growth rate is not positive: %.6g', fbar_inf)

    margins['upper_slope'] = float((f_zero - reaction.m0_tilde * uu - f_vals).min())
    passed['upper_slope'] = margins['upper_slope'] >= 0
    margins['lower_slope'] = float((f_vals - (f_zero - reaction.M0_tilde * uu)).min())
    passed['lower_slope'] = margins['lower_slope'] >= 0

    return HypothesisReport(passed, margins, notes)
