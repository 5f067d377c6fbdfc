"""Randomized property suites of the lattice dynamics and of the front barriers

Each suite draws random reactions and data, runs short trajectories and counts the trials
violating one property of the equation:
* comparison: ordered data stay ordered
* strict_separation: ordered distinct data separate strictly after t - s >= 0.1
* part_metric: the part metric of two positive solutions never increases
* uniform_contraction: it decreases by a positive amount over unit time when rho >= 0.1
* single_crossing: a single sign change of u - v persists as at most one
* homogeneity: constant data stay constant
* residuals: super- and sub-solution residual checks of the front barriers
"""
import logging
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Sequence, get_args

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from .dispersion import c_min, decay_for_speed
from .dynamics import integrate, lattice_state, part_metric, sign_change_profile
from .forcing import Forcing
from .fronts import RESIDUAL_TOL, build_subsolution, build_supersolution, verify_subsolution, verify_supersolution
from .reaction import Reaction

logger = logging.getLogger(__name__)

SUITE_NAME = Literal[
    'comparison', 'strict_separation', 'part_metric', 'uniform_contraction', 'single_crossing', 'homogeneity', 'residuals'
]

DEFAULT_TRIALS = 100
SUITE_WINDOW = 20
SUITE_DURATION = 2.
SUITE_DT = 0.01
RECORD_STRIDE = 10
ORDER_TOL = 1e-10
METRIC_TOL = 1e-9
HOMOGENEITY_TOL = 1e-12
SIGN_ATOL = 1e-12
SEPARATION_TIME = 0.1
CONTRACTION_RHO = 0.1
RESIDUAL_TRIALS = 10
RESIDUAL_SPEED_RANGE = (1.15, 1.35)


@dataclass(frozen=True)
class SuiteOutcome:
    """Number of violating trials and the worst value of the checked quantity (compared against `tol`)"""
    suite: str
    trials: int
    violations: int
    worst: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_row(self) -> dict[str, object]:
        return {'suite': self.suite, 'trials': self.trials, 'violations': self.violations,
                'worst': self.worst, 'tol': self.tol, 'passed': self.passed}


####################
# Random instances #
####################
def random_forcing(rng: np.random.Generator) -> Forcing:
    """Forcing drawn from one of the four families with a positive mean"""
    kind = rng.choice(['constant', 'periodic', 'quasiperiodic', 'switching'])
    r0 = rng.uniform(0.5, 1.5)
    if kind == 'constant':
        return Forcing.constant(r0)
    if kind == 'periodic':
        return Forcing.periodic(r0, rng.uniform(0, 0.5), rng.uniform(0.5, 3), rng.uniform(0, 2 * np.pi))
    if kind == 'quasiperiodic':
        return Forcing.quasiperiodic(r0, [(rng.uniform(0, 0.4), 1.), (rng.uniform(0, 0.4), np.sqrt(2))])
    return Forcing.switching(rng.uniform(0.2, 1.5, size=rng.integers(2, 4)), rng.uniform(0.2, 2), int(rng.integers(2 ** 31)))


def random_reaction(rng: np.random.Generator) -> Reaction:
    forcing = random_forcing(rng)
    if rng.random() < 0.5:
        return Reaction.logistic(forcing, rng.uniform(0.5, 1.5))
    m0 = rng.uniform(0.75, 1.25)
    return Reaction(forcing, 'saturating', m0, m0 + rng.uniform(0, 0.5))


def _evolve(reaction: Reaction, values: np.ndarray, s: float, duration: float = SUITE_DURATION):
    state = lattice_state(-SUITE_WINDOW, SUITE_WINDOW, lambda x: values, t=s)
    return integrate(state, reaction, s + duration, SUITE_DT, stride=RECORD_STRIDE)


def _n_sites() -> int:
    return 2 * SUITE_WINDOW + 1


##########
# Suites #
##########
def comparison_suite(n_trials: int, rng: np.random.Generator) -> SuiteOutcome:
    worst, violations = -np.inf, 0
    for _ in range(n_trials):
        reaction, s = random_reaction(rng), rng.uniform(0, 10)
        u0 = rng.uniform(0, 1.5 * reaction.M0, _n_sites())
        v0 = u0 * rng.uniform(0, 1, _n_sites())
        u, v = _evolve(reaction, u0, s), _evolve(reaction, v0, s)
        excess = float((v.values - u.values).max())
        worst, violations = max(worst, excess), violations + (excess > ORDER_TOL)
    return SuiteOutcome('comparison', n_trials, violations, worst, ORDER_TOL)


def strict_separation_suite(n_trials: int, rng: np.random.Generator) -> SuiteOutcome:
    """Data differ on every fourth site; the smallest gap after t - s >= 0.1 should be positive"""
    worst, violations = np.inf, 0
    for _ in range(n_trials):
        reaction, s = random_reaction(rng), rng.uniform(0, 10)
        u0 = rng.uniform(0.1, 1.5 * reaction.M0, _n_sites())
        perturbed = (np.arange(_n_sites()) % 4) == rng.integers(4)
        v0 = u0 - perturbed * rng.uniform(0.05, 0.5, _n_sites()) * u0
        u, v = _evolve(reaction, u0, s), _evolve(reaction, v0, s)
        late = u.times >= s + SEPARATION_TIME - 1e-12
        gap = float((u.values[late] - v.values[late]).min())
        worst, violations = min(worst, gap), violations + (gap <= 0)
    return SuiteOutcome('strict_separation', n_trials, violations, worst, 0.)


def _positive_pair(rng: np.random.Generator, reaction: Reaction, min_rho: float = 0.) -> tuple[np.ndarray, np.ndarray]:
    low, high = 0.1 * reaction.M0, 1.5 * reaction.M0
    while True:
        u0, v0 = rng.uniform(low, high, _n_sites()), rng.uniform(low, high, _n_sites())
        if part_metric(u0, v0) >= min_rho:
            return u0, v0


def part_metric_suite(n_trials: int, rng: np.random.Generator) -> SuiteOutcome:
    worst, violations = -np.inf, 0
    for _ in range(n_trials):
        reaction, s = random_reaction(rng), rng.uniform(0, 10)
        u0, v0 = _positive_pair(rng, reaction)
        u, v = _evolve(reaction, u0, s), _evolve(reaction, v0, s)
        rho = np.array([part_metric(a, b) for a, b in zip(u.values, v.values)])
        increase = float(np.diff(rho).max())
        worst, violations = max(worst, increase), violations + (increase > METRIC_TOL)
    return SuiteOutcome('part_metric', n_trials, violations, worst, METRIC_TOL)


def uniform_contraction_suite(n_trials: int, rng: np.random.Generator) -> SuiteOutcome:
    """Decrease rho(s) - rho(s + 1) for data in [0.1 M0, 1.5 M0] with rho(s) >= 0.1; its minimum should be positive"""
    worst, violations = np.inf, 0
    for _ in range(n_trials):
        reaction, s = random_reaction(rng), rng.uniform(0, 10)
        u0, v0 = _positive_pair(rng, reaction, CONTRACTION_RHO)
        u, v = _evolve(reaction, u0, s, 1.), _evolve(reaction, v0, s, 1.)
        delta = part_metric(u0, v0) - part_metric(u.final.values, v.final.values)
        worst, violations = min(worst, delta), violations + (delta <= 0)
    logger.info('Smallest part-metric decrease over unit time: %.3g', worst)
    return SuiteOutcome('uniform_contraction', n_trials, violations, worst, 0.)


def single_crossing_suite(n_trials: int, rng: np.random.Generator) -> SuiteOutcome:
    worst, violations = 0, 0
    for _ in range(n_trials):
        reaction, s = random_reaction(rng), rng.uniform(0, 10)
        v0 = rng.uniform(0.5, 1.5, _n_sites()) * reaction.M0
        k = rng.integers(5, _n_sites() - 5)
        sign = np.where(np.arange(_n_sites()) <= k, 1., -1.)
        u0 = v0 + sign * rng.uniform(0.05, 0.4, _n_sites()) * reaction.M0
        u, v = _evolve(reaction, u0, s), _evolve(reaction, v0, s)
        count = max(sign_change_profile(a, b, SIGN_ATOL).count for a, b in zip(u.values, v.values))
        worst, violations = max(worst, count), violations + (count > 1)
    return SuiteOutcome('single_crossing', n_trials, violations, float(worst), 1.)


def homogeneity_suite(n_trials: int, rng: np.random.Generator) -> SuiteOutcome:
    worst, violations = 0., 0
    for _ in range(n_trials):
        reaction, s = random_reaction(rng), rng.uniform(0, 10)
        u = _evolve(reaction, np.full(_n_sites(), rng.uniform(0, 2 * reaction.M0)), s)
        spread = float((u.values.max(axis=1) - u.values.min(axis=1)).max())
        worst, violations = max(worst, spread), violations + (spread > HOMOGENEITY_TOL)
    return SuiteOutcome('homogeneity', n_trials, violations, worst, HOMOGENEITY_TOL)


def residuals_suite(n_trials: int, rng: np.random.Generator) -> SuiteOutcome:
    """Super- and sub-solution residual checks of the front barriers on random constant and periodic forcing

    At most RESIDUAL_TRIALS of the `n_trials` trials are run. A trial draws the forcing and a speed
    gamma in RESIDUAL_SPEED_RANGE times c_min(r0); it violates when either barrier fails its residual check.
    """
    n = min(n_trials, RESIDUAL_TRIALS)
    violations, worst = 0, -np.inf
    for _ in range(n):
        r0 = rng.uniform(0.5, 1.5)
        if rng.random() < 0.5:
            forcing = Forcing.constant(r0)
        else:
            forcing = Forcing.periodic(r0, rng.uniform(0, 0.5) * r0, rng.uniform(0.5, 2.), rng.uniform(0, 2 * np.pi))
        reaction = Reaction.logistic(forcing)
        gamma = c_min(r0) * rng.uniform(*RESIDUAL_SPEED_RANGE)
        mu = decay_for_speed(gamma, r0)
        sup = verify_supersolution(build_supersolution(reaction, mu, (-1., 2.)))
        sub = verify_subsolution(build_subsolution(reaction, mu, t_range=(-1., 2.)))
        violations += not (sup.passed and sub.passed)
        worst = max(worst, -sup.min_residual, sub.max_residual)
    return SuiteOutcome('residuals', n, violations, worst, RESIDUAL_TOL)


SUITES: dict[str, Callable[[int, np.random.Generator], SuiteOutcome]] = {
    'comparison': comparison_suite,
    'strict_separation': strict_separation_suite,
    'part_metric': part_metric_suite,
    'uniform_contraction': uniform_contraction_suite,
    'single_crossing': single_crossing_suite,
    'homogeneity': homogeneity_suite,
    'residuals': residuals_suite,
}


def run_all(
        n_trials: int = DEFAULT_TRIALS,
        seed: int = 0,
        suites: Optional[Sequence[SUITE_NAME]] = None,
        use_tqdm: bool = False,
) -> pd.DataFrame:
    """Run the property suites and return one row per suite

    Every suite draws from its own generator keyed by (seed, position of the suite in SUITES),
    so the outcome of a suite does not depend on which other suites are run.

    Returns
    -------
    outcomes: pd.DataFrame
        Columns suite, trials, violations, worst, tol, passed
    """
    names = list(SUITES) if suites is None else list(suites)
    unknown = set(names) - set(get_args(SUITE_NAME))
    assert not unknown, f"Unknown suites {sorted(unknown)}. Supported suites are: {get_args(SUITE_NAME)}"

    rows = []
    for name in tqdm(names, disable=not use_tqdm, desc='Property suites'):
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        outcome = SUITES[name](n_trials, rng)
        log = logger.info if outcome.passed else logger.warning
        log('Suite %s: %d violations out of %d trials (worst %.3g)', name, outcome.violations, outcome.trials, outcome.worst)
        rows.append(outcome.as_row())
    return pd.DataFrame(rows, columns=['suite', 'trials', 'violations', 'worst', 'tol', 'passed'])
