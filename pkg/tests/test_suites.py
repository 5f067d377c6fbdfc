import numpy as np
import pandas as pd
import pytest

from kpplab import suites


def test_random_instances():
    rng = np.random.default_rng(0)
    kinds = set()
    for _ in range(40):
        reaction = suites.random_reaction(rng)
        kinds.add(reaction.forcing.kind)
        assert reaction.shape in ('linear', 'saturating')
        assert reaction.forcing.value_range()[0] > 0
        assert reaction.M0 > 0
    assert kinds == {'constant', 'periodic', 'quasiperiodic', 'switching'}


def test_suite_outcome():
    outcome = suites.SuiteOutcome('comparison', 10, 0, -1e-3, suites.ORDER_TOL)
    assert outcome.passed
    assert outcome.as_row() == {'suite': 'comparison', 'trials': 10, 'violations': 0, 'worst': -1e-3,
                                'tol': suites.ORDER_TOL, 'passed': True}
    assert not suites.SuiteOutcome('comparison', 10, 1, 1., suites.ORDER_TOL).passed


def test_run_all():
    names = ['comparison', 'strict_separation', 'part_metric', 'uniform_contraction', 'single_crossing', 'homogeneity']
    outcomes = suites.run_all(n_trials=3, seed=1, suites=names)
    assert outcomes['suite'].tolist() == names
    assert list(outcomes.columns) == ['suite', 'trials', 'violations', 'worst', 'tol', 'passed']
    assert (outcomes['trials'] == 3).all()
    assert outcomes['passed'].all()

    # every suite has its own generator
    alone = suites.run_all(n_trials=3, seed=1, suites=['homogeneity'])
    pd.testing.assert_frame_equal(alone, outcomes.iloc[[-1]].reset_index(drop=True))

    with pytest.raises(AssertionError):
        suites.run_all(suites=['monotonicity'])


@pytest.mark.slow
def test_residuals_suite():
    outcome = suites.residuals_suite(3, np.random.default_rng(0))
    assert outcome.trials == 3
    assert outcome.passed
    assert outcome.worst <= outcome.tol
    assert outcome == suites.residuals_suite(3, np.random.default_rng(0))
    assert outcome.worst != suites.residuals_suite(3, np.random.default_rng(1)).worst

    assert suites.residuals_suite(0, np.random.default_rng(0)).trials == 0


@pytest.mark.slow
def test_all_suites_at_full_size():
    outcomes = suites.run_all(n_trials=suites.DEFAULT_TRIALS, seed=0)
    assert outcomes['passed'].all(), outcomes[~outcomes['passed']]
    trials = dict(zip(outcomes['suite'], outcomes['trials']))
    assert trials.pop('residuals') == suites.RESIDUAL_TRIALS
    assert set(trials.values()) == {100}
