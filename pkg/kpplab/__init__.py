from .forcing import Forcing, estimate_averages, build_corrector, block_average_inf
from .reaction import Reaction, check_hypotheses, homogenized_reaction
from .dispersion import chi1, chi2, mu_star, minimal_speed, c_min, root_pair, speed_bounds
from .dynamics import lattice_state, integrate, pullback_uplus, part_metric, sign_change_profile
from .fronts import build_supersolution, build_subsolution, squeeze_front, interface_trajectory, pulsating_profile
from .experiments import (
    measure_spreading_speed, hairtrigger_inside, stability_experiment, critical_front_run, tilde_cstar_bracket
)

from .api import run_scenario
from .io import read_scenario, parse_scenario

__version__ = '0.1.0'
