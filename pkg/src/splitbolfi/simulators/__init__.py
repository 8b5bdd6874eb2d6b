from .base import SimulatorSpec, read_summaries_csv, summary_difference, write_summaries_csv
from .gaussian import analytic_posterior, gaussian_simulate, gaussian_spec
from .gvar import GvarModel, gvar_simulate, gvar_spec, gvar_trajectory, lagged_summaries
from .daycare import DaycareModel, daycare_simulate, daycare_spec, daycare_summaries
