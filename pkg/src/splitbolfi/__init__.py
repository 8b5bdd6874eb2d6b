"""Split-BOLFI: per-parameter Gaussian-process surrogates for likelihood-free inference.

Each parameter gets its own 1-D surrogate of a parameter-specific discrepancy.
Acquisitions are chosen marginally and the surrogates are turned into
tempered, exponentiated-loss marginal posterior proxies.
"""

from .abc import AbcRun, abc_estimates, run_abc
from .acquisition import AcquisitionConfig, acquire_marginal, acquire_round, lcb
from .engine import (EvaluationLog, FitResult, ParameterSpace, SimulationError, SplitBolfi,
                     run_split_bolfi)
from .gp import (DegenerateDataError, GpSurrogate, Hyperparams, KernelConfig, condition,
                 fit_hyperparams, kernel_eval)
from .proxy import (MarginalProxy, NearPerfectFitWarning, build_proxy, proxy_moments,
                    symmetrized_kl, tempering_scale)
from .simulators import SimulatorSpec

__version__ = "0.1.0"

__all__ = [
    "AbcRun", "abc_estimates", "run_abc",
    "AcquisitionConfig", "acquire_marginal", "acquire_round", "lcb",
    "EvaluationLog", "FitResult", "ParameterSpace", "SimulationError", "SplitBolfi",
    "run_split_bolfi",
    "DegenerateDataError", "GpSurrogate", "Hyperparams", "KernelConfig", "condition",
    "fit_hyperparams", "kernel_eval",
    "MarginalProxy", "NearPerfectFitWarning", "build_proxy", "proxy_moments",
    "symmetrized_kl", "tempering_scale",
    "SimulatorSpec",
]
