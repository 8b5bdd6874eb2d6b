"""Multivariate Gaussian with identity covariance and unknown mean vector."""

from __future__ import annotations

import numpy as np
from scipy import stats

from .. import _seeding
from ..engine import ParameterSpace
from .base import SimulatorSpec, summary_difference

__all__ = ["gaussian_simulate", "gaussian_spec", "analytic_posterior"]

PRIOR_BOUNDS = (-5.0, 5.0)
TRUTH_BOUNDS = (-3.0, 3.0)


def gaussian_simulate(theta, n, seed):
    """Per-dimension means of ``n`` draws from ``N(theta, I)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    theta = np.asarray(theta, dtype=float)
    rng = np.random.default_rng(seed)
    return theta + rng.standard_normal((n, theta.size)).mean(axis=0)


def gaussian_spec(dim, n=100, seed=0, truth=None, norm="absolute",
                  prior_bounds=PRIOR_BOUNDS, observed=None):
    """Build the Gaussian-mean inference problem.

    The generating mean is drawn uniformly from ``TRUTH_BOUNDS`` unless given,
    and the observed summaries are the sample means of ``n`` draws from it.
    ``d_j`` depends only on coordinate ``j`` of the summaries.
    """
    names = [f"mu_{j}" for j in range(dim)]
    space = ParameterSpace(names, prior_bounds[0], prior_bounds[1])
    if truth is None:
        truth = _seeding.substream(seed, _seeding.OBSERVED, 0).uniform(*TRUTH_BOUNDS, size=dim)
    truth = np.asarray(truth, dtype=float)
    if observed is None:
        observed = gaussian_simulate(truth, n, _seeding.subseed(seed, _seeding.OBSERVED, 1))

    def simulate(theta, sim_seed):
        return gaussian_simulate(theta, n, sim_seed)

    def discrepancy_map(sim, obs):
        return summary_difference(sim, obs, norm)

    return SimulatorSpec(space, simulate, lambda x: x, discrepancy_map,
                         np.asarray(observed, dtype=float), names, truth,
                         {"model": "gaussian", "n": n, "norm": norm})


def analytic_posterior(observed_mean, n, bounds=PRIOR_BOUNDS):
    """Exact marginal posterior of one mean under a uniform prior.

    A normal ``N(observed_mean, 1/n)`` truncated to ``bounds``.
    """
    sd = 1.0 / np.sqrt(n)
    a = (bounds[0] - observed_mean) / sd
    b = (bounds[1] - observed_mean) / sd
    return stats.truncnorm(a, b, loc=observed_mean, scale=sd)
