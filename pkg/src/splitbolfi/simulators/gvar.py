"""Sparse graphical vector autoregression.

Each variable carries a diagonal transition entry of -1 and is coupled to
exactly one other variable. Unknowns are the off-diagonal couplings and the
noise variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import _seeding
from ..engine import ParameterSpace, SimulationError
from .base import SimulatorSpec, summary_difference

__all__ = ["GvarModel", "gvar_simulate", "gvar_trajectory", "lagged_summaries", "gvar_spec"]

COUPLING_BOUNDS = (-1.0, 1.0)
NOISE_BOUNDS = (0.0, 1.0)
_BLOWUP = 1e150
# the noise prior is the open interval (0, 1); zero noise gives an all-zero path
_MIN_NOISE = 1e-12


def _cyclic_partners(n_vars):
    return np.roll(np.arange(n_vars), -1)


@dataclass
class GvarModel:
    """Parameters of one GVAR instance.

    ``dynamics`` selects how the transition matrix acts:

    * ``"as_written"``: ``X[t+1] = Pi X[t] + eps``.
    * ``"difference"``: ``X[t+1] - X[t] = Pi X[t] + eps``; the -1 diagonal
      cancels the persistence term and each variable is driven only by its
      partner, stable whenever every coupling has modulus below one.
    * ``"stabilized"``: as written, with ``Pi`` rescaled to spectral radius 0.95.
    """

    pi_offdiag: np.ndarray
    sigma2: float = 0.1
    T: int = 500
    coupling_partner: Optional[np.ndarray] = None
    dynamics: str = "difference"
    summary: str = "hybrid"

    def __post_init__(self):
        self.pi_offdiag = np.asarray(self.pi_offdiag, dtype=float)
        n = self.pi_offdiag.size
        if self.coupling_partner is None:
            self.coupling_partner = _cyclic_partners(n)
        self.coupling_partner = np.asarray(self.coupling_partner, dtype=int)
        if n < 2:
            raise ValueError("need at least two variables")
        if self.coupling_partner.shape != (n,) or np.any(self.coupling_partner == np.arange(n)):
            raise ValueError("each variable must be coupled to exactly one other variable")
        if np.any(np.abs(self.pi_offdiag) >= 1):
            raise ValueError("couplings must have modulus below one")
        if self.sigma2 < 0 or self.T < 2:
            raise ValueError("sigma2 must be non-negative and T at least 2")
        if self.dynamics not in ("as_written", "difference", "stabilized"):
            raise ValueError(f"unknown dynamics {self.dynamics!r}")
        if self.summary not in ("covariance", "pearson", "hybrid"):
            raise ValueError(f"unknown summary {self.summary!r}")

    @property
    def n_vars(self):
        return self.pi_offdiag.size

    def transition_matrix(self):
        n = self.n_vars
        pi = -np.eye(n)
        pi[np.arange(n), self.coupling_partner] = self.pi_offdiag
        return pi

    def propagator(self):
        """Matrix ``A`` with ``X[t+1] = A X[t] + eps``."""
        pi = self.transition_matrix()
        if self.dynamics == "difference":
            return pi + np.eye(self.n_vars)
        if self.dynamics == "stabilized":
            radius = np.max(np.abs(np.linalg.eigvals(pi)))
            return pi * (0.95 / radius) if radius > 0.95 else pi
        return pi


def gvar_trajectory(model: GvarModel, seed):
    """``(T, n_vars)`` trajectory started from zero."""
    rng = np.random.default_rng(seed)
    a = model.propagator()
    noise = rng.standard_normal((model.T - 1, model.n_vars)) * np.sqrt(model.sigma2)
    x = np.zeros((model.T, model.n_vars))
    for t in range(model.T - 1):
        x[t + 1] = a @ x[t] + noise[t]
        if not np.all(np.abs(x[t + 1]) < _BLOWUP):
            raise SimulationError(f"trajectory diverged at step {t + 1}")
    return x


def lagged_summaries(x, partners, kind="covariance"):
    """Lag-1 cross statistics between ``X_i(t+1)`` and ``X_partner(i)(t)``.

    Returns one value per coupling followed by their sum. ``kind='pearson'``
    gives sample correlations (zero when either series is constant);
    ``'covariance'`` gives the unnormalized sample cross-covariance.
    ``'hybrid'`` pairs the correlations with ``sqrt(sum |cov|)`` in place of
    the sum, which grows with the noise variance while correlations do not.
    """
    lead = x[1:]
    lag = x[:-1, partners]
    lead_c = lead - lead.mean(axis=0)
    lag_c = lag - lag.mean(axis=0)
    cov = np.mean(lead_c * lag_c, axis=0)
    denom = np.sqrt(np.mean(lead_c ** 2, axis=0) * np.mean(lag_c ** 2, axis=0))
    corr = np.divide(cov, denom, out=np.zeros_like(cov), where=denom > 0)
    if kind == "pearson":
        return np.append(corr, corr.sum())
    if kind == "covariance":
        return np.append(cov, cov.sum())
    if kind == "hybrid":
        return np.append(corr, np.sqrt(np.abs(cov).sum()))
    raise ValueError(f"unknown summary kind {kind!r}")


def gvar_simulate(model: GvarModel, seed):
    """Simulate and summarize: per-coupling lag-1 statistics plus their sum."""
    return lagged_summaries(gvar_trajectory(model, seed), model.coupling_partner, model.summary)


def gvar_spec(dim, seed=0, T=500, sigma2=0.1, truth=None, norm="absolute",
              dynamics="difference", summary="hybrid", observed=None):
    """GVAR inference problem with ``dim - 1`` couplings plus the noise variance.

    True couplings are drawn from U(-1, 1) unless ``truth`` is given (with the
    noise variance as its last entry). ``observed`` replaces the synthetic
    summary vector.
    """
    n_vars = dim - 1
    if n_vars < 2:
        raise ValueError("dim must be at least 3")
    partners = _cyclic_partners(n_vars)
    names = [f"pi_{i}_{k}" for i, k in enumerate(partners)] + ["sigma2"]
    lower = [COUPLING_BOUNDS[0]] * n_vars + [NOISE_BOUNDS[0]]
    upper = [COUPLING_BOUNDS[1]] * n_vars + [NOISE_BOUNDS[1]]
    space = ParameterSpace(names, lower, upper)
    if truth is None:
        couplings = _seeding.substream(seed, _seeding.OBSERVED, 0).uniform(*COUPLING_BOUNDS, n_vars)
        truth = np.append(couplings, sigma2)
    truth = np.asarray(truth, dtype=float)

    def model_at(theta):
        return GvarModel(np.clip(theta[:-1], -1 + 1e-12, 1 - 1e-12), max(theta[-1], _MIN_NOISE), T,
                         partners, dynamics, summary)

    if observed is None:
        observed = gvar_simulate(model_at(truth), _seeding.subseed(seed, _seeding.OBSERVED, 1))
    observed = np.asarray(observed, dtype=float)
    if observed.shape != (n_vars + 1,):
        raise ValueError(f"expected {n_vars + 1} observed summaries, got {observed.shape}")

    def simulate(theta, sim_seed):
        return gvar_simulate(model_at(theta), sim_seed)

    def discrepancy_map(sim, obs):
        return summary_difference(sim, obs, norm)

    summary_names = [f"lag1_{i}_{k}" for i, k in enumerate(partners)] + ["lag1_sum"]
    return SimulatorSpec(space, simulate, lambda s: s, discrepancy_map, observed, summary_names,
                         truth, {"model": "gvar", "T": T, "dynamics": dynamics,
                                 "summary": summary, "norm": norm})
