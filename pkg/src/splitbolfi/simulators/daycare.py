"""Multi-strain colonization dynamics in a daycare population.

Children acquire strain ``s`` at rate ``beta * E_s + lambda * P_s`` where
``E_s`` is the fraction of the other children carrying ``s`` and ``P_s`` the
background prevalence. Carriage of other strains suppresses acquisition by the
factor ``2 * Phi(-sum_j theta_sj I_ij)``; colonizations clear at rate
``gamma``. The data are binary child-by-strain snapshots of the equilibrium.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .. import _seeding
from ..engine import ParameterSpace
from .base import SimulatorSpec, summary_difference

__all__ = [
    "DaycareModel",
    "competition_factor",
    "daycare_simulate",
    "daycare_summaries",
    "coprevalence",
    "shannon_index",
    "daycare_spec",
    "pair_names",
    "read_snapshots_csv",
    "write_snapshots_csv",
]

logger = logging.getLogger(__name__)

RATE_BOUNDS = (0.0, 11.0)
COMPETITION_BOUNDS = (0.0, 3.0)
SMOOTHING = 0.01
DEFAULT_RATES = (5.4, 6.7)


def pair_names(n_strains):
    return [f"theta_{a}_{b}" for a, b in combinations(range(n_strains), 2)]


@dataclass
class DaycareModel:
    n_strains: int
    beta_rate: float
    lambda_rate: float
    competition: Optional[np.ndarray] = None
    n_children: int = 47
    gamma_rate: float = 1.0
    background_prevalence: Optional[np.ndarray] = None
    dt: float = 0.1
    burn_in: float = 50.0
    n_observations: int = 11
    observation_gap: float = 3.0
    method: str = "tau"
    clamped_steps: int = field(default=0, init=False, compare=False)

    def __post_init__(self):
        s = self.n_strains
        if s < 1 or self.n_children < 2:
            raise ValueError("need at least one strain and two children")
        if self.competition is None:
            self.competition = np.zeros((s, s))
        self.competition = np.asarray(self.competition, dtype=float)
        th = self.competition
        if th.shape != (s, s) or not np.allclose(th, th.T) or np.any(np.diag(th) != 0) or np.any(th < 0):
            raise ValueError("competition must be symmetric, non-negative, with zero diagonal")
        if self.background_prevalence is None:
            self.background_prevalence = np.full(s, 1.0 / s)
        self.background_prevalence = np.asarray(self.background_prevalence, dtype=float)
        if self.background_prevalence.shape != (s,) or np.any(self.background_prevalence < 0):
            raise ValueError("background_prevalence must be non-negative, one per strain")
        if min(self.beta_rate, self.lambda_rate) < 0 or self.gamma_rate < 0:
            raise ValueError("rates must be non-negative")
        if self.dt <= 0 or self.burn_in < 0 or self.n_observations < 1 or self.observation_gap <= 0:
            raise ValueError("invalid time discretization")
        if self.method not in ("tau", "gillespie"):
            raise ValueError(f"unknown method {self.method!r}")

    @classmethod
    def from_pairs(cls, n_strains, beta_rate, lambda_rate, pair_values, **kwargs):
        """Build from upper-triangle competition values ordered as :func:`pair_names`."""
        th = np.zeros((n_strains, n_strains))
        iu = np.triu_indices(n_strains, 1)
        th[iu] = pair_values
        return cls(n_strains, beta_rate, lambda_rate, th + th.T, **kwargs)


def competition_factor(state, competition):
    """``2 Phi(-sum_j theta_sj I_ij)`` for every child and strain."""
    return 2.0 * ndtr(-(state @ competition))


def _acquisition_rates(model, state):
    n = model.n_children
    x = state.astype(float)
    others = (x.sum(axis=0)[None, :] - x) / (n - 1)
    base = model.beta_rate * others + model.lambda_rate * model.background_prevalence[None, :]
    return base * competition_factor(x, model.competition)


def _tau_leap(model, state, n_steps, rng):
    p_clear = model.gamma_rate * model.dt
    if p_clear > 1:
        model.clamped_steps += n_steps
        p_clear = 1.0
    for _ in range(n_steps):
        p_acq = _acquisition_rates(model, state) * model.dt
        if np.any(p_acq[~state] > 1):
            model.clamped_steps += 1
        u = rng.random(state.shape)
        state = np.where(state, u >= p_clear, u < p_acq)
    return state


def _gillespie(model, state, duration, rng):
    t = 0.0
    while True:
        acq = np.where(state, 0.0, _acquisition_rates(model, state))
        clear = np.where(state, model.gamma_rate, 0.0)
        rates = np.concatenate([acq.ravel(), clear.ravel()])
        total = rates.sum()
        if total <= 0:
            return state
        t += rng.exponential(1.0 / total)
        if t > duration:
            return state
        k = int(np.searchsorted(np.cumsum(rates), rng.random() * total, side="right"))
        k = min(k, rates.size - 1)
        idx = np.unravel_index(k % state.size, state.shape)
        state = state.copy()
        state[idx] = k < state.size


def daycare_simulate(model: DaycareModel, seed):
    """Equilibrium snapshots, shape ``(n_observations, n_children, n_strains)``.

    The population starts uncolonized, runs for ``burn_in`` time units and is
    then observed every ``observation_gap`` time units.
    """
    rng = np.random.default_rng(seed)
    state = np.zeros((model.n_children, model.n_strains), dtype=bool)
    snaps = np.empty((model.n_observations,) + state.shape, dtype=bool)
    model.clamped_steps = 0

    def advance(state, duration):
        if model.method == "gillespie":
            return _gillespie(model, state, duration, rng)
        return _tau_leap(model, state, int(round(duration / model.dt)), rng)

    state = advance(state, model.burn_in)
    for k in range(model.n_observations):
        if k:
            state = advance(state, model.observation_gap)
        snaps[k] = state
    if model.clamped_steps:
        logger.debug("acquisition probability clamped in %d steps", model.clamped_steps)
    return snaps


def shannon_index(counts):
    """Shannon diversity (natural log) of a vector of strain counts."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def coprevalence(snapshots, a, b):
    """Smoothed, prevalence-normalized co-carriage of strains ``a`` and ``b``.

    ``n`` in the normalization is the number of snapshots.
    """
    x = np.asarray(snapshots, dtype=float)
    n = x.shape[0]
    joint = (x[..., a] * x[..., b]).sum()
    ca, cb = x[..., a].sum(), x[..., b].sum()
    return float((SMOOTHING + joint) / np.sqrt(n * (SMOOTHING + ca) * (SMOOTHING + cb)))


def daycare_summaries(snapshots):
    """Summary vector.

    Order: Shannon index, number of strains observed, per-strain prevalence,
    prevalence of multiple colonization, then co-prevalence for each strain
    pair in :func:`pair_names` order.
    """
    x = np.asarray(snapshots, dtype=bool)
    n_strains = x.shape[-1]
    counts = x.sum(axis=(0, 1))
    units = x.shape[0] * x.shape[1]
    carried = x.sum(axis=-1)
    head = [shannon_index(counts), float(np.count_nonzero(counts))]
    head += list(counts / units)
    head.append(float(np.count_nonzero(carried >= 2)) / units)
    pairs = [coprevalence(x, a, b) for a, b in combinations(range(n_strains), 2)]
    return np.array(head + pairs)


def _summary_names(n_strains):
    return (["shannon", "n_observed"] + [f"prevalence_{s}" for s in range(n_strains)]
            + ["multiple"] + [f"coprev_{a}_{b}" for a, b in combinations(range(n_strains), 2)])


def daycare_spec(n_strains=4, seed=0, truth=None, observed=None, norm="absolute", **model_kwargs):
    """Daycare competition inference problem on synthetic (or given) snapshots.

    Parameters are ``beta``, ``lambda`` and one competition value per strain
    pair. The default truth has ``beta=5.4``, ``lambda=6.7``, the first pair
    at 2 and all other pairs at 0. ``observed`` may be a snapshot array, which then
    replaces the synthetic data.
    """
    pairs = pair_names(n_strains)
    names = ["beta", "lambda"] + pairs
    lower = [RATE_BOUNDS[0]] * 2 + [COMPETITION_BOUNDS[0]] * len(pairs)
    upper = [RATE_BOUNDS[1]] * 2 + [COMPETITION_BOUNDS[1]] * len(pairs)
    space = ParameterSpace(names, lower, upper)
    if truth is None:
        truth = np.zeros(len(names))
        truth[:2] = DEFAULT_RATES
        if pairs:
            truth[2] = 2.0
    truth = np.asarray(truth, dtype=float)

    def model_at(theta):
        theta = np.maximum(theta, 0.0)
        return DaycareModel.from_pairs(n_strains, theta[0], theta[1], theta[2:], **model_kwargs)

    if observed is None:
        observed = daycare_simulate(model_at(truth), _seeding.subseed(seed, _seeding.OBSERVED, 1))
    obs_summaries = daycare_summaries(observed)
    n_head = 3 + n_strains

    def simulate(theta, sim_seed):
        return daycare_simulate(model_at(theta), sim_seed)

    def discrepancy_map(sim, obs):
        rest = summary_difference(sim[:n_head].sum(), obs[:n_head].sum(), norm)
        return np.concatenate([[rest, rest], summary_difference(sim[n_head:], obs[n_head:], norm)])

    return SimulatorSpec(space, simulate, daycare_summaries, discrepancy_map, obs_summaries,
                         _summary_names(n_strains), truth,
                         {"model": "daycare", "n_strains": n_strains, "norm": norm,
                          "snapshots": np.asarray(observed, dtype=bool)})


def write_snapshots_csv(path, snapshots):
    """Long format: one row per (time point, child) with one 0/1 column per strain."""
    x = np.asarray(snapshots, dtype=int)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "child"] + [f"strain_{s}" for s in range(x.shape[-1])])
        for t in range(x.shape[0]):
            for i in range(x.shape[1]):
                writer.writerow([t, i] + x[t, i].tolist())


def read_snapshots_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(int, r)) for r in reader if r]
    if not rows or header[:2] != ["time", "child"]:
        raise ValueError(f"{path}: expected columns time, child, strain_*")
    arr = np.array(rows)
    n_t, n_c = arr[:, 0].max() + 1, arr[:, 1].max() + 1
    out = np.zeros((n_t, n_c, arr.shape[1] - 2), dtype=bool)
    out[arr[:, 0], arr[:, 1]] = arr[:, 2:].astype(bool)
    return out
