"""Marginal rejection ABC from a shared prior pool.

One pool of prior simulations is drawn; for each parameter separately the
draws with the smallest discrepancy for that parameter are accepted. No joint
(copula) reconstruction is attempted.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import _seeding
from .engine import SimulationError

__all__ = ["AbcRun", "pool_size", "simulate_pool", "accept", "run_abc", "abc_estimates",
           "write_abc_csv"]

logger = logging.getLogger(__name__)


def pool_size(n_samples, q):
    """``ceil(n_samples / q)``, tolerant of binary rounding (``10 / 0.01 -> 1000``)."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    ratio = n_samples / q
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio):
        return int(nearest)
    return int(math.ceil(ratio))


@dataclass
class AbcRun:
    pool_params: np.ndarray
    pool_discrepancies: np.ndarray
    q: float
    n_samples: int
    accepted: List[np.ndarray]
    names: tuple = ()
    n_failures: int = 0

    @property
    def n_pool(self):
        return len(self.pool_params)

    def accepted_values(self, j):
        return self.pool_params[self.accepted[j], j]


def simulate_pool(sim, n, seed, start=0):
    """Prior draws and discrepancies for pool indices ``start .. n - 1``.

    Every index has its own random streams, so a pool of size ``n`` is a
    prefix of any larger pool with the same seed. A draw whose simulation fails
    twice gets infinite discrepancies and is never accepted.

    Returns
    -------
    params, discrepancies, n_failures
    """
    p = sim.space.dim
    params = np.empty((n - start, p))
    disc = np.empty((n - start, p))
    failures = 0
    for row, i in enumerate(range(start, n)):
        theta = sim.space.sample(_seeding.substream(seed, _seeding.POOL_PARAMS, i))
        params[row] = theta
        for role in (_seeding.POOL_SIM, _seeding.RETRY):
            try:
                disc[row] = sim.discrepancies(theta, _seeding.subseed(seed, role, i))
                break
            except SimulationError as exc:
                failures += 1
                logger.warning("pool draw %d failed (%s)", i, exc)
        else:
            disc[row] = np.inf
    return params, disc, failures


def accept(discrepancies, n_samples):
    """Per-parameter indices of the ``n_samples`` smallest discrepancies.

    Ties go to the lower pool index.
    """
    discrepancies = np.asarray(discrepancies, dtype=float)
    if not 1 <= n_samples <= len(discrepancies):
        raise ValueError("n_samples must lie between 1 and the pool size")
    order = np.argsort(discrepancies, axis=0, kind="stable")
    return [order[:n_samples, j].copy() for j in range(discrepancies.shape[1])]


def run_abc(sim, q, n_samples, seed, pool=None) -> AbcRun:
    """Marginal ABC with a pool of ``ceil(n_samples / q)`` prior simulations.

    ``pool`` may be a precomputed ``(params, discrepancies, n_failures)``
    triple from :func:`simulate_pool` with the same seed; its prefix is used.
    """
    n = pool_size(n_samples, q)
    if pool is None:
        params, disc, failures = simulate_pool(sim, n, seed)
    else:
        params, disc, failures = pool
        if len(params) < n:
            raise ValueError(f"pool has {len(params)} draws, need {n}")
        params, disc = params[:n], disc[:n]
    return AbcRun(params, disc, q, n_samples, accept(disc, n_samples), tuple(sim.space.names), failures)


def abc_estimates(run: AbcRun):
    """Per-parameter ``(mean, sd)``; ``sd`` is unbiased and ``None`` when ``n_samples == 1``."""
    out = []
    for j in range(run.pool_params.shape[1]):
        v = run.accepted_values(j)
        sd: Optional[float] = float(np.std(v, ddof=1)) if len(v) > 1 else None
        out.append((float(np.mean(v)), sd))
    return out


def write_abc_csv(path, run: AbcRun):
    """One row per pool draw: index, parameters, discrepancies, accepted flags."""
    p = run.pool_params.shape[1]
    names = list(run.names) or [f"theta_{j}" for j in range(p)]
    flags = np.zeros((run.n_pool, p), dtype=int)
    for j, idx in enumerate(run.accepted):
        flags[idx, j] = 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index"] + names + [f"d_{n}" for n in names] + [f"accepted_{n}" for n in names])
        for i in range(run.n_pool):
            writer.writerow([i] + [repr(float(v)) for v in run.pool_params[i]]
                            + [repr(float(v)) for v in run.pool_discrepancies[i]] + flags[i].tolist())
