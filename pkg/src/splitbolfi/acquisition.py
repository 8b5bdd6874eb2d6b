"""Marginal lower-confidence-bound acquisition.

Every parameter has its own surrogate, so choosing the next simulation point
splits into independent 1-D minimizations of ``mean - beta * sd``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gp import GpSurrogate

__all__ = [
    "AcquisitionConfig",
    "lcb",
    "grid_golden_minimize",
    "acquire_marginal",
    "acquire_round",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AcquisitionConfig:
    beta: float = 2.0
    n_init: int = 10
    jitter_fraction: float = 0.05
    grid_points: int = 256
    refine_iters: int = 20

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")
        if self.n_init < 1:
            raise ValueError("n_init must be positive")
        if not 0 <= self.jitter_fraction < 0.5:
            raise ValueError("jitter_fraction must lie in [0, 0.5)")
        if self.grid_points < 16:
            raise ValueError("grid_points must be at least 16")
        if self.refine_iters < 0:
            raise ValueError("refine_iters must be non-negative")


def lcb(mean, sd, beta):
    """Lower confidence bound ``mean - beta * sd``."""
    return np.asarray(mean) - beta * np.asarray(sd)


def grid_golden_minimize(f, lower, upper, grid_points=256, refine_iters=20):
    """Minimize a 1-D function on ``[lower, upper]``.

    ``f`` must accept an array of points. The best point of a uniform grid is
    refined by golden-section search over its two neighbouring cells; the
    refined point replaces it only if strictly better. Ties on the grid go to
    the lowest coordinate.

    Returns
    -------
    (x, fx)
    """
    grid = np.linspace(lower, upper, grid_points)
    values = np.asarray(f(grid), dtype=float)
    i = int(np.argmin(values))
    best_x, best_f = float(grid[i]), float(values[i])
    if refine_iters == 0:
        return best_x, best_f

    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, grid_points - 1)])

    def g(x):
        return float(np.asarray(f(np.array([x])), dtype=float)[0])

    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = g(c), g(d)
    for _ in range(refine_iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = g(d)
    x, fx = (c, fc) if fc <= fd else (d, fd)
    if fx < best_f:
        return x, fx
    return best_x, best_f


def _lcb_of(gp: GpSurrogate, beta):
    def f(x):
        mean, var = gp.predict(x)
        return mean - beta * np.sqrt(var)
    return f


def acquire_marginal(gp: GpSurrogate, support, config: AcquisitionConfig, rng) -> float:
    """Next acquisition for one parameter.

    Minimizes the LCB over ``support``, then perturbs the minimizer by uniform
    noise of half-width ``jitter_fraction * width`` and clamps to the support.
    """
    lower, upper = float(support[0]), float(support[1])
    if not upper > lower:
        raise ValueError(f"empty support {support!r}")
    x, _ = grid_golden_minimize(_lcb_of(gp, config.beta), lower, upper,
                                config.grid_points, config.refine_iters)
    if config.jitter_fraction > 0:
        half = config.jitter_fraction * (upper - lower)
        x += rng.uniform(-half, half)
    return min(max(x, lower), upper)


def acquire_round(gps, space, config: AcquisitionConfig, rngs, round_index: int):
    """One full parameter vector.

    Parameters
    ----------
    gps : sequence of GpSurrogate or None
        One surrogate per parameter; ignored during initialization.
    space : ParameterSpace
    config : AcquisitionConfig
    rngs : sequence of numpy Generators
        One independent stream per parameter.
    round_index : int
        Rounds below ``config.n_init`` return a draw from the prior.
    """
    p = space.dim
    if len(rngs) != p:
        raise ValueError(f"expected {p} random streams, got {len(rngs)}")
    if round_index < config.n_init:
        return np.array([space.sample_coordinate(j, rngs[j]) for j in range(p)])
    if gps is None or len(gps) != p:
        raise ValueError(f"expected {p} surrogates, got {0 if gps is None else len(gps)}")
    return np.array([acquire_marginal(gps[j], space.bounds(j), config, rngs[j])
                     for j in range(p)])
