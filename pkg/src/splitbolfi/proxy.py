"""Exponentiated-loss marginal posterior proxies.

The proxy likelihood for parameter ``j`` is ``exp(-(w / delta_j) * mu_j)``
where ``mu_j`` is the surrogate's predictive mean. With uniform priors the
proxy posterior is that likelihood normalized over the prior support, and the
joint proxy is the product of the marginals.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid

from .gp import GpSurrogate

__all__ = [
    "DELTA_FLOOR",
    "NearPerfectFitWarning",
    "MarginalProxy",
    "tempering_scale",
    "proxy_from_mean",
    "build_proxy",
    "proxy_moments",
    "symmetrized_kl",
    "joint_log_density",
    "write_proxy_csv",
    "write_moments_csv",
]

DELTA_FLOOR = 1e-8
_DENSITY_FLOOR = 1e-300


class NearPerfectFitWarning(UserWarning):
    """Both minimum discrepancies are at the floor; tempering scale was clamped."""


@dataclass(frozen=True, eq=False)
class MarginalProxy:
    grid: np.ndarray
    mu: np.ndarray
    delta: float
    w: float
    density: np.ndarray
    delta_floored: bool = False

    @property
    def spacing(self):
        return float(self.grid[1] - self.grid[0])


def tempering_scale(d_min: float, d_obs_min: float) -> float:
    """Per-parameter tempering scale.

    The larger of the surrogate-mean minimum and the smallest observed
    discrepancy; a non-positive surrogate minimum is replaced by the observed
    one. Floored at :data:`DELTA_FLOOR`, with a :class:`NearPerfectFitWarning`.

    >>> tempering_scale(0.5, 0.7)
    0.7
    >>> tempering_scale(-0.2, 0.3)
    0.3
    """
    if not np.isfinite(d_obs_min):
        raise ValueError("d_obs_min must be finite")
    delta = max(d_min, d_obs_min) if d_min > 0 else d_obs_min
    if delta <= DELTA_FLOOR:
        warnings.warn(f"tempering scale {delta!r} floored at {DELTA_FLOOR}", NearPerfectFitWarning,
                      stacklevel=2)
        return DELTA_FLOOR
    return float(delta)


def proxy_from_mean(grid, mu, w: float = 1.0, delta: float = 1.0,
                    log_prior: Optional[Callable] = None) -> MarginalProxy:
    """Normalized proxy density from predictive means on an equally spaced grid."""
    if not (w > 0 and delta > 0):
        raise ValueError("w and delta must be positive")
    grid = np.asarray(grid, dtype=float)
    mu = np.asarray(mu, dtype=float)
    # shift by the minimum before exponentiating; cancels in normalization
    log_density = -(w / delta) * (mu - mu.min())
    if log_prior is not None:
        lp = np.asarray(log_prior(grid), dtype=float)
        log_density = log_density + (lp - lp[np.isfinite(lp)].max())
    density = np.exp(log_density)
    density /= trapezoid(density, grid)
    return MarginalProxy(grid, mu, float(delta), float(w), density, delta <= DELTA_FLOOR)


def build_proxy(gp: GpSurrogate, support, w: float = 1.0, delta: float = 1.0,
                grid_points: int = 512, log_prior: Optional[Callable] = None) -> MarginalProxy:
    """Evaluate the surrogate mean on a grid over ``support`` and normalize the proxy."""
    grid = np.linspace(support[0], support[1], grid_points)
    mu, _ = gp.predict(grid)
    return proxy_from_mean(grid, mu, w, delta, log_prior)


def proxy_moments(proxy: MarginalProxy):
    """``(mean, mode, sd)`` by trapezoid quadrature; mode at grid resolution."""
    g, p = proxy.grid, proxy.density
    mean = trapezoid(g * p, g)
    var = trapezoid((g - mean) ** 2 * p, g)
    mode = g[int(np.argmax(p))]
    return float(mean), float(mode), float(np.sqrt(max(var, 0.0)))


def symmetrized_kl(p, q, grid) -> float:
    """``KL(p||q) + KL(q||p)`` for densities tabulated on a common grid."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if p.shape != q.shape or p.shape != grid.shape:
        raise ValueError("densities must be tabulated on the same grid")
    p = np.maximum(p, _DENSITY_FLOOR)
    q = np.maximum(q, _DENSITY_FLOOR)
    return float(max(trapezoid((p - q) * (np.log(p) - np.log(q)), grid), 0.0))


def joint_log_density(proxies, points):
    """Log of the joint proxy, the product of the marginals, at ``points`` of shape ``(m, p)``.

    Marginal densities are linearly interpolated between grid nodes.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != len(proxies):
        raise ValueError(f"points have {points.shape[1]} columns, expected {len(proxies)}")
    total = np.zeros(points.shape[0])
    for j, pr in enumerate(proxies):
        dens = np.interp(points[:, j], pr.grid, pr.density, left=0.0, right=0.0)
        with np.errstate(divide="ignore"):
            total += np.log(dens)
    return total


def write_proxy_csv(path_or_file, proxy: MarginalProxy, parameter: Optional[str] = None):
    rows = zip(proxy.grid, proxy.mu, proxy.density)
    header = ["theta", "mu", "density"]
    if parameter is not None:
        header = ["parameter"] + header
        rows = ((parameter, *r) for r in rows)
    _write_rows(path_or_file, header, rows)


def write_moments_csv(path_or_file, names, proxies):
    rows = ((name, *proxy_moments(pr), pr.delta, pr.w) for name, pr in zip(names, proxies))
    _write_rows(path_or_file, ["parameter", "mean", "mode", "sd", "delta", "w"], rows)


def _write_rows(path_or_file, header, rows):
    if hasattr(path_or_file, "write"):
        writer = csv.writer(path_or_file)
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(path_or_file, "w", newline="") as fh:
        _write_rows(fh, header, rows)
