"""Common simulator interface and discrepancy helpers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from ..engine import ParameterSpace, SimulationError

__all__ = [
    "SimulatorSpec",
    "summary_difference",
    "write_summaries_csv",
    "read_summaries_csv",
]


def summary_difference(sim, obs, norm="squared"):
    """Elementwise distance between summary values; ``norm`` is 'squared' or 'absolute'."""
    diff = np.asarray(sim, dtype=float) - np.asarray(obs, dtype=float)
    if norm == "squared":
        return diff * diff
    if norm == "absolute":
        return np.abs(diff)
    raise ValueError(f"unknown norm {norm!r}")


@dataclass
class SimulatorSpec:
    """Forward model, summaries and per-parameter discrepancy rule.

    ``simulate(theta, seed)`` must be a pure function of its arguments.
    ``discrepancy_map(sim_summaries, obs_summaries)`` returns one non-negative
    value per parameter.
    """

    space: ParameterSpace
    simulate: Callable[[np.ndarray, int], Any]
    summaries: Callable[[Any], np.ndarray]
    discrepancy_map: Callable[[np.ndarray, np.ndarray], np.ndarray]
    observed_summaries: np.ndarray
    summary_names: Sequence[str] = ()
    truth: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.info.get("model", "custom")

    def summarize(self, theta, seed):
        return np.asarray(self.summaries(self.simulate(np.asarray(theta, dtype=float), seed)),
                          dtype=float)

    def discrepancies(self, theta, seed):
        """Per-parameter discrepancies for one simulation at ``theta``."""
        try:
            phi = self.summarize(theta, seed)
        except (FloatingPointError, OverflowError) as exc:
            raise SimulationError(str(exc)) from exc
        d = np.asarray(self.discrepancy_map(phi, self.observed_summaries), dtype=float)
        if d.shape != (self.space.dim,):
            raise ValueError(f"discrepancy map returned shape {d.shape}, expected ({self.space.dim},)")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise SimulationError("non-finite or negative discrepancy")
        return d


def write_summaries_csv(path, names, values):
    """One header row of summary names, one row of values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names))
        writer.writerow([repr(float(v)) for v in values])


def read_summaries_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: expected a header and a value row")
    names = rows[0]
    values = np.array([float(v) for v in rows[1]])
    if len(names) != len(values):
        raise ValueError(f"{path}: header has {len(names)} names but {len(values)} values")
    return names, values
