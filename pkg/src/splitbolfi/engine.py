"""The Split-BOLFI loop.

One evaluation log and one GP surrogate per parameter. Every simulation yields
a full vector of per-parameter discrepancies, so each simulation informs all
surrogates at once.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import _seeding
from .acquisition import AcquisitionConfig, acquire_round, grid_golden_minimize
from .gp import GpSurrogate, Hyperparams, KernelConfig, condition, fit_hyperparams

__all__ = [
    "ParameterSpace",
    "EvaluationLog",
    "FitResult",
    "SimulationError",
    "SplitBolfi",
    "run_split_bolfi",
    "minimize_posterior_mean",
]

logger = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    """A simulator call produced no usable discrepancy vector."""


@dataclass(frozen=True, eq=False)
class ParameterSpace:
    """Named parameters with independent uniform priors on ``[lower, upper]``."""

    names: tuple
    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, names: Sequence[str], lower, upper):
        names = tuple(str(n) for n in names)
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (len(names),)).copy()
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (len(names),)).copy()
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        if not np.all(np.isfinite(lower) & np.isfinite(upper)) or np.any(lower >= upper):
            raise ValueError("each parameter needs finite bounds with lower < upper")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def __eq__(self, other):
        if not isinstance(other, ParameterSpace):
            return NotImplemented
        return (self.names == other.names and np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper))

    __hash__ = None

    @property
    def dim(self):
        return len(self.names)

    def bounds(self, j):
        return float(self.lower[j]), float(self.upper[j])

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown parameter {name!r}") from None

    def sample_coordinate(self, j, rng):
        return float(rng.uniform(self.lower[j], self.upper[j]))

    def sample(self, rng, size=None):
        if size is None:
            return rng.uniform(self.lower, self.upper)
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))

    def contains(self, theta):
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def to_dict(self):
        return {"names": list(self.names), "lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["names"], d["lower"], d["upper"])


@dataclass
class EvaluationLog:
    params: List[np.ndarray] = field(default_factory=list)
    discrepancies: List[np.ndarray] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)

    def __len__(self):
        return len(self.params)

    def append(self, theta, d, seed):
        d = np.asarray(d, dtype=float)
        if not (np.all(np.isfinite(d)) and np.all(d >= 0)):
            raise ValueError("discrepancies must be finite and non-negative")
        if self.params and (len(theta) != len(self.params[0]) or len(d) != len(theta)):
            raise ValueError("row dimension mismatch")
        self.params.append(np.asarray(theta, dtype=float))
        self.discrepancies.append(d)
        self.seeds.append(int(seed))

    def column(self, j):
        """``(theta_j, d_j)`` pairs for parameter ``j``."""
        return (np.array([row[j] for row in self.params]),
                np.array([row[j] for row in self.discrepancies]))

    def as_arrays(self):
        return np.array(self.params), np.array(self.discrepancies)

    def copy(self):
        return EvaluationLog(list(self.params), list(self.discrepancies), list(self.seeds))


@dataclass
class FitResult:
    space: ParameterSpace
    surrogates: List[GpSurrogate]
    d_min: np.ndarray
    d_obs_min: np.ndarray
    log: EvaluationLog
    kernel_config: KernelConfig
    acquisition_config: AcquisitionConfig
    n_simulations: int = 0
    n_failures: int = 0

    @property
    def n_acq(self):
        return len(self.log)

    def to_json(self):
        params, disc = self.log.as_arrays()
        doc = {
            "space": self.space.to_dict(),
            "kernel_config": asdict(self.kernel_config),
            "acquisition_config": asdict(self.acquisition_config),
            "log": [
                {"theta": params[t].tolist(), "discrepancies": disc[t].tolist(), "seed": self.log.seeds[t]}
                for t in range(len(self.log))
            ],
            "hyperparams": [asdict(gp.hyperparams) for gp in self.surrogates],
            "prior_means": [gp.prior_mean for gp in self.surrogates],
            "d_min": self.d_min.tolist(),
            "d_obs_min": self.d_obs_min.tolist(),
            "n_simulations": self.n_simulations,
            "n_failures": self.n_failures,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        space = ParameterSpace.from_dict(doc["space"])
        kcfg = KernelConfig(**doc["kernel_config"])
        acfg = AcquisitionConfig(**doc["acquisition_config"])
        log = EvaluationLog()
        for row in doc["log"]:
            log.append(row["theta"], row["discrepancies"], row["seed"])
        surrogates = []
        for j in range(space.dim):
            x, y = log.column(j)
            hp = Hyperparams(**doc["hyperparams"][j])
            if len(x) < 2:
                surrogates.append(GpSurrogate(x, y, hp, doc["prior_means"][j], kcfg.nu, kcfg.noise_floor))
            else:
                surrogates.append(condition(x, y, hp, nu=kcfg.nu, jitter=kcfg.noise_floor,
                                            prior_mean=doc["prior_means"][j]))
        return cls(space, surrogates, np.array(doc["d_min"]), np.array(doc["d_obs_min"]), log,
                   kcfg, acfg, doc.get("n_simulations", len(log)), doc.get("n_failures", 0))


def minimize_posterior_mean(gp: GpSurrogate, support, grid_points=256, refine_iters=20):
    """Minimum of the predictive mean over ``support``; returns ``(argmin, d_min)``.

    Negative minima are returned unchanged.
    """
    def f(x):
        return gp.predict(x)[0]
    return grid_golden_minimize(f, support[0], support[1], grid_points, refine_iters)


class SplitBolfi:
    """Stateful Split-BOLFI run that can be advanced and snapshotted.

    Parameters
    ----------
    simulator : SimulatorSpec
        Provides ``space`` and ``discrepancies(theta, seed)``.
    kernel_config, acquisition_config
        Surrogate and acquisition settings.
    seed : int
        Master seed; all randomness is drawn from substreams of it.
    refit_every : int
        Acquisitions between MAP refits. Between refits surrogates are
        re-conditioned on new data with fixed hyperparameters.
    """

    def __init__(self, simulator, kernel_config=KernelConfig(),
                 acquisition_config=AcquisitionConfig(), seed=0, refit_every=5):
        if refit_every < 1:
            raise ValueError("refit_every must be positive")
        self.simulator = simulator
        self.space = simulator.space
        self.kernel_config = kernel_config
        self.acquisition_config = acquisition_config
        self.seed = int(seed)
        self.refit_every = refit_every
        self.log = EvaluationLog()
        self.rounds = 0
        self.n_simulations = 0
        self.n_failures = 0
        self._keys = [_seeding.name_key(n) for n in self.space.names]
        self._surrogates: Optional[List[GpSurrogate]] = None
        self._since_refit = 0

    # -- surrogate maintenance

    def _fit(self, j, warm=None, cold=True):
        x, y = self.log.column(j)
        hseed = _seeding.subseed(self.seed, self.rounds, _seeding.HYPER, self._keys[j])
        if warm is None or warm.is_prior:
            return fit_hyperparams(x, y, self.kernel_config, seed=hseed)
        return fit_hyperparams(x, y, self.kernel_config, seed=hseed, warm_start=warm.hyperparams,
                               n_starts=None if cold else 0)

    def _update_surrogates(self):
        p = self.space.dim
        if self._surrogates is None:
            self._surrogates = [self._fit(j) for j in range(p)]
            self._since_refit = 0
        elif self._since_refit >= self.refit_every:
            self._surrogates = [self._fit(j, warm=self._surrogates[j], cold=False) for j in range(p)]
            self._since_refit = 0
        else:
            updated = []
            for j, gp in enumerate(self._surrogates):
                x, y = self.log.column(j)
                if gp.is_prior:
                    updated.append(self._fit(j))
                else:
                    updated.append(condition(x, y, gp.hyperparams, nu=gp.nu, jitter=gp.jitter))
            self._surrogates = updated

    # -- loop

    def step(self):
        """Run one acquisition round (one simulator call plus at most one retry)."""
        t = self.rounds
        cfg = self.acquisition_config
        rngs = [_seeding.substream(self.seed, t, _seeding.ACQUIRE, k) for k in self._keys]
        if t < cfg.n_init or len(self.log) == 0:
            theta = np.array([self.space.sample_coordinate(j, rng) for j, rng in enumerate(rngs)])
        else:
            self._update_surrogates()
            theta = acquire_round(self._surrogates, self.space, cfg, rngs, t)

        for role in (_seeding.SIMULATE, _seeding.RETRY):
            sim_seed = _seeding.subseed(self.seed, t, role)
            self.n_simulations += 1
            try:
                d = self.simulator.discrepancies(theta, sim_seed)
            except SimulationError as exc:
                logger.warning("round %d: simulation failed (%s)", t, exc)
                self.n_failures += 1
                continue
            self.log.append(theta, d, sim_seed)
            self._since_refit += 1
            break
        else:
            logger.warning("round %d skipped after retry", t)
        self.rounds += 1

    def run(self, n_acq):
        """Advance until ``n_acq`` rounds have been run in total."""
        while self.rounds < n_acq:
            self.step()
        return self

    def result(self) -> FitResult:
        """Final cold MAP fit of every surrogate plus tempering inputs.

        Does not alter the loop state, so the run can continue afterwards.
        """
        if len(self.log) == 0:
            raise SimulationError("no successful simulations")
        p = self.space.dim
        warm = self._surrogates or [None] * p
        surrogates = [self._fit(j, warm=warm[j], cold=True) for j in range(p)]
        d_min = np.array([
            minimize_posterior_mean(surrogates[j], self.space.bounds(j),
                                    self.acquisition_config.grid_points,
                                    self.acquisition_config.refine_iters)[1]
            for j in range(p)
        ])
        _, disc = self.log.as_arrays()
        return FitResult(self.space, surrogates, d_min, disc.min(axis=0), self.log.copy(),
                         self.kernel_config, self.acquisition_config,
                         self.n_simulations, self.n_failures)


def run_split_bolfi(simulator, n_acq, kernel_config=KernelConfig(),
                    acquisition_config=AcquisitionConfig(), seed=0, refit_every=5) -> FitResult:
    """Run ``n_acq`` acquisition rounds and return the fitted surrogates.

    Examples
    --------
    >>> from splitbolfi.simulators import gaussian_spec
    >>> res = run_split_bolfi(gaussian_spec(dim=2, seed=1), n_acq=12, seed=1)
    >>> res.n_acq
    12
    """
    if n_acq < acquisition_config.n_init:
        raise ValueError("n_acq must be at least n_init")
    return SplitBolfi(simulator, kernel_config, acquisition_config, seed, refit_every).run(n_acq).result()
