"""Experiment sweeps: configuration, per-cell execution and aggregation.

A sweep is split into independent cells, one per (dimension, seed). A
Split-BOLFI cell runs once to the largest budget and is evaluated at every
smaller budget along the way; an ABC cell draws one pool large enough for
every (q, n_samples) setting and accepts from its prefixes. Each finished cell
writes a record file, which is what makes interrupted sweeps resumable.
"""

from __future__ import annotations

import contextlib
import csv
import json
import logging
import math
import os
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy
import yaml

from .abc import abc_estimates, pool_size, run_abc, simulate_pool
from .acquisition import AcquisitionConfig
from .engine import FitResult, SplitBolfi
from .gp import KernelConfig
from .proxy import (NearPerfectFitWarning, build_proxy, proxy_moments, symmetrized_kl,
                    tempering_scale, write_moments_csv)
from .simulators import analytic_posterior, gaussian_spec, gvar_spec, read_summaries_csv
from .simulators.daycare import daycare_spec, read_snapshots_csv

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "make_simulator",
    "daycare_strains",
    "evaluate_fit",
    "run_bolfi_cell",
    "run_abc_cell",
    "run_sweep",
    "dump_proxy",
    "BOLFI_COLUMNS",
    "ABC_COLUMNS",
]

logger = logging.getLogger(__name__)

MODELS = ("gaussian", "gvar", "daycare")
FULL_SCALE_DIMS = {"gaussian": [5, 10, 50, 100], "gvar": [6, 21, 101], "daycare": [30]}
PROXY_GRID_POINTS = 512

BOLFI_COLUMNS = ["model", "dim", "n_acq", "w", "n_seeds", "n_simulations",
                 "rmse_gen", "rmse_post", "sd", "skl"]
ABC_COLUMNS = ["model", "dim", "q", "n_samples", "budget", "n_seeds", "rmse_gen", "rmse_post", "sd"]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    model: str
    dims: List[int]
    n_acq: List[int]
    seeds: List[int]
    w_values: List[float] = field(default_factory=lambda: [1.0])
    abc: Optional[Dict[str, list]] = None
    output_dir: str = "results"
    data_file: Optional[str] = None
    kernel: Dict[str, object] = field(default_factory=dict)
    acquisition: Dict[str, object] = field(default_factory=dict)
    simulator: Dict[str, object] = field(default_factory=dict)
    refit_every: int = 5

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model: expected one of {MODELS}, got {self.model!r}")
        for key in ("dims", "n_acq", "seeds", "w_values"):
            value = getattr(self, key)
            if not isinstance(value, (list, tuple)) or len(value) == 0:
                raise ConfigError(f"{key}: expected a non-empty list")
        self.dims = [int(d) for d in self.dims]
        self.n_acq = sorted(int(n) for n in self.n_acq)
        self.seeds = [int(s) for s in self.seeds]
        self.w_values = [float(w) for w in self.w_values]
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds: values must be distinct")
        if any(w <= 0 for w in self.w_values):
            raise ConfigError("w_values: values must be positive")
        if any(d < 1 for d in self.dims):
            raise ConfigError("dims: values must be positive")
        if self.model == "daycare":
            for d in self.dims:
                daycare_strains(d)
        try:
            kcfg, acfg = self.kernel_config(), self.acquisition_config()
        except TypeError as exc:
            raise ConfigError(f"kernel/acquisition: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.n_acq[0] < acfg.n_init:
            raise ConfigError(f"n_acq: budgets must be at least n_init={acfg.n_init}")
        if self.abc is not None:
            unknown = set(self.abc) - {"q", "n_samples"}
            if unknown or not self.abc.get("q") or not self.abc.get("n_samples"):
                raise ConfigError("abc: expected non-empty 'q' and 'n_samples' lists only")
            try:
                for q in self.abc["q"]:
                    for n in self.abc["n_samples"]:
                        pool_size(int(n), float(q))
            except ValueError as exc:
                raise ConfigError(f"abc: {exc}") from None

    def kernel_config(self):
        return KernelConfig(**self.kernel)

    def acquisition_config(self):
        return AcquisitionConfig(**self.acquisition)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a mapping of keys to values")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(k for k in ("model", "dims", "n_acq", "seeds") if k not in doc)
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        return cls(**doc)

    def to_dict(self):
        return asdict(self)


def load_config(path):
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(doc)


def daycare_strains(dim):
    """Number of strains whose symmetric parameterization has ``dim`` parameters."""
    s = int(round((1 + math.sqrt(1 + 8 * (dim - 2))) / 2)) if dim >= 2 else 0
    if s < 2 or s * (s - 1) // 2 + 2 != dim:
        raise ConfigError(f"dims: {dim} is not s(s-1)/2 + 2 for any strain count s >= 2")
    return s


def _load_observed(model, path):
    if path is None:
        return None
    if model == "daycare":
        return read_snapshots_csv(path)
    return read_summaries_csv(path)[1]


def make_simulator(model, dim, seed, options=None, data_file=None):
    """Simulator for one sweep cell; observed data are synthetic unless ``data_file`` is given."""
    options = dict(options or {})
    observed = _load_observed(model, data_file)
    if observed is not None:
        options["observed"] = observed
    if model == "gaussian":
        return gaussian_spec(dim, seed=seed, **options)
    if model == "gvar":
        return gvar_spec(dim, seed=seed, **options)
    if model == "daycare":
        return daycare_spec(daycare_strains(dim), seed=seed, **options)
    raise ConfigError(f"model: unknown {model!r}")


def _proxies(sim, res: FitResult, w):
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearPerfectFitWarning)
        for j in range(sim.space.dim):
            delta = tempering_scale(res.d_min[j], res.d_obs_min[j])
            out.append(build_proxy(res.surrogates[j], sim.space.bounds(j), w, delta, PROXY_GRID_POINTS))
    return out


def evaluate_fit(sim, res: FitResult, w=1.0):
    """Proxy moments and error metrics of one fit at tempering ``w``.

    ``rmse_post`` and ``skl`` compare against the exact marginal posteriors
    and are only available for the Gaussian model; ``skl`` is averaged over
    parameters.
    """
    proxies = _proxies(sim, res, w)
    moments = np.array([proxy_moments(p) for p in proxies])
    means = moments[:, 0]
    out = {"proxies": proxies, "means": means, "modes": moments[:, 1], "sds": moments[:, 2],
           "sd": float(moments[:, 2].mean()), "rmse_gen": None, "rmse_post": None, "skl": None}
    if sim.truth is not None:
        out["rmse_gen"] = float(np.sqrt(np.mean((means - sim.truth) ** 2)))
    if sim.name == "gaussian":
        posts, kls = [], []
        for j, pr in enumerate(proxies):
            exact = analytic_posterior(sim.observed_summaries[j], sim.info["n"], sim.space.bounds(j))
            posts.append(exact.mean())
            kls.append(symmetrized_kl(pr.density, exact.pdf(pr.grid), pr.grid))
        out["rmse_post"] = float(np.sqrt(np.mean((means - np.array(posts)) ** 2)))
        out["skl"] = float(np.mean(kls))
    return out


def _cell_dir(out_dir, model, dim, seed):
    return os.path.join(out_dir, "cells", f"{model}_d{dim}_s{seed}")


def _write_json(path, doc):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)


def run_bolfi_cell(config: ExperimentConfig, dim, seed, out_dir=None):
    """Run one (dim, seed) cell to the largest budget; returns its records.

    With ``out_dir`` the fit at each budget is saved as JSON, proxy moments
    as CSV, and a ``record.json`` marks the cell complete.
    """
    sim = make_simulator(config.model, dim, seed, config.simulator, config.data_file)
    run = SplitBolfi(sim, config.kernel_config(), config.acquisition_config(), seed, config.refit_every)
    cell = _cell_dir(out_dir, config.model, dim, seed) if out_dir else None
    if cell:
        os.makedirs(cell, exist_ok=True)
    records = []
    for n in config.n_acq:
        run.run(n)
        res = run.result()
        if cell:
            with open(os.path.join(cell, f"fit_n{n}.json"), "w") as fh:
                fh.write(res.to_json())
        for w in config.w_values:
            ev = evaluate_fit(sim, res, w)
            if cell:
                write_moments_csv(os.path.join(cell, f"moments_n{n}_w{w:g}.csv"),
                                  sim.space.names, ev["proxies"])
            records.append({"dim": dim, "seed": seed, "n_acq": n, "w": w,
                            "n_simulations": res.n_simulations, "n_failures": res.n_failures,
                            **{k: ev[k] for k in ("rmse_gen", "rmse_post", "sd", "skl")},
                            "means": ev["means"].tolist(), "modes": ev["modes"].tolist()})
    if cell:
        _write_json(os.path.join(cell, "record.json"), {"records": records})
    return records


def run_abc_cell(config: ExperimentConfig, dim, seed, out_dir=None):
    """All (q, n_samples) settings of one (dim, seed) cell from one shared pool."""
    sim = make_simulator(config.model, dim, seed, config.simulator, config.data_file)
    settings = [(float(q), int(n)) for q in config.abc["q"] for n in config.abc["n_samples"]]
    largest = max(pool_size(n, q) for q, n in settings)
    pool = simulate_pool(sim, largest, seed)
    posts = None
    if sim.name == "gaussian":
        posts = np.array([analytic_posterior(sim.observed_summaries[j], sim.info["n"],
                                             sim.space.bounds(j)).mean() for j in range(sim.space.dim)])
    records = []
    for q, n in settings:
        est = abc_estimates(run_abc(sim, q, n, seed, pool=pool))
        means = np.array([m for m, _ in est])
        sds = [s for _, s in est]
        records.append({
            "dim": dim, "seed": seed, "q": q, "n_samples": n, "budget": pool_size(n, q),
            "rmse_gen": float(np.sqrt(np.mean((means - sim.truth) ** 2))) if sim.truth is not None else None,
            "rmse_post": float(np.sqrt(np.mean((means - posts) ** 2))) if posts is not None else None,
            "sd": None if sds[0] is None else float(np.mean(sds)),
        })
    if out_dir:
        os.makedirs(os.path.join(out_dir, "abc_cells"), exist_ok=True)
        _write_json(os.path.join(out_dir, "abc_cells", f"{config.model}_d{dim}_s{seed}.json"),
                    {"records": records})
    return records


def _record_path(out_dir, kind, model, dim, seed):
    if kind == "bolfi":
        return os.path.join(_cell_dir(out_dir, model, dim, seed), "record.json")
    return os.path.join(out_dir, "abc_cells", f"{model}_d{dim}_s{seed}.json")


def _execute(kind, config_doc, dim, seed, out_dir):
    config = ExperimentConfig.from_dict(config_doc)
    fn = run_bolfi_cell if kind == "bolfi" else run_abc_cell
    fn(config, dim, seed, out_dir)
    return dim, seed


def _mean_or_none(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _aggregate(kind, config, records):
    keys = ("dim", "n_acq", "w") if kind == "bolfi" else ("dim", "q", "n_samples")
    groups = {}
    for r in records:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    rows = []
    for key in sorted(groups):
        rs = groups[key]
        row = {"model": config.model, **dict(zip(keys, key)), "n_seeds": len(rs)}
        if kind == "bolfi":
            sims = [r["n_simulations"] for r in rs]
            row["n_simulations"] = sims[0] if len(set(sims)) == 1 else float(np.mean(sims))
            for k in ("rmse_gen", "rmse_post", "sd", "skl"):
                row[k] = _mean_or_none([r[k] for r in rs])
        else:
            row["budget"] = rs[0]["budget"]
            for k in ("rmse_gen", "rmse_post", "sd"):
                row[k] = _mean_or_none([r[k] for r in rs])
        rows.append(row)
    return rows


def _write_summary(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def run_sweep(config: ExperimentConfig, kind="bolfi", out_dir=None, workers=1):
    """Run every missing cell, then aggregate all completed cells.

    Returns
    -------
    (summary_path, n_failed_cells)
    """
    if kind == "abc" and config.abc is None:
        raise ConfigError("abc: section required for the abc subcommand")
    out_dir = out_dir or config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    started = time.time()
    cells = [(d, s) for d in config.dims for s in config.seeds]
    todo = [c for c in cells if not os.path.exists(_record_path(out_dir, kind, config.model, *c))]
    logger.info("%d of %d cells to run", len(todo), len(cells))
    failed = []
    doc = config.to_dict()
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {c: pool.submit(_execute, kind, doc, c[0], c[1], out_dir) for c in todo}
            for c, fut in futures.items():
                try:
                    fut.result()
                except Exception as exc:
                    logger.error("cell dim=%d seed=%d failed: %s", c[0], c[1], exc)
                    failed.append(c)
    else:
        for c in todo:
            try:
                _execute(kind, doc, c[0], c[1], out_dir)
            except Exception as exc:
                logger.error("cell dim=%d seed=%d failed: %s", c[0], c[1], exc)
                failed.append(c)

    records = []
    for c in cells:
        path = _record_path(out_dir, kind, config.model, *c)
        if os.path.exists(path):
            with open(path) as fh:
                records.extend(json.load(fh)["records"])
    columns = BOLFI_COLUMNS if kind == "bolfi" else ABC_COLUMNS
    summary = os.path.join(out_dir, f"summary_{kind}.csv")
    _write_summary(summary, columns, _aggregate(kind, config, records))
    _write_json(os.path.join(out_dir, f"manifest_{kind}.json"), {
        "config": doc,
        "versions": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "wall_clock_seconds": round(time.time() - started, 3),
        "cells_total": len(cells),
        "cells_run": len(todo) - len(failed),
        "cells_failed": [list(c) for c in failed],
        "summary": os.path.basename(summary),
    })
    return summary, len(failed)


def dump_proxy(fit_path, parameter, out, w=1.0, grid_points=PROXY_GRID_POINTS):
    """Tabulate one parameter's surrogate and proxy from a saved fit.

    Columns: theta, gp_mean, gp_sd, proxy_density, acquisition_points. The
    last column lists the acquired values of the parameter in order and is
    blank past ``n_acq`` rows (or padded rows are added when ``n_acq`` exceeds
    the grid size).
    """
    with open(fit_path) as fh:
        res = FitResult.from_json(fh.read())
    try:
        j = res.space.index(parameter)
    except KeyError:
        raise ConfigError(f"unknown parameter {parameter!r}; available: {', '.join(res.space.names)}") from None
    gp = res.surrogates[j]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearPerfectFitWarning)
        delta = tempering_scale(res.d_min[j], res.d_obs_min[j])
    pr = build_proxy(gp, res.space.bounds(j), w, delta, grid_points)
    _, var = gp.predict(pr.grid)
    acquired = res.log.column(j)[0]
    n_rows = max(len(pr.grid), len(acquired))
    with open(out, "w", newline="") if isinstance(out, str) else contextlib.nullcontext(out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta", "gp_mean", "gp_sd", "proxy_density", "acquisition_points"])
        for i in range(n_rows):
            row = [repr(float(pr.grid[i])), repr(float(pr.mu[i])), repr(float(np.sqrt(var[i]))),
                   repr(float(pr.density[i]))] if i < len(pr.grid) else ["", "", "", ""]
            row.append(repr(float(acquired[i])) if i < len(acquired) else "")
            writer.writerow(row)
    return pr
