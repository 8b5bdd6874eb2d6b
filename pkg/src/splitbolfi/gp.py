"""One-dimensional Gaussian-process surrogates for per-parameter discrepancies.

Each surrogate models a scalar discrepancy as a function of a single
parameter coordinate with a Matérn kernel, a constant prior mean equal to the
mean of the observed targets, and homoscedastic Gaussian noise.
Hyperparameters are fitted by maximum a posteriori estimation under an
exponential prior on the signal variance, an exponential prior on the noise
variance and a gamma prior on the lengthscale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize, minimize_scalar

__all__ = [
    "KernelConfig",
    "Hyperparams",
    "GpSurrogate",
    "DegenerateDataError",
    "kernel_eval",
    "gram_matrix",
    "condition",
    "fit_hyperparams",
    "predict",
    "log_posterior",
]

_LOG_2PI = math.log(2.0 * math.pi)

# search box for the MAP fit, in natural units
_LENGTHSCALE_BOUNDS = (1e-3, 1e3)
_NOISE_RATIO_BOUNDS = (1e-9, 1e2)
_MIN_SIGNAL_VARIANCE = 1e-12
_MAX_JITTER_ESCALATIONS = 6


class DegenerateDataError(ValueError):
    """Raised when the Gram matrix cannot be factorized even after adding jitter."""


@dataclass(frozen=True)
class KernelConfig:
    """Kernel family, hyperpriors and fitting options.

    Parameters
    ----------
    variance_prior_rate : float
        Rate of the exponential prior on the signal variance.
    lengthscale_prior_shape, lengthscale_prior_rate : float
        Shape and rate of the gamma prior on the lengthscale.
    lengthscale_fixed : float, optional
        If given, the lengthscale is held at this value and its prior is ignored.
    noise_floor : float
        Relative jitter; ``noise_floor * signal_variance`` is always added to the
        diagonal of the Gram matrix.
    noise_prior_rate : float
        Rate of the exponential prior on the noise variance.
    nu : float
        Matérn order, one of 0.5, 1.5 or 2.5.
    n_starts : int
        Number of optimizer starts drawn from the hyperpriors for a cold fit.
    """

    variance_prior_rate: float = 1.0
    lengthscale_prior_shape: float = 2.0
    lengthscale_prior_rate: float = 2.0
    lengthscale_fixed: Optional[float] = None
    noise_floor: float = 1e-6
    noise_prior_rate: float = 1.0
    nu: float = 2.5
    n_starts: int = 5

    def __post_init__(self):
        for name in ("variance_prior_rate", "lengthscale_prior_shape",
                     "lengthscale_prior_rate", "noise_floor", "noise_prior_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if self.lengthscale_fixed is not None and not self.lengthscale_fixed > 0:
            raise ValueError("lengthscale_fixed must be positive")
        if self.nu not in (0.5, 1.5, 2.5):
            raise ValueError(f"unsupported Matérn order {self.nu}")
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")


@dataclass(frozen=True)
class Hyperparams:
    signal_variance: float
    lengthscale: float
    noise_variance: float


def kernel_eval(r, sigma_f2: float, lengthscale: float, nu: float = 2.5):
    """Matérn covariance as a function of distance.

    Parameters
    ----------
    r : float or ndarray
        Non-negative distances.
    sigma_f2 : float
        Signal variance.
    lengthscale : float
        Kernel lengthscale.
    nu : float
        Matérn order (0.5, 1.5 or 2.5).

    Examples
    --------
    >>> round(float(kernel_eval(1.0, 1.0, 1.0)), 4)
    0.524
    """
    r = np.asarray(r, dtype=float)
    if not (np.all(np.isfinite(r)) and math.isfinite(sigma_f2) and math.isfinite(lengthscale)):
        raise ValueError("kernel inputs must be finite")
    if np.any(r < 0):
        raise ValueError("distances must be non-negative")
    if sigma_f2 <= 0 or lengthscale <= 0:
        raise ValueError("signal variance and lengthscale must be positive")
    return sigma_f2 * _matern_correlation(r / lengthscale, nu)


def _matern_correlation(u, nu):
    if nu == 2.5:
        s = np.multiply(u, math.sqrt(5.0))
        e = np.exp(-s)
        s *= 1.0 / 3.0
        s += 1.0
        s *= u
        s *= math.sqrt(5.0)
        s += 1.0
        s *= e
        return s
    if nu == 1.5:
        s = np.multiply(u, math.sqrt(3.0))
        e = np.exp(-s)
        s += 1.0
        s *= e
        return s
    if nu == 0.5:
        return np.exp(-u)
    raise ValueError(f"unsupported Matérn order {nu}")


def gram_matrix(x, z, sigma_f2, lengthscale, nu=2.5):
    """Cross-covariance matrix between 1-D input sets ``x`` and ``z``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    return kernel_eval(np.abs(x[:, None] - z[None, :]), sigma_f2, lengthscale, nu)


@dataclass(frozen=True, eq=False)
class GpSurrogate:
    """A fitted 1-D GP. Immutable; build with :func:`condition` or :func:`fit_hyperparams`."""

    inputs: np.ndarray
    targets: np.ndarray
    hyperparams: Hyperparams
    prior_mean: float
    nu: float = 2.5
    jitter: float = 1e-6
    gram_factor: Optional[np.ndarray] = field(default=None, repr=False)
    alpha: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self):
        return len(self.inputs)

    @property
    def is_prior(self):
        """True when the surrogate carries no factorization and predicts the prior."""
        return self.gram_factor is None

    def predict(self, query):
        """Posterior mean and latent variance at ``query`` (scalar or array)."""
        q = np.asarray(query, dtype=float)
        if not np.all(np.isfinite(q)):
            raise ValueError("query must be finite")
        flat = q.reshape(-1)
        hp = self.hyperparams
        if self.is_prior:
            mean = np.full(flat.shape, self.prior_mean)
            var = np.full(flat.shape, hp.signal_variance)
        else:
            k = _matern_correlation(np.abs(flat[:, None] - self.inputs[None, :]) / hp.lengthscale,
                                    self.nu)
            k *= hp.signal_variance
            mean = self.prior_mean + k @ self.alpha
            v = solve_triangular(self.gram_factor, k.T, lower=True, check_finite=False)
            var = hp.signal_variance - np.einsum("ij,ij->j", v, v)
            np.maximum(var, 0.0, out=var)
        if q.ndim == 0:
            return float(mean[0]), float(var[0])
        return mean.reshape(q.shape), var.reshape(q.shape)


def _as_training_arrays(inputs, targets):
    x = np.asarray(inputs, dtype=float).reshape(-1)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise ValueError(f"inputs and targets differ in length: {x.shape} vs {y.shape}")
    if x.size == 0:
        raise ValueError("at least one training point is required")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    return x, y


def _factorize(corr, diag):
    """Cholesky of ``corr + diag*I``, escalating the diagonal on failure."""
    n = corr.shape[0]
    extra = 0.0
    idx = np.arange(n)
    for _ in range(_MAX_JITTER_ESCALATIONS):
        try:
            a = corr.copy()
            a[idx, idx] += diag + extra
            return cholesky(a, lower=True, check_finite=False, overwrite_a=True), extra
        except LinAlgError:
            extra = max(10.0 * extra, 1e-8)
    raise DegenerateDataError("Gram matrix is not positive definite even with added jitter")


def condition(inputs, targets, hyperparams: Hyperparams, nu: float = 2.5,
              jitter: float = 1e-6, prior_mean: Optional[float] = None) -> GpSurrogate:
    """Condition a GP with fixed hyperparameters on training data.

    ``jitter`` is relative to the signal variance. The prior mean defaults to
    the mean of ``targets``.
    """
    x, y = _as_training_arrays(inputs, targets)
    m = float(np.mean(y)) if prior_mean is None else float(prior_mean)
    s = hyperparams.signal_variance
    corr = _matern_correlation(np.abs(x[:, None] - x[None, :]) / hyperparams.lengthscale, nu)
    chol, _ = _factorize(corr, hyperparams.noise_variance / s + jitter)
    chol = chol * math.sqrt(s)
    alpha = cho_solve((chol, True), y - m, check_finite=False)
    return GpSurrogate(x, y, hyperparams, m, nu, jitter, chol, alpha)


def predict(gp: GpSurrogate, query):
    """Functional alias for :meth:`GpSurrogate.predict`."""
    return gp.predict(query)


# -- MAP fitting ---------------------------------------------------------------
#
# With K = s (R(l) + (g + jitter) I) the posterior is maximised over the signal
# variance s in closed form, leaving a search over (log l, log g).

def _profile(dist, yc, lengthscale, ratio, config: KernelConfig):
    """Profiled log posterior; returns (value, signal_variance)."""
    n = yc.size
    corr = _matern_correlation(dist / lengthscale, config.nu)
    try:
        chol, extra = _factorize(corr, ratio + config.noise_floor)
    except DegenerateDataError:
        return -np.inf, _MIN_SIGNAL_VARIANCE
    beta = solve_triangular(chol, yc, lower=True, check_finite=False)
    quad = float(beta @ beta)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    c = config.variance_prior_rate + config.noise_prior_rate * ratio
    s = (-0.5 * n + math.sqrt(0.25 * n * n + 2.0 * c * quad)) / (2.0 * c)
    s = max(s, _MIN_SIGNAL_VARIANCE)
    value = _log_posterior_terms(n, quad, logdet, s, lengthscale, ratio, config)
    return value, s


def _log_posterior_terms(n, quad, logdet, s, lengthscale, ratio, config):
    lml = -0.5 * quad / s - 0.5 * n * math.log(s) - 0.5 * logdet - 0.5 * n * _LOG_2PI
    lp = math.log(config.variance_prior_rate) - config.variance_prior_rate * s
    lp += math.log(config.noise_prior_rate) - config.noise_prior_rate * s * ratio
    if config.lengthscale_fixed is None:
        a, b = config.lengthscale_prior_shape, config.lengthscale_prior_rate
        lp += a * math.log(b) - math.lgamma(a) + (a - 1.0) * math.log(lengthscale) - b * lengthscale
    return lml + lp


def log_posterior(inputs, targets, hyperparams: Hyperparams, config: KernelConfig) -> float:
    """Log marginal likelihood plus log hyperprior density at ``hyperparams``.

    Used to check fits; the prior mean is the target mean, as in fitting.
    """
    x, y = _as_training_arrays(inputs, targets)
    yc = y - y.mean()
    s = hyperparams.signal_variance
    ratio = hyperparams.noise_variance / s
    ell = config.lengthscale_fixed or hyperparams.lengthscale
    corr = _matern_correlation(np.abs(x[:, None] - x[None, :]) / ell, config.nu)
    chol, _ = _factorize(corr, ratio + config.noise_floor)
    beta = solve_triangular(chol, yc, lower=True, check_finite=False)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return _log_posterior_terms(y.size, float(beta @ beta), logdet, s, ell, ratio, config)


def _draw_start(rng, config):
    s = rng.exponential(1.0 / config.variance_prior_rate)
    noise = rng.exponential(1.0 / config.noise_prior_rate)
    ratio = noise / max(s, 1e-12)
    ell = rng.gamma(config.lengthscale_prior_shape, 1.0 / config.lengthscale_prior_rate)
    return (np.clip(math.log(ell), *np.log(_LENGTHSCALE_BOUNDS)),
            np.clip(math.log(ratio), *np.log(_NOISE_RATIO_BOUNDS)))


def fit_hyperparams(inputs, targets, config: KernelConfig = KernelConfig(),
                    seed: int = 0, warm_start: Optional[Hyperparams] = None,
                    n_starts: Optional[int] = None) -> GpSurrogate:
    """MAP-fit the kernel hyperparameters and condition on the data.

    Parameters
    ----------
    inputs, targets : array_like
        Training pairs.
    config : KernelConfig
        Hyperpriors and kernel family.
    seed : int
        Seed for the hyperprior draws used as optimizer starts.
    warm_start : Hyperparams, optional
        Extra starting point, typically the previous fit.
    n_starts : int, optional
        Number of hyperprior starts; defaults to ``config.n_starts``. May be 0
        when ``warm_start`` is given.

    Returns
    -------
    GpSurrogate
        With fewer than two points, a prior-only surrogate whose predictions are
        ``(prior_mean, signal_variance)``.
    """
    x, y = _as_training_arrays(inputs, targets)
    n_starts = config.n_starts if n_starts is None else n_starts
    if x.size < 2:
        ell = config.lengthscale_fixed or (config.lengthscale_prior_shape / config.lengthscale_prior_rate)
        hp = Hyperparams(1.0 / config.variance_prior_rate, ell, 0.0)
        return GpSurrogate(x, y, hp, float(y.mean()), config.nu, config.noise_floor)
    if np.ptp(x) == 0.0:
        raise DegenerateDataError("all training inputs are identical")

    yc = y - y.mean()
    dist = np.abs(x[:, None] - x[None, :])
    rng = np.random.default_rng(seed)
    starts = [_draw_start(rng, config) for _ in range(n_starts)]
    if warm_start is not None:
        starts.insert(0, (math.log(warm_start.lengthscale),
                          math.log(max(warm_start.noise_variance / warm_start.signal_variance,
                                       _NOISE_RATIO_BOUNDS[0]))))
    if not starts:
        raise ValueError("no optimizer starts: give n_starts > 0 or a warm start")

    best = (-np.inf, None)
    if config.lengthscale_fixed is not None:
        ell = config.lengthscale_fixed

        def neg(log_ratio):
            return -_profile(dist, yc, ell, math.exp(log_ratio), config)[0]

        lo, hi = np.log(_NOISE_RATIO_BOUNDS)
        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-4})
        candidates = [res.x, lo] + [s[1] for s in starts]
        for log_ratio in candidates:
            val = -neg(log_ratio)
            if val > best[0]:
                best = (val, (math.log(ell), log_ratio))
    else:
        bounds = [tuple(np.log(_LENGTHSCALE_BOUNDS)), tuple(np.log(_NOISE_RATIO_BOUNDS))]

        def neg(z):
            return -_profile(dist, yc, math.exp(z[0]), math.exp(z[1]), config)[0]

        for z0 in starts:
            z0 = np.asarray(z0, dtype=float)
            simplex = np.array([z0, z0 + [0.5, 0.0], z0 + [0.0, 1.0]])
            simplex = np.clip(simplex, [b[0] for b in bounds], [b[1] for b in bounds])
            res = minimize(neg, z0, method="Nelder-Mead", bounds=bounds,
                           options={"initial_simplex": simplex, "xatol": 1e-2,
                                    "fatol": 1e-3, "maxfev": 400})
            if -res.fun > best[0]:
                best = (-res.fun, tuple(res.x))
    if best[1] is None:
        raise DegenerateDataError("no hyperparameter setting gave a factorizable Gram matrix")

    ell = config.lengthscale_fixed or math.exp(best[1][0])
    ratio = math.exp(best[1][1])
    _, s = _profile(dist, yc, ell, ratio, config)
    hp = Hyperparams(signal_variance=s, lengthscale=ell, noise_variance=s * ratio)
    return condition(x, y, hp, nu=config.nu, jitter=config.noise_floor)


def refit_data(gp: GpSurrogate, inputs, targets) -> GpSurrogate:
    """Re-condition on new data keeping ``gp``'s hyperparameters."""
    return condition(inputs, targets, gp.hyperparams, nu=gp.nu, jitter=gp.jitter)


def with_hyperparams(gp: GpSurrogate, **changes) -> GpSurrogate:
    return condition(gp.inputs, gp.targets, replace(gp.hyperparams, **changes),
                     nu=gp.nu, jitter=gp.jitter)
