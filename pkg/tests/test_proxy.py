import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import trapezoid

from splitbolfi.gp import Hyperparams, condition
from splitbolfi.proxy import (DELTA_FLOOR, NearPerfectFitWarning, build_proxy, joint_log_density,
                              proxy_from_mean, proxy_moments, symmetrized_kl, tempering_scale,
                              write_moments_csv, write_proxy_csv)

GRID = np.linspace(-5.0, 5.0, 2001)


def test_quadratic_mean_gives_truncated_gaussian():
    # exp(-(w/delta) (t - m)^2) is a Gaussian with variance delta / (2 w)
    m, w, delta = 0.7, 2.0, 0.3
    pr = proxy_from_mean(GRID, (GRID - m) ** 2, w, delta)
    sd = np.sqrt(delta / (2 * w))
    exact = stats.truncnorm((-5 - m) / sd, (5 - m) / sd, loc=m, scale=sd)
    np.testing.assert_allclose(pr.density, exact.pdf(GRID), rtol=2e-5, atol=1e-8)
    mean, mode, psd = proxy_moments(pr)
    assert mean == pytest.approx(exact.mean(), abs=1e-6)
    assert psd == pytest.approx(exact.std(), rel=1e-4)
    assert mode == pytest.approx(m, abs=GRID[1] - GRID[0])


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-2, 1e2), st.floats(-50, 50))
def test_scale_and_shift_invariance(c, w, shift):
    mu = 0.5 * (GRID - 1.0) ** 2 + 0.2 * np.sin(3 * GRID)
    base = proxy_from_mean(GRID, mu, w, 0.4)
    scaled = proxy_from_mean(GRID, c * mu + shift, w, c * 0.4)
    np.testing.assert_allclose(scaled.density, base.density, rtol=1e-9, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-2, 1e2), st.floats(1e-3, 10))
def test_normalization(w, delta):
    pr = proxy_from_mean(GRID, np.abs(GRID - 0.3), w, delta)
    assert trapezoid(pr.density, pr.grid) == pytest.approx(1.0, abs=1e-8)
    assert np.all(pr.density >= 0)


def test_joint_proxy_factorizes_and_normalizes():
    g1 = np.linspace(-2, 2, 201)
    g2 = np.linspace(0, 1, 101)
    p1 = proxy_from_mean(g1, (g1 - 0.5) ** 2, 1.0, 0.2)
    p2 = proxy_from_mean(g2, np.abs(g2 - 0.3), 3.0, 0.5)
    a, b = np.meshgrid(g1, g2, indexing="ij")
    logj = joint_log_density([p1, p2], np.column_stack([a.ravel(), b.ravel()])).reshape(a.shape)
    np.testing.assert_allclose(np.exp(logj), np.outer(p1.density, p2.density), rtol=1e-8, atol=1e-300)
    total = trapezoid(trapezoid(np.exp(logj), g2, axis=1), g1)
    assert total == pytest.approx(1.0, abs=1e-8)
    assert np.isneginf(joint_log_density([p1, p2], [[3.0, 0.5]])[0])


def test_sharper_with_larger_w_and_smaller_delta():
    mu = (GRID - 0.2) ** 2 + 0.3 * np.abs(GRID)
    sds_w = [proxy_moments(proxy_from_mean(GRID, mu, w, 1.0))[2] for w in (0.01, 0.1, 1, 10, 100)]
    sds_d = [proxy_moments(proxy_from_mean(GRID, mu, 1.0, d))[2] for d in (0.01, 0.1, 1, 10, 100)]
    assert all(a > b for a, b in zip(sds_w, sds_w[1:]))
    assert all(a < b for a, b in zip(sds_d, sds_d[1:]))


def test_tempering_scale_rules():
    assert tempering_scale(0.5, 0.7) == 0.7
    assert tempering_scale(0.9, 0.7) == 0.9
    assert tempering_scale(-0.2, 0.3) == 0.3
    assert tempering_scale(0.0, 0.3) == 0.3
    with pytest.warns(NearPerfectFitWarning):
        assert tempering_scale(0.0, 0.0) == DELTA_FLOOR
    with pytest.raises(ValueError):
        tempering_scale(0.1, np.inf)


def test_floored_proxy_is_flagged():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearPerfectFitWarning)
        delta = tempering_scale(-1.0, 0.0)
    pr = proxy_from_mean(GRID, GRID ** 2, 1.0, delta)
    assert pr.delta_floored
    assert np.all(np.isfinite(pr.density))


def test_invalid_tempering_rejected():
    with pytest.raises(ValueError):
        proxy_from_mean(GRID, GRID, 0.0, 1.0)
    with pytest.raises(ValueError):
        proxy_from_mean(GRID, GRID, 1.0, -1.0)


def test_symmetrized_kl_of_gaussians():
    # equal variances: KL(p||q) + KL(q||p) = (m1 - m2)^2 / s^2
    g = np.linspace(-10, 10, 20001)
    p = stats.norm(0.0, 1.0).pdf(g)
    q = stats.norm(0.5, 1.0).pdf(g)
    assert symmetrized_kl(p, q, g) == pytest.approx(0.25, rel=1e-6)
    assert symmetrized_kl(p, q, g) == pytest.approx(symmetrized_kl(q, p, g))
    assert symmetrized_kl(p, p, g) == 0.0
    with pytest.raises(ValueError):
        symmetrized_kl(p, q[:-1], g)


def test_build_proxy_from_surrogate():
    x = np.linspace(-5, 5, 15)
    gp = condition(x, np.abs(x - 1.0), Hyperparams(4.0, 1.0, 1e-3))
    pr = build_proxy(gp, (-5, 5), 1.0, 0.05, grid_points=1001)
    mean, mode, _ = proxy_moments(pr)
    assert abs(mode - 1.0) < 0.1 and abs(mean - 1.0) < 0.1


def test_csv_writers(tmp_path):
    pr = proxy_from_mean(GRID[:5], GRID[:5] ** 2, 1.0, 1.0)
    write_proxy_csv(tmp_path / "p.csv", pr, parameter="a")
    write_moments_csv(tmp_path / "m.csv", ["a"], [pr])
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "parameter,theta,mu,density"
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "parameter,mean,mode,sd,delta,w" and len(lines) == 2
