import numpy as np
import pytest

from splitbolfi.abc import (AbcRun, abc_estimates, accept, pool_size, run_abc, simulate_pool,
                            write_abc_csv)
from splitbolfi.simulators import gaussian_spec


@pytest.mark.parametrize("n,q,expected", [(10, 0.01, 1000), (1, 0.1, 10), (50, 0.004, 12500),
                                          (5, 0.02, 250), (2, 0.3, 7)])
def test_pool_size(n, q, expected):
    assert pool_size(n, q) == expected


@pytest.mark.parametrize("n,q", [(0, 0.1), (1, 0.0), (1, 1.0)])
def test_pool_size_rejects_bad_arguments(n, q):
    with pytest.raises(ValueError):
        pool_size(n, q)


def test_matches_full_sort_oracle():
    sim = gaussian_spec(1, seed=4)
    run = run_abc(sim, 0.01, 10, seed=4)
    assert run.n_pool == 1000
    oracle = sorted(range(run.n_pool), key=lambda i: (run.pool_discrepancies[i, 0], i))[:10]
    np.testing.assert_array_equal(run.accepted[0], oracle)
    np.testing.assert_array_equal(np.sort(run.accepted_values(0)),
                                  np.sort(run.pool_params[oracle, 0]))


def test_ties_broken_by_pool_index():
    d = np.array([[0.2], [0.1], [0.1], [0.1], [0.3]])
    np.testing.assert_array_equal(accept(d, 2)[0], [1, 2])


def test_accepting_whole_pool_gives_prior_sample():
    sim = gaussian_spec(2, seed=0)
    params, disc, _ = simulate_pool(sim, 400, seed=0)
    idx = accept(disc, 400)
    run = AbcRun(params, disc, 0.5, 400, idx)
    for j, (mean, sd) in enumerate(abc_estimates(run)):
        assert mean == pytest.approx(params[:, j].mean())
        assert sd == pytest.approx(10 / np.sqrt(12), rel=0.1)


def test_two_point_estimates():
    run = AbcRun(np.array([[0.0], [0.2], [5.0]]), np.array([[0.1], [0.2], [0.9]]), 0.5, 2,
                 accept(np.array([[0.1], [0.2], [0.9]]), 2))
    (mean, sd), = abc_estimates(run)
    assert mean == pytest.approx(0.1) and sd == pytest.approx(0.14142, abs=1e-5)


def test_single_sample_has_no_sd():
    run = run_abc(gaussian_spec(2, seed=1), 0.1, 1, seed=1)
    assert all(sd is None for _, sd in abc_estimates(run))


def test_threshold_is_empirical_quantile():
    run = run_abc(gaussian_spec(3, seed=2), 0.05, 10, seed=2)
    for j in range(3):
        worst = run.pool_discrepancies[run.accepted[j], j].max()
        assert worst == np.sort(run.pool_discrepancies[:, j])[9]
        assert np.mean(run.pool_discrepancies[:, j] <= worst) == pytest.approx(0.05)


def test_pool_prefix_property_and_determinism():
    sim = gaussian_spec(2, seed=3)
    small = simulate_pool(sim, 50, seed=3)
    large = simulate_pool(sim, 120, seed=3)
    np.testing.assert_array_equal(small[0], large[0][:50])
    np.testing.assert_array_equal(small[1], large[1][:50])
    a = run_abc(sim, 0.1, 5, seed=3, pool=large)
    b = run_abc(sim, 0.1, 5, seed=3)
    np.testing.assert_array_equal(a.accepted[0], b.accepted[0])
    with pytest.raises(ValueError):
        run_abc(sim, 0.01, 5, seed=3, pool=small)


def test_rmse_shrinks_with_quantile():
    rmse = {q: [] for q in (0.1, 0.02, 0.004)}
    for seed in range(10):
        sim = gaussian_spec(2, seed=seed)
        pool = simulate_pool(sim, pool_size(5, 0.004), seed)
        for q in rmse:
            means = np.array([m for m, _ in abc_estimates(run_abc(sim, q, 5, seed, pool=pool))])
            rmse[q].append(np.sqrt(np.mean((means - sim.truth) ** 2)))
    r = [np.mean(rmse[q]) for q in (0.1, 0.02, 0.004)]
    assert r[0] > r[1] > r[2]


def test_csv_export(tmp_path):
    run = run_abc(gaussian_spec(2, seed=0), 0.1, 3, seed=0)
    write_abc_csv(tmp_path / "abc.csv", run)
    lines = (tmp_path / "abc.csv").read_text().splitlines()
    assert lines[0] == "index,mu_0,mu_1,d_mu_0,d_mu_1,accepted_mu_0,accepted_mu_1"
    assert len(lines) == 31
    flags = np.array([[int(v) for v in line.split(",")[-2:]] for line in lines[1:]])
    assert np.all(flags.sum(axis=0) == 3)
