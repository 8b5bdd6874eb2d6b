import math

import numpy as np
import pytest

from splitbolfi import _seeding
from splitbolfi.engine import SimulationError
from splitbolfi.simulators import (GvarModel, analytic_posterior, gaussian_simulate, gaussian_spec,
                                   gvar_spec, gvar_trajectory, lagged_summaries,
                                   read_summaries_csv, summary_difference, write_summaries_csv)
from splitbolfi.simulators.daycare import (DaycareModel, competition_factor, coprevalence,
                                           daycare_simulate, daycare_spec, daycare_summaries,
                                           pair_names, read_snapshots_csv, shannon_index,
                                           write_snapshots_csv)


# -- shared interface

def test_summary_difference_norms():
    np.testing.assert_allclose(summary_difference([1.0, 3.0], [2.0, 1.0], "squared"), [1.0, 4.0])
    np.testing.assert_allclose(summary_difference([1.0, 3.0], [2.0, 1.0], "absolute"), [1.0, 2.0])
    with pytest.raises(ValueError):
        summary_difference([1.0], [1.0], "cubic")


@pytest.mark.parametrize("make", [lambda: gaussian_spec(3, seed=1), lambda: gvar_spec(4, seed=1),
                                  lambda: daycare_spec(3, seed=1)])
def test_simulators_are_pure(make):
    sim = make()
    theta = sim.space.sample(np.random.default_rng(0))
    np.testing.assert_array_equal(sim.summarize(theta, 11), sim.summarize(theta, 11))
    np.testing.assert_array_equal(sim.discrepancies(theta, 11), sim.discrepancies(theta, 11))


@pytest.mark.parametrize("make", [lambda: gaussian_spec(3, seed=1), lambda: gvar_spec(4, seed=1),
                                  lambda: daycare_spec(3, seed=1)])
def test_zero_discrepancy_at_observed_summaries(make):
    sim = make()
    d = sim.discrepancy_map(sim.observed_summaries, sim.observed_summaries)
    assert d.shape == (sim.space.dim,) and np.all(d == 0)


def test_summaries_csv_round_trip(tmp_path):
    write_summaries_csv(tmp_path / "s.csv", ["a", "b"], [0.1, 1 / 3])
    names, values = read_summaries_csv(tmp_path / "s.csv")
    assert names == ["a", "b"] and values[1] == 1 / 3


# -- Gaussian

def test_gaussian_squared_discrepancy_scales_as_one_over_n():
    sim = gaussian_spec(1, n=100, seed=0, norm="squared")
    theta = sim.observed_summaries
    d = np.array([sim.discrepancies(theta, s)[0] for s in range(1000)])
    assert d.mean() == pytest.approx(0.01, rel=0.2)


def test_gaussian_discrepancy_ignores_other_coordinates():
    sim = gaussian_spec(3, seed=2)
    rng = np.random.default_rng(0)
    thetas = sim.space.sample(rng, 500)
    d = np.array([sim.discrepancies(t, i) for i, t in enumerate(thetas)])
    for j in range(3):
        for k in range(3):
            if j != k:
                assert abs(np.corrcoef(d[:, j], thetas[:, k])[0, 1]) < 0.1


def test_gaussian_truth_and_prior():
    sim = gaussian_spec(4, seed=3)
    assert np.all(np.abs(sim.truth) <= 3) and sim.space.bounds(0) == (-5.0, 5.0)
    assert sim.info["norm"] == "absolute"
    with pytest.raises(ValueError):
        gaussian_simulate([0.0], 0, 1)


def test_analytic_posterior_sd():
    assert analytic_posterior(0.3, 100).std() == pytest.approx(0.1, rel=1e-6)


# -- GVAR

def test_gvar_transition_structure():
    m = GvarModel(np.array([0.3, -0.5, 0.9]))
    pi = m.transition_matrix()
    np.testing.assert_array_equal(np.diag(pi), -1.0)
    assert np.all(np.count_nonzero(pi - np.diag(np.diag(pi)), axis=1) == 1)
    with pytest.raises(ValueError):
        GvarModel(np.array([0.3, 1.0]))
    with pytest.raises(ValueError):
        GvarModel(np.array([0.3, 0.2]), coupling_partner=np.array([0, 0]))


def test_gvar_uncoupled_as_written_autocorrelation():
    # X[t+1] = -X[t] + eps: lag-1 autocorrelation approaches -1
    m = GvarModel(np.zeros(3), sigma2=0.1, T=5000, dynamics="as_written")
    x = gvar_trajectory(m, 0)
    for i in range(3):
        r = np.corrcoef(x[1:, i], x[:-1, i])[0, 1]
        assert r == pytest.approx(-1.0, abs=0.05)


def test_gvar_zero_noise_gives_zero_summaries():
    m = GvarModel(np.array([0.5, -0.5]), sigma2=0.0)
    assert np.all(gvar_trajectory(m, 0) == 0)
    for kind in ("pearson", "covariance", "hybrid"):
        assert np.all(lagged_summaries(gvar_trajectory(m, 0), m.coupling_partner, kind) == 0)


def test_gvar_summary_monotone_in_coupling():
    means = []
    for c in (-0.8, 0.0, 0.8):
        m = GvarModel(np.array([c, 0.2, -0.3]), sigma2=0.1, T=500)
        s = [lagged_summaries(gvar_trajectory(m, k), m.coupling_partner, "pearson")[0]
             for k in range(30)]
        means.append(np.mean(s))
    assert means[0] < means[1] < means[2]


def test_gvar_hybrid_noise_summary_grows_with_variance():
    vals = []
    for s2 in (0.05, 0.1, 0.4):
        m = GvarModel(np.array([0.5, -0.4, 0.3]), sigma2=s2)
        vals.append(np.mean([lagged_summaries(gvar_trajectory(m, k), m.coupling_partner, "hybrid")[-1]
                             for k in range(20)]))
    assert vals[0] < vals[1] < vals[2]


def test_gvar_blowup_signals_failure():
    m = GvarModel(np.array([0.9, 0.9]), sigma2=1.0, T=4000, dynamics="as_written")
    with pytest.raises(SimulationError):
        gvar_trajectory(m, 0)


def test_gvar_stabilized_spectral_radius():
    m = GvarModel(np.array([0.9, 0.9, 0.9]), dynamics="stabilized")
    assert np.max(np.abs(np.linalg.eigvals(m.propagator()))) <= 0.95 + 1e-12


def test_gvar_spec_layout():
    sim = gvar_spec(6, seed=0)
    assert sim.space.dim == 6 and sim.space.names[-1] == "sigma2"
    assert sim.space.bounds(5) == (0.0, 1.0) and sim.space.bounds(0) == (-1.0, 1.0)
    assert sim.truth[-1] == 0.1 and np.all(np.abs(sim.truth[:-1]) < 1)
    with pytest.raises(ValueError):
        gvar_spec(2)
    # zero noise on the prior boundary still yields a usable discrepancy
    theta = np.append(sim.truth[:-1], 0.0)
    assert np.all(np.isfinite(sim.discrepancies(theta, 0)))


# -- daycare

def test_competition_factor_is_one_without_competition():
    state = np.random.default_rng(0).random((10, 4)) < 0.5
    np.testing.assert_array_equal(competition_factor(state, np.zeros((4, 4))), 1.0)


def test_no_transmission_means_no_colonization():
    x = daycare_simulate(DaycareModel(4, 0.0, 0.0), 3)
    assert not x.any()
    s = daycare_summaries(x)
    assert s[1] == 0 and np.all(s[2:7] == 0)


def test_absent_strains_coprevalence():
    x = np.zeros((11, 47, 4), dtype=bool)
    assert coprevalence(x, 0, 1) == pytest.approx(1 / math.sqrt(11), abs=1e-12)
    assert coprevalence(x, 0, 1) == pytest.approx(0.30151, abs=1e-5)


def test_shannon_index_uniform():
    assert shannon_index([5, 5, 5, 5]) == pytest.approx(math.log(4))
    assert shannon_index([0, 0]) == 0.0
    assert shannon_index([3, 0]) == 0.0


def test_daycare_summary_layout():
    sim = daycare_spec(4, seed=0)
    assert sim.space.dim == 4 * 3 // 2 + 2
    assert sim.space.names[:2] == ("beta", "lambda")
    assert list(sim.space.names[2:]) == pair_names(4)
    assert len(sim.observed_summaries) == len(sim.summary_names) == 2 + 4 + 1 + 6


def test_daycare_model_validation():
    with pytest.raises(ValueError):
        DaycareModel(2, 1.0, 1.0, competition=np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        DaycareModel(2, -1.0, 1.0)
    with pytest.raises(ValueError):
        DaycareModel(2, 1.0, 1.0, method="euler")


def test_large_rates_are_clamped_and_counted():
    m = DaycareModel(2, 100.0, 100.0, burn_in=1.0, n_observations=1)
    x = daycare_simulate(m, 0)
    assert m.clamped_steps > 0 and x.mean() > 0.8


def test_competition_reduces_coprevalence():
    # common random numbers: the same seeds at every competition level
    means = []
    for theta in (0.0, 1.0, 3.0):
        vals = []
        for rep in range(200):
            m = DaycareModel.from_pairs(2, 3.0, 3.0, [theta], n_children=20, burn_in=10.0,
                                        n_observations=2)
            vals.append(coprevalence(daycare_simulate(m, _seeding.subseed(9, rep)), 0, 1))
        means.append(np.mean(vals))
    assert means[0] >= means[1] >= means[2]
    assert means[0] - means[2] > 0.05


def test_gillespie_agrees_with_tau_leap():
    kw = dict(n_children=30, burn_in=20.0, n_observations=5)
    tau = [daycare_summaries(daycare_simulate(DaycareModel(2, 1.0, 0.5, **kw), s))[2:4].mean()
           for s in range(20)]
    ssa = [daycare_summaries(daycare_simulate(DaycareModel(2, 1.0, 0.5, method="gillespie", **kw),
                                              s))[2:4].mean() for s in range(20)]
    assert np.mean(tau) == pytest.approx(np.mean(ssa), abs=0.05)


def test_snapshot_csv_round_trip(tmp_path):
    x = daycare_simulate(DaycareModel(3, 1.0, 1.0, n_children=5, n_observations=2), 0)
    write_snapshots_csv(tmp_path / "d.csv", x)
    np.testing.assert_array_equal(read_snapshots_csv(tmp_path / "d.csv"), x)
    sim = daycare_spec(3, observed=x)
    np.testing.assert_allclose(sim.observed_summaries, daycare_summaries(x))
