import math

import numpy as np
import pytest

from cellcap import analytic as an
from cellcap import mcsim, rng
from cellcap.analytic import Channel, Densities
from cellcap.mcsim import (
    EmptyPatternError,
    LinkKeys,
    PointPattern,
    SimWindow,
    TrialConfig,
    associate_nearest,
    estimate_cell_areas,
    run_experiment,
    run_trial,
    sample_ppp,
    schedule_uniform,
    sinr_sample,
)


def pattern(points, density=1.0):
    return PointPattern(np.asarray(points, dtype=np.float64).reshape(-1, 2), density)


# ---------------------------------------------------------------------------
# windows and point processes
# ---------------------------------------------------------------------------


def test_window_auto_size_holds_500_points():
    d = Densities(5.0, 30.0)
    w = SimWindow.auto(d)
    assert d.lambda_b * w.area >= 500 - 1e-9
    assert d.lambda_u * w.area >= 500 - 1e-9
    assert w.r_min == pytest.approx(1e-6 * w.side)


def test_window_rejects_bad_side():
    with pytest.raises(ValueError):
        SimWindow(0.0)


def test_ppp_count_is_poisson():
    w = SimWindow(10.0)
    g = np.random.default_rng(1)
    counts = np.array([len(sample_ppp(w, 1.0, g)) for _ in range(10_000)])
    assert abs(counts.mean() - 100.0) <= 3 * math.sqrt(100.0 / counts.size)
    assert 0.9 <= counts.var() / counts.mean() <= 1.1


def test_ppp_points_inside_window():
    w = SimWindow(2.0)
    p = sample_ppp(w, 500.0, rng.generator(0, 0, "bs"))
    assert p.points.min() >= 0.0 and p.points.max() < w.side
    assert p.density_used == 500.0


def test_ppp_vanishing_density():
    w = SimWindow(1.0)
    g = np.random.default_rng(2)
    assert sum(len(sample_ppp(w, 1e-9, g)) for _ in range(1000)) == 0
    with pytest.raises(ValueError):
        sample_ppp(w, 0.0, g)


# ---------------------------------------------------------------------------
# association and scheduling
# ---------------------------------------------------------------------------


def test_single_bs_takes_everyone():
    w = SimWindow(5.0)
    users = sample_ppp(w, 10.0, np.random.default_rng(0))
    assert np.all(associate_nearest(users, pattern([[1.0, 1.0]]), w) == 0)


def test_user_on_top_of_bs():
    w = SimWindow(5.0)
    bss = pattern([[1.0, 1.0], [2.0, 2.0], [4.0, 0.5]])
    assert associate_nearest(pattern([[2.0, 2.0]]), bss, w)[0] == 1


def test_association_matches_brute_force():
    w = SimWindow(3.0)
    g = np.random.default_rng(5)
    bss = sample_ppp(w, 50 / 9, g)
    users = sample_ppp(w, 200 / 9, g)
    got = associate_nearest(users, bss, w)
    for i, (x, y) in enumerate(users.points):
        dx = np.abs(bss.x - x)
        dy = np.abs(bss.y - y)
        d2 = np.minimum(dx, w.side - dx) ** 2 + np.minimum(dy, w.side - dy) ** 2
        assert got[i] == int(np.argmin(d2))


def test_empty_bs_pattern():
    with pytest.raises(EmptyPatternError):
        associate_nearest(pattern([[0.5, 0.5]]), pattern([]), SimWindow(1.0))


def test_schedule_basic_cases():
    sel = schedule_uniform(np.array([0, 2, 2]), 4, np.random.default_rng(0))
    assert sel[0] == 0
    assert sel[1] == -1 and sel[3] == -1
    assert sel[2] in (1, 2)
    assert np.all(schedule_uniform(np.array([], dtype=np.int64), 3, np.random.default_rng(0)) == -1)


def test_schedule_is_uniform_within_a_cell():
    reps = 100_000
    g = np.random.default_rng(9)
    wins = np.zeros(4)
    assignment = np.zeros(4, dtype=np.int64)
    for _ in range(reps // 1000):
        # batch 1000 independent 4-user cells into one call
        a = np.repeat(np.arange(1000), 4)
        sel = schedule_uniform(a, 1000, g)
        wins += np.bincount(sel % 4, minlength=4)
    freq = wins / reps
    sigma = math.sqrt(0.25 * 0.75 / reps)
    assert np.all(np.abs(freq - 0.25) <= 3 * sigma)
    assert schedule_uniform(assignment, 1, g)[0] in range(4)


# ---------------------------------------------------------------------------
# SINR sampling
# ---------------------------------------------------------------------------


def test_sinr_no_interferer_no_noise_is_infinite():
    w = SimWindow(4.0)
    keys = LinkKeys.for_trial(1, 0)
    out = sinr_sample(pattern([[1.0, 1.0]]), np.array([0]), pattern([[1.5, 1.0]]), np.array([True]),
                      Channel(), w, keys)
    assert np.isinf(out[0])


def test_sinr_equidistant_interferer():
    n = 100_000
    w = SimWindow(8.0)
    users = pattern(np.tile([[2.0, 2.0]], (n, 1)))
    bss = pattern([[1.0, 2.0], [3.0, 2.0]])
    out = sinr_sample(users, np.zeros(n, dtype=np.int64), bss, np.array([True, True]), Channel(), w,
                      LinkKeys.for_trial(4, 0))
    assert abs(np.mean(out > 1.0) - 0.5) <= 3 * math.sqrt(0.25 / n)


def test_shadowing_is_unit_median_lognormal():
    # with one interferer at equal distance, SINR = (h0 g0) / (h1 g1); its log is symmetric
    n = 50_000
    w = SimWindow(8.0)
    users = pattern(np.tile([[2.0, 2.0]], (n, 1)))
    bss = pattern([[1.0, 2.0], [3.0, 2.0]])
    ch = Channel(shadow_sigma_db=8.0)
    out = sinr_sample(users, np.zeros(n, dtype=np.int64), bss, np.array([True, True]), ch, w,
                      LinkKeys.for_trial(4, 0))
    assert abs(np.mean(out > 1.0) - 0.5) <= 3 * math.sqrt(0.25 / n)
    # shadowing widens the spread of log SINR relative to fading alone
    plain = sinr_sample(users, np.zeros(n, dtype=np.int64), bss, np.array([True, True]), Channel(), w,
                        LinkKeys.for_trial(4, 0))
    assert np.std(np.log(out)) > np.std(np.log(plain))


# ---------------------------------------------------------------------------
# cell areas
# ---------------------------------------------------------------------------


def test_single_cell_area_is_whole_window():
    w = SimWindow(4.0)
    bss = pattern([[1.0, 3.0]])
    assert estimate_cell_areas(bss, w, 256, density=2.5)[0] == pytest.approx(2.5 * w.area)
    assert estimate_cell_areas(bss, w, 256)[0] == pytest.approx(1.0)


def test_two_cells_split_evenly():
    w = SimWindow(2.0)
    bss = pattern([[0.5, 1.0], [1.5, 1.0]])
    a = estimate_cell_areas(bss, w, 256, density=1.0)
    assert a[0] == pytest.approx(a[1])
    assert a.sum() == pytest.approx(w.area)


def test_areas_tile_the_window():
    w = SimWindow(3.0)
    bss = sample_ppp(w, 20.0, np.random.default_rng(3))
    a = estimate_cell_areas(bss, w, 300, density=1.0)
    assert a.sum() == pytest.approx(w.area, rel=1e-12)


def test_area_grid_minimum():
    with pytest.raises(ValueError):
        estimate_cell_areas(pattern([[0.0, 0.0]]), SimWindow(1.0), 128)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def small_config(**kw):
    d = kw.pop("densities", Densities(30.0, 30.0))
    base = dict(channel=Channel(), master_seed=11, n_trials=6, area_trials=2)
    base.update(kw)
    return TrialConfig(d, **base)


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(n_trials=0)
    with pytest.raises(ValueError):
        small_config(interference_model="magic")
    with pytest.raises(ValueError):
        small_config(grid_resolution=100)


def test_count_conservation_per_trial():
    cfg = small_config()
    for t in range(3):
        r = run_trial(cfg, t)
        assert r.n_selected == r.n_bs - r.n_inactive
        assert r.load_counts_typical.sum() == r.n_bs
        assert r.load_counts_tagged.sum() == r.n_users
        assert r.n_success <= r.n_selected


def test_estimates_are_well_formed():
    est = run_experiment(small_config())
    for e in (est.p_inactive, est.p_selection, est.p_success, est.p_service):
        assert 0.0 <= e.value <= 1.0
        assert e.stderr >= 0.0
    assert est.c_service.value == pytest.approx(30.0 * est.p_service.value)
    for h in (est.empirical_load_pmf_typical, est.empirical_load_pmf_tagged,
              est.empirical_area_hist_typical, est.empirical_area_hist_tagged):
        assert h.sum() == pytest.approx(1.0, abs=1e-9)
    assert len(est.area_bin_edges) == mcsim.AREA_BINS + 1


def test_seed_determinism_across_workers():
    cfg = small_config()
    a = run_experiment(cfg, workers=1)
    b = run_experiment(cfg, workers=4)
    assert a.p_service == b.p_service
    assert a.p_inactive == b.p_inactive
    assert np.array_equal(a.area_samples, b.area_samples)
    assert np.array_equal(a.empirical_load_pmf_tagged, b.empirical_load_pmf_tagged)
    c = run_experiment(small_config(master_seed=12))
    assert c.p_service != a.p_service


def test_tagged_cells_are_larger():
    cfg = small_config(n_trials=3, area_trials=3, compute_sinr=False)
    est = run_experiment(cfg)
    assert est.area_samples.size >= 1000
    assert est.area_mean_tagged() > est.area_mean_typical()
    assert est.area_mean_typical() == pytest.approx(1.0, rel=1e-12)


def test_tiny_threshold_every_selected_user_succeeds():
    est = run_experiment(small_config(channel=Channel(gamma_hat=1e-12), n_trials=3))
    assert est.p_service.value == est.p_selection.value


def test_reference_point_service_probability():
    d = Densities(30.0, 30.0)
    w = SimWindow.auto(d)
    trials = mcsim.trials_for_user_samples(d, w, 100_000)
    est = run_experiment(TrialConfig(d, Channel(), w, 42, trials, area_trials=0))
    assert est.user_samples >= 90_000
    assert abs(est.p_service.value - an.p_service(d, Channel())) <= 0.01


@pytest.mark.slow
def test_load_pmfs_match_model_at_rho_1():
    d = Densities(30.0, 30.0)
    w = SimWindow.auto(d)
    trials = 60
    est = run_experiment(TrialConfig(d, Channel(), w, 3, trials, compute_sinr=False, area_trials=0))
    n_bs = est.p_inactive.samples
    n_users = est.p_selection.samples
    for n in range(11):
        for emp, model, count, eff in (
            (est.empirical_load_pmf_typical[n], an.pmf_load_typical(n, d), n_bs, 1.0),
            # users sharing a cell are correlated: inflate by the mean cell occupancy
            (est.empirical_load_pmf_tagged[n], an.pmf_load_tagged(n, d), n_users, n + 1.0),
        ):
            se = math.sqrt(model * (1 - model) * eff / count)
            assert abs(emp - model) <= 3 * se + 1e-12, (n, emp, model, se)


def test_independent_thinning_runs_and_differs():
    dep = run_experiment(small_config(n_trials=3, area_trials=0))
    ind = run_experiment(small_config(n_trials=3, area_trials=0, interference_model="independent"))
    assert dep.p_selection == ind.p_selection  # same geometry and schedule
    assert dep.p_service != ind.p_service


def test_empty_bs_realisations_are_redrawn():
    d = Densities(0.002, 1.0)
    cfg = TrialConfig(d, Channel(), SimWindow(10.0), 0, 5, area_trials=0)
    est = run_experiment(cfg)
    assert est.p_inactive.samples >= 5
