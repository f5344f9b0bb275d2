import numpy as np
import pytest

from kickflow import PotentialSpec
from kickflow import experiments as ex


COSINE = PotentialSpec.cosine_mixture(master_seed=808)
SHOT = PotentialSpec.shot_noise(bump_rate=0.8, bump_width=1.0,
                                bump_amp_lo=-0.8, bump_amp_hi=0.8, master_seed=808)
ROW_KEYS = {"seed", "kappa", "v", "n", "grid"}


def check_report(rep, name):
    assert rep.name == name
    assert rep.rows and all(ROW_KEYS <= set(r) for r in rep.rows)
    assert any(a["name"] == "exact_identities" for a in rep.assertions)
    assert "potential" in rep.config and "master_seed" in rep.config["potential"]
    assert rep.wall_clock_s >= 0


def test_shape_small_run_and_zero_field_closed_form():
    rep = ex.run_shape(PotentialSpec.zero(), kappas=[0.2], velocities=[-0.5, 0.0, 0.5],
                       n=16, seeds=2, h=0.05, halfwidth=6.0)
    check_report(rep, "shape")
    assert rep.passed
    est = rep.summary["estimates"][0]
    # zero potential: alpha(v) + v^2/2 has an explicit finite-horizon value
    import math
    kappa, n = 0.2, 16
    finite_term = (0.5 * kappa * math.log(2 * math.pi * kappa)
                   - 0.5 * kappa / n * math.log(2 * math.pi * n * kappa))
    for alpha, v in zip(est["alpha_direct"], est["v_grid"]):
        assert abs(alpha + 0.5 * v * v - finite_term) < 1e-6
    assert max(r["route_residual"] for r in rep.rows) < 1e-12


def test_shape_cosine_routes_agree():
    rep = ex.run_shape(COSINE, kappas=[0.2], velocities=[-0.5, 0.0, 0.5],
                       n=24, seeds=3, h=0.05, halfwidth=7.0)
    assert rep.passed
    assert max(r["route_residual"] for r in rep.rows) < 1e-9


def test_concentration_zero_field_degenerate():
    rep = ex.run_concentration(PotentialSpec.zero(), kappas=[0.0, 0.2],
                               n_list=[8, 16], seeds=3, h=0.08, halfwidth=6.0)
    check_report(rep, "concentration")
    assert rep.passed
    for kappa in (0.0, 0.2):
        vals = {r["n"]: r["p"] for r in rep.rows if r["kappa"] == kappa and r["seed"] == rep.config["seeds"][0]}
        other = {r["n"]: r["p"] for r in rep.rows if r["kappa"] == kappa and r["seed"] == rep.config["seeds"][1]}
        assert vals == other  # deterministic potential: sd is exactly zero


def test_concentration_shot_noise_runs():
    rep = ex.run_concentration(SHOT, kappas=[0.2], n_list=[8, 12, 16, 24], seeds=6,
                               h=0.08, halfwidth=7.0)
    check_report(rep, "concentration")
    fit = rep.summary["fits"]["0.2"]
    assert "beta" in fit and np.isfinite(fit["beta"])


def test_zero_temperature_limit_small():
    rep = ex.run_zero_temperature_limit(SHOT, kappa_ladder=[0.4, 0.2, 0.1], N=8,
                                        seeds=4, h=0.05, halfwidth=6.0)
    check_report(rep, "zero_temperature_limit")
    assert rep.passed
    gaps = [r["free_energy_gap"] for r in rep.rows]
    assert min(gaps) >= -1e-9


def test_inviscid_limit_small():
    rep = ex.run_inviscid_limit(COSINE, kappa_ladder=[0.4, 0.2, 0.1], n=1, N=9,
                                seeds=4, h=0.05, halfwidth=6.0)
    check_report(rep, "inviscid_limit")
    assert rep.passed
    assert rep.summary["max_monotone_violation"] <= 1e-9


def test_busemann_limit_small():
    rep = ex.run_busemann_limit(COSINE, kappa_ladder=[0.4, 0.2, 0.1], horizons=[6, 9],
                                seeds=4, h=0.05, halfwidth=6.0)
    check_report(rep, "busemann_limit")
    worst = max(max(r["b_cocycle_residual"], r["g_cocycle_residual"],
                    r["b_antisymmetry_residual"], r["g_antisymmetry_residual"])
                for r in rep.rows)
    assert worst <= 1e-9


def test_overlap_identical_sources_zero_tv():
    rep = ex.run_overlap(COSINE, kappa=0.5, sources=[[0, 0.3], [0, 0.3]], N=8,
                         seeds=2, h=0.05, halfwidth=6.0)
    check_report(rep, "overlap")
    assert max(r["tv_distance"] for r in rep.rows) < 1e-12


def test_overlap_zero_field_matches_gaussian_oracle():
    import math
    x1, x2, kappa, N = -1.0, 1.0, 0.5, 12
    rep = ex.run_overlap(PotentialSpec.zero(), kappa=kappa, sources=[[0, x1], [0, x2]],
                         N=N, seeds=1, h=0.04, halfwidth=8.0)
    for r in rep.rows:
        k = r["n"]
        # same-variance Gaussian bridges: TV = erf(|mu1 - mu2| / (2 sqrt(2) sigma))
        mu1 = x1 + (0.0 - x1) * k / N
        mu2 = x2 + (0.0 - x2) * k / N
        sigma = math.sqrt(kappa * k * (N - k) / N)
        want = math.erf(abs(mu1 - mu2) / (2 * math.sqrt(2) * sigma))
        assert abs(r["tv_distance"] - want) < 0.01
    assert rep.summary["mean_trend_rho"] == -1.0


def test_reports_are_reproducible_and_parallel_safe():
    kw = dict(kappa_ladder=[0.4, 0.2], N=7, seeds=3, h=0.06, halfwidth=5.0)
    rep1 = ex.run_zero_temperature_limit(SHOT, **kw)
    rep2 = ex.run_zero_temperature_limit(SHOT, **kw)
    assert ex.rows_csv(rep1) == ex.rows_csv(rep2)
    rep4 = ex.run_zero_temperature_limit(SHOT, jobs=4, **kw)
    assert ex.rows_csv(rep1) == ex.rows_csv(rep4)


def test_identity_checks_pass_for_both_generators():
    for spec in (COSINE, SHOT):
        for seed in ex.derive_seeds(spec.master_seed, 2):
            checks = ex.identity_checks(spec, seed, None)
            assert all(c["passed"] for c in checks), checks


def test_spearman_and_fit_helpers():
    assert ex.spearman_rho([1, 2, 3, 4], [10, 20, 30, 40]) == 1.0
    assert ex.spearman_rho([1, 2, 3, 4], [40, 30, 20, 10]) == -1.0
    # one adjacent swap on four points gives rho = 0.8
    assert ex.spearman_rho([1, 2, 3, 4], [10, 20, 40, 30]) == pytest.approx(0.8)
    beta, se, upper = ex.loglog_fit([25, 50, 100, 200], [5.0, 7.07, 10.0, 14.14])
    assert beta == pytest.approx(0.5, abs=0.01)
    assert upper > beta
    assert ex.t95(2) == 2.920 and ex.t95(200) == 1.645


def test_infinite_range_potential_warns():
    with pytest.warns(UserWarning, match="dependence range"):
        rep = ex.run_inviscid_limit(COSINE, kappa_ladder=[0.4, 0.2], n=1, N=6,
                                    seeds=2, h=0.08, halfwidth=4.0)
    assert rep.summary["finite_range_note"]
    import warnings as _w
    with _w.catch_warnings():
        _w.simplefilter("error")
        rep = ex.run_zero_temperature_limit(SHOT, kappa_ladder=[0.4, 0.2], N=6,
                                            seeds=2, h=0.08, halfwidth=4.0,
                                            tolerances={"gap_shrink_min": 1.5})
    assert rep.summary["finite_range_note"] is None
