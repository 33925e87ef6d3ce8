import numpy as np
import pytest

from ghostsim.calib import FitFixed, estimate_eta_covariance, fit_eta, golden_section, model_curve
from ghostsim.errors import ConvergenceError, ValidationError
from ghostsim.estimators import measure_snr, reconstruct
from ghostsim.experiments import derive_seed, repeat_point
from ghostsim.scene import make_binary_scene, scene_stats, uniform_scene
from ghostsim.simulator import SourceParams, simulate_pair

LOW = dict(n2=1000.0, M=5e10)


def test_covariance_route_recovers_efficiency():
    p = SourceParams("twin", eta=0.8, delta_el=5.0, **LOW)
    probe, ref = simulate_pair(p, uniform_scene(20, 20), 30000, seed=1)
    est = estimate_eta_covariance(probe, ref, np.ones((20, 20), bool), p.M)
    assert abs(est.eta - 0.8) < 0.01
    assert abs(est.eta - 0.8) < 5 * est.std_error
    assert est.n_pairs == 400


def test_ideal_channel():
    p = SourceParams("twin", eta=1.0, **LOW)
    probe, ref = simulate_pair(p, uniform_scene(10, 10), 20000, seed=2)
    est = estimate_eta_covariance(probe, ref, np.ones((10, 10), bool), p.M)
    assert est.eta == pytest.approx(1.0, abs=0.01)


def test_brightness_correction_removes_bias():
    p = SourceParams("twin", 100.0, 1e3, 0.6)
    probe, ref = simulate_pair(p, uniform_scene(10, 10), 30000, seed=3)
    region = np.ones((10, 10), bool)
    with_corr = estimate_eta_covariance(probe, ref, region, p.M)
    without = estimate_eta_covariance(probe, ref, region, np.inf)
    assert abs(with_corr.eta - 0.6) < 5 * with_corr.std_error
    assert without.eta - 0.6 == pytest.approx(0.1, abs=5 * without.std_error)


def test_covariance_route_validation():
    p = SourceParams("twin", eta=0.8, **LOW)
    probe, ref = simulate_pair(p, uniform_scene(5, 5), 20, seed=4)
    with pytest.raises(ValidationError):
        estimate_eta_covariance(probe, ref, np.ones((5, 5), bool), p.M)  # 25 < 50 pixels
    with pytest.raises(ValidationError):
        estimate_eta_covariance(probe, ref, np.ones((5, 5), bool), p.M, kind="thermal", min_pixels=1)


def fixed(protocol="gi", **kw):
    base = dict(n2=1000.0, M=5e10, delta_el=5.0, n_pixels=952, H=3e4, protocol=protocol)
    base.update(kw)
    return FitFixed(**base)


@pytest.mark.parametrize("protocol", ["gi", "dgi", "odgi"])
def test_fit_is_self_consistent(protocol):
    fx = fixed(protocol)
    eps = np.linspace(0.1, 0.9, 9)
    y = model_curve(fx, "snr_vs_eps", 0.794, eps)
    res = fit_eta(list(zip(eps, y, np.full(9, 0.05))), "snr_vs_eps", fx)
    assert res.eta_hat == pytest.approx(0.794, abs=1e-4)
    assert res.std_error > 0
    assert res.residual_sum < 1e-6
    assert np.all(res.band_lower <= res.fitted) and np.all(res.fitted <= res.band_upper)
    assert not res.at_boundary


def test_fit_in_transmission_contrast():
    fx = fixed("odgi", epsilon=0.52)
    tm = np.linspace(0.0, 0.8, 5)
    y = model_curve(fx, "snr_vs_tminus", 0.5, tm)
    res = fit_eta(list(zip(tm, y, np.full(5, 0.05))), "snr_vs_tminus", fx)
    assert res.eta_hat == pytest.approx(0.5, abs=1e-4)
    with pytest.raises(ValidationError):
        model_curve(fixed(), "snr_vs_tminus", 0.5, tm)


def test_fit_needs_three_points():
    fx = fixed()
    with pytest.raises(ValidationError):
        fit_eta([(0.1, 3.0, 0.1), (0.5, 4.0, 0.1)], "snr_vs_eps", fx)
    with pytest.raises(ValidationError):
        fit_eta([(0.1, 3.0, 0.1), (0.5, 4.0, 0.0), (0.6, 4.0, 0.1)], "snr_vs_eps", fx)


def test_fit_flags_boundary():
    fx = fixed()
    eps = np.linspace(0.1, 0.9, 5)
    y = model_curve(fx, "snr_vs_eps", 1.0, eps) * 1.2  # beyond any efficiency
    res = fit_eta(list(zip(eps, y, np.full(5, 0.05))), "snr_vs_eps", fx)
    assert res.at_boundary


def test_golden_section():
    x, fx, it = golden_section(lambda v: (v - 0.3) ** 2, 0.0, 1.0, tol=1e-8)
    assert x == pytest.approx(0.3, abs=1e-7)
    with pytest.raises(ConvergenceError):
        golden_section(lambda v: v * v, -1.0, 1.0, tol=1e-12, max_iter=5)


def _small_campaign(eta, master, eps_values, route_pixels=False):
    """SNR-vs-epsilon points (10 seeds each) on a small grid.

    Both regions keep >= 100 pixels so the finite-sample bias of the
    spatial SNR estimator stays well below the fit error.
    """
    p = SourceParams("twin", eta=eta, delta_el=5.0, **LOW)
    pts, covs = [], []
    for i, eps in enumerate(eps_values):
        scene = make_binary_scene(20, 20, eps, 1.0, 0.0)
        seeds = [derive_seed(master, i, j) for j in range(10)]
        if not route_pixels:
            s = repeat_point(p, scene, 1500, seeds, protocols=("gi",))["gi"]
            pts.append((scene_stats(scene).epsilon, s.snr_mean, s.snr_err))
            continue
        plus, minus = scene.level_masks()
        vals = []
        for sd in seeds:
            probe, ref = simulate_pair(p, scene, 1500, sd, workers=1)
            vals.append(measure_snr(reconstruct(probe, ref, "gi"), plus, minus).snr)
            covs.append(estimate_eta_covariance(probe, ref, plus, p.M, min_pixels=10))
        v = np.array(vals)
        pts.append((scene_stats(scene).epsilon, v.mean(), v.std(ddof=1) / np.sqrt(v.size)))
    return pts, covs


@pytest.mark.slow
def test_fit_coverage_over_replicates():
    eta = 0.794
    fx = fixed(n_pixels=400, H=1500)
    hits = 0
    n_rep = 20
    for rep in range(n_rep):
        pts, _ = _small_campaign(eta, 1000 + rep, [0.3, 0.45, 0.6, 0.75])
        res = fit_eta(pts, "snr_vs_eps", fx)
        hits += abs(res.eta_hat - eta) <= res.std_error
    assert 0.55 <= hits / n_rep <= 0.85


@pytest.mark.slow
def test_fit_and_covariance_routes_agree():
    eta = 0.794
    pts, covs = _small_campaign(eta, 77, [0.3, 0.45, 0.6, 0.75], route_pixels=True)
    res = fit_eta(pts, "snr_vs_eps", fixed(n_pixels=400, H=1500))
    per = np.array([c.eta for c in covs])
    cov_eta, cov_se = per.mean(), per.std(ddof=1) / np.sqrt(per.size)
    assert abs(res.eta_hat - cov_eta) < 2 * np.hypot(res.std_error, cov_se)
