import numpy as np
import pytest
from scipy import stats as sps

from ghostsim.errors import ValidationError
from ghostsim.scene import make_binary_scene, uniform_scene
from ghostsim.simulator import (BLOCK_FRAMES, SourceParams, apply_extra_loss, default_workers,
                                poisson_regime, simulate_buckets, simulate_pair)

from conftest import cov_se, mean_se, var_se

LOW = dict(n2=1000.0, M=5e10)


@pytest.mark.parametrize("kind", ["twin", "thermal"])
def test_opaque_object_leaves_only_read_noise(kind):
    p = SourceParams(kind, eta=0.8, delta_el=5.0, **LOW)
    probe, ref = simulate_pair(p, uniform_scene(3, 2, 0.0), 20000, seed=1)
    x = probe.values.reshape(20000, -1)
    m, mse = mean_se(x)
    v, vse = var_se(x)
    assert np.all(np.abs(m) < 5 * mse)
    assert np.all(np.abs(v - 25.0) < 5 * vse)


def test_twin_pair_covariance():
    p = SourceParams("twin", eta=0.8, **LOW)
    probe, ref = simulate_pair(p, uniform_scene(2, 2), 10**5, seed=2)
    c, se = cov_se(probe.values.reshape(10**5, -1), ref.values.reshape(10**5, -1))
    oracle = 0.8 * 1000 + 1000 ** 2 / 5e10
    assert np.all(np.abs(c - oracle) < 5 * se)
    m, mse = mean_se(ref.values.reshape(10**5, -1))
    assert np.all(np.abs(m - 1000) < 5 * mse)


def test_thermal_pair_covariance_is_negligible():
    p = SourceParams("thermal", eta=0.8, **LOW)
    probe, ref = simulate_pair(p, uniform_scene(2, 2), 10**5, seed=3)
    c, se = cov_se(probe.values.reshape(10**5, -1), ref.values.reshape(10**5, -1))
    assert np.all(np.abs(c - 2e-5) < 5 * se)


def test_extra_loss():
    p = SourceParams("twin", 1000.0, 5e10, 0.794)
    assert apply_extra_loss(p, 1.0) == p
    assert apply_extra_loss(p, 0.5 / 0.794).eta == pytest.approx(0.5)
    assert round(0.5 / 0.794, 2) == 0.63
    q = apply_extra_loss(p, 0.378)
    assert round(q.eta, 3) == 0.300
    assert q.n2 == pytest.approx(378.0)
    with pytest.raises(ValidationError):
        apply_extra_loss(p, 0.0)


@pytest.mark.parametrize("kw", [dict(kind="laser"), dict(n2=0.0), dict(M=0.5), dict(eta=1.2),
                                dict(eta=0.0), dict(delta_el=-1.0)])
def test_params_validation(kw):
    base = dict(kind="twin", n2=10.0, M=5.0, eta=0.5, delta_el=0.0)
    base.update(kw)
    with pytest.raises(ValidationError):
        SourceParams(**base)


def test_regime_labels():
    assert SourceParams("twin", 1000.0, 1.0, 0.8).regime == "high_brightness"
    assert SourceParams("twin", 1000.0, 5e10, 0.8).regime == "low_brightness"
    assert SourceParams("twin", 1000.0, 1000.0, 0.8).regime == "general"


def test_frame_count_validation():
    with pytest.raises(ValidationError):
        simulate_pair(SourceParams("twin", **LOW, eta=0.5), uniform_scene(2, 2), 0, seed=0)


@pytest.mark.parametrize("kind,M", [("twin", 5e10), ("thermal", 3.0)])
def test_worker_count_does_not_change_output(kind, M):
    p = SourceParams(kind, 50.0, M, 0.7, 2.0)
    scene = make_binary_scene(9, 7, 0.3, 1.0, 0.2)
    H = 3 * BLOCK_FRAMES + 17
    a = simulate_pair(p, scene, H, seed=11, workers=1)
    b = simulate_pair(p, scene, H, seed=11, workers=8)
    for x, y in zip(a, b):
        assert x.values.tobytes() == y.values.tobytes()
    c = simulate_pair(p, scene, H, seed=12, workers=1)
    assert c[0].values.tobytes() != a[0].values.tobytes()


def test_env_var_sets_default_workers(monkeypatch):
    monkeypatch.setenv("GHOSTSIM_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("GHOSTSIM_THREADS", "many")
    with pytest.raises(ValidationError):
        default_workers()


def test_bucket_route_is_exact_sum_outside_poisson_regime():
    p = SourceParams("twin", 20.0, 2.0, 0.6, 1.5)
    assert not poisson_regime(p)
    scene = make_binary_scene(6, 5, 0.4, 1.0, 0.3)
    regions = np.arange(30).reshape(5, 6) % 3
    buckets, ref = simulate_buckets(p, scene, 1100, seed=5, regions=regions)
    probe, ref2 = simulate_pair(p, scene, 1100, seed=5)
    assert ref.values.tobytes() == ref2.values.tobytes()
    flat = probe.values.reshape(1100, -1)
    for r in range(3):
        np.testing.assert_allclose(buckets[:, r], flat[:, regions.ravel() == r].sum(axis=1), rtol=1e-12)


@pytest.mark.parametrize("kind", ["twin", "thermal"])
def test_bucket_route_matches_per_pixel_route_in_distribution(kind):
    """The fast bucket sampler and summed per-pixel frames share one joint law."""
    p = SourceParams(kind, 30.0, 5e10, 0.7, 3.0)
    assert poisson_regime(p)
    scene = make_binary_scene(8, 6, 0.4, 0.9, 0.25)
    regions = (np.arange(48).reshape(6, 8) // 4) % 2
    H = 60000
    fast, ref_f = simulate_buckets(p, scene, H, seed=21, regions=regions)
    probe, ref_s = simulate_pair(p, scene, H, seed=22)
    flat = probe.values.reshape(H, -1)
    slow = np.stack([flat[:, regions.ravel() == r].sum(axis=1) for r in range(2)], axis=1)
    rf = ref_f.values.reshape(H, -1)
    rs = ref_s.values.reshape(H, -1)
    for a, b in ((fast, slow), (rf, rs)):
        ma, sa = mean_se(a)
        mb, sb = mean_se(b)
        assert np.all(np.abs(ma - mb) < 5 * np.hypot(sa, sb))
        va, vsa = var_se(a)
        vb, vsb = var_se(b)
        assert np.all(np.abs(va - vb) < 5 * np.hypot(vsa, vsb))
    for r in range(2):
        ca, csa = cov_se(fast[:, [r]], rf)
        cb, csb = cov_se(slow[:, [r]], rs)
        assert np.all(np.abs(ca - cb) < 5 * np.hypot(csa, csb))
        assert sps.ks_2samp(fast[:, r], slow[:, r]).pvalue > 1e-4
    cf, csf = cov_se(fast[:, [0]], fast[:, [1]])
    cs, css = cov_se(slow[:, [0]], slow[:, [1]])
    assert np.all(np.abs(cf - cs) < 5 * np.hypot(csf, css))


def test_bucket_route_worker_invariance():
    p = SourceParams("twin", 100.0, 5e10, 0.8, 5.0)
    scene = make_binary_scene(10, 10, 0.3, 1.0, 0.0)
    a = simulate_buckets(p, scene, 2000, seed=4, workers=1)
    b = simulate_buckets(p, scene, 2000, seed=4, workers=8)
    assert a[0].tobytes() == b[0].tobytes()
    assert a[1].values.tobytes() == b[1].values.tobytes()


def test_bucket_route_region_validation():
    p = SourceParams("twin", 100.0, 5e10, 0.8)
    scene = uniform_scene(4, 4)
    with pytest.raises(ValidationError):
        simulate_buckets(p, scene, 10, 0, regions=np.full((4, 4), 1))
    with pytest.raises(ValidationError):
        simulate_buckets(p, scene, 10, 0, regions=np.zeros((3, 4), int))
