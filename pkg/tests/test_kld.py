import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfisac import kld, radar
from cfisac.comm import Constellation, PerDrawCloud, make_constellation
from cfisac.numerics import DomainError, sample_complex_gaussian
from cfisac.scenario import ScenarioConfig


def test_kld_gaussian_cases():
    I = np.eye(2)
    assert kld.kld_gaussian([0, 0], [0, 0], I, I) == 0.0
    assert kld.kld_gaussian([0, 0], [1, 0], I, I) == pytest.approx(1 / (2 * math.log(2)))
    assert kld.kld_gaussian([0, 0], [0, 0], 2 * I, I) == pytest.approx(
        (4 - 2 + math.log(1 / 4)) / (2 * math.log(2)))
    assert kld.kld_gaussian([0, 0], [0, 0], 2 * I, I) == pytest.approx(0.44270, abs=1e-5)


def test_kld_gaussian_monte_carlo():
    # E_m[log f_m - log f_n] for N(0, 2I) against N(0, I)
    gen = np.random.default_rng(0)
    x = gen.standard_normal((2_000_000, 2)) * math.sqrt(2)
    r2 = np.sum(x * x, axis=1)
    llr = -math.log(2) - r2 / 4 + r2 / 2
    assert np.mean(llr) / math.log(2) == pytest.approx(0.44270, abs=3e-3)


def test_kld_gaussian_rejects_bad_covariance():
    with pytest.raises(DomainError):
        kld.kld_gaussian([0, 0], [0, 0], np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(DomainError):
        kld.kld_gaussian([0], [0, 0], np.eye(2), np.eye(2))


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(0.1, 5), st.floats(0.1, 5))
def test_kld_gaussian_nonnegative(mu, a, b):
    assert kld.kld_gaussian(mu, [0, 0], a * np.eye(2), b * np.eye(2)) >= -1e-12


def test_constellation_lambda():
    assert kld.constellation_lambda([0, math.pi]) == pytest.approx(4)
    assert kld.constellation_lambda([0, math.pi / 2, math.pi, 3 * math.pi / 2]) == pytest.approx(16)
    assert kld.constellation_lambda([0.3]) == 0.0


def _pl(dbar, K=2, M=20):
    return SimpleNamespace(D_c=np.full((K, M), dbar), D_c_ul=np.full((K, M), dbar))


def test_kld_dl_hand_value():
    cfg = ScenarioConfig(P_c=0.8)
    val = kld.kld_dl("SE-HD", 0, cfg, _pl(1e-3), 1e-6)
    assert val == pytest.approx(4 / 3 * 0.4 * 19 / math.log(2), rel=1e-12)
    assert val == pytest.approx(14.62, abs=0.01)


def test_kld_dl_degenerate_and_linear():
    cfg = ScenarioConfig(P_c=0.4)
    single = Constellation("one", 1, (0.0,))
    assert kld.kld_dl("SE-HD", 0, cfg, _pl(1e-3), 1e-6, single) == 0.0
    a = kld.kld_dl("SE-HD", 0, cfg, _pl(1e-3), 1e-6)
    b = kld.kld_dl("SE-HD", 0, cfg.replace(P_c=0.8), _pl(1e-3), 1e-6)
    assert b == pytest.approx(2 * a)


def test_kld_mode_must_match_config():
    with pytest.raises(ValueError):
        kld.kld_dl("SE-FD", 0, ScenarioConfig(), _pl(1e-3), 1e-6)


def test_kld_ul_noise_limited_and_monotone():
    cfg = ScenarioConfig(noise_total_variance=1e-6)
    pl = _pl(1e-3)
    base = kld.kld_ul("SE-HD", 0, cfg, pl, 0.0)
    assert base == pytest.approx(4 / 3 * 0.05 * 1e-6 * 18 / (0.5e-6 * math.log(2)))
    vals = [kld.kld_ul("SE-HD", 0, cfg, pl, r) for r in (0.0, 1e-7, 1e-6, 1e-5)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_kld_ul_needs_enough_aps():
    cfg = ScenarioConfig(M=6, M_c=3, M_r=3, K_U=2, K_D=2)
    with pytest.raises(ValueError):
        kld.kld_ul("SE-HD", 0, cfg, _pl(1e-3, M=3), 0.0)


def _radar_setup():
    cfg = ScenarioConfig(L=64)
    wf = radar.make_waveform(4, 1, 64, 0.1)
    gen = np.random.default_rng(1)
    pl = SimpleNamespace(g=gen.standard_normal((1, 4)) + 1j * gen.standard_normal((1, 4)))
    return cfg, wf, pl


@given(st.floats(1e-3, 10), st.floats(1e-6, 10))
def test_radar_kld_noncentrality_identity(alpha, var):
    cfg, wf, pl = _radar_setup()
    lam = radar.noncentrality(0, cfg, pl, wf, alpha, var)
    k = kld.kld_radar("SE-HD", 0, cfg, pl, wf, alpha, var)
    assert lam == pytest.approx(4 * cfg.L * math.log(2) * k, rel=1e-10)
    assert kld.radar_kld_from_noncentrality(lam, cfg.L) == pytest.approx(k, rel=1e-10)


def test_radar_kld_scaling():
    cfg, wf, pl = _radar_setup()
    assert kld.kld_radar("SE-HD", 0, cfg, pl, wf, 0.0, 1.0) == 0.0
    a = kld.kld_radar("SE-HD", 0, cfg, pl, wf, 1.0, 1.0)
    assert kld.kld_radar("SE-HD", 0, cfg, pl, wf, 1.0, 4.0) == pytest.approx(a / 4)


def test_kld_comm_total():
    assert kld.kld_comm_total([3.0, 5.0], [], 2, 0) == 8.0
    assert kld.kld_comm_total([1.0], [3.0], 1, 1) == 2.0
    assert kld.kld_comm_total([2, 2], [4], 2, 1) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        kld.kld_comm_total([1.0], [1.0], 2, 1)


def test_per_draw_cloud_matches_equal_covariance_kld():
    const = make_constellation("BPSK")
    gen = np.random.default_rng(3)
    cloud = PerDrawCloud(1, 2)
    v = 0.5
    for _ in range(400):
        idx = gen.integers(0, 2, (100, 1))
        y = const.points[idx] + sample_complex_gaussian(100, 1, v, gen)
        cloud.add(y, idx)
    # mean difference 2 on one axis, per-axis variance v/2
    want = 4 / (v / 2) / (2 * math.log(2))
    assert kld.empirical_kld_per_draw(cloud, 0) == pytest.approx(want, rel=0.03)
