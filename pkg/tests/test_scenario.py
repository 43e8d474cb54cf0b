import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfisac.numerics import RngStream
from cfisac.scenario import (ConfigError, ScenarioConfig, build_geometry, build_pathloss,
                             config_to_text, parse_config_text, pathloss_matrix,
                             radar_two_way_pathloss, ring_geometry, split_mode,
                             steering_vector)


def test_defaults_validate():
    cfg = ScenarioConfig().validate()
    assert cfg.mode == "SE-HD" and cfg.M_star == 20 and cfg.M_comm == 20


def test_shared_sizes():
    cfg = ScenarioConfig().with_mode("SH-FD")
    assert cfg.M_star == cfg.M_comm == 40
    assert cfg.constellation_name == "BPSK"


def test_split_mode_rejects_unknown():
    with pytest.raises(ValueError):
        split_mode("XX-HD")


def test_noise_from_snr():
    cfg = ScenarioConfig(P_r=0.1, pr_over_n0_db=10)
    assert cfg.noise == pytest.approx(0.01)
    assert cfg.replace(noise_total_variance=3.0).noise == 3.0


def test_validate_collects_errors():
    with pytest.raises(ConfigError) as exc:
        ScenarioConfig(M_c=10, P_c=2.0).validate()
    assert "M_c" in str(exc.value) and "P_c" in str(exc.value)


def test_config_text_round_trip():
    cfg = ScenarioConfig(sigma_ic_sq=1e-3, n_mc=17).with_mode("SH-FD")
    back, extras = parse_config_text(config_to_text(cfg))
    assert back == cfg and extras == {}


def test_config_text_mode_key_and_unknown():
    cfg, extras = parse_config_text("mode = SE-FD\nfoo = 1\n", extra_keys=("foo",))
    assert cfg.mode == "SE-FD" and extras == {"foo": "1"}
    with pytest.raises(ConfigError):
        parse_config_text("bar = 2\n")


def test_geometry_counts_and_separation():
    cfg = ScenarioConfig()
    g = build_geometry(cfg, RngStream(9, 0, "geometry"))
    assert g.ap_xy.shape == (40, 2)
    assert g.dl_ue_xy.shape == (2, 2) and g.ul_ue_xy.shape == (2, 2)
    assert g.target_xy.shape == (3, 2)
    d = np.hypot(*(g.ap_xy[:, None] - g.ap_xy[None]).transpose(2, 0, 1))
    assert d[~np.eye(40, dtype=bool)].min() >= 100


def test_geometry_deterministic():
    cfg = ScenarioConfig()
    a = build_geometry(cfg, RngStream(9, 4, "geometry"))
    b = build_geometry(cfg, RngStream(9, 4, "geometry"))
    for f in ("ap_xy", "dl_ue_xy", "ul_ue_xy", "target_xy"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_pathloss_values():
    assert pathloss_matrix([[0, 0]], [[100, 0]], 3)[0, 0] == pytest.approx(1e-3)
    assert pathloss_matrix([[0, 0]], [[1, 0]], 3)[0, 0] == 1.0
    assert pathloss_matrix([[0, 0]], [[0.1, 0]], 3)[0, 0] == 1.0


def test_two_way_pathloss():
    assert radar_two_way_pathloss(np.array([[50.0, 0]]), [0, 0], 3)[0] == pytest.approx(1e-3)
    ang = np.linspace(0, 2 * np.pi, 7, endpoint=False)
    ring = np.column_stack([80 * np.cos(ang), 80 * np.sin(ang)])
    d = radar_two_way_pathloss(ring, [0, 0], 3)
    assert np.allclose(d, d[0], rtol=1e-14)
    s = np.linalg.svd(np.outer(d, d), compute_uv=False)
    assert s[1] < 1e-12


def test_steering_vector_phases():
    lam = 0.0857
    assert steering_vector(np.array([[5 * lam, 0.0]]), [0, 0], lam)[0] == pytest.approx(1 + 0j, abs=1e-9)
    assert steering_vector(np.array([[lam / 4, 0.0]]), [0, 0], lam)[0] == pytest.approx(-1 + 0j, abs=1e-12)


@given(st.integers(0, 10_000))
def test_steering_unit_modulus(seed):
    pts = np.random.default_rng(seed).uniform(0, 800, (50, 2))
    a = steering_vector(pts, [400.0, 400.0], 0.0857)
    assert np.max(np.abs(np.abs(a) - 1)) < 1e-12


def test_pathloss_set_shapes():
    for mode, mc, ms in [("SE-HD", 20, 20), ("SH-FD", 40, 40)]:
        cfg = ScenarioConfig().with_mode(mode)
        pl = build_pathloss(cfg, build_geometry(cfg, RngStream(1, 0, "geometry")))
        assert pl.D_c.shape == (2, mc) and pl.D_ru.shape == (2, ms)
        assert pl.D_rc.shape == (mc, ms) and pl.D_u.shape == (2, 2)
        assert pl.g.shape == (3, ms)
        assert np.allclose(pl.g, pl.d_r * pl.a)
        rank_one = np.outer(pl.d_r[0], pl.d_r[0]) * np.outer(pl.a[0], pl.a[0].conj())
        assert np.max(np.abs(rank_one - np.outer(pl.g[0], pl.g[0].conj()))) < 1e-12


def test_ring_geometry_is_homogeneous():
    cfg = ScenarioConfig()
    pl = build_pathloss(cfg, ring_geometry(cfg, ue_offset_m=0.0))
    assert np.allclose(pl.D_c, pl.D_c[0, 0])
