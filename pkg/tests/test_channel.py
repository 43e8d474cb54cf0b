from types import SimpleNamespace

import numpy as np
import pytest

from cfisac import channel
from cfisac.numerics import RngStream
from cfisac.scenario import MODES, ScenarioConfig

from helpers import exact_stats, residual_powers, scenario


def test_se_hd_mode_table():
    cfg = ScenarioConfig()
    pl, _ = scenario(cfg)
    ch = channel.draw_channels(cfg, pl, RngStream(1))
    assert set(ch.fading) == {"H", "H_ul", "F", "H_R2C", "G_r_ul"}
    assert [t.name for t in ch.ul_terms] == ["H_R2C"]
    assert "H_SI" not in ch.fading


@pytest.mark.parametrize("mode", MODES)
def test_error_stack_shapes(mode):
    cfg = ScenarioConfig().with_mode(mode)
    pl, _ = scenario(cfg)
    ch = channel.draw_channels(cfg, pl, RngStream(1))
    for term, E in zip(ch.ul_terms, ch.ul_err):
        assert E.shape == (cfg.L, cfg.M_comm, channel.drive_size(term.drive, cfg))
    for term, E in zip(ch.radar_terms, ch.radar_err):
        assert E.shape == (cfg.T, cfg.L, cfg.M_star, channel.drive_size(term.drive, cfg))
        assert np.shape(term.gain) == (cfg.T,)


def test_fading_power():
    cfg = ScenarioConfig(M=400, M_c=200, M_r=200, K_D=2500)
    pl = SimpleNamespace(D_rc=np.ones((200, 200)), D_ru_ul=np.ones((2, 200)),
                         d_r=np.ones((3, 200)), clutter_eta_sum=np.ones(3))
    ch = channel.draw_channels(cfg, pl, RngStream(2), radar=False)
    assert np.mean(np.abs(ch.H) ** 2) == pytest.approx(1.0, rel=0.01)


def test_zero_ic_error_gives_zero_stacks():
    cfg = ScenarioConfig(sigma_ic_sq=0.0).with_mode("SH-FD")
    pl, _ = scenario(cfg)
    ch = channel.draw_channels(cfg, pl, RngStream(1))
    assert all(not np.any(E) for E in ch.ul_err + ch.radar_err)


def test_dl_interference_noise_only():
    for mode in MODES:
        cfg = ScenarioConfig(P_r=0.0, P_u=0.0, noise_total_variance=2e-3).with_mode(mode)
        pl, _ = scenario(cfg)
        assert channel.dl_interference_variance(mode, cfg, pl, 0) == pytest.approx(2e-3)


def test_dl_fd_minus_hd_is_ue_to_ue_term():
    cfg = ScenarioConfig()
    pl, _ = scenario(cfg)
    hd = channel.dl_interference_variance("SE-HD", cfg, pl, 1)
    fd = channel.dl_interference_variance("SE-FD", cfg.with_mode("SE-FD"), pl, 1)
    want = np.sum(cfg.P_u / cfg.K_U * pl.D_u[1] ** 2) * cfg.u_var
    assert fd - hd == pytest.approx(want, rel=1e-12)


def test_dl_single_radar_ap_hand_value():
    cfg = ScenarioConfig(M=2, M_c=1, M_r=1, K_D=1, P_r=0.1, noise_total_variance=1e-3)
    pl = SimpleNamespace(D_ru=np.array([[100.0 ** -1.5]]))
    assert channel.dl_interference_variance("SE-HD", cfg, pl, 0) == pytest.approx(1.0001e-3, rel=1e-12)


def test_ul_residual_trivial_cases():
    cfg = ScenarioConfig(sigma_ic_sq=0.0)
    pl, wf = scenario(cfg)
    ws = exact_stats(cfg, wf)
    assert channel.ul_residual_variance("SE-HD", cfg, pl, ws) == 0.0
    cfg = ScenarioConfig(sigma_ic_sq=1e-3, beta_ap=0.0)
    assert (channel.ul_residual_variance("SE-FD", cfg.with_mode("SE-FD"), pl, ws)
            == pytest.approx(channel.ul_residual_variance("SE-HD", cfg, pl, ws)))


def test_radar_residual_trivial_cases():
    cfg = ScenarioConfig(sigma_ic_sq=0.0, noise_total_variance=5e-3).with_mode("SH-FD")
    pl, wf = scenario(cfg)
    ws = exact_stats(cfg, wf)
    assert channel.radar_residual_variance("SH-FD", cfg, pl, ws, 1) == pytest.approx(5e-3)
    cfg = cfg.replace(sigma_ic_sq=1e-2, duplex="HD")
    v0 = channel.radar_residual_variance("SH-HD", cfg, pl, ws, 0)
    v1 = channel.radar_residual_variance("SH-HD", cfg, pl, ws, 1)
    extra = cfg.eps_radar * np.sum(pl.d_r[0] ** 2) ** 2 * ws.sigma_w_sq * cfg.P_c
    assert v1 - v0 == pytest.approx(extra, rel=1e-10)


@pytest.mark.parametrize("mode", MODES)
def test_residual_synthesis_matches_closed_form(mode):
    # small version of the variance-consistency acceptance check
    cfg = ScenarioConfig(sigma_ic_sq=1e-2, beta_ap=0.1, beta_r=0.1, T=1, L=50,
                         noise_total_variance=0.0).with_mode(mode)
    pl, wf = scenario(cfg)
    ws = exact_stats(cfg, wf)
    v_ul = channel.ul_residual_variance(mode, cfg, pl, ws)
    noise = channel.radar_residual_variance(mode, cfg, pl, ws, 1)
    cfg = cfg.replace(noise_total_variance=noise)
    ul, r0, r1 = residual_powers(cfg, pl, wf, 60, seed=3)
    assert ul == pytest.approx(v_ul, rel=0.06)
    assert r0 == pytest.approx(channel.radar_residual_variance(mode, cfg, pl, ws, 0), rel=0.06)
    assert r1 == pytest.approx(channel.radar_residual_variance(mode, cfg, pl, ws, 1), rel=0.06)
