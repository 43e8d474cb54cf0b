"""Shared fixtures: empirical residual powers from the explicit synthesis path."""
import math

import numpy as np

from cfisac import channel, comm, radar
from cfisac.numerics import RngStream
from cfisac.scenario import build_geometry, build_pathloss


def scenario(cfg, seed=4):
    pl = build_pathloss(cfg, build_geometry(cfg, RngStream(seed, 0, "geometry")))
    wf = radar.make_waveform(cfg.M_star, cfg.T, cfg.L, cfg.P_r)
    return pl, wf


def exact_stats(cfg, wf):
    return channel.WaveformStats(wf.tr_Rx, 1.0 / (cfg.M_comm * cfg.K_D))


def drives_for_trial(cfg, pl, ch, wf, gen):
    const = comm.constellation_for(cfg)
    _, dl = comm.draw_symbols(cfg.L, cfg.K_D, const, gen)
    _, ul = comm.draw_symbols(cfg.L, cfg.K_U, const, gen)
    s_dl, _ = comm.precode_dl(comm.dl_channel(cfg.mode, ch, pl), dl, cfg)
    u_tx = math.sqrt(cfg.P_u / cfg.K_U) * ul
    return comm.drive_signals(cfg, wf, s_dl, u_tx)


def residual_powers(cfg, pl, wf, n_trials, seed=0, t=0):
    """Mean |.|^2 of the UL residual and of the radar observation minus echo (q = 0, 1)."""
    ul = r0 = r1 = 0.0
    n_ul = n_r = 0
    for i in range(n_trials):
        gen = RngStream(seed, i).generator
        ch = channel.draw_channels(cfg, pl, gen)
        d = drives_for_trial(cfg, pl, ch, wf, gen)
        res = channel.synthesize_residual(ch.ul_terms, ch.ul_err, d)
        ul += np.sum(np.abs(res) ** 2)
        n_ul += np.size(res)
        Y0 = radar.synthesize_radar_snapshots(cfg.mode, 0, t, ch, pl, wf, cfg, d, gen)
        Y1 = radar.synthesize_radar_snapshots(cfg.mode, 1, t, ch, pl, wf, cfg, d, gen, alpha=1.0)
        Y1 = Y1 - radar.echo_term(t, pl, wf, 1.0).T
        r0 += np.sum(np.abs(Y0) ** 2)
        r1 += np.sum(np.abs(Y1) ** 2)
        n_r += Y0.size
    return ul / n_ul, r0 / n_r, r1 / n_r
