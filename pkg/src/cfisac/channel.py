"""Small-scale fading draws and closed-form residual interference variances.

All variances here are total complex variances E|.|^2. The one IC error
knob `sigma_ic_sq` is the total variance of every estimation-error entry;
`sigma_ic_sq_ul` and `sigma_ic_sq_radar` override it for the uplink and
radar receivers.

Residual synthesis. Each residual term is sqrt(gain) * E_l @ v_l where E_l
is an explicit i.i.d. CN(0, eps) error matrix drawn per snapshot and v_l
is the signal that leaks (radar waveform, DL precoded vector, UL symbols,
or their sum). Per receive element this gives variance eps*gain*|v_l|^2,
and `gain` is chosen so the sum over terms is the closed form below.
"""
from dataclasses import dataclass

import numpy as np

from .numerics import as_generator, sample_complex_gaussian
from .scenario import split_mode


@dataclass(frozen=True)
class WaveformStats:
    """Second-order statistics of the transmitted signals that scale the residuals."""
    tr_Rx: float       # trace of the unit radar waveform covariance
    sigma_w_sq: float  # mean power per entry of W P s, divided by P_c


@dataclass(frozen=True)
class ResidualTerm:
    name: str     # error-matrix name
    gain: float   # aggregate large-scale gain
    drive: str    # one of x, s_dl, u_tx, comp


@dataclass
class ChannelRealization:
    mode: str
    fading: dict
    ul_terms: list
    ul_err: list          # per UL term: (L, M_rx, N) error stack
    radar_terms: list     # per radar term: ResidualTerm with gain array over bins
    radar_err: list       # per radar term: (T, L, M*, N) error stack

    def __getattr__(self, name):
        fading = self.__dict__.get("fading", {})
        if name in fading:
            return fading[name]
        raise AttributeError(name)


# ---------------------------------------------------------------------------
# closed forms

def dl_interference_variance(mode, config, pathloss, ue_index):
    """Radar interference, clutter, UE-to-UE interference and noise seen by one DL UE."""
    dep, dup = split_mode(mode)
    k = ue_index
    if dep == "separated":
        v = config.P_r / config.M_r * np.sum(pathloss.D_ru[k] ** 2) * config.f_var
    else:
        v = (config.P_r / config.M ** 2 * np.sum(pathloss.D_c[k] ** 2)
             * (config.h_var + config.f_var))
    if dup == "FD":
        v += np.sum(config.P_u / config.K_U * pathloss.D_u[k] ** 2) * config.u_var
    return float(v + config.noise)


def ul_residual_variance(mode, config, pathloss, waveform_stats):
    """Post-cancellation UL residual per AP, excluding receiver noise."""
    dep, dup = split_mode(mode)
    eps = config.eps_ul
    tr_Rx = waveform_stats.tr_Rx
    sw = waveform_stats.sigma_w_sq
    Drc = np.sum(pathloss.D_rc ** 2)
    if dep == "separated":
        v = config.P_r / config.M_r ** 2 * Drc * tr_Rx
        if dup == "FD":
            v += config.beta_ap ** 2 * sw * config.M_c * config.P_c
        return float(eps * v)
    composite = sw * config.M * config.P_c + config.P_r / config.M * tr_Rx
    coupling = Drc + (config.beta_ap ** 2 * config.M if dup == "FD" else 0.0)
    return float(eps * coupling * composite)


def radar_residual_variance(mode, config, pathloss, waveform_stats, hypothesis, bin=0):
    """Post-cancellation radar residual per AP for one bin, including receiver noise."""
    dep, dup = split_mode(mode)
    eps = config.eps_radar
    tr_Rx = waveform_stats.tr_Rx
    sw = waveform_stats.sigma_w_sq
    ul_leak = np.sum(pathloss.D_ru_ul ** 2) / config.K_U * config.P_u
    if dep == "separated":
        v = ul_leak
        if dup == "FD":
            v += (np.sum(pathloss.D_rc ** 2) * sw * config.P_c
                  + config.beta_r ** 2 * config.P_r / config.M_r * tr_Rx)
    elif dup == "HD":
        Drt = np.sum(pathloss.d_r[bin] ** 2) ** 2
        v = Drt * sw * config.P_c * hypothesis + ul_leak
    else:
        composite = sw * config.M * config.P_c + config.P_r / config.M * tr_Rx
        v = (pathloss.clutter_eta_sum[bin] ** 2 / config.M * composite
             + config.beta_r ** 2 * composite + ul_leak)
    return float(eps * v + config.noise)


# ---------------------------------------------------------------------------
# synthesis bookkeeping

def ul_residual_terms(mode, config, pathloss):
    dep, dup = split_mode(mode)
    Drc = float(np.sum(pathloss.D_rc ** 2))
    if dep == "separated":
        terms = [ResidualTerm("H_R" if dup == "FD" else "H_R2C",
                              config.P_r / config.M_r ** 2 * Drc, "x")]
        if dup == "FD":
            terms.append(ResidualTerm("H_SI", config.beta_ap ** 2, "s_dl"))
        return terms
    terms = [ResidualTerm("H_R2C", Drc, "comp")]
    if dup == "FD":
        terms.append(ResidualTerm("H_SI", config.beta_ap ** 2 * config.M, "comp"))
    return terms


def radar_residual_terms(mode, config, pathloss):
    """Radar residual terms; gains are arrays over bins. SH-HD's first term is gated by q."""
    dep, dup = split_mode(mode)
    T = pathloss.d_r.shape[0]
    ones = np.ones(T)
    terms = [ResidualTerm("G_r_ul", ones * np.sum(pathloss.D_ru_ul ** 2) / config.K_U, "u_tx")]
    if dep == "separated":
        if dup == "FD":
            terms.append(ResidualTerm("G_r", ones * np.sum(pathloss.D_rc ** 2) / config.M_c, "s_dl"))
            terms.append(ResidualTerm("H_R2I", ones * config.beta_r ** 2 * config.P_r / config.M_r, "x"))
    elif dup == "HD":
        terms.append(ResidualTerm("G_err2", np.sum(pathloss.d_r ** 2, axis=1) ** 2 / config.M, "s_dl"))
    else:
        terms.append(ResidualTerm("G_r", pathloss.clutter_eta_sum ** 2 / config.M, "comp"))
        terms.append(ResidualTerm("H_SI", ones * config.beta_r ** 2, "comp"))
    return terms


def drive_size(drive, config):
    return {"x": config.M_star, "s_dl": config.M_comm, "u_tx": config.K_U,
            "comp": config.M}[drive]


def _errors(shape, eps, gen):
    if eps <= 0:
        return np.zeros(shape, complex)
    return sample_complex_gaussian(shape[:-1], shape[-1], eps, gen)


def _fading_shapes(mode, config):
    dep, dup = split_mode(mode)
    Mcm, Ms, KD, KU = config.M_comm, config.M_star, config.K_D, config.K_U
    shapes = {"H": (Mcm, KD), "H_ul": (KU, Mcm), "F": (Ms, KD), "G_r_ul": (KU, Ms)}
    if dep == "separated":
        if dup == "HD":
            shapes["H_R2C"] = (Mcm, Ms)
        else:
            shapes.update(H_SI=(Mcm, Mcm), H_R=(Mcm, Ms), H_u=(KD, KU),
                          G_r=(Mcm, Ms), H_R2I=(Ms, Ms))
    else:
        shapes["H_R2C"] = (Ms, Ms)
        if dup == "FD":
            shapes.update(H_SI=(Ms, Ms), G_r=(Ms, Ms), H_u=(KD, KU))
    return shapes


_VARS = {"F": "f_var", "H_u": "u_var"}


def draw_channels(config, pathloss, rng, radar=True):
    """One Monte-Carlo draw of every fading matrix the configured mode uses
    plus the per-snapshot estimation-error stacks of its residual terms.

    radar=False skips the radar error stacks, which dominate the cost when
    only the communication chain is simulated.
    """
    gen = as_generator(rng)
    mode = config.mode
    fading = {}
    for name, (r, c) in _fading_shapes(mode, config).items():
        var = getattr(config, _VARS.get(name, "h_var"))
        fading[name] = (sample_complex_gaussian(r, c, var, gen) if var > 0
                        else np.zeros((r, c), complex))
    L = config.L
    ul_terms = ul_residual_terms(mode, config, pathloss)
    ul_err = [_errors((L, config.M_comm, drive_size(t.drive, config)), config.eps_ul, gen)
              for t in ul_terms]
    radar_terms = radar_residual_terms(mode, config, pathloss)
    T = pathloss.d_r.shape[0]
    radar_err = ([_errors((T, L, config.M_star, drive_size(t.drive, config)), config.eps_radar, gen)
                  for t in radar_terms] if radar else [])
    return ChannelRealization(mode, fading, ul_terms, ul_err, radar_terms, radar_err)


def synthesize_residual(terms, errs, drives, gains=None):
    """Sum of sqrt(gain) * E_l @ v_l over terms; returns (L, M_rx)."""
    out = 0.0
    for i, (term, E) in enumerate(zip(terms, errs)):
        g = term.gain if gains is None else gains[i]
        if g == 0:
            continue
        out = out + np.sqrt(g) * np.einsum("lmn,ln->lm", E, drives[term.drive])
    return out
