"""Closed-form KLD evaluators, all in bits.

Interfaces carry total complex variances; each evaluator halves them to the
per-real-dimension variance the Gaussian KLD needs.
"""
import math
from dataclasses import dataclass

import numpy as np

from .numerics import DomainError
from .comm import constellation_for
from .radar import beamforming_gain
from .scenario import split_mode

LN2 = math.log(2.0)


@dataclass
class KldReport:
    mode: str
    kld_dl: np.ndarray
    kld_ul: np.ndarray
    kld_radar: np.ndarray
    kld_comm_total: float


def _chol(S, name):
    S = np.asarray(S, float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or not np.allclose(S, S.T, rtol=1e-10, atol=1e-14):
        raise DomainError("%s must be a symmetric square matrix" % name)
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise DomainError("%s is not positive definite" % name)


def kld_gaussian(mu_m, mu_n, sigma_m, sigma_n):
    """KL(N(mu_m, sigma_m) || N(mu_n, sigma_n)) in bits."""
    mu_m = np.atleast_1d(np.asarray(mu_m, float))
    mu_n = np.atleast_1d(np.asarray(mu_n, float))
    dim = mu_m.size
    if mu_n.size != dim or np.shape(sigma_m) != (dim, dim) or np.shape(sigma_n) != (dim, dim):
        raise DomainError("dimension mismatch")
    Lm = _chol(sigma_m, "sigma_m")
    Ln = _chol(sigma_n, "sigma_n")
    Ln_inv = np.linalg.inv(Ln)
    A = Ln_inv @ Lm
    d = Ln_inv @ (mu_n - mu_m)
    logdet = 2 * (np.sum(np.log(np.diag(Ln))) - np.sum(np.log(np.diag(Lm))))
    return float((np.sum(A * A) - dim + d @ d + logdet) / (2 * LN2))


def constellation_lambda(phases):
    """sum over ordered pairs n != m of 1 - cos(phi_n - phi_m)."""
    p = np.asarray(phases, float)
    diff = p[:, None] - p[None, :]
    return float(np.sum(1 - np.cos(diff)))


def _check_mode(mode, config):
    split_mode(mode)
    if mode != config.mode:
        raise ValueError("mode %s does not match the configuration (%s)" % (mode, config.mode))


def _shape_factor(constellation):
    M_d = constellation.M_d
    if M_d < 2:
        return 0.0
    return constellation_lambda(constellation.phases) / (M_d * (M_d - 1))


def mean_alpha_sq(mode, config):
    """Average ZF normalisation E[alpha^2] for unit-energy PSK on every stream."""
    dep, _ = split_mode(mode)
    chan_var = config.h_var + (config.f_var if dep == "shared" else 0.0)
    return chan_var * (config.M_comm - config.K_D + 1) / config.K_D


def kld_dl(mode, k, config, pathloss, dl_variance_total, constellation=None):
    """Average pairwise DL KLD for UE k."""
    _check_mode(mode, config)
    constellation = constellation or constellation_for(config)
    P_ck = config.P_c / config.K_D
    gain = pathloss.D_c[k].mean() ** 2
    return (_shape_factor(constellation) * P_ck * mean_alpha_sq(mode, config) * gain
            / (dl_variance_total / 2 * LN2))


def kld_ul(mode, k, config, pathloss, ul_residual_total, constellation=None, inverse_diag=None):
    """Average pairwise UL KLD for UE k after ZF combining.

    ul_residual_total is the residual per AP excluding noise. With
    ul_inverse_mode = mean, [(C^H C)^-1]_kk is replaced by its mean
    1 / (gain * h_var * (M - K_U)); per_draw uses inverse_diag[k].
    """
    _check_mode(mode, config)
    M_eff = config.M_comm
    if not M_eff > config.K_U + 1:
        raise ValueError("mean-inverse identity needs M > K_U + 1 (M=%d, K_U=%d)"
                         % (M_eff, config.K_U))
    constellation = constellation or constellation_for(config)
    P_uk = config.P_u / config.K_U
    v = ul_residual_total + config.noise
    if config.ul_inverse_mode == "per_draw":
        if inverse_diag is None:
            raise ValueError("per_draw mode needs the realised inverse diagonal")
        eff = 1.0 / inverse_diag[k]
    else:
        eff = pathloss.D_c_ul[k].mean() ** 2 * config.h_var * (M_eff - config.K_U)
    return _shape_factor(constellation) * P_uk * eff / (v / 2 * LN2)


def kld_radar(mode, t, config, pathloss, waveform, alpha_t, radar_residual_total):
    """|alpha|^2 P_t |g^H R_t g|^2 / (4 (var/2) M* tr(R_t) ln 2)."""
    _check_mode(mode, config)
    M_star = pathloss.g.shape[1]
    bg = abs(beamforming_gain(t, pathloss, waveform)) ** 2
    return (abs(alpha_t) ** 2 * waveform.P_alloc[t] * bg
            / (4 * radar_residual_total / 2 * M_star * waveform.tr_Rt(t) * LN2))


def kld_comm_total(dl_list, ul_list, K_D, K_U):
    if len(dl_list) != K_D or len(ul_list) != K_U:
        raise ValueError("expected %d DL and %d UL values, got %d and %d"
                         % (K_D, K_U, len(dl_list), len(ul_list)))
    K = K_D + K_U
    return K_D / K * float(np.sum(dl_list)) + K_U / K * float(np.sum(ul_list))


def radar_kld_from_noncentrality(lam, L):
    return lam / (4 * L * LN2)


# ---------------------------------------------------------------------------
# empirical counterparts

def empirical_kld_pooled(cloud, k):
    """Average pairwise kld_gaussian over the pooled symbol clouds of user k."""
    M_d = cloud.n.shape[1]
    vals = []
    for a in range(M_d):
        for b in range(M_d):
            if a != b:
                mu_a, S_a = cloud.moments(k, a)
                mu_b, S_b = cloud.moments(k, b)
                vals.append(kld_gaussian(mu_a, mu_b, S_a, S_b))
    return float(np.mean(vals)) if vals else 0.0


def empirical_kld_per_draw(cloud, k):
    """Average pairwise KLD from per-draw mean differences and the within-draw covariance."""
    S_inv = np.linalg.inv(cloud.within_cov(k))
    vals = [np.trace(S_inv @ cloud.pair_second_moment(k, a, b)) / (2 * LN2)
            for a in range(cloud.M_d) for b in range(cloud.M_d) if a != b]
    return float(np.mean(vals)) if vals else 0.0
