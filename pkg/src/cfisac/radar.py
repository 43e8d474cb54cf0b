"""Radar waveform, per-bin echo synthesis and GLRT detection."""
import math
from dataclasses import dataclass

import numpy as np

from .channel import synthesize_residual
from .numerics import DomainError, as_generator, marcum_q1, sample_complex_gaussian


def make_orthonormal_waveforms(T, L):
    """First T rows of the unitary L-point DFT; rows are orthonormal."""
    if T > L:
        raise ValueError("need T <= L for orthonormal waveforms (T=%d, L=%d)" % (T, L))
    t = np.arange(T)[:, None]
    l = np.arange(L)[None, :]
    return np.exp(-2j * np.pi * ((t * l) % L) / L) / np.sqrt(L)


def make_radar_precoder(M_star, T, L, rng=None, method="rotation"):
    """Per-snapshot precoders, shape (L, M*, T), with (1/L) sum W W^H = I.

    rotation: W_l = sqrt(M*/T) D_l F_T where F_T holds the first T columns of
    the unitary M*-point DFT and D_l = diag(exp(j 2 pi n l / L)). The
    rotation averages out the cross terms, so the identity is exact when
    M* <= L. random: i.i.d. CN(0, 1/T) entries, identity only on average.
    """
    if method == "rotation" and M_star <= L:
        n = np.arange(M_star)[:, None]
        F = np.exp(2j * np.pi * ((n * np.arange(T)[None, :]) % M_star) / M_star) / np.sqrt(M_star)
        ls = np.arange(L)
        D = np.exp(2j * np.pi * ((ls[:, None] * np.arange(M_star)[None, :]) % L) / L)
        return np.sqrt(M_star / T) * D[:, :, None] * F[None, :, :]
    if rng is None:
        raise ValueError("random precoder needs an rng")
    return sample_complex_gaussian((L, M_star), T, 1.0 / T, rng)


@dataclass(frozen=True)
class RadarWaveform:
    Phi: np.ndarray      # T x L
    W: np.ndarray        # L x M* x T
    P_alloc: np.ndarray  # per-beam power
    x: np.ndarray        # L x M*, unit-power waveform per snapshot
    R_x: np.ndarray
    R_t: np.ndarray      # T x M* x M*
    R_w: np.ndarray

    @property
    def tr_Rx(self):
        return float(np.real(np.trace(self.R_x)))

    def tr_Rt(self, t):
        return float(np.real(np.trace(self.R_t[t])))


def make_waveform(M_star, T, L, P_r, rng=None, method="rotation"):
    Phi = make_orthonormal_waveforms(T, L)
    W = make_radar_precoder(M_star, T, L, rng, method)
    x = np.sqrt(L) * np.einsum("lmt,tl->lm", W, Phi)
    R_x = x.T @ x.conj() / L
    R_t = np.einsum("lmt,lnt->tmn", W, W.conj()) / L
    R_w = np.einsum("lmt,lnt->mn", W, W.conj()) / L
    return RadarWaveform(Phi, W, np.full(T, float(P_r)), x, R_x, R_t, R_w)


def transmit_power(waveform):
    """Total radar power sum_t (P_t / M*) tr(R_t)."""
    M_star = waveform.W.shape[1]
    return float(sum(waveform.P_alloc[t] / M_star * waveform.tr_Rt(t)
                     for t in range(waveform.W.shape[2])))


@dataclass(frozen=True)
class DetectionOutcome:
    xi: float
    tau: float
    decided: bool
    lambda_analytic: float
    pd_analytic: float


def draw_alpha(config, rng):
    gen = as_generator(rng)
    mag = config.alpha_magnitude
    if config.alpha_model == "fixed":
        return complex(mag)
    if config.alpha_model == "rayleigh":
        return complex(sample_complex_gaussian(1, 1, mag ** 2, gen)[0, 0])
    return mag * np.exp(2j * np.pi * gen.uniform())


def echo_term(t, pathloss, waveform, alpha):
    """Noise-free target return per snapshot, (L, M*): sqrt(P_t/M*) alpha g g^H w_{t,l}."""
    g = pathloss.g[t]
    M_star = g.size
    w = waveform.W[:, :, t]
    return (np.sqrt(waveform.P_alloc[t] / M_star) * alpha
            * np.outer(w @ g.conj(), g))


def synthesize_radar_snapshots(mode, q, t, channels, pathloss, waveform, config,
                               comm_signals, rng, alpha=1.0):
    """M* x L observation for bin t under hypothesis q.

    comm_signals maps drive names (x, s_dl, u_tx, comp) to (L, N) arrays.
    Residual columns come from the explicit error stacks in `channels`.
    """
    gen = as_generator(rng)
    if channels.mode != mode:
        raise ValueError("channel realization is for %s, not %s" % (channels.mode, mode))
    terms = channels.radar_terms
    gains = [tm.gain[t] * (q if (mode == "SH-HD" and tm.drive == "s_dl") else 1)
             for tm in terms]
    missing = {tm.drive for tm, gn in zip(terms, gains) if gn} - set(comm_signals)
    if missing:
        raise ValueError("missing signals for %s radar: %s" % (mode, sorted(missing)))
    errs = [E[t] for E in channels.radar_err]
    resid = synthesize_residual(terms, errs, comm_signals, gains)
    L = waveform.W.shape[0]
    M_star = pathloss.g.shape[1]
    Y = sample_complex_gaussian(L, M_star, config.noise, gen) + resid
    if q:
        Y = Y + echo_term(t, pathloss, waveform, alpha)
    return Y.T


def matched_filter(observation, waveform, t):
    """z = (1/L) sum_l w_{t,l}^H y_l; observation is (..., M*, L)."""
    w = waveform.W[:, :, t]
    L = w.shape[0]
    return np.einsum("lm,...ml->...", w.conj(), observation) / L


def glrt_statistic(observation, waveform, t, residual_total_variance):
    """xi = 2|z|^2 / Var(z), chi-square(2) under H0."""
    if not residual_total_variance > 0:
        raise DomainError("residual variance must be positive")
    L = waveform.W.shape[0]
    z = matched_filter(observation, waveform, t)
    var_z = residual_total_variance * waveform.tr_Rt(t) / L
    return 2 * np.abs(z) ** 2 / var_z


def alpha_estimate(observation, pathloss, waveform, t):
    """Least-squares estimate of the reflection coefficient from all snapshots."""
    d = echo_term(t, pathloss, waveform, 1.0).T
    return np.vdot(d.ravel(), observation.ravel()) / np.vdot(d.ravel(), d.ravel())


def detection_threshold(pfa):
    if not 0 < pfa < 1:
        raise DomainError("pfa must be in (0, 1), got %r" % (pfa,))
    return -2.0 * math.log(pfa)


def beamforming_gain(t, pathloss, waveform):
    g = pathloss.g[t]
    return complex(g.conj() @ waveform.R_t[t] @ g)


def noncentrality(t, config, pathloss, waveform, alpha_t, residual_total_variance):
    """lambda_t = L |alpha|^2 P_t |g^H R_t g|^2 / ((var/2) M* tr(R_t))."""
    L = waveform.W.shape[0]
    M_star = pathloss.g.shape[1]
    num = L * abs(alpha_t) ** 2 * waveform.P_alloc[t] * abs(beamforming_gain(t, pathloss, waveform)) ** 2
    return float(num / (residual_total_variance / 2 * M_star * waveform.tr_Rt(t)))


def detection_probability_analytic(lam, tau):
    if lam < 0 or tau < 0:
        raise DomainError("need lambda >= 0 and tau >= 0")
    return marcum_q1(math.sqrt(lam), math.sqrt(tau))


def detect(observation, waveform, t, residual_total_variance, pfa, lam):
    xi = float(glrt_statistic(observation, waveform, t, residual_total_variance))
    tau = detection_threshold(pfa)
    return DetectionOutcome(xi, tau, xi > tau, lam, detection_probability_analytic(lam, tau))
