"""Communication chain: ZF precoding and combining, DL/UL synthesis, detection and SER."""
import math
from dataclasses import dataclass

import numpy as np

from .channel import synthesize_residual
from .numerics import as_generator, sample_complex_gaussian
from .scenario import split_mode

COND_LIMIT = 1e12


class SingularChannelError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Constellation:
    name: str
    M_d: int
    phases: tuple

    @property
    def points(self):
        p = np.exp(1j * np.asarray(self.phases, float))
        # snap round-off so ties between neighbours are exact
        re = np.where(np.abs(p.real) < 1e-15, 0.0, p.real)
        im = np.where(np.abs(p.imag) < 1e-15, 0.0, p.imag)
        return re + 1j * im


def make_constellation(name):
    """BPSK, QPSK, or PSK<n> (unit-energy, first point at phase 0)."""
    key = name.upper()
    if key == "BPSK":
        n = 2
    elif key == "QPSK":
        n = 4
    elif key.startswith("PSK") and key[3:].isdigit():
        n = int(key[3:])
    else:
        raise ValueError("unknown constellation %r" % (name,))
    return Constellation(key, n, tuple(2 * math.pi * i / n for i in range(n)))


def constellation_for(config):
    return make_constellation(config.constellation_name)


def detect_symbols(y, constellation):
    """Index of the nearest constellation point; ties go to the lower index."""
    y = np.asarray(y)
    d = np.abs(y[..., None] - constellation.points) ** 2
    return np.argmin(d, axis=-1)


def measure_ser(tx_indices, rx_indices):
    tx = np.asarray(tx_indices)
    rx = np.asarray(rx_indices)
    if tx.shape != rx.shape:
        raise ValueError("length mismatch: %s vs %s" % (tx.shape, rx.shape))
    if tx.size == 0:
        return 0.0
    return float(np.count_nonzero(tx != rx)) / tx.size


# ---------------------------------------------------------------------------
# zero forcing

@dataclass(frozen=True)
class PrecoderState:
    W_tilde: np.ndarray
    alpha_zf: np.ndarray
    alpha_zf_sq_mean: float


def _check_conditioning(A):
    c = np.linalg.cond(A)
    if not np.isfinite(c) or c > COND_LIMIT:
        raise SingularChannelError("channel is rank deficient (condition number %.3g)" % c)


def zf_pinv_right(H):
    """W_tilde = H^H (H H^H)^-1 for a K x M channel."""
    Hh = H.conj().T
    gram = H @ Hh
    _check_conditioning(gram)
    return Hh @ np.linalg.inv(gram)


def zf_precoder(H, s):
    """Normalised ZF precoding of s (shape (K,) or (L, K)) through the K x M channel H.

    Returns (precoded, alpha) with precoded = alpha * W_tilde s and unit norm per snapshot.
    """
    Wt = zf_pinv_right(H)
    v = np.asarray(s) @ Wt.T
    alpha = 1.0 / np.linalg.norm(v, axis=-1)
    return v * alpha[..., None] if v.ndim > 1 else v * alpha, alpha


def zf_alpha_sq_mean(M_eff, K_D, chan_var=1.0, symbol_energy=None):
    """E[alpha^2] for i.i.d. CN(0, chan_var) channels and |s|^2 = symbol_energy (default K_D)."""
    if symbol_energy is None:
        symbol_energy = K_D
    return chan_var * (M_eff - K_D + 1) / symbol_energy


def zf_combiner(H_ul):
    """G = (H^H H)^-1 H^H for an M x K channel."""
    Hh = H_ul.conj().T
    gram = Hh @ H_ul
    _check_conditioning(gram)
    return np.linalg.inv(gram) @ Hh


# ---------------------------------------------------------------------------
# per-mode signal models

def dl_channel(mode, channels, pathloss):
    """Composite DL channel seen by the UEs, K_D x M_comm."""
    dep, _ = split_mode(mode)
    H = channels.H if dep == "separated" else channels.H + channels.F
    return pathloss.D_c * H.T


def ul_channel(channels, pathloss):
    """Composite UL channel at the APs, M_comm x K_U."""
    return (pathloss.D_c_ul * channels.H_ul).T


def precode_dl(C, symbols, config):
    """W P s with W = alpha W_tilde and P = diag(sqrt(P_c/K_D)); returns ((L, M), PrecoderState)."""
    Wt = zf_pinv_right(C)
    v = symbols @ Wt.T
    alpha = 1.0 / np.linalg.norm(v, axis=-1)
    amp = math.sqrt(config.P_c / config.K_D)
    chan_var = config.h_var + (config.f_var if config.shared else 0.0)
    state = PrecoderState(Wt, alpha, zf_alpha_sq_mean(config.M_comm, config.K_D, chan_var))
    return alpha[:, None] * amp * v, state


def drive_signals(config, waveform, s_dl, u_tx):
    drives = {"x": waveform.x, "s_dl": s_dl, "u_tx": u_tx}
    if config.shared:
        drives["comp"] = s_dl + math.sqrt(config.P_r / config.M) * waveform.x
    return drives


def synthesize_dl(mode, channels, pathloss, config, symbols, radar_waveform, ul_symbols, rng,
                  dl_precoded=None):
    """Received (L, K_D) DL samples: desired + radar/clutter + UE-to-UE (FD) + noise."""
    gen = as_generator(rng)
    dep, dup = split_mode(mode)
    C = dl_channel(mode, channels, pathloss)
    if dl_precoded is None:
        dl_precoded, _ = precode_dl(C, symbols, config)
    y = dl_precoded @ C.T
    x = radar_waveform.x
    if dep == "separated":
        y = y + math.sqrt(config.P_r / config.M_r) * x @ (pathloss.D_ru * channels.F.T).T
    else:
        y = y + math.sqrt(config.P_r) / config.M * x @ C.T
    if dup == "FD":
        if ul_symbols is None:
            raise ValueError("%s DL needs the UL symbols for UE-to-UE interference" % mode)
        u_tx = math.sqrt(config.P_u / config.K_U) * ul_symbols
        y = y + u_tx @ (pathloss.D_u * channels.H_u).T
    if config.noise > 0:
        y = y + sample_complex_gaussian(y.shape[0], y.shape[1], config.noise, gen)
    return y


def synthesize_ul_post_ic(mode, channels, pathloss, config, ul_symbols, dl_precoded,
                          radar_waveform, rng):
    """Received (L, M_comm) UL samples after interference cancellation."""
    gen = as_generator(rng)
    if channels.mode != mode:
        raise ValueError("channel realization is for %s, not %s" % (channels.mode, mode))
    u_tx = math.sqrt(config.P_u / config.K_U) * ul_symbols
    y = u_tx @ ul_channel(channels, pathloss).T
    drives = drive_signals(config, radar_waveform, dl_precoded, u_tx)
    y = y + synthesize_residual(channels.ul_terms, channels.ul_err, drives)
    if config.noise > 0:
        y = y + sample_complex_gaussian(y.shape[0], y.shape[1], config.noise, gen)
    return y


def draw_symbols(L, K, constellation, rng):
    gen = as_generator(rng)
    idx = gen.integers(0, constellation.M_d, size=(L, K))
    return idx, constellation.points[idx]


# ---------------------------------------------------------------------------
# symbol-cloud moments for empirical KLD

class PooledCloud:
    """Per (user, symbol) moments pooled over every draw.

    Suited to the UL, where the post-combining mean sqrt(P_u) s_n does not
    depend on the draw.
    """

    def __init__(self, K, M_d):
        self.n = np.zeros((K, M_d))
        self.s1 = np.zeros((K, M_d, 2))
        self.s2 = np.zeros((K, M_d, 2, 2))

    def add(self, values, indices):
        v = np.stack([values.real, values.imag], axis=-1)
        for k in range(values.shape[1]):
            for m in range(self.n.shape[1]):
                sel = v[indices[:, k] == m, k]
                self.n[k, m] += sel.shape[0]
                self.s1[k, m] += sel.sum(axis=0)
                self.s2[k, m] += sel.T @ sel

    def moments(self, k, m):
        n = self.n[k, m]
        mu = self.s1[k, m] / n
        cov = (self.s2[k, m] - n * np.outer(mu, mu)) / (n - 1)
        return mu, cov


class PerDrawCloud:
    """Mean-difference second moments collected draw by draw.

    In the DL the cloud centre alpha_ZF sqrt(P_c) s_n changes with every
    channel draw, so pooling would smear it. Each draw contributes the outer
    product of its symbol-mean differences, less the finite-sample bias, and
    its within-draw covariance.
    """

    def __init__(self, K, M_d):
        self.K = K
        self.M_d = M_d
        self.draws = 0
        self.dd = np.zeros((K, M_d, M_d, 2, 2))
        self.within = np.zeros((K, 2, 2))

    def add(self, values, indices):
        v = np.stack([values.real, values.imag], axis=-1)
        self.draws += 1
        for k in range(self.K):
            mus, counts, scatter, dof = [], [], np.zeros((2, 2)), 0
            for m in range(self.M_d):
                sel = v[indices[:, k] == m, k]
                mu = sel.mean(axis=0) if sel.shape[0] else np.zeros(2)
                c = sel - mu
                scatter += c.T @ c
                dof += max(sel.shape[0] - 1, 0)
                mus.append(mu)
                counts.append(sel.shape[0])
            S = scatter / max(dof, 1)
            self.within[k] += S
            for a in range(self.M_d):
                for b in range(self.M_d):
                    if a == b or not counts[a] or not counts[b]:
                        continue
                    d = mus[a] - mus[b]
                    self.dd[k, a, b] += np.outer(d, d) - S * (1.0 / counts[a] + 1.0 / counts[b])

    def pair_second_moment(self, k, a, b):
        return self.dd[k, a, b] / self.draws

    def within_cov(self, k):
        return self.within[k] / self.draws
