"""Experiment configuration, node geometry and large-scale quantities."""
from dataclasses import dataclass, fields, replace

import numpy as np

from .numerics import CapacityError, as_generator, poisson_disk_sample

MODES = ("SE-HD", "SE-FD", "SH-HD", "SH-FD")
D_MIN = 1.0


class ConfigError(ValueError):
    pass


def split_mode(mode):
    if mode not in MODES:
        raise ConfigError("unknown mode %r, expected one of %s" % (mode, ", ".join(MODES)))
    dep, dup = mode.split("-")
    return ("separated" if dep == "SE" else "shared"), dup


@dataclass(frozen=True)
class ScenarioConfig:
    deployment: str = "separated"
    duplex: str = "HD"
    M: int = 40
    M_c: int = 20
    M_r: int = 20
    K_D: int = 2
    K_U: int = 2
    T: int = 3
    L: int = 100
    P_c: float = 0.8
    P_r: float = 0.1
    P_u: float = 0.1
    beta_ap: float = 1e-4
    beta_r: float = 1e-4
    sigma_ic_sq: float = 1e-6
    sigma_ic_sq_ul: float = None
    sigma_ic_sq_radar: float = None
    eta: float = 3.0
    lambda0_m: float = 0.0857
    area_m: float = 800.0
    min_sep_m: float = 100.0
    ue_guard_m: float = 10.0
    pfa: float = 1e-4
    pr_over_n0_db: float = 10.0
    noise_total_variance: float = None
    constellation_hd: str = "QPSK"
    constellation_fd: str = "BPSK"
    n_mc: int = 1000
    master_seed: int = 2024
    h_var: float = 1.0
    f_var: float = 1.0
    u_var: float = 1.0
    two_way_convention: str = "double_distance"
    alpha_model: str = "unit"
    alpha_magnitude: float = 1.0
    ul_inverse_mode: str = "mean"

    @property
    def mode(self):
        return ("SE" if self.deployment == "separated" else "SH") + "-" + self.duplex

    @property
    def shared(self):
        return self.deployment == "shared"

    @property
    def fd(self):
        return self.duplex == "FD"

    @property
    def M_star(self):
        """Number of radar-active APs."""
        return self.M if self.shared else self.M_r

    @property
    def M_comm(self):
        """Number of APs serving communication."""
        return self.M if self.shared else self.M_c

    @property
    def noise(self):
        if self.noise_total_variance is not None:
            return float(self.noise_total_variance)
        return self.P_r / 10 ** (self.pr_over_n0_db / 10)

    @property
    def eps_ul(self):
        return self.sigma_ic_sq if self.sigma_ic_sq_ul is None else self.sigma_ic_sq_ul

    @property
    def eps_radar(self):
        return self.sigma_ic_sq if self.sigma_ic_sq_radar is None else self.sigma_ic_sq_radar

    @property
    def constellation_name(self):
        return self.constellation_fd if self.fd else self.constellation_hd

    def with_mode(self, mode):
        dep, dup = split_mode(mode)
        return replace(self, deployment=dep, duplex=dup)

    def replace(self, **kw):
        return replace(self, **kw)

    def validate(self):
        """Raise ConfigError listing every violated invariant."""
        errs = []
        if self.deployment not in ("separated", "shared"):
            errs.append("deployment must be separated or shared")
        if self.duplex not in ("HD", "FD"):
            errs.append("duplex must be HD or FD")
        for name in ("M", "K_D", "K_U", "T", "L", "n_mc"):
            if getattr(self, name) < 1:
                errs.append("%s must be >= 1" % name)
        if self.shared:
            if not self.M > self.K_U + 1:
                errs.append("shared needs M > K_U + 1")
            if not self.M > self.K_D:
                errs.append("shared needs M > K_D")
        else:
            if self.M_c < 1 or self.M_r < 1:
                errs.append("separated needs M_c >= 1 and M_r >= 1")
            if self.M_c + self.M_r != self.M:
                errs.append("separated needs M_c + M_r == M (%d + %d != %d)"
                            % (self.M_c, self.M_r, self.M))
            if not self.M_c > self.K_U + 1:
                errs.append("separated needs M_c > K_U + 1")
            if not self.M_c >= self.K_D:
                errs.append("separated needs M_c >= K_D")
        if self.T > min(self.M_star, self.L):
            errs.append("need T <= min(M*, L) = %d" % min(self.M_star, self.L))
        if abs(self.P_c + self.P_r + self.P_u - 1.0) > 1e-9:
            errs.append("P_c + P_r + P_u must equal 1 (got %.12g)" % (self.P_c + self.P_r + self.P_u))
        if min(self.P_c, self.P_r, self.P_u) < 0:
            errs.append("powers must be nonnegative")
        for name in ("beta_ap", "beta_r"):
            if not 0 <= getattr(self, name) < 1:
                errs.append("%s must lie in [0, 1)" % name)
        for name in ("sigma_ic_sq", "sigma_ic_sq_ul", "sigma_ic_sq_radar"):
            v = getattr(self, name)
            if v is not None and v < 0:
                errs.append("%s must be >= 0" % name)
        if self.eta <= 0 or self.lambda0_m <= 0 or self.area_m <= 0:
            errs.append("eta, lambda0_m and area_m must be positive")
        if not 0 < self.pfa < 1:
            errs.append("pfa must lie in (0, 1)")
        if self.noise_total_variance is None and self.pr_over_n0_db is None:
            errs.append("set noise_total_variance or pr_over_n0_db")
        elif not self.noise > 0:
            errs.append("noise variance must be positive")
        for name in ("h_var", "f_var", "u_var"):
            if getattr(self, name) < 0:
                errs.append("%s must be >= 0" % name)
        if self.two_way_convention not in ("double_distance", "product_legs"):
            errs.append("two_way_convention must be double_distance or product_legs")
        if self.alpha_model not in ("unit", "fixed", "rayleigh"):
            errs.append("alpha_model must be unit, fixed or rayleigh")
        if self.ul_inverse_mode not in ("mean", "per_draw"):
            errs.append("ul_inverse_mode must be mean or per_draw")
        if errs:
            raise ConfigError("; ".join(errs))
        return self


_FIELD_TYPES = {f.name: f for f in fields(ScenarioConfig)}


def _coerce(name, text):
    default = _FIELD_TYPES[name].default
    if text.lower() in ("none", ""):
        return None
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(float(text)) if "e" in text.lower() else int(text)
    if isinstance(default, float) or default is None:
        return float(text)
    return text


def parse_config_text(text, extra_keys=()):
    """Parse flat `key = value` lines; returns (ScenarioConfig, extras dict)."""
    values = {}
    extras = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line %d: expected key = value, got %r" % (lineno, raw))
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "mode":
            dep, dup = split_mode(val)
            values["deployment"], values["duplex"] = dep, dup
        elif key in _FIELD_TYPES:
            try:
                values[key] = _coerce(key, val)
            except ValueError:
                raise ConfigError("line %d: bad value %r for %s" % (lineno, val, key))
        elif key in extra_keys:
            extras[key] = val
        else:
            raise ConfigError("line %d: unknown key %r" % (lineno, key))
    return ScenarioConfig(**values), extras


def load_config(path, extra_keys=()):
    with open(path) as fh:
        return parse_config_text(fh.read(), extra_keys)


def config_to_text(config):
    out = []
    for f in fields(config):
        v = getattr(config, f.name)
        out.append("%s = %s" % (f.name, "none" if v is None else repr(v) if isinstance(v, float) else v))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# geometry

@dataclass(frozen=True)
class Geometry:
    ap_xy: np.ndarray
    dl_ue_xy: np.ndarray
    ul_ue_xy: np.ndarray
    target_xy: np.ndarray


def _guarded_uniform(gen, n, side, ap_xy, guard, budget=10000):
    pts = np.empty((n, 2))
    tries = 0
    for i in range(n):
        while True:
            p = gen.uniform(0.0, side, 2)
            if guard <= 0 or np.min(np.hypot(*(ap_xy - p).T)) >= guard:
                pts[i] = p
                break
            tries += 1
            if tries > budget:
                raise CapacityError("could not place point %.6g m away from every AP in a "
                                    "%.6g m square after %d tries" % (guard, side, budget))
    return pts


def build_geometry(config, rng):
    """APs by Poisson-disk sampling (then shuffled), UEs and targets uniform outside a guard radius."""
    gen = as_generator(rng)
    ap = poisson_disk_sample(config.area_m, config.area_m, config.min_sep_m, config.M, gen)
    ap = ap[gen.permutation(config.M)]
    dl = _guarded_uniform(gen, config.K_D, config.area_m, ap, config.ue_guard_m)
    ul = _guarded_uniform(gen, config.K_U, config.area_m, ap, config.ue_guard_m)
    tg = _guarded_uniform(gen, config.T, config.area_m, ap, config.ue_guard_m)
    return Geometry(ap, dl, ul, tg)


def ring_geometry(config, radius_m=300.0, ue_offset_m=2.0, rng=None):
    """Homogeneous fixture: APs evenly on a circle, UEs clustered at its centre.

    Every UE-to-AP distance is nearly equal, so averaged-pathloss
    approximations become exact. Targets sit at the centre as well.
    """
    c = config.area_m / 2
    ang = 2 * np.pi * np.arange(config.M) / config.M
    ap = np.column_stack([c + radius_m * np.cos(ang), c + radius_m * np.sin(ang)])
    if rng is not None:
        ap = ap[as_generator(rng).permutation(config.M)]

    def cluster(n, phase):
        a = phase + 2 * np.pi * np.arange(n) / max(n, 1)
        return np.column_stack([c + ue_offset_m * np.cos(a), c + ue_offset_m * np.sin(a)])

    return Geometry(ap, cluster(config.K_D, 0.3), cluster(config.K_U, 1.1),
                    cluster(config.T, 2.0))


def distances(from_xy, to_xy):
    a = np.asarray(from_xy, float).reshape(-1, 2)
    b = np.asarray(to_xy, float).reshape(-1, 2)
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


def pathloss_matrix(from_xy, to_xy, eta):
    """Entry (i, j) = max(d_ij, 1 m)^(-eta/2)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return np.maximum(distances(from_xy, to_xy), D_MIN) ** (-eta / 2)


def radar_two_way_pathloss(ap_xy, target, eta, convention="double_distance"):
    """Two-way amplitude gain per AP for one target bin.

    double_distance: (2 max(d,1))^(-eta/2), the round trip treated as one path.
    product_legs: max(d,1)^(-eta), the product of the two one-way legs.
    """
    d = np.maximum(distances(ap_xy, target)[:, 0], D_MIN)
    if convention == "double_distance":
        return (2 * d) ** (-eta / 2)
    if convention == "product_legs":
        return d ** (-eta)
    raise ValueError("unknown two-way convention %r" % (convention,))


def steering_vector(ap_xy, target, lambda0_m):
    if lambda0_m <= 0:
        raise ValueError("lambda0_m must be positive")
    d = distances(ap_xy, target)[:, 0]
    return np.exp(-2j * np.pi * ((2 * d / lambda0_m) % 1.0))


@dataclass(frozen=True)
class PathlossSet:
    D_c: np.ndarray        # DL UE x comm AP
    D_c_ul: np.ndarray     # UL UE x comm AP
    D_ru: np.ndarray       # DL UE x radar AP
    D_ru_ul: np.ndarray    # UL UE x radar AP
    D_rc: np.ndarray       # comm AP x radar AP (AP x AP when shared)
    D_u: np.ndarray        # DL UE x UL UE
    d_r: np.ndarray        # T x M*, two-way gain per bin
    a: np.ndarray          # T x M*, steering per bin
    g: np.ndarray          # T x M*, d_r * a
    clutter_eta_sum: np.ndarray  # T, sum over radar APs of max(d,1)^-eta to the bin

    def mean_gain_dl(self):
        """Per DL UE, (mean over serving APs of d^(-eta/2))^2."""
        return self.D_c.mean(axis=1) ** 2

    def mean_gain_ul(self):
        return self.D_c_ul.mean(axis=1) ** 2


def build_pathloss(config, geometry):
    eta = config.eta
    ap = geometry.ap_xy
    if config.shared:
        radar_ap = comm_ap = ap
    else:
        radar_ap, comm_ap = ap[:config.M_r], ap[config.M_r:]
    D_c = pathloss_matrix(geometry.dl_ue_xy, comm_ap, eta)
    D_c_ul = pathloss_matrix(geometry.ul_ue_xy, comm_ap, eta)
    if config.shared:
        D_ru, D_ru_ul = D_c, D_c_ul
    else:
        D_ru = pathloss_matrix(geometry.dl_ue_xy, radar_ap, eta)
        D_ru_ul = pathloss_matrix(geometry.ul_ue_xy, radar_ap, eta)
    D_rc = pathloss_matrix(comm_ap, radar_ap, eta)
    D_u = pathloss_matrix(geometry.dl_ue_xy, geometry.ul_ue_xy, eta)
    T = geometry.target_xy.shape[0]
    d_r = np.empty((T, radar_ap.shape[0]))
    a = np.empty((T, radar_ap.shape[0]), complex)
    for t in range(T):
        d_r[t] = radar_two_way_pathloss(radar_ap, geometry.target_xy[t], eta,
                                        config.two_way_convention)
        a[t] = steering_vector(radar_ap, geometry.target_xy[t], config.lambda0_m)
    one_way = np.maximum(distances(radar_ap, geometry.target_xy), D_MIN) ** (-eta)
    return PathlossSet(D_c, D_c_ul, D_ru, D_ru_ul, D_rc, D_u, d_r, a, d_r * a,
                       one_way.sum(axis=0))
