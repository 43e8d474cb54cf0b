"""Monte-Carlo trial runner, sweeps, figure presets and output files."""
import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import channel, comm, kld, radar
from .numerics import CapacityError, RngStream
from .scenario import MODES, build_geometry, build_pathloss, split_mode

FAIL_LIMIT = 0.01
SWEEP_VARIABLES = ("pr_over_n0_db", "sigma_ic_sq", "beta", "power_split")


@dataclass
class SweepSpec:
    variable: str = "pr_over_n0_db"
    values: list = field(default_factory=lambda: [0, 5, 10, 15, 20, 25, 30])
    trials_per_point: int = 1000
    modes: list = field(default_factory=lambda: list(MODES))
    curves: list = field(default_factory=lambda: [{}])   # config overrides, one per curve
    labels: list = None
    metrics: list = None

    def validate(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError("sweep variable must be one of %s" % ", ".join(SWEEP_VARIABLES))
        if not len(self.values):
            raise ValueError("sweep needs at least one value")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")
        for m in self.modes:
            split_mode(m)
        return self


@dataclass
class SweepRecord:
    mode: str
    curve: str
    variable: str
    value: float
    ser_dl: float
    ser_ul: float
    pd: float
    pfa: float
    pd_analytic: float
    kld_dl: float
    kld_ul: float
    kld_ul_sum: float
    kld_radar: float
    kld_comm_total: float
    emp_kld_dl: float
    emp_kld_ul: float
    trials: int
    failed: int
    wall_time: float = 0.0


RECORD_FIELDS = [f.name for f in fields(SweepRecord)]


def apply_sweep_value(config, variable, value):
    """Config with the sweep variable set; power_split sets P_c and moves the rest to P_r."""
    if variable == "pr_over_n0_db":
        return config.replace(pr_over_n0_db=float(value), noise_total_variance=None)
    if variable == "sigma_ic_sq":
        return config.replace(sigma_ic_sq=float(value))
    if variable == "beta":
        return config.replace(beta_ap=float(value), beta_r=float(value))
    if variable == "power_split":
        P_c = float(value)
        return config.replace(P_c=P_c, P_r=1.0 - P_c - config.P_u)
    raise ValueError("unknown sweep variable %r" % (variable,))


def apply_overrides(config, overrides):
    kw = dict(overrides)
    if "beta" in kw:
        b = kw.pop("beta")
        kw.update(beta_ap=b, beta_r=b)
    if "power_split" in kw:
        config = apply_sweep_value(config, "power_split", kw.pop("power_split"))
    return config.replace(**kw)


# ---------------------------------------------------------------------------
# one trial

@dataclass
class TrialResult:
    index: int
    ok: bool
    dl_errors: int = 0
    dl_symbols: int = 0
    ul_errors: int = 0
    ul_symbols: int = 0
    detections: int = 0
    false_alarms: int = 0
    bins: int = 0
    pd_analytic: float = 0.0
    kld_dl: np.ndarray = None
    kld_ul: np.ndarray = None
    kld_radar: np.ndarray = None
    kld_comm_total: float = 0.0
    ul_cloud: object = None
    dl_cloud: object = None


_WAVEFORMS = {}


def waveform_for(config):
    # the random fallback (M* > L) draws from a seeded aux stream so every
    # worker builds the same waveform
    key = (config.M_star, config.T, config.L, config.P_r, config.master_seed)
    if key not in _WAVEFORMS:
        _WAVEFORMS[key] = radar.make_waveform(config.M_star, config.T, config.L, config.P_r,
                                              RngStream(config.master_seed, 0, "aux"))
    return _WAVEFORMS[key]


def geometry_for_trial(config, index):
    return build_geometry(config, RngStream(config.master_seed, index, "geometry"))


def run_trial(config, index, geometry=None, chains=("comm", "radar")):
    """Every chain of one Monte-Carlo trial; trial i always uses stream i."""
    mode = config.mode
    rng = RngStream(config.master_seed, index, "trial").generator
    try:
        if geometry is None:
            geometry = geometry_for_trial(config, index)
        pl = build_pathloss(config, geometry)
        wf = waveform_for(config)
        ch = channel.draw_channels(config, pl, rng, radar="radar" in chains)
        const = comm.constellation_for(config)
        L = config.L
        dl_idx, dl_sym = comm.draw_symbols(L, config.K_D, const, rng)
        ul_idx, ul_sym = comm.draw_symbols(L, config.K_U, const, rng)
        C = comm.dl_channel(mode, ch, pl)
        s_dl, pstate = comm.precode_dl(C, dl_sym, config)
        C_ul = comm.ul_channel(ch, pl)
        G = comm.zf_combiner(C_ul)
    except (comm.SingularChannelError, CapacityError):
        return TrialResult(index, False)

    res = TrialResult(index, True)
    sigma_w_sq = (np.mean(np.sum(np.abs(s_dl) ** 2, axis=1)) / (config.M_comm * config.P_c)
                  if config.P_c > 0 else 0.0)
    stats = channel.WaveformStats(wf.tr_Rx, float(sigma_w_sq))

    if "comm" in chains:
        y_dl = comm.synthesize_dl(mode, ch, pl, config, dl_sym, wf, ul_sym, rng, dl_precoded=s_dl)
        res.dl_errors = int(np.count_nonzero(comm.detect_symbols(y_dl, const) != dl_idx))
        res.dl_symbols = dl_idx.size
        y_ul = comm.synthesize_ul_post_ic(mode, ch, pl, config, ul_sym, s_dl, wf, rng)
        r_ul = y_ul @ G.T
        res.ul_errors = int(np.count_nonzero(comm.detect_symbols(r_ul, const) != ul_idx))
        res.ul_symbols = ul_idx.size
        res.ul_cloud = comm.PooledCloud(config.K_U, const.M_d)
        res.ul_cloud.add(r_ul, ul_idx)
        res.dl_cloud = comm.PerDrawCloud(config.K_D, const.M_d)
        res.dl_cloud.add(y_dl, dl_idx)

    res.kld_dl = np.array([kld.kld_dl(mode, k, config, pl,
                                      channel.dl_interference_variance(mode, config, pl, k), const)
                           for k in range(config.K_D)])
    ul_res = channel.ul_residual_variance(mode, config, pl, stats)
    inv_diag = np.real(np.diag(np.linalg.inv(C_ul.conj().T @ C_ul)))
    res.kld_ul = np.array([kld.kld_ul(mode, k, config, pl, ul_res, const, inv_diag)
                           for k in range(config.K_U)])
    res.kld_comm_total = kld.kld_comm_total(res.kld_dl, res.kld_ul, config.K_D, config.K_U)

    alpha = radar.draw_alpha(config, rng)
    klds, pds = [], []
    tau = radar.detection_threshold(config.pfa)
    drives = comm.drive_signals(config, wf, s_dl, math.sqrt(config.P_u / config.K_U) * ul_sym)
    for t in range(config.T):
        v1 = channel.radar_residual_variance(mode, config, pl, stats, 1, t)
        lam = radar.noncentrality(t, config, pl, wf, alpha, v1)
        klds.append(kld.kld_radar(mode, t, config, pl, wf, alpha, v1))
        pds.append(radar.detection_probability_analytic(lam, tau))
        if "radar" in chains:
            v0 = channel.radar_residual_variance(mode, config, pl, stats, 0, t)
            Y0 = radar.synthesize_radar_snapshots(mode, 0, t, ch, pl, wf, config, drives, rng, alpha)
            Y1 = radar.synthesize_radar_snapshots(mode, 1, t, ch, pl, wf, config, drives, rng, alpha)
            res.false_alarms += int(radar.glrt_statistic(Y0, wf, t, v0) > tau)
            res.detections += int(radar.glrt_statistic(Y1, wf, t, v1) > tau)
            res.bins += 1
    res.kld_radar = np.array(klds)
    res.pd_analytic = float(np.mean(pds))
    return res


def closed_form_trial(config, index, geometry=None):
    """Closed-form metrics for one geometry draw without any signal synthesis.

    The DL precoded vector always carries P_c / K_D, so sigma_w^2 is
    1 / (M_comm K_D) exactly.
    """
    mode = config.mode
    if geometry is None:
        geometry = geometry_for_trial(config, index)
    pl = build_pathloss(config, geometry)
    wf = waveform_for(config)
    const = comm.constellation_for(config)
    stats = channel.WaveformStats(wf.tr_Rx, 1.0 / (config.M_comm * config.K_D))
    dl = [kld.kld_dl(mode, k, config, pl, channel.dl_interference_variance(mode, config, pl, k), const)
          for k in range(config.K_D)]
    ul_res = channel.ul_residual_variance(mode, config, pl, stats)
    ul = [kld.kld_ul(mode, k, config, pl, ul_res, const) for k in range(config.K_U)]
    tau = radar.detection_threshold(config.pfa)
    alpha = config.alpha_magnitude
    rk, pds = [], []
    for t in range(config.T):
        v1 = channel.radar_residual_variance(mode, config, pl, stats, 1, t)
        rk.append(kld.kld_radar(mode, t, config, pl, wf, alpha, v1))
        pds.append(radar.detection_probability_analytic(
            radar.noncentrality(t, config, pl, wf, alpha, v1), tau))
    return {"kld_dl": float(np.mean(dl)), "kld_ul": float(np.mean(ul)),
            "kld_ul_sum": float(np.sum(ul)), "kld_radar": float(np.mean(rk)),
            "pd_analytic": float(np.mean(pds)),
            "kld_comm_total": kld.kld_comm_total(dl, ul, config.K_D, config.K_U)}


def closed_form_average(config, n_geometries, start=0):
    """Closed-form metrics averaged over geometry redraws start..start+n-1."""
    acc = {}
    for i in range(start, start + n_geometries):
        for k, v in closed_form_trial(config, i).items():
            acc[k] = acc.get(k, 0.0) + v
    return {k: v / n_geometries for k, v in acc.items()}


def _run_chunk(config, indices, geometry, chains):
    return [run_trial(config, i, geometry, chains) for i in indices]


def run_trials(config, n_trials, workers=1, geometry=None, chains=("comm", "radar"), start=0):
    """Results of trials start..start+n_trials-1, ordered by trial index."""
    idx = list(range(start, start + n_trials))
    if workers <= 1 or n_trials < 2:
        out = _run_chunk(config, idx, geometry, chains)
    else:
        chunks = [idx[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = ex.map(_run_chunk, [config] * workers, chunks, [geometry] * workers,
                           [chains] * workers)
            out = [r for part in parts for r in part]
    return sorted(out, key=lambda r: r.index)


def _merge_clouds(clouds):
    clouds = [c for c in clouds if c is not None]
    if not clouds:
        return None
    first = clouds[0]
    acc = type(first).__new__(type(first))
    acc.__dict__ = {k: (np.copy(v) if isinstance(v, np.ndarray) else v)
                    for k, v in first.__dict__.items()}
    for c in clouds[1:]:
        for k, v in c.__dict__.items():
            if isinstance(v, np.ndarray):
                acc.__dict__[k] = acc.__dict__[k] + v
            elif k == "draws":
                acc.draws += v
    return acc


def aggregate(results, mode, curve, variable, value, K_D, K_U):
    ok = [r for r in results if r.ok]
    failed = len(results) - len(ok)
    if failed > FAIL_LIMIT * len(results):
        raise RuntimeError("%d of %d trials failed (limit %.0f%%)"
                           % (failed, len(results), 100 * FAIL_LIMIT))

    def rate(num, den):
        n = sum(getattr(r, num) for r in ok)
        d = sum(getattr(r, den) for r in ok)
        return n / d if d else float("nan")

    def mean(attr, reduce=np.mean):
        vals = [reduce(getattr(r, attr)) for r in ok]
        return float(np.mean(vals)) if vals else float("nan")

    emp_dl = emp_ul = float("nan")
    ulc = _merge_clouds([r.ul_cloud for r in ok])
    dlc = _merge_clouds([r.dl_cloud for r in ok])
    if ulc is not None and np.all(ulc.n > 1):
        emp_ul = float(np.mean([kld.empirical_kld_pooled(ulc, k) for k in range(K_U)]))
    if dlc is not None and dlc.draws:
        try:
            emp_dl = float(np.mean([kld.empirical_kld_per_draw(dlc, k) for k in range(K_D)]))
        except np.linalg.LinAlgError:
            pass
    return SweepRecord(
        mode=mode, curve=curve, variable=variable, value=float(value),
        ser_dl=rate("dl_errors", "dl_symbols"), ser_ul=rate("ul_errors", "ul_symbols"),
        pd=rate("detections", "bins"), pfa=rate("false_alarms", "bins"),
        pd_analytic=mean("pd_analytic"), kld_dl=mean("kld_dl"), kld_ul=mean("kld_ul"),
        kld_ul_sum=mean("kld_ul", np.sum), kld_radar=mean("kld_radar"),
        kld_comm_total=mean("kld_comm_total"), emp_kld_dl=emp_dl, emp_kld_ul=emp_ul,
        trials=len(ok), failed=failed)


def run_sweep(config, sweep, workers=1, fixed_geometry=False, chains=("comm", "radar"),
              progress=None):
    """One SweepRecord per (curve, mode, value).

    With fixed_geometry every trial reuses the geometry of trial 0.
    """
    sweep.validate()
    records = []
    labels = sweep.labels or [_curve_label(c) for c in sweep.curves]
    for curve, label in zip(sweep.curves, labels):
        base = apply_overrides(config, curve)
        for mode in sweep.modes:
            for value in sweep.values:
                cfg = apply_sweep_value(base.with_mode(mode), sweep.variable, value).validate()
                geom = geometry_for_trial(cfg, 0) if fixed_geometry else None
                t0 = time.perf_counter()
                results = run_trials(cfg, sweep.trials_per_point, workers, geom, chains)
                rec = aggregate(results, mode, label, sweep.variable, value, cfg.K_D, cfg.K_U)
                rec.wall_time = time.perf_counter() - t0
                records.append(rec)
                if progress:
                    progress(rec)
    return records


def _curve_label(overrides):
    if not overrides:
        return "base"
    return ";".join("%s=%s" % (k, _fmt(v)) for k, v in sorted(overrides.items()))


# ---------------------------------------------------------------------------
# output

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.9g" % v
    return str(v)


def emit_csv(records, path, timing=False):
    """Header then one row per record, floats to 9 significant digits.

    wall_time is left out unless timing is set so the bytes only depend on
    the inputs.
    """
    cols = RECORD_FIELDS if timing else [c for c in RECORD_FIELDS if c != "wall_time"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        kw = {}
        for f in fields(SweepRecord):
            if f.name not in row:
                continue
            v = row[f.name]
            kw[f.name] = v if f.type is str or f.type == "str" else (
                int(v) if f.type is int or f.type == "int" else float(v))
        kw.setdefault("wall_time", 0.0)
        out.append(SweepRecord(**kw))
    return out


ANALYTIC = {"kld_dl": None, "kld_ul": None, "kld_ul_sum": None, "kld_radar": None,
            "kld_comm_total": None, "ser_dl": None, "ser_ul": None, "pd": "pd_analytic",
            "pfa": None, "emp_kld_dl": "kld_dl", "emp_kld_ul": "kld_ul"}


def emit_plot_data(records, path, metrics=None):
    """One whitespace-separated file per metric with a block per (mode, curve).

    Columns are x, y and, where a closed form exists, y_analytic. Returns the
    list of files written; `path` is used as a prefix.
    """
    metrics = metrics or ["kld_ul", "ser_ul", "kld_radar", "pd"]
    base, ext = os.path.splitext(path)
    ext = ext or ".dat"
    written = []
    for metric in metrics:
        partner = ANALYTIC.get(metric)
        lines = []
        groups = {}
        for r in records:
            groups.setdefault((r.mode, r.curve), []).append(r)
        for (mode, curve), recs in groups.items():
            lines.append("# mode=%s curve=%s" % (mode, curve))
            lines.append("# x %s%s" % (metric, " " + partner if partner else ""))
            for r in recs:
                row = [_fmt(r.value), _fmt(getattr(r, metric))]
                if partner:
                    row.append(_fmt(getattr(r, partner)))
                lines.append(" ".join(row))
            lines.append("")
        fname = "%s_%s%s" % (base, metric, ext)
        with open(fname, "w") as fh:
            fh.write("\n".join(lines))
        written.append(fname)
    return written


# ---------------------------------------------------------------------------
# figure presets

PR_N0_DB = [0, 5, 10, 15, 20, 25, 30]
_UL = ["kld_ul", "kld_ul_sum", "ser_ul", "emp_kld_ul"]
_DL = ["kld_dl", "ser_dl", "emp_kld_dl"]
_RADAR = ["kld_radar", "pd", "pfa"]

FIGURES = {
    "fig1a": ("separated", "ic", _UL),
    "fig1b": ("separated", "ic", _RADAR),
    "fig2a": ("separated", "beta", _UL),
    "fig2b": ("separated", "beta", _RADAR),
    "fig3a": ("separated", "power", _DL),
    "fig3b": ("separated", "power", _UL),
    "fig3c": ("separated", "power", _RADAR),
    "fig4a": ("shared", "ic", _UL),
    "fig4b": ("shared", "ic", _RADAR),
    "fig5a": ("shared", "beta", _UL),
    "fig5b": ("shared", "beta", _RADAR),
    "fig6a": ("shared", "power", _DL),
    "fig6b": ("shared", "power", _UL),
    "fig6c": ("shared", "power", _RADAR),
}


def figure_preset(name, config=None, trials=1000):
    from .scenario import ScenarioConfig
    if name not in FIGURES:
        raise ValueError("unknown figure preset %r (known: %s)" % (name, ", ".join(FIGURES)))
    dep, family, metrics = FIGURES[name]
    cfg = (config or ScenarioConfig()).replace(deployment=dep, M=40, M_c=20, M_r=20,
                                               K_D=2, K_U=2, T=3, L=100, eta=3.0, pfa=1e-4,
                                               area_m=800.0, min_sep_m=100.0)
    if family == "ic":
        cfg = cfg.replace(P_c=0.8, P_r=0.1, P_u=0.1, beta_ap=1e-3, beta_r=1e-3)
        curves = [{"sigma_ic_sq": v} for v in (1e-6, 1e-3, 1e-1)]
    elif family == "beta":
        cfg = cfg.replace(P_c=0.8, P_r=0.1, P_u=0.1, sigma_ic_sq=1e-4)
        curves = [{"beta": v} for v in (1e-5, 1e-3, 1e-1)]
    else:
        cfg = cfg.replace(P_u=0.1, beta_ap=1e-4, beta_r=1e-4, sigma_ic_sq=1e-3)
        curves = [{"power_split": v} for v in (0.8, 0.4, 0.2)]
    pre = "SE" if dep == "separated" else "SH"
    sweep = SweepSpec("pr_over_n0_db", list(PR_N0_DB), trials, [pre + "-HD", pre + "-FD"],
                      curves, metrics=list(metrics))
    return cfg, sweep
