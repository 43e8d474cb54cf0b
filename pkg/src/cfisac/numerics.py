"""Special functions and random sampling primitives."""
import math

import numpy as np
from scipy.special import ive


class DomainError(ValueError):
    pass


class CapacityError(RuntimeError):
    pass


PURPOSES = {"trial": 0, "geometry": 1, "alpha": 2, "aux": 3}


class RngStream:
    """Reproducible random stream keyed by (master_seed, stream_index, purpose).

    Streams with different indices or purposes come from independent
    SeedSequence children, so trial i draws the same numbers no matter which
    worker runs it.
    """

    def __init__(self, master_seed, stream_index=0, purpose="trial"):
        self.master_seed = int(master_seed)
        self.stream_index = int(stream_index)
        self.purpose = purpose
        code = PURPOSES[purpose] if isinstance(purpose, str) else int(purpose)
        ss = np.random.SeedSequence(self.master_seed % 2**64,
                                    spawn_key=(self.stream_index, code))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return "RngStream(%d, %d, %r)" % (self.master_seed, self.stream_index, self.purpose)


def as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("expected RngStream or numpy Generator, got %r" % type(rng))


# ---------------------------------------------------------------------------
# Marcum Q1 via Poisson mixture

_TAIL = 1e-15


def _poisson_bounds(mean):
    """Index range [lo, hi] outside which the Poisson(mean) mass is below _TAIL on each side."""
    if mean == 0.0:
        return 0, 0
    log_tol = math.log(_TAIL)

    def log_chernoff(k):
        return k - mean - k * math.log(k / mean)

    hi = max(int(math.ceil(mean)), 1)
    step = max(1, int(math.sqrt(mean)))
    while log_chernoff(hi) > log_tol:
        hi += step
    lo = int(math.floor(mean))
    while lo > 0 and log_chernoff(lo) > log_tol:
        lo -= step
    return max(lo, 0), hi


def _poisson_pmf_window(mean):
    """Normalised Poisson(mean) pmf on its significant window.

    Weights are built by ratio recurrence outward from the mode, so no large
    log-factorials are subtracted; normalising over the window costs at most
    the discarded tail mass.
    """
    lo, hi = _poisson_bounds(mean)
    if mean == 0.0:
        return 0, np.ones(1)
    k = np.arange(lo, hi + 1, dtype=float)
    mode = min(max(int(math.floor(mean)), lo), hi)
    i0 = mode - lo
    logw = np.zeros(k.size)
    if i0 + 1 < k.size:
        logw[i0 + 1:] = np.cumsum(np.log(mean / k[i0 + 1:]))
    if i0 > 0:
        # log w_k = -sum_{j=k+1}^{mode} log(mean/j)
        steps = np.log(mean / k[1:i0 + 1])
        logw[:i0] = -np.cumsum(steps[::-1])[::-1]
    w = np.exp(logw)
    return lo, w / w.sum()


def marcum_q1(a, b):
    """First-order Marcum Q function Q1(a, b).

    Uses Q1(a,b) = sum_k Pois(k; a^2/2) * P[Pois(b^2/2) <= k], both Poisson
    laws truncated where their tails fall below 1e-15.
    """
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("marcum_q1 needs finite arguments, got a=%r b=%r" % (a, b))
    if a < 0 or b < 0:
        raise DomainError("marcum_q1 needs a >= 0 and b >= 0, got a=%r b=%r" % (a, b))
    if b == 0.0:
        return 1.0
    x = 0.5 * a * a
    y = 0.5 * b * b
    if x == 0.0:
        return math.exp(-y)
    lo_x, px = _poisson_pmf_window(x)
    lo_y, py = _poisson_pmf_window(y)
    cdf_y = np.minimum(np.cumsum(py), 1.0)
    k = np.arange(lo_x, lo_x + px.size)
    idx = k - lo_y
    F = np.where(idx < 0, 0.0, cdf_y[np.clip(idx, 0, cdf_y.size - 1)])
    q = float(np.dot(px, F))
    return min(max(q, 0.0), 1.0)


def _marcum_q1_bessel(a, b):
    # exponentially scaled Bessel series; independent of the Poisson route
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return math.exp(-0.5 * b * b)
    z = a * b
    n = int(12 * math.sqrt(z) + 80)
    k = np.arange(n, dtype=float)
    scale = math.exp(-0.5 * (a - b) ** 2)
    if a < b:
        terms = (a / b) ** k * ive(k, z)
        q = scale * terms.sum()
    else:
        terms = (b / a) ** k[1:] * ive(k[1:], z)
        q = 1.0 - scale * terms.sum()
    return min(max(float(q), 0.0), 1.0)


def noncentral_chi2_ccdf(x, dof, lam):
    """P[X > x] for X noncentral chi-square with 2 degrees of freedom and noncentrality lam."""
    if dof != 2:
        raise NotImplementedError("only dof=2 is supported, got %r" % (dof,))
    x = float(x)
    lam = float(lam)
    if not (math.isfinite(x) and math.isfinite(lam)) or x < 0 or lam < 0:
        raise DomainError("need finite x >= 0 and lam >= 0, got x=%r lam=%r" % (x, lam))
    return _marcum_q1_bessel(math.sqrt(lam), math.sqrt(x))


# ---------------------------------------------------------------------------
# sampling

def sample_complex_gaussian(rows, cols, total_variance, rng):
    """rows x cols matrix of i.i.d. CN(0, total_variance) entries.

    total_variance is E|entry|^2; each of the real and imaginary parts gets half.
    A leading batch shape can be given by passing a tuple as rows.
    """
    if not total_variance > 0:
        raise DomainError("total_variance must be positive, got %r" % (total_variance,))
    gen = as_generator(rng)
    shape = tuple(rows) + (cols,) if isinstance(rows, tuple) else (rows, cols)
    z = gen.standard_normal(shape + (2,))
    s = math.sqrt(0.5 * total_variance)
    return s * (z[..., 0] + 1j * z[..., 1])


HEX_DENSITY = math.pi / (2 * math.sqrt(3))


def poisson_disk_sample(width_m, height_m, min_separation_m, count, rng, max_rejections=10000):
    """Dart throwing: uniform candidates, rejected if closer than min_separation_m to an accepted point."""
    gen = as_generator(rng)
    count = int(count)
    r = float(min_separation_m)
    if width_m <= 0 or height_m <= 0 or count < 0 or r < 0:
        raise DomainError("bad region or count: %r x %r, count=%r, sep=%r"
                          % (width_m, height_m, count, r))
    # disks of radius r/2 around each point must fit in the padded region
    if count > 1 and count * math.pi * r * r / 4 > HEX_DENSITY * (width_m + r) * (height_m + r):
        raise CapacityError("cannot place %d points %.6g m apart in a %.6g x %.6g m region"
                            % (count, r, width_m, height_m))
    pts = np.empty((count, 2))
    n = 0
    rejections = 0
    r2 = r * r
    while n < count:
        c = gen.uniform((0.0, 0.0), (width_m, height_m))
        if n == 0 or np.min(np.sum((pts[:n] - c) ** 2, axis=1)) >= r2:
            pts[n] = c
            n += 1
            continue
        rejections += 1
        if rejections > max_rejections:
            raise CapacityError("placed only %d of %d points %.6g m apart in a %.6g x %.6g m "
                                "region after %d rejections"
                                % (n, count, r, width_m, height_m, max_rejections))
    return pts
