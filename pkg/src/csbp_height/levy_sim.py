"""Simulation of the truncated spectrally positive Levy path.

For a truncation level ``delta`` the path is::

    Y_delta(s) = -(b + int_{z >= delta} z mu(dz)) s + sqrt(2c) B(s) + (sum of jumps >= delta up to s)

It lives on an event-driven skeleton: a uniform grid, the jump times, any
caller-supplied times (Poisson sampling clocks), and one point per interval
holding an exact draw of the Brownian-bridge minimum on that interval.  With
those points every infimum over skeleton-delimited windows is exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import ConfigurationError, InvalidInput, RangeError
from .mechanism import mechanism_hash

KIND_GRID = 0
KIND_JUMP = 1
KIND_BRIDGE_MIN = 2
KIND_EXTRA = 3

_FRAC_CLIP = 1e-3


@dataclass(frozen=True)
class LevyPath:
    """A simulated trajectory of ``Y_delta`` on its skeleton.

    Attributes
    ----------
    t : ndarray
        Strictly increasing skeleton times, ``t[0] == 0``.
    y, y_left : ndarray
        Right values and left limits; they differ only at jump points, where
        ``y - y_left`` equals the jump size exactly.
    kind : ndarray of int8
        ``KIND_GRID``, ``KIND_JUMP``, ``KIND_BRIDGE_MIN`` or ``KIND_EXTRA``.
    jump_size : ndarray
        Size of the jump at each point (0 where there is none).
    """

    t: np.ndarray
    y: np.ndarray
    y_left: np.ndarray
    kind: np.ndarray
    jump_size: np.ndarray
    delta: float
    s_max: float
    drift: float
    c: float
    seed: dict = field(default_factory=dict)
    mech_hash: str = ""

    @property
    def is_jump(self):
        return self.jump_size > 0

    @property
    def jump_times(self):
        return self.t[self.is_jump]

    @property
    def jump_sizes(self):
        return self.jump_size[self.is_jump]

    def running_inf(self):
        return running_infimum(self.y, self.y_left)

    def index_at(self, s):
        """Index of the skeleton point nearest to the left of ``s``."""
        if s < 0 or s > self.t[-1] * (1 + 1e-15):
            raise RangeError(f"time {s} outside [0, {self.t[-1]}]")
        return max(int(np.searchsorted(self.t, s, side="right")) - 1, 0)


@dataclass(frozen=True)
class ReflectedPath:
    t: np.ndarray
    values: np.ndarray
    running_inf: np.ndarray


def running_infimum(y, y_left=None):
    """``inf_{r <= s} Y(r)`` at each skeleton point, left limits included."""
    y = np.asarray(y, dtype=float)
    lo = y if y_left is None else np.minimum(y, np.asarray(y_left, dtype=float))
    return np.minimum.accumulate(lo)


def reflect(path):
    """Reflected path ``Y - inf Y`` in one left-to-right pass."""
    t = np.asarray(path.t, dtype=float)
    if t.size == 0 or t[0] != 0 or path.y[0] != 0:
        raise InvalidInput("skeleton must start at time 0 with value 0")
    if np.any(np.diff(t) <= 0):
        raise InvalidInput("skeleton times must be strictly increasing")
    inf = running_infimum(path.y, getattr(path, "y_left", None))
    return ReflectedPath(t, np.asarray(path.y, dtype=float) - inf, inf)


def _grid(s_max, grid_step):
    n = max(int(math.ceil(s_max / grid_step - 1e-9)), 1)
    g = np.arange(n + 1, dtype=float) * grid_step
    g[-1] = s_max
    return g[g <= s_max]


def simulate_coupled(mech, deltas, s_max, grid_step=None, seed=0, extra_times=None, bridge_minima=True, key=()):
    """Simulate ``Y_delta`` for several truncation levels from shared randomness.

    Jumps are drawn once at the finest level and thinned to ``[delta, inf)``
    for the others; the Brownian increments, the skeleton and the
    bridge-minimum draws are common to all levels, only the compensating
    drift differs.  Returns one :class:`LevyPath` per entry of ``deltas``.
    """
    deltas = [float(d) for d in deltas]
    if not deltas or min(deltas) <= 0:
        raise ConfigurationError("truncation levels must be positive", ["delta"])
    if not s_max >= 0:
        raise ConfigurationError("horizon must be nonnegative", ["s_max"])
    if grid_step is None:
        grid_step = s_max * 1e-4 if s_max > 0 else 1.0
    if not grid_step > 0:
        raise ConfigurationError("grid_step must be positive", ["grid_step"])
    d_min = min(deltas)
    mu = mech.mu
    rate = mu.mass(d_min) if mu.variant != "none" else 0.0
    if not math.isfinite(rate):
        raise ConfigurationError(f"jump rate mu([{d_min}, inf)) is not finite", ["delta"])

    # jumps: Poisson count, uniform order statistics, i.i.d. sizes
    if rate > 0 and s_max > 0:
        g_times = _rng.stream(seed, "jump_times", *key)
        n_jumps = int(g_times.poisson(rate * s_max))
        j_times = np.sort(g_times.uniform(0.0, s_max, n_jumps))
        j_sizes = mu.sample(_rng.stream(seed, "jump_sizes", *key), d_min, n_jumps)
    else:
        j_times = np.empty(0)
        j_sizes = np.empty(0)

    base = [_grid(s_max, grid_step) if s_max > 0 else np.zeros(1), j_times]
    if extra_times is not None:
        extra = np.asarray(extra_times, dtype=float).ravel()
        if np.any(extra < 0) or np.any(extra > s_max):
            raise RangeError(f"extra skeleton times must lie in [0, {s_max}]")
        base.append(extra)
    t = np.unique(np.concatenate(base))
    n = len(t)
    kind = np.zeros(n, dtype=np.int8)
    if extra_times is not None and len(extra):
        kind[np.searchsorted(t, extra)] = KIND_EXTRA
    j_idx = np.searchsorted(t, j_times)
    kind[j_idx] = KIND_JUMP

    sigma = math.sqrt(2.0 * mech.c)
    dt = np.diff(t)
    if sigma > 0 and n > 1:
        g_b = _rng.stream(seed, "brownian", *key)
        B = np.concatenate(([0.0], np.cumsum(g_b.standard_normal(n - 1) * np.sqrt(dt))))
    else:
        B = np.zeros(n)
    insert = bridge_minima and sigma > 0 and n > 1
    if insert:
        E = _rng.stream(seed, "bridge", *key).standard_exponential(n - 1)

    paths = []
    frac = None
    for delta in deltas:
        keep = j_sizes >= delta
        jumps = np.zeros(n)
        np.add.at(jumps, j_idx[keep], j_sizes[keep])
        drift = -(mech.b + mu.first_moment(delta))
        y = drift * t + sigma * B + np.cumsum(jumps)
        y_left = y - jumps
        k = kind.copy()
        k[(k == KIND_JUMP) & (jumps == 0)] = KIND_GRID
        tt = t
        if insert:
            a = y[:-1]
            b = y_left[1:]
            m = 0.5 * (a + b - np.sqrt((a - b) ** 2 + 2.0 * sigma**2 * dt * E))
            m = np.minimum(m, np.minimum(a, b))
            if frac is None:
                da, db = a - m, b - m
                tot = da + db
                frac = np.clip(np.divide(da, tot, out=np.full_like(tot, 0.5), where=tot > 0), _FRAC_CLIP, 1 - _FRAC_CLIP)
            mid = t[:-1] + frac * dt
            # intervals too short to hold a distinct point keep their endpoints only
            drop = 2 * np.nonzero((mid <= t[:-1]) | (mid >= t[1:]))[0] + 1
            tt = np.delete(_interleave(t, mid), drop)
            y = np.delete(_interleave(y, m), drop)
            y_left = np.delete(_interleave(y_left, m), drop)
            jumps = np.delete(_interleave(jumps, np.zeros(n - 1)), drop)
            k = np.delete(_interleave(k, np.full(n - 1, KIND_BRIDGE_MIN, dtype=np.int8)), drop)
        paths.append(
            LevyPath(
                t=tt,
                y=y,
                y_left=y_left,
                kind=k,
                jump_size=jumps,
                delta=delta,
                s_max=float(s_max),
                drift=drift,
                c=mech.c,
                seed=_rng.seed_record(seed, "brownian", *key),
                mech_hash=mechanism_hash(mech),
            )
        )
    return paths


def _interleave(main, mid):
    out = np.empty(len(main) + len(mid), dtype=main.dtype)
    out[0::2] = main
    out[1::2] = mid
    return out


def simulate_levy(mech, delta, s_max, grid_step=None, seed=0, extra_times=None, bridge_minima=True, key=()):
    """Simulate a single truncated Levy path; see :func:`simulate_coupled`."""
    return simulate_coupled(mech, [delta], s_max, grid_step, seed, extra_times, bridge_minima, key)[0]


def write_levy_csv(path, fh):
    """CSV dump with columns ``s, Y, running_inf, is_jump, jump_size``."""
    inf = path.running_inf()
    fh.write(f"# mechanism={path.mech_hash} seed={path.seed.get('seed')} delta={path.delta!r}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["s", "Y", "running_inf", "is_jump", "jump_size"])
    for row in zip(path.t.tolist(), path.y.tolist(), inf.tolist(), path.is_jump.astype(int).tolist(), path.jump_size.tolist()):
        w.writerow([repr(row[0]), repr(row[1]), repr(row[2]), row[3], repr(row[4])])


# --------------------------------------------------------------------------
# Lamperti time change


@dataclass(frozen=True)
class TimeChangedPath:
    s: np.ndarray
    values: np.ndarray
    tau: np.ndarray
    total_area: float
    truncated: bool


def lamperti_time_change(mass, s_grid):
    """Time-change a piecewise-constant mass path by its integrated mass.

    ``mass`` needs ``t`` (jump times, ``t[0] = 0``), ``mass`` (value on
    ``[t[i], t[i+1])``) and ``t_end``.  With ``A(t) = int_0^t X`` and
    ``tau_s = inf{t : A(t) > s}`` the output is ``X(tau_s)`` for every
    requested ``s < A(t_end)``; later requests are dropped and flagged.
    """
    t = np.asarray(mass.t, dtype=float)
    x = np.asarray(mass.mass, dtype=float)
    if np.any(x < 0):
        raise InvalidInput("mass path must be nonnegative")
    edges = np.append(t, float(mass.t_end))
    A = np.concatenate(([0.0], np.cumsum(x * np.diff(edges))))
    total = float(A[-1])
    s = np.asarray(s_grid, dtype=float)
    ok = s < total
    s_ok = s[ok]
    j = np.searchsorted(A, s_ok, side="right") - 1
    j = np.minimum(j, len(x) - 1)
    tau = edges[j] + (s_ok - A[j]) / x[j]
    return TimeChangedPath(s_ok, x[j], tau, total, bool(np.any(~ok)))
