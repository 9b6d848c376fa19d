"""Height process of a truncated Levy path, evaluated on its skeleton.

``cH(s) = Y(s) - inf_{r<=s} Y(r) - U(s)`` with the jump penalty::

    U(s) = sum over jumps r_j <= s of (z_j + inf_{r_j<=u<=s} Y(u) - Y(r_j))^+

where ``Y(r_j)`` is the post-jump value, so every penalty lies in
``[0, z_j]``.  Values are kept in mass units (``cH``); :attr:`HeightPath.H`
divides by ``c``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInput, RangeError
from .levy_sim import reflect


@dataclass(frozen=True)
class HeightPath:
    t: np.ndarray
    cH: np.ndarray
    U: np.ndarray
    y_ref: np.ndarray
    tv: np.ndarray
    c: float
    path: object = None

    @property
    def H(self):
        if self.c <= 0:
            raise InvalidInput("H = cH / c is undefined for c = 0; use cH")
        return self.cH / self.c

    def jumps_total(self):
        """Sum of jump sizes up to each skeleton point."""
        return np.cumsum(self.path.jump_size)


def height_on_skeleton(path):
    """Evaluate ``cH``, ``U`` and the variation of ``U`` at every skeleton point."""
    refl = reflect(path)
    y = np.ascontiguousarray(path.y, dtype=float)
    y_left = np.ascontiguousarray(path.y_left, dtype=float)
    jump = np.ascontiguousarray(path.jump_size > 0, dtype=np.uint8)
    cH, U, _, tv = kernels.height_scan(y, y_left, jump)
    return HeightPath(refl.t, cH, U, refl.values, tv, float(path.c), path)


def jump_penalties(path):
    """Per-jump penalties by direct evaluation of the formula, shape ``(J, S)``.

    Row ``j`` holds ``(z_j + inf_{[r_j, s]} Y - Y(r_j))^+`` at every skeleton
    point ``s`` (0 before the jump).  Cost O(J*S); used as an oracle.
    """
    y = np.asarray(path.y, dtype=float)
    lows = np.minimum(y, np.asarray(path.y_left, dtype=float))
    idx = np.nonzero(path.jump_size > 0)[0]
    out = np.zeros((len(idx), len(y)))
    for row, p in enumerate(idx):
        seg = lows[p:].copy()
        seg[0] = y[p]
        future_inf = np.minimum.accumulate(seg)
        z = path.jump_size[p]
        out[row, p:] = np.maximum(z + future_inf - y[p], 0.0)
    return out


def height_brute_force(path):
    """``cH`` straight from the formula (O(J*S) oracle for :func:`height_on_skeleton`)."""
    refl = reflect(path)
    pen = jump_penalties(path)
    return np.maximum(refl.values - pen.sum(axis=0), 0.0)


def lebesgue_height(path, i, resolution=None):
    """``cH`` at skeleton point ``i`` as the Lebesgue measure of ``{inf_{[r, s]} Y : r <= s}``.

    On each jump-free stretch of the skeleton the future infimum ``r ->
    inf_{[r, s]} Y`` runs continuously between its values at the ends, so
    the set is a finite union of intervals.  With ``resolution=None`` the
    union is merged exactly; otherwise its measure is estimated by counting
    the members of a uniform value grid of that many points.
    """
    y = np.asarray(path.y[: i + 1], dtype=float)
    yl = np.asarray(path.y_left[: i + 1], dtype=float)
    if i == 0:
        return 0.0
    # A[k] = inf over [r_k, s]; A_left[k] = inf over [r_k-, s]
    seq = np.concatenate((yl[1:], [np.inf]))
    suffix = np.minimum.accumulate(seq[::-1])[::-1]
    A = np.minimum(y, suffix)
    A_left = np.minimum(yl, A)
    lo = A[:-1]
    hi = A_left[1:]
    intervals = sorted(zip(lo.tolist(), hi.tolist()))
    if resolution is None:
        total = 0.0
        cur_lo, cur_hi = intervals[0]
        for a, b in intervals[1:]:
            if a > cur_hi:
                total += cur_hi - cur_lo
                cur_lo, cur_hi = a, b
            else:
                cur_hi = max(cur_hi, b)
        return total + (cur_hi - cur_lo)
    vmin, vmax = A.min(), y[-1]
    if vmax <= vmin:
        return 0.0
    grid = vmin + (np.arange(resolution) + 0.5) * (vmax - vmin) / resolution
    inside = np.zeros(resolution, dtype=bool)
    for a, b in intervals:
        inside |= (grid >= a) & (grid <= b)
    return inside.mean() * (vmax - vmin)


def height_at(hp, s):
    """``cH`` at the skeleton point nearest to the left of ``s``."""
    if s < 0 or s > hp.t[-1]:
        raise RangeError(f"time {s} outside [0, {hp.t[-1]}]")
    i = max(int(np.searchsorted(hp.t, s, side="right")) - 1, 0)
    return float(hp.cH[i])


def min_between(hp, a, b):
    """Minimum of ``cH`` over the skeleton points in ``[a, b]``."""
    if not 0 <= a <= b:
        raise RangeError(f"need 0 <= a <= b, got [{a}, {b}]")
    i0 = int(np.searchsorted(hp.t, a, side="left"))
    i1 = int(np.searchsorted(hp.t, b, side="right"))
    if i1 <= i0:
        raise RangeError(f"no skeleton point in [{a}, {b}]")
    return float(hp.cH[i0:i1].min())


def write_height_csv(hp, fh):
    """CSV dump with columns ``s, Y, Yref, U, cH``."""
    p = hp.path
    fh.write(f"# mechanism={p.mech_hash} seed={p.seed.get('seed')} delta={p.delta!r} c={hp.c!r}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["s", "Y", "Yref", "U", "cH"])
    for row in zip(hp.t.tolist(), p.y.tolist(), hp.y_ref.tolist(), hp.U.tolist(), hp.cH.tolist()):
        w.writerow([repr(v) for v in row])
