"""Discrete height process ``H^N`` built by Poisson sampling of a height path.

Sampling times ``tau_1 < tau_2 < ...`` come from a Poisson process of rate
``alpha = psi_delta(N)``.  ``H^N`` visits the nodes::

    0, H(tau_1), m_1, H(tau_2), m_2, ...      m_k = min of H over [tau_k, tau_{k+1}]

moving at slope ``+-2N`` between them, so the segment from node ``j`` to
``j + 1`` lasts ``|v_{j+1} - v_j| / (2N)``.  ``K_N(s)`` is the time at which
``H^N`` reaches the node ``H(tau_n)`` with ``n = floor(alpha s)``.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import ConfigurationError, InvalidInput, RangeError


@dataclass(frozen=True)
class PoissonSampleSet:
    rate: float
    times: np.ndarray
    horizon: float
    gaps: np.ndarray
    seed: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def count(self, s):
        """Number of sampling times in ``[0, s]``."""
        return int(np.searchsorted(self.times, s, side="right"))


def sample_poisson(rate, horizon, seed=0, key=()):
    """Poisson sampling times on ``[0, horizon]`` from i.i.d. ``Exp(rate)`` gaps.

    Gaps are drawn in blocks from the ``poisson_sampler`` stream, so the
    times never depend on the Levy-path streams.
    """
    rate = float(rate)
    if not rate > 0 or not math.isfinite(rate):
        raise ConfigurationError(f"sampling rate must be positive and finite, got {rate}", ["rate"])
    if horizon < 0:
        raise ConfigurationError("horizon must be nonnegative", ["horizon"])
    g = _rng.stream(seed, "poisson_sampler", *key)
    mean = rate * horizon
    block = int(mean + 6.0 * math.sqrt(mean) + 16)
    gaps = []
    total = 0.0
    while total <= horizon:
        e = g.standard_exponential(block) / rate
        gaps.append(e)
        total += float(e.sum())
    gaps = np.concatenate(gaps)
    times = np.cumsum(gaps)
    n = int(np.searchsorted(times, horizon, side="right"))
    return PoissonSampleSet(rate, times[:n], float(horizon), gaps[:n], _rng.seed_record(seed, "poisson_sampler", *key))


@dataclass(frozen=True)
class ApproxHeightPath:
    """Piecewise-affine ``H^N`` given by its nodes.

    ``heights[k]`` is ``H(tau_{k+1})`` and ``minima[k]`` the minimum between
    ``tau_{k+1}`` and ``tau_{k+2}``.  ``node_values`` starts with 0 and
    alternates heights and minima; ``node_times`` are the cumulative segment
    durations.
    """

    N: float
    alpha: float
    heights: np.ndarray
    minima: np.ndarray
    node_values: np.ndarray
    node_times: np.ndarray
    sample_times: np.ndarray = None

    @property
    def n_samples(self):
        return len(self.heights)

    @property
    def duration(self):
        return float(self.node_times[-1])

    def segment_durations(self):
        return np.abs(np.diff(self.node_values)) / (2.0 * self.N)

    def __call__(self, t):
        """Evaluate ``H^N`` at time(s) ``t``; it stays at its last node afterwards."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise RangeError("H^N is defined for t >= 0")
        if len(self.node_values) == 1:
            return np.zeros_like(t) if t.ndim else 0.0
        out = np.interp(t, self.node_times.astype(float), self.node_values)
        return out if t.ndim else float(out)


def approx_from_values(heights, minima, N, alpha=float("nan"), sample_times=None):
    """Assemble :class:`ApproxHeightPath` from sampled heights and window minima."""
    h = np.asarray(heights, dtype=float).ravel()
    m = np.asarray(minima, dtype=float).ravel()
    if len(h) and len(m) != len(h) - 1:
        raise InvalidInput(f"need one minimum between consecutive heights, got {len(h)} heights and {len(m)} minima")
    if not N > 0:
        raise ConfigurationError("N must be positive", ["N"])
    vals = np.zeros(2 * len(h)) if len(h) else np.zeros(1)
    if len(h):
        vals[1::2] = h
        vals[2::2] = m
    # long double accumulation keeps node times within ~1e-16 relative
    steps = np.abs(np.diff(vals)).astype(np.longdouble) / np.longdouble(2.0 * N)
    times = np.concatenate(([np.longdouble(0)], np.cumsum(steps, dtype=np.longdouble)))
    st = None if sample_times is None else np.asarray(sample_times, dtype=float)
    return ApproxHeightPath(float(N), float(alpha), h, m, vals, times, st)


def _sample_indices(hp, times):
    idx = np.searchsorted(hp.t, times, side="right") - 1
    return np.maximum(idx, 0)


def build_HN(heights, samples, N):
    """Build ``H^N`` from a :class:`~csbp_height.height.HeightPath` and sampling times.

    Sampled values are read at the skeleton point nearest to the left of each
    ``tau_k`` (exact when the path was simulated with the times inserted), and
    minima run over the skeleton points of ``[tau_k, tau_{k+1}]``.
    """
    times = np.asarray(samples.times, dtype=float)
    if len(times) and times[-1] > heights.t[-1]:
        raise RangeError(f"sampling time {times[-1]} beyond the height horizon {heights.t[-1]}")
    H = heights.H
    if len(times) == 0:
        return approx_from_values([], [], N, samples.rate, times)
    idx = _sample_indices(heights, times)
    h = H[idx]
    # reduceat over idx covers [idx_k, idx_{k+1}); the right end is added separately
    m = np.minimum(np.minimum.reduceat(H, idx)[:-1], h[1:])
    return approx_from_values(h, m, N, samples.rate, times)


def _n_of(approx, s):
    if s < 0:
        raise RangeError("s must be nonnegative")
    return int(math.floor(approx.alpha * s))


def K_N_index(approx, n):
    """Time at which ``H^N`` reaches the node ``H(tau_n)`` (0 for ``n = 0``).

    Equal to ``(1/2N)[H(tau_1) + sum_{k=1}^{n-1} ((H(tau_k) - m_k) + (H(tau_{k+1}) - m_k))]``.
    """
    if n > approx.n_samples:
        raise RangeError(f"need {n} samples, only {approx.n_samples} available")
    if n == 0:
        return 0.0
    h, m = approx.heights, approx.minima
    terms = [h[0]]
    terms.extend(((h[:n - 1] - m[:n - 1]) + (h[1:n] - m[:n - 1])).tolist())
    return math.fsum(terms) / (2.0 * approx.N)


def K_N(approx, s):
    """``K_N(s)``: the time ``H^N`` needs to reach ``H(tau_n)``, ``n = floor(alpha s)``."""
    return K_N_index(approx, _n_of(approx, s))


def K_N_displayed(approx, s):
    """The sum ``(1/2N)[H(tau_1) + sum_{k=1}^{n} ((H(tau_k) - m_k) + (H(tau_{k+1}) - m_k))]``.

    With ``n = floor(alpha s)`` this reaches the node ``H(tau_{n+1})``, one
    further than :func:`K_N`, so it needs ``n + 1`` samples.
    """
    return K_N_index(approx, _n_of(approx, s) + 1)


@dataclass(frozen=True)
class IdentityCheck:
    ok: bool
    residual: float
    lhs: float
    rhs: float
    n: int
    K: float


IDENTITY_TOL = 1e-10


def verify_identity(approx, s, heights=None, tol=IDENTITY_TOL):
    """Compare ``H^N(K_N(s))`` with ``H(tau_n)``, ``n = floor(alpha s)``.

    When ``heights`` is given the right side is read afresh from the height
    path at ``tau_n`` rather than from the stored nodes.
    """
    n = _n_of(approx, s)
    k = K_N_index(approx, n)
    lhs = float(approx(k))
    if n == 0:
        rhs = 0.0
    elif heights is not None and approx.sample_times is not None:
        i = _sample_indices(heights, approx.sample_times[n - 1 : n])[0]
        rhs = float(heights.H[i])
    else:
        rhs = float(approx.heights[n - 1])
    res = abs(lhs - rhs)
    return IdentityCheck(res <= tol, res, lhs, rhs, n, k)


def k1_term(approx, heights, s):
    """``K_1^N(s) = (1/cN) sum_{k=1}^{n} gamma_k`` with ``n = floor(alpha s)``.

    ``gamma_k = (cH(tau_k) - min cH) - (Yref(tau_k) - min Yref)`` over the
    window ``[tau_k, tau_{k+1}]``.  Returns the term together with the bound
    ``(2/cN) * (sum of jumps up to tau_{n+1})``.
    """
    n = _n_of(approx, s)
    times = approx.sample_times
    if n + 1 > len(times):
        raise RangeError(f"need {n + 1} samples, only {len(times)} available")
    idx = _sample_indices(heights, times[: n + 1])
    c, N = heights.c, approx.N
    gam = []
    for k in range(n):
        a, b = idx[k], idx[k + 1] + 1
        gam.append((heights.cH[a] - heights.cH[a:b].min()) - (heights.y_ref[a] - heights.y_ref[a:b].min()))
    jumps = float(np.sum(heights.path.jump_size[: idx[n] + 1]))
    return math.fsum(gam) / (c * N), 2.0 * jumps / (c * N)


def modulus_diagnostic(t, values, a, b, delta):
    """``sup{|v(s) - v(r)| : r, s in [a, b], |s - r| <= delta}`` over skeleton points.

    Sliding-window max and min with monotone deques, O(n).
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if not a < b:
        raise RangeError(f"need a < b, got [{a}, {b}]")
    if a < t[0] or b > t[-1]:
        raise RangeError(f"window [{a}, {b}] outside the horizon [{t[0]}, {t[-1]}]")
    sel = (t >= a) & (t <= b)
    t, v = t[sel].tolist(), v[sel].tolist()
    hi, lo = deque(), deque()
    best = 0.0
    left = 0
    for i, x in enumerate(v):
        while t[i] - t[left] > delta:
            left += 1
        while hi and hi[0] < left:
            hi.popleft()
        while lo and lo[0] < left:
            lo.popleft()
        while hi and v[hi[-1]] <= x:
            hi.pop()
        while lo and v[lo[-1]] >= x:
            lo.pop()
        hi.append(i)
        lo.append(i)
        best = max(best, v[hi[0]] - v[lo[0]])
    return best


def write_hn_csv(approx, fh):
    """CSV dump of the nodes of ``H^N``: ``t, value, segment_index``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "value", "segment_index"])
    for j, (t, v) in enumerate(zip(approx.node_times.astype(float).tolist(), approx.node_values.tolist())):
        w.writerow([repr(t), repr(v), j])


def hn_record(approx, s, heights=None):
    """JSON-ready ``{N, alpha, s, K_N, identity_residual}``."""
    chk = verify_identity(approx, s, heights)
    N = int(approx.N) if float(approx.N).is_integer() else approx.N
    return {"N": N, "alpha": approx.alpha, "s": s, "K_N": chk.K, "identity_residual": chk.residual}


def dumps_record(rec):
    return json.dumps(rec, sort_keys=True, indent=2) + "\n"
