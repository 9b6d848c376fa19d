"""Statistical checks of the limit theorems: KS tests, LLN trends, sup-norm trends.

"Convergence in probability" is checked as a trend: the median of the error
statistic over independent replications must strictly decrease along the
``N`` grid.  No rate is asserted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _st

from . import rng as _rng
from .approx import K_N, build_HN, sample_poisson
from .errors import ConfigurationError, InvalidInput
from .height import height_on_skeleton
from .levy_sim import simulate_coupled, simulate_levy
from .mechanism import laplace_exponent_inverse, psi_delta
from .parallel import map_ordered

Z95 = 1.959963984540054
HORIZON_FACTOR = 1.5
MIN_KS = 10


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n: int
    reference: str = ""

    def to_dict(self):
        return {"statistic": self.statistic, "p_value": self.p_value, "n": self.n, "reference": self.reference}


def ks_test(samples, cdf, reference=""):
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    ``cdf`` is a vectorized callable or a frozen scipy distribution.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise InvalidInput("samples must be finite")
    if len(x) < MIN_KS:
        raise InvalidInput(f"need at least {MIN_KS} samples, got {len(x)}")
    f = cdf.cdf if hasattr(cdf, "cdf") else cdf
    res = _st.kstest(x, f, method="asymp")
    return KSResult(float(res.statistic), float(res.pvalue), len(x), reference)


# --------------------------------------------------------------------------
# exponential law of the overshoot at an independent exponential time


@dataclass(frozen=True)
class GammaTauReport:
    N: int
    alpha: float
    reference_rate: float
    exact_rate: float
    ks: KSResult
    mean: float
    samples: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {
            "N": self.N,
            "alpha": self.alpha,
            "reference_rate": self.reference_rate,
            "exact_rate": self.exact_rate,
            "mean": self.mean,
            "ks": self.ks.to_dict(),
        }


def _gamma_block(args):
    mech, delta, alpha, seed, start, stop = args
    out = []
    for r in range(start, stop):
        tau = float(_rng.stream(seed, "exp_window", r).standard_exponential()) / alpha
        # one skeleton interval plus the jumps: bridge minima make the maximum exact
        p = simulate_levy(mech, delta, tau, grid_step=tau, seed=seed, key=(r,))
        out.append(max(0.0, -float(min(p.y.min(), p.y_left.min()))))
    return out


def gamma_tau_samples(mech, schedule, N, replications, seed=0, jobs=1):
    """Draws of ``max_{r <= tau} (-Y_delta(r))`` with ``tau ~ Exp(psi_delta(N))`` independent."""
    if replications <= 0:
        raise ConfigurationError("replications must be positive", ["replications"])
    delta = schedule.delta(N)
    alpha = psi_delta(mech, delta, N)
    return np.asarray(map_ordered(_gamma_block, mech, delta, alpha, seed, replications, jobs)), alpha


def gamma_tau_test(mech, schedule, N, replications, seed=0, reference_rate=None, jobs=1):
    """KS test of the overshoot draws against ``Exp(reference_rate)`` (default ``N``).

    ``exact_rate`` in the report is the root ``q`` of ``b q + psi_delta(q) =
    psi_delta(N)``; it equals ``N`` when ``b = 0``.
    """
    x, alpha = gamma_tau_samples(mech, schedule, N, replications, seed, jobs)
    rate = float(N if reference_rate is None else reference_rate)
    exact = laplace_exponent_inverse(mech, schedule.delta(N), alpha)
    ks = ks_test(x, _st.expon(scale=1.0 / rate), reference=f"Exp({rate!r})")
    return GammaTauReport(int(N), alpha, rate, exact, ks, float(np.mean(x)), x)


# --------------------------------------------------------------------------
# trend reports


def median_ci(values):
    """Median with a distribution-free 95% interval from binomial order-statistic ranks."""
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if n == 0:
        raise InvalidInput("no values")
    half = Z95 * math.sqrt(n) / 2.0
    lo = max(int(math.floor(n / 2.0 - half)), 0)
    hi = min(int(math.ceil(n / 2.0 + half)), n - 1)
    return float(np.median(v)), float(v[lo]), float(v[hi])


@dataclass(frozen=True)
class TrendReport:
    claim_id: str
    N_grid: list
    stats: list
    verdict: str
    tolerance: float = 0.0
    params: dict = field(default_factory=dict)

    @property
    def medians(self):
        return [s["median"] for s in self.stats]

    @property
    def strictly_decreasing(self):
        m = self.medians
        return all(b < a for a, b in zip(m, m[1:]))

    def to_dict(self):
        return {
            "claim_id": self.claim_id,
            "N_grid": list(self.N_grid),
            "params": self.params,
            "stats": self.stats,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def trend_report(claim_id, N_grid, per_N, params=None, tolerance=0.0):
    """Summarize per-``N`` error samples into a :class:`TrendReport`.

    Verdict ``pass`` needs strictly decreasing medians with each interval
    above the next; strictly decreasing medians with overlapping intervals
    give ``decreasing-overlap``; anything else is ``fail``.
    """
    stats = []
    for N, vals in zip(N_grid, per_N):
        v = np.asarray(vals, dtype=float)
        med, lo, hi = median_ci(v)
        stats.append(
            {
                "N": N,
                "n": int(len(v)),
                "median": med,
                "ci_low": lo,
                "ci_high": hi,
                "mean": float(math.fsum(v.tolist()) / len(v)),
            }
        )
    meds = [s["median"] for s in stats]
    decreasing = all(b < a - tolerance for a, b in zip(meds, meds[1:]))
    separated = all(b["ci_high"] < a["ci_low"] for a, b in zip(stats, stats[1:]))
    verdict = "pass" if decreasing and separated else ("decreasing-overlap" if decreasing else "fail")
    return TrendReport(claim_id, list(N_grid), stats, verdict, tolerance, dict(params or {}))


def _n_samples(alpha, s):
    return int(math.floor(alpha * s))


def _lln_tau_block(args):
    alpha, n, s, seed, N, start, stop = args
    out = []
    for r in range(start, stop):
        g = _rng.stream(seed, "poisson_sampler", N, r)
        gaps = g.standard_exponential(n) / alpha
        out.append(abs(float(np.sum(gaps)) - s))
    return out


def lln_tau_check(mech, schedule, N_grid, s, replications, seed=0, jobs=1):
    """Trend of ``|tau_n - s|``, ``n = floor(psi_delta(N) s)``, over the ``N`` grid."""
    per_N = []
    for N in N_grid:
        alpha = psi_delta(mech, schedule.delta(N), N)
        per_N.append(map_ordered(_lln_tau_block, alpha, _n_samples(alpha, s), s, seed, N, replications, jobs))
    return trend_report("lln-tau", N_grid, per_N, {"s": s, "replications": replications, "seed": seed})


def approx_instance(mech, schedule, N, horizon, seed, key, extra_deltas=(), grid_step=None):
    """Coupled simulation of ``H_delta_N`` (plus optional finer levels) and ``H^N``.

    Returns ``(H^N, [height paths], samples)``; the first height path is at
    ``delta_N`` and the rest follow ``extra_deltas``.
    """
    delta = schedule.delta(N)
    alpha = psi_delta(mech, delta, N)
    smp = sample_poisson(alpha, horizon, seed, key)
    paths = simulate_coupled(mech, [delta, *extra_deltas], horizon, grid_step, seed, smp.times, key=key)
    hps = [height_on_skeleton(p) for p in paths]
    return build_HN(hps[0], smp, N), hps, smp


def sample_margin(mech, schedule, N, s):
    # tau_n has standard deviation sqrt(s / alpha); ten of them keep n samples inside
    alpha = psi_delta(mech, schedule.delta(N), N)
    return 10.0 * math.sqrt(s / alpha) + 1e-9


def _lln_kn_block(args):
    mech, schedule, N, s, seed, start, stop = args
    out = []
    for r in range(start, stop):
        ap, _, _ = approx_instance(mech, schedule, N, s + sample_margin(mech, schedule, N, s), seed, (N, r))
        out.append(abs(K_N(ap, s) - s))
    return out


def lln_KN_check(mech, schedule, N_grid, s, replications, seed=0, jobs=1):
    """Trend of ``|K_N(s) - s|`` over the ``N`` grid."""
    per_N = [map_ordered(_lln_kn_block, mech, schedule, N, s, seed, replications, jobs) for N in N_grid]
    return trend_report("lln-kn", N_grid, per_N, {"s": s, "replications": replications, "seed": seed})


def sup_distance(approx, ref, s_max):
    """``sup_{[0, s_max]} |H^N - H_ref|`` over the reference skeleton and the nodes of ``H^N``.

    ``H^N`` must be defined on the whole window.
    """
    if approx.duration < s_max:
        raise InvalidInput(f"H^N only reaches time {approx.duration}, need {s_max}")
    if ref.t[-1] < s_max:
        raise InvalidInput(f"reference height path ends at {ref.t[-1]}, need {s_max}")
    tn = approx.node_times.astype(float)
    t = np.union1d(ref.t[ref.t <= s_max], tn[tn <= s_max])
    i = np.searchsorted(ref.t, t, side="right") - 1
    return float(np.max(np.abs(approx(t) - ref.H[i])))


def _supnorm_block(args):
    mech, schedule, N, s_max, delta_ref, seed, start, stop = args
    out = []
    for r in range(start, stop):
        ap, hps, _ = approx_instance(mech, schedule, N, HORIZON_FACTOR * s_max, seed, (N, r), (delta_ref,))
        out.append(sup_distance(ap, hps[1], s_max))
    return out


def supnorm_convergence(mech, schedule, N_grid, s_max, delta_ref, replications, seed=0, jobs=1):
    """Trend of ``sup_{[0, s_max]} |H^N - H_delta_ref|`` on coupled randomness."""
    d_min = min(schedule.delta(N) for N in N_grid)
    if not delta_ref < d_min:
        raise ConfigurationError(f"delta_ref={delta_ref} must be below the smallest delta_N={d_min}", ["delta_ref"])
    params = {"s_max": s_max, "delta_ref": delta_ref, "replications": replications, "seed": seed}
    if s_max == 0:
        return trend_report("supnorm", N_grid, [[0.0] * replications for _ in N_grid], params)
    per_N = [map_ordered(_supnorm_block, mech, schedule, N, s_max, delta_ref, seed, replications, jobs) for N in N_grid]
    return trend_report("supnorm", N_grid, per_N, params)


# --------------------------------------------------------------------------
# Poisson Riemann sums


def riemann_sum_check(h, heights, samples, s):
    """Both sides of ``(1/alpha) sum_{k <= floor(alpha s)} h(Yref(tau_k)) ~ int_0^s h(Yref)``.

    ``heights`` supplies the reflected path ``Yref`` on its skeleton; the
    integral is the left-point sum over that skeleton (exact for constant
    ``h``).  Returns ``(lhs, rhs)``.
    """
    alpha = samples.rate
    n = _n_samples(alpha, s)
    if n > len(samples.times):
        raise InvalidInput(f"need {n} samples, only {len(samples.times)} available")
    t = heights.t
    if s > t[-1]:
        raise InvalidInput(f"s={s} beyond the path horizon {t[-1]}")
    idx = np.maximum(np.searchsorted(t, samples.times[:n], side="right") - 1, 0)
    hv = np.asarray(h(heights.y_ref[idx]), dtype=float)
    m = t < s
    edges = np.append(t[m], s)
    hw = np.asarray(h(heights.y_ref[m]), dtype=float)
    for arr in (hv, hw):
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 1):
            raise InvalidInput("h must map into [0, 1]")
    lhs = math.fsum(np.broadcast_to(hv, (n,)).tolist()) / alpha
    rhs = math.fsum((np.broadcast_to(hw, (m.sum(),)) * np.diff(edges)).tolist())
    return lhs, rhs


def smoothed_indicator(eps):
    """``g_eps(y) = min(y / eps, 1)`` on ``y >= 0``: a continuous stand-in for ``1{y > 0}``."""

    def g(y):
        return np.clip(np.asarray(y, dtype=float) / eps, 0.0, 1.0)

    return g
