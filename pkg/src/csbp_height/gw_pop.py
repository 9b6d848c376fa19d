"""Continuous-time Galton-Watson population at mass scale ``1/N``.

Each individual lives an exponential time of rate ``psi_delta'(N)`` and is
replaced by ``l`` children with probability ``nu_N(l)`` from
:func:`csbp_height.mechanism.offspring_law`.  The mass is ``k / N`` and
starts at ``floor(N x) / N``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import rng as _rng
from .errors import ConfigurationError, InvalidInput
from .mechanism import offspring_law, u_flow
from .parallel import map_ordered

POPULATION_CAP = 10**8
RANDOM_BLOCK = 4096
MIN_REPLICATIONS = 100


@dataclass(frozen=True)
class MassPath:
    t: np.ndarray
    k: np.ndarray
    N: int
    x: float
    t_end: float
    absorbed: bool
    seed: dict = field(default_factory=dict)

    @property
    def mass(self):
        return self.k / self.N

    @property
    def initial_mass(self):
        return float(self.k[0]) / self.N

    def mass_at(self, t):
        """Mass at time ``t`` (right-continuous)."""
        if not 0 <= t <= self.t_end:
            raise InvalidInput(f"time {t} outside [0, {self.t_end}]")
        i = int(np.searchsorted(self.t, t, side="right")) - 1
        return float(self.k[i]) / self.N


def initial_count(N, x):
    if not x >= 0:
        raise ConfigurationError(f"initial mass must be nonnegative, got {x}", ["x"])
    return int(math.floor(N * x))


def _run(law, k0, t_max, g, record, cap):
    state = np.array([float(k0), 0.0, 0.0, 0.0])
    size = 1024 if record else 0
    rec_t = np.empty(size)
    rec_k = np.empty(size, dtype=np.int64)
    exps = unifs = np.empty(0)
    while True:
        status = kernels.gw_advance(state, t_max, law.total_rate, law.cdf, exps, unifs, rec_t, rec_k, cap)
        if status == kernels.GW_NEED_RANDOMS:
            exps = g.standard_exponential(RANDOM_BLOCK)
            unifs = g.random(RANDOM_BLOCK)
            state[2] = 0
        elif status == kernels.GW_BUFFER_FULL:
            rec_t = np.concatenate((rec_t, np.empty(len(rec_t))))
            rec_k = np.concatenate((rec_k, np.empty(len(rec_k), dtype=np.int64)))
        elif status == kernels.GW_OVERFLOW:
            raise ConfigurationError(
                f"population exceeded {cap} individuals at t={state[1]:.6g}; reduce t_max or the initial mass",
                ["population_cap"],
            )
        else:
            n = int(state[3])
            return int(state[0]), status == kernels.GW_ABSORBED, rec_t[:n], rec_k[:n]


def simulate_gw(mech, schedule, N, x, t_max, seed=0, key=(), law=None, cap=POPULATION_CAP):
    """Event-driven path of the population on ``[0, t_max]``.

    Returns a :class:`MassPath` whose first row is ``(0, floor(N x))``, then
    one row per birth/death event.
    """
    N = int(N)
    if not t_max >= 0:
        raise ConfigurationError("t_max must be nonnegative", ["t_max"])
    k0 = initial_count(N, x)
    law = law if law is not None else offspring_law(mech, schedule, N)
    g = _rng.stream(seed, "gw", *key)
    _, absorbed, ts, ks = _run(law, k0, float(t_max), g, True, cap)
    t = np.concatenate(([0.0], ts))
    k = np.concatenate(([k0], ks)).astype(np.int64)
    return MassPath(t, k, N, float(x), float(t_max), absorbed or k0 == 0, _rng.seed_record(seed, "gw", *key))


def final_count(law, k0, t, seed, key=(), cap=POPULATION_CAP):
    """Population size at time ``t`` without recording the path."""
    g = _rng.stream(seed, "gw", *key)
    return _run(law, k0, float(t), g, False, cap)[0]


@dataclass(frozen=True)
class LaplaceEstimate:
    N: int
    x: float
    t: float
    lam: float
    estimate: float
    stderr: float
    replications: int
    u_t_oracle: float
    mean_mass: float
    mean_stderr: float

    @property
    def oracle(self):
        """``exp(-x u_t(lambda))``."""
        return math.exp(-self.x * self.u_t_oracle)

    def z_score(self, reference=None):
        ref = self.oracle if reference is None else reference
        return (self.estimate - ref) / self.stderr if self.stderr > 0 else (0.0 if self.estimate == ref else math.inf)

    def to_dict(self):
        return {
            "N": self.N,
            "x": self.x,
            "t": self.t,
            "lambda": self.lam,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "replications": self.replications,
            "u_t_oracle": self.u_t_oracle,
            "mean_mass": self.mean_mass,
            "mean_stderr": self.mean_stderr,
        }


def _final_counts(args):
    law, k0, t, seed, start, stop = args
    return [final_count(law, k0, t, seed, (r,)) for r in range(start, stop)]


def _mean_se(v):
    n = len(v)
    m = math.fsum(v) / n
    var = math.fsum((a - m) ** 2 for a in v) / (n - 1)
    return m, math.sqrt(var / n)


def empirical_laplace_gw(mech, schedule, N, x, t, lam, replications, seed=0, jobs=1):
    """Monte Carlo estimate of ``E exp(-lambda X_t)`` with its standard error.

    Replication ``r`` uses the stream ``("gw", r)``, so the estimate does not
    depend on ``jobs``.
    """
    if replications < MIN_REPLICATIONS:
        raise ConfigurationError(f"need at least {MIN_REPLICATIONS} replications", ["replications"])
    if lam < 0:
        raise ConfigurationError("lambda must be nonnegative", ["lambda"])
    N = int(N)
    k0 = initial_count(N, x)
    law = offspring_law(mech, schedule, N)
    counts = map_ordered(_final_counts, law, k0, t, seed, replications, jobs)
    mass = np.asarray(counts, dtype=float) / N
    est, se = _mean_se(np.exp(-lam * mass).tolist())
    mm, mse = _mean_se(mass.tolist())
    u = 0.0 if t == 0 or lam == 0 else float(u_flow(mech, lam, t))
    return LaplaceEstimate(N, float(x), float(t), float(lam), est, se, int(replications), u, mm, mse)


def birth_death_laplace(N, c, x, t, lam):
    """Exact ``E exp(-lambda X_t)`` for the population with no jump measure and ``b = 0``.

    There each individual splits or dies at rate ``cN`` apiece, a critical
    linear birth-death process with generating function
    ``(beta t (1-s) + s) / (beta t (1-s) + 1)``, ``beta = cN``.
    """
    k0 = initial_count(N, x)
    q = -math.expm1(-lam / N)
    bt = c * N * t * q
    # log of (bt + 1 - q) / (bt + 1), kept accurate for small q
    return math.exp(k0 * math.log1p(-q / (bt + 1.0)))


def write_gw_csv(path, fh):
    """CSV dump with columns ``t_event, k, mass``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t_event", "k", "mass"])
    for t, k in zip(path.t.tolist(), path.k.tolist()):
        w.writerow([repr(t), k, repr(k / path.N)])


def summary_json(est):
    return json.dumps(est.to_dict(), sort_keys=True, indent=2) + "\n"
