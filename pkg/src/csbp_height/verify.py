"""Registry of verifiable claims run by ``csbp-height verify``.

Each claim takes an :class:`~csbp_height.config.ExperimentConfig` plus its
own parameters (defaults below, overridable under ``claims.<id>`` in the
config) and returns a JSON-ready report with a boolean ``passed``.  Reports
carry no timings, so equal inputs give byte-identical files.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import rng as _rng
from .approx import k1_term, verify_identity, IDENTITY_TOL
from .errors import ConfigurationError
from .gw_pop import birth_death_laplace, empirical_laplace_gw
from .height import height_brute_force, height_on_skeleton
from .levy_sim import KIND_GRID, KIND_JUMP, LevyPath, simulate_levy
from .mechanism import (
    BranchingMechanism,
    JumpMeasure,
    default_schedule,
    psi_delta,
    psi_inverse,
    u_flow,
)
from .stats import (
    approx_instance,
    gamma_tau_test,
    lln_KN_check,
    lln_tau_check,
    riemann_sum_check,
    sample_margin,
    smoothed_indicator,
    supnorm_convergence,
    trend_report,
)

FAMILIES = {
    "none": lambda: BranchingMechanism(0.0, 1.0, JumpMeasure.none()),
    "atoms": lambda: BranchingMechanism(0.0, 1.0, JumpMeasure.atomic([(0.5, 1.0), (2.0, 0.5)])),
    "power_law": lambda: BranchingMechanism(0.0, 1.0, JumpMeasure.power_law(1.0, 1.5)),
    "power_law_cutoff": lambda: BranchingMechanism(0.0, 1.0, JumpMeasure.power_law(1.0, 1.5, cutoff=5.0)),
    "tempered": lambda: BranchingMechanism(0.0, 1.0, JumpMeasure.tempered(1.0, 1.5, 1.0)),
}


def families(cfg, names):
    """``(name, mechanism, schedule)`` for preset names; ``"config"`` means the configured mechanism."""
    out = []
    for name in names:
        if name == "config":
            out.append((name, cfg.mech(), cfg.schedule()))
        elif name in FAMILIES:
            m = FAMILIES[name]()
            out.append((name, m, default_schedule(m)))
        else:
            raise ConfigurationError(f"unknown mechanism family {name!r}; choose from {sorted(FAMILIES)} or 'config'", ["claims"])
    return out


# --------------------------------------------------------------------------
# claims


def _identity(cfg, p):
    combos = [(name, m, sch, N) for name, m, sch in families(cfg, p["families"]) for N in p["N_grid"]]
    s_vals = [float(s) for s in p["s_values"]]
    worst = {}
    k1_ok = True
    for i in range(p["instances"]):
        name, mech, sch, N = combos[i % len(combos)]
        s_hi = max(s_vals)
        horizon = s_hi + sample_margin(mech, sch, N, s_hi) + 2.0 / psi_delta(mech, sch.delta(N), N)
        ap, hps, _ = approx_instance(mech, sch, N, horizon, cfg.seed, (i,))
        res = max(verify_identity(ap, s, hps[0]).residual for s in s_vals)
        k1, bound = k1_term(ap, hps[0], s_hi)
        k1_ok &= abs(k1) <= bound * (1 + 1e-12) + 1e-15
        key = f"{name}/N={N}"
        cell = worst.setdefault(key, {"instances": 0, "max_residual": 0.0})
        cell["instances"] += 1
        cell["max_residual"] = max(cell["max_residual"], res)
    overall = max(c["max_residual"] for c in worst.values())
    return {"passed": overall <= p["tol"] and bool(k1_ok), "max_residual": overall, "k1_bound_holds": bool(k1_ok), "cells": worst}


def _gamma_tau(cfg, p):
    out = {}
    ok = True
    for name, mech, sch in families(cfg, p["families"]):
        N = p["N"]
        rep = gamma_tau_test(mech, sch, N, p["replications"], cfg.seed, jobs=cfg.jobs)
        mis = gamma_tau_test(mech, sch, N, p["replications"], cfg.seed, reference_rate=p["misfit_factor"] * N, jobs=cfg.jobs)
        cell = rep.to_dict()
        cell["misfit_p_value"] = mis.ks.p_value
        out[name] = cell
        ok &= rep.ks.p_value > p["p_min"] and mis.ks.p_value < p["misfit_p_max"]
    return {"passed": bool(ok), "families": out}


def _feller(cfg, p):
    c = float(p.get("c") or cfg.mech().c)
    mech = BranchingMechanism(0.0, c, JumpMeasure.none())
    err = 0.0
    for lam in p["lambda_grid"]:
        ts = np.asarray(p["t_grid"], dtype=float)
        got = np.asarray(u_flow(mech, lam, ts))
        err = max(err, float(np.max(np.abs(got - lam / (1.0 + c * lam * ts)))))
    est = empirical_laplace_gw(mech, default_schedule(mech), p["N"], p["x"], p["t"], p["lambda"], p["replications"], cfg.seed, cfg.jobs)
    exact = birth_death_laplace(p["N"], c, p["x"], p["t"], p["lambda"])
    z = est.z_score()
    z_mean = (est.mean_mass - math.floor(p["N"] * p["x"]) / p["N"]) / est.mean_stderr
    passed = err <= p["u_tol"] and abs(z) <= p["z_max"]
    return {
        "passed": bool(passed),
        "u_flow_max_abs_error": err,
        "laplace": est.to_dict(),
        "oracle": est.oracle,
        "z_score": z,
        "birth_death_exact": exact,
        "mean_z_score": z_mean,
    }


def _rate_table(cfg, p):
    rows = []
    worst = worst_inv = 0.0
    for name, mech, sch in families(cfg, p["families"]):
        for N in p["N_grid"]:
            d = sch.delta(N)
            direct = psi_delta(mech, d, N) / N
            expanded = mech.c * N + mech.mu.first_moment(d) - mech.mu.loss_integral(N, d) / N
            rel = abs(direct - expanded) / abs(direct)
            inv = abs(psi_inverse(mech, psi_delta(mech, d, N), delta=d) - N) / N
            worst, worst_inv = max(worst, rel), max(worst_inv, inv)
            rows.append({"family": name, "N": N, "delta": d, "rate0_direct": direct, "rate0_expanded": expanded, "rel_diff": rel, "inverse_rel_err": inv})
    return {"passed": worst <= p["tol"] and worst_inv <= p["inverse_tol"], "max_rel_diff": worst, "max_inverse_rel_err": worst_inv, "rows": rows}


def _trend(fn, extra=()):
    def run(cfg, p):
        mech, sch = cfg.mech(), cfg.schedule()
        args = [p[k] for k in extra]
        rep = fn(mech, sch, p["N_grid"], *args, p["replications"], cfg.seed, jobs=cfg.jobs)
        d = rep.to_dict()
        d["passed"] = rep.strictly_decreasing
        return d

    return run


def _supnorm(cfg, p):
    mech, sch = cfg.mech(), cfg.schedule()
    d_ref = p["delta_ref"]
    if d_ref is None:
        d_ref = min(sch.delta(N) for N in p["N_grid"]) / 10.0
    rep = supnorm_convergence(mech, sch, p["N_grid"], p["s_max"], d_ref, p["replications"], cfg.seed, jobs=cfg.jobs)
    d = rep.to_dict()
    d["passed"] = rep.strictly_decreasing
    return d


def fixture_path(drift, jump, r=1.0, s_max=1.5, step=0.5):
    """Deterministic drift-plus-one-jump skeleton (``c = 0``): ``Y(s) = drift*s + jump*1{s >= r}``."""
    t = np.arange(0.0, s_max + step / 2, step)
    jumps = np.where(np.isclose(t, r), float(jump), 0.0)
    y = drift * t + np.cumsum(jumps)
    kind = np.where(jumps > 0, KIND_JUMP, KIND_GRID).astype(np.int8)
    return LevyPath(t, y, y - jumps, kind, jumps, delta=jump, s_max=s_max, drift=drift, c=0.0)


HAND_FIXTURES = (
    (1.0, 1.0, 1.5),  # drift +1, jump 1: cH(1.5) = 1.5
    (-1.0, 2.0, 0.0),  # drift -1, jump 2: cH(1.5) = 0
)


def _height_oracle(cfg, p):
    g = _rng.stream(cfg.seed, "fixtures")
    worst = 0.0
    tested = 0
    for i in range(p["instances"]):
        alpha = float(g.uniform(1.1, 1.9))
        mech = BranchingMechanism(float(g.uniform(-1, 1)), float(g.uniform(0.1, 2.0)), JumpMeasure.power_law(float(g.uniform(0.2, 2.0)), alpha))
        # choose delta so the expected jump count is at most max_jumps / 2
        delta = (mech.mu.C / alpha / (p["max_jumps"] / 2.0)) ** (1.0 / alpha)
        path = simulate_levy(mech, delta, 1.0, grid_step=2.0 / p["max_points"], seed=cfg.seed, key=(i,))
        if path.is_jump.sum() > p["max_jumps"]:
            continue
        hp = height_on_skeleton(path)
        tested += 1
        worst = max(worst, float(np.max(np.abs(hp.cH - height_brute_force(path)))))
    fixtures = []
    for drift, z, expected in HAND_FIXTURES:
        hp = height_on_skeleton(fixture_path(drift, z))
        fixtures.append({"drift": drift, "jump": z, "expected": expected, "cH": float(hp.cH[-1])})
    exact = all(f["cH"] == f["expected"] for f in fixtures)
    return {"passed": worst <= p["tol"] and exact, "max_abs_deviation": worst, "tested": tested, "fixtures": fixtures}


def _psi_ratio(cfg, p):
    (_, mech, sch), = families(cfg, [p["family"]])
    rows = [{"N": N, "ratio": psi_delta(mech, sch.delta(N), N) / (mech.c * N * N)} for N in p["N_grid"]]
    lo, hi = p["band"]
    last = rows[-1]["ratio"]
    return {"passed": lo <= last <= hi, "rows": rows, "theta": sch.theta}


def _riemann_block(mech, sch, N, s, eps, seed, reps):
    g = smoothed_indicator(eps)
    gaps, counting = [], []
    for r in range(reps):
        horizon = s + sample_margin(mech, sch, N, s)
        _, hps, smp = approx_instance(mech, sch, N, horizon, seed, (N, r))
        lhs, rhs = riemann_sum_check(g, hps[0], smp, s)
        gaps.append(abs(lhs - rhs))
        one = riemann_sum_check(lambda y: np.ones_like(y), hps[0], smp, s)
        counting.append(abs(one[0] - math.floor(smp.rate * s) / smp.rate) + abs(one[1] - s))
    return gaps, max(counting)


def _riemann(cfg, p):
    mech, sch = cfg.mech(), cfg.schedule()
    per_N, count_err = [], 0.0
    for N in p["N_grid"]:
        gaps, ce = _riemann_block(mech, sch, N, p["s"], p["eps"], cfg.seed, p["replications"])
        per_N.append(gaps)
        count_err = max(count_err, ce)
    rep = trend_report("riemann", p["N_grid"], per_N, {"s": p["s"], "eps": p["eps"], "replications": p["replications"], "seed": cfg.seed})
    d = rep.to_dict()
    d["counting_identity_error"] = count_err
    d["passed"] = rep.strictly_decreasing and count_err <= 1e-12
    return d


def _defaults(cfg):
    return {
        "identity-ega": {"families": ["config"], "N_grid": [10, 100], "instances": 100, "s_values": [0.25, 0.5, 1.0], "tol": IDENTITY_TOL},
        "gamma-tau": {"families": ["config"], "N": 100, "replications": 10000, "misfit_factor": 2.0, "p_min": 0.01, "misfit_p_max": 1e-4},
        "feller-laplace": {
            "N": 200,
            "x": 0.5,
            "t": 0.5,
            "lambda": 1.0,
            "replications": 10000,
            "lambda_grid": [0.1, 0.5, 1.0, 2.0, 5.0, 10.0],
            "t_grid": [0.0, 0.1, 0.5, 1.0, 2.0, 5.0],
            "u_tol": 1e-8,
            "z_max": 3.0,
            "c": None,
        },
        "rate-table": {"families": ["atoms", "power_law", "tempered"], "N_grid": [100, 1000, 10000], "tol": 1e-9, "inverse_tol": 1e-8},
        "lln-tau": {"N_grid": list(cfg.N_grid), "s": cfg.s, "replications": cfg.replications},
        "lln-kn": {"N_grid": list(cfg.N_grid), "s": cfg.s, "replications": cfg.replications},
        "supnorm": {"N_grid": list(cfg.N_grid), "s_max": cfg.s_max, "replications": 200, "delta_ref": cfg.delta_ref},
        "height-oracle": {"instances": 200, "max_jumps": 30, "max_points": 1000, "tol": 1e-12},
        "psi-ratio": {"family": "power_law", "N_grid": [10, 100, 1000, 10000], "band": [0.98, 1.02]},
        "riemann": {"N_grid": list(cfg.N_grid), "s": cfg.s, "eps": 0.1, "replications": 50},
    }


CLAIMS = {
    "identity-ega": _identity,
    "gamma-tau": _gamma_tau,
    "feller-laplace": _feller,
    "rate-table": _rate_table,
    "lln-tau": _trend(lln_tau_check, ("s",)),
    "lln-kn": _trend(lln_KN_check, ("s",)),
    "supnorm": _supnorm,
    "height-oracle": _height_oracle,
    "psi-ratio": _psi_ratio,
    "riemann": _riemann,
}


def run_claim(claim_id, cfg):
    """Run one claim and return its report dict (``claim_id``, ``params``, ``passed``, results)."""
    if claim_id not in CLAIMS:
        raise ConfigurationError(f"unknown claim {claim_id!r}; choose from {sorted(CLAIMS)} or 'all'", ["claim_id"])
    params = cfg.claim_params(claim_id, _defaults(cfg)[claim_id])
    body = CLAIMS[claim_id](cfg, params)
    return {"claim_id": claim_id, "seed": cfg.seed, "mechanism": cfg.mechanism, "theta": cfg.theta, "params": params, **body}


def _plain(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps_report(rep):
    return json.dumps(rep, sort_keys=True, indent=2, default=_plain) + "\n"
