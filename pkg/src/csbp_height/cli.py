"""Command-line driver: ``csbp-height <subcommand> [--config PATH] [--seed U64] [--out DIR] [--jobs INT]``.

Exit status: 0 success, 1 a verified claim failed, 2 invalid configuration
(JSON diagnostics on stderr), 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import approx, gw_pop, height, levy_sim
from .config import build_config
from .errors import CSBPError, ConfigurationError, NumericFailure
from .mechanism import psi_delta
from .stats import sample_margin
from .verify import CLAIMS, dumps_report, run_claim

EXIT_OK, EXIT_CLAIM_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="JSON experiment configuration (see schema/config.schema.json)")
    p.add_argument("--seed", type=int, metavar="U64", help="master seed")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--jobs", type=int, metavar="INT", help="worker processes for replications")
    return p


def build_parser():
    common = _common()
    ap = argparse.ArgumentParser(prog="csbp-height", description=__doc__.splitlines()[0], parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate-levy", parents=[common], help="write one truncated Levy path (levy.csv)")
    sub.add_parser("simulate-height", parents=[common], help="write one height path (height.csv)")
    sub.add_parser("simulate-gw", parents=[common], help="write one Galton-Watson mass path (gw.csv)")
    sub.add_parser("build-hn", parents=[common], help="write H^N nodes (hn.csv) and the K_N record (hn.json)")
    v = sub.add_parser("verify", parents=[common], help="run claims and write verify/<claim>.json")
    v.add_argument("claims", nargs="+", metavar="CLAIM", help=f"claim ids or 'all': {', '.join(CLAIMS)}")
    sub.add_parser("report", parents=[common], help="collect verify/*.json into report.json and print a table")
    return ap


def _out_dir(cfg):
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _simulate_levy(cfg):
    mech, sch = cfg.mech(), cfg.schedule()
    path = levy_sim.simulate_levy(mech, sch.delta(cfg.N), cfg.s_max, cfg.grid_step, cfg.seed)
    with open(_out_dir(cfg) / "levy.csv", "w") as fh:
        levy_sim.write_levy_csv(path, fh)
    return EXIT_OK


def _simulate_height(cfg):
    mech, sch = cfg.mech(), cfg.schedule()
    path = levy_sim.simulate_levy(mech, sch.delta(cfg.N), cfg.s_max, cfg.grid_step, cfg.seed)
    with open(_out_dir(cfg) / "height.csv", "w") as fh:
        height.write_height_csv(height.height_on_skeleton(path), fh)
    return EXIT_OK


def _simulate_gw(cfg):
    path = gw_pop.simulate_gw(cfg.mech(), cfg.schedule(), cfg.N, cfg.x, cfg.t_max, cfg.seed)
    with open(_out_dir(cfg) / "gw.csv", "w") as fh:
        gw_pop.write_gw_csv(path, fh)
    return EXIT_OK


def _build_hn(cfg):
    mech, sch = cfg.mech(), cfg.schedule()
    N = cfg.N
    delta = sch.delta(N)
    horizon = max(cfg.s_max, cfg.s) + sample_margin(mech, sch, N, max(cfg.s, 1e-300)) + 2.0 / psi_delta(mech, delta, N)
    smp = approx.sample_poisson(psi_delta(mech, delta, N), horizon, cfg.seed)
    path = levy_sim.simulate_levy(mech, delta, horizon, cfg.grid_step, cfg.seed, extra_times=smp.times)
    hp = height.height_on_skeleton(path)
    hn = approx.build_HN(hp, smp, N)
    out = _out_dir(cfg)
    with open(out / "hn.csv", "w") as fh:
        approx.write_hn_csv(hn, fh)
    (out / "hn.json").write_text(approx.dumps_record(approx.hn_record(hn, cfg.s, hp)))
    return EXIT_OK


def _verify(cfg, claims):
    ids = list(CLAIMS) if "all" in claims else claims
    for c in ids:
        if c not in CLAIMS:
            raise ConfigurationError(f"unknown claim {c!r}", ["claim_id"])
    vdir = _out_dir(cfg) / "verify"
    vdir.mkdir(exist_ok=True)
    status = EXIT_OK
    for c in ids:
        rep = run_claim(c, cfg)
        (vdir / f"{c}.json").write_text(dumps_report(rep))
        print(f"{c}: {'PASS' if rep['passed'] else 'FAIL'}")
        if not rep["passed"]:
            status = EXIT_CLAIM_FAILED
    return status


def _headline(rep):
    for key in ("max_residual", "max_abs_deviation", "max_rel_diff", "u_flow_max_abs_error"):
        if key in rep:
            return f"{key}={rep[key]:.3g}"
    if "stats" in rep:
        return "medians=" + ",".join(f"{s['median']:.3g}" for s in rep["stats"])
    if "families" in rep:
        return "p=" + ",".join(f"{v['ks']['p_value']:.3g}" for v in rep["families"].values())
    if "rows" in rep:
        return f"last_ratio={rep['rows'][-1]['ratio']:.5f}"
    return ""


def _report(cfg):
    vdir = Path(cfg.out) / "verify"
    reps = [json.loads(p.read_text()) for p in sorted(vdir.glob("*.json"))] if vdir.is_dir() else []
    table = [{"claim_id": r["claim_id"], "passed": r["passed"], "headline": _headline(r)} for r in reps]
    (_out_dir(cfg) / "report.json").write_text(json.dumps({"claims": table}, sort_keys=True, indent=2) + "\n")
    for row in table:
        print(f"{row['claim_id']:16s} {'PASS' if row['passed'] else 'FAIL'}  {row['headline']}")
    return EXIT_OK if all(r["passed"] for r in table) else EXIT_CLAIM_FAILED


def _diagnostic(kind, exc):
    payload = {"error": kind, "message": str(exc), "violations": getattr(exc, "violations", [])}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "out": args.out, "jobs": args.jobs}
    try:
        cfg = build_config(args.config, overrides)
        cmd = args.command
        if cmd == "simulate-levy":
            return _simulate_levy(cfg)
        if cmd == "simulate-height":
            return _simulate_height(cfg)
        if cmd == "simulate-gw":
            return _simulate_gw(cfg)
        if cmd == "build-hn":
            return _build_hn(cfg)
        if cmd == "verify":
            return _verify(cfg, args.claims)
        return _report(cfg)
    except NumericFailure as exc:
        _diagnostic("numeric_failure", exc)
        return EXIT_NUMERIC
    except (CSBPError, ValueError) as exc:
        _diagnostic("invalid_config", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
