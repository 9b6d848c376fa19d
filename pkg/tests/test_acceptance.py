"""Acceptance criteria at full scale, one printed PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are printed
even without ``-s``.
"""

import json
import time

import pytest

from csbp_height.cli import main
from csbp_height.config import build_config
from csbp_height.verify import run_claim

pytestmark = pytest.mark.slow

N_GRID = [50, 200, 800]


@pytest.fixture
def report(capsys):
    def emit(number, title, passed, detail, started):
        with capsys.disabled():
            print(f"\nCRITERION {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail} ({time.perf_counter() - started:.1f} s)")

    return emit


def _cfg(**over):
    return build_config(overrides=over, environ={})


def test_c1_construction_identity(report):
    t0 = time.perf_counter()
    cfg = _cfg(claims={"identity-ega": {"families": ["none", "atoms", "power_law"], "N_grid": [10, 100], "instances": 100}})
    rep = run_claim("identity-ega", cfg)
    elapsed = time.perf_counter() - t0
    ok = rep["passed"] and rep["max_residual"] <= 1e-10 and elapsed < 60
    report(1, "H^N(K_N(s)) = H(tau_[alpha s])", ok, f"max residual {rep['max_residual']:.2e}", t0)
    assert ok


def test_c2_overshoot_exponential(report):
    t0 = time.perf_counter()
    cfg = _cfg(claims={"gamma-tau": {"families": ["none", "power_law"], "N": 100, "replications": 10_000}})
    rep = run_claim("gamma-tau", cfg)
    elapsed = time.perf_counter() - t0
    ps = {k: v["ks"]["p_value"] for k, v in rep["families"].items()}
    ok = all(p > 0.01 for p in ps.values()) and elapsed < 120
    report(2, "Gamma(tau_1) ~ Exp(N), KS n=1e4", ok, ", ".join(f"{k} p={p:.3f}" for k, p in ps.items()), t0)
    assert ok


def test_c3_feller_oracle(report):
    t0 = time.perf_counter()
    rep = run_claim("feller-laplace", _cfg())
    elapsed = time.perf_counter() - t0
    ok = rep["u_flow_max_abs_error"] <= 1e-8 and abs(rep["z_score"]) <= 3 and elapsed < 300
    detail = f"u_t error {rep['u_flow_max_abs_error']:.2e}, Laplace z={rep['z_score']:+.2f}"
    report(3, "Feller u_t and GW Laplace at N=200", ok, detail, t0)
    assert ok


def test_c4_rate_table(report):
    t0 = time.perf_counter()
    rep = run_claim("rate-table", _cfg())
    fams = {r["family"] for r in rep["rows"]}
    Ns = {r["N"] for r in rep["rows"]}
    ok = rep["max_rel_diff"] <= 1e-9 and len(fams) == 3 and Ns == {100, 1000, 10000}
    report(4, "zero-offspring rate two ways", ok, f"max rel diff {rep['max_rel_diff']:.2e}", t0)
    assert ok


def test_c5_lln_trends(report):
    t0 = time.perf_counter()
    cfg = _cfg(N_grid=N_GRID, s=1.0, replications=1000)
    tau = run_claim("lln-tau", cfg)
    kn = run_claim("lln-kn", cfg)
    elapsed = time.perf_counter() - t0
    mt = [s["median"] for s in tau["stats"]]
    mk = [s["median"] for s in kn["stats"]]
    dec = lambda m: all(b < a for a, b in zip(m, m[1:]))  # noqa: E731
    ok = dec(mt) and dec(mk) and elapsed < 600
    detail = "tau medians " + ", ".join(f"{m:.4f}" for m in mt) + "; K_N medians " + ", ".join(f"{m:.4f}" for m in mk)
    report(5, "medians of |tau - s| and |K_N(s) - s| decrease", ok, detail, t0)
    assert ok


def test_c6_supnorm_trend(report):
    t0 = time.perf_counter()
    cfg = _cfg(N_grid=N_GRID, s_max=1.0, claims={"supnorm": {"replications": 200}})
    rep = run_claim("supnorm", cfg)
    elapsed = time.perf_counter() - t0
    m = [s["median"] for s in rep["stats"]]
    ok = all(b < a for a, b in zip(m, m[1:])) and elapsed < 900
    report(6, "median sup|H^N - H_ref| decreases", ok, ", ".join(f"{v:.4f}" for v in m) + f" [{rep['verdict']}]", t0)
    assert ok


def test_c7_height_oracle(report):
    t0 = time.perf_counter()
    rep = run_claim("height-oracle", _cfg())
    exact = all(f["cH"] == f["expected"] for f in rep["fixtures"])
    ok = rep["max_abs_deviation"] <= 1e-12 and rep["tested"] >= 200 and exact
    report(7, "stack = brute force, hand fixtures", ok, f"{rep['tested']} paths, max dev {rep['max_abs_deviation']:.1e}", t0)
    assert ok


def test_c8_psi_ratio(report):
    t0 = time.perf_counter()
    rep = run_claim("psi-ratio", _cfg())
    last = rep["rows"][-1]
    ok = last["N"] == 10_000 and 0.98 <= last["ratio"] <= 1.02
    report(8, "psi_delta_N(N) / (c N^2) at N=1e4", ok, f"{last['ratio']:.5f}", t0)
    assert ok


def test_c9_determinism(tmp_path, report, capsys):
    t0 = time.perf_counter()
    claims = ["identity-ega", "gamma-tau", "rate-table", "height-oracle"]
    outs = []
    for i in range(2):
        code = main(["verify", *claims, "--seed", "12345", "--out", str(tmp_path / f"run{i}")])
        assert code == 0
        outs.append({c: (tmp_path / f"run{i}" / "verify" / f"{c}.json").read_bytes() for c in claims})
    capsys.readouterr()
    ok = outs[0] == outs[1] and all(json.loads(b)["seed"] == 12345 for b in outs[0].values())
    report(9, "verify twice with one seed is byte-identical", ok, f"{len(claims)} reports compared", t0)
    assert ok
