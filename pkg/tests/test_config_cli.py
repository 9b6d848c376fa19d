import json

import pytest

from csbp_height.cli import EXIT_CLAIM_FAILED, EXIT_CONFIG, EXIT_OK, main
from csbp_height.config import build_config, env_overrides
from csbp_height.errors import ConfigurationError

SMALL_CLAIMS = {
    "identity-ega": {"instances": 6},
    "gamma-tau": {"N": 20, "replications": 300},
}


def _write(tmp_path, **cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


class TestConfig:
    def test_defaults(self):
        cfg = build_config(environ={})
        assert cfg.N == 100 and cfg.mech().c == 1.0

    def test_precedence(self, tmp_path):
        path = _write(tmp_path, seed=1, N=50)
        cfg = build_config(path, {"seed": 3}, environ={"CSBP_HEIGHT_SEED": "2", "CSBP_HEIGHT_N": "70"})
        assert cfg.seed == 3 and cfg.N == 70

    def test_env_parsing(self):
        env = {"CSBP_HEIGHT_N_GRID": "[10, 20]", "CSBP_HEIGHT_OUT": "somewhere", "OTHER": "1"}
        assert env_overrides(env) == {"N_grid": [10, 20], "out": "somewhere"}

    def test_lambda_key(self, tmp_path):
        cfg = build_config(_write(tmp_path, **{"lambda": 2.5}), environ={})
        assert cfg.lam == 2.5 and cfg.to_dict()["lambda"] == 2.5

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc:
            build_config(_write(tmp_path, bogus=1), environ={})
        assert any("bogus" in v for v in exc.value.violations)

    def test_assumption_h(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc:
            build_config(_write(tmp_path, mechanism={"b": 0, "c": 0, "mu": {"variant": "none"}}), environ={})
        assert "H" in exc.value.violations

    def test_assumption_a(self, tmp_path):
        mech = {"b": 0, "c": 1, "mu": {"variant": "power_law", "C": 1.0, "alpha": 1.5}}
        with pytest.raises(ConfigurationError) as exc:
            build_config(_write(tmp_path, mechanism=mech, theta=1.0), environ={})
        assert exc.value.violations == ["A"]
        assert build_config(_write(tmp_path, mechanism=mech), environ={}).schedule().theta == pytest.approx(1 / 3)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            build_config(str(tmp_path / "nope.json"), environ={})


def _run(tmp_path, capsys, *argv, **cfg):
    cfg.setdefault("out", str(tmp_path / "out"))
    code = main([*argv, "--config", _write(tmp_path, **cfg)])
    return code, capsys.readouterr()


class TestCli:
    def test_invalid_config_exit(self, tmp_path, capsys):
        code, cap = _run(tmp_path, capsys, "simulate-levy", mechanism={"b": 0, "c": 0})
        assert code == EXIT_CONFIG
        diag = json.loads(cap.err)
        assert diag["error"] == "invalid_config" and "H" in diag["violations"]

    def test_simulate_gw_t_zero(self, tmp_path, capsys):
        code, _ = _run(tmp_path, capsys, "simulate-gw", N=200, x=0.5, t_max=0.0)
        assert code == EXIT_OK
        rows = (tmp_path / "out" / "gw.csv").read_text().splitlines()
        assert rows == ["t_event,k,mass", "0.0,100,0.5"]

    @pytest.mark.parametrize("cmd, name", [("simulate-levy", "levy.csv"), ("simulate-height", "height.csv")])
    def test_simulations_write(self, tmp_path, capsys, cmd, name):
        code, _ = _run(tmp_path, capsys, cmd, s_max=0.5, grid_step=0.01, N=50)
        assert code == EXIT_OK and (tmp_path / "out" / name).stat().st_size > 0

    def test_build_hn(self, tmp_path, capsys):
        code, _ = _run(tmp_path, capsys, "build-hn", N=20, s=0.5, s_max=0.5)
        assert code == EXIT_OK
        rec = json.loads((tmp_path / "out" / "hn.json").read_text())
        assert rec["identity_residual"] <= 1e-10

    def test_verify_identity(self, tmp_path, capsys):
        code, cap = _run(tmp_path, capsys, "verify", "identity-ega", claims=SMALL_CLAIMS)
        assert code == EXIT_OK and "identity-ega: PASS" in cap.out
        rep = json.loads((tmp_path / "out" / "verify" / "identity-ega.json").read_text())
        assert rep["max_residual"] <= 1e-10

    def test_verify_gamma_byte_identical(self, tmp_path, capsys):
        outs = []
        for i in range(2):
            code, _ = _run(tmp_path, capsys, "verify", "gamma-tau", claims=SMALL_CLAIMS, seed=7, out=str(tmp_path / f"o{i}"))
            assert code == EXIT_OK
            outs.append((tmp_path / f"o{i}" / "verify" / "gamma-tau.json").read_bytes())
        assert outs[0] == outs[1]

    def test_seed_flag(self, tmp_path, capsys):
        code = main(["verify", "gamma-tau", "--config", _write(tmp_path, claims=SMALL_CLAIMS), "--seed", "11", "--out", str(tmp_path / "o")])
        capsys.readouterr()
        assert code == EXIT_OK
        assert json.loads((tmp_path / "o" / "verify" / "gamma-tau.json").read_text())["seed"] == 11

    def test_failed_claim_exit(self, tmp_path, capsys):
        claims = {"gamma-tau": {"N": 20, "replications": 300, "p_min": 1.1}}
        code, cap = _run(tmp_path, capsys, "verify", "gamma-tau", claims=claims)
        assert code == EXIT_CLAIM_FAILED and "gamma-tau: FAIL" in cap.out

    def test_unknown_claim(self, tmp_path, capsys):
        code, _ = _run(tmp_path, capsys, "verify", "nope")
        assert code == EXIT_CONFIG

    def test_report(self, tmp_path, capsys):
        _run(tmp_path, capsys, "verify", "identity-ega", claims=SMALL_CLAIMS)
        code, cap = _run(tmp_path, capsys, "report")
        assert code == EXIT_OK and "identity-ega" in cap.out
        table = json.loads((tmp_path / "out" / "report.json").read_text())["claims"]
        assert table[0]["passed"] is True


def test_numeric_failure_exit(tmp_path, capsys, monkeypatch):
    from csbp_height import cli
    from csbp_height.errors import NumericFailure

    def boom(cfg):
        raise NumericFailure("quadrature diverged")

    monkeypatch.setattr(cli, "_simulate_levy", boom)
    code, cap = _run(tmp_path, capsys, "simulate-levy")
    assert code == cli.EXIT_NUMERIC and json.loads(cap.err)["error"] == "numeric_failure"
