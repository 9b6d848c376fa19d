"""Experiment configuration: JSON file, environment overrides, validation.

Precedence is defaults < config file < ``CSBP_HEIGHT_*`` environment
variables < explicit overrides (command-line flags).  The structure is
checked against ``schema/config.schema.json``; the mechanism is then checked
against assumptions (H) and (A) before anything runs.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from importlib import resources

import jsonschema

from .errors import ConfigurationError
from .mechanism import BranchingMechanism, TruncationSchedule, default_schedule

ENV_PREFIX = "CSBP_HEIGHT_"


def load_schema():
    return json.loads(resources.files(__package__).joinpath("schema/config.schema.json").read_text())


@dataclass
class ExperimentConfig:
    mechanism: dict = field(default_factory=lambda: {"b": 0.0, "c": 1.0, "mu": {"variant": "none"}})
    theta: float | None = None
    N: int = 100
    N_grid: list = field(default_factory=lambda: [50, 200, 800])
    x: float = 1.0
    s: float = 1.0
    s_max: float = 1.0
    t_max: float = 1.0
    grid_step: float | None = None
    delta_ref: float | None = None
    lam: float = 1.0
    replications: int = 1000
    seed: int = 0
    out: str = "out"
    jobs: int = 1
    claims: dict = field(default_factory=dict)

    def mech(self):
        return BranchingMechanism.from_dict(self.mechanism)

    def schedule(self):
        if self.theta is None:
            return default_schedule(self.mech())
        return TruncationSchedule(float(self.theta))

    def claim_params(self, claim_id, defaults):
        p = dict(defaults)
        p.update(self.claims.get(claim_id, {}))
        return p

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


_JSON_TO_FIELD = {"lambda": "lam"}


def _parse_env(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def env_overrides(environ=None):
    """Config fields found in ``CSBP_HEIGHT_<FIELD>`` variables."""
    environ = os.environ if environ is None else environ
    names = set(load_schema()["properties"])
    out = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):]
        match = next((n for n in names if n.upper() == name.upper()), None)
        if match is not None:
            out[match] = _parse_env(raw)
    return out


def build_config(path=None, overrides=None, environ=None):
    """Merge file, environment and ``overrides`` and validate the result."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}", ["config"]) from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object", ["config"])
    data.update(env_overrides(environ))
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: [str(p) for p in e.path])
    if errors:
        raise ConfigurationError(
            "config does not match the schema",
            [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors],
        )
    cfg = ExperimentConfig(**{_JSON_TO_FIELD.get(k, k): v for k, v in data.items()})
    validate(cfg)
    return cfg


def validate(cfg):
    """Check assumptions (H) and (A); raise :class:`ConfigurationError` listing the violated ones."""
    mech = cfg.mech()  # (H) is enforced by the mechanism constructor
    sched = cfg.schedule()
    sched.assumption_a(mech, sorted(cfg.N_grid))
    return mech, sched
