"""YAML run configuration with a strict schema.

A config has four top-level blocks::

    market:
      horizon: 1.0
      s0_true: 100.0
      beta_true: 1.0
      seed: 0
    agents:
      - {x0: 2.0, mu: 15.0, nu2: 3.0, kappa: 1.0, eta_tem_est: 0.2, eta_tem_true: 0.5,
         eta_per_est: 0.5, eta_per_true: 0.5, s0_belief: 100.0}
    policy:        # optional
      base_steps: 10000
      epsilon: 1.0e-6
    run:           # optional
      output_dir: out
      paths: 1000

Unknown keys are errors and every error carries the offending field and line.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError, DomainError
from .model import AgentSpec, MarketSpec
from .simulator import GridPolicy

log = logging.getLogger(__name__)

MARKET_KEYS = {"horizon": float, "s0_true": float, "beta_true": float, "seed": int}
AGENT_REQUIRED = {"x0": float, "mu": float, "nu2": float, "kappa": float,
                  "eta_tem_est": float, "eta_tem_true": float, "eta_per_true": float}
AGENT_OPTIONAL = {"eta_per_est": float, "s0_belief": float}
POLICY_KEYS = {"base_steps": int, "refinement": float, "epsilon": float, "substeps": int,
               "levels": int}
RUN_KEYS = {"output_dir": str, "paths": int, "rho": list, "inner": int, "plot": bool}
TOP_KEYS = {"market", "agents", "policy", "run"}


@dataclass(frozen=True)
class RunOptions:
    output_dir: str = "out"
    paths: int = 1000
    # fractions of t_e
    rho: tuple = (0.1, 0.03, 0.01)
    inner: int = 32
    plot: bool = True


@dataclass(frozen=True)
class RunConfig:
    market: MarketSpec
    policy: GridPolicy = field(default_factory=GridPolicy)
    run: RunOptions = field(default_factory=RunOptions)


class _Lined(dict):
    """Mapping that remembers the source line of each key."""
    lines: dict
    line: Optional[int] = None


class _LineLoader(yaml.SafeLoader):
    def construct_mapping(self, node, deep=False):
        out = _Lined(super().construct_mapping(node, deep=True))
        out.lines = {self.construct_object(k): k.start_mark.line + 1 for k, _ in node.value}
        out.line = node.start_mark.line + 1
        return out

    def construct_sequence(self, node, deep=False):
        return super().construct_sequence(node, deep=True)


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG,
                            _LineLoader.construct_mapping)


def _line(block, key=None):
    if isinstance(block, _Lined):
        if key is not None and key in block.lines:
            return block.lines[key]
        return block.line
    return None


def _coerce(value, kind, name, line):
    if kind is float:
        # YAML 1.1 reads "1e-6" as a string; accept anything float() accepts.
        if isinstance(value, bool):
            raise ConfigError("expected a number, got a boolean", name, line)
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        raise ConfigError(f"expected a number, got {value!r}", name, line)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", name, line)
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", name, line)
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", name, line)
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", name, line)
        return tuple(_coerce(v, float, name, line) for v in value)
    raise TypeError(kind)


def _block(raw, schema, prefix, required=()):
    if not isinstance(raw, dict):
        raise ConfigError("expected a mapping", prefix, _line(raw))
    out = {}
    for key, value in raw.items():
        name = f"{prefix}.{key}"
        if key not in schema:
            raise ConfigError("unknown key", name, _line(raw, key))
        out[key] = _coerce(value, schema[key], name, _line(raw, key))
    missing = [k for k in required if k not in out]
    if missing:
        raise ConfigError("missing required key", f"{prefix}.{missing[0]}", _line(raw))
    return out


def _agent(raw, i):
    prefix = f"agents[{i}]"
    vals = _block(raw, {**AGENT_REQUIRED, **AGENT_OPTIONAL}, prefix, AGENT_REQUIRED)
    if vals["nu2"] > 0:
        for key in AGENT_OPTIONAL:
            if key not in vals:
                raise ConfigError("required for uncertain agents (nu2 > 0)",
                                  f"{prefix}.{key}", _line(raw))
    else:
        for key in AGENT_OPTIONAL:
            if key in vals:
                log.info("%s.%s is ignored for a certain agent (nu2 = 0)", prefix, key)
                del vals[key]
    try:
        return AgentSpec(index=i + 1, **vals)
    except DomainError as exc:
        name = _field_in(str(exc), vals)
        raise ConfigError(str(exc), f"{prefix}.{name}" if name else prefix,
                          _line(raw, name) if name else _line(raw)) from exc


def _field_in(message, vals):
    for key in sorted(vals, key=len, reverse=True):
        if key in message:
            return key
    return None


def parse_config(text: str) -> RunConfig:
    try:
        raw = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None) from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", line=1)
    for key in raw:
        if key not in TOP_KEYS:
            raise ConfigError("unknown key", key, _line(raw, key))
    for key in ("market", "agents"):
        if key not in raw:
            raise ConfigError("missing required block", key)
    mvals = _block(raw["market"], MARKET_KEYS, "market",
                   required=("horizon", "s0_true", "beta_true"))
    agents_raw = raw["agents"]
    if not isinstance(agents_raw, list) or not agents_raw:
        raise ConfigError("expected a non-empty list of agents", "agents", _line(raw, "agents"))
    agents = tuple(_agent(a, i) for i, a in enumerate(agents_raw))
    try:
        market = MarketSpec(agents=agents, **mvals)
    except DomainError as exc:
        name = _field_in(str(exc), mvals)
        field_name = f"market.{name}" if name else "agents"
        line = _line(raw["market"], name) if name else _line(raw, "agents")
        raise ConfigError(str(exc), field_name, line) from exc

    policy = GridPolicy()
    if "policy" in raw and raw["policy"] is not None:
        pvals = _block(raw["policy"], POLICY_KEYS, "policy")
        try:
            policy = GridPolicy(**pvals)
        except DomainError as exc:
            name = _field_in(str(exc), pvals)
            raise ConfigError(str(exc), f"policy.{name}" if name else "policy",
                              _line(raw["policy"], name)) from exc
        if policy.epsilon > 1e-3 * market.horizon:
            raise ConfigError("must be <= 1e-3 * horizon", "policy.epsilon",
                              _line(raw["policy"], "epsilon"))
    run = RunOptions()
    if "run" in raw and raw["run"] is not None:
        rvals = _block(raw["run"], RUN_KEYS, "run")
        run = RunOptions(**rvals)
    return RunConfig(market=market, policy=policy, run=run)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text)


def _plain(value):
    return list(value) if isinstance(value, tuple) else value


def config_to_dict(cfg: RunConfig) -> dict:
    m = cfg.market
    agents = []
    for a in m.agents:
        entry = {k: getattr(a, k) for k in {**AGENT_REQUIRED, **AGENT_OPTIONAL}}
        if not a.uncertain:
            entry = {k: v for k, v in entry.items() if v is not None}
        agents.append(entry)
    return {
        "market": {k: getattr(m, k) for k in MARKET_KEYS},
        "agents": agents,
        "policy": {f.name: getattr(cfg.policy, f.name) for f in fields(GridPolicy)},
        "run": {f.name: _plain(getattr(cfg.run, f.name)) for f in fields(RunOptions)},
    }


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)
