import json
from pathlib import Path

import pytest
from hypothesis import given, settings

from flashsim import cli, presets
from flashsim.config import RunConfig, RunOptions, dump_config, load_config, parse_config
from flashsim.errors import ConfigError
from flashsim.simulator import GridPolicy
from strategies import generic_market

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@settings(max_examples=60)
@given(m=generic_market())
def test_market_round_trip(m):
    cfg = RunConfig(market=m)
    assert parse_config(dump_config(cfg)) == cfg


def test_shipped_configs_match_presets():
    for name, make in presets.EXAMPLES.items():
        assert load_config(CONFIGS / f"{name}.yaml").market == make()


def _text(**over):
    body = {
        "head": "market: {horizon: 1.0, s0_true: 100.0, beta_true: 1.0}\nagents:\n",
        "agent": ("  - x0: 1.0\n    mu: 0.0\n    nu2: 2.0\n    kappa: 1.0\n"
                  "    eta_tem_est: 0.5\n    eta_tem_true: 1.0\n    eta_per_true: 1.0\n"
                  "    eta_per_est: 1.0\n    s0_belief: 100.0\n"),
        "tail": "",
    }
    body.update(over)
    return body["head"] + body["agent"] + body["tail"]


def test_scientific_notation_accepted():
    cfg = parse_config(_text(tail="policy: {epsilon: 1e-6, base_steps: 500}\n"))
    assert cfg.policy == GridPolicy(epsilon=1e-6, base_steps=500)


@pytest.mark.parametrize("agent, field, line", [
    ("  - x0: 1.0\n    mu: 0.0\n    nu2: 2.0\n    kappa: -1.0\n    eta_tem_est: 0.5\n"
     "    eta_tem_true: 1.0\n    eta_per_true: 1.0\n    eta_per_est: 1.0\n    s0_belief: 1\n",
     "agents[0].kappa", 6),
    ("  - x0: 1.0\n    mu: 0.0\n    nu2: 2.0\n    kappa: 1.0\n    eta_tem_est: 0.5\n"
     "    eta_tem_true: 1.0\n    eta_per_true: 1.0\n    eta_per_est: 1.0\n    s0_belief: 1\n"
     "    kapa: 2\n", "agents[0].kapa", 12),
    ("  - x0: one\n    mu: 0.0\n    nu2: 2.0\n    kappa: 1.0\n    eta_tem_est: 0.5\n"
     "    eta_tem_true: 1.0\n    eta_per_true: 1.0\n    eta_per_est: 1.0\n    s0_belief: 1\n",
     "agents[0].x0", 3),
    ("  - x0: 1.0\n    mu: 0.0\n    nu2: 2.0\n    kappa: 1.0\n    eta_tem_est: 0.5\n"
     "    eta_tem_true: 1.0\n    eta_per_true: 1.0\n    s0_belief: 1\n",
     "agents[0].eta_per_est", 3),
])
def test_config_errors_name_field_and_line(agent, field, line):
    with pytest.raises(ConfigError) as info:
        parse_config(_text(agent=agent))
    assert info.value.field == field
    assert info.value.line == line


def test_unknown_top_level_key():
    with pytest.raises(ConfigError) as info:
        parse_config(_text(tail="extra: 1\n"))
    assert info.value.field == "extra" and info.value.line == 12


def test_epsilon_bound():
    with pytest.raises(ConfigError) as info:
        parse_config(_text(tail="policy: {epsilon: 0.01}\n"))
    assert info.value.field == "policy.epsilon"


def test_certain_agent_extras_ignored(caplog):
    certain = ("  - {x0: 1.0, mu: 0.0, nu2: 0.0, kappa: 1.0, eta_tem_est: 1.0, "
               "eta_tem_true: 1.0, eta_per_true: 1.0, eta_per_est: 3.0, s0_belief: 7.0}\n")
    with caplog.at_level("INFO"):
        cfg = parse_config(_text(tail=certain))
    c = cfg.market.agents[1]
    assert c.eta_per_est is None and c.s0_belief is None
    assert "ignored" in caplog.text


# -- CLI ------------------------------------------------------------------------------

def _cfg(name):
    return str(CONFIGS / f"{name}.yaml")


def test_classify_exit_codes(capsys):
    assert cli.main(["classify", "--config", _cfg("example1")]) == 0
    assert capsys.readouterr().out.startswith("NoSingularity, LHS=1.1095")
    assert cli.main(["classify", "--config", _cfg("example2")]) == 10
    out = capsys.readouterr().out
    assert "IndeterminateLowVolume" in out and "t_e=0.2691" in out and "λ=0.5939" in out
    assert cli.main(["classify", "--config", _cfg("example3")]) == 10


def test_classify_integer_lambda_exit(tmp_path):
    import sys
    sys.path.insert(0, str(Path(__file__).parent))
    from test_regime import _boundary_params
    p, _ = _boundary_params()
    m = presets.example3()
    import dataclasses
    agents = [dataclasses.replace(a, eta_per_est=p.eta_per_est) if a.uncertain else a
              for a in m.agents]
    cfg = RunConfig(market=dataclasses.replace(m, agents=tuple(agents)))
    target = tmp_path / "int.yaml"
    target.write_text(dump_config(cfg))
    with pytest.warns(Warning):
        assert cli.main(["classify", "--config", str(target)]) == 20


def test_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(Path(_cfg("example2")).read_text().replace("kappa: 1.0", "kappa: -1.0", 1))
    assert cli.main(["classify", "--config", str(bad)]) == 2
    assert "kappa" in capsys.readouterr().err
    assert cli.main(["classify", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_bad_epsilon_flag_is_config_error(tmp_path):
    code = cli.main(["simulate", "--config", _cfg("example1"), "--epsilon", "0.5",
                     "--out", str(tmp_path), "--no-plot"])
    assert code == 2


def test_simulation_failure_exit(tmp_path, monkeypatch):
    from flashsim.errors import NearSingularError

    def boom(*a, **k):
        raise NearSingularError("forced")
    monkeypatch.setattr(cli, "simulate_path", boom)
    code = cli.main(["simulate", "--config", _cfg("example1"), "--out", str(tmp_path),
                     "--no-plot"])
    assert code == 3


def test_montecarlo_wrong_regime(tmp_path):
    assert cli.main(["montecarlo", "--config", _cfg("example1"), "--out", str(tmp_path)]) == 11


def test_simulate_outputs_deterministic(tmp_path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        args = ["simulate", "--config", _cfg("example3"), "--seed", "4", "--steps", "500",
                "--out", str(out), "--plot"]
        assert cli.main(args) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert {"path.csv", "path_summary.json", "path_rates.png"} <= set(names)
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    header = (outs[0] / "path.csv").read_text().splitlines()[0]
    assert header == ("time,wtilde,sexc,x_1,x_2,x_3,theta_1,theta_2,theta_3,sunf_1,sunf_2")
    summary = json.loads((outs[0] / "path_summary.json").read_text())
    assert summary["terminal"] == "ExplodedAtTe" and summary["direction"] in ("up", "down")


def test_simulate_example1_summary(tmp_path):
    assert cli.main(["simulate", "--config", _cfg("example1"), "--out", str(tmp_path),
                     "--no-plot"]) == 0
    summary = json.loads((tmp_path / "path_summary.json").read_text())
    assert summary["terminal"] == "LiquidatedAtT" and summary["max_abs_inventory"] < 1e-2


def test_csv_precision(tmp_path):
    cli.main(["simulate", "--config", _cfg("example1"), "--steps", "200", "--out",
              str(tmp_path), "--no-plot"])
    row = (tmp_path / "path.csv").read_text().splitlines()[5].split(",")
    assert all(float(v) == float(f"{float(v):.17g}") for v in row)


def test_montecarlo_smoke(tmp_path, capsys):
    code = cli.main(["montecarlo", "--config", _cfg("example3"), "--paths", "10",
                     "--rho", "0.1,0.01", "--steps", "500", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "census.csv").read_text().startswith("rho,n,up,down,p_up,ci_lo,ci_hi")
    study = json.loads((tmp_path / "rho_study.json").read_text())
    assert len(study["levels"]) == 2


def test_figures(tmp_path, capsys):
    assert cli.main(["figures", "--out", str(tmp_path), "--steps", "500", "--no-plot"]) == 0
    table = (tmp_path / "scalars.csv").read_text()
    assert "example1,NoSingularity,1.1095,," in table
    assert "example2,IndeterminateLowVolume,4.3302,0.2691,0.5939" in table
    assert "example3,HighVolumeCrash,4.3302,0.2691,-0.4531" in table
    up = json.loads((tmp_path / "example3_up_summary.json").read_text())
    down = json.loads((tmp_path / "example3_down_summary.json").read_text())
    assert (up["direction"], down["direction"]) == ("up", "down")


def test_run_options_round_trip():
    cfg = RunConfig(market=presets.example2(), policy=GridPolicy(base_steps=321),
                    run=RunOptions(output_dir="x", paths=5, rho=(0.2, 0.1), inner=3,
                                   plot=False))
    assert parse_config(dump_config(cfg)) == cfg
