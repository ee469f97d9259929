"""Command line entry point: classify, simulate, montecarlo, figures."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import montecarlo, presets
from .config import RunConfig, load_config
from .errors import ConfigError, DomainError, FlashSimError, RegimeError
from .regime import Regime, RegimeReport, classify_market
from .simulator import ExplodedAtTe, GridPolicy, PathResult, simulate_path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_CRASH = 10
EXIT_WRONG_REGIME = 11
EXIT_INTEGER_LAMBDA = 20

# Example-3 seeds whose crashes go up and down respectively.
FIGURE_SEEDS = {"up": 0, "down": 75995}

log = logging.getLogger("flashsim")


def regime_exit_code(report: RegimeReport) -> int:
    if report.regime is Regime.NO_SINGULARITY:
        return EXIT_OK
    if report.regime is Regime.INTEGER_LAMBDA:
        return EXIT_INTEGER_LAMBDA
    return EXIT_CRASH


def write_path_csv(path: PathResult, target) -> None:
    cols, data = path.table()
    lines = [",".join(cols)]
    lines += [",".join(f"{v:.17g}" for v in row) for row in data]
    Path(target).write_text("\n".join(lines) + "\n")


def path_summary(path: PathResult, report: RegimeReport) -> dict:
    term = path.terminal
    out = {"regime": report.regime.value, "seed": path.seed, "t_end": path.t_end,
           "terminal": term.kind, "n_points": int(path.times.size)}
    if isinstance(term, ExplodedAtTe):
        out.update(direction=term.direction.value, fitted_exponent=term.fitted_exponent,
                   lambda_predicted_exponent=term.lambda_predicted_exponent,
                   t_e=report.t_e, lam=report.lam)
    else:
        out["max_abs_inventory"] = term.max_abs_inventory
    return out


def _policy(cfg: RunConfig, args) -> GridPolicy:
    changes = {}
    if args.epsilon is not None:
        changes["epsilon"] = args.epsilon
    if args.steps is not None:
        changes["base_steps"] = args.steps
    if not changes:
        return cfg.policy
    try:
        policy = replace(cfg.policy, **changes)
    except DomainError as exc:
        raise ConfigError(str(exc), "--epsilon/--steps") from exc
    if policy.epsilon > 1e-3 * cfg.market.horizon:
        raise ConfigError("must be <= 1e-3 * horizon", "--epsilon")
    return policy


def _out_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.out if args.out is not None else cfg.run.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _plot(cfg: RunConfig, args) -> bool:
    return cfg.run.plot if args.plot is None else args.plot


def cmd_classify(cfg: RunConfig, args) -> int:
    report = classify_market(cfg.market)
    print(report.summary())
    return regime_exit_code(report)


def run_simulation(market, policy, seed, out_dir: Path, plot: bool, stem="path"):
    report = classify_market(market)
    path = simulate_path(market, policy, seed=seed, report=report)
    write_path_csv(path, out_dir / f"{stem}.csv")
    summary = path_summary(path, report)
    (out_dir / f"{stem}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if plot:
        from .plotting import save_path_figures
        save_path_figures(path, out_dir, stem)
    return path, summary


def cmd_simulate(cfg: RunConfig, args) -> int:
    seed = cfg.market.seed if args.seed is None else args.seed
    _, summary = run_simulation(cfg.market, _policy(cfg, args), seed, _out_dir(cfg, args),
                                _plot(cfg, args))
    print(json.dumps(summary))
    return EXIT_OK


def cmd_montecarlo(cfg: RunConfig, args) -> int:
    report = classify_market(cfg.market)
    if report.singular is None:
        raise RegimeError(f"{report.regime.value}: Monte Carlo needs a crash regime")
    n = cfg.run.paths if args.paths is None else args.paths
    rho_frac = cfg.run.rho if args.rho is None else args.rho
    seed = cfg.market.seed if args.seed is None else args.seed
    policy = _policy(cfg, args)
    out = _out_dir(cfg, args)
    census = montecarlo.direction_census(cfg.market, n, policy, seed_base=seed, report=report)
    (out / "census.csv").write_text(census.to_csv())
    (out / "census.json").write_text(census.to_json() + "\n")
    lines = [census.to_csv().strip()]
    if rho_frac:
        rhos = [f * report.t_e for f in rho_frac]
        study = montecarlo.rho_limit_study(cfg.market, n, rhos, policy, seed_base=seed,
                                           inner=cfg.run.inner, report=report)
        (out / "rho_study.csv").write_text(study.to_csv())
        (out / "rho_study.json").write_text(study.to_json() + "\n")
        lines.append(study.to_csv().strip())
        for lv in study.levels:
            lines.append(f"rho={lv.rho:.6g} dominant={lv.dominant:.4f} se={lv.dominant_se:.4f}")
    print("\n".join(lines))
    return EXIT_OK


def scalar_table() -> list:
    rows = []
    for name, make in presets.EXAMPLES.items():
        rep = classify_market(make())
        rows.append({"example": name, "regime": rep.regime.value, "lhs": rep.condition_lhs,
                     "t_e": rep.t_e, "lam": rep.lam})
    return rows


def cmd_figures(args) -> int:
    out = Path(args.out or "figures")
    out.mkdir(parents=True, exist_ok=True)
    rows = scalar_table()
    fmt = lambda v: "" if v is None else f"{v:.4f}"  # noqa: E731
    table = ["example,regime,lhs,t_e,lambda"]
    table += [f"{r['example']},{r['regime']},{fmt(r['lhs'])},{fmt(r['t_e'])},{fmt(r['lam'])}"
              for r in rows]
    (out / "scalars.csv").write_text("\n".join(table) + "\n")
    print("\n".join(table))
    plot = True if args.plot is None else args.plot
    policy = GridPolicy(epsilon=args.epsilon or GridPolicy().epsilon,
                        base_steps=args.steps or GridPolicy().base_steps)
    runs = [("example1", presets.example1(), 0), ("example2", presets.example2(), 0)]
    runs += [(f"example3_{d}", presets.example3(), s) for d, s in FIGURE_SEEDS.items()
             if s is not None]
    for stem, market, seed in runs:
        _, summary = run_simulation(market, policy, seed, out, plot, stem)
        print(stem, json.dumps(summary))
    return EXIT_OK


def _rho_list(text: str):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --rho list: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flashsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--plot", dest="plot", action="store_true", default=None)
    common.add_argument("--no-plot", dest="plot", action="store_false")
    common.add_argument("--epsilon", type=float, help="cutoff distance before t_e or T")
    common.add_argument("--steps", type=int, help="uniform base steps")
    common.add_argument("--seed", type=int)
    common.add_argument("--paths", type=int)
    common.add_argument("--rho", type=_rho_list, help="comma list, as fractions of t_e")
    common.add_argument("-v", "--verbose", action="store_true")
    for name in ("classify", "simulate", "montecarlo"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--config", required=True)
    sub.add_parser("figures", parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "figures":
            return cmd_figures(args)
        cfg = load_config(args.config)
        handler = {"classify": cmd_classify, "simulate": cmd_simulate,
                   "montecarlo": cmd_montecarlo}[args.command]
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_WRONG_REGIME
    except FlashSimError as exc:
        print(f"simulation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
