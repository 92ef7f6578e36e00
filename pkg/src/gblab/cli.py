"""Command-line interface.

Three subcommands:

- ``simulate --config <ini>`` runs the configured experiment and writes
  raw.csv plus aggregate.csv to its output directory.
- ``ingest --matrix <csv> --family <name> --out <dir>`` builds an instance
  from a reward matrix file and runs a small default experiment on it (or
  the experiment/policy sections of ``--config`` when given).
- ``sweep --config <ini> --param graph_p|graph_m --values a,b,c`` reruns the
  experiment once per graph-parameter value, one output subdirectory each.

``--seed``, ``--reps``, and ``--out`` override the corresponding config
values.  Exit codes: 0 success, 2 usage, 3 configuration problem (the
offending key is named on stderr), 1 anything else.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import (
    ConfigError,
    ExperimentConfig,
    PolicySetting,
    load_config,
    override_config,
)
from .envs import FAMILY_BUILDERS
from .harness import run_experiment, write_results
from .policies import PolicyConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gblab",
        description="Simulation laboratory for graph-informed low-rank "
                    "matrix bandits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="override the base seed")
        p.add_argument("--reps", type=int, default=None,
                       help="override the repetition count")
        p.add_argument("--out", default=None,
                       help="override the output directory")

    sim = sub.add_parser("simulate", help="run a configured experiment")
    sim.add_argument("--config", required=True, help="INI config path")
    common(sim)

    ing = sub.add_parser("ingest", help="run on an ingested reward matrix")
    ing.add_argument("--matrix", required=True, help="reward matrix CSV path")
    ing.add_argument("--family", required=True,
                     help="reward family: " + ", ".join(sorted(FAMILY_BUILDERS)))
    ing.add_argument("--out", required=True, help="output directory")
    ing.add_argument("--config", default=None,
                     help="optional INI supplying experiment/policy sections")
    ing.add_argument("--seed", type=int, default=None,
                     help="override the base seed")
    ing.add_argument("--reps", type=int, default=None,
                     help="override the repetition count")

    sw = sub.add_parser("sweep", help="rerun across graph parameter values")
    sw.add_argument("--config", required=True, help="INI config path")
    sw.add_argument("--param", required=True, choices=("graph_p", "graph_m"),
                    help="which graph parameter to sweep")
    sw.add_argument("--values", required=True,
                    help="comma-separated parameter values")
    common(sw)
    return parser


def _summarize(series, out_dir):
    lines = [f"wrote {os.path.join(out_dir, 'raw.csv')} and "
             f"{os.path.join(out_dir, 'aggregate.csv')} "
             f"({len(series.reps)} repetitions)"]
    for label in series.policies:
        final = series.mean_cum_regret[label][-1]
        hit = series.mean_hit_rate[label][-1]
        lines.append(
            f"  {label}: mean final cumulative regret {final:.6g}, "
            f"final hit rate {hit:.4g}"
        )
    return "\n".join(lines)


def _cmd_simulate(args) -> int:
    config = override_config(load_config(args.config), seed=args.seed,
                             reps=args.reps, out_dir=args.out)
    series, raw = run_experiment(config)
    write_results(series, raw, config.out_dir)
    print(_summarize(series, config.out_dir))
    return 0


def _default_ingest_policies(horizon: int) -> tuple[PolicySetting, ...]:
    shared = dict(horizon=horizon, rank=1, lam=0.02, alpha=0.05)
    return (
        PolicySetting("two_stage_graph",
                      PolicyConfig(name="two_stage_graph", **shared)),
        PolicySetting("glm_ucb", PolicyConfig(name="glm_ucb", **shared)),
    )


def _cmd_ingest(args) -> int:
    if args.family not in FAMILY_BUILDERS:
        raise ConfigError(
            "--family must be one of " + ", ".join(sorted(FAMILY_BUILDERS))
        )
    if args.config is not None:
        base = load_config(args.config)
        config = replace(
            base, action_kind="ingest", matrix_path=args.matrix,
            family_name=args.family, d1=0, d2=0, n_actions=0, n1=None,
            n2=None, graph_model="knn",
        )
    else:
        horizon = 400
        config = ExperimentConfig(
            horizon=horizon, reps=2, base_seed=0, out_dir=args.out,
            hit_percent=5.0, workers=1, action_kind="ingest", d1=0, d2=0,
            rank=1, n_actions=0, n1=None, n2=None, matrix_path=args.matrix,
            skip_header=False, impute_missing=False, graph_model="knn",
            graph_p=None, graph_m=None, knn_k=5, side_p=0.5,
            family_name=args.family, omega=None,
            policies=_default_ingest_policies(horizon),
        )
    config = override_config(config, seed=args.seed, reps=args.reps,
                             out_dir=args.out)
    series, raw = run_experiment(config)
    write_results(series, raw, config.out_dir)
    print(_summarize(series, config.out_dir))
    return 0


def _parse_sweep_values(param: str, text: str):
    values = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            values.append(int(chunk) if param == "graph_m" else float(chunk))
        except ValueError:
            raise ConfigError(
                f"--values entry '{chunk}' is not a valid {param} value"
            ) from None
    if not values:
        raise ConfigError("--values lists no parameter values")
    return values


def _cmd_sweep(args) -> int:
    base = override_config(load_config(args.config), seed=args.seed,
                           reps=args.reps, out_dir=args.out)
    if base.action_kind == "ingest":
        raise ConfigError("sweep requires a synthetic instance, not ingest")
    values = _parse_sweep_values(args.param, args.values)
    for value in values:
        if args.param == "graph_p":
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"graph_p value {value:g} outside (0, 1]")
            point = replace(base, graph_model="er", graph_p=value,
                            graph_m=None)
        else:
            if value < 1:
                raise ConfigError(f"graph_m value {value} must be >= 1")
            point = replace(base, graph_model="ba", graph_m=value,
                            graph_p=None)
        out_dir = os.path.join(base.out_dir, f"{args.param}_{value:g}")
        point = replace(point, out_dir=out_dir)
        series, raw = run_experiment(point)
        write_results(series, raw, out_dir)
        print(f"{args.param}={value:g}")
        print(_summarize(series, out_dir))
    return 0


_COMMANDS = {"simulate": _cmd_simulate, "ingest": _cmd_ingest,
             "sweep": _cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
