"""Command-line entry point: ``ivstream {regress,bandit,realdata,diagnose}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import dgp as dgp_mod
from .errors import ConfigError, IvStreamError
from .harness import (BANDIT, PRICE_SALES, REALDATA, REGRESSION, ExperimentConfig,
                      assumption_diagnostics, experiment_model, make_stream, run_experiment,
                      run_realdata)
from .io import (config_hash, load_gasoline_csv, parse_config, result_rows, write_results)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ALL_FAILED = 2

SUBCOMMAND_KINDS = {
    "regress": (REGRESSION, PRICE_SALES),
    "bandit": (BANDIT,),
    "realdata": (REALDATA,),
    "diagnose": (REGRESSION, PRICE_SALES, BANDIT, REALDATA),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ivstream",
        description="Streaming instrumental-variable regression and endogenous bandit experiments.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    helps = {
        "regress": "run a synthetic regression experiment (regression or price_sales)",
        "bandit": "run a synthetic endogenous bandit experiment",
        "realdata": "run O2SLS and Ridge over the gasoline stream",
        "diagnose": "print instrument diagnostics for a config or dataset",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--runs", type=int, help="override the number of replications")
        p.add_argument("--horizon", type=int, help="override the horizon T")
        p.add_argument("--out", type=Path, help="write results CSV here")
        p.add_argument("--quiet", action="store_true", help="suppress the summary table")
    return parser


def _load_config(args, command: str) -> ExperimentConfig:
    if args.config is not None:
        config = parse_config(args.config)
    else:
        config = ExperimentConfig.for_kind(SUBCOMMAND_KINDS[command][0])
    if config.kind not in SUBCOMMAND_KINDS[command]:
        raise ConfigError([f"'{command}' cannot run kind={config.kind!r} "
                           f"(expected {' or '.join(SUBCOMMAND_KINDS[command])})"])
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.runs is not None:
        overrides["n_runs"] = args.runs
    if args.horizon is not None:
        overrides["T"] = args.horizon
    if args.out is not None:
        overrides["output"] = str(args.out)
    return replace(config, **overrides).validate()


def _summary_metrics(kind: str) -> tuple:
    if kind == BANDIT:
        return ("regret_cum", "ident_cum", "mse")
    return ("ident_cum", "oracle_cum", "mse")


def _print_summary(result, out) -> None:
    cfg = result.config
    metrics = _summary_metrics(cfg.kind)
    print(f"kind={cfg.kind} T={cfg.T} runs={cfg.n_runs} seed={cfg.seed} "
          f"failures={len(result.failures)}", file=out)
    print(f"{'algorithm':<10}" + "".join(f"{m + ' mean':>18}{m + ' std':>18}" for m in metrics),
          file=out)
    for alg in cfg.algorithms:
        if alg not in result.aggregate.curves:
            print(f"{alg:<10}  (no successful runs)", file=out)
            continue
        cells = "".join(f"{result.aggregate.mean(alg, m)[-1]:>18.6g}"
                        f"{result.aggregate.std(alg, m)[-1]:>18.6g}" for m in metrics)
        print(f"{alg:<10}{cells}", file=out)


def _cmd_experiment(config: ExperimentConfig, quiet: bool) -> int:
    result = run_experiment(config)
    for f in result.failures:
        print(f"run {f.run_id} aborted ({f.algorithm}): {f.message}", file=sys.stderr)
    if config.output:
        beta_dim = result.runs[0].betas.shape[1] if result.runs and config.log_beta else 0
        write_results(config.output, result_rows(result.runs, config.algorithms),
                      config_hash(config), len(result.failures), beta_dim)
    if not quiet:
        _print_summary(result, sys.stdout)
    if len(result.failures) == config.n_runs:
        print("all runs aborted", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


def _cmd_realdata(config: ExperimentConfig, quiet: bool) -> int:
    data = load_gasoline_csv(config.data_path)
    res = run_realdata(data.Z, data.X, data.y, data.years, lam=config.lam, mu=config.mu,
                       algorithms=config.algorithms)
    if config.output:
        _write_realdata(config, res)
    if not quiet:
        print(f"gasoline stream: {len(data)} years, lambda={config.lam:g}")
        header = "year" + "".join(f"{a + ' PG':>14}{a + ' R2':>14}" for a in config.algorithms)
        print(header)
        for i, year in enumerate(res.years):
            cells = "".join(f"{res.betas[a][i][1]:>14.6g}{res.r2[a][i]:>14.6g}"
                            for a in config.algorithms)
            print(f"{year:<4}{cells}")
        for a in config.algorithms:
            print(f"offline {a}: " + " ".join(f"{b:.6g}" for b in res.offline[a]))
    return EXIT_OK


def _write_realdata(config: ExperimentConfig, res) -> None:
    import csv

    with open(config.output, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash(config)} failures=0\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "year", "beta_const", "beta_PG", "beta_RI", "prediction", "r2"])
        for a in config.algorithms:
            for i, year in enumerate(res.years):
                b = res.betas[a][i]
                w.writerow([a, int(year)] + [format(float(v), ".17g") for v in
                                             (*b, res.predictions[a][i], res.r2[a][i])])


def _cmd_diagnose(config: ExperimentConfig, quiet: bool) -> int:
    if config.kind == REALDATA:
        data = load_gasoline_csv(config.data_path)
        stream = dgp_mod.Stream(data.Z, data.X, data.y, np.full_like(data.X, np.nan),
                                np.full(len(data), np.nan))
        source = "gasoline data"
    else:
        if config.kind == BANDIT:
            config = replace(config, kind=REGRESSION, algorithms=("o2sls",))
        model = experiment_model(config)
        stream = make_stream(config, model, 0)
        source = f"{config.kind} run 0"
    diag = assumption_diagnostics(stream, lam=config.lam)
    print(f"diagnostics on {source} (t={diag.t})")
    for k, v in diag.as_dict().items():
        print(f"  {k:<14} {v}")
    if not diag.relevance_ok:
        print("warning: instruments look irrelevant (relevance ~ 0)", file=sys.stderr)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        config = _load_config(args, args.command)
        if args.command == "realdata":
            return _cmd_realdata(config, args.quiet)
        if args.command == "diagnose":
            return _cmd_diagnose(config, args.quiet)
        return _cmd_experiment(config, args.quiet)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except (IvStreamError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
