"""Command line: ``sentiga {synth,optimize,backtest,compare}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 infeasible
optimisation.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import DataError, InfeasibleError, NotPSDError
from .evolution import Objective
from .report import (
    RunConfig,
    cmd_backtest,
    cmd_compare,
    cmd_optimize,
    cmd_synth,
    discover_assets,
    parse_window,
    read_strategy,
)
from .strategy import Chromosome

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3

log = logging.getLogger("sentiga")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _window(text):
    try:
        return parse_window(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _objective(text):
    try:
        return Objective.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--data", type=Path, help="directory of <TICKER>_sentiment.csv / <TICKER>_prices.csv")
    run.add_argument("--train", type=_window, metavar="FROM:TO")
    run.add_argument("--test", type=_window, metavar="FROM:TO")
    run.add_argument("--generations", type=int)
    run.add_argument("--objective", type=_objective, help="e.g. sharpe_like or cum_return:1,max_drawdown:-2")

    parser = _Parser(prog="sentiga", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic planted-rule dataset")
    p.add_argument("--assets", type=int, default=10)
    p.add_argument("--days", type=int, default=1305)
    p.add_argument("--edge", type=float, default=0.003)
    p.add_argument("--start", type=dt.date.fromisoformat, default=dt.date(2010, 1, 1))

    sub.add_parser("optimize", parents=[common, run], help="evolve one strategy per ticker")

    p = sub.add_parser("backtest", parents=[common, run], help="train/test reports for one strategy")
    p.add_argument("--ticker", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--strategy", type=Path, help="strategy JSON (default <out>/strategies/<TICKER>.json)")
    g.add_argument("--chromosome", type=Chromosome.parse, help='e.g. "(1,0,1,0,0.41,0.37,0.5,0.41)"')

    p = sub.add_parser("compare", parents=[common, run], help="Markowitz vs 1/N vs evolutionary portfolio")
    p.add_argument("--strategies", type=Path, help="directory of strategy JSON (default <out>/strategies)")
    return parser


def _run_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if args.data is not None:
        cfg = replace(cfg, assets=discover_assets(args.data))
    ga_kw = {}
    if args.generations is not None:
        ga_kw["generations"] = args.generations
    if args.objective is not None:
        ga_kw["objective"] = args.objective
    if ga_kw:
        cfg = replace(cfg, ga=replace(cfg.ga, **ga_kw))
    return cfg.with_overrides(seed=args.seed, out=args.out, train=args.train, test=args.test)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            cmd_synth(args.seed or 0, args.assets, args.days, args.edge, args.out or Path("out"), args.start)
            return EXIT_OK
        cfg = _run_config(args)
        if not cfg.assets:
            raise DataError("no tickers configured; pass --data or --config")
        if args.command == "optimize":
            _, failed = cmd_optimize(cfg)
            return EXIT_DATA if failed else EXIT_OK
        if args.command == "backtest":
            chrom = args.chromosome or read_strategy(
                args.strategy or Path(cfg.out) / "strategies" / f"{args.ticker}.json")
            print(json.dumps(cmd_backtest(cfg, chrom, args.ticker), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "compare":
            report = cmd_compare(cfg, args.strategies)
            print(json.dumps(report.to_json()["portfolios"], indent=2, sort_keys=True))
            missing = [t for t in cfg.assets if t not in report.weights.tickers]
            return EXIT_DATA if missing else EXIT_OK
    except (InfeasibleError, NotPSDError) as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
