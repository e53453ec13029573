"""Command-line interface: ``select``, ``backtest`` and ``bench``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
The worker count for parallel experiments is read from ``TREXNN_WORKERS``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .calibration import calibrate
from .dataset import DataError, validate_and_standardize
from .forward import DummyConfig
from .formats import (
    bench_to_dict,
    calibration_to_dict,
    dumps,
    load_dataset_csv,
    load_prices,
    read_json,
    schedule_to_dict,
    synth_config_from_dict,
    write_quarters_csv,
    write_wealth_csv,
)
from .synthetic import TRexSelector, empirical_fdr_tpr
from .tracking import rolling_backtest, wealth_and_mste

logger = logging.getLogger("trexnn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """User-facing parameters shared by the subcommands."""

    alpha: float = 0.2
    K: int = 20
    L: Optional[int] = None
    L_cap_factor: int = 4
    window_n: int = 60
    lam: Optional[float] = None
    seed: int = 0
    rho_step: float = 0.01
    runs: int = 200

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise UsageError(f"--alpha must lie in [0, 1], got {self.alpha}")
        if self.K < 2:
            raise UsageError(f"--k must be >= 2, got {self.K}")
        if self.L is not None and self.L < 1:
            raise UsageError(f"--L must be >= 1, got {self.L}")
        if self.L_cap_factor < 1:
            raise UsageError("--L-cap-factor must be >= 1")
        if self.window_n < 10:
            raise UsageError(f"--window must be >= 10, got {self.window_n}")
        if self.lam is not None and self.lam < 0:
            raise UsageError(f"--lambda must be >= 0, got {self.lam}")
        if self.seed < 0:
            raise UsageError("--seed must be nonnegative")
        m = round(1.0 / self.rho_step) if self.rho_step > 0 else 0
        if m < 1 or abs(m * self.rho_step - 1.0) > 1e-9:
            raise UsageError(f"--rho-step {self.rho_step} does not divide 1")
        if self.runs < 2:
            raise UsageError("--runs must be >= 2")

    @property
    def dummy_config(self) -> DummyConfig:
        return DummyConfig(K=self.K, L=self.L, seed=self.seed)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, alpha_default: float = 0.2) -> None:
    p.add_argument("--alpha", type=float, default=alpha_default, help="target FDR level in [0, 1] (default %(default)s)")
    p.add_argument("--k", type=int, default=20, dest="K", help="number of random experiments (default %(default)s)")
    p.add_argument("--L", type=int, default=None, help="initial number of dummies (default: number of variables)")
    p.add_argument("--L-cap-factor", type=int, default=4, help="L may double up to this multiple of its start (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default %(default)s)")
    p.add_argument("--rho-step", type=float, default=0.01, help="correlation threshold grid step (default %(default)s)")
    p.add_argument("--out-dir", type=Path, default=None, help="output directory (default: JSON to stdout)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trexnn", description="FDR-controlled variable selection and sparse index tracking.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("select", help="select variables from a dataset CSV")
    p.add_argument("dataset", type=Path, help="CSV with a header, predictor columns and a response column")
    p.add_argument("--y-col", default="y", help="response column name (default %(default)s)")
    _common(p)

    p = sub.add_parser("backtest", help="rolling index-tracking backtest on a price CSV")
    p.add_argument("prices", type=Path, help="CSV: date, index column, one column per asset")
    p.add_argument("--index-col", default="index", help="index price column name (default %(default)s)")
    p.add_argument("--window", type=int, default=60, dest="window_n", help="trading days per period (default %(default)s)")
    p.add_argument("--lambda", type=float, default=None, dest="lam", help="ridge parameter (default: scaled to the data)")
    _common(p)

    p = sub.add_parser("bench", help="Monte Carlo FDR/TPR on synthetic data")
    p.add_argument("config", type=Path, help="SynthConfig JSON")
    p.add_argument("--alpha", type=float, nargs="+", default=[0.1, 0.2, 0.3], dest="alphas", help="target FDR levels")
    p.add_argument("--runs", type=int, default=200, help="Monte Carlo runs per alpha (default %(default)s)")
    p.add_argument("--k", type=int, default=20, dest="K")
    p.add_argument("--seed", type=int, default=None, help="override the config's seed")
    p.add_argument("--rho-step", type=float, default=0.01)
    p.add_argument("--plain", action="store_true", help="benchmark the unpenalized selector instead")
    p.add_argument("--out-dir", type=Path, default=None)
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _emit(out_dir: Optional[Path], name: str, text: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
    else:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(text)


def _cmd_select(args) -> int:
    rc = RunConfig(alpha=args.alpha, K=args.K, L=args.L, L_cap_factor=args.L_cap_factor, seed=args.seed, rho_step=args.rho_step)
    X, y, ids = load_dataset_csv(args.dataset, y_col=args.y_col)
    ds = validate_and_standardize(X, y, column_ids=ids)
    out = calibrate(ds, rc.alpha, rc.dummy_config, rho_step=rc.rho_step, L_cap_factor=rc.L_cap_factor)
    _emit(args.out_dir, "selection.json", dumps(calibration_to_dict(out)))
    return EXIT_OK


def _cmd_backtest(args) -> int:
    rc = RunConfig(
        alpha=args.alpha, K=args.K, L=args.L, L_cap_factor=args.L_cap_factor, window_n=args.window_n,
        lam=args.lam, seed=args.seed, rho_step=args.rho_step,
    )
    panel = load_prices(args.prices, index_col=args.index_col)
    sched = rolling_backtest(panel, rc.alpha, rc.window_n, rc.dummy_config, rc.lam, rho_step=rc.rho_step)
    metrics = wealth_and_mste(sched, panel)
    _emit(args.out_dir, "schedule.json", dumps(schedule_to_dict(sched, metrics)))
    if args.out_dir is not None:
        write_wealth_csv(args.out_dir / "wealth.csv", metrics, sched)
        write_quarters_csv(args.out_dir / "quarters.csv", metrics, sched)
    return EXIT_OK


def _cmd_bench(args) -> int:
    for a in args.alphas:
        RunConfig(alpha=a, K=args.K, rho_step=args.rho_step, runs=args.runs)
    cfg = synth_config_from_dict(read_json(args.config))
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    reports = []
    for a in args.alphas:
        sel = TRexSelector(alpha=a, K=args.K, penalize=not args.plain, rho_step=args.rho_step)
        rep = empirical_fdr_tpr(cfg, a, args.runs, sel)
        logger.info("alpha=%.3f FDR=%.4f (se %.4f) TPR=%.4f", a, rep.empirical_fdr, rep.fdr_se, rep.empirical_tpr)
        reports.append(bench_to_dict(rep, cfg, {"K": args.K, "penalize": not args.plain, "rho_step": args.rho_step}))
    _emit(args.out_dir, "bench.json", dumps({"kind": "bench_grid", "reports": reports}))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handler = {"select": _cmd_select, "backtest": _cmd_backtest, "bench": _cmd_bench}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"trexnn: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"trexnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"trexnn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining ValueErrors come from numerical routines (e.g. covariance checks)
        print(f"trexnn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
