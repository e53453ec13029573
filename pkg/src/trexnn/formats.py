"""File formats: price and dataset CSVs, JSON documents and the backtest CSV outputs."""
from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import math
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .calibration import CalibrationOutcome, EstimatorState, SelectionResult
from .dataset import DataError, TruthReport
from .occurrence import OccurrenceProfile
from .synthetic import BenchReport, SynthConfig
from .tracking import PeriodResult, PortfolioSchedule, PricePanel, TrackingMetrics

logger = logging.getLogger(__name__)

MISSING = frozenset({"", "na", "nan", "null"})


# --- CSV input --------------------------------------------------------------


def _parse_date(text: str, row: int) -> _dt.date:
    try:
        return _dt.date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"row {row}, column 1: cannot parse date {text!r} (expected YYYY-MM-DD)") from None


def _parse_float(text: str, row: int, col: int, name: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {col} ({name}): cannot parse {text!r} as a number") from None
    if not math.isfinite(val):
        raise DataError(f"row {row}, column {col} ({name}): non-finite value {text!r}")
    return val


def _read_rows(path) -> Tuple[list, list]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    body = rows[1:]
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}: row {i} has {len(r)} cells, header has {len(header)}")
    return header, body


def load_prices(path, index_col: str = "index") -> PricePanel:
    """Read a price CSV: ISO dates in the first column, an index column and one column per asset.

    Rows are numbered from 1 (the header) in error messages, columns from 1.
    Assets with any missing cell are dropped and logged; a missing index
    price is an error.

    Raises
    ------
    DataError
        On unparseable cells, unsorted or duplicate dates, or a missing
        index column.
    """
    header, body = _read_rows(path)
    if index_col not in header[1:]:
        raise DataError(f"{path}: no index column {index_col!r} in header")
    if not body:
        raise DataError(f"{path}: no data rows")
    dates = []
    for i, r in enumerate(body, start=2):
        d = _parse_date(r[0], i)
        if dates and d == dates[-1]:
            raise DataError(f"{path}: duplicate date {d.isoformat()} at row {i}")
        if dates and d < dates[-1]:
            if d in dates:
                raise DataError(f"{path}: duplicate date {d.isoformat()} at row {i}")
            raise DataError(f"{path}: dates not sorted at row {i} ({d.isoformat()} after {dates[-1].isoformat()})")
        dates.append(d)

    ix = header.index(index_col)
    asset_cols = [c for c in range(1, len(header)) if c != ix]
    index_prices = []
    for i, r in enumerate(body, start=2):
        if r[ix].strip().lower() in MISSING:
            raise DataError(f"row {i}, column {ix + 1} ({index_col}): missing index price")
        index_prices.append(_parse_float(r[ix], i, ix + 1, index_col))

    kept, dropped, columns = [], [], []
    for c in asset_cols:
        vals = []
        missing = False
        for i, r in enumerate(body, start=2):
            cell = r[c].strip()
            if cell.lower() in MISSING:
                missing = True
                continue
            vals.append(_parse_float(cell, i, c + 1, header[c]))
        if missing:
            dropped.append(header[c])
        else:
            kept.append(header[c])
            columns.append(vals)
    if dropped:
        logger.warning("dropped %d asset(s) with missing values: %s", len(dropped), ", ".join(dropped))
    if not kept:
        raise DataError(f"{path}: no asset without missing values")
    prices = np.asarray(columns, dtype=float).T
    return PricePanel(
        dates=tuple(dates),
        index_prices=np.asarray(index_prices, dtype=float),
        asset_prices=prices,
        asset_ids=tuple(kept),
    )


def load_dataset_csv(path, y_col: str = "y") -> Tuple[np.ndarray, np.ndarray, tuple]:
    """Read a regression dataset: one header row, numeric columns, response in ``y_col``.

    Returns ``(X, y, column_ids)``.
    """
    header, body = _read_rows(path)
    if y_col not in header:
        raise DataError(f"{path}: no response column {y_col!r} in header")
    if not body:
        raise DataError(f"{path}: no data rows")
    values = np.empty((len(body), len(header)))
    for i, r in enumerate(body, start=2):
        for c, cell in enumerate(r):
            values[i - 2, c] = _parse_float(cell, i, c + 1, header[c])
    yi = header.index(y_col)
    xi = [c for c in range(len(header)) if c != yi]
    return values[:, xi], values[:, yi], tuple(header[c] for c in xi)


def write_prices(path, panel: PricePanel, index_col: str = "index") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", index_col, *panel.asset_ids])
        for d, ind, row in zip(panel.dates, panel.index_prices, panel.asset_prices):
            w.writerow([_iso(d), repr(float(ind)), *(repr(float(x)) for x in row)])


# --- JSON documents ---------------------------------------------------------


def _iso(d):
    return d.isoformat() if hasattr(d, "isoformat") else d


def _undate(x):
    if isinstance(x, str):
        try:
            return _dt.date.fromisoformat(x)
        except ValueError:
            return x
    return x


def _floats(a) -> list:
    return [float(x) for x in np.asarray(a, dtype=float)]


def _jsonable_id(x):
    return x.item() if isinstance(x, np.generic) else x


def dumps(doc: dict) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(path, doc: dict) -> None:
    Path(path).write_text(dumps(doc))


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None


def calibration_to_dict(out: CalibrationOutcome) -> dict:
    occ = out.selected.occurrences
    return {
        "kind": "selection",
        "alpha": out.alpha,
        "feasible": out.feasible,
        "penalized": out.penalized,
        "v_star": out.v_star,
        "rho_star": out.rho_star,
        "T_star": out.T_star,
        "L_star": out.L_star,
        "L_tried": list(out.L_tried),
        "selected": list(out.selected.selected),
        "selected_ids": [_jsonable_id(i) for i in out.selected.selected_ids],
        "occurrences": None
        if occ is None
        else {
            "T": occ.T,
            "L": occ.L,
            "rho_thr": occ.rho_thr,
            "phi": _floats(occ.phi),
            "psi": _floats(occ.psi),
            "phi_nn": _floats(occ.phi_nn),
        },
        "trace": [asdict(s) for s in out.trace],
    }


def calibration_from_dict(doc: dict) -> CalibrationOutcome:
    occ = doc["occurrences"]
    profile = None
    if occ is not None:
        profile = OccurrenceProfile(
            T=occ["T"], L=occ["L"], rho_thr=occ["rho_thr"],
            phi=np.asarray(occ["phi"], float), psi=np.asarray(occ["psi"], float),
            phi_nn=np.asarray(occ["phi_nn"], float),
        )
    return CalibrationOutcome(
        v_star=doc["v_star"], rho_star=doc["rho_star"], T_star=doc["T_star"], L_star=doc["L_star"],
        alpha=doc["alpha"],
        selected=SelectionResult(
            selected=tuple(doc["selected"]), selected_ids=tuple(doc["selected_ids"]),
            occurrences=profile, v_star=doc["v_star"],
        ),
        trace=[EstimatorState(**s) for s in doc["trace"]],
        feasible=doc["feasible"], penalized=doc["penalized"], L_tried=list(doc["L_tried"]),
    )


def schedule_to_dict(schedule: PortfolioSchedule, metrics: Optional[TrackingMetrics] = None) -> dict:
    periods = []
    for i, pr in enumerate(schedule.periods):
        d = {
            "m": pr.m,
            "train_start": pr.train_start,
            "train_stop": pr.train_stop,
            "test_start": pr.test_start,
            "test_stop": pr.test_stop,
            "train_dates": [_iso(x) for x in pr.train_dates],
            "test_dates": [_iso(x) for x in pr.test_dates],
            "weights": _floats(pr.weights),
            "selected": list(pr.selected),
            "selected_ids": [_jsonable_id(x) for x in pr.selected_ids],
            "fallback": pr.fallback,
            "ridge": pr.ridge,
            "v_star": pr.v_star,
            "rho_star": pr.rho_star,
            "T_star": pr.T_star,
            "L_star": pr.L_star,
            "qp_status": pr.qp_status,
        }
        if metrics is not None:
            d["num_stocks"] = int(metrics.num_stocks[i])
            d["mste"] = float(metrics.mste[i])
        periods.append(d)
    doc = {
        "kind": "schedule",
        "alpha": schedule.alpha,
        "window_n": schedule.window_n,
        "lambda": schedule.lam,
        "asset_ids": [_jsonable_id(x) for x in schedule.asset_ids],
        "M": schedule.M,
        "periods": periods,
    }
    if metrics is not None:
        doc["overall_mste"] = metrics.overall_mste
    return doc


def schedule_from_dict(doc: dict) -> PortfolioSchedule:
    periods = [
        PeriodResult(
            m=d["m"], train_start=d["train_start"], train_stop=d["train_stop"],
            test_start=d["test_start"], test_stop=d["test_stop"],
            train_dates=tuple(_undate(x) for x in d["train_dates"]),
            test_dates=tuple(_undate(x) for x in d["test_dates"]),
            weights=np.asarray(d["weights"], float), selected=tuple(d["selected"]),
            selected_ids=tuple(d["selected_ids"]), fallback=d["fallback"], ridge=d["ridge"],
            v_star=d["v_star"], rho_star=d["rho_star"], T_star=d["T_star"], L_star=d["L_star"],
            qp_status=d["qp_status"],
        )
        for d in doc["periods"]
    ]
    return PortfolioSchedule(
        periods=periods, asset_ids=tuple(doc["asset_ids"]), alpha=doc["alpha"],
        window_n=doc["window_n"], lam=doc["lambda"],
    )


def bench_to_dict(rep: BenchReport, cfg: Optional[SynthConfig] = None, selector: Optional[dict] = None) -> dict:
    return {
        "kind": "bench",
        "config": None if cfg is None else asdict(cfg),
        "selector": selector,
        "runs": rep.runs,
        "alpha": rep.alpha,
        "empirical_fdr": rep.empirical_fdr,
        "empirical_tpr": rep.empirical_tpr,
        "fdr_se": rep.fdr_se,
        "tpr_se": rep.tpr_se,
        "failed_runs": rep.failed_runs,
        "failures": list(rep.failures),
        "per_run": [asdict(r) for r in rep.per_run],
    }


def bench_from_dict(doc: dict) -> BenchReport:
    return BenchReport(
        runs=doc["runs"], alpha=doc["alpha"], empirical_fdr=doc["empirical_fdr"],
        empirical_tpr=doc["empirical_tpr"], fdr_se=doc["fdr_se"], tpr_se=doc["tpr_se"],
        per_run=[TruthReport(**r) for r in doc["per_run"]], failed_runs=doc["failed_runs"],
        failures=list(doc["failures"]),
    )


def synth_config_from_dict(doc: dict) -> SynthConfig:
    known = set(SynthConfig.__dataclass_fields__)
    extra = set(doc) - known
    if extra:
        raise DataError(f"unknown SynthConfig field(s): {', '.join(sorted(extra))}")
    try:
        return SynthConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid SynthConfig: {exc}") from None


# --- backtest CSV outputs ---------------------------------------------------


def write_wealth_csv(path, metrics: TrackingMetrics, schedule: PortfolioSchedule) -> None:
    """One row per test day: period, date, portfolio wealth, index wealth."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "date", "portfolio_wealth", "index_wealth"])
        for pr, dates, pw, iw in zip(schedule.periods, metrics.dates, metrics.portfolio_wealth, metrics.index_wealth):
            for d, a, b in zip(dates, pw, iw):
                w.writerow([pr.m, _iso(d), repr(float(a)), repr(float(b))])


def write_quarters_csv(path, metrics: TrackingMetrics, schedule: PortfolioSchedule) -> None:
    """One row per rebalancing period: dates, number of stocks held and MSTE."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "test_start", "test_end", "num_stocks", "mste", "fallback"])
        for pr, k, e in zip(schedule.periods, metrics.num_stocks, metrics.mste):
            w.writerow([pr.m, _iso(pr.test_dates[0]), _iso(pr.test_dates[1]), int(k), repr(float(e)), pr.fallback or ""])


def read_wealth_csv(path):
    """Return ``{period: (dates, portfolio_wealth, index_wealth)}``."""
    out = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            m = int(row["period"])
            d, a, b = out.setdefault(m, ([], [], []))
            d.append(_undate(row["date"]))
            a.append(float(row["portfolio_wealth"]))
            b.append(float(row["index_wealth"]))
    return {m: (tuple(d), np.asarray(a), np.asarray(b)) for m, (d, a, b) in out.items()}
