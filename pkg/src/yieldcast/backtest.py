"""Rolling-window backtests and per-term RMSE reports."""

import csv
import datetime as dt
import enum
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dynamic_gp, ts_models
from .data import DEFAULT_TERMS, YieldSeries
from .errors import EmptyRecords, InsufficientData, MismatchedRanges

SCHEMA_VERSION = 1
RECORD_FIELDS = ("date", "method", "term_months", "predicted", "actual",
                 "squared_error", "interval_lo", "interval_hi")
REGIONS = {
    "short": lambda term: term <= 12,
    "medium": lambda term: 12 < term <= 60,
    "long": lambda term: term > 60,
}
TIE_TOL = 1e-12
KERNEL_UNITS = {
    "maturity_input": "months, rescaled to years inside the kernel",
    "rbf_variance": "percent^2",
    "rbf_lengthscale": "years",
    "linear_variance": "percent^2 per year^2",
    "noise_sigma": "percent",
}


class Method(enum.Enum):
    GP = "gp"
    MVTS = "mvts"
    TSNS = "tsns"


@dataclass(frozen=True)
class BacktestConfig:
    """Evaluation days are ``start_index..end_index`` inclusive (defaults:
    first day after the initial window through the last day)."""

    method: Method
    window_days: int = 250
    start_index: int | None = None
    end_index: int | None = None
    dgp: dynamic_gp.DgpConfig = field(default_factory=dynamic_gp.DgpConfig)
    max_order: int = ts_models.DEFAULT_MAX_ORDER
    lambda_grid: tuple = ts_models.DEFAULT_LAMBDA_GRID
    freeze_lambda: bool = False
    threads: int | None = None


@dataclass(frozen=True, eq=False)
class ForecastRecord:
    date: dt.date
    method: Method
    predicted: np.ndarray
    actual: np.ndarray
    squared_error: np.ndarray
    interval_lo: np.ndarray | None = None
    interval_hi: np.ndarray | None = None

    @classmethod
    def make(cls, date, method, predicted, actual, interval_lo=None, interval_hi=None):
        predicted = np.asarray(predicted, dtype=float)
        actual = np.asarray(actual, dtype=float)
        return cls(date, Method(method), predicted, actual, (predicted - actual) ** 2,
                   interval_lo, interval_hi)


def evaluation_range(series, config):
    n = len(series)
    start = config.window_days if config.start_index is None else config.start_index
    end = n - 1 if config.end_index is None else config.end_index
    min_start = 1 if config.method is Method.GP else config.window_days
    if n < config.window_days + 1:
        raise InsufficientData(f"{n} curves cannot cover a {config.window_days}-day window plus one test day")
    if start < min_start:
        raise InsufficientData(f"first evaluation day {start} leaves fewer than {min_start} training days")
    if end >= n or end < start:
        raise InsufficientData(f"evaluation range [{start}, {end}] invalid for {n} curves")
    return start, end


def _mvts_forecast(yields, d, config):
    train = yields[d - config.window_days:d]
    order, model = ts_models.select_order(train, config.max_order)
    return ts_models.forecast_var(model, train[-order:])


def _tsns_forecast(series, d, config, lambda_grid):
    train = YieldSeries(series.dates[d - config.window_days:d],
                        series.yields[d - config.window_days:d], series.grid)
    factors = ts_models.extract_ns_factors(train, lambda_grid)
    return ts_models.forecast_dns(factors, series.grid, config.max_order)


def _map_days(fn, days, threads):
    if threads is not None and threads <= 1:
        return [fn(d) for d in days]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, days))


def _run_gp(series, start, end, config):
    first = max(0, start - config.window_days)
    state = dynamic_gp.init(series[first], config=config.dgp)
    records = []
    for i in range(first + 1, end + 1):
        if i >= start:
            fc = dynamic_gp.predict(state, config.dgp.coverage)
            records.append(ForecastRecord.make(series.dates[i], Method.GP, fc.mean, series.yields[i],
                                               fc.interval_lo, fc.interval_hi))
        if i < end:
            state, _ = dynamic_gp.step(state, series[i], config.dgp.refit, config.dgp)
    return records


def rolling_backtest(series, config):
    """One-step-ahead forecasts for every evaluation day, oldest first.

    MVTS and TSNS refit on exactly the ``window_days`` curves before each test
    day. The GP filter runs sequentially, starting ``window_days`` before the
    first evaluation day, and each record holds the forecast issued before
    that day's curve was seen.
    """
    method = Method(config.method)
    start, end = evaluation_range(series, config)
    if method is Method.GP:
        return _run_gp(series, start, end, config)
    days = range(start, end + 1)
    if method is Method.MVTS:
        preds = _map_days(lambda d: _mvts_forecast(series.yields, d, config), days, config.threads)
    else:
        grid = config.lambda_grid
        if config.freeze_lambda:
            first = YieldSeries(series.dates[start - config.window_days:start],
                                series.yields[start - config.window_days:start], series.grid)
            grid = (ts_models.extract_ns_factors(first, grid).lam,)
        preds = _map_days(lambda d: _tsns_forecast(series, d, config, grid), days, config.threads)
    return [ForecastRecord.make(series.dates[d], method, p, series.yields[d])
            for d, p in zip(days, preds)]


@dataclass(frozen=True, eq=False)
class RmseReport:
    method: Method
    terms: tuple
    rmse: np.ndarray
    n: int
    start_date: dt.date
    end_date: dt.date
    pooled_rmse: float

    def as_dict(self):
        return {_term_key(t): float(v) for t, v in zip(self.terms, self.rmse)}


def _term_key(term):
    return str(int(term)) if float(term).is_integer() else repr(float(term))


def rmse_per_term(records, terms=None):
    """Per-term RMSE plus the pooled figure sqrt(sum over days and terms / N)."""
    records = list(records)
    if not records:
        raise EmptyRecords("no forecast records")
    methods = {r.method for r in records}
    if len(methods) != 1:
        raise ValueError("records mix several methods")
    sq = np.vstack([r.squared_error for r in records])
    n = sq.shape[0]
    if terms is None:
        terms = DEFAULT_TERMS
    dates = [r.date for r in records]
    return RmseReport(methods.pop(), tuple(terms), np.sqrt(sq.sum(axis=0) / n), n,
                      min(dates), max(dates), float(np.sqrt(sq.sum() / n)))


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    methods: tuple
    terms: tuple
    rmse: dict
    term_winner: tuple
    region_winner: dict

    def to_text(self):
        names = [m.value.upper() for m in self.methods]
        width = max(9, *(len(n) for n in names)) + 2
        lines = ["Term".ljust(10) + "".join(n.rjust(width) for n in names)]
        for j, term in enumerate(self.terms):
            cells = []
            for m in self.methods:
                mark = "*" if self.term_winner[j] is m else " "
                cells.append(f"{self.rmse[m][j]:.3f}{mark}".rjust(width))
            lines.append(term_label(term).ljust(10) + "".join(cells))
        lines.append("")
        for region, winner in self.region_winner.items():
            lines.append(f"{region} region winner: {winner.value.upper() if winner else 'tie'}")
        return "\n".join(lines) + "\n"


def term_label(term):
    term = float(term)
    if term < 12 or term % 12:
        return f"{term:g} Month" + ("s" if term != 1 else "")
    years = int(term // 12)
    return f"{years} Year" + ("s" if years != 1 else "")


def _argmin_or_tie(values):
    order = sorted(values, key=lambda kv: kv[1])
    if len(order) > 1 and order[1][1] - order[0][1] <= TIE_TOL:
        return None
    return order[0][0]


def compare_report(reports):
    """Side-by-side RMSE with the winning method per term and per region.

    A region's winner has the lowest mean RMSE over the region's terms;
    differences within 1e-12 count as ties and flag nobody.
    """
    reports = list(reports)
    if not reports:
        raise EmptyRecords("no reports to compare")
    ref = reports[0]
    for r in reports[1:]:
        if (r.n, r.start_date, r.end_date, r.terms) != (ref.n, ref.start_date, ref.end_date, ref.terms):
            raise MismatchedRanges(f"{r.method.value} covers a different evaluation range than {ref.method.value}")
    methods = tuple(r.method for r in reports)
    rmse = {r.method: np.asarray(r.rmse, dtype=float) for r in reports}
    term_winner = tuple(
        _argmin_or_tie([(m, rmse[m][j]) for m in methods]) for j in range(len(ref.terms))
    )
    region_winner = {}
    for region, member in REGIONS.items():
        idx = [j for j, t in enumerate(ref.terms) if member(t)]
        if idx:
            region_winner[region] = _argmin_or_tie([(m, float(np.mean(rmse[m][idx]))) for m in methods])
    return ComparisonTable(methods, ref.terms, rmse, term_winner, region_winner)


def _fmt(x):
    return "" if x is None else repr(float(x))


def write_records_csv(records, terms=None):
    if terms is None:
        terms = DEFAULT_TERMS
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        for j, term in enumerate(terms):
            lo = None if r.interval_lo is None else r.interval_lo[j]
            hi = None if r.interval_hi is None else r.interval_hi[j]
            w.writerow([r.date.isoformat(), r.method.value, _term_key(term), _fmt(r.predicted[j]),
                        _fmt(r.actual[j]), _fmt(r.squared_error[j]), _fmt(lo), _fmt(hi)])
    return out.getvalue()


def read_records_csv(text):
    """Rebuild records from :func:`write_records_csv` output (terms in file order)."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise EmptyRecords("record CSV has no rows")
    grouped = {}
    for row in rows:
        key = (row["date"], row["method"])
        grouped.setdefault(key, []).append(row)
    records, terms = [], None
    for (date, method), group in grouped.items():
        col = lambda name: np.array([float(g[name]) for g in group])  # noqa: E731
        has_iv = all(g["interval_lo"] != "" for g in group)
        records.append(ForecastRecord(
            dt.date.fromisoformat(date), Method(method), col("predicted"), col("actual"),
            col("squared_error"),
            col("interval_lo") if has_iv else None, col("interval_hi") if has_iv else None,
        ))
        terms = tuple(float(g["term_months"]) for g in group)
    return records, terms


def reports_to_json(reports, extra=None):
    reports = list(reports)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "rmse": {r.method.value: r.as_dict() for r in reports},
        "summary": {
            r.method.value: {
                "n": r.n,
                "start_date": r.start_date.isoformat(),
                "end_date": r.end_date.isoformat(),
                "pooled_rmse": r.pooled_rmse,
            }
            for r in reports
        },
        "kernel_units": KERNEL_UNITS,
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def reports_to_csv(reports):
    reports = list(reports)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["term_months"] + [r.method.value for r in reports])
    for j, term in enumerate(reports[0].terms):
        w.writerow([_term_key(term)] + [repr(float(r.rmse[j])) for r in reports])
    w.writerow(["pooled"] + [repr(r.pooled_rmse) for r in reports])
    w.writerow(["n"] + [r.n for r in reports])
    return out.getvalue()
