"""Command-line entry point: ``yieldcast ingest|fit|backtest``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import datetime as dt
import itertools
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import backtest, basis, dynamic_gp, gp, plots, ts_models
from .data import (DEFAULT_TERMS, MissingDataPolicy, YieldSeries, load_fixture, parse_treasury_csv,
                   parse_treasury_csv_with_stats, write_treasury_csv)
from .errors import DataError, NumericalError, YieldcastError
from .numerics import OptimConfig

log = logging.getLogger("yieldcast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_series(path, policy=MissingDataPolicy.DROP_ROW):
    if path is None:
        return load_fixture()
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_treasury_csv(data, policy)


def _iso_date(text):
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _threads():
    env = os.environ.get("YIELDCAST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"YIELDCAST_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


# ---------------------------------------------------------------- ingest

def cmd_ingest(args):
    try:
        raw = Path(args.input).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    series, dropped = parse_treasury_csv_with_stats(raw, MissingDataPolicy(args.policy))
    write_atomic(args.output, write_treasury_csv(series))
    print(f"{len(series)} rows, {dropped} dropped")
    return EXIT_OK


# ---------------------------------------------------------------- fit

def _check_coverage(coverage):
    if not 0.0 < coverage < 1.0:
        raise UsageError(f"--coverage must lie in (0, 1), got {coverage}")


def _basis_from_args(args):
    try:
        return _make_basis(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _make_basis(args):
    kind = args.basis
    if kind == "fourier":
        return basis.FourierBasis(args.period, args.pairs)
    if kind == "nelson-siegel":
        return basis.NelsonSiegelBasis(args.decay if args.decay is not None else 0.0609)
    if kind == "exponential":
        if not args.rates:
            raise UsageError("--rates is required for the exponential basis")
        return basis.ExponentialBasis(args.rates)
    if not args.centers or args.width is None:
        raise UsageError("--centers and --width are required for the gaussian basis")
    return basis.GaussianRbfBasis(args.centers, args.width)


def cmd_fit(args):
    _check_coverage(args.coverage)
    if args.penalty < 0:
        raise UsageError("--penalty must be non-negative")
    if args.decay is not None and not args.decay > 0:
        raise UsageError("--decay must be positive")
    series = _load_series(args.input)
    curve = series[series.index_of(args.date)]
    taus = curve.grid.as_array()
    y = np.asarray(curve.yields)
    doc = {"schema_version": 1, "date": curve.date.isoformat(), "method": args.method,
           "terms": list(curve.grid.terms), "actual": y.tolist()}
    if args.method == "ns":
        lam_grid = (args.decay,) if args.decay is not None else ts_models.DEFAULT_LAMBDA_GRID
        one_day = YieldSeries([curve.date], y[None, :], curve.grid)
        factors = ts_models.extract_ns_factors(one_day, lam_grid)
        fit = basis.BasisFit(basis.NelsonSiegelBasis(factors.lam), factors.factors[0])
        b1, b2, b3 = (float(v) for v in fit.coefficients)
        doc.update(beta1=b1, beta2=b2, beta3=b3, **{"lambda": factors.lam},
                   fitted=basis.evaluate(fit, taus).tolist())
    elif args.method == "ols-basis":
        spec = _basis_from_args(args)
        fit = (basis.fit_penalized(spec, curve, args.penalty) if args.penalty
               else basis.fit_ols(spec, curve))
        doc.update(basis=type(spec).__name__, basis_params=_spec_params(spec),
                   coefficients=fit.coefficients.tolist(), penalty_lambda=fit.penalty_lambda,
                   fitted=basis.evaluate(fit, taus).tolist())
    else:
        zero = np.zeros_like(y)
        params = gp.fit_hyperparams(taus, y, zero, None, OptimConfig(seed=args.seed))
        post = gp.posterior(params, taus, y, zero, taus, zero)
        lo, hi = gp.predictive_interval(post, args.coverage)
        doc.update(hyperparameters=params.as_dict(), kernel_units=backtest.KERNEL_UNITS,
                   log_marginal_likelihood=gp.log_marginal_likelihood(params, taus, y, zero),
                   fitted=post.posterior_mean.tolist(), coverage=args.coverage,
                   interval_lo=lo.tolist(), interval_hi=hi.tolist())
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _spec_params(spec):
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(spec).items()}


# ---------------------------------------------------------------- backtest

def _parse_methods(text):
    try:
        methods = [backtest.Method(m.strip().lower()) for m in text.split(",") if m.strip()]
    except ValueError:
        raise UsageError(f"unknown method in {text!r}; choose from gp, mvts, tsns") from None
    if not methods:
        raise UsageError("no methods given")
    return list(dict.fromkeys(methods))


def _range_indices(series, window, date_from, date_to):
    if date_from and date_to and date_from > date_to:
        raise UsageError("--from is after --to")
    dates = series.dates
    start = window
    if date_from:
        start = max(start, next((i for i, d in enumerate(dates) if d >= date_from), len(dates)))
    end = len(dates) - 1
    if date_to:
        end = max((i for i, d in enumerate(dates) if d <= date_to), default=-1)
    if start > end:
        raise UsageError("no evaluable days in the requested range")
    return start, end


def _write_plots(out, records_by_method, terms):
    plot_dir = out / "plots"
    names = list(records_by_method)
    for a, b in itertools.combinations(names, 2):
        ra, rb = records_by_method[a], records_by_method[b]
        dates = [r.date for r in ra]
        for j, term in enumerate(terms):
            svg = plots.squared_error_chart(
                backtest.term_label(term), dates,
                {a.value.upper(): [r.squared_error[j] for r in ra],
                 b.value.upper(): [r.squared_error[j] for r in rb]})
            write_atomic(plot_dir / f"sqerr_{int(term)}m_{a.value}_vs_{b.value}.svg", svg)
    first = records_by_method[names[0]]
    n = len(first)
    for k in range(1, 5):
        i = min(n - 1, round(k * n / 5))
        svg = plots.curve_overlay_chart(
            first[i].date, terms, first[i].actual,
            {m.value.upper(): records_by_method[m][i].predicted for m in names})
        write_atomic(plot_dir / f"sample_day_{k}_{first[i].date.isoformat()}.svg", svg)


def cmd_backtest(args):
    methods = _parse_methods(args.methods)
    if args.window < 1:
        raise UsageError("--window must be positive")
    if args.max_order < 1:
        raise UsageError("--max-order must be at least 1")
    _check_coverage(args.coverage)
    series = _load_series(args.input)
    start, end = _range_indices(series, args.window, args.date_from, args.date_to)
    out = Path(args.out)
    threads = _threads()
    dgp_config = dynamic_gp.DgpConfig(coverage=args.coverage, refit=not args.no_refit,
                                      multistart_every=args.multistart_every,
                                      optim=OptimConfig(seed=args.seed))
    records_by_method, failures = {}, {}
    for method in methods:
        config = backtest.BacktestConfig(method, args.window, start, end, dgp_config,
                                         args.max_order, freeze_lambda=args.freeze_lambda,
                                         threads=threads)
        log.info("running %s on %d evaluation days", method.value, end - start + 1)
        try:
            records = backtest.rolling_backtest(series, config)
        except YieldcastError as exc:
            print(f"error: {method.value} failed: {exc}", file=sys.stderr)
            failures[method] = exc
            continue
        records_by_method[method] = records
        write_atomic(out / f"records_{method.value}.csv", backtest.write_records_csv(records))

    if records_by_method:
        reports = [backtest.rmse_per_term(r) for r in records_by_method.values()]
        extra = {"config": {
            "methods": [m.value for m in records_by_method], "window_days": args.window,
            "seed": args.seed, "max_order": args.max_order, "coverage": args.coverage,
            "freeze_lambda": args.freeze_lambda,
            "first_date": series.dates[start].isoformat(), "last_date": series.dates[end].isoformat(),
        }}
        write_atomic(out / "report.json", backtest.reports_to_json(reports, extra))
        write_atomic(out / "report.csv", backtest.reports_to_csv(reports))
        table = backtest.compare_report(reports)
        write_atomic(out / "comparison.txt", table.to_text())
        sys.stdout.write(table.to_text())
        if args.plots:
            _write_plots(out, records_by_method, DEFAULT_TERMS)
    if failures:
        numerical = any(isinstance(e, NumericalError) for e in failures.values())
        return EXIT_NUMERICAL if numerical else EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    p = _Parser(prog="yieldcast", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ing = sub.add_parser("ingest", help="validate a Treasury CSV and write the canonical form")
    ing.add_argument("--input", required=True, help="Treasury par-yield CSV")
    ing.add_argument("--policy", choices=[m.value for m in MissingDataPolicy], default="drop",
                     help="rows with missing cells: drop them or forward-fill per column")
    ing.add_argument("--output", required=True, help="canonical CSV destination")
    ing.set_defaults(func=cmd_ingest)

    fit = sub.add_parser("fit", help="fit a single day's curve")
    fit.add_argument("--input", help="Treasury CSV (default: bundled fixture)")
    fit.add_argument("--date", required=True, type=_iso_date, help="YYYY-MM-DD")
    fit.add_argument("--method", choices=["gp", "ns", "ols-basis"], default="gp")
    fit.add_argument("--decay", "--lambda", dest="decay", type=float,
                     help="Nelson-Siegel decay per month (ns: default grid search)")
    fit.add_argument("--basis", choices=["fourier", "nelson-siegel", "exponential", "gaussian"],
                     default="fourier")
    fit.add_argument("--pairs", type=int, default=2, help="Fourier sine/cosine pairs")
    fit.add_argument("--period", type=float, default=720.0, help="Fourier period in months")
    fit.add_argument("--rates", type=_float_list, help="exponential rates per month, comma-separated")
    fit.add_argument("--centers", type=_float_list, help="Gaussian centers in months, comma-separated")
    fit.add_argument("--width", type=float, help="Gaussian basis width")
    fit.add_argument("--penalty", type=float, default=0.0, help="roughness penalty weight")
    fit.add_argument("--coverage", type=float, default=0.95)
    fit.add_argument("--seed", type=int, default=42)
    fit.add_argument("--output", help="write JSON here instead of stdout")
    fit.set_defaults(func=cmd_fit)

    bt = sub.add_parser("backtest", help="rolling-window backtest and RMSE report")
    bt.add_argument("--input", help="Treasury CSV (default: bundled fixture)")
    bt.add_argument("--methods", default="gp,mvts,tsns")
    bt.add_argument("--window", type=int, default=250, help="training days per forecast")
    bt.add_argument("--from", dest="date_from", type=_iso_date)
    bt.add_argument("--to", dest="date_to", type=_iso_date)
    bt.add_argument("--out", required=True, help="output directory")
    bt.add_argument("--plots", action="store_true", help="also write SVG charts")
    bt.add_argument("--seed", type=int, default=42, help="optimizer multi-start seed")
    bt.add_argument("--max-order", type=int, default=ts_models.DEFAULT_MAX_ORDER)
    bt.add_argument("--freeze-lambda", action="store_true",
                    help="pick the Nelson-Siegel decay once instead of per window")
    bt.add_argument("--coverage", type=float, default=0.95)
    bt.add_argument("--multistart-every", type=int, default=50)
    bt.add_argument("--no-refit", action="store_true", help="keep the day-one GP hyperparameters")
    bt.set_defaults(func=cmd_backtest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"yieldcast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"yieldcast: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"yieldcast: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
