"""Treasury par-yield CSV ingestion and the yield-series containers."""

import csv
import datetime as dt
import enum
import io
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import EmptySeries, GridMismatch, MalformedHeader, MalformedRow, OutOfRange

DEFAULT_TERMS = (1, 3, 6, 12, 24, 36, 60, 84, 120, 240, 360)
TERM_COLUMNS = ("1 Mo", "3 Mo", "6 Mo", "1 Yr", "2 Yr", "3 Yr", "5 Yr", "7 Yr", "10 Yr", "20 Yr", "30 Yr")
COLUMN_FOR_TERM = dict(zip(DEFAULT_TERMS, TERM_COLUMNS))

YIELD_MIN = -2.0
YIELD_MAX = 25.0
MISSING_TOKENS = {"", "N/A", "NA", "ND", "NAN"}


class MissingDataPolicy(enum.Enum):
    DROP_ROW = "drop"
    FORWARD_FILL = "ffill"


@dataclass(frozen=True)
class TermGrid:
    """Maturities in months, strictly increasing."""

    terms: tuple = DEFAULT_TERMS

    def __post_init__(self):
        terms = tuple(float(t) if not float(t).is_integer() else int(t) for t in self.terms)
        if not terms:
            raise ValueError("term grid is empty")
        if any(b <= a for a, b in zip(terms, terms[1:])):
            raise ValueError("term grid must be strictly increasing")
        if terms[0] <= 0:
            raise ValueError("maturities must be positive")
        object.__setattr__(self, "terms", terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def as_array(self):
        return np.asarray(self.terms, dtype=float)


DEFAULT_GRID = TermGrid()


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_yields(yields):
    if not np.all(np.isfinite(yields)):
        raise ValueError("yields must be finite")
    if np.any(yields < YIELD_MIN) or np.any(yields > YIELD_MAX):
        raise ValueError(f"yield outside sanity bounds [{YIELD_MIN}, {YIELD_MAX}]")


@dataclass(frozen=True, eq=False)
class YieldCurve:
    date: dt.date
    yields: np.ndarray
    grid: TermGrid = DEFAULT_GRID

    def __post_init__(self):
        y = _frozen(self.yields)
        if y.shape != (len(self.grid),):
            raise GridMismatch(f"{y.shape[0] if y.ndim else 0} yields for a {len(self.grid)}-term grid")
        _check_yields(y)
        object.__setattr__(self, "yields", y)

    def __eq__(self, other):
        if not isinstance(other, YieldCurve):
            return NotImplemented
        return (self.date == other.date and self.grid == other.grid
                and np.array_equal(self.yields, other.yields))


class YieldSeries:
    """Date-ascending yield curves on a shared grid.

    Stored as a ``(n_days, n_terms)`` read-only matrix; immutable after
    construction.
    """

    def __init__(self, dates, yields, grid=DEFAULT_GRID):
        dates = tuple(dates)
        y = _frozen(yields)
        if not dates:
            raise EmptySeries("yield series has no curves")
        if y.shape != (len(dates), len(grid)):
            raise GridMismatch(f"yield matrix shape {y.shape} does not match {len(dates)} dates x {len(grid)} terms")
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError("dates must be strictly increasing")
        _check_yields(y)
        self._dates = dates
        self._yields = y
        self._grid = grid

    @classmethod
    def from_curves(cls, curves):
        curves = list(curves)
        if not curves:
            raise EmptySeries("yield series has no curves")
        grid = curves[0].grid
        if any(c.grid != grid for c in curves):
            raise GridMismatch("curves do not share a term grid")
        return cls([c.date for c in curves], np.vstack([c.yields for c in curves]), grid)

    @property
    def grid(self):
        return self._grid

    @property
    def dates(self):
        return self._dates

    @property
    def yields(self):
        return self._yields

    @property
    def curves(self):
        return tuple(self[i] for i in range(len(self)))

    def __len__(self):
        return len(self._dates)

    def __getitem__(self, i):
        return YieldCurve(self._dates[i], self._yields[i], self._grid)

    def index_of(self, date):
        try:
            return self._dates.index(date)
        except ValueError:
            raise OutOfRange(f"date {date.isoformat()} not in series") from None

    def __eq__(self, other):
        if not isinstance(other, YieldSeries):
            return NotImplemented
        return (self._grid == other._grid and self._dates == other._dates
                and np.array_equal(self._yields, other._yields))

    def __repr__(self):
        return f"YieldSeries({len(self)} curves, {self._dates[0]} .. {self._dates[-1]})"


def window(series, start_index, length):
    if start_index < 0 or length <= 0 or start_index + length > len(series):
        raise OutOfRange(
            f"window [{start_index}, {start_index + length}) outside series of length {len(series)}"
        )
    sl = slice(start_index, start_index + length)
    return YieldSeries(series.dates[sl], series.yields[sl], series.grid)


def parse_date(text):
    """MM/DD/YY or MM/DD/YYYY; two-digit years pivot at 70."""
    parts = text.strip().split("/")
    if len(parts) != 3 or not all(p.isdigit() for p in parts):
        raise ValueError(f"bad date {text!r}")
    month, day, year = (int(p) for p in parts)
    if len(parts[2]) == 2:
        year += 1900 if year >= 70 else 2000
    elif len(parts[2]) != 4:
        raise ValueError(f"bad year in date {text!r}")
    return dt.date(year, month, day)


def _read_text(source):
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8-sig")
    if isinstance(source, str):
        return source
    raw = source.read()
    return raw.decode("utf-8-sig") if isinstance(raw, bytes) else raw


def parse_treasury_csv_with_stats(source, policy=MissingDataPolicy.DROP_ROW):
    """Parse Treasury CSV data; returns ``(series, n_dropped)``.

    ``source`` is bytes, text, or a file object. Columns beyond Date and the
    eleven grid terms are ignored.
    """
    policy = MissingDataPolicy(policy)
    reader = csv.reader(io.StringIO(_read_text(source)))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptySeries("input is empty") from None
    if header and header[0].startswith("\ufeff"):
        header[0] = header[0][1:]
    required = ("Date",) + TERM_COLUMNS
    missing = [c for c in required if c not in header]
    if missing:
        raise MalformedHeader("missing column(s): " + ", ".join(repr(c) for c in missing))
    date_col = header.index("Date")
    term_cols = [header.index(c) for c in TERM_COLUMNS]

    rows = []  # (date, line, values-with-None)
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise MalformedRow(line_no, f"expected {len(header)} fields, got {len(row)}")
        try:
            date = parse_date(row[date_col])
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        values = []
        for col, name in zip(term_cols, TERM_COLUMNS):
            cell = row[col].strip()
            if cell.upper() in MISSING_TOKENS:
                values.append(None)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise MalformedRow(line_no, f"non-numeric {name!r} value {cell!r}") from None
            if not np.isfinite(v) or not YIELD_MIN <= v <= YIELD_MAX:
                raise MalformedRow(line_no, f"{name!r} value {cell} outside [{YIELD_MIN}, {YIELD_MAX}]")
            values.append(v)
        rows.append((date, line_no, values))

    rows.sort(key=lambda r: r[0])
    for (d1, _, _), (d2, line, _) in zip(rows, rows[1:]):
        if d1 == d2:
            raise MalformedRow(line, f"duplicate date {d2.isoformat()}")

    dates, matrix, dropped = [], [], 0
    last = [None] * len(TERM_COLUMNS)
    for date, line, values in rows:
        if any(v is None for v in values):
            if policy is MissingDataPolicy.DROP_ROW:
                dropped += 1
                continue
            filled = []
            for j, v in enumerate(values):
                if v is None:
                    if last[j] is None:
                        raise MalformedRow(line, f"cannot forward-fill {TERM_COLUMNS[j]!r}: no prior observation")
                    v = last[j]
                filled.append(v)
            values = filled
        last = list(values)
        dates.append(date)
        matrix.append(values)
    if not dates:
        raise EmptySeries("no complete rows in input")
    return YieldSeries(dates, np.array(matrix), DEFAULT_GRID), dropped


def parse_treasury_csv(source, policy=MissingDataPolicy.DROP_ROW):
    return parse_treasury_csv_with_stats(source, policy)[0]


def _format_yield(v):
    s = f"{v:.2f}"
    return s if float(s) == v else repr(float(v))


def write_treasury_csv(series):
    """Canonical CSV text: Date plus the grid columns, dates as MM/DD/YYYY."""
    if series.grid.terms != DEFAULT_TERMS:
        raise GridMismatch("canonical CSV requires the default 11-term grid")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("Date",) + TERM_COLUMNS)
    for date, row in zip(series.dates, series.yields):
        writer.writerow([date.strftime("%m/%d/%Y")] + [_format_yield(v) for v in row])
    return out.getvalue()


def load_fixture():
    """The bundled offline fixture series."""
    data = resources.files("yieldcast.fixtures").joinpath("treasury_fixture.csv").read_bytes()
    return parse_treasury_csv(data)
