"""Data ingestion and the empirical test battery.

A panel holds an excess-return series and named predictor series that are
already aligned for the predictive regression: ``excess_return[t]`` is the
month after ``predictors[name][t]``.  ``dates`` are the months of the
dependent variable.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from coefrand.core import Dataset
from coefrand.errors import (
    CoefRandError,
    MisalignedDates,
    MissingColumn,
    NonConvergenceWarning,
    NonNumericCell,
)
from coefrand.garchfit import Eligibility, GarchFitResult, fit_ar1_garch11, screen_predictor
from coefrand.subsampling import Subsampler, run_test
from coefrand.teststats import ROBUST, StatKind

RETURN_KEY = "excess_return"
DATE_COLUMN = "yyyymm"
PREDICTOR_NAMES = ("BM", "DE", "DFY", "DFR", "DP", "DY", "EP", "INFL",
                   "LTR", "LTY", "NTIS", "SVAR", "TBL", "TMS")
SOURCE_URL = "https://sites.google.com/view/agoyal145"
# raw monthly columns needed to build the fourteen predictors
RAW_COLUMNS = ("Index", "D12", "E12", "b/m", "tbl", "AAA", "BAA", "lty",
                     "ntis", "Rfree", "infl", "ltr", "corpr", "svar", "CRSP_SPvw")
MISSING_TOKENS = {"", "na", "nan", "null", "."}

REJECT_MARK = "Yes"
ACCEPT_MARK = "–"
SCREENED_MARK = "NA"
ERROR_MARK = "ERR"

EMPIRICAL_DATA_MESSAGE = f"""\
The empirical command needs the monthly predictor file, which is not
bundled.  Download the monthly sheet from {SOURCE_URL}, save it as CSV
with its header row, and pass it with --input.

Expected columns (--layout raw, the default):
  {DATE_COLUMN}, {", ".join(RAW_COLUMNS)}
or an aligned panel (--layout panel):
  {DATE_COLUMN}, {RETURN_KEY}, {", ".join(PREDICTOR_NAMES)}
"""


# ---------------------------------------------------------------------------
# months


def parse_month(token: str, row: int) -> tuple[int, int]:
    s = token.strip()
    if len(s) != 6 or not s.isdigit():
        raise MisalignedDates(f"row {row}: date {token!r} is not YYYYMM")
    year, month = int(s[:4]), int(s[4:])
    if not 1 <= month <= 12:
        raise MisalignedDates(f"row {row}: month {month} out of range in {token!r}")
    return year, month


def month_index(year: int, month: int) -> int:
    return 12 * year + month - 1


def format_month(index: int) -> str:
    return f"{index // 12:04d}{index % 12 + 1:02d}"


# ---------------------------------------------------------------------------
# panel


@dataclass(frozen=True)
class PredictorPanel:
    dates: tuple
    excess_return: np.ndarray
    predictors: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.dates)
        y = np.asarray(self.excess_return, dtype=np.float64)
        if y.shape != (n,):
            raise MisalignedDates(f"{n} dates but {y.size} returns")
        preds = {}
        for name, v in self.predictors.items():
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (n,):
                raise MisalignedDates(f"predictor {name} has length {v.size}, expected {n}")
            preds[name] = v
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "excess_return", y)
        object.__setattr__(self, "predictors", preds)

    @property
    def T(self) -> int:
        return len(self.dates)

    def dataset(self, name: str, demean: bool = True) -> Dataset:
        """Regression data for one predictor."""
        if name not in self.predictors:
            raise MissingColumn(f"panel has no predictor {name!r}")
        return Dataset.from_arrays(self.excess_return, self.predictors[name], demean=demean)

    def __eq__(self, other):
        if not isinstance(other, PredictorPanel):
            return NotImplemented
        return (
            self.dates == other.dates
            and np.array_equal(self.excess_return, other.excess_return)
            and self.predictors.keys() == other.predictors.keys()
            and all(np.array_equal(v, other.predictors[k]) for k, v in self.predictors.items())
        )

    __hash__ = None


def _read_rows(path):
    """Header and ``(line number, row)`` pairs of a CSV, blank rows skipped."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(f"{path}: file is empty") from None
        rows = [(n, r) for n, r in enumerate(reader, start=2) if any(c.strip() for c in r)]
    return header, rows


def _cell(row, k):
    return row[k].strip() if k < len(row) else ""


def _parse_table(header, rows, wanted, date_column: str, source, thousands: bool = False):
    """Dates and float columns; a missing or non-numeric cell names its row."""
    for col in (date_column, *wanted):
        if col not in header:
            raise MissingColumn(f"{source}: column {col!r} not found")
    pos = {c: header.index(c) for c in (date_column, *wanted)}
    dates, cols = [], {c: [] for c in wanted}
    for lineno, row in rows:
        date = _cell(row, pos[date_column])
        dates.append(month_index(*parse_month(date, lineno)))
        for c in wanted:
            raw = _cell(row, pos[c])
            if thousands:
                raw = raw.replace(",", "")
            if raw.lower() in MISSING_TOKENS:
                raise NonNumericCell(f"row {lineno} (date {date}): missing value in column {c!r}")
            try:
                val = float(raw)
            except ValueError:
                raise NonNumericCell(f"row {lineno} (date {date}): {raw!r} in column {c!r} is not numeric") from None
            if not math.isfinite(val):
                raise NonNumericCell(f"row {lineno} (date {date}): non-finite value in column {c!r}")
            cols[c].append(val)
    _check_consecutive(dates)
    return dates, {c: np.array(v, dtype=np.float64) for c, v in cols.items()}


def _check_consecutive(dates):
    for i in range(1, len(dates)):
        if dates[i] != dates[i - 1] + 1:
            raise MisalignedDates(
                f"dates are not consecutive months: {format_month(dates[i - 1])} followed by {format_month(dates[i])}"
            )


def read_columns(path, columns, date_column: str = DATE_COLUMN) -> tuple[tuple, dict]:
    """Months and the named float columns of a CSV, without any alignment."""
    header, rows = _read_rows(path)
    dates, cols = _parse_table(header, rows, list(dict.fromkeys(columns)), date_column, path)
    return tuple(format_month(d) for d in dates), cols


def _aligned_panel(dates, y, preds, lag: bool) -> PredictorPanel:
    if lag:
        if len(dates) < 2:
            raise MisalignedDates("need at least two months to lag the predictors")
        return PredictorPanel(
            dates=tuple(format_month(d) for d in dates[1:]),
            excess_return=y[1:],
            predictors={k: v[:-1] for k, v in preds.items()},
        )
    return PredictorPanel(dates=tuple(format_month(d) for d in dates), excess_return=y, predictors=preds)


def ingest_csv(path, column_map: dict, lag: bool = True, date_column: str = DATE_COLUMN) -> PredictorPanel:
    """Read a panel from a CSV with a ``YYYYMM`` date column.

    ``column_map`` maps panel names to CSV columns and must contain
    ``"excess_return"``.  With ``lag=True`` the rows are the file's months
    and the predictors are shifted one month back, so ``n`` rows give a panel
    of length ``n - 1``.  With ``lag=False`` the file is taken as already
    aligned (the layout written by :func:`write_panel_csv`).
    """
    if RETURN_KEY not in column_map:
        raise MissingColumn(f"column_map must name the {RETURN_KEY!r} column")
    header, rows = _read_rows(path)
    dates, cols = _parse_table(header, rows, list(dict.fromkeys(column_map.values())), date_column, path)
    y = cols[column_map[RETURN_KEY]]
    preds = {k: cols[c] for k, c in column_map.items() if k != RETURN_KEY}
    return _aligned_panel(dates, y, preds, lag)


def write_panel_csv(panel: PredictorPanel, path) -> None:
    """Write an aligned panel; read it back with ``ingest_csv(..., lag=False)``."""
    names = list(panel.predictors)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([DATE_COLUMN, RETURN_KEY, *names])
        for i, d in enumerate(panel.dates):
            w.writerow([d, repr(float(panel.excess_return[i]))] + [repr(float(panel.predictors[n][i])) for n in names])


def panel_column_map(names=PREDICTOR_NAMES) -> dict:
    """Identity column map for files written by :func:`write_panel_csv`."""
    return {RETURN_KEY: RETURN_KEY, **{n: n for n in names}}


def derive_predictors(raw: dict) -> tuple[np.ndarray, dict]:
    """Excess return and the fourteen predictors from raw monthly columns.

    The first month is consumed by the lagged price in the dividend yield, so
    outputs are one shorter than the inputs.  The excess return is the log
    value-weighted return minus the log risk-free rate.
    """
    idx, d12, e12 = raw["Index"], raw["D12"], raw["E12"]
    if np.any(idx <= 0) or np.any(d12 <= 0) or np.any(e12 == 0):
        raise NonNumericCell("Index and D12 must be positive and E12 nonzero to take logs")
    cur = slice(1, None)
    preds = {
        "BM": raw["b/m"][cur],
        "DE": (np.log(d12) - np.log(np.abs(e12)))[cur],
        "DFY": (raw["BAA"] - raw["AAA"])[cur],
        "DFR": (raw["corpr"] - raw["ltr"])[cur],
        "DP": (np.log(d12) - np.log(idx))[cur],
        "DY": np.log(d12[1:]) - np.log(idx[:-1]),
        "EP": (np.log(np.abs(e12)) - np.log(idx))[cur],
        "INFL": raw["infl"][cur],
        "LTR": raw["ltr"][cur],
        "LTY": raw["lty"][cur],
        "NTIS": raw["ntis"][cur],
        "SVAR": raw["svar"][cur],
        "TBL": raw["tbl"][cur],
        "TMS": (raw["lty"] - raw["tbl"])[cur],
    }
    excess = (np.log1p(raw["CRSP_SPvw"]) - np.log1p(raw["Rfree"]))[cur]
    return excess, preds


def ingest_raw_csv(path, start: str = "192701", end: str = "201412",
                     date_column: str = DATE_COLUMN) -> PredictorPanel:
    """Panel from the raw monthly predictor sheet saved as CSV.

    Predictors run from ``start`` to the month before ``end`` and returns from
    the month after ``start`` to ``end``; the month before ``start`` must be
    present for the dividend yield.  Rows outside the window may have gaps.
    """
    s = month_index(*parse_month(start, 0))
    e = month_index(*parse_month(end, 0))
    if e <= s:
        raise MisalignedDates(f"end {end} must be after start {start}")
    header, rows = _read_rows(path)
    if date_column not in header:
        raise MissingColumn(f"{path}: column {date_column!r} not found")
    k = header.index(date_column)
    window = [(n, r) for n, r in rows if s - 1 <= month_index(*parse_month(_cell(r, k), n)) <= e]
    dates, raw = _parse_table(header, window, RAW_COLUMNS, date_column, path, thousands=True)
    if not dates or dates[0] != s - 1 or dates[-1] != e:
        raise MisalignedDates(f"file must cover {format_month(s - 1)} to {end}")
    excess, preds = derive_predictors(raw)
    return _aligned_panel(dates[1:], excess, preds, lag=True)


# ---------------------------------------------------------------------------
# battery


@dataclass
class BatteryRow:
    predictor: str
    fit: GarchFitResult | None
    eligibility: Eligibility | None
    reports: dict = field(default_factory=dict)  # StatKind -> TestReport
    marks: dict = field(default_factory=dict)  # StatKind -> mark
    errors: dict = field(default_factory=dict)  # stage -> message


@dataclass
class BatteryResult:
    alpha: float
    rho_threshold: float
    materiality_floor: float
    rows: list

    KINDS = (StatKind.LMSTAR, StatKind.WALDSTAR, StatKind.SUM)
    LABELS = {StatKind.LMSTAR: "LM", StatKind.WALDSTAR: "Wald", StatKind.SUM: "Sum"}

    def to_csv(self) -> str:
        head = ["predictor", "rho_x", "c1", "c2", "eligibility"]
        head += [self.LABELS[k] for k in self.KINDS]
        head += [f"{self.LABELS[k]}_stat" for k in self.KINDS]
        head += [f"{self.LABELS[k]}_crit" for k in self.KINDS]
        lines = [",".join(head)]
        for r in self.rows:
            f = r.fit
            cells = [r.predictor]
            cells += ["NA"] * 3 if f is None else [f"{f.rho_x:.4g}", f"{f.c1:.4g}", f"{f.c2:.4g}"]
            cells.append("NA" if r.eligibility is None else r.eligibility.value)
            cells += [r.marks.get(k, SCREENED_MARK) for k in self.KINDS]
            for attr in ("statistic", "critical_value"):
                for k in self.KINDS:
                    rep = r.reports.get(k)
                    cells.append("NA" if rep is None else f"{getattr(rep, attr):.4g}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        out = {
            "alpha": self.alpha,
            "eligibility_rule": {
                "rho_threshold": self.rho_threshold,
                "materiality_floor": self.materiality_floor,
                "note": "operational thresholds, not a derived rule",
            },
            "predictors": [],
        }
        for r in self.rows:
            out["predictors"].append({
                "predictor": r.predictor,
                "garch": None if r.fit is None else {
                    "alpha_x": r.fit.alpha_x, "rho_x": r.fit.rho_x, "c0": r.fit.c0,
                    "c1": r.fit.c1, "c2": r.fit.c2, "converged": r.fit.converged,
                },
                "eligibility": None if r.eligibility is None else r.eligibility.value,
                "marks": {self.LABELS[k]: r.marks.get(k, SCREENED_MARK) for k in self.KINDS},
                "reports": {self.LABELS[k]: rep.to_dict() for k, rep in r.reports.items()},
                "errors": r.errors,
            })
        return json.dumps(out, indent=2, ensure_ascii=False) + "\n"


def empirical_battery(panel: PredictorPanel, alpha: float = 0.05, *, names=None,
                      rho_threshold: float = 0.9, materiality_floor: float = 0.2,
                      demean: bool = True) -> BatteryResult:
    """Screen each predictor and run the subsampling tests.

    LM* always runs; W* and Sum run only for Wald-eligible predictors and are
    marked ``NA`` otherwise.  A failure for one predictor is recorded in its
    row and does not stop the others.
    """
    names = list(panel.predictors) if names is None else list(names)
    rows = []
    for name in names:
        row = BatteryRow(predictor=name, fit=None, eligibility=None)
        rows.append(row)
        try:
            data = panel.dataset(name, demean=demean)
        except CoefRandError as exc:
            row.errors["data"] = str(exc)
            row.marks = {k: ERROR_MARK for k in BatteryResult.KINDS}
            continue
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NonConvergenceWarning)
                row.fit = fit_ar1_garch11(panel.predictors[name])
            if not row.fit.converged:
                row.errors["garch"] = "QMLE did not converge; screen applied to last iterate"
            row.eligibility = screen_predictor(row.fit, rho_threshold, materiality_floor)
        except CoefRandError as exc:
            row.errors["garch"] = str(exc)
        sub = Subsampler(data, ROBUST)
        eligible = row.eligibility is Eligibility.WALD_ELIGIBLE
        for kind in BatteryResult.KINDS:
            if kind is not StatKind.LMSTAR and not eligible:
                row.marks[kind] = SCREENED_MARK
                continue
            try:
                rep = run_test(data, kind, alpha, subsampler=sub)
            except CoefRandError as exc:
                row.errors[kind.value] = str(exc)
                row.marks[kind] = ERROR_MARK
                continue
            row.reports[kind] = rep
            row.marks[kind] = REJECT_MARK if rep.reject else ACCEPT_MARK
    return BatteryResult(alpha=alpha, rho_threshold=rho_threshold,
                         materiality_floor=materiality_floor, rows=rows)
