import csv
import json

import numpy as np
import pytest

from coefrand.dgp import GarchParams, simulate_ar1_garch
from coefrand.errors import MisalignedDates, MissingColumn, NonNumericCell
from coefrand.pipeline import (
    ACCEPT_MARK,
    RAW_COLUMNS,
    PREDICTOR_NAMES,
    REJECT_MARK,
    SCREENED_MARK,
    PredictorPanel,
    derive_predictors,
    empirical_battery,
    format_month,
    ingest_csv,
    ingest_raw_csv,
    month_index,
    panel_column_map,
    parse_month,
    read_columns,
    write_panel_csv,
)
from coefrand.teststats import StatKind


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def test_month_helpers():
    assert parse_month("192701", 1) == (1927, 1)
    assert format_month(month_index(2014, 12)) == "201412"
    assert month_index(2000, 1) - month_index(1999, 12) == 1
    for bad in ("19271", "192713", "abcdef"):
        with pytest.raises(MisalignedDates):
            parse_month(bad, 3)


def test_three_rows_give_two_months(tmp_path):
    p = _write(tmp_path / "a.csv", ["yyyymm", "ret", "bm"],
               [["200001", "0.01", "0.5"], ["200002", "0.02", "0.6"], ["200003", "-0.01", "0.7"]])
    panel = ingest_csv(p, {"excess_return": "ret", "BM": "bm"})
    assert panel.T == 2 and panel.dates == ("200002", "200003")
    np.testing.assert_array_equal(panel.excess_return, [0.02, -0.01])
    np.testing.assert_array_equal(panel.predictors["BM"], [0.5, 0.6])
    assert ingest_csv(p, {"excess_return": "ret", "BM": "bm"}, lag=False).T == 3


def test_missing_column(tmp_path):
    p = _write(tmp_path / "a.csv", ["yyyymm", "ret"], [["200001", "0.01"]])
    with pytest.raises(MissingColumn):
        ingest_csv(p, {"excess_return": "ret", "BM": "bm"})
    with pytest.raises(MissingColumn):
        ingest_csv(p, {"BM": "ret"})


def test_non_numeric_cell_names_row(tmp_path):
    p = _write(tmp_path / "a.csv", ["yyyymm", "ret", "bm"],
               [["200001", "0.01", "0.5"], ["200002", "abc", "0.6"], ["200003", "0.0", "0.7"]])
    with pytest.raises(NonNumericCell, match="row 3.*200002"):
        ingest_csv(p, {"excess_return": "ret", "BM": "bm"})
    q = _write(tmp_path / "b.csv", ["yyyymm", "ret", "bm"], [["200001", "NA", "0.5"], ["200002", "0.1", "0.6"]])
    with pytest.raises(NonNumericCell, match="missing"):
        ingest_csv(q, {"excess_return": "ret", "BM": "bm"})


def test_misaligned_dates(tmp_path):
    p = _write(tmp_path / "a.csv", ["yyyymm", "ret", "bm"],
               [["200001", "0.01", "0.5"], ["200003", "0.02", "0.6"]])
    with pytest.raises(MisalignedDates):
        ingest_csv(p, {"excess_return": "ret", "BM": "bm"})
    with pytest.raises(MisalignedDates):
        PredictorPanel(("200001",), np.zeros(2), {})


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    dates = tuple(format_month(month_index(1990, 1) + i) for i in range(40))
    panel = PredictorPanel(dates, rng.standard_normal(40), {"BM": rng.standard_normal(40), "TBL": rng.random(40)})
    path = tmp_path / "panel.csv"
    write_panel_csv(panel, path)
    back = ingest_csv(path, panel_column_map(("BM", "TBL")), lag=False)
    assert back == panel
    d, cols = read_columns(path, ["BM"])
    assert d == dates and np.array_equal(cols["BM"], panel.predictors["BM"])


def _raw_rows(first, n, rng):
    rows = []
    idx = 10.0
    for i in range(n):
        idx *= np.exp(0.01 * rng.standard_normal())
        vals = {
            "Index": f"{idx * 100:,.2f}", "D12": 0.4 + 0.01 * rng.random(), "E12": 0.8 + 0.1 * rng.random(),
            "b/m": 0.5 + 0.1 * rng.random(), "tbl": 0.03, "AAA": 0.05, "BAA": 0.06 + 0.01 * rng.random(),
            "lty": 0.04 + 0.01 * rng.random(), "ntis": 0.01, "Rfree": 0.002, "infl": 0.001,
            "ltr": 0.003 * rng.standard_normal(), "corpr": 0.003 * rng.standard_normal(),
            "svar": 0.002 * rng.random(), "CRSP_SPvw": 0.04 * rng.standard_normal(),
        }
        rows.append([format_month(first + i)] + [vals[c] for c in RAW_COLUMNS])
    return rows


def test_raw_window_length(tmp_path):
    rng = np.random.default_rng(1)
    first = month_index(1926, 1)
    rows = _raw_rows(first, 12 * 90, rng)  # 192601 .. 201512
    p = _write(tmp_path / "raw.csv", ["yyyymm", *RAW_COLUMNS], rows)
    panel = ingest_raw_csv(p)
    assert panel.T == 1055
    assert panel.dates[0] == "192702" and panel.dates[-1] == "201412"
    assert set(panel.predictors) == set(PREDICTOR_NAMES)
    with pytest.raises(MisalignedDates):
        ingest_raw_csv(p, start="192001")


def test_raw_derivations():
    raw = {c: np.array([1.0, 2.0, 3.0]) for c in RAW_COLUMNS}
    raw["Index"] = np.array([10.0, 20.0, 40.0])
    raw["D12"] = np.array([1.0, 1.0, 2.0])
    raw["CRSP_SPvw"] = np.array([0.0, 0.1, 0.2])
    raw["Rfree"] = np.array([0.0, 0.01, 0.01])
    excess, preds = derive_predictors(raw)
    np.testing.assert_allclose(preds["DP"], np.log([1 / 20, 2 / 40]))
    np.testing.assert_allclose(preds["DY"], np.log([1 / 10, 2 / 20]))
    np.testing.assert_allclose(excess, np.log1p([0.1, 0.2]) - np.log1p(0.01))
    assert all(v.size == 2 for v in preds.values())


@pytest.fixture(scope="module")
def null_battery():
    rng = np.random.default_rng(5)
    T = 400
    months = tuple(format_month(month_index(1980, 1) + i) for i in range(T))
    preds = {
        "P1": simulate_ar1_garch(T, 0.0, 0.95, GarchParams(0.1, 0.5, 0.3), rng),
        "P2": simulate_ar1_garch(T, 0.0, 0.97, GarchParams(0.5, 0.2, 0.2), rng),
        "P3": simulate_ar1_garch(T, 0.0, 0.3, GarchParams(0.1, 0.6, 0.3), rng),
    }
    panel = PredictorPanel(months, 0.04 * rng.standard_normal(T), preds)
    return empirical_battery(panel)


def test_null_battery_marks(null_battery):
    assert [r.predictor for r in null_battery.rows] == ["P1", "P2", "P3"]
    marks = [m for r in null_battery.rows for m in r.marks.values() if m != SCREENED_MARK]
    assert marks and set(marks) <= {ACCEPT_MARK, REJECT_MARK}
    assert marks.count(ACCEPT_MARK) >= len(marks) - 1
    p3 = null_battery.rows[2]
    if p3.eligibility.value == "WaldIneligible":
        assert p3.marks[StatKind.WALDSTAR] == SCREENED_MARK and StatKind.LMSTAR in p3.reports


def test_battery_outputs(null_battery):
    lines = null_battery.to_csv().splitlines()
    assert lines[0].startswith("predictor,rho_x,c1,c2,eligibility,LM,Wald,Sum")
    assert len(lines) == 4
    out = json.loads(null_battery.to_json())
    assert out["eligibility_rule"]["rho_threshold"] == 0.9
    assert [p["predictor"] for p in out["predictors"]] == ["P1", "P2", "P3"]


def test_battery_records_errors():
    months = tuple(format_month(month_index(1980, 1) + i) for i in range(100))
    panel = PredictorPanel(months, np.random.default_rng(0).standard_normal(100), {"FLAT": np.ones(100)})
    row = empirical_battery(panel).rows[0]
    assert "garch" in row.errors and row.eligibility is None
    # an unscreened predictor only gets the LM-type test
    assert row.marks[StatKind.LMSTAR] == "ERR" and row.marks[StatKind.WALDSTAR] == SCREENED_MARK
