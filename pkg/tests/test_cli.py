import json
import subprocess
import sys

import numpy as np
import pytest

from coefrand.cli import SEED_ENV, main
from coefrand.dgp import preset_dgp, simulate
from coefrand.pipeline import format_month, month_index


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    p = simulate(preset_dgp("DGP1", 120, 0.6, 0.0), np.random.default_rng(0))
    path = tmp_path_factory.mktemp("cli") / "data.csv"
    lines = ["yyyymm,ret,bm"]
    # x_t in row t, y_t in row t: the CLI lags bm by one month
    for t in range(121):
        y = 0.0 if t == 0 else p.y[t - 1]
        lines.append(f"{format_month(month_index(1990, 1) + t)},{float(y)!r},{float(p.x[t])!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def test_test_command_json(data_csv, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["test", "--input", str(data_csv), "--y", "ret", "--x", "bm", "--stat", "lm",
                 "--alpha", "0.05", "-o", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert set(rep) == {"kind", "statistic", "b", "critical_value", "hybrid", "reject", "alpha"}
    assert main(["test", "--input", str(data_csv), "--y", "ret", "--x", "bm", "--stat", "waldstar",
                 "--format", "text"]) == 0
    assert "reject" in capsys.readouterr().out


def test_product_gate(data_csv):
    base = ["test", "--input", str(data_csv), "--y", "ret", "--x", "bm", "--stat", "product"]
    assert main(base) == 1
    assert main(base + ["--allow-product"]) == 0


def test_usage_errors(data_csv):
    assert main(["bogus"]) == 2
    assert main(["test", "--input", str(data_csv), "--y", "ret", "--x", "bm", "--stat", "nope"]) == 2
    assert main(["simulate", "--plot"]) == 2
    assert main(["test", "--input", "/nonexistent.csv", "--y", "a", "--x", "b", "--stat", "lm"]) == 1
    assert main(["test", "--input", str(data_csv), "--y", "ret", "--x", "zz", "--stat", "lm"]) == 1


def test_simulate_reproducible_and_seed_env(tmp_path, monkeypatch):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(["simulate", "--T", "50", "--seed", "3", "-o", str(a)]) == 0
    assert main(["simulate", "--T", "50", "--seed", "3", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "t,y,x_lag,s_beta" and len(a.read_text().splitlines()) == 51
    monkeypatch.setenv(SEED_ENV, "3")
    assert main(["simulate", "--T", "50", "--seed", "99", "-o", str(c)]) == 0
    assert c.read_bytes() == a.read_bytes()
    monkeypatch.setenv(SEED_ENV, "x")
    assert main(["simulate", "--T", "50"]) == 2


def test_simulate_plot(tmp_path):
    out = tmp_path / "path.csv"
    assert main(["simulate", "--T", "40", "-o", str(out), "--plot"]) == 0
    png = out.with_suffix(".png")
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_mc_size_outputs(tmp_path):
    out = tmp_path / "size.csv"
    args = ["mc-size", "--dgp", "DGP1", "--T", "100", "--reps", "100", "--seed", "7", "--threads", "1",
            "-o", str(out)]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "dgp,T,LM,Wald,Sum" and lines[1].startswith("DGP1,100,")
    blocks = tmp_path / "size_blocks.csv"
    assert blocks.read_text().splitlines()[0] == "dgp,T,LM,Wald,Sum"
    first = out.read_bytes()
    assert main(args) == 0 and out.read_bytes() == first


def test_mc_power_adjusted(tmp_path):
    out = tmp_path / "adj.csv"
    assert main(["mc-power-adjusted", "--reps", "100", "--rho-beta", "0.6", "--omega-beta2", "0.5",
                 "--threads", "1", "-o", str(out), "--plot"]) == 0
    assert out.read_text().splitlines()[0] == "T,rho_beta,omega_beta2,LM,Wald,Sum,Prod"
    assert out.with_suffix(".png").exists()


def test_asym_quantiles(tmp_path):
    out = tmp_path / "q.csv"
    assert main(["asym-quantiles", "--stat", "wald", "--steps", "100", "--reps", "1000",
                 "--c-grid", "0", "-4", "--corr", "0", "-o", str(out), "--plot"]) == 0
    assert out.read_text().splitlines()[0] == "kind,c_x,corr,quantile,size"
    assert out.with_suffix(".png").exists()


def test_fit_garch(tmp_path):
    from coefrand.dgp import GarchParams, simulate_ar1_garch

    x = simulate_ar1_garch(300, 0.0, 0.9, GarchParams(0.1, 0.6, 0.2), np.random.default_rng(1))
    path = tmp_path / "g.csv"
    path.write_text("yyyymm,bm\n" + "".join(f"{format_month(month_index(1990, 1) + i)},{float(v)!r}\n"
                                            for i, v in enumerate(x)))
    out = tmp_path / "fits.csv"
    assert main(["fit-garch", "--input", str(path), "--columns", "bm", "-o", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "predictor,c0,c1,c2,rho_x,eligibility"


def test_empirical_without_data(capsys):
    assert main(["empirical"]) == 0
    assert "--input" in capsys.readouterr().err
    assert main(["empirical", "--input", "/no/such/file.csv"]) == 1


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "coefrand.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "coefrand" in r.stdout
    r = subprocess.run([sys.executable, "-m", "coefrand.cli", "nope"], capture_output=True, text=True)
    assert r.returncode == 2
