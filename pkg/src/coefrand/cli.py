"""Command-line interface.

Exit codes: 0 on success, 2 on a usage error, 1 on a runtime error.  When
``COEFRAND_SEED`` is set it overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from coefrand import __version__
from coefrand.asymptotics import DEFAULT_C_X_GRID, DEFAULT_CORR2_GRID, DEFAULT_CORR_GRID, LimitSimConfig, quantile_surface
from coefrand.core import Dataset
from coefrand.dgp import PRESET_NAMES, DgpConfig, preset_dgp, simulate
from coefrand.errors import CoefRandError
from coefrand.garchfit import fit_ar1_garch11, fits_to_csv, screen_predictor
from coefrand.montecarlo import (
    POWER_KINDS,
    TABLE_KINDS,
    ExperimentSpec,
    size_adjusted_power,
    size_experiment,
    subsampling_power,
    tabulate,
)
from coefrand.pipeline import (
    DATE_COLUMN,
    EMPIRICAL_DATA_MESSAGE,
    PREDICTOR_NAMES,
    RETURN_KEY,
    empirical_battery,
    ingest_csv,
    ingest_raw_csv,
    panel_column_map,
    read_columns,
)
from coefrand.subsampling import run_test
from coefrand.teststats import HOMOSKEDASTIC, ROBUST, StatKind

SEED_ENV = "COEFRAND_SEED"
_AUTO = "__auto__"


class _UsageError(Exception):
    pass


def _stat_kind(text: str) -> StatKind:
    try:
        return StatKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _dgp_name(text: str) -> str:
    if text.upper() not in PRESET_NAMES:
        raise argparse.ArgumentTypeError(f"unknown DGP {text!r}; choose from {', '.join(PRESET_NAMES)}")
    return text.upper()


def _resolve_seed(seed: int) -> int:
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return seed
    try:
        return int(env)
    except ValueError:
        raise _UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _write(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _plot_path(args):
    if args.plot is None:
        return None
    if args.plot != _AUTO:
        return args.plot
    if args.output is None:
        raise _UsageError("--plot without a path needs --output to place the figure")
    return str(Path(args.output).with_suffix(".png"))


def _add_output(p, plot: bool = False, formats=("csv", "text")):
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.add_argument("--format", choices=formats, default=formats[0], help="output format")
    if plot:
        p.add_argument("--plot", nargs="?", const=_AUTO, default=None, metavar="PNG",
                       help="also render a figure; without a path it goes next to --output")


def _add_seed(p, default: int = 0):
    p.add_argument("--seed", type=int, default=default, help=f"base seed (overridden by ${SEED_ENV})")


def _add_dgp(p):
    p.add_argument("--dgp", type=_dgp_name, default="DGP1", help="preset design, DGP1..DGP6")
    p.add_argument("--config", help="DGP config file of 'key = value' lines (overrides --dgp)")


def _add_mc(p, kinds):
    _add_dgp(p)
    p.add_argument("--T", dest="T_list", type=int, nargs="+", default=[100], help="sample sizes")
    p.add_argument("--reps", type=int, default=2000, help="replications per cell (>= 100)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--stats", type=_stat_kind, nargs="+", default=list(kinds), help="statistics to run")
    p.add_argument("--family", choices=(ROBUST, HOMOSKEDASTIC), default=ROBUST)
    p.add_argument("--threads", type=int, default=0, help="worker processes (0: all cores)")
    _add_seed(p)
    _add_output(p, plot=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coefrand", description="Coefficient-constancy tests for predictive regressions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("test", help="run one subsampling test on a CSV")
    p.add_argument("--input", required=True, help="CSV with a YYYYMM date column")
    p.add_argument("--y", required=True, help="dependent-variable column")
    p.add_argument("--x", required=True, help="predictor column (lagged one month unless --aligned)")
    p.add_argument("--stat", type=_stat_kind, required=True, help="lm, lmstar, wald, waldstar, sum, product, ltlm")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--date-column", default=DATE_COLUMN)
    p.add_argument("--family", choices=(ROBUST, HOMOSKEDASTIC), default=ROBUST)
    p.add_argument("--aligned", action="store_true", help="rows already pair y_t with x_{t-1}")
    p.add_argument("--no-demean", action="store_true", help="skip demeaning of y and x")
    p.add_argument("--allow-product", action="store_true", help="permit subsampling the Product statistic")
    _add_output(p, formats=("json", "text"))

    p = sub.add_parser("simulate", help="simulate one path of a DGP")
    _add_dgp(p)
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--rho-beta", type=float, default=0.6)
    p.add_argument("--omega-beta2", type=float, default=0.0)
    _add_seed(p)
    _add_output(p, plot=True, formats=("csv",))

    p = sub.add_parser("mc-size", help="empirical size and median block sizes")
    _add_mc(p, TABLE_KINDS)
    p.add_argument("--rho-beta", type=float, default=0.6, help=argparse.SUPPRESS)
    p.add_argument("--blocks-output", help="median b/T table (default: <output stem>_blocks.csv)")

    for name, kinds, helptext in (("mc-power", TABLE_KINDS, "subsampling power"),
                                  ("mc-power-adjusted", POWER_KINDS, "size-adjusted power")):
        p = sub.add_parser(name, help=helptext)
        _add_mc(p, kinds)
        p.add_argument("--rho-beta", type=float, nargs="+", default=[0.6, 0.8, 0.9, 0.98])
        p.add_argument("--omega-beta2", type=float, nargs="+", default=[0.01, 0.05, 0.1, 0.5])
        if name == "mc-power":
            p.add_argument("--allow-product", action="store_true")

    p = sub.add_parser("asym-quantiles", help="asymptotic quantile and size surfaces")
    p.add_argument("--stat", type=_stat_kind, default=StatKind.LM)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--reps", type=int, default=20000)
    p.add_argument("--c-grid", type=float, nargs="+", default=list(DEFAULT_C_X_GRID), help="c_x values (<= 0)")
    p.add_argument("--corr", type=float, nargs="+", default=list(DEFAULT_CORR_GRID))
    p.add_argument("--corr2", type=float, nargs="+", default=list(DEFAULT_CORR2_GRID),
                   help="Corr(e_x, eta) values for Sum/Product")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--lm-demean", action="store_true", help="use the demeaned LM functional")
    _add_seed(p)
    _add_output(p, plot=True)

    p = sub.add_parser("fit-garch", help="AR(1)-GARCH(1,1) fits and the Wald screen")
    p.add_argument("--input", required=True)
    p.add_argument("--columns", nargs="+", required=True, help="series to fit")
    p.add_argument("--date-column", default=DATE_COLUMN)
    p.add_argument("--rho-threshold", type=float, default=0.9)
    p.add_argument("--materiality-floor", type=float, default=0.2)
    _add_output(p, formats=("csv",))

    p = sub.add_parser("empirical", help="the fourteen-predictor battery",
                       description=EMPIRICAL_DATA_MESSAGE, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--input", help="raw monthly predictor CSV or an aligned panel")
    p.add_argument("--layout", choices=("raw", "panel"), default="raw")
    p.add_argument("--start", default="192701", help="first predictor month")
    p.add_argument("--end", default="201412", help="last return month")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--rho-threshold", type=float, default=0.9)
    p.add_argument("--materiality-floor", type=float, default=0.2)
    _add_output(p, formats=("csv", "json"))
    return parser


# ---------------------------------------------------------------------------
# commands


def _dgp_template(args) -> DgpConfig | str:
    if args.config:
        return DgpConfig.from_text(Path(args.config).read_text(encoding="utf-8"))
    return args.dgp


def cmd_test(args) -> None:
    col_map = {RETURN_KEY: args.y, "x": args.x}
    panel = ingest_csv(args.input, col_map, lag=not args.aligned, date_column=args.date_column)
    data = Dataset.from_arrays(panel.excess_return, panel.predictors["x"], demean=not args.no_demean)
    report = run_test(data, args.stat, args.alpha, family=args.family, allow_product=args.allow_product)
    _write(report.to_json() + "\n" if args.format == "json" else report.to_text() + "\n", args.output)


def cmd_simulate(args) -> None:
    template = _dgp_template(args)
    seed = _resolve_seed(args.seed)
    if isinstance(template, str):
        cfg = preset_dgp(template, args.T, rho_beta=args.rho_beta, omega_beta2=args.omega_beta2, seed=seed)
    else:
        cfg = replace(template, seed=seed)
    path = simulate(cfg)
    lines = ["t,y,x_lag,s_beta"]
    for t in range(cfg.T):
        lines.append(f"{t + 1},{float(path.y[t])!r},{float(path.x[t])!r},{float(path.s_beta[t])!r}")
    _write("\n".join(lines) + "\n", args.output)
    plot = _plot_path(args)
    if plot:
        from coefrand.plotting import plot_series

        plot_series(range(cfg.T), {"y": path.y, "x_lag": path.x[:-1], "s_beta": path.s_beta}, plot,
                    title=f"simulated path, T = {cfg.T}")


def _spec(args, rho_list, omega_list, allow_product=False) -> ExperimentSpec:
    return ExperimentSpec(
        dgp=_dgp_template(args), T_list=tuple(args.T_list), rho_beta_list=tuple(rho_list),
        omega_beta2_list=tuple(omega_list), kinds=tuple(args.stats), reps=args.reps, alpha=args.alpha,
        base_seed=_resolve_seed(args.seed), threads=args.threads, family=args.family,
        allow_product=allow_product,
    )


def _check_plot_args(args) -> None:
    # fail on a bad --plot before spending time on the simulation
    _plot_path(args)


def _emit_table(table, args, reference=None) -> None:
    _write(table.to_csv() if args.format == "csv" else table.to_text(), args.output)
    plot = _plot_path(args)
    if plot:
        from coefrand.plotting import plot_table

        plot_table(table, plot, reference=reference)


def cmd_mc_size(args) -> None:
    _check_plot_args(args)
    cells = size_experiment(_spec(args, [args.rho_beta], [0.0]))
    _emit_table(tabulate(cells, ("dgp", "T")), args, reference=args.alpha)
    blocks = tabulate(cells, ("dgp", "T"), value="median_b_over_T")
    blocks_path = args.blocks_output
    if blocks_path is None and args.output is not None:
        out = Path(args.output)
        blocks_path = str(out.with_name(out.stem + "_blocks" + out.suffix))
    if blocks_path is not None:
        _write(blocks.to_csv() if args.format == "csv" else blocks.to_text(), blocks_path)
    else:
        _write("\n" + (blocks.to_csv() if args.format == "csv" else blocks.to_text()), None)


def cmd_mc_power(args) -> None:
    _check_plot_args(args)
    spec = _spec(args, args.rho_beta, args.omega_beta2, allow_product=args.allow_product)
    _emit_table(tabulate(subsampling_power(spec), ("T", "rho_beta", "omega_beta2")), args)


def cmd_mc_power_adjusted(args) -> None:
    _check_plot_args(args)
    spec = _spec(args, args.rho_beta, args.omega_beta2)
    _emit_table(tabulate(size_adjusted_power(spec), ("T", "rho_beta", "omega_beta2")), args)


def cmd_asym_quantiles(args) -> None:
    _check_plot_args(args)
    cfg = LimitSimConfig(steps=args.steps, reps=args.reps, c_x_grid=tuple(args.c_grid),
                         corr_grid=tuple(args.corr), corr2_grid=tuple(args.corr2), alpha=args.alpha,
                         seed=_resolve_seed(args.seed), lm_demean=args.lm_demean)
    surface = quantile_surface(cfg, args.stat)
    if args.format == "csv":
        text = surface.to_csv()
    else:
        text = "".join(f"{r.kind:>8} c_x={r.c_x:8.4g} corr={r.corr:6.3g}"
                       + ("" if r.corr2 is None else f" corr2={r.corr2:6.3g}")
                       + f"  quantile={r.quantile:.4g}  size={r.size:.4g}\n" for r in surface.rows)
    _write(text, args.output)
    plot = _plot_path(args)
    if plot:
        from coefrand.plotting import plot_quantile_surface

        plot_quantile_surface(surface, plot)


def cmd_fit_garch(args) -> None:
    _, cols = read_columns(args.input, args.columns, date_column=args.date_column)
    fits, eligibility = {}, {}
    for name in args.columns:
        try:
            fits[name] = fit_ar1_garch11(cols[name])
            eligibility[name] = screen_predictor(fits[name], args.rho_threshold, args.materiality_floor)
        except CoefRandError as exc:
            print(f"warning: {name}: {exc}", file=sys.stderr)
            fits[name] = None
    _write(fits_to_csv(fits, eligibility), args.output)


def cmd_empirical(args) -> int:
    if args.input is None:
        sys.stderr.write(EMPIRICAL_DATA_MESSAGE)
        return 0
    if not Path(args.input).is_file():
        sys.stderr.write(f"error: data file {args.input!r} not found\n\n{EMPIRICAL_DATA_MESSAGE}")
        return 1
    if args.layout == "raw":
        panel = ingest_raw_csv(args.input, start=args.start, end=args.end)
    else:
        panel = ingest_csv(args.input, panel_column_map(), lag=False)
    names = [n for n in PREDICTOR_NAMES if n in panel.predictors]
    result = empirical_battery(panel, args.alpha, names=names, rho_threshold=args.rho_threshold,
                               materiality_floor=args.materiality_floor)
    _write(result.to_csv() if args.format == "csv" else result.to_json(), args.output)
    return 0


_COMMANDS = {
    "test": cmd_test,
    "simulate": cmd_simulate,
    "mc-size": cmd_mc_size,
    "mc-power": cmd_mc_power,
    "mc-power-adjusted": cmd_mc_power_adjusted,
    "asym-quantiles": cmd_asym_quantiles,
    "fit-garch": cmd_fit_garch,
    "empirical": cmd_empirical,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        code = _COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"coefrand: error: {exc}", file=sys.stderr)
        return 2
    except (CoefRandError, OSError) as exc:
        print(f"coefrand: error: {exc}", file=sys.stderr)
        return 1
    return 0 if code is None else int(code)


if __name__ == "__main__":
    sys.exit(main())
