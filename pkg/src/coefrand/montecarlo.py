"""Finite-sample size and power experiments.

Replication ``r`` of every cell draws its shocks from the stream
``(base_seed, r)``; the null companion draws used for size adjustment come
from ``(base_seed, r, 1)``.  Tables are therefore identical whatever the
number of worker processes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from coefrand.dgp import DgpConfig, preset_dgp, simulate
from coefrand.errors import CoefRandError, ProductSubsamplingRejected
from coefrand.subsampling import Subsampler, run_test
from coefrand.teststats import ROBUST, StatKind, statistic

MAX_FAIL_FRACTION = 0.01
NULL_STREAM = 1

TABLE_KINDS = (StatKind.LMSTAR, StatKind.WALDSTAR, StatKind.SUM)
POWER_KINDS = (StatKind.LMSTAR, StatKind.WALDSTAR, StatKind.SUM, StatKind.PRODUCT)


@dataclass(frozen=True)
class ExperimentSpec:
    dgp: str | DgpConfig = "DGP1"
    T_list: tuple = (100,)
    rho_beta_list: tuple = (0.6,)
    omega_beta2_list: tuple = (0.0,)
    kinds: tuple = TABLE_KINDS
    reps: int = 2000
    alpha: float = 0.05
    base_seed: int = 0
    threads: int = 1
    family: str = ROBUST
    allow_product: bool = False

    def __post_init__(self):
        if self.reps < 100:
            raise ValueError("reps must be at least 100")
        if any(o < 0 for o in self.omega_beta2_list):
            raise ValueError("omega_beta2 values must be nonnegative")
        object.__setattr__(self, "kinds", tuple(StatKind.parse(k) for k in self.kinds))

    @property
    def dgp_name(self) -> str:
        return self.dgp if isinstance(self.dgp, str) else "custom"

    def config(self, T: int, rho_beta: float, omega_beta2: float) -> DgpConfig:
        if isinstance(self.dgp, str):
            return preset_dgp(self.dgp, T, rho_beta=rho_beta, omega_beta2=omega_beta2)
        return replace(self.dgp, T=T, rho_beta=rho_beta, omega_beta2=omega_beta2)


@dataclass(frozen=True)
class CellResult:
    dgp: str
    T: int
    rho_beta: float
    omega_beta2: float
    kind: StatKind
    rejection_rate: float
    median_b_over_T: float
    reps_completed: int
    n_failed: int = 0
    valid: bool = True

    @property
    def mc_stderr(self) -> float:
        p = self.rejection_rate
        return math.sqrt(p * (1.0 - p) / self.reps_completed) if self.reps_completed else math.nan


def _stream(base_seed: int, r: int, tag: int | None = None) -> np.random.Generator:
    key = [base_seed, r] if tag is None else [base_seed, r, tag]
    return np.random.default_rng(key)


def _subsampling_rep(args):
    cfg, seed, r, kinds, alpha, family, allow_product = args
    data = simulate(cfg, _stream(seed, r)).to_dataset()
    sub = Subsampler(data, family)
    out = []
    for k in kinds:
        try:
            rep = run_test(data, k, alpha, subsampler=sub, family=family, allow_product=allow_product)
            out.append((rep.reject, rep.b_selected))
        except ProductSubsamplingRejected:
            raise
        except CoefRandError:
            out.append(None)
    return out


def _statistic_rep(args):
    cfg, seed, r, tag, kinds, family = args
    data = simulate(cfg, _stream(seed, r, tag)).to_dataset()
    out = []
    for k in kinds:
        try:
            out.append(statistic(k, data, family=family))
        except CoefRandError:
            out.append(math.nan)
    return out


def _map(fn, jobs, threads: int):
    if threads <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, jobs, chunksize=max(1, len(jobs) // (8 * threads))))


def _resolve_threads(threads: int | None) -> int:
    if not threads or threads < 1:
        return os.cpu_count() or 1
    return threads


def _subsampling_cells(spec: ExperimentSpec, T, rho, om) -> list[CellResult]:
    if StatKind.PRODUCT in spec.kinds and not spec.allow_product:
        raise ProductSubsamplingRejected("Product is excluded from subsampling experiments unless acknowledged")
    cfg = spec.config(T, rho, om)
    jobs = [(cfg, spec.base_seed, r, spec.kinds, spec.alpha, spec.family, spec.allow_product)
            for r in range(spec.reps)]
    results = _map(_subsampling_rep, jobs, _resolve_threads(spec.threads))
    cells = []
    for i, k in enumerate(spec.kinds):
        ok = [res[i] for res in results if res[i] is not None]
        n_failed = spec.reps - len(ok)
        rej = float(np.mean([o[0] for o in ok])) if ok else math.nan
        med = float(np.median([o[1] for o in ok]) / T) if ok else math.nan
        cells.append(CellResult(
            dgp=spec.dgp_name, T=T, rho_beta=rho, omega_beta2=om, kind=k,
            rejection_rate=rej, median_b_over_T=med, reps_completed=len(ok), n_failed=n_failed,
            valid=n_failed <= MAX_FAIL_FRACTION * spec.reps,
        ))
    return cells


def size_experiment(spec: ExperimentSpec) -> list[CellResult]:
    """Null rejection frequencies and median selected block sizes per ``(T, kind)``."""
    cells = []
    for T in spec.T_list:
        cells += _subsampling_cells(spec, T, spec.rho_beta_list[0], 0.0)
    return cells


def subsampling_power(spec: ExperimentSpec) -> list[CellResult]:
    """Rejection frequencies of the subsampling tests under each alternative."""
    cells = []
    for T in spec.T_list:
        for rho in spec.rho_beta_list:
            for om in spec.omega_beta2_list:
                cells += _subsampling_cells(spec, T, rho, om)
    return cells


def _full_sample_stats(spec: ExperimentSpec, cfg: DgpConfig, tag):
    jobs = [(cfg, spec.base_seed, r, tag, spec.kinds, spec.family) for r in range(spec.reps)]
    return np.array(_map(_statistic_rep, jobs, _resolve_threads(spec.threads)), dtype=np.float64)


def size_adjusted_power(spec: ExperimentSpec) -> list[CellResult]:
    """Power against the empirical ``1 - alpha`` quantile of the null full-sample statistic.

    No subsampling is involved, so the Product statistic is allowed here.
    """
    cells = []
    for T in spec.T_list:
        null = _full_sample_stats(spec, spec.config(T, spec.rho_beta_list[0], 0.0), NULL_STREAM)
        crit = []
        for i in range(len(spec.kinds)):
            v = np.sort(null[:, i][np.isfinite(null[:, i])])
            crit.append(v[math.ceil(round((1 - spec.alpha) * v.size, 9)) - 1] if v.size else math.nan)
        for rho in spec.rho_beta_list:
            for om in spec.omega_beta2_list:
                alt = _full_sample_stats(spec, spec.config(T, rho, om), None)
                for i, k in enumerate(spec.kinds):
                    a = alt[:, i][np.isfinite(alt[:, i])]
                    n_failed = spec.reps - a.size
                    cells.append(CellResult(
                        dgp=spec.dgp_name, T=T, rho_beta=rho, omega_beta2=om, kind=k,
                        rejection_rate=float(np.mean(a > crit[i])) if a.size else math.nan,
                        median_b_over_T=math.nan, reps_completed=int(a.size), n_failed=n_failed,
                        valid=n_failed <= MAX_FAIL_FRACTION * spec.reps,
                    ))
    return cells


# ---------------------------------------------------------------------------
# table rendering

KIND_LABELS = {
    StatKind.LM: "LM", StatKind.LMSTAR: "LM", StatKind.WALD: "Wald", StatKind.WALDSTAR: "Wald",
    StatKind.SUM: "Sum", StatKind.PRODUCT: "Prod", StatKind.LTLM: "LT",
}


@dataclass
class Table:
    row_keys: tuple
    columns: list
    rows: list = field(default_factory=list)  # (key tuple, [values])

    def to_csv(self) -> str:
        lines = [",".join(list(self.row_keys) + self.columns)]
        for key, vals in self.rows:
            lines.append(",".join([_fmt_key(k) for k in key] + [_fmt(v) for v in vals]))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        head = list(self.row_keys) + self.columns
        body = [[_fmt_key(k) for k in key] + [_fmt(v) for v in vals] for key, vals in self.rows]
        widths = [max(len(str(c)) for c in col) for col in zip(head, *body)]
        out = ["  ".join(str(c).rjust(w) for c, w in zip(r, widths)) for r in [head] + body]
        return "\n".join(out) + "\n"


def _fmt(v) -> str:
    return "NA" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.4g}"


def _fmt_key(k) -> str:
    return f"{k:g}" if isinstance(k, float) else str(k)


def tabulate(cells: list[CellResult], row_keys=("dgp", "T"), value: str = "rejection_rate") -> Table:
    """Pivot cells into the row/column layout of the published tables."""
    columns, seen = [], {}
    for c in cells:
        lab = KIND_LABELS[c.kind]
        if lab not in columns:
            columns.append(lab)
        key = tuple(getattr(c, k) for k in row_keys)
        seen.setdefault(key, {})[lab] = getattr(c, value) if c.valid else math.nan
    table = Table(row_keys=tuple(row_keys), columns=columns)
    for key, vals in seen.items():
        table.rows.append((key, [vals.get(col, math.nan) for col in columns]))
    return table
