"""Subsampling inference: rolling-window statistics, block-size choice and test decisions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from coefrand.core import Dataset
from coefrand.errors import (
    EmptyGrid,
    ProductSubsamplingRejected,
    TooManyDroppedWindows,
    UnsupportedAlpha,
)
from coefrand.teststats import ROBUST, StatKind, WindowBatch, statistic

MIN_BLOCK = 8
MAX_DROP_FRACTION = 0.10

# Upper quantiles of the LM limit when the predictor is I(0), keyed by alpha.
HYBRID_CONSTANTS = {0.05: 0.47}

SUM_CAVEAT = (
    "Sum test subsampling validity is only established for symmetric regression errors; "
    "no hybrid constant is applied."
)


@dataclass(frozen=True)
class EmpiricalDistribution:
    sorted_values: np.ndarray
    n_missing: int = 0

    def __post_init__(self):
        v = np.sort(np.asarray(self.sorted_values, dtype=np.float64).reshape(-1))
        if v.size < 1:
            raise ValueError("empirical distribution needs at least one value")
        if not np.all(np.isfinite(v)):
            raise ValueError("empirical distribution values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "sorted_values", v)

    @property
    def size(self) -> int:
        return int(self.sorted_values.size)

    def cdf(self, x):
        """Right-continuous empirical CDF."""
        return np.searchsorted(self.sorted_values, x, side="right") / self.size

    def quantile(self, p: float) -> float:
        """``ceil(p m)``-th order statistic (``-inf`` for ``p = 0``)."""
        k = math.ceil(round(p * self.size, 9))
        if k <= 0:
            return -math.inf
        return float(self.sorted_values[min(k, self.size) - 1])


@dataclass(frozen=True)
class BlockSelectionConfig:
    q: float
    j_min: int
    j_max: int

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError("q must lie in (0, 1)")
        if not self.j_min < self.j_max:
            raise EmptyGrid(f"j_min={self.j_min} must be below j_max={self.j_max}")

    def grid(self, T: int) -> list[int]:
        bs = {int(math.floor(self.q**j * T + 1e-9)) for j in range(self.j_max, self.j_min - 1, -1)}
        grid = sorted(b for b in bs if MIN_BLOCK <= b <= T - 1)
        if not grid:
            raise EmptyGrid(f"no admissible block sizes for T={T}")
        return grid


def default_block_config(T: int, kind) -> BlockSelectionConfig:
    """Grid settings: ``q = 0.85`` for the LM family, ``q = 0.95`` otherwise."""
    kind = StatKind.parse(kind)
    if kind.is_lm_family:
        q, top, lead = 0.85, 0.27, 5.0
    else:
        q, top, lead = 0.95, 0.3, 15.0
    j_min = math.floor(math.log(top) / math.log(q))
    j_max = math.floor(math.log(lead / T**0.9) / math.log(q))
    return BlockSelectionConfig(q=q, j_min=j_min, j_max=j_max)


def block_grid(T: int, kind, config: BlockSelectionConfig | None = None) -> list[int]:
    """Ascending, deduplicated candidate block sizes."""
    config = default_block_config(T, kind) if config is None else config
    return config.grid(T)


def ks_distance(a, b) -> float:
    """Kolmogorov-Smirnov distance between two empirical distributions."""
    a = a.sorted_values if isinstance(a, EmpiricalDistribution) else np.sort(np.asarray(a, float))
    b = b.sorted_values if isinstance(b, EmpiricalDistribution) else np.sort(np.asarray(b, float))
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def critical_value(dist: EmpiricalDistribution, alpha: float) -> float:
    """``1 - alpha`` empirical quantile (``alpha = 1`` gives ``-inf``: always reject)."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return dist.quantile(1.0 - alpha)


def hybrid_critical_value(kind, c_sub: float, alpha: float, constants: dict | None = None):
    """Return ``(critical value, hybrid_applied)``.

    LM-type statistics take ``max(c_sub, c_inf)`` with ``c_inf`` the I(0)-predictor
    limit quantile; other statistics pass ``c_sub`` through unchanged.
    """
    kind = StatKind.parse(kind)
    if not kind.is_lm_family:
        return c_sub, False
    table = HYBRID_CONSTANTS if constants is None else constants
    if alpha == 1:
        # the 0-quantile of a nonnegative limit is its lower support
        c_inf = 0.0
    else:
        c_inf = next((v for a, v in table.items() if math.isclose(a, alpha)), None)
        if c_inf is None:
            raise UnsupportedAlpha(f"no hybrid constant for alpha={alpha}; supply one via `constants`")
    if c_sub < c_inf:
        return c_inf, True
    return c_sub, False


class Subsampler:
    """Caches per-block-size window statistics for one dataset.

    All statistics for a given ``b`` are computed from one :class:`WindowBatch`,
    so testing several kinds on the same data shares the work.
    """

    def __init__(self, data: Dataset, family: str = ROBUST, lambda_source: str = "diff"):
        self.data = data
        self.family = family
        self.lambda_source = lambda_source
        self._batches: dict[int, WindowBatch] = {}

    def batch(self, b: int) -> WindowBatch:
        if b not in self._batches:
            T = self.data.T
            if not MIN_BLOCK <= b < T:
                raise ValueError(f"block size must satisfy {MIN_BLOCK} <= b < T={T}, got {b}")
            Y = sliding_window_view(self.data.y, b)
            X = sliding_window_view(self.data.x_lag, b)
            self._batches[b] = WindowBatch(Y, X, demean=self.data.demeaned, lambda_source=self.lambda_source)
        return self._batches[b]

    def distribution(self, kind, b: int) -> EmpiricalDistribution:
        vals = self.batch(b).get(kind, self.family)
        ok = np.isfinite(vals)
        n_missing = int(vals.size - ok.sum())
        if n_missing > MAX_DROP_FRACTION * vals.size:
            raise TooManyDroppedWindows(
                f"{n_missing} of {vals.size} windows undefined for {StatKind.parse(kind).value} at b={b}"
            )
        return EmpiricalDistribution(vals[ok], n_missing=n_missing)


def subsample_statistics(data: Dataset, kind, b: int, family: str = ROBUST) -> EmpiricalDistribution:
    """The ``T - b + 1`` rolling-window statistics (undefined windows dropped)."""
    return Subsampler(data, family).distribution(kind, b)


def select_block(data: Dataset, kind, config: BlockSelectionConfig | None = None,
                 subsampler: Subsampler | None = None):
    """Choose ``b`` minimising the KS distance between neighbouring grid distributions.

    Each consecutive pair ``(b_k, b_{k+1})`` of the ascending grid scores its
    smaller member; ties go to the smallest ``b``.

    Returns
    -------
    b_selected : int
    diagnostics : dict
        ``grid`` and the per-pair ``distances``.
    """
    sub = Subsampler(data) if subsampler is None else subsampler
    grid = block_grid(data.T, kind, config)
    if len(grid) < 2:
        raise EmptyGrid(f"block grid {grid} has fewer than two entries")
    dists = [sub.distribution(kind, b) for b in grid]
    ks = [ks_distance(dists[k], dists[k + 1]) for k in range(len(grid) - 1)]
    k_best = int(np.argmin(ks))
    return grid[k_best], {"grid": grid, "distances": ks}


@dataclass(frozen=True)
class TestReport:
    kind: StatKind
    statistic: float
    b_selected: int
    critical_value: float
    hybrid_applied: bool
    reject: bool
    alpha: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "statistic": self.statistic,
            "b": self.b_selected,
            "critical_value": self.critical_value,
            "hybrid": self.hybrid_applied,
            "reject": self.reject,
            "alpha": self.alpha,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    def to_text(self) -> str:
        lines = [
            f"test:            {self.kind.value}",
            f"statistic:       {self.statistic:.6g}",
            f"block size b:    {self.b_selected}",
            f"critical value:  {self.critical_value:.6g}" + ("  (hybrid)" if self.hybrid_applied else ""),
            f"alpha:           {self.alpha:g}",
            f"decision:        {'reject' if self.reject else 'do not reject'} H0: constant coefficient",
        ]
        if "note" in self.diagnostics:
            lines.append(f"note:            {self.diagnostics['note']}")
        return "\n".join(lines)


def run_test(data: Dataset, kind, alpha: float = 0.05, *, strict: bool = True,
             allow_product: bool = False, family: str = ROBUST,
             subsampler: Subsampler | None = None,
             config: BlockSelectionConfig | None = None) -> TestReport:
    """Full subsampling test: choose ``b``, take the critical value, compare."""
    kind = StatKind.parse(kind)
    if kind is StatKind.PRODUCT and strict and not allow_product:
        raise ProductSubsamplingRejected(
            "subsampling critical values are invalid for the Product statistic; "
            "pass allow_product=True to override for research use"
        )
    sub = Subsampler(data, family) if subsampler is None else subsampler
    b_sel, diag = select_block(data, kind, config, subsampler=sub)
    dist = sub.distribution(kind, b_sel)
    c_sub = critical_value(dist, alpha)
    cv, hybrid = hybrid_critical_value(kind, c_sub, alpha)
    kw = {"lambda_source": sub.lambda_source} if kind in (StatKind.WALDSTAR, StatKind.SUM, StatKind.PRODUCT) else {}
    full = statistic(kind, data, family=sub.family, **kw)
    diag = dict(diag, subsampling_critical_value=c_sub, n_missing=dist.n_missing)
    if kind is StatKind.SUM:
        diag["note"] = SUM_CAVEAT
    return TestReport(
        kind=kind,
        statistic=full,
        b_selected=b_sel,
        critical_value=cv,
        hybrid_applied=hybrid,
        reject=bool(full > cv),
        alpha=alpha,
        diagnostics=diag,
    )
