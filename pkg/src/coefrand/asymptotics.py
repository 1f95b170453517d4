"""Null limit distributions as functionals of Ornstein-Uhlenbeck paths.

Brownian motions are approximated by normalized partial sums of ``steps``
Gaussian increments and stochastic integrals by left-endpoint (Ito) sums.
Draws are generated in chunks; for a fixed seed the underlying standard
normals are shared across the ``c_x`` grid (common random numbers), which
keeps quantile curves smooth in ``c_x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from coefrand.errors import InvalidConfig, InvalidCorrelation
from coefrand.teststats import StatKind

C_X_MINUS_INF = -200.0
DEFAULT_C_X_GRID = tuple(-float(c) for c in range(0, 42, 2))
DEFAULT_CORR_GRID = (0.0, -0.3, -0.6, -0.9)
DEFAULT_CORR2_GRID = (0.0, -0.3)
CHUNK = 2000


def simulate_ou_path(c_x: float, steps: int, shocks) -> np.ndarray:
    """Discretized OU path ``s_k = (1 + c_x/N) s_{k-1} + e_k / sqrt(N)``, ``s_0 = 0``.

    ``shocks`` may be 2-d, one path per row; returns ``s_1 .. s_N``.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    e = np.asarray(shocks, dtype=np.float64)
    if e.shape[-1] != steps:
        raise ValueError(f"expected {steps} shocks per path, got {e.shape[-1]}")
    return lfilter([1.0], [1.0, -(1.0 + c_x / steps)], e / math.sqrt(steps), axis=-1)


def _corr_matrix(kind: StatKind, corr) -> np.ndarray:
    """Correlation of the driving motions ``(W_x, W_y, W_eta)``."""
    if kind in (StatKind.SUM, StatKind.PRODUCT):
        try:
            c_xy, c_xe = corr
        except TypeError:
            raise InvalidCorrelation("Sum/Product need a (corr_x_y, corr_x_eta) pair") from None
    elif kind.is_lm_family:
        c_xy, c_xe = float(corr), 0.0
    else:
        c_xy, c_xe = 0.0, float(corr)
    R = np.array([[1.0, c_xy, c_xe], [c_xy, 1.0, 0.0], [c_xe, 0.0, 1.0]])
    if abs(c_xy) >= 1 or abs(c_xe) >= 1 or np.linalg.eigvalsh(R).min() < -1e-12:
        raise InvalidCorrelation(f"correlations ({c_xy}, {c_xe}) do not form a valid correlation matrix")
    return R


def _factor(R: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L' = R`` (pivot-free, tolerates singular ``R``)."""
    L = np.zeros_like(R)
    for i in range(3):
        for j in range(i + 1):
            s = R[i, j] - L[i, :j] @ L[j, :j]
            if i == j:
                L[i, i] = math.sqrt(max(s, 0.0))
            else:
                L[i, j] = s / L[j, j] if L[j, j] > 0 else 0.0
    return L


def _wald_limit(J, dWe, N):
    j1 = J - J.mean(axis=1, keepdims=True)
    j2 = J * J
    j2 = j2 - j2.mean(axis=1, keepdims=True)
    a = np.einsum("ij,ij->i", j1, dWe)
    b = np.einsum("ij,ij->i", j2, dWe)
    g11 = np.einsum("ij,ij->i", j1, j1) / N
    g12 = np.einsum("ij,ij->i", j1, j2) / N
    g22 = np.einsum("ij,ij->i", j2, j2) / N
    det = g11 * g22 - g12 * g12
    return (g22 * a * a - 2.0 * g12 * a * b + g11 * b * b) / det


def _lm_limit(J, dWy, N, demean: bool):
    if demean:
        J = J - J.mean(axis=1, keepdims=True)
        dWy = dWy - dWy.mean(axis=1, keepdims=True)
    jj = np.einsum("ij,ij->i", J, J) / N
    slope = np.einsum("ij,ij->i", J, dWy) / jj
    dA = dWy - slope[:, None] * J / N
    inner = np.cumsum(J * dA, axis=1)
    return np.mean(inner * inner, axis=1) / jj


def limit_draws(kind, c_x: float, corr, steps: int = 1000, n: int = 1000,
                rng: np.random.Generator | None = None, lm_demean: bool = False,
                normals: np.ndarray | None = None) -> np.ndarray:
    """``n`` independent draws of the null limit of ``kind``.

    Wald-type kinds use the quadratic form in the Ito integrals of the demeaned
    ``J`` and ``J^2 - int J^2``; LM-type kinds use the partial-sum ratio;
    Sum and Product combine both on the same paths.
    """
    kind = StatKind.parse(kind)
    if kind is StatKind.LTLM:
        raise ValueError("no limit simulator for the LT statistic")
    R = _corr_matrix(kind, corr)
    L = _factor(R)
    if normals is None:
        rng = np.random.default_rng() if rng is None else rng
        normals = rng.standard_normal((3, n, steps))
    e = np.einsum("ij,jnk->ink", L, normals)
    dW = e / math.sqrt(steps)
    path = simulate_ou_path(c_x, steps, e[0])
    # left endpoints J_{k-1}, J_0 = 0
    J = np.concatenate([np.zeros((path.shape[0], 1)), path[:, :-1]], axis=1)
    out_w = out_m = None
    if not kind.is_lm_family:
        out_w = _wald_limit(J, dW[2], steps)
    if kind not in (StatKind.WALD, StatKind.WALDSTAR):
        out_m = _lm_limit(J, dW[1], steps, lm_demean)
    if kind.is_lm_family:
        return out_m
    if kind in (StatKind.WALD, StatKind.WALDSTAR):
        return out_w
    return out_w + out_m if kind is StatKind.SUM else out_w * out_m


def limit_draw(kind, c_x: float, corr, steps: int = 1000, rng: np.random.Generator | None = None) -> float:
    """A single draw of the null limit."""
    return float(limit_draws(kind, c_x, corr, steps=steps, n=1, rng=rng)[0])


@dataclass(frozen=True)
class LimitSimConfig:
    steps: int = 1000
    reps: int = 20000
    c_x_grid: tuple = DEFAULT_C_X_GRID
    corr_grid: tuple = DEFAULT_CORR_GRID
    corr2_grid: tuple = DEFAULT_CORR2_GRID
    alpha: float = 0.05
    seed: int = 0
    lm_demean: bool = False

    def __post_init__(self):
        if self.steps < 100:
            raise InvalidConfig("steps must be at least 100")
        if self.reps < 1000:
            raise InvalidConfig("reps must be at least 1000 for surface output")
        if any(c > 0 for c in self.c_x_grid):
            raise InvalidConfig("c_x grid values must be <= 0")
        if not 0 < self.alpha < 1:
            raise InvalidConfig("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class SurfaceRow:
    kind: str
    c_x: float
    corr: float
    corr2: float | None
    quantile: float
    size: float


@dataclass
class QuantileSurface:
    kind: StatKind
    alpha: float
    rows: list = field(default_factory=list)

    def row(self, c_x: float, corr, corr2=None) -> SurfaceRow:
        for r in self.rows:
            if math.isclose(r.c_x, c_x) and math.isclose(r.corr, corr) and (
                corr2 is None or (r.corr2 is not None and math.isclose(r.corr2, corr2))
            ):
                return r
        raise KeyError((c_x, corr, corr2))

    def to_csv(self) -> str:
        pair = self.kind in (StatKind.SUM, StatKind.PRODUCT)
        head = "kind,c_x,corr," + ("corr2," if pair else "") + "quantile,size\n"
        body = []
        for r in self.rows:
            cells = [r.kind, f"{r.c_x:.4g}", f"{r.corr:.4g}"]
            if pair:
                cells.append(f"{r.corr2:.4g}")
            cells += [f"{r.quantile:.4g}", f"{r.size:.4g}"]
            body.append(",".join(cells))
        return head + "\n".join(body) + "\n"


def _order_stat(sorted_vals, p):
    k = math.ceil(round(p * sorted_vals.size, 9))
    return float(sorted_vals[max(k, 1) - 1])


def quantile_surface(config: LimitSimConfig, kind) -> QuantileSurface:
    """Asymptotic ``1 - alpha`` quantiles and subsampling sizes over the grid.

    The size at ``(c_x, corr)`` is the probability that the limit at ``c_x``
    exceeds the quantile of the ``c_x = 0`` limit with the same correlation,
    since subsample statistics converge to the ``c_x = 0`` limit.
    """
    kind = StatKind.parse(kind)
    c_grid = sorted(set(float(c) for c in config.c_x_grid) | {0.0}, reverse=True)
    if kind in (StatKind.SUM, StatKind.PRODUCT):
        corrs = [(c1, c2) for c2 in config.corr2_grid for c1 in config.corr_grid]
    else:
        corrs = list(config.corr_grid)
    for c in corrs:
        _corr_matrix(kind, c)

    samples: dict = {}
    n_chunks = math.ceil(config.reps / CHUNK)
    for chunk in range(n_chunks):
        n = min(CHUNK, config.reps - chunk * CHUNK)
        normals = np.random.default_rng([config.seed, chunk]).standard_normal((3, n, config.steps))
        for c in corrs:
            for cx in c_grid:
                d = limit_draws(kind, cx, c, steps=config.steps, normals=normals, lm_demean=config.lm_demean)
                samples.setdefault((cx, c), []).append(d)

    surface = QuantileSurface(kind=kind, alpha=config.alpha)
    for c in corrs:
        ref = np.sort(np.concatenate(samples[(0.0, c)]))
        q_ref = _order_stat(ref, 1 - config.alpha)
        for cx in c_grid:
            vals = np.sort(np.concatenate(samples[(cx, c)]))
            c1, c2 = c if isinstance(c, tuple) else (c, None)
            surface.rows.append(SurfaceRow(
                kind=kind.value, c_x=cx, corr=float(c1), corr2=None if c2 is None else float(c2),
                quantile=_order_stat(vals, 1 - config.alpha), size=float(np.mean(vals > q_ref)),
            ))
    return surface
