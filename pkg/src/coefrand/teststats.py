"""Coefficient-constancy statistics for the predictive regression.

Every statistic is computed by a small set of array kernels that operate on
``(n_windows, b)`` blocks, so the full-sample statistic is the one-row case of
the same code path that evaluates all subsample windows.  The scalar functions
(:func:`lm_stat`, :func:`wald_stat`, ...) validate their input and raise the
appropriate :mod:`coefrand.errors` exception; the batch path
(:class:`WindowBatch`) marks undefined windows with NaN instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from coefrand.core import Dataset, residual_z
from coefrand.errors import (
    DegenerateRegressor,
    SingularGram,
    TruncationTooLarge,
    ZeroDenominator,
    ZeroLongRunVariance,
    ZeroResidualVariance,
)

# Relative determinant threshold below which the (x, x^2) gram is treated as singular.
GRAM_RTOL = 1e-10
# sigma2_xi_lr is floored at this multiple of the short-run variance.
LR_FLOOR = 1e-6


class StatKind(str, Enum):
    LM = "lm"
    LMSTAR = "lmstar"
    WALD = "wald"
    WALDSTAR = "waldstar"
    SUM = "sum"
    PRODUCT = "product"
    LTLM = "ltlm"

    @classmethod
    def parse(cls, value) -> StatKind:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "").replace("*", "star")
        aliases = {"prod": "product", "lt": "ltlm", "lmlt": "ltlm", "w": "wald", "wstar": "waldstar"}
        return cls(aliases.get(key, key))

    @property
    def is_lm_family(self) -> bool:
        """LM-type statistics share the q=0.85 block grid and the hybrid critical value."""
        return self in (StatKind.LM, StatKind.LMSTAR)


ROBUST = "robust"
HOMOSKEDASTIC = "homoskedastic"


def constituents(kind: StatKind, family: str = ROBUST) -> tuple[StatKind, StatKind]:
    """The (Wald, LM) pair combined by the Sum and Product statistics."""
    if family == ROBUST:
        return StatKind.WALDSTAR, StatKind.LMSTAR
    if family == HOMOSKEDASTIC:
        return StatKind.WALD, StatKind.LM
    raise ValueError(f"unknown family {family!r}")


def parzen_weight(u):
    """Parzen kernel: ``1-6u^2+6u^3`` on [0, 1/2], ``2(1-u)^3`` on (1/2, 1], 0 beyond."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0):
        raise ValueError("Parzen weight is defined for u >= 0")
    out = np.where(u <= 0.5, 1.0 - 6.0 * u**2 + 6.0 * u**3, 2.0 * (1.0 - u) ** 3)
    out = np.where(u > 1.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def truncation_length(T: int) -> int:
    """Bandwidth ``floor(4 (T/100)^(1/3))``, never below 1."""
    if T < 1:
        raise ValueError("T must be positive")
    # the small offset keeps exact cubes such as T=800 from flooring one short
    return max(1, int(np.floor(4.0 * (T / 100.0) ** (1.0 / 3.0) + 1e-12)))


# ---------------------------------------------------------------------------
# array kernels; every argument is 2-d with one row per window


def _ols(Y, X):
    sxx = np.einsum("ij,ij->i", X, X)
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = np.einsum("ij,ij->i", Y, X) / sxx
    z = Y - beta[:, None] * X
    return beta, z, sxx


def _second_stage(z, X):
    z2 = z * z
    z2t = z2 - z2.mean(axis=1, keepdims=True)
    x1 = X - X.mean(axis=1, keepdims=True)
    x2 = X * X
    x2 = x2 - x2.mean(axis=1, keepdims=True)
    g11 = np.einsum("ij,ij->i", x1, x1)
    g12 = np.einsum("ij,ij->i", x1, x2)
    g22 = np.einsum("ij,ij->i", x2, x2)
    r1 = np.einsum("ij,ij->i", x1, z2t)
    r2 = np.einsum("ij,ij->i", x2, z2t)
    det = g11 * g22 - g12 * g12
    singular = ~(det > GRAM_RTOL * g11 * g22)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(singular, np.nan, det)
        th1 = (g22 * r1 - g12 * r2) / d
        th2 = (g11 * r2 - g12 * r1) / d
    xi = z2t - th1[:, None] * x1 - th2[:, None] * x2
    gram = np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)
    return {
        "z2t": z2t, "x1": x1, "x2": x2, "gram": gram, "det": d,
        "r": np.stack([r1, r2], -1), "theta": np.stack([th1, th2], -1), "xi": xi,
    }


def _quad_inv(gram, det, u):
    """Row-wise ``u' G^{-1} u`` for 2x2 ``G`` with precomputed determinant."""
    g11, g12, g22 = gram[:, 0, 0], gram[:, 0, 1], gram[:, 1, 1]
    u1, u2 = u[:, 0], u[:, 1]
    return (g22 * u1 * u1 - 2.0 * g12 * u1 * u2 + g11 * u2 * u2) / det


def _innovations(X_raw, source: str):
    """Predictor innovation proxy aligned so column k holds the term for period k+1."""
    if source == "diff":
        return np.diff(X_raw, axis=1)
    if source == "ar1":
        xt, xl = X_raw[:, 1:], X_raw[:, :-1]
        xlc = xl - xl.mean(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = np.einsum("ij,ij->i", xlc, xt - xt.mean(axis=1, keepdims=True)) / np.einsum(
                "ij,ij->i", xlc, xlc
            )
        resid = xt - xt.mean(axis=1, keepdims=True) - rho[:, None] * xlc
        return resid
    raise ValueError(f"unknown lambda source {source!r}")


def _long_run(xi, innov, l: int):
    n = xi.shape[1]
    s2 = np.einsum("ij,ij->i", xi, xi) / n
    lr = s2.copy()
    lam = np.zeros_like(s2)
    for i in range(1, l + 1):
        w = parzen_weight(i / (l + 1.0))
        lr += w * 2.0 * np.einsum("ij,ij->i", xi[:, i:], xi[:, :-i]) / n
        lam += w * np.einsum("ij,ij->i", innov[:, : n - i], xi[:, i:]) / n
    return s2, lr, lam


# ---------------------------------------------------------------------------


class WindowBatch:
    """All statistics for a stack of equal-length windows.

    Parameters
    ----------
    Y, X : ndarray, shape (m, b)
        Regressand and lagged predictor, one window per row, *not* demeaned.
    demean : bool
        Demean each row before computing anything.
    l : int, optional
        Long-run truncation; defaults to ``truncation_length(b)``.
    lambda_source : {"diff", "ar1"}
        Innovation proxy used in the one-sided long-run covariance.
    """

    def __init__(self, Y, X, demean: bool = True, l: int | None = None, lambda_source: str = "diff"):
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        self.X_raw = X
        if demean:
            Y = Y - Y.mean(axis=1, keepdims=True)
            X = X - X.mean(axis=1, keepdims=True)
        self.Y, self.X = Y, X
        self.b = Y.shape[1]
        self.l = truncation_length(self.b) if l is None else int(l)
        if self.l >= self.b:
            raise TruncationTooLarge(f"truncation {self.l} must be below window length {self.b}")
        self.lambda_source = lambda_source

    @cached_property
    def _first(self):
        return _ols(self.Y, self.X)

    @property
    def beta_hat(self):
        return self._first[0]

    @property
    def z(self):
        return self._first[1]

    @property
    def sxx(self):
        return self._first[2]

    @cached_property
    def _cusum_sq(self):
        xz = self.X * self.z
        s = np.cumsum(xz, axis=1)
        return np.einsum("ij,ij->i", s, s), np.einsum("ij,ij->i", xz, xz)

    @cached_property
    def sigma2(self):
        return np.mean(self.z * self.z, axis=1)

    @cached_property
    def lm(self):
        num, _ = self._cusum_sq
        den = self.b * self.sigma2 * self.sxx
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0, num / den, np.nan)

    @cached_property
    def lm_star(self):
        num, sxz2 = self._cusum_sq
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(sxz2 > 0, num / (self.b * sxz2), np.nan)

    @cached_property
    def stage(self):
        return _second_stage(self.z, self.X)

    @cached_property
    def sigma2_xi(self):
        xi = self.stage["xi"]
        return np.einsum("ij,ij->i", xi, xi) / self.b

    @cached_property
    def wald(self):
        st = self.stage
        theta_g_theta = np.einsum("ij,ij->i", st["theta"], st["r"])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.sigma2_xi > 0, theta_g_theta / self.sigma2_xi, np.nan)

    @cached_property
    def long_run(self):
        """``(sigma2_xi_lr, lambda_x_eta, clamped)`` per window."""
        innov = _innovations(self.X_raw, self.lambda_source)
        s2, lr, lam = _long_run(self.stage["xi"], innov, self.l)
        floor = LR_FLOOR * s2
        clamped = lr < floor
        return np.where(clamped, floor, lr), lam, clamped

    @cached_property
    def wald_star(self):
        st = self.stage
        lr, lam, _ = self.long_run
        corr = np.stack([self.b * lam, 2.0 * lam * self.X.sum(axis=1)], -1)
        u = st["r"] - corr
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(lr > 0, _quad_inv(st["gram"], st["det"], u) / lr, np.nan)

    @cached_property
    def lt_lm(self):
        x2 = self.stage["x2"]
        num = np.einsum("ij,ij->i", x2, self.z * self.z) ** 2
        den = 2.0 * self.sigma2**2 * np.einsum("ij,ij->i", x2, x2)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0, num / den, np.nan)

    def get(self, kind, family: str = ROBUST):
        kind = StatKind.parse(kind)
        if kind is StatKind.LM:
            return self.lm
        if kind is StatKind.LMSTAR:
            return self.lm_star
        if kind is StatKind.WALD:
            return self.wald
        if kind is StatKind.WALDSTAR:
            return self.wald_star
        if kind is StatKind.LTLM:
            return self.lt_lm
        w, m = constituents(kind, family)
        if kind is StatKind.SUM:
            return self.get(w) + self.get(m)
        return self.get(w) * self.get(m)


def _batch(data: Dataset, **kw) -> WindowBatch:
    # a demeaned Dataset is already centred; re-centring would only add rounding noise
    return WindowBatch(data.y[None, :], data.x_lag[None, :], demean=False, **kw)


# ---------------------------------------------------------------------------
# scalar API


@dataclass(frozen=True)
class SecondStage:
    """Regression of demeaned ``z_t^2`` on demeaned ``x_{t-1}`` and ``x_{t-1}^2``."""

    z2_demeaned: np.ndarray
    x1_demeaned: np.ndarray
    x2_demeaned: np.ndarray
    theta_hat: tuple[float, float]
    xi_residuals: np.ndarray
    gram: np.ndarray

    @property
    def sigma2_xi(self) -> float:
        return float(np.mean(self.xi_residuals**2))


@dataclass(frozen=True)
class LongRunEstimates:
    sigma2_xi_lr: float
    lambda_x_eta: float
    truncation_l: int
    clamped: bool = False


def _check_regressor(data: Dataset):
    if float(data.x_lag @ data.x_lag) == 0.0:
        raise DegenerateRegressor("sum of squared predictor values is zero")


def lm_stat(data: Dataset) -> float:
    """Cumulative-score LM statistic with the homoskedastic variance estimate."""
    _check_regressor(data)
    wb = _batch(data)
    if not wb.sigma2[0] > 0:
        raise ZeroResidualVariance("residuals are identically zero")
    return float(wb.lm[0])


def lm_star_stat(data: Dataset) -> float:
    """Heteroskedasticity-robust cumulative-score LM statistic."""
    _check_regressor(data)
    wb = _batch(data)
    if np.isnan(wb.lm_star[0]):
        raise ZeroDenominator("every x_{t-1} z_t product is zero")
    return float(wb.lm_star[0])


def second_stage(data: Dataset, beta: float) -> SecondStage:
    z = residual_z(data, beta)
    st = _second_stage(z[None, :], data.x_lag[None, :])
    if np.isnan(st["det"][0]):
        raise SingularGram("x and x^2 are collinear in this sample")
    return SecondStage(
        z2_demeaned=st["z2t"][0],
        x1_demeaned=st["x1"][0],
        x2_demeaned=st["x2"][0],
        theta_hat=(float(st["theta"][0, 0]), float(st["theta"][0, 1])),
        xi_residuals=st["xi"][0],
        gram=st["gram"][0],
    )


def _checked_wald_batch(data: Dataset, **kw) -> WindowBatch:
    _check_regressor(data)
    wb = _batch(data, **kw)
    if np.isnan(wb.stage["det"][0]):
        raise SingularGram("x and x^2 are collinear in this sample")
    if not wb.sigma2_xi[0] > 0:
        raise ZeroResidualVariance("second-stage residuals are identically zero")
    return wb


def wald_stat(data: Dataset) -> float:
    """Wald statistic for ``(delta, omega_beta^2) = (0, 0)`` evaluated at the OLS slope."""
    return float(_checked_wald_batch(data).wald[0])


def long_run_estimates(stage: SecondStage, x_lag, l: int, lambda_source: str = "diff") -> LongRunEstimates:
    """Parzen-kernel long-run variance of the second-stage residuals and one-sided covariance."""
    xi = np.asarray(stage.xi_residuals, dtype=np.float64)
    n = xi.size
    if l >= n:
        raise TruncationTooLarge(f"truncation {l} must be below sample size {n}")
    innov = _innovations(np.asarray(x_lag, dtype=np.float64)[None, :], lambda_source)
    s2, lr, lam = _long_run(xi[None, :], innov, int(l))
    floor = LR_FLOOR * s2[0]
    clamped = bool(lr[0] < floor)
    return LongRunEstimates(
        sigma2_xi_lr=float(floor if clamped else lr[0]),
        lambda_x_eta=float(lam[0]),
        truncation_l=int(l),
        clamped=clamped,
    )


def wald_star_stat(data: Dataset, l: int | None = None, lambda_source: str = "diff") -> float:
    """Long-run corrected Wald statistic."""
    wb = _checked_wald_batch(data, l=l, lambda_source=lambda_source)
    lr = wb.long_run[0][0]
    if not lr > 0:
        raise ZeroLongRunVariance("long-run variance estimate is zero")
    return float(wb.wald_star[0])


def lt_lm_stat(data: Dataset) -> float:
    """LT statistic: LM test against a stationary random coefficient."""
    _check_regressor(data)
    x2 = data.x_lag**2
    if np.ptp(x2) == 0.0:
        raise DegenerateRegressor("x_{t-1}^2 is constant")
    wb = _batch(data)
    if not wb.sigma2[0] > 0:
        raise ZeroResidualVariance("residuals are identically zero")
    return float(wb.lt_lm[0])


def combined_stat(kind, data: Dataset, family: str = ROBUST, **kw) -> float:
    """Sum or Product of the Wald-type and LM-type statistics of ``family``.

    Keyword arguments are forwarded to the Wald-type constituent.
    """
    kind = StatKind.parse(kind)
    if kind not in (StatKind.SUM, StatKind.PRODUCT):
        raise ValueError(f"{kind.value} is not a combined statistic")
    w_kind, m_kind = constituents(kind, family)
    w = statistic(w_kind, data, **kw) if w_kind is StatKind.WALDSTAR else statistic(w_kind, data)
    m = statistic(m_kind, data)
    return w + m if kind is StatKind.SUM else w * m


def statistic(kind, data: Dataset, family: str = ROBUST, **kw) -> float:
    """Dispatch on :class:`StatKind`.

    Keyword arguments (``l``, ``lambda_source``) only affect the long-run
    corrected Wald statistic, alone or inside a combination.
    """
    kind = StatKind.parse(kind)
    if kind is StatKind.LM:
        return lm_stat(data)
    if kind is StatKind.LMSTAR:
        return lm_star_stat(data)
    if kind is StatKind.WALD:
        return wald_stat(data)
    if kind is StatKind.WALDSTAR:
        return wald_star_stat(data, **kw)
    if kind is StatKind.LTLM:
        return lt_lm_stat(data)
    return combined_stat(kind, data, family, **kw)
