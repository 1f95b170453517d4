"""Gaussian QMLE of an AR(1)-GARCH(1,1) model for a predictor series.

The series is standardized before fitting and the estimates mapped back, so
``rho_x``, ``c1`` and ``c2`` are invariant to rescaling the data.  The
optimizer works on an unconstrained parameterization in which every iterate
satisfies ``c0 > 0``, ``c1, c2 >= 0`` and ``c1 + c2 < 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.special import expit, logit

from coefrand.core import as_series
from coefrand.errors import DegenerateSeries, InvalidDataset, NonConvergenceWarning

MIN_LENGTH = 50
# keeps c1 + c2 strictly below one in floating point
_PERSISTENCE_CAP = 1.0 - 1e-9
_STARTS = ((0.8, 0.1), (0.5, 0.3), (0.2, 0.2), (0.1, 0.85))


@dataclass(frozen=True)
class GarchFitResult:
    alpha_x: float
    rho_x: float
    c0: float
    c1: float
    c2: float
    loglik: float
    converged: bool
    iterations: int


def _unpack(theta):
    alpha, rho, log_c0, a, r = theta
    p = _PERSISTENCE_CAP * expit(a)
    share = expit(r)
    return alpha, rho, math.exp(log_c0), p * share, p * (1.0 - share)


def _pack(alpha, rho, c0, c1, c2):
    p = (c1 + c2) / _PERSISTENCE_CAP
    return np.array([alpha, rho, math.log(c0), logit(p), logit(c1 / (c1 + c2))])


def garch_loglik(x, alpha, rho, c0, c1, c2) -> float:
    """Gaussian conditional log-likelihood of ``x_1..x_{n-1}`` given ``x_0``.

    The variance recursion starts at the sample variance of the AR residuals.
    """
    x = np.asarray(x, dtype=np.float64)
    e = x[1:] - alpha - rho * x[:-1]
    s0 = float(np.mean(e * e))
    if not s0 > 0:
        return -math.inf
    drive = c0 + c2 * e[:-1] ** 2
    sigma2 = np.empty_like(e)
    sigma2[0] = s0
    sigma2[1:] = lfilter([1.0], [1.0, -c1], drive, zi=[c1 * s0])[0]
    if np.any(sigma2 <= 0):
        return -math.inf
    return float(-0.5 * np.sum(math.log(2 * math.pi) + np.log(sigma2) + e * e / sigma2))


def _negll(theta, x):
    ll = garch_loglik(x, *_unpack(theta))
    return 1e300 if not np.isfinite(ll) else -ll


def fit_ar1_garch11(x, maxiter: int = 5000) -> GarchFitResult:
    """Fit ``x_t = alpha_x + rho_x x_{t-1} + e_t`` with GARCH(1,1) errors.

    OLS gives the AR start; several variance-targeted GARCH starts are refined
    by Nelder-Mead and the best is polished by a restart.  If the iteration cap
    is hit the result is returned with ``converged=False`` and a
    :class:`NonConvergenceWarning`.
    """
    x = as_series(x, "x")
    if x.size < MIN_LENGTH:
        raise InvalidDataset(f"need at least {MIN_LENGTH} observations, got {x.size}")
    sd = float(np.std(x))
    if not sd > 0:
        raise DegenerateSeries("series is constant")
    m = float(np.mean(x))
    xs = (x - m) / sd

    xl, xt = xs[:-1], xs[1:]
    rho0 = float(np.cov(xl, xt, bias=True)[0, 1] / np.var(xl))
    alpha0 = float(xt.mean() - rho0 * xl.mean())
    v0 = float(np.var(xt - alpha0 - rho0 * xl))
    if not v0 > 0:
        raise DegenerateSeries("AR(1) residuals are identically zero")

    opts = {"maxiter": maxiter, "maxfev": 2 * maxiter, "xatol": 1e-9, "fatol": 1e-11}
    best = None
    for c1, c2 in _STARTS:
        start = _pack(alpha0, rho0, v0 * (1 - c1 - c2), c1, c2)
        res = minimize(_negll, start, args=(xs,), method="Nelder-Mead", options=opts)
        if best is None or res.fun < best.fun:
            best = res
    iterations = int(best.nit)
    polished = minimize(_negll, best.x, args=(xs,), method="Nelder-Mead", options=opts)
    if polished.fun <= best.fun:
        iterations += int(polished.nit)
        best = polished
    if not best.success:
        warnings.warn(f"GARCH QMLE did not converge: {best.message}", NonConvergenceWarning, stacklevel=2)

    a_s, rho, c0_s, c1, c2 = _unpack(best.x)
    n_obs = x.size - 1
    return GarchFitResult(
        alpha_x=m * (1 - rho) + sd * a_s,
        rho_x=float(rho),
        c0=c0_s * sd * sd,
        c1=float(c1),
        c2=float(c2),
        loglik=float(-best.fun - n_obs * math.log(sd)),
        converged=bool(best.success),
        iterations=iterations,
    )


class Eligibility(str, Enum):
    WALD_ELIGIBLE = "WaldEligible"
    WALD_INELIGIBLE = "WaldIneligible"


def screen_predictor(fit: GarchFitResult, rho_threshold: float = 0.9, materiality_floor: float = 0.2) -> Eligibility:
    """Flag predictors for which the Wald-type tests are not identified.

    A predictor far from a unit root (``|rho_x| < rho_threshold``) whose GARCH
    effects are material (``c1 + c2 > materiality_floor``) is ineligible.  The
    thresholds are an operational rule, not a derived one.
    """
    if abs(fit.rho_x) < rho_threshold and fit.c1 + fit.c2 > materiality_floor:
        return Eligibility.WALD_INELIGIBLE
    return Eligibility.WALD_ELIGIBLE


def fits_to_csv(fits: dict, eligibility: dict | None = None) -> str:
    """Rows ``predictor, c0, c1, c2, rho_x`` and optionally the screen outcome.

    ``fits`` maps predictor names to results, or ``None`` for a failed fit.
    """
    head = "predictor,c0,c1,c2,rho_x" + (",eligibility" if eligibility is not None else "")
    lines = [head]
    for name, f in fits.items():
        if f is None:
            cells = [name, "NA", "NA", "NA", "NA"]
        else:
            cells = [name, f"{f.c0:.4g}", f"{f.c1:.4g}", f"{f.c2:.4g}", f"{f.rho_x:.4g}"]
        if eligibility is not None:
            e = eligibility.get(name)
            cells.append("NA" if e is None else e.value)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
