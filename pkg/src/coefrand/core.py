"""Time-series containers, demeaning and the first-stage OLS fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from coefrand.errors import DegenerateRegressor, InvalidDataset

MIN_LENGTH = 4


def as_series(values, name: str = "series") -> np.ndarray:
    """Return ``values`` as a read-only 1-d float64 array with finite entries."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size < 1:
        raise InvalidDataset(f"{name} must contain at least one observation")
    if not np.all(np.isfinite(arr)):
        raise InvalidDataset(f"{name} contains NaN or infinite values")
    arr.setflags(write=False)
    return arr


def demean(s) -> np.ndarray:
    """Subtract the sample mean.

    >>> demean([1.0, 2.0, 3.0])
    array([-1.,  0.,  1.])
    """
    arr = as_series(s)
    out = arr - arr.mean()
    out.setflags(write=False)
    return out


_demean = demean


@dataclass(frozen=True)
class Dataset:
    """Aligned regressand ``y_t`` and lagged predictor ``x_{t-1}``.

    Entry ``t`` of ``x_lag`` holds the predictor observed one period before
    ``y[t]``.  Build through :meth:`from_arrays` to get the default demeaning.
    """

    y: np.ndarray
    x_lag: np.ndarray
    demeaned: bool = False

    def __post_init__(self):
        y = as_series(self.y, "y")
        x = as_series(self.x_lag, "x_lag")
        if y.size != x.size:
            raise InvalidDataset(f"y has length {y.size} but x_lag has length {x.size}")
        if y.size < MIN_LENGTH:
            raise InvalidDataset(f"need at least {MIN_LENGTH} observations, got {y.size}")
        if self.demeaned:
            for name, s in (("y", y), ("x_lag", x)):
                if abs(s.mean()) > 1e-10 * (s.std() + 1.0):
                    raise InvalidDataset(f"{name} is flagged as demeaned but has mean {s.mean():g}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x_lag", x)

    @classmethod
    def from_arrays(cls, y, x_lag, demean: bool = True) -> Dataset:
        if demean:
            return cls(_demean(y), _demean(x_lag), demeaned=True)
        return cls(y, x_lag, demeaned=False)

    @property
    def T(self) -> int:
        return int(self.y.size)

    def window(self, start: int, length: int) -> Dataset:
        """Rows ``start .. start+length-1`` (0-based), re-demeaned if this set is demeaned."""
        if start < 0 or length < MIN_LENGTH or start + length > self.T:
            raise InvalidDataset(f"window [{start}, {start + length}) outside 0..{self.T}")
        sl = slice(start, start + length)
        return Dataset.from_arrays(self.y[sl], self.x_lag[sl], demean=self.demeaned)


@dataclass(frozen=True)
class OlsFit:
    beta_hat: float
    residuals_z: np.ndarray
    sigma2_hat: float


def residual_z(data: Dataset, beta: float) -> np.ndarray:
    """``z_t(beta) = y_t - beta * x_{t-1}``."""
    out = data.y - beta * data.x_lag
    out.setflags(write=False)
    return out


def ols_beta(data: Dataset) -> OlsFit:
    """Slope-through-origin OLS of ``y_t`` on ``x_{t-1}``."""
    sxx = float(data.x_lag @ data.x_lag)
    if sxx == 0.0:
        raise DegenerateRegressor("sum of squared predictor values is zero")
    beta_hat = float(data.y @ data.x_lag) / sxx
    z = residual_z(data, beta_hat)
    return OlsFit(beta_hat=beta_hat, residuals_z=z, sigma2_hat=float(np.mean(z * z)))
