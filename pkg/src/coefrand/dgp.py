"""Simulation of the predictive regression with a random coefficient.

The generated model is::

    y_t = a_y + (beta + omega_beta * s_beta_t) * x_{t-1} + e_y_t
    x_t = a_x + s_x_t,   s_x_t = rho_x * s_x_{t-1} + e_x_t,   s_x_0 = 0
    e_y_t = gamma * e_x_t + v_t

with either a unit-variance stationary AR(1) coefficient state or a
near-integrated one, and optional GARCH(1,1) volatility on ``v_t`` or on
``e_x_t``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy.signal import lfilter

from coefrand.core import Dataset
from coefrand.errors import InvalidConfig, UnknownPreset


@dataclass(frozen=True)
class GarchParams:
    """``sigma2_t = c0 + c1 * sigma2_{t-1} + c2 * shock_{t-1}^2``."""

    c0: float
    c1: float
    c2: float

    def __post_init__(self):
        if self.c0 <= 0:
            raise InvalidConfig("GARCH intercept c0 must be positive")
        if self.c1 < 0 or self.c2 < 0:
            raise InvalidConfig("GARCH coefficients must be nonnegative")
        if self.c1 + self.c2 >= 1:
            raise InvalidConfig(f"c1 + c2 = {self.c1 + self.c2:g} violates covariance stationarity")

    def unconditional_variance(self, shock_variance: float = 1.0) -> float:
        """Stationary mean of ``sigma2_t`` when the standardized shock has the given variance."""
        return self.c0 / (1.0 - self.c1 - self.c2 * shock_variance)


GARCH_ON_V = "v"
GARCH_ON_X = "x"
START_ZERO = "zero"
START_STATIONARY = "stationary"


@dataclass(frozen=True)
class DgpConfig:
    T: int
    beta: float = 0.0
    omega_beta2: float = 0.0
    rho_x: float = 0.95
    rho_beta: float = 0.6
    # when set, the coefficient state is s_t = (1 + c_beta/T) s_{t-1} + e_t, unnormalized
    c_beta: float | None = None
    gamma: float = -0.8
    garch: GarchParams | None = None
    garch_on: str = GARCH_ON_V
    alpha_y: float = 0.0
    alpha_x: float = 0.0
    x_shock_variance: float = 1.0
    v_shock_variance: float = 0.36
    beta_shock_variance: float = 1.0
    # "zero" sets s*_beta_0 = 0; "stationary" draws it from the AR(1) stationary law
    s_beta_start: str = START_ZERO
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise InvalidConfig("T must be positive")
        if self.omega_beta2 < 0:
            raise InvalidConfig("omega_beta2 must be nonnegative")
        if not -1 < self.gamma < 1:
            raise InvalidConfig("gamma must lie in (-1, 1)")
        if self.c_beta is None and abs(self.rho_beta) >= 1:
            raise InvalidConfig("|rho_beta| >= 1 cannot be variance-normalized; use c_beta instead")
        if self.garch_on not in (GARCH_ON_V, GARCH_ON_X):
            raise InvalidConfig(f"garch_on must be 'v' or 'x', got {self.garch_on!r}")
        if self.s_beta_start not in (START_ZERO, START_STATIONARY):
            raise InvalidConfig(f"s_beta_start must be 'zero' or 'stationary', got {self.s_beta_start!r}")
        for name in ("x_shock_variance", "v_shock_variance", "beta_shock_variance"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"{name} must be positive")

    @property
    def c_x(self) -> float:
        """Local-to-unity parameter ``T (rho_x - 1)`` implied by ``rho_x``."""
        return self.T * (self.rho_x - 1.0)

    def to_text(self) -> str:
        """Flat ``key = value`` rendering, one entry per line."""
        d = asdict(self)
        g = d.pop("garch")
        if g is not None:
            d.update(garch_c0=g["c0"], garch_c1=g["c1"], garch_c2=g["c2"])
        return "".join(f"{k} = {'none' if v is None else v}\n" for k, v in d.items())

    @classmethod
    def from_text(cls, text: str) -> DgpConfig:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfig(f"line {lineno}: expected 'key = value'")
            k, v = (p.strip() for p in line.split("=", 1))
            raw[k] = v
        garch_keys = [raw.pop(k, None) for k in ("garch_c0", "garch_c1", "garch_c2")]
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for k, v in raw.items():
            if k not in types or k == "garch":
                raise InvalidConfig(f"unknown config key {k!r}")
            if v.lower() == "none":
                kw[k] = None
            elif k in ("T", "seed"):
                kw[k] = int(v)
            elif k in ("garch_on", "s_beta_start"):
                kw[k] = v
            else:
                kw[k] = float(v)
        if any(g is not None for g in garch_keys):
            if any(g is None for g in garch_keys):
                raise InvalidConfig("garch_c0, garch_c1 and garch_c2 must be given together")
            kw["garch"] = GarchParams(*(float(g) for g in garch_keys))
        if "T" not in kw:
            raise InvalidConfig("config must set T")
        return cls(**kw)


@dataclass(frozen=True)
class SimulatedPath:
    y: np.ndarray  # y_1..y_T
    x: np.ndarray  # x_0..x_T
    s_beta: np.ndarray  # s_beta_1..s_beta_T

    def to_dataset(self, demean: bool = True) -> Dataset:
        return Dataset.from_arrays(self.y, self.x[:-1], demean=demean)


def _ar1(shocks, rho):
    """``s_t = rho * s_{t-1} + shock_t`` with ``s_0 = 0``."""
    return lfilter([1.0], [1.0, -rho], shocks)


def garch_filter(u, params: GarchParams, shock_variance: float = 1.0):
    """Scale standardized shocks ``u`` by a GARCH(1,1) volatility path.

    The recursion starts at the unconditional variance.  Returns ``(e, sigma2)``.
    """
    n = u.size
    sigma2 = np.empty(n)
    e = np.empty(n)
    s2 = params.unconditional_variance(shock_variance)
    prev = 0.0
    c0, c1, c2 = params.c0, params.c1, params.c2
    for t in range(n):
        if t:
            s2 = c0 + c1 * s2 + c2 * prev * prev
        sigma2[t] = s2
        prev = np.sqrt(s2) * u[t]
        e[t] = prev
    return e, sigma2


def simulate(config: DgpConfig, rng: np.random.Generator | None = None) -> SimulatedPath:
    """Draw one path. Identical ``(config, rng state)`` give identical output."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    T = config.T
    u = rng.standard_normal((T, 3))
    u_x = u[:, 0] * np.sqrt(config.x_shock_variance)
    u_v = u[:, 1] * np.sqrt(config.v_shock_variance)
    e_beta = u[:, 2] * np.sqrt(config.beta_shock_variance)

    if config.garch is not None and config.garch_on == GARCH_ON_X:
        e_x, _ = garch_filter(u_x, config.garch, config.x_shock_variance)
    else:
        e_x = u_x
    if config.garch is not None and config.garch_on == GARCH_ON_V:
        v, _ = garch_filter(u_v, config.garch, config.v_shock_variance)
    else:
        v = u_v

    s_x = np.concatenate([[0.0], _ar1(e_x, config.rho_x)])
    x = config.alpha_x + s_x

    if config.c_beta is not None:
        s_beta = _ar1(e_beta, 1.0 + config.c_beta / T)
    else:
        rho = config.rho_beta
        sd = np.sqrt(config.beta_shock_variance / (1.0 - rho * rho))
        s_beta = _ar1(e_beta, rho)
        if config.s_beta_start == START_STATIONARY:
            s_beta = s_beta + rho ** np.arange(1, T + 1) * (sd * rng.standard_normal())
        s_beta = s_beta / sd

    e_y = config.gamma * e_x + v
    coef = config.beta + np.sqrt(config.omega_beta2) * s_beta
    y = config.alpha_y + coef * x[:-1] + e_y
    for arr in (y, x, s_beta):
        arr.setflags(write=False)
    return SimulatedPath(y=y, x=x, s_beta=s_beta)


# Presets: GARCH on v (variance 0.36 shocks) for 1-3, GARCH on e_x with unit shocks for 4-6.
_PRESETS = {
    "DGP1": (GarchParams(0.6, 0.2, 0.2), GARCH_ON_V, 0.36),
    "DGP2": (GarchParams(0.4, 0.3, 0.3), GARCH_ON_V, 0.36),
    "DGP3": (GarchParams(0.2, 0.4, 0.4), GARCH_ON_V, 0.36),
    "DGP4": (GarchParams(3e-8, 0.9, 0.05), GARCH_ON_X, 1.0),
    "DGP5": (GarchParams(3e-5, 0.8, 0.15), GARCH_ON_X, 1.0),
    "DGP6": (GarchParams(6e-5, 5e-7, 0.99), GARCH_ON_X, 1.0),
}

PRESET_NAMES = tuple(_PRESETS)


def preset_dgp(name: str, T: int, rho_beta: float = 0.6, omega_beta2: float = 0.0, seed: int = 0) -> DgpConfig:
    """Named Monte Carlo design (``DGP1`` .. ``DGP6``)."""
    key = str(name).upper()
    if key not in _PRESETS:
        raise UnknownPreset(f"unknown DGP {name!r}; expected one of {', '.join(_PRESETS)}")
    garch, place, v_var = _PRESETS[key]
    return DgpConfig(
        T=T, beta=0.0, omega_beta2=omega_beta2, rho_x=0.95, rho_beta=rho_beta, gamma=-0.8,
        garch=garch, garch_on=place, v_shock_variance=v_var, seed=seed,
    )


def with_coefficient(config: DgpConfig, rho_beta: float, omega_beta2: float) -> DgpConfig:
    return replace(config, rho_beta=rho_beta, omega_beta2=omega_beta2)


def simulate_ar1_garch(T: int, alpha: float, rho: float, garch: GarchParams,
                       rng: np.random.Generator, burn: int = 500) -> np.ndarray:
    """``x_t = alpha + rho x_{t-1} + e_t`` with GARCH(1,1) ``e_t``; returns ``T`` levels."""
    e, _ = garch_filter(rng.standard_normal(T + burn), garch)
    x = lfilter([1.0], [1.0, -rho], alpha + e)
    return x[burn:]
