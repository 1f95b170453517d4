"""Coefficient-constancy tests for predictive regressions with subsampling critical values."""

from coefrand.core import Dataset, OlsFit, demean, ols_beta, residual_z
from coefrand.dgp import DgpConfig, GarchParams, preset_dgp, simulate
from coefrand.subsampling import TestReport, run_test
from coefrand.teststats import StatKind, statistic

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DgpConfig",
    "GarchParams",
    "OlsFit",
    "StatKind",
    "TestReport",
    "demean",
    "ols_beta",
    "preset_dgp",
    "residual_z",
    "run_test",
    "simulate",
    "statistic",
]
