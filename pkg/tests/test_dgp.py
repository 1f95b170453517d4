import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coefrand.dgp import (
    PRESET_NAMES,
    START_STATIONARY,
    DgpConfig,
    GarchParams,
    garch_filter,
    preset_dgp,
    simulate,
    simulate_ar1_garch,
    with_coefficient,
)
from coefrand.errors import InvalidConfig, UnknownPreset


def test_preset_garch_values():
    assert preset_dgp("DGP1", 100).garch == GarchParams(0.6, 0.2, 0.2)
    assert preset_dgp("DGP1", 100).garch_on == "v"
    assert preset_dgp("dgp3", 100).garch == GarchParams(0.2, 0.4, 0.4)
    g6 = preset_dgp("DGP6", 100)
    assert g6.garch == GarchParams(6e-5, 5e-7, 0.99) and g6.garch_on == "x"
    assert len(PRESET_NAMES) == 6
    with pytest.raises(UnknownPreset):
        preset_dgp("DGP9", 100)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        DgpConfig(T=10, omega_beta2=-0.1)
    with pytest.raises(InvalidConfig):
        DgpConfig(T=10, gamma=1.0)
    with pytest.raises(InvalidConfig):
        GarchParams(0.1, 0.6, 0.4)
    with pytest.raises(InvalidConfig):
        DgpConfig(T=10, rho_beta=1.0)
    with pytest.raises(InvalidConfig):
        DgpConfig(T=10, s_beta_start="burn")
    DgpConfig(T=10, rho_beta=1.0, c_beta=-5.0)


def test_lengths_and_determinism():
    cfg = preset_dgp("DGP2", 150, 0.8, 0.1)
    a = simulate(cfg, np.random.default_rng(5))
    b = simulate(cfg, np.random.default_rng(5))
    assert a.y.shape == (150,) and a.x.shape == (151,) and a.s_beta.shape == (150,)
    for u, v in ((a.y, b.y), (a.x, b.x), (a.s_beta, b.s_beta)):
        assert u.tobytes() == v.tobytes()
    assert not a.y.flags.writeable
    assert simulate(cfg).y.tobytes() == simulate(cfg).y.tobytes()


def test_coefficient_normalisation_long_run():
    path = simulate(DgpConfig(T=10**6, rho_beta=0.6, omega_beta2=0.1), np.random.default_rng(1))
    assert abs(np.var(path.s_beta) - 1.0) < 0.01


def test_stationary_start_has_unit_variance_at_first_date():
    cfg = DgpConfig(T=5, rho_beta=0.98, omega_beta2=0.1, s_beta_start=START_STATIONARY)
    first = np.array([simulate(cfg, np.random.default_rng(s)).s_beta[0] for s in range(4000)])
    assert abs(np.var(first) - 1.0) < 0.08
    zero = DgpConfig(T=5, rho_beta=0.98, omega_beta2=0.1)
    first0 = np.array([simulate(zero, np.random.default_rng(s)).s_beta[0] for s in range(4000)])
    assert np.var(first0) < 0.1  # 1 - rho^2 = 0.0396


def test_stationary_start_keeps_default_stream():
    base = DgpConfig(T=50, omega_beta2=0.1)
    alt = DgpConfig(T=50, omega_beta2=0.1, s_beta_start=START_STATIONARY)
    a, b = simulate(base, np.random.default_rng(2)), simulate(alt, np.random.default_rng(2))
    assert a.x.tobytes() == b.x.tobytes()


def test_null_has_constant_coefficient():
    cfg = preset_dgp("DGP1", 200, 0.6, 0.0)
    p = simulate(cfg, np.random.default_rng(0))
    q = simulate(with_coefficient(cfg, 0.9, 0.0), np.random.default_rng(0))
    assert p.y.tobytes() == q.y.tobytes()


def test_garch_homoskedastic_limit():
    u = np.random.default_rng(3).standard_normal(200000)
    e, s2 = garch_filter(u, GarchParams(0.7, 0.0, 0.0))
    assert np.allclose(s2, 0.7)
    assert abs(np.var(e) - 0.7) < 0.01


def test_garch_unconditional_variance():
    g = GarchParams(0.6, 0.2, 0.2)
    assert g.unconditional_variance() == pytest.approx(1.0)
    assert g.unconditional_variance(0.36) == pytest.approx(0.6 / (1 - 0.2 - 0.072))
    e, _ = garch_filter(np.random.default_rng(4).standard_normal(400000) * 0.6, g, 0.36)
    # e = sigma * u with Var(u) = 0.36
    assert np.var(e) == pytest.approx(0.36 * g.unconditional_variance(0.36), rel=0.03)


def test_ar1_garch_series_persistence():
    x = simulate_ar1_garch(20000, 0.1, 0.9, GarchParams(0.1, 0.5, 0.2), np.random.default_rng(6))
    r = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(r - 0.9) < 0.02
    assert abs(x.mean() - 1.0) < 0.3


@settings(max_examples=30, deadline=None)
@given(T=st.integers(2, 40), rho=st.floats(-0.95, 0.95), om=st.floats(0, 1),
       start=st.sampled_from(["zero", "stationary"]), seed=st.integers(0, 2**31))
def test_text_round_trip(T, rho, om, start, seed):
    cfg = DgpConfig(T=T, rho_beta=rho, omega_beta2=om, garch=GarchParams(0.5, 0.1, 0.3),
                    s_beta_start=start, seed=seed)
    assert DgpConfig.from_text(cfg.to_text()) == cfg


def test_from_text_errors():
    with pytest.raises(InvalidConfig):
        DgpConfig.from_text("rho_beta = 0.5\n")
    with pytest.raises(InvalidConfig):
        DgpConfig.from_text("T = 10\nfoo = 1\n")
    with pytest.raises(InvalidConfig):
        DgpConfig.from_text("T = 10\ngarch_c0 = 1\n")
    assert DgpConfig.from_text("T = 10  # comment\n\nc_beta = none\n").c_beta is None
