import math

import numpy as np
import pytest

from qevap import experiments as X, scenarios as S
from qevap.domain import SmoothedStep
from qevap.errors import ConfigError, ConvergenceError
from qevap.propagator import KickEvent

COARSE = dict(dx=6e-12, dt=1e-17)


def _base(kind="step", **kw):
    return S.electron_config(kind, (KickEvent(S.Q_KICK, S.arrival_time()),), **{**COARSE, **kw})


def test_sweep_spec_validation():
    base = _base()
    with pytest.raises(ConfigError, match="axis"):
        X.SweepSpec(base, "temperature", (1.0,))
    with pytest.raises(ConfigError, match="at least one"):
        X.SweepSpec(base, "kick_q", ())
    with pytest.raises(ConfigError, match="monotone"):
        X.SweepSpec(base, "kick_q", (1.0, 3.0, 2.0))
    with pytest.raises(ConfigError, match="monotone"):
        X.SweepSpec(base, "kick_q", (1.0, 1.0))
    with pytest.raises(ConfigError, match="parallelism"):
        X.SweepSpec(base, "kick_q", (1.0,), parallelism=0)
    assert X.SweepSpec(base, "kick_q", (3.0, 2.0, 1.0)).values == (3.0, 2.0, 1.0)


def test_apply_axis_variants():
    base = _base()
    assert X.apply_axis(base, "kick_q", 2e8).kicks[0].q == 2e8
    assert X.apply_axis(base, "kick_time", 1e-15).kicks[0].t_k == 1e-15
    moving = X.apply_axis(base, "step_velocity", 1e4)
    assert moving.potential.velocity == 1e4
    with pytest.raises(ConfigError):
        X.apply_axis(base, "ramp_width", 1e-10)
    with pytest.raises(ConfigError):
        X.apply_axis(base.with_kicks(), "kick_q", 1.0)
    ramp = S.electron_config("smoothed_step", ramp_width=0.0, **COARSE)
    wide = X.apply_axis(ramp, "ramp_width", 1e-10)
    assert isinstance(wide.potential, SmoothedStep) and wide.potential.width == 1e-10
    assert math.isclose(wide.x_T - ramp.x_T, X.RAMP_MARGIN * 1e-10)


def test_run_configs_preserves_order_and_matches_serial():
    spec = X.SweepSpec(_base(t_end=8e-15), "kick_q", (-1e8, 1e8, 2e8), parallelism=2)
    par = X.run_sweep(spec)
    ser = X.run_configs(spec.configs(), 1)
    assert [p.config.kicks[0].q for p in par.points] == [-1e8, 1e8, 2e8]
    assert [p.T for p in par.points] == [p.T for p in ser]
    assert par.T[0] < par.T[1] < par.T[2]


def test_fit_gaussian_recovers_synthetic_peak():
    t = np.linspace(0, 9e-15, 40)
    T = 2e-6 * np.exp(-((t - 4.5e-15) ** 2) / (2 * 0.6e-15**2)) + 1e-14
    fit = X.fit_gaussian(t, T)
    assert math.isclose(fit.T_max, 2e-6, rel_tol=1e-3)
    assert math.isclose(fit.t0, 4.5e-15, rel_tol=1e-3)
    assert math.isclose(fit.delta_t, 0.6e-15, rel_tol=1e-3)
    assert fit.rms_residual < 1e-3
    assert fit.residual_within(t, T, 1.5 * fit.delta_t) < 1e-3


def test_fit_gaussian_rejects_bad_data():
    with pytest.raises(ConvergenceError):
        X.fit_gaussian([0.0, 1.0], [1.0, 2.0])
    t = np.linspace(0, 1, 20)
    with pytest.raises(ConvergenceError):
        X.fit_gaussian(t, np.abs(np.sin(40 * t)) + 1e-3, max_residual=0.01)


def test_default_grids():
    times = X.default_kick_times()
    assert list(times) == sorted(times) and times[0] == 0.0
    qa = X.default_q_values("a")
    assert qa == (-1e8, 0.0, 1e8)
    qb = X.default_q_values("b")
    assert len(qb) == 9 and qb[4] == 0.0 and math.isclose(qb[-1], 0.02 * S.electron_packet().k_bar)
    with pytest.raises(ConfigError):
        X.default_q_values("z")
    w = X.default_ramp_widths()
    assert w[0] == 0.0 and math.isclose(w[-1], X.de_broglie_wavelength())
    with pytest.raises(ConfigError):
        X.ramp_sweep_spec((0.0, -1e-10))


def test_refine_halves_spacings():
    cfg = _base()
    fine = X.refine(cfg)
    assert math.isclose(fine.grid.dx, cfg.grid.dx / 2)
    assert math.isclose(fine.dt, cfg.dt / 2)
    assert fine.record_every == 2 * cfg.record_every


def test_free_kick_energy_law():
    law = X.free_kick_energy(**COARSE)
    assert math.isclose(law.transfer, law.predicted, rel_tol=1e-3)
