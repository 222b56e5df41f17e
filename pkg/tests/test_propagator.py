import math
import warnings

import numpy as np
import pytest

from qevap.domain import (
    Barrier, Grid1D, PacketSpec, ParticleSpec, Step, WaveFunction, expectation_values,
    make_gaussian_packet,
)
from qevap.errors import ConfigError
from qevap.propagator import (
    KickEvent, SimConfig, apply_kick_gradual, apply_kick_instant, cn_step, kick_schedule,
    propagate,
)

UNIT = ParticleSpec(1.0, 1.0)


def unit_config(pot=None, kicks=(), t_end=20.0, dt=0.01, dx=0.025, **kw):
    grid = Grid1D.with_spacing(-60.0, 60.0, dx)
    pot = pot or Barrier(0.5, 40.0, 41.0)
    return SimConfig(UNIT, grid, pot, PacketSpec(-20.0, 3.0, 2.0), dt, t_end,
                     tuple(kicks), kw.pop("x_T", 41.0), **kw)


def test_free_gaussian_spreads_as_expected():
    cfg = unit_config(record_every=100)
    traj = propagate(cfg)
    psi = traj.final_state
    x, rho = psi.x, psi.density
    mean = np.trapezoid(x * rho, x)
    var = np.trapezoid((x - mean) ** 2 * rho, x)
    t = cfg.t_end
    sigma_t2 = 9.0 * (1 + (t / (2 * 9.0)) ** 2)
    # group velocity of the 3-point Laplacian: sin(k dx) / dx
    v_g = math.sin(2.0 * cfg.grid.dx) / cfg.grid.dx
    assert abs(mean - (-20.0 + v_g * t)) < 5e-3
    assert abs(var / sigma_t2 - 1) < 5e-3


def test_norm_and_energy_conserved_with_static_potential():
    traj = propagate(unit_config(Step(1.0, 0.0), t_end=30.0, x_T=3.0))
    assert traj.norm_drift() < 1e-10
    E = np.array([r.E_tot for r in traj.records])
    assert np.max(np.abs(E - E[0])) < 1e-9


def test_moving_potential_norm_conserved():
    cfg = unit_config(Step(1.0, 0.0, velocity=0.2, drift_start=5.0), t_end=25.0, x_T=3.0)
    traj = propagate(cfg)
    assert traj.norm_drift() < 1e-10


def test_zero_velocity_drift_is_bit_identical_to_static():
    a = propagate(unit_config(Step(1.0, 0.0), t_end=10.0, x_T=3.0))
    b = propagate(unit_config(Step(1.0, 0.0).with_drift(0.0, 4.0), t_end=10.0, x_T=3.0))
    assert np.array_equal(a.final_state.amplitudes, b.final_state.amplitudes)


def test_instant_kick_shifts_momentum_and_keeps_norm():
    g = Grid1D.with_spacing(-60.0, 60.0, 0.005)
    psi = make_gaussian_packet(g, PacketSpec(0.0, 3.0, 2.0))
    out = apply_kick_instant(psi, 0.3)
    e0 = expectation_values(psi, None, 0.0, UNIT)
    e1 = expectation_values(out, None, 0.0, UNIT)
    assert abs(out.norm() - psi.norm()) < 1e-14
    assert abs(e1.mean_p - e0.mean_p - 0.3) < 1e-3
    with pytest.raises(ConfigError):
        apply_kick_instant(psi, math.pi / g.dx)


def test_gradual_kick_limits():
    g = Grid1D.with_spacing(-60.0, 60.0, 0.005)
    psi = make_gaussian_packet(g, PacketSpec(0.0, 3.0, 2.0))
    inst = apply_kick_instant(psi, 0.2)
    grad = apply_kick_gradual(psi, 0.2, 0.0, 1, None, 0.0, 0.01, UNIT)
    assert np.allclose(grad.amplitudes, inst.amplitudes)
    # a gradual kick in free space still adds hbar q to <p>
    g4 = apply_kick_gradual(psi, 0.2, 0.4, 4, None, 0.0, 0.01, UNIT)
    e = expectation_values(g4, None, 0.0, UNIT)
    assert abs(e.mean_p - 2.2) < 2e-3


def test_kick_schedule_snaps_and_splits():
    cfg = unit_config(kicks=(KickEvent(0.1, 1.004), KickEvent(0.2, 5.0, 0.4, 4)))
    sched = kick_schedule(cfg)
    assert sched[100] == pytest.approx(0.1)
    assert sorted(sched) == [100, 485, 495, 505, 515]
    assert sum(sched.values()) == pytest.approx(0.3)


def test_cn_step_matches_propagate():
    cfg = unit_config(Step(1.0, 0.0), t_end=0.05, x_T=3.0, dt=0.01)
    psi = make_gaussian_packet(cfg.grid, cfg.packet)
    for s in range(5):
        psi = cn_step(psi, cfg.potential, s * cfg.dt, cfg.dt, UNIT)
    traj = propagate(cfg)
    assert np.allclose(psi.amplitudes, traj.final_state.amplitudes, atol=1e-13)


@pytest.mark.parametrize("change, key", [
    (dict(dt=-1.0), "time.dt_s"),
    (dict(t_end=0.0), "time.t_end_s"),
    (dict(x_T=100.0), "measure.x_T_m"),
    (dict(record_every=0), "time.record_every"),
])
def test_config_validation_names_key(change, key):
    with pytest.raises(ConfigError) as e:
        unit_config(**change) if "x_T" not in change else unit_config(x_T=change["x_T"])
    assert e.value.key == key


def test_kick_validation():
    with pytest.raises(ConfigError) as e:
        unit_config(kicks=(KickEvent(0.1, 30.0),))
    assert e.value.key == "kick.t_k_s"
    with pytest.raises(ConfigError):
        unit_config(kicks=(KickEvent(0.1, 5.0), KickEvent(0.1, 1.0)))
    with pytest.raises(ConfigError):
        KickEvent(0.1, 1.0, -1.0)


def test_boundary_contamination_is_flagged():
    grid = Grid1D.with_spacing(-20.0, 20.0, 0.05)
    cfg = SimConfig(UNIT, grid, Barrier(0.5, 15.0, 16.0), PacketSpec(-5.0, 2.0, 3.0), 0.01, 8.0,
                    x_T=16.0)
    with pytest.warns(UserWarning, match="grid edge"):
        traj = propagate(cfg)
    assert traj.boundary_contaminated


def test_snapshots_recorded_at_requested_times():
    cfg = unit_config(t_end=1.0, snapshot_times=(0.0, 0.5, 1.0))
    traj = propagate(cfg)
    assert [t for t, _ in traj.snapshots] == pytest.approx([0.0, 0.5, 1.0])
