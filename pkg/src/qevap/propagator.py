"""Crank-Nicolson propagation with scheduled momentum kicks."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .domain import (
    ExpectationRecord,
    Grid1D,
    PacketSpec,
    ParticleSpec,
    PotentialSpec,
    WaveFunction,
    expectation_values,
    grid_potential,
    make_gaussian_packet,
)
from .errors import ConfigError
from .observables import left_probability, region_probability
from .tridiag import ConstantOffDiagonalSolver, solve_tridiagonal

log = logging.getLogger(__name__)


class BoundaryContaminationWarning(UserWarning):
    """Probability reached the hard walls of the grid."""


@dataclass(frozen=True)
class KickEvent:
    """Momentum transfer hbar*q at time ``t_k``.

    A gradual kick (``delta_t > 0``) is centred on ``t_k`` and split into
    ``n_substeps`` equal sub-kicks spread uniformly over ``delta_t``.
    """

    q: float
    t_k: float
    delta_t: float = 0.0
    n_substeps: int = 1

    def __post_init__(self):
        if self.delta_t < 0:
            raise ConfigError("kick duration must be >= 0", "kick.delta_t_s")
        if int(self.n_substeps) != self.n_substeps or self.n_substeps < 1:
            raise ConfigError("kick n_substeps must be an integer >= 1", "kick.n_substeps")

    def sub_kicks(self) -> list[tuple[float, float]]:
        """(time, wave number) pairs making up this kick."""
        if self.delta_t == 0:
            return [(self.t_k, self.q)]
        n = self.n_substeps
        h = self.delta_t / n
        t0 = self.t_k - 0.5 * self.delta_t
        return [(t0 + (j + 0.5) * h, self.q / n) for j in range(n)]


@dataclass(frozen=True)
class SimConfig:
    particle: ParticleSpec
    grid: Grid1D
    potential: PotentialSpec
    packet: PacketSpec
    dt: float
    t_end: float
    kicks: tuple[KickEvent, ...] = ()
    x_T: float = 0.0
    snapshot_times: tuple[float, ...] = ()
    record_every: int = 10

    def __post_init__(self):
        object.__setattr__(self, "kicks", tuple(self.kicks))
        object.__setattr__(self, "snapshot_times", tuple(self.snapshot_times))
        if not self.dt > 0:
            raise ConfigError("dt must be positive", "time.dt_s")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive", "time.t_end_s")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ConfigError("record_every must be an integer >= 1", "time.record_every")
        if not self.grid.contains(self.x_T):
            raise ConfigError("x_T lies outside the grid", "measure.x_T_m")
        times = [k.t_k for k in self.kicks]
        if times != sorted(times):
            raise ConfigError("kicks must be sorted by t_k", "kicks")
        for k in self.kicks:
            if not 0.0 <= k.t_k <= self.t_end:
                raise ConfigError(f"kick time {k.t_k:.4g} outside [0, t_end]", "kick.t_k_s")
            if abs(k.q) >= math.pi / self.grid.dx:
                raise ConfigError("kick wave number beyond grid Nyquist limit", "kick.q_per_m")
            if k.delta_t > 0 and k.n_substeps > 1 and k.delta_t / k.n_substeps < self.dt:
                raise ConfigError("gradual kick not resolvable by dt", "kick.delta_t_s")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def with_kicks(self, *kicks: KickEvent) -> "SimConfig":
        return replace(self, kicks=tuple(sorted(kicks, key=lambda k: k.t_k)))

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class TrajectoryRecord(ExpectationRecord):
    T: float = 0.0
    R: float = 0.0


@dataclass
class Trajectory:
    config: SimConfig
    records: list[TrajectoryRecord]
    snapshots: list[tuple[float, WaveFunction]]
    final_state: WaveFunction
    kick_records: list[tuple[ExpectationRecord, ExpectationRecord]] = field(default_factory=list)
    boundary_contaminated: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def transmission(self) -> np.ndarray:
        return np.array([r.T for r in self.records])

    @property
    def final_T(self) -> float:
        return self.records[-1].T

    def norm_drift(self) -> float:
        n = np.array([r.norm for r in self.records])
        return float(np.max(np.abs(n - n[0])))


def potential_at(pot: PotentialSpec, x, t: float):
    """Pointwise potential value at position ``x`` and time ``t``."""
    return pot.value(x, t)


def _cn_coefficients(grid: Grid1D, particle: ParticleSpec, dt: float):
    a = particle.hbar * dt / (4.0 * particle.mass * grid.dx**2)
    beta = dt / (2.0 * particle.hbar)
    return a, beta


def cn_step(psi: WaveFunction, pot: PotentialSpec | None, t: float, dt: float,
            particle: ParticleSpec) -> WaveFunction:
    """One Crank-Nicolson step from ``t`` to ``t + dt`` with hard walls.

    The potential is sampled at the midpoint ``t + dt/2``.
    """
    if not dt > 0:
        raise ConfigError("dt must be positive")
    g = psi.grid
    a, beta = _cn_coefficients(g, particle, dt)
    v = np.zeros(g.n_points) if pot is None else grid_potential(pot, g, t + 0.5 * dt)
    w = 2.0 * a + beta * v[1:-1]
    inner = psi.amplitudes[1:-1]
    rhs = (1.0 - 1j * w) * inner
    rhs[1:] += 1j * a * inner[:-1]
    rhs[:-1] += 1j * a * inner[1:]
    off = np.full(inner.shape, -1j * a)
    out = np.zeros(g.n_points, dtype=np.complex128)
    out[1:-1] = solve_tridiagonal(off, 1.0 + 1j * w, off, rhs)
    return WaveFunction(g, out)


def _check_nyquist(grid: Grid1D, q: float):
    if abs(q) >= math.pi / grid.dx:
        raise ConfigError(f"kick q={q:.4g} aliases on grid (|q| >= pi/dx)", "kick.q_per_m")


def apply_kick_instant(psi: WaveFunction, q: float) -> WaveFunction:
    """Multiply the state by exp(i q x)."""
    _check_nyquist(psi.grid, q)
    if q == 0:
        return psi.copy()
    return WaveFunction(psi.grid, psi.amplitudes * np.exp(1j * q * psi.grid.x))


def apply_kick_gradual(psi: WaveFunction, q: float, delta_t: float, n_substeps: int,
                       pot: PotentialSpec | None, t: float, dt: float,
                       particle: ParticleSpec) -> WaveFunction:
    """Spread a transfer q over [t, t + delta_t] as ``n_substeps`` equal sub-kicks.

    Sub-kick j sits at the step boundary nearest ``t + (j + 1/2) delta_t / n``
    and Crank-Nicolson evolution fills the gaps; the returned state is at
    ``t + round(delta_t / dt) * dt``.
    """
    if delta_t < 0:
        raise ConfigError("kick duration must be >= 0")
    n_steps = int(round(delta_t / dt))
    if n_substeps > 1 and delta_t / n_substeps < dt:
        raise ConfigError("gradual kick not resolvable by dt", "kick.delta_t_s")
    at = {}
    for j in range(n_substeps):
        s = int(round((j + 0.5) * delta_t / n_substeps / dt))
        at[s] = at.get(s, 0.0) + q / n_substeps
    out = psi
    for s in range(n_steps + 1):
        if s in at:
            out = apply_kick_instant(out, at[s])
        if s < n_steps:
            out = cn_step(out, pot, t + s * dt, dt, particle)
    return out


def kick_schedule(config: SimConfig) -> dict[int, float]:
    """Map step index -> summed wave number applied before that step."""
    sched: dict[int, float] = {}
    n = config.n_steps
    for kick in config.kicks:
        for tk, q in kick.sub_kicks():
            s = min(max(int(round(tk / config.dt)), 0), n)
            sched[s] = sched.get(s, 0.0) + q
    return sched


def _edge_mass(rho: np.ndarray, dx: float, n_edge: int = 10) -> float:
    return float((rho[:n_edge].sum() + rho[-n_edge:].sum()) * dx)


def propagate(config: SimConfig, initial: WaveFunction | None = None, *,
              progress: Callable[[int, int], None] | None = None) -> Trajectory:
    """Evolve the configured Gaussian (or ``initial``) from t=0 to ``t_end``."""
    g, particle, pot = config.grid, config.particle, config.potential
    dt, n_steps = config.dt, config.n_steps
    psi = make_gaussian_packet(g, config.packet) if initial is None else initial.copy()
    amp = psi.amplitudes
    x = g.x
    a, beta = _cn_coefficients(g, particle, dt)
    x_R = pot.edge

    sched = kick_schedule(config)
    snap_steps: dict[int, list[float]] = {}
    for ts in config.snapshot_times:
        s = min(max(int(round(ts / dt)), 0), n_steps)
        snap_steps.setdefault(s, []).append(ts)

    records: list[TrajectoryRecord] = []
    snapshots: list[tuple[float, WaveFunction]] = []
    kick_records = []
    contaminated = False

    def record(step: int):
        nonlocal contaminated
        t = step * dt
        wf = WaveFunction(g, amp)
        e = expectation_values(wf, pot, t, particle, v=None if not static else v_full)
        rho = wf.density
        if not contaminated and _edge_mass(rho, g.dx) > 1e-8:
            contaminated = True
            warnings.warn(f"probability within 10 dx of the grid edge exceeds 1e-8 at t={t:.4g}",
                          BoundaryContaminationWarning, stacklevel=3)
        # boundaries follow a drifting potential so T is measured in its frame
        shift = pot.shift(t)
        records.append(TrajectoryRecord(
            e.t, e.norm, e.mean_x, e.mean_p, e.E_kin, e.E_pot,
            T=region_probability(wf, config.x_T + shift), R=left_probability(wf, x_R + shift)))

    static = not pot.moving()
    solver = None
    if static:
        v_full = grid_potential(pot, g, 0.0)
        v = v_full[1:-1]
        w = 2.0 * a + beta * v
        solver = ConstantOffDiagonalSolver(-1j * a, 1.0 + 1j * w)
        rhs_diag = 1.0 - 1j * w

    for s in range(n_steps + 1):
        if s in sched:
            q = sched[s]
            _check_nyquist(g, q)
            before = expectation_values(WaveFunction(g, amp), pot, s * dt, particle)
            amp = amp * np.exp(1j * q * x)
            after = expectation_values(WaveFunction(g, amp), pot, s * dt, particle)
            kick_records.append((before, after))
        if s % config.record_every == 0 or s == n_steps:
            record(s)
        if s in snap_steps:
            for _ in snap_steps[s]:
                snapshots.append((s * dt, WaveFunction(g, amp.copy())))
        if s == n_steps:
            break
        if not static:
            v = grid_potential(pot, g, (s + 0.5) * dt)[1:-1]
            w = 2.0 * a + beta * v
            solver = ConstantOffDiagonalSolver(-1j * a, 1.0 + 1j * w)
            rhs_diag = 1.0 - 1j * w
        new = np.zeros_like(amp)
        new[1:-1] = solver.cn_solve(amp[1:-1], rhs_diag, 1j * a)
        amp = new
        if progress is not None:
            progress(s + 1, n_steps)

    return Trajectory(config, records, snapshots, WaveFunction(g, amp), kick_records, contaminated)
