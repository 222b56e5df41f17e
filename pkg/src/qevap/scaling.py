"""Map configurations to units with hbar = m = 1 and back.

With length unit L the time unit is m L^2 / hbar and the energy unit
hbar^2 / (m L^2); wave numbers scale as 1/L.  Every dimensionless
observable (T, R, norms) is unchanged by the map.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .domain import Grid1D, PacketSpec, ParticleSpec
from .propagator import KickEvent, SimConfig


@dataclass(frozen=True)
class ScaleFactors:
    length: float
    time: float
    energy: float
    mass: float
    hbar: float

    @classmethod
    def for_particle(cls, particle: ParticleSpec, length: float) -> "ScaleFactors":
        m, h = particle.mass, particle.hbar
        return cls(length, m * length**2 / h, h * h / (m * length**2), m, h)

    @property
    def velocity(self) -> float:
        return self.length / self.time

    @property
    def wave_number(self) -> float:
        return 1.0 / self.length


def _map_potential(pot, L: float, tau: float, E: float):
    changes = {"V0": pot.V0 / E, "velocity": pot.velocity * tau / L,
               "drift_start": pot.drift_start / tau}
    for name in ("x0", "x1", "x_edge", "width"):
        if hasattr(pot, name):
            changes[name] = getattr(pot, name) / L
    return replace(pot, **changes)


def _apply(config: SimConfig, L: float, tau: float, E: float, particle: ParticleSpec) -> SimConfig:
    g = config.grid
    pk = config.packet
    return SimConfig(
        particle=particle,
        grid=Grid1D(g.x_min / L, g.x_max / L, g.n_points),
        potential=_map_potential(config.potential, L, tau, E),
        packet=PacketSpec(pk.x_i / L, pk.sigma / L, pk.k_bar * L),
        dt=config.dt / tau,
        t_end=config.t_end / tau,
        kicks=tuple(KickEvent(k.q * L, k.t_k / tau, k.delta_t / tau, k.n_substeps)
                    for k in config.kicks),
        x_T=config.x_T / L,
        snapshot_times=tuple(t / tau for t in config.snapshot_times),
        record_every=config.record_every,
    )


def to_dimensionless(config: SimConfig, length: float | None = None) -> tuple[SimConfig, ScaleFactors]:
    """Scaled copy of ``config``; the default length unit is 1 / k_bar."""
    if length is None:
        length = 1.0 / abs(config.packet.k_bar)
    sf = ScaleFactors.for_particle(config.particle, length)
    return _apply(config, sf.length, sf.time, sf.energy, ParticleSpec(1.0, 1.0)), sf


def from_dimensionless(config: SimConfig, scale: ScaleFactors) -> SimConfig:
    """Inverse of :func:`to_dimensionless`."""
    return _apply(config, 1.0 / scale.length, 1.0 / scale.time, 1.0 / scale.energy,
                  ParticleSpec(scale.mass, scale.hbar))
