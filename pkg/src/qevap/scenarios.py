"""Reference electron and helium configurations."""

from __future__ import annotations

from .domain import (
    EV,
    Barrier,
    Grid1D,
    PacketSpec,
    ParticleSpec,
    SmoothedStep,
    Step,
    kappa0,
)
from .observables import step_measurement_boundary
from .propagator import KickEvent, SimConfig

# electron scenario
E_INITIAL = 5.0 * EV
V0_ELECTRON = 10.0 * EV
X_INITIAL = -6e-9
SIGMA = 0.8e-9
BARRIER_WIDTH = 1e-9
DX = 1.5e-12
DT = 2.5e-18
T_END = 15e-15
X_MIN, X_MAX = -20e-9, 20e-9
Q_KICK = 1e8

# cold metastable helium scenario
E_HELIUM = 1e-11 * EV
V0_HELIUM = 1.5e-11 * EV
Q_HELIUM = -5e5
HELIUM_DK_RATIO = 0.02


def electron_packet(particle: ParticleSpec | None = None) -> PacketSpec:
    particle = particle or ParticleSpec.electron()
    return PacketSpec.from_energy(X_INITIAL, SIGMA, E_INITIAL, particle)


def arrival_time() -> float:
    """Centroid arrival time m |x_i| / (hbar k_bar) at the potential edge (about 4.5 fs)."""
    p = ParticleSpec.electron()
    return electron_packet(p).arrival_time(p, 0.0)


def measurement_boundary(potential, particle: ParticleSpec, packet: PacketSpec) -> float:
    """Default x_T: barrier exit, or five penetration depths past a step edge."""
    if potential.kind == "barrier":
        return potential.x1
    return step_measurement_boundary(potential.edge, kappa0(potential.V0, particle), packet.k_bar)


def electron_config(kind: str = "barrier", kicks: tuple[KickEvent, ...] = (), *,
                    dx: float = DX, dt: float = DT, t_end: float = T_END, x_min: float = X_MIN,
                    ramp_width: float = 0.0, x_T: float | None = None,
                    record_every: int = 10, snapshot_times: tuple[float, ...] = ()) -> SimConfig:
    """Electron, 5 eV Gaussian packet, 10 eV barrier (0..1 nm) or step at 0."""
    particle = ParticleSpec.electron()
    packet = electron_packet(particle)
    if kind == "barrier":
        pot = Barrier(V0_ELECTRON, 0.0, BARRIER_WIDTH)
    elif kind == "step":
        pot = Step(V0_ELECTRON, 0.0)
    elif kind == "smoothed_step":
        pot = SmoothedStep(V0_ELECTRON, 0.0, ramp_width)
    else:
        raise ValueError(f"unknown potential kind {kind!r}")
    grid = Grid1D.with_spacing(x_min, X_MAX, dx)
    if x_T is None:
        x_T = measurement_boundary(pot, particle, packet)
    return SimConfig(particle, grid, pot, packet, dt, t_end, tuple(kicks), x_T,
                     tuple(snapshot_times), record_every)


def helium_packet(dk_ratio: float = HELIUM_DK_RATIO, particle: ParticleSpec | None = None) -> PacketSpec:
    """Helium packet with delta_k = dk_ratio * k_bar, placed 7.5 sigma before the step.

    The offset in units of sigma matches the electron scenario (6 nm = 7.5 x 0.8 nm).
    """
    particle = particle or ParticleSpec.helium4()
    k_naive = particle.wave_number(E_HELIUM)
    # k_bar^2 (1 + r^2) = 2 m E / hbar^2 with delta_k = r k_bar
    k_bar = k_naive / (1.0 + dk_ratio**2) ** 0.5
    sigma = 1.0 / (2.0 * dk_ratio * k_bar)
    return PacketSpec(-7.5 * sigma, sigma, k_bar)


def helium_config(dk_ratio: float = HELIUM_DK_RATIO, kicks: tuple[KickEvent, ...] = (), *,
                  resolution: float = 1.0, record_every: int = 10) -> SimConfig:
    """Helium-4 on a 1.5e-11 eV step, in SI units.

    Extent (+-25 sigma), duration (t_end / t0) and the dimensionless resolution
    dx k_bar and dt hbar k_bar^2 / m are copied from the electron scenario;
    ``resolution > 1`` refines both dx and dt by that factor.
    """
    p = ParticleSpec.helium4()
    e = ParticleSpec.electron()
    pk = helium_packet(dk_ratio, p)
    ek = electron_packet(e)
    dx = DX * ek.k_bar / pk.k_bar / resolution
    dt = DT * (e.hbar * ek.k_bar**2 / e.mass) / (p.hbar * pk.k_bar**2 / p.mass) / resolution
    t_end = T_END / arrival_time() * pk.arrival_time(p, 0.0)
    pot = Step(V0_HELIUM, 0.0)
    grid = Grid1D.with_spacing(-25 * pk.sigma, 25 * pk.sigma, dx)
    x_T = measurement_boundary(pot, p, pk)
    return SimConfig(p, grid, pot, pk, dt, t_end, tuple(kicks), x_T, (), record_every)
