"""Physical types, grid and packet construction, closed-form baselines.

All public quantities are SI unless a ``ParticleSpec`` with ``hbar=1`` is
used, in which case the same code runs in scaled units.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy import constants as _c
from scipy.special import erfc

from .errors import ConfigError

HBAR = _c.hbar
EV = _c.electron_volt
ELECTRON_MASS = _c.m_e
# Atomic mass of 4He; the 2^3S_1 metastable differs by ~20 eV / c^2, irrelevant here.
HELIUM4_MASS = 4.002602 * _c.atomic_mass


@dataclass(frozen=True)
class ParticleSpec:
    mass: float
    hbar: float = HBAR

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError("particle mass must be positive", "particle.mass_kg")
        if not self.hbar > 0:
            raise ConfigError("hbar must be positive", "particle.hbar_Js")

    @classmethod
    def electron(cls) -> "ParticleSpec":
        return cls(ELECTRON_MASS)

    @classmethod
    def helium4(cls) -> "ParticleSpec":
        return cls(HELIUM4_MASS)

    def energy(self, k):
        """Free-particle kinetic energy of wave number ``k``."""
        return (self.hbar * k) ** 2 / (2.0 * self.mass)

    def wave_number(self, energy):
        return math.sqrt(2.0 * self.mass * energy) / self.hbar


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ConfigError("grid requires x_min < x_max", "grid.x_min_m")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ConfigError("grid needs an integer n_points >= 3", "grid.n_points")

    @classmethod
    def with_spacing(cls, x_min: float, x_max: float, dx: float) -> "Grid1D":
        """Uniform grid covering ``[x_min, x_max]`` with spacing closest to ``dx``."""
        n = int(round((x_max - x_min) / dx)) + 1
        return cls(x_min, x_max, n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def contains(self, x: float) -> bool:
        return self.x_min <= x <= self.x_max

    def refined(self, factor: int = 2) -> "Grid1D":
        """Same extent, spacing divided by ``factor``."""
        return Grid1D(self.x_min, self.x_max, (self.n_points - 1) * factor + 1)


@dataclass(frozen=True)
class PacketSpec:
    x_i: float
    sigma: float
    k_bar: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("packet sigma must be positive", "packet.sigma_m")

    @classmethod
    def from_energy(cls, x_i: float, sigma: float, energy: float,
                    particle: ParticleSpec) -> "PacketSpec":
        """Packet whose mean kinetic energy hbar^2 <k^2> / 2m equals ``energy``.

        ``<k^2> = k_bar^2 + delta_k^2`` for a Gaussian, so ``k_bar`` sits slightly
        below the naive ``sqrt(2 m E) / hbar``.
        """
        dk = 1.0 / (2.0 * sigma)
        k2 = 2.0 * particle.mass * energy / particle.hbar**2 - dk * dk
        if k2 <= 0:
            raise ConfigError("energy too small for this packet width", "packet.energy_J")
        return cls(x_i, sigma, math.sqrt(k2))

    @property
    def delta_k(self) -> float:
        return 1.0 / (2.0 * self.sigma)

    @property
    def quasi_monochromatic(self) -> bool:
        """False when delta_k / k_bar exceeds 0.1."""
        return self.k_bar == 0 or self.delta_k / abs(self.k_bar) <= 0.1

    def mean_k2(self) -> float:
        return self.k_bar**2 + self.delta_k**2

    def arrival_time(self, particle: ParticleSpec, x_target: float = 0.0) -> float:
        """Time for the centroid to reach ``x_target`` at group velocity hbar k_bar / m."""
        return particle.mass * abs(x_target - self.x_i) / (particle.hbar * self.k_bar)

    def interaction_time(self, particle: ParticleSpec) -> float:
        """Duration 2 m sigma / (hbar k_bar) of appreciable overlap with a sharp potential."""
        return 2.0 * particle.mass * self.sigma / (particle.hbar * self.k_bar)


# -- potentials ---------------------------------------------------------------

def _logcosh(z):
    a = np.abs(z)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


@dataclass(frozen=True)
class _Moving:
    def shift(self, t: float) -> float:
        """Displacement of the potential at time ``t``; motion begins at ``drift_start``."""
        if self.velocity == 0.0:
            return 0.0
        return self.velocity * max(0.0, t - self.drift_start)

    def moving(self) -> bool:
        return self.velocity != 0.0

    def with_drift(self, velocity: float, start: float = 0.0):
        return replace(self, velocity=velocity, drift_start=start)


@dataclass(frozen=True)
class Barrier(_Moving):
    V0: float
    x0: float
    x1: float
    velocity: float = 0.0
    drift_start: float = 0.0

    kind = "barrier"

    def __post_init__(self):
        if not self.V0 > 0:
            raise ConfigError("V0 must be positive", "potential.V0_J")
        if not self.x0 < self.x1:
            raise ConfigError("barrier requires x0 < x1", "potential.x0_m")

    @property
    def edge(self) -> float:
        return self.x0

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    def value(self, x, t: float = 0.0):
        s = np.asarray(x, dtype=float) - self.shift(t)
        return np.where((s >= self.x0) & (s <= self.x1), self.V0, 0.0)

    def cell_average(self, x, dx: float, t: float = 0.0):
        s = np.asarray(x, dtype=float) - self.shift(t)
        lo = np.maximum(s - 0.5 * dx, self.x0)
        hi = np.minimum(s + 0.5 * dx, self.x1)
        return self.V0 * np.clip(hi - lo, 0.0, dx) / dx


@dataclass(frozen=True)
class Step(_Moving):
    V0: float
    x_edge: float = 0.0
    velocity: float = 0.0
    drift_start: float = 0.0

    kind = "step"

    def __post_init__(self):
        if not self.V0 > 0:
            raise ConfigError("V0 must be positive", "potential.V0_J")

    @property
    def edge(self) -> float:
        return self.x_edge

    def value(self, x, t: float = 0.0):
        s = np.asarray(x, dtype=float) - self.shift(t)
        return np.where(s >= self.x_edge, self.V0, 0.0)

    def cell_average(self, x, dx: float, t: float = 0.0):
        s = np.asarray(x, dtype=float) - self.shift(t)
        return self.V0 * np.clip((s + 0.5 * dx - self.x_edge) / dx, 0.0, 1.0)


@dataclass(frozen=True)
class SmoothedStep(_Moving):
    """Step with a tanh ramp of width ``width``; ``width == 0`` is a sharp step."""

    V0: float
    x_edge: float = 0.0
    width: float = 0.0
    velocity: float = 0.0
    drift_start: float = 0.0

    kind = "smoothed_step"

    def __post_init__(self):
        if not self.V0 > 0:
            raise ConfigError("V0 must be positive", "potential.V0_J")
        if self.width < 0:
            raise ConfigError("ramp width must be >= 0", "potential.width_m")

    @property
    def edge(self) -> float:
        return self.x_edge

    def _sharp(self) -> Step:
        return Step(self.V0, self.x_edge, self.velocity, self.drift_start)

    def value(self, x, t: float = 0.0):
        if self.width == 0:
            return self._sharp().value(x, t)
        s = np.asarray(x, dtype=float) - self.shift(t) - self.x_edge
        return 0.5 * self.V0 * (1.0 + np.tanh(s / self.width))

    def cell_average(self, x, dx: float, t: float = 0.0):
        if self.width == 0:
            return self._sharp().cell_average(x, dx, t)
        s = np.asarray(x, dtype=float) - self.shift(t) - self.x_edge
        w = self.width

        def prim(u):
            return 0.5 * (u + w * _logcosh(u / w))

        return self.V0 * (prim(s + 0.5 * dx) - prim(s - 0.5 * dx)) / dx


PotentialSpec = Union[Barrier, Step, SmoothedStep]


def kappa0(V0: float, particle: ParticleSpec) -> float:
    """Wave number sqrt(2 m V0) / hbar separating evanescent from propagating states."""
    return math.sqrt(2.0 * particle.mass * V0) / particle.hbar


# -- wave functions -------------------------------------------------------------

@dataclass
class WaveFunction:
    grid: Grid1D
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.grid.n_points,):
            raise ConfigError("amplitude count does not match grid")

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.trapezoid(self.density, dx=self.grid.dx))

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes.copy())


@dataclass(frozen=True)
class ExpectationRecord:
    t: float
    norm: float
    mean_x: float
    mean_p: float
    E_kin: float
    E_pot: float
    E_tot: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "E_tot", self.E_kin + self.E_pot)


def make_gaussian_packet(grid: Grid1D, packet: PacketSpec) -> WaveFunction:
    """Normalized Gaussian exp(-(x-x_i)^2 / 4 sigma^2) exp(i k_bar x) on ``grid``."""
    if packet.sigma < 4.0 * grid.dx:
        raise ConfigError(
            f"packet under-resolved: sigma={packet.sigma:.3g} < 4 dx={4 * grid.dx:.3g}",
            "packet.sigma_m",
        )
    if (packet.x_i - grid.x_min < 4.0 * packet.sigma
            or grid.x_max - packet.x_i < 4.0 * packet.sigma):
        raise ConfigError("packet centroid closer than 4 sigma to a grid edge", "packet.x_i_m")
    if not packet.quasi_monochromatic:
        warnings.warn("packet is not quasi-monochromatic (delta_k / k_bar > 0.1)", stacklevel=2)
    x = grid.x
    psi = np.exp(-((x - packet.x_i) ** 2) / (4.0 * packet.sigma**2) + 1j * packet.k_bar * x)
    psi[0] = psi[-1] = 0.0
    psi /= math.sqrt(np.trapezoid(np.abs(psi) ** 2, dx=grid.dx))
    return WaveFunction(grid, psi)


def momentum_spectrum(psi: WaveFunction) -> tuple[np.ndarray, np.ndarray]:
    """Wave numbers and |f(k)|^2 with f(k) = (2 pi)^-1/2 int psi(x) exp(-ikx) dx.

    Both arrays are sorted by ``k``; ``sum(|f|^2) * dk`` equals the grid norm.
    """
    g = psi.grid
    n, dx = g.n_points, g.dx
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    f = np.fft.fft(psi.amplitudes) * dx / math.sqrt(2.0 * np.pi)
    f *= np.exp(-1j * k * g.x_min)
    return np.fft.fftshift(k), np.fft.fftshift(np.abs(f) ** 2)


def grid_potential(pot: PotentialSpec, grid: Grid1D, t: float = 0.0) -> np.ndarray:
    """Potential on grid nodes as the exact average over each node's cell.

    Cell averaging keeps a moving sharp edge continuous in time instead of
    jumping one node at a time.
    """
    return pot.cell_average(grid.x, grid.dx, t)


def expectation_values(psi: WaveFunction, pot: PotentialSpec | None, t: float,
                       particle: ParticleSpec, *, v: np.ndarray | None = None) -> ExpectationRecord:
    """Norm, <x>, <p>, kinetic and potential energy of ``psi`` at time ``t``.

    Derivatives are the same 3-point stencils the propagator uses, so the
    total energy is conserved by Crank-Nicolson up to round-off.  ``v`` may
    carry a precomputed grid potential.
    """
    g = psi.grid
    dx = g.dx
    a = psi.amplitudes
    pad = np.concatenate(([0.0], a, [0.0]))
    lap = (pad[2:] - 2.0 * a + pad[:-2]) / dx**2
    grad = (pad[2:] - pad[:-2]) / (2.0 * dx)
    rho = np.abs(a) ** 2
    norm = float(np.trapezoid(rho, dx=dx))
    h, m = particle.hbar, particle.mass
    e_kin = float(-(h * h) / (2.0 * m) * np.real(np.trapezoid(np.conj(a) * lap, dx=dx)))
    mean_p = float(h * np.real(-1j * np.trapezoid(np.conj(a) * grad, dx=dx)))
    mean_x = float(np.trapezoid(g.x * rho, dx=dx))
    if v is None and pot is not None:
        v = grid_potential(pot, g, t)
    e_pot = 0.0 if v is None else float(np.trapezoid(v * rho, dx=dx))
    return ExpectationRecord(t, norm, mean_x, mean_p, e_kin, e_pot)


# -- closed-form baselines ----------------------------------------------------------

def classical_supra_barrier_probability(k_bar: float, delta_k: float, V0: float,
                                        m: float, hbar: float = HBAR) -> float:
    """0.5 erfc((sqrt(m V0)/hbar - k_bar/sqrt 2) / delta_k)."""
    if not delta_k > 0:
        raise ConfigError("delta_k must be positive")
    arg = (math.sqrt(m * V0) / hbar - k_bar / math.sqrt(2.0)) / delta_k
    return 0.5 * float(erfc(arg))


def monochromatic_barrier_transmission(E: float, V0: float, a: float, m: float,
                                       hbar: float = HBAR) -> float:
    """Plane-wave transmission through a rectangular barrier for 0 < E < V0."""
    if not 0 < E < V0:
        raise ConfigError("monochromatic transmission needs 0 < E < V0")
    kap = math.sqrt(2.0 * m * (V0 - E)) / hbar
    s = math.sinh(kap * a)
    return 1.0 / (1.0 + V0 * V0 * s * s / (4.0 * E * (V0 - E)))
