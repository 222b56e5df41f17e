"""Scenario runners and the parameter-sweep engine.

Every runner returns plain dataclasses carrying the resolved configuration of
each propagation, so a report is enough to reproduce any of its points.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import scenarios as S
from .domain import EV, ParticleSpec, SmoothedStep, kappa0
from .errors import ConfigError, ConvergenceError
from .observables import asymptotic_transmission, penetration_depth
from .propagator import KickEvent, SimConfig, Trajectory, propagate
from .scaling import ScaleFactors, to_dimensionless

log = logging.getLogger(__name__)

AXES = ("kick_time", "kick_q", "ramp_width", "step_velocity")
RAMP_MARGIN = 3.0


# ---------------------------------------------------------------- sweep engine

@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig
    axis: str
    values: tuple[float, ...]
    parallelism: int = 1

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}", "sweep.axis")
        if not self.values:
            raise ConfigError("sweep needs at least one value", "sweep.values")
        d = np.diff(self.values)
        if len(d) and not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigError("sweep values must be strictly monotone", "sweep.values")
        if int(self.parallelism) != self.parallelism or self.parallelism < 1:
            raise ConfigError("parallelism must be an integer >= 1", "sweep.parallelism")

    def configs(self) -> list[SimConfig]:
        return [apply_axis(self.base, self.axis, v) for v in self.values]


def apply_axis(base: SimConfig, axis: str, value: float) -> SimConfig:
    """Copy of ``base`` with the swept quantity set to ``value``."""
    if axis in ("kick_time", "kick_q"):
        if len(base.kicks) != 1:
            raise ConfigError(f"axis {axis} needs exactly one kick in the base config", "kicks")
        k = base.kicks[0]
        k = replace(k, t_k=value) if axis == "kick_time" else replace(k, q=value)
        return base.with_kicks(k)
    if axis == "ramp_width":
        # x_T keeps RAMP_MARGIN widths of clearance past the ramp
        pot = base.potential
        if not isinstance(pot, SmoothedStep):
            raise ConfigError("ramp_width axis needs a smoothed_step potential", "potential.kind")
        x_T = base.x_T + RAMP_MARGIN * (value - pot.width)
        return base.replace(potential=replace(pot, width=value), x_T=x_T)
    if axis == "step_velocity":
        pot = base.potential
        return base.replace(potential=pot.with_drift(value, pot.drift_start))
    raise ConfigError(f"unknown sweep axis {axis!r}", "sweep.axis")


@dataclass(frozen=True)
class PointResult:
    """Outcome of one propagation, light enough to ship between processes."""

    config: SimConfig
    T: float
    plateau_residual: float
    converged: bool
    norm_drift: float
    contaminated: bool
    kick_energy_transfer: tuple[float, ...] = ()


def summarize(traj: Trajectory, tol: float = 1e-2) -> PointResult:
    res = asymptotic_transmission(traj, tol=tol, raise_on_fail=False)
    transfers = tuple(after.E_tot - before.E_tot for before, after in traj.kick_records)
    return PointResult(traj.config, res.T, res.plateau_residual, res.converged,
                       traj.norm_drift(), traj.boundary_contaminated, transfers)


def run_point(config: SimConfig, tol: float = 1e-2) -> PointResult:
    return summarize(propagate(config), tol)


def _run_point_star(args):
    return run_point(*args)


def run_configs(configs: Sequence[SimConfig], parallelism: int = 1,
                tol: float = 1e-2) -> list[PointResult]:
    """Propagate every config; results come back in input order."""
    jobs = [(c, tol) for c in configs]
    if parallelism <= 1 or len(jobs) <= 1:
        return [_run_point_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(parallelism, len(jobs))) as ex:
        return list(ex.map(_run_point_star, jobs))


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list[PointResult]

    @property
    def values(self) -> np.ndarray:
        return np.array(self.spec.values)

    @property
    def T(self) -> np.ndarray:
        return np.array([p.T for p in self.points])

    @property
    def converged(self) -> bool:
        return all(p.converged for p in self.points)


def run_sweep(spec: SweepSpec, tol: float = 1e-2) -> SweepResult:
    return SweepResult(spec, run_configs(spec.configs(), spec.parallelism, tol))


# ---------------------------------------------------------------- snapshot scenarios

@dataclass
class ScenarioRun:
    label: str
    trajectory: Trajectory
    result: PointResult

    @property
    def T(self) -> float:
        return self.result.T

    @property
    def config(self) -> SimConfig:
        return self.trajectory.config


@dataclass
class Fig1Report:
    runs: list[ScenarioRun]
    t0: float

    def by_label(self) -> dict[str, ScenarioRun]:
        return {r.label: r for r in self.runs}

    def table(self) -> list[tuple[str, float]]:
        return [(r.label, r.T) for r in self.runs]


FIG1_SNAPSHOTS = (0.0, 4.5e-15, 15e-15)


def fig1_configs(q: float = S.Q_KICK, **grid_kw) -> list[tuple[str, SimConfig]]:
    t0 = S.arrival_time()
    snaps = tuple(t for t in FIG1_SNAPSHOTS if t <= grid_kw.get("t_end", S.T_END))
    mk = lambda kind, kicks: S.electron_config(kind, kicks, snapshot_times=snaps, **grid_kw)
    return [
        ("barrier_no_kick", mk("barrier", ())),
        ("barrier_kick_0", mk("barrier", (KickEvent(q, 0.0),))),
        ("barrier_kick_t0", mk("barrier", (KickEvent(q, t0),))),
        ("step_kick_t0", mk("step", (KickEvent(q, t0),))),
    ]


def run_fig1_scenarios(q: float = S.Q_KICK, tol: float = 1e-2, **grid_kw) -> Fig1Report:
    """The four reference propagations with snapshots at 0, 4.5 and 15 fs."""
    runs = []
    for label, cfg in fig1_configs(q, **grid_kw):
        traj = propagate(cfg)
        runs.append(ScenarioRun(label, traj, summarize(traj, tol)))
        log.info("%s: T = %.4g", label, runs[-1].T)
    return Fig1Report(runs, S.arrival_time())


# ---------------------------------------------------------------- kick-time sweep

@dataclass(frozen=True)
class GaussianFit:
    T_max: float
    t0: float
    delta_t: float
    rms_residual: float
    n_points: int

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.T_max * np.exp(-((t - self.t0) ** 2) / (2.0 * self.delta_t**2))

    def residual_within(self, t, T, half_width: float) -> float:
        """RMS log10 residual over points with |t - t0| <= half_width."""
        t, T = np.asarray(t, float), np.asarray(T, float)
        m = (np.abs(t - self.t0) <= half_width) & (T > 0)
        if not m.any():
            return float("nan")
        r = np.log10(T[m]) - np.log10(self(t[m]))
        return float(np.sqrt(np.mean(r * r)))


def fit_gaussian(t, T, *, window: float = 2.0, max_residual: float = 0.5,
                 max_iter: int = 10) -> GaussianFit:
    """Fit T = T_max exp(-(t - t0)^2 / 2 dt^2) by least squares on log T.

    Only points within ``window`` widths of the fitted centre are used; the
    window is iterated to self-consistency starting from the points above
    T_peak e^-2.
    """
    t, T = np.asarray(t, float), np.asarray(T, float)
    ok = T > 0
    t, T = t[ok], T[ok]
    if len(t) < 3:
        raise ConvergenceError("Gaussian fit needs at least three positive points")
    scale = float(np.ptp(t)) or 1.0
    mask = T >= T.max() * math.exp(-2.0)
    prev = None
    for _ in range(max_iter):
        if mask.sum() < 3:
            raise ConvergenceError("fewer than three points inside the fit window")
        u = (t[mask] - t[np.argmax(T)]) / scale
        c2, c1, c0 = np.polyfit(u, np.log(T[mask]), 2)
        if not c2 < 0:
            raise ConvergenceError("log T is not concave: no Gaussian peak")
        uc = -c1 / (2 * c2)
        t0 = t[np.argmax(T)] + uc * scale
        dt = math.sqrt(-1.0 / (2 * c2)) * scale
        T_max = math.exp(c0 - c1 * c1 / (4 * c2))
        new = np.abs(t - t0) <= window * dt
        if prev is not None and np.array_equal(new, mask):
            break
        prev, mask = mask, new
    r = np.log10(T[mask]) - np.log10(T_max * np.exp(-((t[mask] - t0) ** 2) / (2 * dt * dt)))
    fit = GaussianFit(T_max, t0, dt, float(np.sqrt(np.mean(r * r))), int(mask.sum()))
    if fit.rms_residual > max_residual:
        raise ConvergenceError(f"Gaussian fit residual {fit.rms_residual:.3g} > {max_residual} (log10)")
    return fit


def default_kick_times() -> tuple[float, ...]:
    t0 = S.arrival_time()
    near = t0 + np.arange(-1.5, 1.5001, 0.25) * 1e-15
    far = [0.0, 1e-15, 2e-15, 7.5e-15, 9e-15]
    return tuple(sorted(set(np.round(np.concatenate([near, far]), 30))))


@dataclass
class KickTimeSweep:
    sweep: SweepResult
    fit: GaussianFit


def sweep_kick_time(spec: SweepSpec | None = None, tol: float = 1e-2,
                    parallelism: int = 1, **grid_kw) -> KickTimeSweep:
    """T versus kick time t_k (step, q = 1e8 m^-1 by default) plus Gaussian fit."""
    if spec is None:
        base = S.electron_config("step", (KickEvent(S.Q_KICK, 0.0),), **grid_kw)
        spec = SweepSpec(base, "kick_time", default_kick_times(), parallelism)
    if spec.axis != "kick_time":
        raise ConfigError("sweep_kick_time needs axis kick_time", "sweep.axis")
    res = run_sweep(spec, tol)
    return KickTimeSweep(res, fit_gaussian(res.values, res.T))


# ---------------------------------------------------------------- q sweeps

Q_CASES = {"a": ("barrier", "pre"), "b": ("barrier", "during"), "c": ("step", "during")}


def default_q_values(case: str) -> tuple[float, ...]:
    if case not in Q_CASES:
        raise ConfigError(f"unknown q-sweep case {case!r} (expected a, b or c)", "sweep.case")
    if case == "a":
        return (-S.Q_KICK, 0.0, S.Q_KICK)
    k_bar = S.electron_packet().k_bar
    mags = np.array([0.0025, 0.005, 0.01, 0.02]) * k_bar
    return tuple(np.concatenate([-mags[::-1], [0.0], mags]))


def q_sweep_spec(case: str, q_values: Sequence[float] | None = None,
                 parallelism: int = 1, **grid_kw) -> SweepSpec:
    if case not in Q_CASES:
        raise ConfigError(f"unknown q-sweep case {case!r} (expected a, b or c)", "sweep.case")
    kind, when = Q_CASES[case]
    t_k = 0.0 if when == "pre" else S.arrival_time()
    base = S.electron_config(kind, (KickEvent(0.0, t_k),), **grid_kw)
    values = default_q_values(case) if q_values is None else tuple(q_values)
    return SweepSpec(base, "kick_q", values, parallelism)


def sweep_q(case: str, q_values: Sequence[float] | None = None, parallelism: int = 1,
            tol: float = 1e-2, **grid_kw) -> SweepResult:
    """T(q) for (a) barrier kicked at 0, (b) barrier and (c) step kicked at t0."""
    return run_sweep(q_sweep_spec(case, q_values, parallelism, **grid_kw), tol)


# ---------------------------------------------------------------- ramp steepness

def de_broglie_wavelength() -> float:
    return 2.0 * math.pi / S.electron_packet().k_bar


def default_ramp_widths() -> tuple[float, ...]:
    lam = de_broglie_wavelength()
    return (0.0, lam / 8, lam / 4, lam / 2, lam)


def ramp_sweep_spec(widths: Sequence[float] | None = None, q: float = S.Q_KICK,
                    parallelism: int = 1, **grid_kw) -> SweepSpec:
    """Sweep over tanh ramp widths of the t0-kick step scenario.

    The measurement boundary sits RAMP_MARGIN widths past the usual five
    penetration depths.  Runs last 20 fs on a grid reaching -30 nm so the
    slow transmitted components through wide ramps settle before t_end.
    """
    widths = default_ramp_widths() if widths is None else tuple(widths)
    if min(widths) < 0:
        raise ConfigError("ramp widths must be >= 0", "potential.width_m")
    dx = grid_kw.get("dx", S.DX)
    if any(0 < w < dx for w in widths):
        raise ConfigError("ramp width below grid spacing", "potential.width_m")
    kw = {"t_end": 20e-15, "x_min": -30e-9, **grid_kw}
    k0 = kappa0(S.V0_ELECTRON, ParticleSpec.electron())
    x_T = 5.0 * penetration_depth(k0, S.electron_packet().k_bar)
    base = S.electron_config("smoothed_step", (KickEvent(q, S.arrival_time()),),
                             ramp_width=0.0, x_T=x_T, **kw)
    return SweepSpec(base, "ramp_width", widths, parallelism)


def ramp_width_sweep(widths: Sequence[float] | None = None, q: float = S.Q_KICK,
                     parallelism: int = 1, tol: float = 1e-2, **grid_kw) -> SweepResult:
    """t0-kick step scenario repeated for each ramp width (see :func:`ramp_sweep_spec`)."""
    return run_sweep(ramp_sweep_spec(widths, q, parallelism, **grid_kw), tol)


# ---------------------------------------------------------------- Galilean equivalence

@dataclass(frozen=True)
class MovingEquivalence:
    q: float
    velocity: float
    T_kick: float
    T_moving: float
    kick: PointResult
    moving: PointResult

    @property
    def ratio(self) -> float:
        return self.T_moving / self.T_kick


def moving_step_config(velocity: float, **grid_kw) -> SimConfig:
    base = S.electron_config("step", (), **grid_kw)
    return base.replace(potential=base.potential.with_drift(velocity, S.arrival_time()))


def moving_potential_equivalence(q: float = S.Q_KICK, parallelism: int = 1,
                                 tol: float = 1e-2, **grid_kw) -> MovingEquivalence:
    """Static step kicked by q at t0 versus a step moving at v = hbar q / m from t0."""
    p = ParticleSpec.electron()
    v = p.hbar * q / p.mass
    kick_cfg = S.electron_config("step", (KickEvent(q, S.arrival_time()),), **grid_kw)
    kick, moving = run_configs([kick_cfg, moving_step_config(v, **grid_kw)], parallelism, tol)
    return MovingEquivalence(q, v, kick.T, moving.T, kick, moving)


# ---------------------------------------------------------------- energy laws

@dataclass(frozen=True)
class EnergyLaw:
    """Kick energy bookkeeping measured from the propagated state."""

    E_before: float
    E_after: float
    t_kick: float
    mean_p_before: float
    predicted: float

    @property
    def transfer(self) -> float:
        return self.E_after - self.E_before


def free_kick_energy(q: float = S.Q_KICK, **grid_kw) -> EnergyLaw:
    """Kick at t=0, packet far from the barrier: E_f = E_i + hbar q <p>/m + hbar^2 q^2 / 2m."""
    cfg = S.electron_config("barrier", (KickEvent(q, 0.0),), t_end=20 * S.DT,
                            **{k: v for k, v in grid_kw.items() if k != "t_end"})
    traj = propagate(cfg)
    before, after = traj.kick_records[0]
    p = cfg.particle
    pred = p.hbar**2 * q * q / (2 * p.mass) + p.hbar * q * before.mean_p / p.mass
    return EnergyLaw(before.E_tot, after.E_tot, 0.0, before.mean_p, pred)


def turning_time(config: SimConfig) -> float:
    """First time <p> changes sign in the unkicked evolution of ``config``."""
    cfg = config.replace(kicks=(), record_every=1, snapshot_times=())
    traj = propagate(cfg)
    t = np.array([r.t for r in traj.records])
    p = np.array([r.mean_p for r in traj.records])
    idx = np.nonzero((p[:-1] > 0) & (p[1:] <= 0))[0]
    if len(idx) == 0:
        raise ConvergenceError("<p> never changes sign before t_end")
    i = idx[0]
    return float(t[i] + (t[i + 1] - t[i]) * p[i] / (p[i] - p[i + 1]))


def turning_kick_energy(config: SimConfig, q: float) -> EnergyLaw:
    """Kick exactly when <p> = 0 and measure E_f - E_i.

    ``dt`` is nudged (by at most half a step over the whole run) so that the
    turning time falls on a step boundary.
    """
    t_turn = turning_time(config)
    n = max(int(round(t_turn / config.dt)), 1)
    dt = t_turn / n
    cfg = config.replace(dt=dt, t_end=(n + 2) * dt, kicks=(KickEvent(q, n * dt),),
                         snapshot_times=(), record_every=max(n // 10, 1))
    traj = propagate(cfg)
    before, after = traj.kick_records[0]
    p = cfg.particle
    return EnergyLaw(before.E_tot, after.E_tot, n * dt, before.mean_p,
                     p.hbar**2 * q * q / (2 * p.mass))


def step_kick_energy(q: float = S.Q_KICK, **grid_kw) -> EnergyLaw:
    t0 = S.arrival_time()
    kw = {k: v for k, v in grid_kw.items() if k != "t_end"}
    return turning_kick_energy(S.electron_config("step", (), t_end=2 * t0, **kw), q)


# ---------------------------------------------------------------- gradual kick

def gradual_kick_pair(delta_t: float = 1e-16, n_substeps: int = 8, q: float = S.Q_KICK,
                      kind: str = "step", parallelism: int = 1, tol: float = 1e-2,
                      **grid_kw) -> tuple[PointResult, PointResult]:
    """(instantaneous, gradual) kicks centred on t0."""
    t0 = S.arrival_time()
    inst = S.electron_config(kind, (KickEvent(q, t0),), **grid_kw)
    grad = inst.with_kicks(KickEvent(q, t0, delta_t, n_substeps))
    a, b = run_configs([inst, grad], parallelism, tol)
    return a, b


# ---------------------------------------------------------------- convergence

@dataclass(frozen=True)
class ConvergenceEntry:
    label: str
    T: float
    T_refined: float

    @property
    def relative_shift(self) -> float:
        return abs(self.T_refined - self.T) / abs(self.T)


def refine(config: SimConfig, factor: int = 2) -> SimConfig:
    """Same physics with dt and dx divided by ``factor``."""
    return config.replace(grid=config.grid.refined(factor), dt=config.dt / factor,
                          record_every=config.record_every * factor)


def convergence_study(labelled: Sequence[tuple[str, SimConfig]], parallelism: int = 1,
                      tol: float = 1e-2, base: Sequence[PointResult] | None = None
                      ) -> list[ConvergenceEntry]:
    configs = [c for _, c in labelled]
    if base is None:
        base = run_configs(configs, parallelism, tol)
    fine = run_configs([refine(c) for c in configs], parallelism, tol)
    return [ConvergenceEntry(lab, b.T, f.T) for (lab, _), b, f in zip(labelled, base, fine)]


# ---------------------------------------------------------------- cold helium

@dataclass
class HeliumResult:
    dk_ratio: float
    T_baseline: float
    T_kicked: float
    energy_transfer_J: float
    energy_transfer_predicted_J: float
    scale: ScaleFactors
    n_steps_scaled: int
    n_steps_si: float
    baseline: PointResult
    kicked: PointResult

    @property
    def energy_transfer_eV(self) -> float:
        return self.energy_transfer_J / EV


def helium_scenario(dk_ratio: float = S.HELIUM_DK_RATIO, q: float = S.Q_HELIUM,
                    parallelism: int = 1, tol: float = 1e-2, measure_energy: bool = True,
                    resolution: float = 1.0) -> HeliumResult:
    """Metastable helium-4 on a 1.5e-11 eV step, kicked by q at the arrival time.

    Runs in units with hbar = m = 1 and length 1/k_bar.  The energy transfer is
    measured with a kick placed exactly at the <p> = 0 turning time.
    """
    si = S.helium_config(dk_ratio, resolution=resolution)
    t0 = si.packet.arrival_time(si.particle, si.potential.edge)
    base, sf = to_dimensionless(si)
    kicked, _ = to_dimensionless(si.with_kicks(KickEvent(q, t0)))
    b, k = run_configs([base, kicked], parallelism, tol)
    if measure_energy:
        law = turning_kick_energy(base.replace(t_end=2 * t0 / sf.time), q * sf.length)
        transfer = law.transfer * sf.energy
    else:
        transfer = float("nan")
    pred = si.particle.hbar**2 * q * q / (2 * si.particle.mass)
    n_si = si.t_end / S.DT
    return HeliumResult(dk_ratio, b.T, k.T, transfer, pred, sf, base.n_steps, n_si, b, k)


def helium_sensitivity(dk_ratios: Sequence[float] = (0.02, 0.05, 0.1), **kw) -> list[HeliumResult]:
    return [helium_scenario(r, measure_energy=False, **kw) for r in dk_ratios]


# ---------------------------------------------------------------- analytic step transmission

def electron_step_spectrum(t: float | None = None):
    """(params, f) for the electron packet on the 10 eV step, f evolved to the kick time."""
    from .analytic import SpectralAmplitude, StepEigenParams
    p = ParticleSpec.electron()
    params = StepEigenParams.from_physical(S.V0_ELECTRON, p)
    f = SpectralAmplitude.from_packet(S.electron_packet(p), params,
                                      S.arrival_time() if t is None else t)
    return params, f


@dataclass(frozen=True)
class AnalyticPoint:
    q: float
    result: "object"

    @property
    def T(self) -> float:
        return self.result.T


def analytic_q_curve(q_values: Sequence[float], *, raise_on_fail: bool = True,
                     plateau_tol: float = 1e-2) -> list[AnalyticPoint]:
    """Expansion-based T(q) for the step kicked at t0 (zero at q = 0)."""
    from .analytic import analytic_transmission
    params, f = electron_step_spectrum()
    out = []
    for q in q_values:
        if q == 0:
            out.append(AnalyticPoint(0.0, None))
            continue
        out.append(AnalyticPoint(float(q), analytic_transmission(
            f, float(q), params, plateau_tol=plateau_tol, raise_on_fail=raise_on_fail)))
    return out


@dataclass(frozen=True)
class ComparisonRow:
    q: float
    T_tdse: float
    T_analytic: float

    @property
    def ratio(self) -> float:
        return self.T_analytic / self.T_tdse if self.T_tdse else math.nan


def compare_step_curve(q_values: Sequence[float] | None = None, parallelism: int = 1,
                       tol: float = 1e-2, tdse: SweepResult | None = None,
                       **grid_kw) -> tuple[list[ComparisonRow], SweepResult]:
    """TDSE curve (c) next to the analytic expansion at the same q."""
    if tdse is None:
        q = [v for v in (default_q_values("c") if q_values is None else q_values) if v != 0]
        tdse = sweep_q("c", q, parallelism, tol, **grid_kw)
    ana = analytic_q_curve(tdse.values)
    rows = [ComparisonRow(float(q), float(p.T), 0.0 if a.result is None else a.T)
            for q, p, a in zip(tdse.values, tdse.points, ana)]
    return rows, tdse
