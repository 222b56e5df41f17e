"""Command-line front end.

Exit codes: 0 success, 1 invalid configuration, 2 convergence failure,
3 internal error.  All files go under ``--out``; the directory is created
only after the inputs have been validated.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
import warnings
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from . import experiments as X
from . import io
from . import scenarios as S
from .errors import ConfigError, ConvergenceError
from .propagator import KickEvent

log = logging.getLogger("qevap")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INTERNAL = 0, 1, 2, 3


class _Job:
    """Collects outputs for one command and writes them at the end."""

    def __init__(self, args, argv: Sequence[str]):
        self.args = args
        self.out = Path(args.out)
        self.fmt = args.format
        self.manifest = io.RunManifest(args.command, list(argv))
        self.manifest.parameters = {k: v for k, v in vars(args).items()
                                    if k not in ("func", "command")}
        self.converged = True
        self._t0 = time.perf_counter()

    def prepare(self):
        self.out.mkdir(parents=True, exist_ok=True)

    def series(self, name: str, columns, rows, **meta) -> Path:
        return io.write_series(self.out / name, columns, rows, meta, self.fmt)

    def flag(self, name: str, ok: bool, **detail):
        self.manifest.convergence[name] = {"converged": bool(ok), **detail}
        self.converged &= bool(ok)

    def finish(self) -> int:
        self.manifest.wall_clock_s = time.perf_counter() - self._t0
        self.manifest.convergence["all"] = self.converged
        self.manifest.write(self.out)
        return EXIT_OK if self.converged else EXIT_CONVERGENCE


def _floats(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}", "values") from None


def _grid_kw(args) -> dict:
    kw = {}
    if args.dx is not None:
        kw["dx"] = args.dx
    if args.dt is not None:
        kw["dt"] = args.dt
    return kw


def _point_rows(points):
    return [(p.T, p.plateau_residual, p.converged, p.norm_drift, p.contaminated) for p in points]


POINT_COLUMNS = ("T", "plateau_residual", "converged", "norm_drift", "boundary_contaminated")


# ---------------------------------------------------------------- commands

def cmd_simulate(job: _Job) -> int:
    cfg = io.read_config(job.args.config)
    job.prepare()
    traj = X.propagate(cfg)
    res = X.summarize(traj, job.args.tol)
    io.write_trajectory(job.out / "trajectory", traj, job.fmt)
    if traj.snapshots:
        io.write_snapshots(_prepare_snapshots_dir(job), traj, fmt=job.fmt,
                           raw=job.args.raw_snapshots)
    job.series("summary", ("x_T_m",) + POINT_COLUMNS, [(cfg.x_T,) + _point_rows([res])[0]],
               config_sha256=io.config_hash(cfg))
    (job.out / "config.cfg").write_text(io.config_text(cfg))
    job.manifest.add_config("simulate", cfg)
    job.flag("plateau", res.converged, residual=res.plateau_residual)
    print(f"T = {res.T:.6g} (plateau residual {res.plateau_residual:.3g})")
    return job.finish()


def _prepare_snapshots_dir(job):
    d = job.out / "snapshots"
    d.mkdir(exist_ok=True)
    return d


def cmd_fig1(job: _Job) -> int:
    kw = _grid_kw(job.args)
    X.fig1_configs(job.args.q, **kw)  # validates before anything is written
    job.prepare()
    report = X.run_fig1_scenarios(job.args.q, job.args.tol, **kw)
    snaps = _prepare_snapshots_dir(job)
    rows = []
    for run in report.runs:
        rows.append((run.label,) + _point_rows([run.result])[0])
        io.write_trajectory(job.out / f"trajectory_{run.label}", run.trajectory, job.fmt)
        io.write_snapshots(snaps, run.trajectory, prefix=run.label, fmt=job.fmt,
                           raw=job.args.raw_snapshots)
        job.manifest.add_config(run.label, run.config)
        job.flag(run.label, run.result.converged, residual=run.result.plateau_residual)
    job.series("fig1", ("scenario",) + POINT_COLUMNS, rows, t0_s=io.format_number(report.t0))
    print(f"{'scenario':<18} T")
    for label, T in report.table():
        print(f"{label:<18} {T:.4g}")
    return job.finish()


def cmd_sweep_time(job: _Job) -> int:
    a = job.args
    base = S.electron_config(a.kind, (KickEvent(a.q, 0.0),), **_grid_kw(a))
    values = _floats(a.times) or X.default_kick_times()
    spec = X.SweepSpec(base, "kick_time", values, a.parallel)
    spec.configs()
    job.prepare()
    res = X.run_sweep(spec, a.tol)
    _write_sweep(job, "sweep_time", "t_k_s", res)
    try:
        fit = X.fit_gaussian(res.values, res.T)
    except ConvergenceError as exc:
        job.flag("gaussian_fit", False, error=str(exc))
        return job.finish()
    res15 = fit.residual_within(res.values, res.T, 1.5 * fit.delta_t)
    job.series("sweep_time_fit",
               ("T_max", "t0_s", "delta_t_s", "two_delta_t_s", "rms_residual_log10",
                "rms_residual_log10_1p5dt", "n_points", "interaction_time_s"),
               [(fit.T_max, fit.t0, fit.delta_t, 2 * fit.delta_t, fit.rms_residual, res15,
                 fit.n_points, S.electron_packet().interaction_time(base.particle))])
    job.flag("gaussian_fit", fit.rms_residual <= 0.5, rms_residual=fit.rms_residual)
    print(f"T_max = {fit.T_max:.4g}, t0 = {fit.t0 * 1e15:.4g} fs, 2 dt = {2 * fit.delta_t * 1e15:.4g} fs")
    return job.finish()


def _write_sweep(job, name, axis_col, res: X.SweepResult, extra=None):
    rows = []
    for i, (v, p) in enumerate(zip(res.values, res.points)):
        ext = tuple(extra(v)) if extra else ()
        rows.append((v,) + ext + _point_rows([p])[0])
        job.manifest.add_config(f"{name}[{i}]", p.config)
        job.flag(f"{name}[{i}]", p.converged, residual=p.plateau_residual)
    cols = (axis_col,) + (tuple(extra.columns) if extra else ()) + POINT_COLUMNS
    job.series(name, cols, rows, axis=res.spec.axis)


class _Extra:
    def __init__(self, columns, fn: Callable):
        self.columns = columns
        self.fn = fn

    def __call__(self, v):
        return self.fn(v)

    def __bool__(self):
        return True


def cmd_sweep_q(job: _Job) -> int:
    a = job.args
    spec = X.q_sweep_spec(a.case, _floats(a.q), a.parallel, **_grid_kw(a))
    spec.configs()
    job.prepare()
    res = X.run_sweep(spec, a.tol)
    kb = spec.base.packet.k_bar
    _write_sweep(job, f"sweep_q_{a.case}", "q_per_m", res,
                 _Extra(("q_over_kbar",), lambda v: (v / kb,)))
    for q, T in zip(res.values, res.T):
        print(f"q = {q:+.4g}  T = {T:.4g}")
    return job.finish()


def cmd_ramp_sweep(job: _Job) -> int:
    a = job.args
    lam = X.de_broglie_wavelength()
    spec = X.ramp_sweep_spec(_floats(a.widths), a.q, a.parallel, **_grid_kw(a))
    spec.configs()
    job.prepare()
    res = X.run_sweep(spec, a.tol)
    _write_sweep(job, "ramp_sweep", "width_m", res,
                 _Extra(("width_over_lambda",), lambda v: (v / lam,)))
    for w, T in zip(res.values, res.T):
        print(f"w = {w / lam:.4g} lambda  T = {T:.4g}")
    return job.finish()


def cmd_moving_step(job: _Job) -> int:
    a = job.args
    kw = _grid_kw(a)
    X.moving_step_config(0.0, **kw)
    job.prepare()
    plus = X.moving_potential_equivalence(a.q, a.parallel, a.tol, **kw)
    flipped = X.run_configs([X.moving_step_config(-plus.velocity, **kw)], 1, a.tol)[0]
    rows = [("kick", a.q, 0.0) + _point_rows([plus.kick])[0],
            ("moving", 0.0, plus.velocity) + _point_rows([plus.moving])[0],
            ("moving_flipped", 0.0, -plus.velocity) + _point_rows([flipped])[0]]
    for label, p in (("kick", plus.kick), ("moving", plus.moving), ("moving_flipped", flipped)):
        job.manifest.add_config(label, p.config)
        job.flag(label, p.converged, residual=p.plateau_residual)
    job.series("moving_step", ("mode", "q_per_m", "velocity_mps") + POINT_COLUMNS, rows)
    print(f"T_kick = {plus.T_kick:.4g}, T_moving = {plus.T_moving:.4g}, flipped = {flipped.T:.4g}")
    return job.finish()


def cmd_helium(job: _Job) -> int:
    a = job.args
    ratios = _floats(a.dk_ratio) or [S.HELIUM_DK_RATIO]
    if any(not 0 < r < 0.2 for r in ratios):
        raise ConfigError("dk ratio must lie in (0, 0.2)", "packet.dk_ratio")
    job.prepare()
    rows = []
    for i, r in enumerate(ratios):
        h = X.helium_scenario(r, a.q, a.parallel, a.tol, measure_energy=(i == 0),
                              resolution=a.resolution)
        rows.append((r, h.T_baseline, h.T_kicked, h.energy_transfer_eV,
                     h.energy_transfer_predicted_J / X.EV, h.n_steps_scaled, h.n_steps_si,
                     h.kicked.plateau_residual, h.kicked.converged))
        for label, p in (("baseline", h.baseline), ("kicked", h.kicked)):
            job.manifest.add_config(f"helium[{r}].{label}", p.config)
            job.flag(f"helium[{r}].{label}", p.converged, residual=p.plateau_residual)
        print(f"dk/k = {r}: T_baseline = {h.T_baseline:.3g}, T_kicked = {h.T_kicked:.3g}")
    job.series("helium", ("dk_over_kbar", "T_baseline", "T_kicked", "energy_transfer_eV",
                          "energy_transfer_predicted_eV", "n_steps_scaled", "n_steps_si_equiv",
                          "plateau_residual", "converged"), rows,
               note="configs in the manifest are in scaled units (hbar = m = 1, length 1/k_bar)")
    return job.finish()


def cmd_analytic(job: _Job) -> int:
    a = job.args
    qs = _floats(a.q) or [v for v in X.default_q_values("c") if v != 0]
    job.prepare()
    pts = X.analytic_q_curve(qs, raise_on_fail=False, plateau_tol=a.tol)
    rows = []
    for p in pts:
        r = p.result
        if r is None:
            rows.append((p.q, 0.0, 0.0, 0.0, 0.0, 0.0))
            continue
        rows.append((p.q, r.T, r.T_parseval, r.plateau_residual, r.tail_fraction, r.supra_population))
        job.flag(f"analytic[{p.q}]", r.plateau_residual < a.tol and r.tail_fraction < 1e-2,
                 residual=r.plateau_residual, tail_fraction=r.tail_fraction)
    job.series("analytic", ("q_per_m", "T", "T_parseval", "plateau_residual", "tail_fraction",
                            "supra_population"), rows)
    return job.finish()


def cmd_compare(job: _Job) -> int:
    a = job.args
    qs = _floats(a.q)
    spec = X.q_sweep_spec("c", [v for v in (qs or X.default_q_values("c")) if v != 0],
                          a.parallel, **_grid_kw(a))
    spec.configs()
    job.prepare()
    tdse = X.run_sweep(spec, a.tol)
    rows, _ = X.compare_step_curve(tdse=tdse)
    for i, p in enumerate(tdse.points):
        job.manifest.add_config(f"compare[{i}]", p.config)
        job.flag(f"compare[{i}]", p.converged, residual=p.plateau_residual)
    job.series("compare", ("q_per_m", "T_tdse", "T_analytic", "ratio"),
               [(r.q, r.T_tdse, r.T_analytic, r.ratio) for r in rows])
    print(f"{'q':>12} {'T_tdse':>12} {'T_analytic':>12} {'ratio':>7}")
    for r in rows:
        print(f"{r.q:12.4g} {r.T_tdse:12.4g} {r.T_analytic:12.4g} {r.ratio:7.3f}")
    return job.finish()


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="qevap_out", help="output directory (default: qevap_out)")
    common.add_argument("--parallel", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--tol", type=float, default=1e-2, help="plateau tolerance (relative)")
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    common.add_argument("--raw-snapshots", action="store_true", help="also dump snapshots as .npy")
    common.add_argument("-v", "--verbose", action="store_true")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--dx", type=float, default=None, help="grid spacing override [m]")
    grid.add_argument("--dt", type=float, default=None, help="time step override [s]")

    p = argparse.ArgumentParser(prog="qevap", description="Quantum evaporation by momentum kicks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="single run from a config file")
    s.add_argument("config", help="key = value config file, or a manifest.json")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fig1", parents=[common, grid],
                       help="reference runs: barrier without kick, kicked at 0 and t0; step kicked at t0")
    s.add_argument("--q", type=float, default=S.Q_KICK, help="kick wave number [1/m]")
    s.set_defaults(func=cmd_fig1)

    s = sub.add_parser("sweep-time", parents=[common, grid], help="T versus kick time, Gaussian fit")
    s.add_argument("--q", type=float, default=S.Q_KICK)
    s.add_argument("--kind", choices=("step", "barrier"), default="step")
    s.add_argument("--times", help="comma-separated kick times [s]")
    s.set_defaults(func=cmd_sweep_time)

    s = sub.add_parser("sweep-q", parents=[common, grid], help="T versus transferred wave number")
    s.add_argument("--case", choices=("a", "b", "c"), default="b")
    s.add_argument("--q", help="comma-separated q values [1/m]")
    s.set_defaults(func=cmd_sweep_q)

    s = sub.add_parser("ramp-sweep", parents=[common, grid], help="T versus step ramp width")
    s.add_argument("--q", type=float, default=S.Q_KICK)
    s.add_argument("--widths", help="comma-separated ramp widths [m]")
    s.set_defaults(func=cmd_ramp_sweep)

    s = sub.add_parser("moving-step", parents=[common, grid], help="kick versus moving step")
    s.add_argument("--q", type=float, default=S.Q_KICK)
    s.set_defaults(func=cmd_moving_step)

    s = sub.add_parser("helium", parents=[common], help="cold metastable helium prediction")
    s.add_argument("--q", type=float, default=S.Q_HELIUM)
    s.add_argument("--dk-ratio", help="comma-separated delta_k / k_bar values (default 0.02)")
    s.add_argument("--resolution", type=float, default=1.0, help="refine dx and dt by this factor")
    s.set_defaults(func=cmd_helium)

    s = sub.add_parser("analytic", parents=[common], help="step transmission from the eigen-expansion")
    s.add_argument("--q", help="comma-separated q values [1/m]")
    s.set_defaults(func=cmd_analytic)

    s = sub.add_parser("compare", parents=[common, grid], help="TDSE versus analytic, curve (c)")
    s.add_argument("--q", help="comma-separated q values [1/m]")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("default")
    try:
        if args.parallel < 1:
            raise ConfigError("--parallel must be >= 1", "--parallel")
        if not (args.tol > 0 and math.isfinite(args.tol)):
            raise ConfigError("--tol must be positive", "--tol")
        return args.func(_Job(args, argv))
    except ConfigError as exc:
        key = f" [{exc.key}]" if getattr(exc, "key", None) else ""
        print(f"qevap: invalid configuration{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"qevap: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except Exception as exc:  # noqa: BLE001 - map anything else to the internal-error code
        log.debug("internal error", exc_info=True)
        print(f"qevap: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
