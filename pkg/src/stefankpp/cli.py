"""Command-line front end: ``stefankpp <subcommand> ...``.

Exit codes: 0 success, 1 bad flags/config/input, 2 solver failure,
3 front reached a monitored box face, 4 a verification check failed.
Every invocation that gets past flag parsing writes ``manifest.json`` into
its output directory, also when the solver fails.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import enthalpy, fb1d, fbradial, geometry, semiwave, verify
from .errors import (BadInitialData, ConfigError, DeltaTooLarge, HypothesisViolated,
                     MarginViolated, NonPositiveParameter, SpeedOutOfRange, StefanKPPError,
                     WindowTooShort)
from .model import ModelParams, validate

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_MARGIN, EXIT_CHECK = 0, 1, 2, 3, 4

_INPUT_ERRORS = (ConfigError, NonPositiveParameter, BadInitialData, SpeedOutOfRange,
                 DeltaTooLarge, HypothesisViolated, WindowTooShort, FileNotFoundError)


@dataclass
class RunManifest:
    subcommand: str
    config: Optional[str]
    output_dir: str
    wall_time: float = 0.0
    defaults: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    status: str = "ok"
    exit_code: int = 0
    partial: bool = False
    summary: dict = field(default_factory=dict)
    error: Optional[str] = None

    def write(self) -> Path:
        path = Path(self.output_dir) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _defaults() -> dict:
    o = semiwave.DEFAULT_OPTIONS
    return {
        "package": __version__,
        "shooting": {"h_ode": "1e-3*sqrt(d/a)", "r_max": "40*sqrt(d/a)", "tol_slope": o.tol_slope,
                     "tol_speed": o.tol_speed, "tol_plateau": o.tol_plateau},
        "fb1d": {"cfl": fb1d.CFL_FACTOR, "advection_limit": fb1d.ADVECTION_LIMIT},
        "radial": {"cfl": fbradial.CFL_FACTOR},
        "enthalpy": {"cfl": enthalpy.CFL_FACTOR},
        "verify": {"fd_tol_constant": verify.FD_TOL_CONSTANT, "h_fd": "1e-3*sqrt(d/a)"},
    }


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _param_flags(p: argparse.ArgumentParser) -> None:
    for name in ("a", "b", "d", "mu"):
        p.add_argument(f"--{name}", type=float, default=1.0)


def _params(args) -> ModelParams:
    return validate(ModelParams(d=args.d, a=args.a, b=args.b, mu=args.mu))


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="stefankpp", description="Stefan-KPP spreading solvers and verifiers.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cstar", help="spreading speed c* and its semi-wave profile")
    _param_flags(p)
    p.add_argument("--tol", type=float, default=None, help="absolute tolerance on c*")
    p.add_argument("--out", default="cstar_out")

    p = sub.add_parser("semiwave", help="semi-wave profile at a given speed k")
    _param_flags(p)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--out", default="semiwave_out")

    p = sub.add_parser("run", help="run a solver from a key=value config file")
    p.add_argument("kind", choices=["fb1d", "radial-in", "radial-out", "cone2d", "cauchy"])
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (default: <config stem>_out)")

    p = sub.add_parser("verify", help="super/subsolution certification and comparison battery")
    p.add_argument("kind", choices=["super", "sub1d", "compare"])
    _param_flags(p)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--R", type=float, default=None, help="regularisation radius (super)")
    p.add_argument("--phi", type=float, default=3 * math.pi / 4)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--h-fd", type=float, default=None)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--case", action="append", default=None, help="battery case name (repeatable)")
    p.add_argument("--out", default="verify_out")

    p = sub.add_parser("plotdata", help="measured vs predicted curves from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out", default=None, help="default: <run_dir>/plots")
    return ap


# --------------------------------------------------------------------------
# configs
# --------------------------------------------------------------------------

_FB1D_KEYS = ({"a", "b", "d", "mu", "L", "h", "T", "output_dt", "sigma0", "rho0"},
              {"window"}, {"orientation"})
_RADIAL_KEYS = ({"a", "b", "d", "mu", "N", "r0", "R0", "T", "h", "h_max", "L", "output_dt",
                 "amplitude", "C1", "C2"}, {"window"}, set())


def _read_flat(path: str, keys) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path!r} not found")
    return enthalpy.parse_config(p.read_text(encoding="utf-8"), *keys)


def _cfg_params(cfg: dict) -> ModelParams:
    return validate(ModelParams(**{k: cfg[k] for k in ("d", "a", "b", "mu") if k in cfg}))


def _rel(man: RunManifest, path: Path) -> None:
    man.outputs.append(os.path.relpath(path, man.output_dir))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_cstar(args, man: RunManifest) -> int:
    prm = _params(args)
    opts = semiwave.DEFAULT_OPTIONS
    if args.tol is not None:
        if not args.tol > 0:
            raise ConfigError(f"--tol must be positive, got {args.tol}")
        opts = semiwave.ShootingOptions(tol_speed=args.tol)
    res = semiwave.compute_cstar(prm, opts)
    prof = semiwave.solve_profile(prm, res.c_star, opts)
    _rel(man, prof.to_csv(Path(man.output_dir) / "profile.csv"))
    man.summary = {"c_star": res.c_star, "residual": res.residual,
                   "iterations": res.iterations, "slope0": res.slope0}
    print(f"c_star={res.c_star!r}\nresidual={res.residual!r}\n"
          f"iterations={res.iterations}\nslope0={res.slope0!r}")
    return EXIT_OK


def cmd_semiwave(args, man: RunManifest) -> int:
    prm = _params(args)
    prof = semiwave.solve_profile(prm, args.k)
    _rel(man, prof.to_csv(Path(man.output_dir) / "profile.csv"))
    man.summary = {"k": args.k, "slope0": prof.slope0, "r_max": prof.r_max}
    print(f"k={args.k!r}\nslope0={prof.slope0!r}")
    return EXIT_OK


def _run_fb1d(cfg: dict, man: RunManifest) -> int:
    prm = _cfg_params(cfg)
    conf = fb1d.Front1DConfig(
        params=prm, w0=fb1d.default_initial_profile(prm, cfg.get("sigma0", 0.5)),
        orientation=cfg.get("orientation", "eqlow"), L=cfg.get("L"), h=cfg.get("h"),
        T=cfg.get("T", 100.0), output_dt=cfg.get("output_dt", 0.5), rho0=cfg.get("rho0"))
    traj = fb1d.run_front1d(conf)
    out = Path(man.output_dir)
    _rel(man, traj.to_csv(out / "trajectory.csv"))
    st = traj.final_state
    _rel(man, fb1d.write_snapshot_csv(out / "final_profile.csv", st.xi, st.values, st.t, st.rho))
    window = cfg.get("window", (conf.T / 2, conf.T))
    slope, intercept, rms = fb1d.estimate_speed(traj, window)
    man.summary = {"kind": "fb1d", "params": asdict(prm), "orientation": traj.orientation,
                   "speed": slope, "intercept": intercept, "rms": rms, "window": list(window),
                   "rho_T": float(st.rho)}
    print(f"speed={slope!r}\nrho_T={st.rho!r}")
    return EXIT_OK


def _radial_grid(cfg: dict) -> fbradial.RadialGrid:
    return fbradial.RadialGrid(h=cfg.get("h"), h_max=cfg.get("h_max"), L=cfg.get("L"),
                               output_dt=cfg.get("output_dt", 0.5))


def _run_radial_in(cfg: dict, man: RunManifest) -> int:
    prm = _cfg_params(cfg)
    N = int(cfg.get("N", 2))
    r0 = cfg.get("r0", 2.0 * fbradial.critical_radius(prm, N))
    v0 = fbradial.default_interior_data(prm, r0, cfg.get("amplitude"))
    T = cfg.get("T", 100.0)
    traj = fbradial.run_interior(prm, N, r0, v0, T=T, grid=_radial_grid(cfg))
    _rel(man, traj.to_csv(Path(man.output_dir) / "trajectory.csv"))
    window = cfg.get("window", (T / 2, T))
    slope, intercept, rms = fb1d.estimate_speed(
        fb1d.FrontTrajectory(traj.times, traj.fronts, np.empty(0)), window)
    man.summary = {"kind": "radial-in", "params": asdict(prm), "N": N, "r0": r0,
                   "front_T": float(traj.fronts[-1]), "speed": slope, "window": list(window)}
    print(f"front_T={float(traj.fronts[-1])!r}\nspeed={slope!r}")
    return EXIT_OK


def _run_radial_out(cfg: dict, man: RunManifest) -> int:
    prm = _cfg_params(cfg)
    N = int(cfg.get("N", 2))
    traj, cert = fbradial.run_exterior(prm, N, cfg.get("R0", 50.0), T=cfg.get("T", 1.0),
                                       grid=_radial_grid(cfg), C1=cfg.get("C1", 1.0),
                                       C2=cfg.get("C2", 1.0))
    out = Path(man.output_dir)
    _rel(man, traj.to_csv(out / "trajectory.csv"))
    (out / "certificate.txt").write_text(cert.to_text(), encoding="utf-8")
    _rel(man, out / "certificate.txt")
    man.summary = {"kind": "radial-out", "params": asdict(prm), "N": N, "h_T": cert.h_T,
                   "bound_ok": cert.bound_ok, "max_abs_hprime": cert.max_abs_hprime,
                   "C4": cert.C4, "speed_ok": cert.speed_ok}
    print(cert.to_text(), end="")
    return EXIT_OK


def _write_scenario_outputs(res: enthalpy.ScenarioResult, sc: enthalpy.Scenario,
                            man: RunManifest) -> None:
    out = Path(man.output_dir)
    proto = res.final
    for i, (t, u) in enumerate(zip(res.times, res.snapshots)):
        fld = enthalpy.EnthalpyField(enthalpy.alpha(u, sc.m, sc.params, proto.latent), proto.x_lo, proto.h,
                                     t, sc.params, sc.m, latent=proto.latent, u=u)
        _rel(man, enthalpy.write_snapshot(out / f"snap_{i:04d}.txt", fld))
    for i, (t, pts) in enumerate(zip(res.times, res.fronts)):
        _rel(man, enthalpy.write_front(out / f"front_{i:04d}.csv", t, pts))
    if res.ray_times:
        traj = res.ray_trajectory()
        _rel(man, traj.to_csv(out / "trajectory.csv"))


def _run_scenario(cfg_path: str, man: RunManifest, cauchy: bool) -> int:
    sc = enthalpy.load_scenario(cfg_path) if Path(cfg_path).is_file() else None
    if sc is None:
        raise ConfigError(f"config file {cfg_path!r} not found")
    summary = {"kind": "cauchy" if cauchy else "cone2d", "params": asdict(sc.params),
               "shape": sc.shape, "box": list(sc.box), "h": sc.h, "T": sc.T}
    if sc.cone is not None:
        summary.update(phi=sc.cone.phi, xi_inner=sc.xi_inner, xi_outer=sc.xi_outer)
    man.summary = summary
    try:
        res = enthalpy.run_scenario(sc, cauchy=cauchy)
    except MarginViolated as exc:
        if exc.partial is not None:
            _write_scenario_outputs(exc.partial, sc, man)
        raise
    _write_scenario_outputs(res, sc, man)
    summary["monitored_faces"] = list(res.monitored_faces)
    if res.ray_times:
        summary["ray_final"] = float(res.ray_positions[-1])
    print(f"snapshots={len(res.times)}\nt_final={res.final.t!r}")
    return EXIT_OK


def cmd_run(args, man: RunManifest) -> int:
    if args.kind in ("cone2d", "cauchy"):
        return _run_scenario(args.config, man, cauchy=args.kind == "cauchy")
    if args.kind == "fb1d":
        return _run_fb1d(_read_flat(args.config, _FB1D_KEYS), man)
    cfg = _read_flat(args.config, _RADIAL_KEYS)
    return _run_radial_in(cfg, man) if args.kind == "radial-in" else _run_radial_out(cfg, man)


def _write_report(man: RunManifest, text: str) -> None:
    path = Path(man.output_dir) / "report.txt"
    path.write_text(text, encoding="utf-8")
    _rel(man, path)
    print(text, end="")


def cmd_verify(args, man: RunManifest) -> int:
    prm = _params(args)
    plan = verify.SamplePlan(per_stratum=args.samples, h_fd=args.h_fd)
    if args.kind == "super":
        spec = verify.make_supersolution(prm, args.delta, R=args.R, phi=args.phi, N=args.N)
        rep = verify.check_supersolution(spec, plan)
        ok = rep.ok
        _write_report(man, rep.to_text())
    elif args.kind == "sub1d":
        rep = verify.check_subsolution_1d(prm, args.delta, plan)
        ok = rep.ok
        _write_report(man, rep.to_text())
    else:
        cases = verify.default_battery(prm)
        if args.case:
            known = {c.name for c in cases}
            unknown = [c for c in args.case if c not in known]
            if unknown:
                raise ConfigError(f"unknown battery case(s) {unknown}; known: {sorted(known)}")
            cases = [c for c in cases if c.name in args.case]
        rep = verify.comparison_battery(cases)
        ok = rep.ok
        _write_report(man, rep.to_text())
    man.summary = {"kind": args.kind, "pass": bool(ok)}
    return EXIT_OK if ok else EXIT_CHECK


# --------------------------------------------------------------------------
# plot data
# --------------------------------------------------------------------------

def _boundary_polylines(desc, extent, h: float) -> list:
    """Zero level set of ``desc.signed_distance`` sampled on a grid over ``extent``."""
    from skimage.measure import find_contours

    x = np.arange(extent[0], extent[1] + 0.5 * h, h)
    y = np.arange(extent[2], extent[3] + 0.5 * h, h)
    X, Y = np.meshgrid(x, y)
    sd = np.asarray(desc.signed_distance(np.stack([X, Y], axis=-1)))
    lines = []
    for c in sorted(find_contours(sd, 0.0), key=lambda c: (c[0, 1], c[0, 0])):
        lines.append(np.column_stack([x[0] + c[:, 1] * h, y[0] + c[:, 0] * h]))
    return lines


def cmd_plotdata(args, man: RunManifest) -> int:
    run_dir = Path(args.run_dir)
    src = run_dir / "manifest.json"
    if not src.is_file():
        raise ConfigError(f"no manifest.json in {str(run_dir)!r}")
    info = json.loads(src.read_text(encoding="utf-8"))
    summary = info.get("summary", {})
    kind = summary.get("kind")
    out = Path(man.output_dir)
    if kind == "fb1d":
        traj = fb1d.read_trajectory_csv(run_dir / "trajectory.csv")
        prm = ModelParams(**summary["params"])
        c = semiwave.compute_cstar(prm).c_star
        slope = summary["orientation"] * c
        t1, t2 = summary.get("window", (traj.times[-1] / 2, traj.times[-1]))
        sel = (traj.times >= t1) & (traj.times <= t2)
        intercept = float(np.mean(traj.rho_values[sel] - slope * traj.times[sel]))
        path = out / "rho_vs_pred.csv"
        with path.open("w", encoding="utf-8") as fh:
            fh.write("t,rho,pred\n")
            for t, r in zip(traj.times, traj.rho_values):
                fh.write(f"{t:.17g},{r:.17g},{slope * t + intercept:.17g}\n")
        _rel(man, path)
        man.summary = {"kind": kind, "c_star": c, "intercept": intercept}
        return EXIT_OK
    if kind == "cone2d" and "phi" in summary:
        prm = ModelParams(**summary["params"])
        c = semiwave.compute_cstar(prm).c_star
        cone = geometry.ConeSpec(summary["phi"], summary.get("xi_outer") or 0.0, 2)
        eps = 0.15 * c
        fronts = sorted(run_dir.glob("front_*.csv"))
        if not fronts:
            raise ConfigError(f"no front files in {str(run_dir)!r}")
        box = summary["box"]
        for fpath in fronts:
            with fpath.open(encoding="utf-8") as fh:
                t = float(fh.readline().split("t=", 1)[1])
            pts = np.loadtxt(fpath, delimiter=",", skiprows=2, ndmin=2)
            sw = geometry.cone_sandwich(cone, c, t, eps, summary.get("xi_inner"),
                                        summary.get("xi_outer"))
            path = out / f"overlay_{fpath.stem.split('_')[1]}.csv"
            with path.open("w", encoding="utf-8") as fh:
                fh.write(f"# t={t!r} c_star={c!r} epsilon={eps!r}\nkind,part,x,y\n")
                for p in pts:
                    fh.write(f"front,0,{p[0]:.17g},{p[1]:.17g}\n")
                for name, desc in (("inner", sw.inner), ("outer", sw.outer)):
                    for j, line in enumerate(_boundary_polylines(desc, box, summary["h"])):
                        for p in line:
                            fh.write(f"{name},{j},{p[0]:.17g},{p[1]:.17g}\n")
            _rel(man, path)
        man.summary = {"kind": kind, "c_star": c, "epsilon": eps, "frames": len(fronts)}
        return EXIT_OK
    raise ConfigError(f"plotdata does not handle runs of kind {kind!r}")


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _apply_threads() -> None:
    raw = os.environ.get("STEFANKPP_THREADS")
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"STEFANKPP_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"STEFANKPP_THREADS must be >= 1, got {n}")
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


_COMMANDS = {"cstar": cmd_cstar, "semiwave": cmd_semiwave, "run": cmd_run,
             "verify": cmd_verify, "plotdata": cmd_plotdata}


def _output_dir(args) -> str:
    if args.command == "run" and args.out is None:
        return str(Path(args.config).with_suffix("")) + "_out"
    if args.command == "plotdata" and args.out is None:
        return str(Path(args.run_dir) / "plots")
    return args.out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(_output_dir(args))
    if args.command == "plotdata" and not Path(args.run_dir).is_dir():
        print(f"error: {args.run_dir!r} is not a directory", file=sys.stderr)
        return EXIT_CONFIG
    out.mkdir(parents=True, exist_ok=True)
    config = getattr(args, "config", None) or getattr(args, "run_dir", None)
    man = RunManifest(f"{args.command} {getattr(args, 'kind', '')}".strip(), config, str(out),
                      defaults=_defaults())
    t0 = time.perf_counter()
    try:
        _apply_threads()
        code = _COMMANDS[args.command](args, man)
    except MarginViolated as exc:
        code, man.error, man.partial = EXIT_MARGIN, str(exc), True
    except _INPUT_ERRORS as exc:
        code, man.error = EXIT_CONFIG, str(exc)
    except StefanKPPError as exc:
        code, man.error, man.partial = EXIT_SOLVER, f"{type(exc).__name__}: {exc}", True
    man.wall_time = time.perf_counter() - t0
    man.exit_code = code
    man.status = "ok" if code == EXIT_OK else ("check_failed" if code == EXIT_CHECK else "error")
    man.write()
    if man.error:
        print(f"error: {man.error}", file=sys.stderr)
    return code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
