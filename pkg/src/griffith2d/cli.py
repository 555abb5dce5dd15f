"""Command-line entry points and run configuration.

Configs are flat INI files (sections of key = value pairs); the schema is
documented in the README and validated with per-key error locations.  A
simulate run writes, per time-grid level,

    <out>/level_<k>/config.ini     resolved configuration (self-contained)
    <out>/level_<k>/ledger.csv     one EnergyRecord row per grid node
    <out>/level_<k>/fields_XXXX.vtk  legacy ASCII VTK snapshot per node
    <out>/level_<k>/summary.jsonl  one JSON object per node

Exit codes: 0 success, 2 invalid configuration / missing inputs, 3 solver
failure, 4 hard stability-audit failure.  The environment variable
GRIFFITH2D_LOG sets the log level (debug, info, warning, ...).
"""

import argparse
import configparser
import logging
import os
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .auditor import competitor_suite
from .elasticity import ElasticityTensor
from .errors import ConfigError, ExponentOutOfRange, SolverDiverged
from .evolution import EvolutionParams, LoadProgram, nested_grids, run
from .mesh import build_rectangle_mesh, validate
from .phasefield import PhaseFieldParams
from .rigid_korn import (
    crack_partition,
    fit_component_motions,
    korn_diagnostic,
    merge_components,
)
from .runio import (
    read_ledger,
    read_vtk,
    write_korn_csv,
    write_ledger,
    write_stability_csv,
    write_summary,
    write_vtk,
)

log = logging.getLogger("griffith2d")

_SCHEMA = {
    "geometry": {
        "width": float,
        "height": float,
        "pad": float,
        "nx": int,
        "ny": int,
    },
    "material": {},  # lam/mu or voigt, handled specially
    "phasefield": {"ell": float},
    "load": {"mode": str},
    "time": {"n0": int, "levels": int},
}

_DEFAULTS = {
    ("material", "lam"): 1.0,
    ("material", "mu"): 1.0,
    ("phasefield", "eta"): 1e-6,
    ("phasefield", "kappa"): 1.0,
    ("solver", "tol_elastic"): 1e-10,
    ("solver", "tol_damage"): 1e-8,
    ("solver", "tol_am"): 1e-5,
    ("solver", "am_cap"): 200,
    ("run", "seed"): 0,
    ("run", "damage_threshold"): 0.9,
    ("run", "audit_times"): "",
}


@dataclass
class RunConfig:
    width: float
    height: float
    pad: float
    nx: int
    ny: int
    C: ElasticityTensor
    phase: PhaseFieldParams
    program: LoadProgram
    n0: int
    levels: int
    tol_elastic: float
    tol_damage: float
    tol_am: float
    am_cap: int
    seed: int
    damage_threshold: float
    audit_times: list

    def params(self):
        return EvolutionParams(
            phase=self.phase,
            tol_elastic=self.tol_elastic,
            tol_damage=self.tol_damage,
            tol_am=self.tol_am,
            am_cap=self.am_cap,
        )

    def build_mesh(self):
        return build_rectangle_mesh(self.width, self.height, self.pad, self.nx, self.ny)


def _float_list(raw):
    return [float(tok) for tok in raw.replace(",", " ").split()]


def parse_config(path):
    """Parse and validate an INI run configuration; raises ConfigError."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError([("file", f"cannot read config {path}")])

    errors = []

    def get(section, key, conv, default=None):
        if not cp.has_option(section, key):
            if default is not None or (section, key) in _DEFAULTS:
                return _DEFAULTS.get((section, key), default)
            errors.append((f"{section}.{key}", "missing required key"))
            return None
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except ValueError:
            errors.append((f"{section}.{key}", f"cannot parse {raw!r}"))
            return None

    for section in ("geometry", "phasefield", "load", "time"):
        if not cp.has_section(section):
            errors.append((section, "missing required section"))
    if errors:
        raise ConfigError(errors)

    geom = {k: get("geometry", k, conv) for k, conv in _SCHEMA["geometry"].items()}
    ell = get("phasefield", "ell", float)
    eta = get("phasefield", "eta", float)
    kappa = get("phasefield", "kappa", float)

    if cp.has_option("material", "voigt") if cp.has_section("material") else False:
        try:
            entries = _float_list(cp.get("material", "voigt"))
            if len(entries) != 6:
                raise ValueError
            c11, c12, c13, c22, c23, c33 = entries
            C = ElasticityTensor(
                np.array([[c11, c12, c13], [c12, c22, c23], [c13, c23, c33]])
            )
        except ValueError as exc:
            errors.append(("material.voigt", f"invalid stiffness: {exc}"))
            C = None
    else:
        lam = get("material", "lam", float) if cp.has_section("material") else 1.0
        mu = get("material", "mu", float) if cp.has_section("material") else 1.0
        try:
            C = ElasticityTensor.from_lame(lam, mu)
        except (TypeError, ValueError) as exc:
            errors.append(("material", str(exc)))
            C = None

    mode = get("load", "mode", str)
    times = amps = None
    try:
        times = _float_list(cp.get("load", "times"))
    except (configparser.NoOptionError, ValueError):
        errors.append(("load.times", "missing or unparsable sample times"))
    try:
        amps = _float_list(cp.get("load", "amplitudes"))
    except (configparser.NoOptionError, ValueError):
        errors.append(("load.amplitudes", "missing or unparsable amplitudes"))

    n0 = get("time", "n0", int)
    levels = get("time", "levels", int)
    tol_elastic = get("solver", "tol_elastic", float)
    tol_damage = get("solver", "tol_damage", float)
    tol_am = get("solver", "tol_am", float)
    am_cap = get("solver", "am_cap", int)
    seed = get("run", "seed", int)
    threshold = get("run", "damage_threshold", float)
    audit_raw = get("run", "audit_times", str)

    if errors:
        raise ConfigError(errors)

    try:
        phase = PhaseFieldParams(ell=ell, eta=eta, kappa=kappa)
    except ValueError as exc:
        raise ConfigError([("phasefield", str(exc))]) from None
    try:
        program = LoadProgram(mode=mode, times=times, amplitudes=amps)
    except ValueError as exc:
        raise ConfigError([("load", str(exc))]) from None
    if geom["width"] is None or any(v is None for v in geom.values()):
        raise ConfigError([("geometry", "incomplete")])
    if n0 < 1 or levels < 1:
        raise ConfigError([("time", f"need n0 >= 1 and levels >= 1, got ({n0}, {levels})")])

    return RunConfig(
        width=geom["width"],
        height=geom["height"],
        pad=geom["pad"],
        nx=geom["nx"],
        ny=geom["ny"],
        C=C,
        phase=phase,
        program=program,
        n0=n0,
        levels=levels,
        tol_elastic=tol_elastic,
        tol_damage=tol_damage,
        tol_am=tol_am,
        am_cap=am_cap,
        seed=seed,
        damage_threshold=threshold,
        audit_times=_float_list(audit_raw) if audit_raw else [],
    )


def cmd_simulate(args):
    try:
        cfg = parse_config(args.config)
        mesh = cfg.build_mesh()
        violations = validate(mesh)
        if violations:
            raise ConfigError(
                [("geometry", f"{v.invariant} at {v.entity}") for v in violations]
            )
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = cfg.params()
    grids = nested_grids(cfg.program.T, cfg.n0, cfg.levels)
    for level, grid in enumerate(grids):
        level_dir = out / f"level_{level}"
        level_dir.mkdir(parents=True, exist_ok=True)
        try:
            states, records = run(mesh, cfg.C, cfg.program, grid, params)
        except SolverDiverged as exc:
            print(f"level {level}: solver failure: {exc}", file=sys.stderr)
            return 3
        write_ledger(level_dir / "ledger.csv", records)
        entries = []
        for k, (state, rec) in enumerate(zip(states, records)):
            part = crack_partition(mesh, state.alpha, cfg.damage_threshold)
            write_vtk(
                level_dir / f"fields_{k:04d}.vtk",
                mesh,
                state.u,
                state.alpha,
                labels=part.labels,
            )
            entries.append(
                {
                    "level": level,
                    "k": k,
                    "t": rec.t,
                    "amplitude": cfg.program.amplitude_at(rec.t),
                    "elastic": rec.elastic,
                    "surface": rec.surface,
                    "total": rec.total,
                    "work_cum": rec.work_cum,
                    "balance_residual": rec.balance_residual,
                    "am_iters": rec.am_iters,
                    "fallback_used": bool(rec.fallback_used),
                    "components": int(part.num_components - 1),
                }
            )
        write_summary(level_dir / "summary.jsonl", entries)
        cp_dst = level_dir / "config.ini"
        shutil.copyfile(args.config, cp_dst)
        with open(cp_dst, "a") as fh:
            fh.write(f"\n[meta]\nlevel = {level}\n")
        log.info(
            "level %d: %d steps, final residual %.3e",
            level,
            len(grid.nodes) - 1,
            records[-1].balance_residual,
        )
    return 0


def _load_level(traj_dir):
    traj = Path(traj_dir)
    cfg_path = traj / "config.ini"
    if not cfg_path.exists():
        raise FileNotFoundError(f"no config.ini under {traj_dir}")
    cfg = parse_config(cfg_path)
    cp = configparser.ConfigParser()
    cp.read(cfg_path)
    level = cp.getint("meta", "level", fallback=0)
    grid = nested_grids(cfg.program.T, cfg.n0, cfg.levels)[level]
    return cfg, grid, traj


def _match_node(grid, t):
    idx = int(np.argmin(np.abs(grid.nodes - t)))
    if abs(grid.nodes[idx] - t) > 1e-9 * max(1.0, grid.nodes[-1]):
        return None
    return idx


def cmd_audit(args):
    try:
        cfg, grid, traj = _load_level(args.traj)
    except (FileNotFoundError, ConfigError) as exc:
        print(exc, file=sys.stderr)
        return 2
    times = _float_list(args.times) if args.times else cfg.audit_times
    if not times:
        print("no audit times given (--times or [run] audit_times)", file=sys.stderr)
        return 2
    mesh = cfg.build_mesh()
    params = cfg.params()
    reports = []
    for t in times:
        k = _match_node(grid, t)
        snap = traj / f"fields_{k:04d}.vtk" if k is not None else None
        if k is None or not snap.exists():
            print(f"no snapshot at t = {t:g} under {traj}", file=sys.stderr)
            return 2
        _, u, alpha = read_vtk(snap)
        if k > 0:
            _, _, alpha_prev = read_vtk(traj / f"fields_{k - 1:04d}.vtk")
        else:
            alpha_prev = np.zeros(mesh.num_vertices)
        from .evolution import State

        state = State(u=u, alpha=alpha, t=float(grid.nodes[k]))
        g1 = cfg.program.mode_field(mesh)
        g_field = cfg.program.amplitude_at(state.t) * g1
        reports.append(
            competitor_suite(
                mesh,
                cfg.C,
                state,
                alpha_prev,
                params,
                g_field=g_field,
                seed=cfg.seed,
                threshold=cfg.damage_threshold,
            )
        )
    write_stability_csv(traj / "stability_report.csv", reports)
    failed = [rep.t for rep in reports if rep.hard_failed]
    if failed:
        print(f"hard stability margin failed at t = {failed}", file=sys.stderr)
        return 4
    return 0


def cmd_korn(args):
    if not (1.0 <= args.p < 2.0):
        print(f"exponent p must lie in [1, 2), got {args.p}", file=sys.stderr)
        return 2
    try:
        cfg, grid, traj = _load_level(args.traj)
    except (FileNotFoundError, ConfigError) as exc:
        print(exc, file=sys.stderr)
        return 2
    k = _match_node(grid, args.time)
    snap = traj / f"fields_{k:04d}.vtk" if k is not None else None
    if k is None or not snap.exists():
        print(f"no snapshot at t = {args.time:g} under {traj}", file=sys.stderr)
        return 2
    mesh = cfg.build_mesh()
    _, u, alpha = read_vtk(snap)
    part = crack_partition(mesh, alpha, args.threshold)
    motions = fit_component_motions(mesh, u, part)
    if args.closeness > 0:
        part = merge_components(part, motions, args.closeness)
        motions = fit_component_motions(mesh, u, part)
    try:
        report = korn_diagnostic(mesh, u, part, motions, p=args.p)
    except ExponentOutOfRange as exc:
        print(exc, file=sys.stderr)
        return 2
    write_korn_csv(traj / "korn_report.csv", part, report, args.p)
    log.info(
        "components: %d, sup|v| = %.3e, |e(u)| = %.3e",
        part.num_components - 1,
        report.sup_norm_v,
        report.e_norm,
    )
    return 0


def main(argv=None):
    level = os.environ.get("GRIFFITH2D_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))

    parser = argparse.ArgumentParser(
        prog="griffith2d",
        description="Quasistatic brittle-fracture simulation and diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the evolution over all grid levels")
    p_sim.add_argument("--config", required=True, help="INI run configuration")
    p_sim.add_argument("--out", default="out", help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_audit = sub.add_parser("audit", help="stability audit of stored snapshots")
    p_audit.add_argument("--traj", required=True, help="a level_<k> output directory")
    p_audit.add_argument("--times", default="", help="comma/space separated times")
    p_audit.set_defaults(func=cmd_audit)

    p_korn = sub.add_parser("korn", help="partition / rigid-motion diagnostics")
    p_korn.add_argument("--traj", required=True, help="a level_<k> output directory")
    p_korn.add_argument("--time", type=float, required=True)
    p_korn.add_argument("--threshold", type=float, default=0.9)
    p_korn.add_argument("--closeness", type=float, default=0.0)
    p_korn.add_argument("--p", type=float, default=1.5)
    p_korn.set_defaults(func=cmd_korn)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
