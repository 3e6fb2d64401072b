"""Command-line entry point.

Every subcommand writes its artifacts to ``--out`` and prints a report
summary. Exit codes: 0 success, 1 a check failed, 2 usage or input error.

Options may also come from ``--config FILE`` holding ``key = value`` lines,
where keys are option names without leading dashes (``tau-max = 30``,
``grid = -2 2 -2 2 201 201``). Command-line flags win over the file, the file
wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .core import (
    CheckResult,
    FlowConfig,
    GridSpec,
    RunReport,
    SDFMError,
    four_point_example,
    load_atoms,
    random_atoms,
    ten_atom_example,
)
from .flow import integrate_forward, tessellate
from .io import emit_raster, write_labels_csv, write_trajectory_csv, write_weights_csv
from .ot import solve_weights, tessellate_laguerre
from .topology import adjacency, connected_components, hole_count, star_shape_check
from .velocity import softmax_weights, velocity


class UsageError(Exception):
    pass


def parse_atoms(source: str):
    """fourpoint | tenpoint | random:SEED:N[:D] | path to an atom file."""
    if source == "fourpoint":
        return four_point_example()
    if source == "tenpoint":
        return ten_atom_example()
    if source.startswith("random:"):
        parts = source.split(":")[1:]
        if len(parts) not in (2, 3):
            raise UsageError("random atoms take the form random:SEED:N[:D]")
        try:
            nums = [int(p) for p in parts]
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        return random_atoms(*nums)
    if not Path(source).is_file():
        raise UsageError(f"no atom file {source!r}")
    return load_atoms(source)


def read_config(path) -> dict:
    out = {}
    for num, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(sub: argparse.ArgumentParser, values: dict) -> None:
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        act = actions.get(key)
        if act is None or key in ("help", "config"):
            continue
        if act.nargs in (None, "?") and act.const is None:
            conv = act.type or str
            defaults[key] = conv(raw)
        elif act.const is not None and act.nargs == 0:
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            conv = act.type or str
            defaults[key] = [conv(v) for v in raw.split()]
    sub.set_defaults(**defaults)


def _flow_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.0, help="mixture width; 0 selects the exact field")
    p.add_argument("--tau-max", type=float, default=40.0)
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--abs-tol", type=float, default=1e-12)
    p.add_argument("--capture-alpha", type=float, default=1e-12)
    p.add_argument("--max-steps", type=int, default=100_000)


def _common(p: argparse.ArgumentParser, atoms: str | None = "fourpoint", grid=(-3, 3, -3, 3, 401, 401)) -> None:
    p.add_argument("--config", help="file of 'key = value' option defaults")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--no-raster", action="store_true")
    p.add_argument("--no-csv", action="store_true")
    p.add_argument("--no-report", action="store_true")
    if atoms is not None:
        p.add_argument("--atoms", default=atoms, help="fourpoint, tenpoint, random:SEED:N[:D] or an atom file")
    if grid is not None:
        p.add_argument("--grid", nargs=6, type=float, default=list(grid), metavar=("XLO", "XHI", "YLO", "YHI", "NX", "NY"))
    _flow_args(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdfm", description="Terminal assignment cells of semi-discrete flow matching.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("cells", help="rasterize the terminal assignment cells")
    _common(p)
    p.add_argument("--laguerre", action="store_true", help="also solve and rasterize the Laguerre cells")
    p.add_argument("--seed", type=int, default=0)

    p = subs.add_parser("laguerre", help="solve the semi-discrete transport weights")
    _common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-samples", type=int, default=200_000)
    p.add_argument("--tol", type=float, default=1e-3)

    p = subs.add_parser("eps-sweep", help="agreement of mixture-smoothed cells with the exact cells")
    _common(p, atoms="tenpoint", grid=(-3, 3, -3, 3, 201, 201))
    p.add_argument("--eps", nargs="+", type=float, default=[0.75, 0.5, 0.2, 0.05])
    p.add_argument("--seed", type=int, default=0)

    p = subs.add_parser("centers", help="backward images of each atom along dyadic times")
    _common(p, atoms="tenpoint", grid=None)
    p.add_argument("--levels", type=int, default=20)

    p = subs.add_parser("counterexample", help="four-point structural checks")
    _common(p, atoms=None, grid=(-1.5, 1.5, -1.5, 1.5, 400, 400))
    p.add_argument("--seed", type=int, default=0)

    p = subs.add_parser("monotonicity", help="monotonicity failures of the terminal maps")
    _common(p, atoms=None, grid=(-2, 2, -2, 2, 81, 81))
    p.add_argument("--scan-epsilon", type=float, default=0.1)
    p.add_argument("--fd-step", type=float, default=1e-4)

    p = subs.add_parser("scaling", help="cells under scaling, rotation and shift of the atoms")
    _common(p, atoms="tenpoint", grid=(-3, 3, -3, 3, 201, 201))
    p.add_argument("--scales", nargs="+", type=float, default=[0.1, 0.5, 1.5])
    p.add_argument("--seed", type=int, default=0)

    p = subs.add_parser("velocity-eval", help="velocity, weights and optionally the path of one point")
    _common(p, grid=None)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--point", nargs="+", type=float, required=True)
    p.add_argument("--trajectory", action="store_true", help="also integrate the point and write trajectory.csv")
    return parser


def _grid(vals) -> GridSpec:
    xlo, xhi, ylo, yhi, nx, ny = vals
    if nx != int(nx) or ny != int(ny):
        raise UsageError("grid resolutions must be integers")
    try:
        return GridSpec((xlo, ylo), (xhi, yhi), int(nx), int(ny))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _flow_config(a) -> FlowConfig:
    try:
        return FlowConfig(epsilon=a.epsilon, tau_max=a.tau_max, rel_tol=a.rel_tol, abs_tol=a.abs_tol,
                          capture_alpha=a.capture_alpha, max_steps=a.max_steps)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _cell_values(field_, atoms) -> dict:
    ks = range(1, field_.n + 1)
    return {
        "resolved_fraction": field_.resolved_fraction(),
        "components": [connected_components(field_, k) for k in ks],
        "holes": [hole_count(field_, k) for k in ks],
        "adjacency": sorted(adjacency(field_)),
        "star_shape_violations": star_shape_check(field_, atoms) if atoms.dim == 2 else {},
        "note": "topology at grid resolution",
    }


def cmd_cells(a, out: Path, report: RunReport) -> None:
    atoms = parse_atoms(a.atoms)
    if atoms.dim != 2:
        raise UsageError("cells rasterizes 2D atom sets only")
    grid = _grid(a.grid)
    cfg = _flow_config(a)
    fm = tessellate(atoms, grid, cfg)
    report.values["fm"] = _cell_values(fm, atoms)
    if not a.no_raster:
        emit_raster(fm, out / "fm_cells.pgm")
    if not a.no_csv:
        write_labels_csv(fm, out / "labels.csv")
    if a.laguerre:
        w = solve_weights(atoms, seed=a.seed)
        lag = tessellate_laguerre(atoms, w.psi, grid)
        report.values["laguerre"] = _cell_values(lag, atoms) | {"psi": w.psi, "masses": w.masses}
        report.checks.append(CheckResult("Laguerre weights converged", w.converged, w.residual, 1e-3,
                                            f"{w.iterations} iterations"))
        if not a.no_raster:
            emit_raster(lag, out / "ot_cells.pgm")
        if not a.no_csv:
            write_labels_csv(lag, out / "ot_labels.csv")
            write_weights_csv(w, out / "weights.csv")


def cmd_laguerre(a, out: Path, report: RunReport) -> None:
    atoms = parse_atoms(a.atoms)
    try:
        w = solve_weights(atoms, mc_samples=a.mc_samples, seed=a.seed, tol=a.tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report.values.update(psi=w.psi, masses=w.masses, iterations=w.iterations, residual=w.residual)
    report.checks.append(CheckResult("Laguerre weights converged", w.converged, w.residual, a.tol,
                                        f"{w.iterations} iterations, {w.mc_samples} samples"))
    if not a.no_csv:
        write_weights_csv(w, out / "weights.csv")
    if atoms.dim == 2:
        lag = tessellate_laguerre(atoms, w.psi, _grid(a.grid))
        if not a.no_raster:
            emit_raster(lag, out / "ot_cells.pgm")
        if not a.no_csv:
            write_labels_csv(lag, out / "labels.csv")


def cmd_eps_sweep(a, out: Path, report: RunReport) -> None:
    atoms = parse_atoms(a.atoms)
    if atoms.dim != 2:
        raise UsageError("eps-sweep rasterizes 2D atom sets only")
    try:
        sweep = ex.eps_sweep(atoms, _grid(a.grid), _flow_config(a), a.eps, seed=a.seed, keep_fields=True)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report.values.update(eps=sweep.eps, agreement=sweep.agreement, probe_distances=sweep.probe_distances,
                         monotone_probe_fraction=sweep.monotone_fraction)
    report.checks.append(CheckResult("agreement nondecreasing as eps shrinks", sweep.nondecreasing,
                                        sweep.agreement, None, f"eps={sweep.eps}"))
    report.checks.append(CheckResult("agreement at smallest eps", sweep.agreement[-1] >= 0.99,
                                        sweep.agreement[-1], 0.99, f"eps={sweep.eps[-1]}"))
    for e, f in sweep.fields.items():
        if not a.no_raster:
            emit_raster(f, out / f"fm_eps_{e:g}.pgm")
        if not a.no_csv:
            write_labels_csv(f, out / f"labels_eps_{e:g}.csv")


def cmd_centers(a, out: Path, report: RunReport) -> None:
    atoms = parse_atoms(a.atoms)
    check, curves, limits = ex.centers_check(atoms, _flow_config(a), a.levels)
    report.checks.append(check)
    report.values.update(limits=[c.limit for c in curves], limit_labels=limits,
                         arc_lengths=[c.arc_length for c in curves])
    if not a.no_csv:
        with open(out / "centers.csv", "w") as fh:
            fh.write("k,t," + ",".join(f"x{j}" for j in range(atoms.dim)) + "\n")
            for c in curves:
                for t, p in zip(c.times, c.points):
                    fh.write(f"{c.k},{t!r}," + ",".join(repr(float(v)) for v in p) + "\n")


def cmd_counterexample(a, out: Path, report: RunReport) -> None:
    fields: dict = {}
    report.checks.extend(ex.counterexample_suite(_flow_config(a), _grid(a.grid), laguerre_seed=a.seed, fields=fields))
    report.values["psi"] = fields["weights"].psi
    if not a.no_raster:
        emit_raster(fields["fm"], out / "fm_cells.pgm")
        emit_raster(fields["laguerre"], out / "ot_cells.pgm")
    if not a.no_csv:
        write_labels_csv(fields["fm"], out / "labels.csv")
        write_weights_csv(fields["weights"], out / "weights.csv")


def cmd_monotonicity(a, out: Path, report: RunReport) -> None:
    atoms = four_point_example()
    cfg = _flow_config(a)
    grid = _grid(a.grid)
    report.checks.append(ex.four_point_monotonicity_pair(cfg))
    scan = ex.gmm_eigen_scan(atoms, a.scan_epsilon, grid, a.fd_step)
    report.checks.append(ex.monotonicity_scan_gmm(atoms, a.scan_epsilon, grid, a.fd_step, scan=scan))
    smooth = tessellate(atoms, grid, cfg.replace(epsilon=a.scan_epsilon))
    report.checks.append(ex.minimizer_near_boundary(scan, smooth))
    probes = np.random.default_rng(0).uniform(grid.lo[0], grid.hi[0], (30, 2))
    report.checks.append(ex.rotational_symmetry_gap(atoms, a.scan_epsilon, probes, fd_step=a.fd_step))
    field_min = ex.monotonicity_field(atoms, grid, cfg)
    report.values.update(min_eigenvalue=float(scan.min_eig.min()), exact_field_min=float(field_min.min()))
    if not a.no_csv:
        pts = grid.points()
        with open(out / "monotonicity.csv", "w") as fh:
            fh.write("i,j,x,y,min_eig_mixture,min_pair_exact\n")
            for i in range(grid.nx):
                for j in range(grid.ny):
                    fh.write(f"{i},{j},{pts[i, j, 0]!r},{pts[i, j, 1]!r},{scan.min_eig[i, j]!r},{field_min[i, j]!r}\n")


def cmd_scaling(a, out: Path, report: RunReport) -> None:
    atoms = parse_atoms(a.atoms)
    if atoms.dim != 2:
        raise UsageError("scaling rasterizes 2D atom sets only")
    cfg = _flow_config(a)
    grid = _grid(a.grid)
    report.checks.append(ex.scaling_check(atoms, grid, a.scales, cfg))
    probes = np.random.default_rng(a.seed).standard_normal((50, 2))
    report.checks.append(ex.check_equivariance(atoms, cfg, 2.0, ex.rotation(math.pi / 2), [1.0, 1.0], probes))
    if not a.no_raster:
        for c in [1.0] + list(a.scales):
            emit_raster(tessellate(atoms.transformed(c), grid, cfg), out / f"fm_scale_{c:g}.pgm")


def cmd_velocity_eval(a, out: Path, report: RunReport) -> None:
    atoms = parse_atoms(a.atoms)
    x = np.array(a.point)
    if len(x) != atoms.dim:
        raise UsageError(f"point has {len(x)} coordinates, atoms have {atoms.dim}")
    cfg = _flow_config(a)
    report.values.update(t=a.t, point=x, velocity=velocity(a.t, x, atoms, cfg.epsilon),
                         weights=softmax_weights(a.t, x, atoms, cfg.epsilon))
    print(json.dumps({k: np.asarray(v).tolist() for k, v in report.values.items()}))
    if a.trajectory:
        traj = integrate_forward(x, atoms, cfg)
        report.values.update(captured_by=traj.captured_by, terminal=traj.terminal, path_length=traj.length)
        if not a.no_csv:
            write_trajectory_csv(traj, out / "trajectory.csv")


COMMANDS = {
    "cells": cmd_cells,
    "laguerre": cmd_laguerre,
    "eps-sweep": cmd_eps_sweep,
    "centers": cmd_centers,
    "counterexample": cmd_counterexample,
    "monotonicity": cmd_monotonicity,
    "scaling": cmd_scaling,
    "velocity-eval": cmd_velocity_eval,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            values = read_config(known.config)
            subs = next(act for act in parser._actions if isinstance(act, argparse._SubParsersAction))
            for sub in subs.choices.values():
                _apply_config(sub, values)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    except (UsageError, OSError, ValueError) as exc:
        print(f"sdfm: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"sdfm: cannot create {out}: {exc}", file=sys.stderr)
        return 2
    config = {k: v for k, v in vars(args).items() if k != "command"}
    report = RunReport(args.command, config)
    start = time.perf_counter()
    try:
        COMMANDS[args.command](args, out, report)
    except (UsageError, SDFMError) as exc:
        print(f"sdfm: {exc}", file=sys.stderr)
        return 2
    report.wall_time = time.perf_counter() - start
    if not args.no_report:
        report.save(out / "report.json")
    print(report.summary())
    return 0 if report.passed else 1


def main() -> None:
    sys.exit(run())
