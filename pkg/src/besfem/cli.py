"""``besfem`` command line: run either model, compare series, make weather, validate.

Exit codes
----------
0 success
1 configuration error (bad or missing config file)
2 weather error (bad or missing weather file)
3 numeric failure (unstable wall fit, zone or CG breakdown)
4 mesh resolution does not divide the wall thickness
5 series files misaligned or unreadable
6 one or more validation checks failed
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, fem, report, scenario, validation, walls
from .model import Config, ConfigError, default_config, load_config
from .weather import WeatherError, parse_weather, synth_weather, write_weather
from .zone import ZoneError

EXIT_OK, EXIT_CONFIG, EXIT_WEATHER, EXIT_NUMERIC, EXIT_MESH, EXIT_SERIES, EXIT_VALIDATE = range(7)


def _err(msg: str) -> None:
    print(f"besfem: error: {msg}", file=sys.stderr)


def _config(path: str | None) -> Config:
    if path is None:
        return default_config()
    if not Path(path).is_file():
        raise ConfigError(f"config file not found: {path}")
    return load_config(path)


def _weather(cfg: Config, path: str | None):
    if path is None:
        s = cfg.simulation
        return synth_weather(s.days, s.T_mean, s.T_amp_daily, s.I_peak, s.start)
    if not Path(path).is_file():
        raise WeatherError(f"weather file not found: {path}")
    return parse_weather(path)


def _pole_report(cfg: Config) -> str:
    lines = ["pole report:"]
    h_e = cfg.zone.surface_coeffs.h_e
    for part in cfg.zone.envelope:
        try:
            rf = walls.fit_response_factors(part, h_e)
            lines.append(f"  {part.id}: |p| = " + ", ".join(f"{m:.4f}" for m in rf.pole_moduli()))
        except walls.UnstablePolesError as exc:
            lines.append(f"  {part.id}: UNSTABLE |p| = " + ", ".join(f"{m:.4f}" for m in exc.moduli))
        except walls.FitError as exc:
            lines.append(f"  {part.id}: fit failed ({exc})")
    return "\n".join(lines)


def _parse_probe(text: str) -> tuple[float, float, float]:
    try:
        x, y, z = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"probe must be 'x,y,z', got {text!r}") from None
    return x, y, z


def cmd_run_bes(args) -> int:
    cfg = _config(args.config)
    weather = _weather(cfg, args.weather)
    try:
        series = scenario.run_bes(cfg, weather)
    except walls.FitError as exc:
        _err(f"wall fit failed: {exc}\n{_pole_report(cfg)}")
        return EXIT_NUMERIC
    report.write_series(args.out, report.bes_columns(series))
    return EXIT_OK


def cmd_run_fem(args) -> int:
    cfg = _config(args.config)
    weather = _weather(cfg, args.weather)
    n = args.mesh if args.mesh is not None else cfg.simulation.mesh_n
    system = scenario.build_fem_system(cfg, n)
    snaps = [int(h) for h in args.snapshot_hours.split(",")] if args.snapshot_hours else []
    series = scenario.run_fem(cfg, weather, n, system=system, probes=args.probe or None,
                              snapshot_hours=snaps)
    report.write_series(args.out, report.fem_columns(series))
    if args.vtk_dir:
        out = Path(args.vtk_dir)
        out.mkdir(parents=True, exist_ok=True)
        for hour, field in sorted(series.snapshots.items()):
            fem.write_vtk(out / f"T_{hour:05d}.vtk", system.mesh, field)
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        a = report.read_series(args.series_a)
        b = report.read_series(args.series_b)
        report.align(a["hour"], b["hour"])
        m = report.comparison_metrics(
            report.pick_temperature(a, args.column_a),
            report.pick_temperature(b, args.column_b),
            args.warmup,
        )
    except (OSError, report.SeriesError) as exc:
        _err(str(exc))
        return EXIT_SERIES
    text = m.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gen_weather(args) -> int:
    s = _config(args.config).simulation
    series = synth_weather(
        args.days if args.days is not None else s.days,
        args.T_mean if args.T_mean is not None else s.T_mean,
        args.T_amp if args.T_amp is not None else s.T_amp_daily,
        args.I_peak if args.I_peak is not None else s.I_peak,
        args.start if args.start is not None else s.start,
    )
    write_weather(series, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    results = validation.run_checks(perturb_u_identity=args.perturb_u_identity)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    if args.out_dir:
        validation.dump_wall_reports(_config(args.config), args.out_dir)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VALIDATE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="besfem", description="Zone network and FEM box thermal simulation.")
    p.add_argument("--version", action="version", version=f"besfem {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp):
        sp.add_argument("--config", help="INI configuration (default: built-in test box)")
        sp.add_argument("--weather", help="hourly weather CSV (default: synthetic from [simulation])")
        sp.add_argument("--out", required=True, help="output series CSV")

    sp = sub.add_parser("run-bes", help="run the lumped zone model")
    model_args(sp)
    sp.set_defaults(func=cmd_run_bes)

    sp = sub.add_parser("run-fem", help="run the 3D FEM box model")
    model_args(sp)
    sp.add_argument("--mesh", type=int, help="cells per box edge (default: mesh_n)")
    sp.add_argument("--probe", type=_parse_probe, action="append", help="probe point x,y,z in m (repeatable)")
    sp.add_argument("--snapshot-hours", help="comma-separated hours to keep full fields for")
    sp.add_argument("--vtk-dir", help="write snapshot fields as legacy VTK files here")
    sp.set_defaults(func=cmd_run_fem)

    sp = sub.add_parser("compare", help="comparison metrics of two series files")
    sp.add_argument("series_a")
    sp.add_argument("series_b")
    sp.add_argument("--warmup", type=int, default=72, help="leading hours to discard (default 72)")
    sp.add_argument("--column-a", help="temperature column of A (default T_a / T_mean_core)")
    sp.add_argument("--column-b", help="temperature column of B")
    sp.add_argument("--out", help="metrics JSON (default: stdout)")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("gen-weather", help="write a synthetic weather CSV")
    sp.add_argument("--config", help="take defaults from this config's [simulation]")
    sp.add_argument("--days", type=int)
    sp.add_argument("--T-mean", dest="T_mean", type=float)
    sp.add_argument("--T-amp", dest="T_amp", type=float)
    sp.add_argument("--I-peak", dest="I_peak", type=float)
    sp.add_argument("--start", help="first timestamp, e.g. 2023-01-01T00:00Z")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen_weather)

    sp = sub.add_parser("validate", help="run the built-in property checks")
    sp.add_argument("--config", help="config whose walls are reported with --out-dir")
    sp.add_argument("--out-dir", help="write admittance sweeps and fitted coefficients per wall")
    sp.add_argument("--perturb-u-identity", action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except WeatherError as exc:
        _err(str(exc))
        return EXIT_WEATHER
    except fem.MeshError as exc:
        _err(str(exc))
        return EXIT_MESH
    except scenario.ScenarioError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (walls.FitError, ZoneError, fem.CGError, np.linalg.LinAlgError) as exc:
        _err(f"numeric failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
