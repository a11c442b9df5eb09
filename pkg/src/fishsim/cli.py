"""Command-line experiment runner.

Subcommands mirror the library harness: `simulate` (one open-loop run),
`sweep` (frequency or baseline-modulus parameter sweep), `convergence`
(Ritz basis refinement study), and `track` (closed-loop speed tracking).
Every command accepts --config/--out/--plot/--duration; results are CSV and
JSON files, plus SVG figures when --plot is given. On failure the process
exits nonzero after printing a single machine-readable JSON error object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, build_model, config_hash, default_config, load_config
from .harness import convergence_study, metrics, run_simulation, sweep, track
from .integrators import IntegrationError


def _parse_values(text: str) -> list:
    """Parse 'a:b:step' ranges or comma-separated value lists."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be a:b:step, got {text!r}")
        a, b, step = (float(p) for p in parts)
        if step <= 0 or b < a:
            raise ValueError(f"range must satisfy a <= b with step > 0, got {text!r}")
        n = int(round((b - a) / step))
        values = [a + k * step for k in range(n + 1)]
        if values[-1] > b + 1e-12:
            values.pop()
        return values
    return [float(v) for v in text.split(",") if v.strip()]


def _load(args):
    if args.config:
        return load_config(args.config)
    return default_config()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    from . import export

    cfg = _load(args)
    out = _out_dir(args)
    traj, mets = run_simulation(cfg, "open-loop", duration=args.duration)
    export.write_trajectory_csv(traj, out / "trajectory.csv")
    export.write_json({**mets.as_dict(), "config_hash": traj.config_hash,
                       "solver_stats": traj.solver_stats}, out / "metrics.json")
    if args.plot:
        model = build_model(cfg)
        export.plot_speed(traj, out / "speed.svg")
        export.plot_timelapse(traj, model, out / "timelapse.svg")
    print(f"wrote {out / 'trajectory.csv'} ({len(traj.times)} samples), "
          f"steady speed {mets.steady_speed:.4f} m/s")
    return 0


def _cmd_sweep(args) -> int:
    from . import export

    cfg = _load(args)
    out = _out_dir(args)
    param = args.param.replace("-", "_")
    values = _parse_values(args.values)
    rows = sweep(cfg, param, values, duration=args.duration,
                 max_workers=args.workers)
    table = [[r.value, r.steady_speed, r.cot, r.status] for r in rows]
    export.write_table_csv(["value", "steady_speed", "cot", "status"], table,
                           out / f"sweep_{param}.csv")
    for r in rows:
        if r.trajectory is not None:
            export.write_trajectory_csv(
                r.trajectory, out / f"traj_{param}_{r.value:g}.csv")
    if args.plot:
        ok = [r for r in rows if r.status == "ok"]
        export.plot_sweep([r.value for r in ok], [r.steady_speed for r in ok],
                          [r.cot for r in ok], param, out / f"sweep_{param}.svg")
    best = max((r for r in rows if r.status == "ok"),
               key=lambda r: r.steady_speed, default=None)
    if best is not None:
        print(f"wrote {out / f'sweep_{param}.csv'}; fastest at "
              f"{param}={best.value:g} ({best.steady_speed:.4f} m/s)")
    else:
        print(f"wrote {out / f'sweep_{param}.csv'}; all runs failed")
    return 0


def _cmd_convergence(args) -> int:
    from . import export

    cfg = _load(args)
    out = _out_dir(args)
    lo, hi = (int(v) for v in args.modes.split(":"))
    rows = convergence_study(cfg, range(lo, hi + 1), duration=args.duration)
    table = [[r.n_modes, r.deviation, r.wall_time, r.status] for r in rows]
    export.write_table_csv(["ritz_modes", "deviation", "wall_time_s", "status"],
                           table, out / "convergence.csv")
    for r in rows:
        if r.trajectory is not None:
            export.write_trajectory_csv(r.trajectory,
                                        out / f"traj_modes_{r.n_modes}.csv")
    if args.plot:
        ok = [r for r in rows if r.status == "ok"]
        export.plot_convergence([r.n_modes for r in ok],
                                [r.deviation for r in ok],
                                [r.wall_time for r in ok],
                                out / "convergence.svg")
    print(f"wrote {out / 'convergence.csv'}")
    return 0


def _cmd_track(args) -> int:
    from . import export

    cfg = _load(args)
    out = _out_dir(args)
    traj, mets, report = track(cfg, args.target, duration=args.duration)
    export.write_trajectory_csv(traj, out / "trajectory.csv")
    export.write_json({**mets.as_dict(), "config_hash": traj.config_hash,
                       "solver_stats": traj.solver_stats}, out / "metrics.json")
    export.write_json(report.as_dict(), out / "tracking_report.json")
    if args.plot:
        export.plot_tracking(traj, args.target, out / "tracking.svg")
    print(f"wrote {out / 'tracking_report.json'}; steady-state error "
          f"{report.steady_state_error:+.4f} m/s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fishsim",
        description="Self-propelled robotic fish dynamics experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, duration):
        p.add_argument("--config", help="TOML or JSON config file (defaults when omitted)")
        p.add_argument("--out", default="fishsim_out", help="output directory")
        p.add_argument("--plot", action="store_true", help="emit SVG figures")
        p.add_argument("--duration", type=float, default=duration,
                       help="simulated seconds")
        p.add_argument("--seedless", action="store_true",
                       help="reserved; all runs are deterministic already")

    p = sub.add_parser("simulate", help="one open-loop run")
    common(p, 5.0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="parameter sweep, one run per value")
    common(p, 5.0)
    p.add_argument("--param", required=True, choices=["frequency", "baseline-e"])
    p.add_argument("--values", required=True,
                   help="a:b:step range or comma-separated list")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: one per value)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("convergence", help="Ritz basis refinement study")
    common(p, 1.5)
    p.add_argument("--modes", default="1:6", help="lo:hi inclusive mode counts")
    p.set_defaults(func=_cmd_convergence)

    p = sub.add_parser("track", help="closed-loop speed tracking run")
    common(p, 20.0)
    p.add_argument("--target", type=float, required=True,
                   help="reference forward speed (m/s)")
    p.set_defaults(func=_cmd_track)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(json.dumps({"error": "invalid_input", "message": str(exc)}))
        return 2
    except IntegrationError as exc:
        print(json.dumps({
            "error": "integration_failure",
            "message": str(exc),
            "time": exc.time,
            "last_state": list(exc.last_state),
        }))
        return 3
    except OSError as exc:
        print(json.dumps({"error": "io_failure", "message": str(exc)}))
        return 4


if __name__ == "__main__":
    sys.exit(main())
