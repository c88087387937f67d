"""Command line interface.

Subcommands:

- simulate: synthesize receiver traces for a preset or a scenario config,
  optionally noisy, and write CSVs plus a manifest.
- reconstruct: rebuild the orbit from a manifest directory written by
  simulate.
- experiment: simulate and reconstruct in one go for a named preset.
- sweep: reconstruction error versus noise level for a named preset.

Exit codes: 0 on success, 2 on configuration or validation problems
(including bad arguments and unreadable inputs), 3 on pipeline failures.
"""

import argparse
import json
import logging
import os
import sys
import time

from . import io, metrics, plot
from .backend import backend_name
from .core import ConfigurationError, EmorbitError, validate_scenario
from .inverse import ComponentStrategy, reconstruct_orbit
from .metrics import geometry_constants, noise_sweep, relative_error
from .noise import NoiseModel, apply_noise
from .pipeline import (
    PipelineSettings,
    reconstruction_grid,
    synthesize_dataset,
    true_orbit,
)
from .presets import PRESET_NAMES, ExperimentPreset, get_preset

__all__ = ["main", "build_parser"]

logger = logging.getLogger("emorbit")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v", "--verbose", action="count", default=0,
        help="-v for progress, -vv for debug output",
    )

    numeric = argparse.ArgumentParser(add_help=False)
    numeric.add_argument("--step", type=float, default=None, metavar="H",
                         help="RK4 step and reconstruction grid spacing [s]")
    numeric.add_argument("--dt", type=float, default=None,
                         help="measurement grid spacing [s] (default: step/2)")
    numeric.add_argument("--method", choices=("bisection", "digitscan"),
                         default=None, help="retarded-map inversion method")
    numeric.add_argument("--eps-ini", type=float, default=None,
                         help="arrival probe spacing [s]")
    numeric.add_argument("--eps-inv", type=float, default=None,
                         help="inversion tolerance (default: method-specific)")
    numeric.add_argument("--strategy", choices=("fixed", "maxsignal"),
                         default=None, help="ODE component selection mode")
    numeric.add_argument("--components", default=None, metavar="I1,I2,I3,I4",
                         help="fixed-mode component per receiver, e.g. 1,2,3,3")
    numeric.add_argument("--fallback-threshold", type=float, default=None,
                         help="relative trace floor before component fallback")
    numeric.add_argument("--per-sample-scalar", action="store_true",
                         help="one noise draw per sample instead of per component")

    noise = argparse.ArgumentParser(add_help=False)
    noise.add_argument("--epsilon", type=float, default=0.0,
                       help="relative noise level in [0, 1)")
    noise.add_argument("--seed", type=int, default=0, help="noise stream seed")

    parser = argparse.ArgumentParser(
        prog="emorbit",
        description="Moving point source orbit reconstruction from "
                    "boundary magnetic traces.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser(
        "simulate", parents=[common, numeric, noise],
        help="synthesize receiver traces and write a dataset directory",
    )
    src = p_sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESET_NAMES)
    src.add_argument("--config", metavar="SCENARIO.json",
                     help="JSON scenario (optionally {scenario, settings})")
    p_sim.add_argument("--out", required=True, metavar="DIR")
    p_sim.set_defaults(func=_cmd_simulate)

    p_rec = sub.add_parser(
        "reconstruct", parents=[common, numeric],
        help="reconstruct the orbit from a simulated dataset directory",
    )
    p_rec.add_argument("--data", required=True, metavar="DIR_OR_MANIFEST",
                       help="dataset directory or manifest.json path")
    p_rec.add_argument("--out", required=True, metavar="DIR")
    p_rec.add_argument("--detect-arrivals", action="store_true",
                       help="detect arrivals from the stored series instead "
                            "of using the manifest values")
    p_rec.add_argument("--no-plots", action="store_true")
    p_rec.set_defaults(func=_cmd_reconstruct)

    p_exp = sub.add_parser(
        "experiment", parents=[common, numeric, noise],
        help="run one synthesize-reconstruct cycle for a preset",
    )
    p_exp.add_argument("preset", choices=PRESET_NAMES)
    p_exp.add_argument("--out", default=None, metavar="DIR",
                       help="write CSVs, plots and summary.json here")
    p_exp.add_argument("--no-plots", action="store_true")
    p_exp.set_defaults(func=_cmd_experiment)

    p_swp = sub.add_parser(
        "sweep", parents=[common, numeric],
        help="reconstruction error versus noise level",
    )
    p_swp.add_argument("preset", choices=PRESET_NAMES)
    p_swp.add_argument("--epsilons", required=True, metavar="E1,E2,...",
                       help="comma-separated noise levels, e.g. 0,1e-4,2e-4")
    p_swp.add_argument("--seeds-per-point", type=int, default=5)
    p_swp.add_argument("--seed-base", type=int, default=0)
    p_swp.add_argument("--out", default=None, metavar="DIR")
    p_swp.set_defaults(func=_cmd_sweep)

    return parser


def _setup_logging(verbosity):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format="%(message)s")
    logger.setLevel(level)


def _parse_components(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ConfigurationError("--components needs four comma-separated indices")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigurationError("--components must be integers from {1,2,3}") from None


def _merge_settings(base: PipelineSettings, args) -> PipelineSettings:
    h = args.step if args.step is not None else base.h
    if args.dt is not None:
        dt = args.dt
    elif args.step is not None:
        dt = None  # recomputed as h/2
    else:
        dt = base.dt
    strat = base.strategy
    if (args.strategy is not None or args.components is not None
            or args.fallback_threshold is not None):
        strat = ComponentStrategy(
            mode=args.strategy if args.strategy is not None else strat.mode,
            components=_parse_components(args.components)
            if args.components is not None else strat.components,
            fallback_threshold=args.fallback_threshold
            if args.fallback_threshold is not None else strat.fallback_threshold,
        )
    return PipelineSettings(
        h=h,
        dt=dt,
        method=args.method if args.method is not None else base.method,
        eps_inv=args.eps_inv if args.eps_inv is not None else base.eps_inv,
        eps_ini=args.eps_ini if args.eps_ini is not None else base.eps_ini,
        strategy=strat,
        per_sample_scalar=args.per_sample_scalar or base.per_sample_scalar,
    )


def _check_scenario(s):
    report = validate_scenario(s)
    for c in report.failures():
        print(
            "validation: %s failed (measured %.6g; %s)" % (c.name, c.measured, c.detail),
            file=sys.stderr,
        )
    if not report.ok:
        raise ConfigurationError(
            "fatal validation failure: "
            + ", ".join(c.name for c in report.failures() if c.fatal)
        )


def _load_config_scenario(path, args):
    d = io.read_json(path)
    if "scenario" in d:
        s = io.scenario_from_dict(d["scenario"])
        base = (io.settings_from_dict(d["settings"]) if "settings" in d
                else PipelineSettings(h=1e-5))
    else:
        s = io.scenario_from_dict(d)
        base = PipelineSettings(h=1e-5)
    return s, _merge_settings(base, args)


def _noise_from_args(args, settings):
    if args.epsilon == 0.0:
        return None
    return NoiseModel(args.epsilon, args.seed, settings.per_sample_scalar)


def _write_series_set(out_dir, series_list):
    files = []
    for j, ts in enumerate(series_list):
        name = "measurements_receiver%d.csv" % (j + 1)
        io.write_series_csv(os.path.join(out_dir, name), ts)
        files.append(name)
    return files


def _geometry_dict(s):
    g = geometry_constants(s)
    return {"d0": g.d0, "d1": g.d1, "T1": g.T1, "eta": g.eta, "C0": g.C0}


def _recon_outputs(out_dir, recon, truth, no_plots):
    outputs = []
    for df in recon.distances:
        name = "distance_receiver%d.csv" % (df.receiver_index + 1)
        io.write_distance_csv(os.path.join(out_dir, name), df)
        outputs.append(name)
    io.write_orbit_csv(os.path.join(out_dir, "orbit_reconstructed.csv"), recon)
    io.write_orbit_csv(os.path.join(out_dir, "orbit_true.csv"), truth)
    outputs += ["orbit_reconstructed.csv", "orbit_true.csv"]
    if not no_plots:
        plot.orbit_projection(os.path.join(out_dir, "orbit_xy.svg"), truth, recon)
        plot.orbit_components(
            os.path.join(out_dir, "orbit_components.svg"), truth, recon
        )
        outputs += ["orbit_xy.svg", "orbit_components.svg"]
    return outputs


def _fallback_summary(recon):
    return [
        {"receiver_index": df.receiver_index, **{
            k: df.diagnostics.get(k)
            for k in ("fallback_count", "fallback_first_t", "fallback_last_t",
                      "fallback_per_component", "max_rate", "speed_bound_ok")
        }}
        for df in recon.distances
    ]


def _cmd_simulate(args):
    if args.preset:
        preset = get_preset(args.preset)
        s = preset.scenario
        settings = _merge_settings(preset.settings, args)
        name = preset.name
    else:
        s, settings = _load_config_scenario(args.config, args)
        name = None
    _check_scenario(s)
    started = time.perf_counter()
    ds = synthesize_dataset(s, settings)
    noise = _noise_from_args(args, settings)
    series_out = ds.series if noise is None else tuple(
        apply_noise(ts, noise) for ts in ds.series
    )
    os.makedirs(args.out, exist_ok=True)
    files = _write_series_set(args.out, series_out)
    manifest = io.manifest_dict(s, settings, files, ds.arrivals, noise)
    manifest["preset"] = name
    manifest["backend"] = backend_name()
    io.write_json(os.path.join(args.out, "manifest.json"), manifest)
    runtime = time.perf_counter() - started
    print(
        "simulate: %d samples x %d receivers -> %s (epsilon=%g, %.2fs, %s backend)"
        % (ds.grid.n, len(series_out), args.out, args.epsilon, runtime,
           backend_name())
    )
    return 0


def _cmd_reconstruct(args):
    manifest_path = args.data
    if os.path.isdir(manifest_path):
        manifest_path = os.path.join(manifest_path, "manifest.json")
    base_dir = os.path.dirname(manifest_path)
    manifest = io.read_json(manifest_path)
    if manifest.get("format") != io.MANIFEST_FORMAT:
        raise ConfigurationError("%s is not a dataset manifest" % manifest_path)
    s = io.scenario_from_dict(manifest["scenario"])
    settings = _merge_settings(io.settings_from_dict(manifest["settings"]), args)
    _check_scenario(s)
    series = [
        io.read_series_csv(os.path.join(base_dir, fname), j)
        for j, fname in enumerate(manifest["series_files"])
    ]
    arrivals = None
    if not args.detect_arrivals:
        arrivals = io.arrivals_from_manifest(manifest) or None
    started = time.perf_counter()
    grid = reconstruction_grid(s, settings)
    recon = reconstruct_orbit(
        series, s, grid, settings.strategy, settings.h, arrivals=arrivals
    )
    truth = true_orbit(s, grid)
    err = relative_error(truth, recon)
    runtime = time.perf_counter() - started
    os.makedirs(args.out, exist_ok=True)
    outputs = _recon_outputs(args.out, recon, truth, args.no_plots)
    summary = {
        "preset": manifest.get("preset"),
        "backend": backend_name(),
        "scenario": manifest["scenario"],
        "settings": io.settings_to_dict(settings),
        "noise": manifest.get("noise"),
        "arrivals": manifest.get("arrivals"),
        "err": err,
        "fallbacks": _fallback_summary(recon),
        "geometry": _geometry_dict(s),
        "runtime_seconds": runtime,
        "outputs": outputs,
    }
    io.write_json(os.path.join(args.out, "summary.json"), summary)
    print("reconstruct: err=%.6g -> %s (%.2fs)" % (err, args.out, runtime))
    return 0


def _cmd_experiment(args):
    preset = get_preset(args.preset)
    s = preset.scenario
    settings = _merge_settings(preset.settings, args)
    _check_scenario(s)
    started = time.perf_counter()
    ds = synthesize_dataset(s, settings)
    noise = _noise_from_args(args, settings)
    series_used = ds.series if noise is None else tuple(
        apply_noise(ts, noise) for ts in ds.series
    )
    grid = reconstruction_grid(s, settings)
    recon = reconstruct_orbit(
        series_used, s, grid, settings.strategy, settings.h, arrivals=ds.arrivals
    )
    truth = true_orbit(s, grid)
    err = relative_error(truth, recon)
    runtime = time.perf_counter() - started
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        files = _write_series_set(args.out, series_used)
        manifest = io.manifest_dict(s, settings, files, ds.arrivals, noise)
        manifest["preset"] = preset.name
        manifest["backend"] = backend_name()
        io.write_json(os.path.join(args.out, "manifest.json"), manifest)
        outputs = files + ["manifest.json"]
        outputs += _recon_outputs(args.out, recon, truth, args.no_plots)
        summary = {
            "preset": preset.name,
            "backend": backend_name(),
            "scenario": io.scenario_to_dict(s),
            "settings": io.settings_to_dict(settings),
            "noise": None if noise is None else {
                "epsilon": noise.epsilon, "seed": noise.seed,
                "per_sample_scalar": noise.per_sample_scalar,
            },
            "arrivals": [
                {"receiver_index": a.receiver_index, "t_arrival": a.t_arrival,
                 "detection_index": a.detection_index}
                for a in ds.arrivals
            ],
            "err": err,
            "fallbacks": _fallback_summary(recon),
            "geometry": _geometry_dict(s),
            "runtime_seconds": runtime,
            "outputs": outputs + ["summary.json"],
        }
        io.write_json(os.path.join(args.out, "summary.json"), summary)
    print(
        "experiment %s: epsilon=%g seed=%d err=%.6g (%.2fs, %s backend)"
        % (preset.name, args.epsilon, args.seed, err, runtime, backend_name())
    )
    return 0


def _cmd_sweep(args):
    preset = get_preset(args.preset)
    settings = _merge_settings(preset.settings, args)
    preset = ExperimentPreset(preset.name, preset.scenario, settings,
                              preset.description)
    _check_scenario(preset.scenario)
    try:
        epsilons = [float(p) for p in args.epsilons.split(",") if p.strip()]
    except ValueError:
        raise ConfigurationError("--epsilons must be comma-separated numbers") from None
    if not epsilons:
        raise ConfigurationError("--epsilons is empty")
    started = time.perf_counter()
    result = noise_sweep(preset, epsilons, args.seeds_per_point, args.seed_base)
    runtime = time.perf_counter() - started
    for eps, mean_err in result.points:
        n = sum(1 for r in result.rows if r[0] == eps)
        print("epsilon=%-10.4g mean_err=%-12.6g runs=%d" % (eps, mean_err, n))
    for eps, seed, message in result.failures:
        print("failed: epsilon=%g seed=%d: %s" % (eps, seed, message),
              file=sys.stderr)
    print(
        "fit: slope=%.6g intercept=%.6g max_rel_residual=%.4g (%.2fs)"
        % (result.slope, result.intercept, result.max_relative_residual, runtime)
    )
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        io.write_sweep_csv(os.path.join(args.out, "sweep.csv"), result.rows)
        summary = {
            "preset": preset.name,
            "backend": backend_name(),
            "settings": io.settings_to_dict(settings),
            "epsilons": epsilons,
            "seeds_per_point": args.seeds_per_point,
            "seed_base": args.seed_base,
            "points": [list(p) for p in result.points],
            "slope": result.slope,
            "intercept": result.intercept,
            "max_relative_residual": result.max_relative_residual,
            "failures": [list(f) for f in result.failures],
            "geometry": _geometry_dict(preset.scenario),
            "runtime_seconds": runtime,
        }
        io.write_json(os.path.join(args.out, "sweep_summary.json"), summary)
        plot.sweep_chart(
            os.path.join(args.out, "err_vs_eps.svg"),
            result.points, result.slope, result.intercept,
        )
    return 0


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    _setup_logging(args.verbose)
    try:
        return args.func(args) or 0
    except ConfigurationError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, NotADirectoryError,
            PermissionError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print("error: invalid input: %r" % (exc,), file=sys.stderr)
        return 2
    except EmorbitError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
