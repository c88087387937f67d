"""Compare the compiled kernels against the NumPy fallback.

Times the two pipeline stages that route through the kernel layer:
trace synthesis (dominated by retarded-map inversion) and orbit
reconstruction (dominated by the distance-ODE integration). Run as

    python3 benchmarks/bench_backends.py [--preset NAME] [--repeats N]
"""

import argparse
import time

import emorbit.backend as backend
from emorbit.metrics import relative_error
from emorbit.pipeline import (
    reconstruct_dataset,
    reconstruction_grid,
    synthesize_dataset,
    true_orbit,
)
from emorbit.presets import PRESET_NAMES, get_preset


def best_of(repeats, fn):
    times = []
    result = None
    for _ in range(repeats):
        started = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - started)
    return min(times), result


def bench(preset, repeats):
    rows = []
    errs = {}
    modes = [False] if not backend.HAVE_COMPILED else [True, False]
    for compiled in modes:
        backend.HAVE_COMPILED = compiled
        name = "compiled" if compiled else "pure"
        t_synth, ds = best_of(repeats, lambda: synthesize_dataset(
            preset.scenario, preset.settings))
        grid = reconstruction_grid(preset.scenario, preset.settings)
        t_recon, recon = best_of(repeats, lambda: reconstruct_dataset(
            ds, grid=grid))
        errs[name] = relative_error(true_orbit(preset.scenario, grid), recon)
        rows.append((name, t_synth, t_recon))
    return rows, errs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--preset", choices=PRESET_NAMES, default="line_example1")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)

    preset = get_preset(args.preset)
    have_compiled = backend.HAVE_COMPILED
    try:
        rows, errs = bench(preset, args.repeats)
    finally:
        backend.HAVE_COMPILED = have_compiled

    print("preset: %s (best of %d)" % (preset.name, args.repeats))
    print("%-10s %14s %18s" % ("backend", "synthesis [s]", "reconstruction [s]"))
    for name, t_synth, t_recon in rows:
        print("%-10s %14.4f %18.4f" % (name, t_synth, t_recon))
    if len(rows) == 2:
        (_, cs, cr), (_, ps, pr) = rows
        print("speedup: synthesis %.1fx, reconstruction %.1fx" % (ps / cs, pr / cr))
        drift = abs(errs["compiled"] - errs["pure"]) / max(errs.values())
        print("err agreement: compiled %.6g vs pure %.6g (relative drift %.2g)"
              % (errs["compiled"], errs["pure"], drift))
    else:
        print("compiled extension not available; timed the fallback only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
