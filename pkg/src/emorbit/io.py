"""CSV and JSON serialization.

All CSV values are written with %.17g, which round-trips float64
exactly, so a write/read cycle reproduces the same doubles bit for bit.
pandas is used when importable (much faster on the multi-million-row
acoustic datasets); the emitted bytes match the NumPy path.
"""

import json

import numpy as np

try:
    import pandas as _pd
except ImportError:
    _pd = None

from .core import (
    OrbitSpec,
    Receiver,
    Scenario,
    SignalComponent,
    SourceSignal,
    TimeGrid,
    TimeSeries,
)
from .inverse import ArrivalTime, ComponentStrategy, DistanceFunction, ReconstructedOrbit
from .noise import NoiseModel
from .pipeline import PipelineSettings

__all__ = [
    "write_series_csv",
    "read_series_csv",
    "write_distance_csv",
    "read_distance_csv",
    "write_orbit_csv",
    "read_orbit_csv",
    "write_sweep_csv",
    "read_sweep_csv",
    "write_json",
    "read_json",
    "scenario_to_dict",
    "scenario_from_dict",
    "settings_to_dict",
    "settings_from_dict",
    "manifest_dict",
    "arrivals_from_manifest",
]

MANIFEST_FORMAT = "emorbit-dataset"
MANIFEST_VERSION = 1


def _write_table(path, header, data):
    data = np.asarray(data, dtype=float)
    if _pd is not None:
        frame = _pd.DataFrame(data, columns=header.split(","))
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    else:
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")


def _read_table(path, header, ncols):
    if _pd is not None:
        # the default parser can be 1 ulp off; round_trip restores the
        # exact doubles the %.17g writer encoded
        frame = _pd.read_csv(path, float_precision="round_trip")
        cols = ",".join(str(c) for c in frame.columns)
        data = frame.to_numpy(dtype=float)
    else:
        with open(path, "r", encoding="utf-8") as fh:
            cols = fh.readline().strip()
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if cols != header:
        raise ValueError(
            "%s: expected header %r, found %r" % (path, header, cols)
        )
    if data.ndim != 2 or data.shape[1] != ncols:
        raise ValueError("%s: expected %d columns" % (path, ncols))
    return data


def _grid_from_times(t, path):
    if len(t) < 2:
        raise ValueError("%s: need at least 2 rows" % path)
    t0, dt = float(t[0]), float(t[1] - t[0])
    if dt <= 0:
        raise ValueError("%s: time column must increase" % path)
    grid = TimeGrid(t0, dt, len(t))
    if float(np.max(np.abs(grid.times() - t))) > 1e-9 * dt:
        raise ValueError("%s: time column is not uniform" % path)
    return grid


def write_series_csv(path, series: TimeSeries):
    data = np.column_stack([series.grid.times(), series.samples])
    _write_table(path, "t,H1,H2,H3", data)


def read_series_csv(path, receiver_index: int) -> TimeSeries:
    data = _read_table(path, "t,H1,H2,H3", 4)
    grid = _grid_from_times(data[:, 0], path)
    return TimeSeries(grid, data[:, 1:], receiver_index)


def write_distance_csv(path, df: DistanceFunction):
    _write_table(path, "t,v", np.column_stack([df.grid.times(), df.v]))


def read_distance_csv(path, receiver_index: int) -> DistanceFunction:
    data = _read_table(path, "t,v", 2)
    grid = _grid_from_times(data[:, 0], path)
    return DistanceFunction(grid, data[:, 1], receiver_index)


def write_orbit_csv(path, orbit: ReconstructedOrbit):
    data = np.column_stack([orbit.grid.times(), orbit.points])
    _write_table(path, "t,a1,a2,a3", data)


def read_orbit_csv(path) -> ReconstructedOrbit:
    data = _read_table(path, "t,a1,a2,a3", 4)
    grid = _grid_from_times(data[:, 0], path)
    return ReconstructedOrbit(grid, data[:, 1:])


def write_sweep_csv(path, rows):
    data = np.array([[e, float(seed), err] for e, seed, err in rows], dtype=float)
    _write_table(path, "epsilon,seed,err", data.reshape(-1, 3))


def read_sweep_csv(path):
    data = _read_table(path, "epsilon,seed,err", 3)
    return [(float(e), int(seed), float(err)) for e, seed, err in data]


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _jsonify(value):
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    return value


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "c": s.c,
        "R_Gamma": s.R_Gamma,
        "R_D": s.R_D,
        "receivers": [
            {"position": _jsonify(r.position), "normal": _jsonify(r.normal)}
            for r in s.receivers
        ],
        "orbit": {
            "kind": s.orbit.kind,
            "params": _jsonify(s.orbit.params),
            "declared_c0": s.orbit.declared_c0,
            "declared_a0": s.orbit.declared_a0,
        },
        "signal": [
            {
                "poly": list(comp.poly),
                "sinusoids": [[t.amplitude, t.omega, t.phase] for t in comp.sinusoids],
            }
            for comp in s.signal.components
        ],
        "T0": s.T0,
        "T1": s.T1,
        "T": s.T,
    }


def scenario_from_dict(d: dict) -> Scenario:
    receivers = []
    for r in d["receivers"]:
        if "normal" in r:
            receivers.append(Receiver(r["position"], r["normal"]))
        else:
            receivers.append(Receiver.on_sphere(r["position"]))
    orbit = OrbitSpec(
        d["orbit"]["kind"],
        d["orbit"]["params"],
        declared_c0=float(d["orbit"]["declared_c0"]),
        declared_a0=float(d["orbit"]["declared_a0"]),
    )
    signal = SourceSignal(
        tuple(
            SignalComponent(
                poly=tuple(comp.get("poly", ())),
                sinusoids=tuple(tuple(t) for t in comp.get("sinusoids", ())),
            )
            for comp in d["signal"]
        )
    )
    return Scenario(
        c=float(d["c"]),
        R_Gamma=float(d["R_Gamma"]),
        R_D=float(d["R_D"]),
        receivers=tuple(receivers),
        orbit=orbit,
        signal=signal,
        T0=float(d["T0"]),
        T1=float(d["T1"]),
        T=float(d["T"]) if d.get("T") is not None else None,
    )


def settings_to_dict(settings: PipelineSettings) -> dict:
    return {
        "h": settings.h,
        "dt": settings.dt,
        "method": settings.method,
        "eps_inv": settings.eps_inv,
        "eps_ini": settings.eps_ini,
        "strategy": {
            "mode": settings.strategy.mode,
            "components": list(settings.strategy.components),
            "fallback_threshold": settings.strategy.fallback_threshold,
        },
        "per_sample_scalar": settings.per_sample_scalar,
    }


def settings_from_dict(d: dict) -> PipelineSettings:
    strat = d.get("strategy", {})
    return PipelineSettings(
        h=float(d["h"]),
        dt=float(d["dt"]) if d.get("dt") is not None else None,
        method=d.get("method", "bisection"),
        eps_inv=float(d["eps_inv"]) if d.get("eps_inv") is not None else None,
        eps_ini=float(d.get("eps_ini", 1e-7)),
        strategy=ComponentStrategy(
            mode=strat.get("mode", "fixed"),
            components=tuple(strat.get("components", (1, 2, 3, 3))),
            fallback_threshold=float(strat.get("fallback_threshold", 1e-3)),
        ),
        per_sample_scalar=bool(d.get("per_sample_scalar", False)),
    )


def manifest_dict(scenario, settings, series_files, arrivals, noise: NoiseModel = None):
    return {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "scenario": scenario_to_dict(scenario),
        "settings": settings_to_dict(settings),
        "series_files": list(series_files),
        "arrivals": [
            {
                "receiver_index": a.receiver_index,
                "t_arrival": a.t_arrival,
                "detection_index": a.detection_index,
            }
            for a in arrivals
        ],
        "noise": None
        if noise is None or noise.epsilon == 0.0
        else {
            "epsilon": noise.epsilon,
            "seed": noise.seed,
            "per_sample_scalar": noise.per_sample_scalar,
        },
    }


def arrivals_from_manifest(manifest: dict):
    return tuple(
        ArrivalTime(int(a["receiver_index"]), float(a["t_arrival"]),
                    int(a["detection_index"]))
        for a in manifest.get("arrivals", ())
    )
