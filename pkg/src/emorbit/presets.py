"""Canonical experiment setups.

All four place receivers at the vertices of a regular tetrahedron on the
sphere R_Gamma = 20000 m and drive the source with

    f(t) = (1, 15 + 10 sin(100 t), -1 - t^2).

Three run at c = 3e8 m/s over T0 = 2*pi*1e-2 s (straight line, heart
curve, spiral), the fourth at c = 340 m/s over T0 = 2*pi*1e-1 s with a
slow spiral. T1 is 40000/c in every setup, comfortably above the minimal
far-field horizon (R_Gamma + R_D)/c.
"""

import math
from dataclasses import dataclass

from .core import OrbitSpec, Receiver, Scenario, SignalComponent, SourceSignal, vec3
from .inverse import ComponentStrategy
from .pipeline import PipelineSettings

__all__ = ["ExperimentPreset", "PRESET_NAMES", "get_preset"]


@dataclass(frozen=True)
class ExperimentPreset:
    """A named scenario plus the numerical settings used to run it."""

    name: str
    scenario: Scenario
    settings: PipelineSettings
    description: str = ""


_TETRA_DIRS = ((1, 1, 1), (-1, -1, 1), (1, -1, -1), (-1, 1, -1))


def _tetra_receivers(R_Gamma):
    out = []
    for d in _TETRA_DIRS:
        out.append(Receiver.on_sphere(vec3(d) * (R_Gamma / math.sqrt(3.0))))
    return tuple(out)


def _source_signal():
    return SourceSignal(
        (
            SignalComponent(poly=(1.0,)),
            SignalComponent(poly=(15.0,), sinusoids=((10.0, 100.0, 0.0),)),
            SignalComponent(poly=(-1.0, 0.0, -1.0)),
        )
    )


def _fast_scenario(orbit):
    c = 3e8
    return Scenario(
        c=c,
        R_Gamma=20000.0,
        R_D=100.0,
        receivers=_tetra_receivers(20000.0),
        orbit=orbit,
        signal=_source_signal(),
        T0=2.0 * math.pi * 1e-2,
        T1=40000.0 / c,
    )


def _fast_settings():
    return PipelineSettings(h=1e-5, strategy=ComponentStrategy())


def line_example1() -> ExperimentPreset:
    orbit = OrbitSpec(
        "Line", {"velocity": (1000.0, 0.0, 0.0)}, declared_c0=1000.0, declared_a0=0.0
    )
    return ExperimentPreset(
        "line_example1",
        _fast_scenario(orbit),
        _fast_settings(),
        "straight radial line a(t) = (1000 t, 0, 0) at c = 3e8",
    )


def heart_example2() -> ExperimentPreset:
    # sup |a'| = 2*A*omega, sup |a''| = 3*A*omega^2, both attained
    orbit = OrbitSpec(
        "Heart",
        {"amplitude": 50.0, "omega": 100.0},
        declared_c0=10000.0,
        declared_a0=1.5e6,
    )
    return ExperimentPreset(
        "heart_example2",
        _fast_scenario(orbit),
        _fast_settings(),
        "planar heart curve 50(1 - sin 100t)(cos 100t, sin 100t) at c = 3e8",
    )


def spiral_example3() -> ExperimentPreset:
    orbit = OrbitSpec(
        "Spiral",
        {"radius": 50.0, "omega": 100.0, "vz": 1000.0},
        declared_c0=1000.0 * math.sqrt(26.0),
        declared_a0=5e5,
    )
    return ExperimentPreset(
        "spiral_example3",
        _fast_scenario(orbit),
        _fast_settings(),
        "spiral (50 cos 100t, 50 sin 100t, 1000t) at c = 3e8",
    )


def spiral_lowspeed() -> ExperimentPreset:
    c = 340.0
    orbit = OrbitSpec(
        "Spiral",
        {"radius": 5.0, "omega": 10.0, "vz": 10.0},
        declared_c0=math.sqrt(2600.0),
        declared_a0=500.0,
    )
    scenario = Scenario(
        c=c,
        R_Gamma=20000.0,
        R_D=10.0,
        receivers=_tetra_receivers(20000.0),
        orbit=orbit,
        signal=_source_signal(),
        T0=2.0 * math.pi * 1e-1,
        T1=40000.0 / c,
    )
    return ExperimentPreset(
        "spiral_lowspeed",
        scenario,
        PipelineSettings(h=1e-4, strategy=ComponentStrategy()),
        "slow spiral (5 cos 10t, 5 sin 10t, 10t) at acoustic speed c = 340",
    )


_FACTORIES = {
    "line_example1": line_example1,
    "heart_example2": heart_example2,
    "spiral_example3": spiral_example3,
    "spiral_lowspeed": spiral_lowspeed,
}

PRESET_NAMES = tuple(_FACTORIES)


def get_preset(name: str) -> ExperimentPreset:
    try:
        factory = _FACTORIES[name]
    except KeyError:
        from .core import ConfigurationError

        raise ConfigurationError(
            "unknown preset %r (available: %s)" % (name, ", ".join(PRESET_NAMES))
        ) from None
    return factory()
