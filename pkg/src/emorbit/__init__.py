"""Orbit reconstruction of a moving point source from boundary magnetic traces."""

from .backend import backend_name
from .core import (
    BlowUpError,
    ConfigurationError,
    CoplanarReceiversError,
    DegenerateDataError,
    DegenerateGeometryError,
    EmorbitError,
    HorizonError,
    NoSignalError,
    OrbitSpec,
    OutOfRangeError,
    Receiver,
    Scenario,
    SignalComponent,
    SinusoidTerm,
    SourceSignal,
    TimeGrid,
    TimeSeries,
    UndefinedMetricError,
    cross_signal,
    orbit_eval,
    validate_scenario,
    vec3,
)
from .forward import GInversionConfig, field_at, g_derivative, invert_g, retarded_map_g, sample_receiver
from .inverse import (
    ArrivalTime,
    ComponentStrategy,
    DistanceFunction,
    ReconstructedOrbit,
    SpeedBoundWarning,
    detect_arrival,
    distance_ode_rhs,
    reconstruct_orbit,
    solve_distance_ode,
    trilaterate,
)
from .metrics import (
    GeometryConstants,
    NoiseSweepResult,
    geometry_constants,
    noise_sweep,
    relative_error,
)
from .noise import NoiseModel, apply_noise
from .pipeline import (
    PipelineSettings,
    SyntheticDataset,
    reconstruct_dataset,
    reconstruction_grid,
    synthesize_dataset,
    true_orbit,
)
from .presets import PRESET_NAMES, ExperimentPreset, get_preset

__version__ = "0.1.0"
