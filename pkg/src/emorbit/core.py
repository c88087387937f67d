"""Domain types, scenario construction and validation.

The measurement setup: a point source moves along an orbit a(t) inside a
ball of radius R_D while four receivers sit on the boundary sphere of
radius R_Gamma and record the tangential trace H x nu of the magnetic
field. Everything downstream (synthesis, reconstruction, metrics) works
on the immutable types defined here.

Units are the raw numbers of the experiments (lengths in meters, times in
seconds, c = 3e8 or 340); no unit system is modeled.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EmorbitError",
    "ConfigurationError",
    "DegenerateGeometryError",
    "OutOfRangeError",
    "HorizonError",
    "NoSignalError",
    "DegenerateDataError",
    "BlowUpError",
    "CoplanarReceiversError",
    "UndefinedMetricError",
    "vec3",
    "TimeGrid",
    "SinusoidTerm",
    "OrbitSpec",
    "SignalComponent",
    "SourceSignal",
    "cross_signal",
    "Receiver",
    "Scenario",
    "TimeSeries",
    "CheckResult",
    "ValidationReport",
    "orbit_eval",
    "validate_scenario",
]


class EmorbitError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EmorbitError):
    """Invalid or unknown configuration (orbit kind, schema, flags)."""


class DegenerateGeometryError(EmorbitError):
    """Source and receiver coincide; field representation undefined."""


class OutOfRangeError(EmorbitError):
    """Inverse of the retarded map queried before the first arrival."""


class HorizonError(EmorbitError):
    """A query lies beyond the measured (or searchable) time horizon."""


class NoSignalError(EmorbitError):
    """Arrival detection found no sample above the threshold."""


class DegenerateDataError(EmorbitError):
    """All usable data components vanished at some integration time.

    Attributes
    ----------
    t : float
        Integration time at which the data degenerated.
    receiver_index : int or None
    partial : object or None
        Partial DistanceFunction computed before the abort, if any.
    """

    def __init__(self, message, t=None, receiver_index=None, partial=None):
        super().__init__(message)
        self.t = t
        self.receiver_index = receiver_index
        self.partial = partial


class BlowUpError(EmorbitError):
    """The distance ODE produced a non-positive or non-finite distance."""

    def __init__(self, message, t=None, receiver_index=None, partial=None):
        super().__init__(message)
        self.t = t
        self.receiver_index = receiver_index
        self.partial = partial


class CoplanarReceiversError(EmorbitError):
    """The four receivers are (numerically) coplanar."""


class UndefinedMetricError(EmorbitError):
    """Relative error against an identically zero reference orbit."""


def vec3(x, y=None, z=None):
    """Build a finite float64 3-vector.

    Accepts either three scalars or one length-3 sequence.
    """
    if y is None and z is None:
        v = np.asarray(x, dtype=float)
    else:
        v = np.array([x, y, z], dtype=float)
    if v.shape != (3,):
        raise ValueError("expected a 3-vector, got shape %r" % (v.shape,))
    if not np.all(np.isfinite(v)):
        raise ValueError("vector components must be finite, got %r" % (v,))
    return v


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t_k = t_start + k*dt, k = 0..n-1.

    Sample times are always computed by multiplication, never by repeated
    addition, so there is no accumulated drift.
    """

    t_start: float
    dt: float
    n: int

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if self.n < 2:
            raise ValueError("need at least 2 samples")
        if not (math.isfinite(self.t_start) and math.isfinite(self.dt)):
            raise ValueError("grid parameters must be finite")

    def t(self, k):
        return self.t_start + k * self.dt

    @property
    def t_end(self):
        return self.t_start + (self.n - 1) * self.dt

    def times(self):
        return self.t_start + self.dt * np.arange(self.n)


@dataclass(frozen=True)
class SinusoidTerm:
    """One term amplitude * sin(omega*t + phase)."""

    amplitude: float
    omega: float
    phase: float = 0.0


def _as_terms(terms):
    out = []
    for term in terms:
        if isinstance(term, SinusoidTerm):
            out.append(term)
        else:
            out.append(SinusoidTerm(*term))
    return tuple(out)


_ORBIT_KINDS = ("Line", "Heart", "Spiral", "StationaryPoint", "AffineSinusoid")


@dataclass(frozen=True)
class OrbitSpec:
    """Parametric C2 orbit with exact closed-form derivatives.

    Every kind lowers to the affine-sinusoid normal form

        a_i(t) = p_i + v_i*t + sum_k A_k sin(w_k t + ph_k)

    per component, which is what the evaluators and the compiled kernels
    consume. ``declared_c0`` and ``declared_a0`` are the user-declared
    bounds sup|a'| and sup|a''| checked by validate_scenario.

    Parameters per kind:

    - Line: velocity (3-vector), origin (3-vector, default 0)
    - Heart: amplitude A, omega w; the planar curve
      (A(1-sin wt)cos wt, A(1-sin wt)sin wt, 0)
    - Spiral: radius R, omega w, vz; (R cos wt, R sin wt, vz*t)
    - StationaryPoint: point (3-vector)
    - AffineSinusoid: offset, velocity (3-vectors) and terms, a list of
      three lists of (amplitude, omega, phase) sine terms
    """

    kind: str
    params: dict
    declared_c0: float
    declared_a0: float

    def __post_init__(self):
        if self.kind not in _ORBIT_KINDS:
            raise ConfigurationError(
                "unknown orbit kind %r (expected one of %s)"
                % (self.kind, ", ".join(_ORBIT_KINDS))
            )
        object.__setattr__(self, "_low", _lower_orbit(self.kind, self.params))

    # -- evaluators ------------------------------------------------------

    def a(self, t):
        """Orbit position; scalar t -> shape (3,), array t -> (n, 3)."""
        return _affine_sin_eval(self._low, t, 0)

    def a_dot(self, t):
        return _affine_sin_eval(self._low, t, 1)

    def a_ddot(self, t):
        return _affine_sin_eval(self._low, t, 2)

    @property
    def lowered(self):
        """(p, v, amp, omega, phase, offsets) arrays of the normal form."""
        return self._low


def _lower_orbit(kind, params):
    p = np.zeros(3)
    v = np.zeros(3)
    terms = [[], [], []]
    if kind == "Line":
        v = vec3(params["velocity"])
        p = vec3(params.get("origin", (0.0, 0.0, 0.0)))
    elif kind == "StationaryPoint":
        p = vec3(params["point"])
    elif kind == "Spiral":
        R = float(params["radius"])
        w = float(params["omega"])
        v[2] = float(params["vz"])
        terms[0].append((R, w, math.pi / 2))  # R cos(wt)
        terms[1].append((R, w, 0.0))
    elif kind == "Heart":
        # A(1-sin wt)cos wt = A sin(wt + pi/2) - (A/2) sin(2wt)
        # A(1-sin wt)sin wt = -A/2 + A sin(wt) + (A/2) sin(2wt + pi/2)
        A = float(params.get("amplitude", 50.0))
        w = float(params["omega"])
        terms[0].append((A, w, math.pi / 2))
        terms[0].append((-A / 2, 2 * w, 0.0))
        p[1] = -A / 2
        terms[1].append((A, w, 0.0))
        terms[1].append((A / 2, 2 * w, math.pi / 2))
    elif kind == "AffineSinusoid":
        p = vec3(params.get("offset", (0.0, 0.0, 0.0)))
        v = vec3(params.get("velocity", (0.0, 0.0, 0.0)))
        raw = params.get("terms", ((), (), ()))
        if len(raw) != 3:
            raise ConfigurationError("AffineSinusoid terms must list 3 components")
        for i in range(3):
            for term in raw[i]:
                if isinstance(term, SinusoidTerm):
                    terms[i].append((term.amplitude, term.omega, term.phase))
                else:
                    terms[i].append(tuple(float(x) for x in term))
    offsets = np.zeros(4, dtype=np.int64)
    flat = []
    for i in range(3):
        offsets[i + 1] = offsets[i] + len(terms[i])
        flat.extend(terms[i])
    if flat:
        amp, omega, phase = (np.array(col, dtype=float) for col in zip(*flat))
    else:
        amp = omega = phase = np.zeros(0)
    return (p, v, amp, omega, phase, offsets)


def _affine_sin_eval(low, t, order):
    p, v, amp, omega, phase, off = low
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    tt = np.atleast_1d(t_arr)
    out = np.zeros((tt.size, 3))
    for i in range(3):
        sl = slice(off[i], off[i + 1])
        if order == 0:
            acc = p[i] + v[i] * tt
            if off[i + 1] > off[i]:
                acc = acc + np.sin(np.outer(tt, omega[sl]) + phase[sl]) @ amp[sl]
        elif order == 1:
            acc = np.full(tt.shape, v[i])
            if off[i + 1] > off[i]:
                acc = acc + np.cos(np.outer(tt, omega[sl]) + phase[sl]) @ (
                    amp[sl] * omega[sl]
                )
        else:
            acc = np.zeros(tt.shape)
            if off[i + 1] > off[i]:
                acc = acc - np.sin(np.outer(tt, omega[sl]) + phase[sl]) @ (
                    amp[sl] * omega[sl] ** 2
                )
        out[:, i] = acc
    return out[0] if scalar else out


def orbit_eval(o: OrbitSpec, t):
    """Return (a(t), a'(t), a''(t)) as exact closed forms."""
    return o.a(t), o.a_dot(t), o.a_ddot(t)


@dataclass(frozen=True)
class SignalComponent:
    """One component of f: polynomial coefficients plus sinusoid terms.

    value(t) = sum_j poly[j] t**j + sum_k A_k sin(w_k t + ph_k)
    """

    poly: tuple = ()
    sinusoids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "poly", tuple(float(c) for c in self.poly))
        object.__setattr__(self, "sinusoids", _as_terms(self.sinusoids))


@dataclass(frozen=True)
class SourceSignal:
    """C1-smooth vector-valued temporal signal f(t) with closed-form f'."""

    components: tuple

    def __post_init__(self):
        comps = tuple(
            c if isinstance(c, SignalComponent) else SignalComponent(**c)
            for c in self.components
        )
        if len(comps) != 3:
            raise ConfigurationError("signal needs exactly 3 components")
        object.__setattr__(self, "components", comps)

    def eval(self, t):
        """f(t); scalar t -> (3,), array t -> (n, 3)."""
        return self._eval(t, derivative=False)

    def eval_dot(self, t):
        """f'(t), closed form."""
        return self._eval(t, derivative=True)

    def _eval(self, t, derivative):
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        tt = np.atleast_1d(t_arr)
        out = np.zeros((tt.size, 3))
        for i, comp in enumerate(self.components):
            coeffs = comp.poly
            if derivative:
                coeffs = tuple(j * coeffs[j] for j in range(1, len(coeffs)))
            if coeffs:
                acc = np.polynomial.polynomial.polyval(tt, coeffs)
            else:
                acc = np.zeros(tt.shape)
            for term in comp.sinusoids:
                if derivative:
                    acc = acc + term.amplitude * term.omega * np.cos(
                        term.omega * tt + term.phase
                    )
                else:
                    acc = acc + term.amplitude * np.sin(term.omega * tt + term.phase)
            out[:, i] = acc
        return out[0] if scalar else out

    def component_arrays(self):
        """Flattened (poly, poly_off, amp, omega, phase, sin_off) for kernels."""
        poly, poly_off = [], np.zeros(4, dtype=np.int64)
        sins, sin_off = [], np.zeros(4, dtype=np.int64)
        for i, comp in enumerate(self.components):
            poly_off[i + 1] = poly_off[i] + len(comp.poly)
            poly.extend(comp.poly)
            sin_off[i + 1] = sin_off[i] + len(comp.sinusoids)
            sins.extend((s.amplitude, s.omega, s.phase) for s in comp.sinusoids)
        poly = np.array(poly, dtype=float) if poly else np.zeros(0)
        if sins:
            amp, omega, phase = (np.array(col, dtype=float) for col in zip(*sins))
        else:
            amp = omega = phase = np.zeros(0)
        return poly, poly_off, amp, omega, phase, sin_off


def _scale_component(comp: SignalComponent, factor: float):
    return (
        tuple(factor * c for c in comp.poly),
        tuple(
            SinusoidTerm(factor * s.amplitude, s.omega, s.phase)
            for s in comp.sinusoids
        ),
    )


def _add_components(a, b):
    poly_a, sin_a = a
    poly_b, sin_b = b
    n = max(len(poly_a), len(poly_b))
    poly = tuple(
        (poly_a[j] if j < len(poly_a) else 0.0) + (poly_b[j] if j < len(poly_b) else 0.0)
        for j in range(n)
    )
    return SignalComponent(poly, sin_a + sin_b)


def cross_signal(sig: SourceSignal, nu) -> SourceSignal:
    """Exact closed form of f(t) x nu as another SourceSignal.

    Each component of the cross product is a linear combination of the
    components of f, so the polynomial-plus-sinusoid form is preserved.
    """
    nu = vec3(nu)
    c = sig.components
    comps = []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        comps.append(
            _add_components(
                _scale_component(c[j], nu[k]), _scale_component(c[k], -nu[j])
            )
        )
    return SourceSignal(tuple(comps))


@dataclass(frozen=True)
class Receiver:
    """Observation point on the boundary sphere with unit outward normal."""

    position: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position))
        object.__setattr__(self, "normal", vec3(self.normal))

    @classmethod
    def on_sphere(cls, position):
        position = vec3(position)
        r = float(np.linalg.norm(position))
        if r == 0.0:
            raise ValueError("receiver cannot sit at the origin")
        return cls(position, position / r)


@dataclass(frozen=True)
class Scenario:
    """Complete experiment description. Immutable after construction."""

    c: float
    R_Gamma: float
    R_D: float
    receivers: tuple
    orbit: OrbitSpec
    signal: SourceSignal
    T0: float
    T1: float
    T: float = None

    def __post_init__(self):
        object.__setattr__(self, "receivers", tuple(self.receivers))
        if len(self.receivers) != 4:
            raise ConfigurationError("exactly 4 receivers are required")
        if self.T is None:
            object.__setattr__(self, "T", self.T0 + self.T1)


@dataclass
class TimeSeries:
    """Uniformly sampled tangential trace H x nu at one receiver."""

    grid: TimeGrid
    samples: np.ndarray
    receiver_index: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != (self.grid.n, 3):
            raise ValueError(
                "samples shape %r does not match grid length %d"
                % (self.samples.shape, self.grid.n)
            )
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    def component(self, index):
        """Column of one 1-based component (matches CSV headers H1,H2,H3)."""
        if index not in (1, 2, 3):
            raise ValueError("component index must be 1, 2 or 3")
        return self.samples[:, index - 1]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    fatal: bool
    measured: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def ok(self):
        """True when no fatal check failed."""
        return not any(c.fatal and not c.passed for c in self.checks)

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def receiver_matrix(receivers):
    """X0 (pairwise coordinate differences) and X1 (squared-norm differences)."""
    pos = np.array([r.position for r in receivers], dtype=float)
    X0 = pos[:3] - pos[1:]
    sq = np.sum(pos * pos, axis=1)
    X1 = sq[:3] - sq[1:]
    return X0, X1


_VALIDATION_GRID_N = 10_000


def validate_scenario(s: Scenario) -> ValidationReport:
    """Check the standing assumptions; report-only except where fatal.

    Fatal checks: receiver non-coplanarity and the sub-wave-speed
    assumption declared_c0 < c. Everything else is reported but does not
    block a run. The orbit bounds are verified numerically on a
    10^4-point grid over [0, T0].
    """
    checks = []
    tt = np.linspace(0.0, s.T0, _VALIDATION_GRID_N)
    a, a_dot, a_ddot = orbit_eval(s.orbit, tt)

    checks.append(
        CheckResult(
            "speed_assumption",
            0 < s.orbit.declared_c0 < s.c,
            True,
            s.orbit.declared_c0 / s.c,
            "declared_c0 must satisfy 0 < c0 < c",
        )
    )

    sup_speed = float(np.max(np.linalg.norm(a_dot, axis=1)))
    checks.append(
        CheckResult(
            "orbit_speed_bound",
            sup_speed <= s.orbit.declared_c0 * (1 + 1e-12),
            False,
            sup_speed,
            "sup |a'(t)| vs declared_c0=%g" % s.orbit.declared_c0,
        )
    )

    sup_accel = float(np.max(np.linalg.norm(a_ddot, axis=1)))
    checks.append(
        CheckResult(
            "orbit_accel_bound",
            sup_accel <= s.orbit.declared_a0 * (1 + 1e-12),
            False,
            sup_accel,
            "sup |a''(t)| vs declared_a0=%g" % s.orbit.declared_a0,
        )
    )

    sup_radius = float(np.max(np.linalg.norm(a, axis=1)))
    checks.append(
        CheckResult(
            "orbit_containment",
            sup_radius <= s.R_D * (1 + 1e-12),
            False,
            sup_radius,
            "sup |a(t)| vs R_D=%g" % s.R_D,
        )
    )

    checks.append(
        CheckResult(
            "radii_order", s.R_D < s.R_Gamma, False, s.R_D / s.R_Gamma,
            "source domain strictly inside the boundary sphere",
        )
    )

    checks.append(
        CheckResult(
            "horizon_sum",
            abs(s.T - (s.T0 + s.T1)) <= 1e-12 * max(s.T, 1.0),
            False,
            s.T,
            "T = T0 + T1",
        )
    )

    d0 = s.R_Gamma + s.R_D
    checks.append(
        CheckResult(
            "horizon_coverage",
            s.T1 >= d0 / s.c * (1 - 1e-12),
            False,
            s.T1 * s.c / d0,
            "T1 >= (R_Gamma + R_D)/c",
        )
    )

    X0, _ = receiver_matrix(s.receivers)
    det = float(np.linalg.det(X0))
    scale = float(np.linalg.norm(X0)) ** 3
    checks.append(
        CheckResult(
            "non_coplanar",
            abs(det) > 1e-12 * scale,
            True,
            abs(det) / scale if scale > 0 else 0.0,
            "|det X0| relative to ||X0||^3",
        )
    )

    worst = 0.0
    for r in s.receivers:
        radius = float(np.linalg.norm(r.position))
        worst = max(worst, abs(radius - s.R_Gamma) / s.R_Gamma)
        worst = max(worst, abs(float(np.linalg.norm(r.normal)) - 1.0))
        worst = max(
            worst,
            float(np.linalg.norm(r.normal - r.position / radius)) if radius else 1.0,
        )
    checks.append(
        CheckResult(
            "receivers_on_boundary",
            worst <= 1e-12,
            False,
            worst,
            "| |x|-R_Gamma |/R_Gamma and normal = x/|x| within 1e-12",
        )
    )

    return ValidationReport(tuple(checks))
