"""Kernel selection: compiled extension if importable, NumPy fallback otherwise.

Set EMORBIT_FORCE_PURE=1 to skip the compiled module (used by the parity
tests and the benchmark). The digitscan inversion method always runs in
the fallback path; only the default bisection has a compiled variant.
"""

import os

from . import _pykernels

_force = os.environ.get("EMORBIT_FORCE_PURE", "") not in ("", "0")
_kernels = None
if not _force:
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        _kernels = None

HAVE_COMPILED = _kernels is not None


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "pure"


def invert_g_grid(orbit, x, c, r, method, eps, t_max):
    """Invert the retarded map at each (nondecreasing) reception time in r."""
    p, v, amp, omega, phase, off = orbit.lowered
    c0 = min(orbit.declared_c0, c)
    if HAVE_COMPILED and method == "bisection":
        return _kernels.invert_g_grid(
            p, v, amp, omega, phase, off, x, float(c), r, float(eps),
            float(t_max), float(c0),
        )
    return _pykernels.invert_g_grid(
        p, v, amp, omega, phase, off, x, c, r, method, eps, t_max, c0
    )


def rk4_distance(
    v0, h, n_steps, record_every, H, t0_meas, dt_meas,
    fx_poly, fx_poly_off, fx_amp, fx_omega, fx_phase, fx_sin_off,
    scales, fixed_component, threshold, c,
):
    """Distance-ODE integration against a sampled, linearly interpolated trace."""
    impl = _kernels if HAVE_COMPILED else _pykernels
    return impl.rk4_distance(
        float(v0), float(h), int(n_steps), int(record_every), H,
        float(t0_meas), float(dt_meas),
        fx_poly, fx_poly_off, fx_amp, fx_omega, fx_phase, fx_sin_off,
        scales, int(fixed_component), float(threshold), float(c),
    )
