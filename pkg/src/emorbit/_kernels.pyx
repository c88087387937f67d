# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: warm-started retarded-map inversion and the RK4
distance-ODE loop. Call signatures mirror the pure-Python module."""

from libc.math cimport fabs, floor, isfinite, sin, sqrt, M_PI

import numpy as np

cimport numpy as cnp

from .core import HorizonError

cnp.import_array()

COMPILED = True

STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_BLOWUP = 2
STATUS_HORIZON = 3

cdef int _ST_OK = 0
cdef int _ST_DEGENERATE = 1
cdef int _ST_BLOWUP = 2
cdef int _ST_HORIZON = 3

cdef double _TINY = 1e-300


cdef double _g_eval(double t, double[::1] p, double[::1] v, double[::1] amp,
                    double[::1] omega, double[::1] phase, cnp.int64_t[::1] off,
                    double[::1] x, double c) nogil:
    cdef double d2 = 0.0, ai, di
    cdef int i
    cdef cnp.int64_t k
    for i in range(3):
        ai = p[i] + v[i] * t
        for k in range(off[i], off[i + 1]):
            ai += amp[k] * sin(omega[k] * t + phase[k])
        di = x[i] - ai
        d2 += di * di
    return t + sqrt(d2) / c


def invert_g_grid(p_in, v_in, amp_in, omega_in, phase_in, off_in, x_in,
                  double c, r_in, double eps, double t_max, double c0):
    """Scalar bisection per sample, warm-started from the previous root.

    Requires nondecreasing r (reception times), which makes each bracket
    one grid step wide instead of the full horizon.
    """
    cdef double[::1] p = np.ascontiguousarray(p_in, dtype=np.float64)
    cdef double[::1] v = np.ascontiguousarray(v_in, dtype=np.float64)
    cdef double[::1] amp = np.ascontiguousarray(amp_in, dtype=np.float64)
    cdef double[::1] omega = np.ascontiguousarray(omega_in, dtype=np.float64)
    cdef double[::1] phase = np.ascontiguousarray(phase_in, dtype=np.float64)
    cdef cnp.int64_t[::1] off = np.ascontiguousarray(off_in, dtype=np.int64)
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(r_in, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double slope_lo = 1.0 - c0 / c
    cdef double t_prev = 0.0, rk, lo, hi, mid
    cdef int guard, failed = 0
    cdef Py_ssize_t k
    with nogil:
        for k in range(n):
            rk = r[k]
            lo = t_prev - 2.0 * eps
            if lo < 0.0:
                lo = 0.0
            if _g_eval(lo, p, v, amp, omega, phase, off, x, c) > rk:
                lo = 0.0
            if slope_lo > 0.0:
                hi = lo + (rk - _g_eval(lo, p, v, amp, omega, phase, off, x, c)) / slope_lo
            else:
                hi = t_max
            if hi > t_max:
                hi = t_max
            if hi < lo:
                hi = lo
            guard = 0
            while _g_eval(hi, p, v, amp, omega, phase, off, x, c) < rk:
                if hi >= t_max or guard >= 64:
                    failed = 1
                    break
                hi = 2.0 * hi + eps
                if hi > t_max:
                    hi = t_max
                guard += 1
            if failed:
                break
            while hi - lo > eps:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if _g_eval(mid, p, v, amp, omega, phase, off, x, c) < rk:
                    lo = mid
                else:
                    hi = mid
            t_prev = 0.5 * (lo + hi)
            out[k] = t_prev
    if failed:
        raise HorizonError("g(t) does not reach a sample within t_max=%g" % t_max)
    return out_arr


def rk4_distance(double v0, double h, long long n_steps, long long record_every,
                 H_in, double t0_meas, double dt_meas,
                 fx_poly_in, fx_poly_off_in, fx_amp_in, fx_omega_in,
                 fx_phase_in, fx_sin_off_in, scales_in,
                 long long fixed_component, double threshold, double c):
    """Classic RK4 for the distance ODE against an interpolated trace.

    Same contract as the pure-Python kernel: returns (v_out, status,
    fail_step, fallback_count, first_fb_t, last_fb_t, fb_component_counts).
    """
    cdef double[:, ::1] H = np.ascontiguousarray(H_in, dtype=np.float64)
    cdef double[::1] poly = np.ascontiguousarray(fx_poly_in, dtype=np.float64)
    cdef cnp.int64_t[::1] poly_off = np.ascontiguousarray(fx_poly_off_in, dtype=np.int64)
    cdef double[::1] amp = np.ascontiguousarray(fx_amp_in, dtype=np.float64)
    cdef double[::1] omega = np.ascontiguousarray(fx_omega_in, dtype=np.float64)
    cdef double[::1] phase = np.ascontiguousarray(fx_phase_in, dtype=np.float64)
    cdef cnp.int64_t[::1] sin_off = np.ascontiguousarray(fx_sin_off_in, dtype=np.int64)
    cdef double[::1] scales = np.ascontiguousarray(scales_in, dtype=np.float64)
    cdef Py_ssize_t n_meas = H.shape[0]
    out_arr = np.full(n_steps // record_every + 1, np.nan)
    cdef double[::1] v_out = out_arr
    fb_comp_arr = np.zeros(3, dtype=np.int64)
    cdef cnp.int64_t[::1] fb_comp = fb_comp_arr
    v_out[0] = v0

    cdef double floors[3]
    cdef int i
    for i in range(3):
        floors[i] = threshold * scales[i]
        if floors[i] < _TINY:
            floors[i] = _TINY

    cdef long long step, fb_count = 0, fail_step = -1
    cdef int status = _ST_OK
    cdef double first_fb = float("nan"), last_fb = float("nan")
    cdef double vv = v0, t, half = 0.5 * h, sixth = h / 6.0
    cdef double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0

    # rhs state shared via C locals; Cython closures are slow, so inline
    cdef double u, s, frac, acc, hi_val, fi_val
    cdef Py_ssize_t i0
    cdef double fvals[3]
    cdef double hvals[3]
    cdef long long j, kk
    cdef int pick, comp, stage, order0, order1, order2, tmp_i
    cdef double stage_t, stage_v

    with nogil:
        for step in range(n_steps):
            t = step * h
            for stage in range(4):
                if stage == 0:
                    stage_t = t
                    stage_v = vv
                elif stage == 1:
                    stage_t = t + half
                    stage_v = vv + half * k1
                elif stage == 2:
                    stage_t = t + half
                    stage_v = vv + half * k2
                else:
                    stage_t = t + h
                    stage_v = vv + h * k3

                if not isfinite(stage_v) or stage_v <= 0.0:
                    status = _ST_BLOWUP
                    fail_step = step
                    break
                u = stage_t + stage_v / c
                s = (u - t0_meas) / dt_meas
                i0 = <Py_ssize_t> floor(s)
                if i0 < 0:
                    if s > -1e-9:
                        i0 = 0
                        frac = 0.0
                    else:
                        status = _ST_HORIZON
                        fail_step = step
                        break
                elif i0 >= n_meas - 1:
                    if s <= n_meas - 1 + 1e-9:
                        i0 = n_meas - 2
                        frac = 1.0
                    else:
                        status = _ST_HORIZON
                        fail_step = step
                        break
                else:
                    frac = s - i0
                for comp in range(3):
                    # A zero left endpoint next to a nonzero right endpoint is
                    # the cell holding the arrival discontinuity (pre-arrival
                    # samples are exact zeros and noise preserves them), so
                    # extrapolate back from the post-arrival side instead of
                    # interpolating across the jump.
                    if H[i0, comp] == 0.0 and H[i0 + 1, comp] != 0.0:
                        if i0 + 2 < n_meas:
                            hvals[comp] = H[i0 + 1, comp] + (frac - 1.0) * (
                                H[i0 + 2, comp] - H[i0 + 1, comp])
                        else:
                            hvals[comp] = H[i0 + 1, comp]
                    else:
                        hvals[comp] = H[i0, comp] + frac * (H[i0 + 1, comp] - H[i0, comp])
                    acc = 0.0
                    for j in range(poly_off[comp + 1] - 1, poly_off[comp] - 1, -1):
                        acc = acc * stage_t + poly[j]
                    for kk in range(sin_off[comp], sin_off[comp + 1]):
                        acc += amp[kk] * sin(omega[kk] * stage_t + phase[kk])
                    fvals[comp] = acc

                if fixed_component >= 0:
                    pick = <int> fixed_component
                else:
                    pick = 0
                    if fabs(fvals[1]) > fabs(fvals[pick]):
                        pick = 1
                    if fabs(fvals[2]) > fabs(fvals[pick]):
                        pick = 2
                if fabs(hvals[pick]) < floors[pick]:
                    # descending |fvals| with ties to the lowest index
                    order0 = 0
                    order1 = 1
                    order2 = 2
                    if fabs(fvals[order1]) > fabs(fvals[order0]):
                        tmp_i = order0; order0 = order1; order1 = tmp_i
                    if fabs(fvals[order2]) > fabs(fvals[order1]):
                        tmp_i = order1; order1 = order2; order2 = tmp_i
                    if fabs(fvals[order1]) > fabs(fvals[order0]):
                        tmp_i = order0; order0 = order1; order1 = tmp_i
                    pick = -1
                    if fabs(hvals[order0]) >= floors[order0]:
                        pick = order0
                    elif fabs(hvals[order1]) >= floors[order1]:
                        pick = order1
                    elif fabs(hvals[order2]) >= floors[order2]:
                        pick = order2
                    elif fabs(hvals[order0]) >= _TINY:
                        pick = order0
                    elif fabs(hvals[order1]) >= _TINY:
                        pick = order1
                    elif fabs(hvals[order2]) >= _TINY:
                        pick = order2
                    if pick < 0:
                        status = _ST_DEGENERATE
                        fail_step = step
                        break
                    if fb_count == 0:
                        first_fb = stage_t
                    last_fb = stage_t
                    fb_count += 1
                    fb_comp[pick] += 1

                hi_val = hvals[pick]
                fi_val = fvals[pick]
                if stage == 0:
                    k1 = c * fi_val / (4.0 * M_PI * stage_v * hi_val) - c
                elif stage == 1:
                    k2 = c * fi_val / (4.0 * M_PI * stage_v * hi_val) - c
                elif stage == 2:
                    k3 = c * fi_val / (4.0 * M_PI * stage_v * hi_val) - c
                else:
                    k4 = c * fi_val / (4.0 * M_PI * stage_v * hi_val) - c
            if status != _ST_OK:
                break
            vv = vv + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not isfinite(vv) or vv <= 0.0:
                status = _ST_BLOWUP
                fail_step = step
                break
            if (step + 1) % record_every == 0:
                v_out[(step + 1) // record_every] = vv
    return (out_arr, status, fail_step, fb_count, first_fb, last_fb, fb_comp_arr)
