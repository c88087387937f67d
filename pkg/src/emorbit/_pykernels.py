"""Pure NumPy/Python kernels: retarded-map inversion and the distance ODE.

Same call signatures as the compiled module so the backend can swap them
freely. The g-inversion here is a globally bracketed vectorized bisection;
the compiled variant walks the sorted sample times with a warm-started
scalar bisection instead. Results agree to the requested tolerance, not
bitwise.
"""

import math

import numpy as np

from .core import HorizonError

COMPILED = False

# status codes shared with the compiled kernel
STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_BLOWUP = 2
STATUS_HORIZON = 3

_TINY = 1e-300


def _g_values(p, v, amp, omega, phase, off, x, c, t):
    d2 = np.zeros_like(t)
    for i in range(3):
        ai = p[i] + v[i] * t
        for k in range(off[i], off[i + 1]):
            ai = ai + amp[k] * np.sin(omega[k] * t + phase[k])
        di = x[i] - ai
        d2 += di * di
    return t + np.sqrt(d2) / c


def invert_g_grid(p, v, amp, omega, phase, off, x, c, r, method, eps, t_max, c0):
    """Solve g(t_k) = r_k elementwise for nondecreasing r. Returns tau array."""
    r = np.asarray(r, dtype=float)
    if method == "digitscan":
        return _digitscan_grid(p, v, amp, omega, phase, off, x, c, r, eps, t_max)
    g0 = float(_g_values(p, v, amp, omega, phase, off, x, c, np.zeros(1))[0])
    lo = np.maximum((r - g0) / (1.0 + c0 / c), 0.0)
    slope_lo = 1.0 - c0 / c
    if slope_lo > 0:
        hi = np.minimum((r - g0) / slope_lo, t_max)
    else:
        hi = np.full_like(r, t_max)
    hi = np.maximum(hi, lo)
    bad = _g_values(p, v, amp, omega, phase, off, x, c, hi) < r
    for _ in range(64):
        if not bad.any():
            break
        at_cap = bad & (hi >= t_max)
        if at_cap.any():
            raise HorizonError(
                "g(t) does not reach %d sample(s) within t_max=%g"
                % (int(at_cap.sum()), t_max)
            )
        hi = np.where(bad, np.minimum(2.0 * hi + eps, t_max), hi)
        bad = _g_values(p, v, amp, omega, phase, off, x, c, hi) < r
    else:
        raise HorizonError("bracket expansion failed within t_max=%g" % t_max)
    width = float((hi - lo).max()) if r.size else 0.0
    n_iter = 0
    if width > eps:
        n_iter = int(math.ceil(math.log2(width / eps))) + 1
    for _ in range(min(n_iter, 200)):
        mid = 0.5 * (lo + hi)
        below = _g_values(p, v, amp, omega, phase, off, x, c, mid) < r
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _digitscan_grid(p, v, amp, omega, phase, off, x, c, r, eps, t_max):
    t = np.zeros_like(r)
    dt = np.ones_like(r)
    active = dt > eps
    while active.any():
        g = _g_values(p, v, amp, omega, phase, off, x, c, t)
        back = active & ((t > t_max) | (g > r))
        fwd = active & ~back
        t = np.where(back, t - dt, np.where(fwd, t + dt, t))
        dt = np.where(back, dt / 10.0, dt)
        active = dt > eps
    return t + dt * 10.0


def rk4_distance(
    v0,
    h,
    n_steps,
    record_every,
    H,
    t0_meas,
    dt_meas,
    fx_poly,
    fx_poly_off,
    fx_amp,
    fx_omega,
    fx_phase,
    fx_sin_off,
    scales,
    fixed_component,
    threshold,
    c,
):
    """Integrate v' = c*fx_i(t) / (4 pi v H_i(t + v/c)) - c with classic RK4.

    H is the (n, 3) sampled trace on the uniform grid t0_meas + k*dt_meas,
    accessed by linear interpolation. fixed_component is 0-based, or -1 to
    pick argmax |fx_j(t)| per evaluation. Records v every record_every
    steps (v0 first).

    Returns (v_out, status, fail_step, fallback_count, first_fb_t,
    last_fb_t, fb_component_counts).
    """
    n_meas = H.shape[0]
    out_n = n_steps // record_every + 1
    v_out = np.full(out_n, np.nan)
    v_out[0] = v0

    poly = [list(fx_poly[fx_poly_off[i]: fx_poly_off[i + 1]]) for i in range(3)]
    sins = [
        list(
            zip(
                fx_amp[fx_sin_off[i]: fx_sin_off[i + 1]],
                fx_omega[fx_sin_off[i]: fx_sin_off[i + 1]],
                fx_phase[fx_sin_off[i]: fx_sin_off[i + 1]],
            )
        )
        for i in range(3)
    ]
    floors = [max(threshold * float(scales[i]), _TINY) for i in range(3)]
    Hflat = H.ravel()
    sin = math.sin

    fb_count = 0
    first_fb_t = math.nan
    last_fb_t = math.nan
    fb_comp = np.zeros(3, dtype=np.int64)
    state = [STATUS_OK, 0]

    def rhs(t, vv):
        if not (vv > 0.0) or not math.isfinite(vv):
            state[0] = STATUS_BLOWUP
            return 0.0
        u = t + vv / c
        s = (u - t0_meas) / dt_meas
        i0 = int(math.floor(s))
        if i0 < 0:
            if s > -1e-9:
                i0, frac = 0, 0.0
            else:
                state[0] = STATUS_HORIZON
                return 0.0
        elif i0 >= n_meas - 1:
            if s <= n_meas - 1 + 1e-9:
                i0, frac = n_meas - 2, 1.0
            else:
                state[0] = STATUS_HORIZON
                return 0.0
        else:
            frac = s - i0
        # Left endpoint exactly zero with a nonzero right endpoint marks the
        # cell holding the arrival discontinuity (pre-arrival samples are
        # exact zeros, and noise preserves them). Interpolating across the
        # jump would shrink the denominator, so extrapolate back from the
        # post-arrival side instead.
        b = 3 * i0
        hs3 = [0.0, 0.0, 0.0]
        for ci in range(3):
            left = Hflat[b + ci]
            right = Hflat[b + 3 + ci]
            if left == 0.0 and right != 0.0:
                if i0 + 2 < n_meas:
                    hs3[ci] = right + (frac - 1.0) * (Hflat[b + 6 + ci] - right)
                else:
                    hs3[ci] = right
            else:
                hs3[ci] = left + frac * (right - left)
        h1, h2, h3 = hs3
        f1 = f2 = f3 = 0.0
        for idx in range(3):
            acc = 0.0
            for coeff in reversed(poly[idx]):
                acc = acc * t + coeff
            for (am, om, ph) in sins[idx]:
                acc += am * sin(om * t + ph)
            if idx == 0:
                f1 = acc
            elif idx == 1:
                f2 = acc
            else:
                f3 = acc
        fs = (f1, f2, f3)
        hs = (h1, h2, h3)
        if fixed_component >= 0:
            i = fixed_component
        else:
            i = 0
            if abs(f2) > abs(fs[i]):
                i = 1
            if abs(f3) > abs(fs[i]):
                i = 2
        if abs(hs[i]) < floors[i]:
            order = sorted(range(3), key=lambda j: (-abs(fs[j]), j))
            pick = -1
            for j in order:
                if abs(hs[j]) >= floors[j]:
                    pick = j
                    break
            if pick < 0:
                for j in order:
                    if abs(hs[j]) >= _TINY:
                        pick = j
                        break
            if pick < 0:
                state[0] = STATUS_DEGENERATE
                return 0.0
            nonlocal fb_count, first_fb_t, last_fb_t
            if fb_count == 0:
                first_fb_t = t
            last_fb_t = t
            fb_count += 1
            fb_comp[pick] += 1
            i = pick
        return c * fs[i] / (4.0 * math.pi * vv * hs[i]) - c

    vv = float(v0)
    half = 0.5 * h
    sixth = h / 6.0
    for step in range(n_steps):
        t = step * h
        k1 = rhs(t, vv)
        k2 = rhs(t + half, vv + half * k1)
        k3 = rhs(t + half, vv + half * k2)
        k4 = rhs(t + h, vv + h * k3)
        if state[0] != STATUS_OK:
            return v_out, state[0], step, fb_count, first_fb_t, last_fb_t, fb_comp
        vv = vv + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(vv) or vv <= 0.0:
            return v_out, STATUS_BLOWUP, step, fb_count, first_fb_t, last_fb_t, fb_comp
        if (step + 1) % record_every == 0:
            v_out[(step + 1) // record_every] = vv
    return v_out, STATUS_OK, -1, fb_count, first_fb_t, last_fb_t, fb_comp
