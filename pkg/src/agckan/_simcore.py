"""Numba kernels for the two-area AGC integration loop.

Everything here works on plain float64 scalars/arrays so the hot loop
compiles to machine code.  Attack waveforms are encoded per measurement
channel as rows ``(kind, t0, A, r, w, lam)`` with kind codes below;
disturbances as rows ``(area, onset, shape, magnitude, ramp_rate)`` with
shape 0 = step, 1 = ramp.
"""

import numpy as np
from numba import njit

ATK_NONE = 0
ATK_STEP = 1
ATK_RAMP = 2
ATK_PULSE = 3
ATK_SCALING = 4

TWO_PI = 2.0 * np.pi


@njit(cache=True)
def dead_zone(x, band):
    ax = abs(x) - band
    if ax <= 0.0:
        return 0.0
    return ax if x > 0.0 else -ax


@njit(cache=True)
def corrupt_value(kind, t0, amp, rate, width, lam, t, clean):
    """Apply one attack waveform to a clean measurement at time t."""
    if kind == ATK_NONE or t < t0:
        return clean
    if kind == ATK_STEP:
        return clean + amp
    if kind == ATK_RAMP:
        add = rate * (t - t0)
        if amp >= 0.0:
            if add > amp:
                add = amp
        else:
            if add < amp:
                add = amp
        return clean + add
    if kind == ATK_PULSE:
        if t < t0 + width:
            return clean + amp
        return clean
    if kind == ATK_SCALING:
        return clean * (1.0 + lam)
    return np.nan  # unknown kind; caller validates before entering the loop


@njit(cache=True)
def _plant_deriv(s, out, pc1, pc2, pd1, pd2, p):
    """Continuous-time derivatives of [xg1, xt1, f1, xg2, xt2, f2, ptie]."""
    (tg1, tt1, kp1, tp1, r1, _b1, _ki1, grc1, gdb1,
     tg2, tt2, kp2, tp2, r2, _b2, _ki2, grc2, gdb2, t12) = (
        p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8],
        p[9], p[10], p[11], p[12], p[13], p[14], p[15], p[16], p[17], p[18])
    out[0] = (pc1 - dead_zone(s[2], gdb1) / r1 - s[0]) / tg1
    dv = (s[0] - s[1]) / tt1
    if dv > grc1:
        dv = grc1
    elif dv < -grc1:
        dv = -grc1
    out[1] = dv
    out[2] = (-s[2] + kp1 * (s[1] - pd1 - s[6])) / tp1
    out[3] = (pc2 - dead_zone(s[5], gdb2) / r2 - s[3]) / tg2
    dv = (s[3] - s[4]) / tt2
    if dv > grc2:
        dv = grc2
    elif dv < -grc2:
        dv = -grc2
    out[4] = dv
    out[5] = (-s[5] + kp2 * (s[4] - pd2 + s[6])) / tp2
    out[6] = TWO_PI * t12 * (s[2] - s[5])


@njit(cache=True)
def simulate_core(p, dt, n_steps, rec_every, delay_steps, dist, atk):
    """Integrate the closed loop and record the measurement channels.

    p holds per-area parameters (9 each) followed by the tie coefficient,
    see AreaParams.as_row.  Returns (recorded 3 x n_rec, turbine 2 x n_rec,
    diverged_step or -1).  Recorded values are the delayed, possibly
    corrupted measurements at the record instants.
    """
    n_rec = n_steps // rec_every
    rec = np.zeros((3, n_rec))
    turb = np.zeros((2, n_rec))
    hist = np.zeros((3, n_steps + 1))  # true ptie, f1, f2 at step boundaries

    b1 = p[5]
    ki1 = p[6]
    grc1 = p[7]
    tt1 = p[1]
    b2 = p[14]
    ki2 = p[15]
    grc2 = p[16]
    tt2 = p[10]

    st = np.zeros(7)  # xg1, xt1, f1, xg2, xt2, f2, ptie
    ia1 = 0.0
    ia2 = 0.0
    k1 = np.empty(7)
    k2 = np.empty(7)
    k3 = np.empty(7)
    k4 = np.empty(7)
    tmp = np.empty(7)
    ri = 0
    for step in range(n_steps):
        t = step * dt
        # Pure transport delay on the three measurement channels.
        j = step - delay_steps
        mp = hist[0, j] if j >= 0 else 0.0
        m1 = hist[1, j] if j >= 0 else 0.0
        m2 = hist[2, j] if j >= 0 else 0.0
        mp = corrupt_value(int(atk[0, 0]), atk[0, 1], atk[0, 2], atk[0, 3], atk[0, 4], atk[0, 5], t, mp)
        m1 = corrupt_value(int(atk[1, 0]), atk[1, 1], atk[1, 2], atk[1, 3], atk[1, 4], atk[1, 5], t, m1)
        m2 = corrupt_value(int(atk[2, 0]), atk[2, 1], atk[2, 2], atk[2, 3], atk[2, 4], atk[2, 5], t, m2)
        ace1 = mp + b1 * m1
        ace2 = -mp + b2 * m2
        pc1 = -ki1 * ia1
        pc2 = -ki2 * ia2

        pd1 = 0.0
        pd2 = 0.0
        for q in range(dist.shape[0]):
            onset = dist[q, 1]
            if t < onset:
                continue
            mag = dist[q, 3]
            if dist[q, 2] == 1.0:  # ramp toward mag at given rate
                v = dist[q, 4] * (t - onset)
                if mag >= 0.0:
                    if v > mag:
                        v = mag
                else:
                    v = -v
                    if v < mag:
                        v = mag
                mag = v
            if dist[q, 0] == 0.0:
                pd1 += mag
            else:
                pd2 += mag

        # RK4 step; delay/attack inputs and load level held across stages.
        _plant_deriv(st, k1, pc1, pc2, pd1, pd2, p)
        for i in range(7):
            tmp[i] = st[i] + 0.5 * dt * k1[i]
        _plant_deriv(tmp, k2, pc1, pc2, pd1, pd2, p)
        for i in range(7):
            tmp[i] = st[i] + 0.5 * dt * k2[i]
        _plant_deriv(tmp, k3, pc1, pc2, pd1, pd2, p)
        for i in range(7):
            tmp[i] = st[i] + dt * k3[i]
        _plant_deriv(tmp, k4, pc1, pc2, pd1, pd2, p)

        xt1_prev = st[1]
        xt2_prev = st[4]
        # Anti-windup: hold each ACE integrator while its turbine is rate-saturated.
        sat1 = abs((st[0] - st[1]) / tt1) > grc1
        sat2 = abs((st[3] - st[4]) / tt2) > grc2
        for i in range(7):
            st[i] = st[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        # Hard GRC enforcement at the step boundary.
        lim = grc1 * dt
        if st[1] - xt1_prev > lim:
            st[1] = xt1_prev + lim
        elif st[1] - xt1_prev < -lim:
            st[1] = xt1_prev - lim
        lim = grc2 * dt
        if st[4] - xt2_prev > lim:
            st[4] = xt2_prev + lim
        elif st[4] - xt2_prev < -lim:
            st[4] = xt2_prev - lim
        if not sat1:
            ia1 += ace1 * dt
        if not sat2:
            ia2 += ace2 * dt

        for i in range(7):
            if not np.isfinite(st[i]):
                return rec, turb, step
        hist[0, step + 1] = st[6]
        hist[1, step + 1] = st[2]
        hist[2, step + 1] = st[5]

        if (step + 1) % rec_every == 0:
            tr = (step + 1) * dt
            jj = step + 1 - delay_steps
            vp = hist[0, jj] if jj >= 0 else 0.0
            v1 = hist[1, jj] if jj >= 0 else 0.0
            v2 = hist[2, jj] if jj >= 0 else 0.0
            rec[0, ri] = corrupt_value(int(atk[0, 0]), atk[0, 1], atk[0, 2], atk[0, 3], atk[0, 4], atk[0, 5], tr, vp)
            rec[1, ri] = corrupt_value(int(atk[1, 0]), atk[1, 1], atk[1, 2], atk[1, 3], atk[1, 4], atk[1, 5], tr, v1)
            rec[2, ri] = corrupt_value(int(atk[2, 0]), atk[2, 1], atk[2, 2], atk[2, 3], atk[2, 4], atk[2, 5], tr, v2)
            turb[0, ri] = st[1]
            turb[1, ri] = st[4]
            ri += 1
    return rec, turb, -1
