"""Pure-Python closed-loop platoon stepper.

Line-for-line mirror of the compiled kernel (_kernel.pyx); both must produce
bit-identical trajectories, so keep arithmetic expression order in sync when
editing either one. This path is selected automatically when the compiled
extension is unavailable and is exercised directly by the tests and the
benchmark.
"""

from math import fabs, isfinite, sqrt


def _max_accel(v):
    if v < 4.4:
        return 0.55
    elif v < 8.9:
        return 0.49
    elif v < 13.3:
        return 0.40
    elif v < 17.8:
        return 0.24
    elif v < 22.2:
        return 0.15
    return 0.12


def _clamp_accel(a, v, v_max, decel_limit):
    lo = -decel_limit
    hi = _max_accel(v)
    if v >= v_max and hi > 0.0:
        hi = 0.0
    if v <= 0.0 and lo < 0.0:
        lo = 0.0
    if a < lo:
        return lo
    if a > hi:
        return hi
    return a


def _snapshot(idx, n_veh, h, hist_p, hist_v, depth, pre_p, pre_v, out_p, out_v):
    if idx >= 0:
        row = idx % depth
        for i in range(n_veh):
            out_p[i] = hist_p[row, i]
            out_v[i] = hist_v[row, i]
    else:
        t = idx * h
        for i in range(n_veh):
            out_p[i] = pre_p[i] + pre_v[i] * t
            out_v[i] = pre_v[i]


def _controls(n, P, V, L, kd1, kd2, kv, kc, tg, v_des, last_mode, out_u):
    for i in range(1, n + 1):
        d_l = P[i - 1] - P[i] - L
        if i < n or last_mode == 0:
            d_f = P[i] - P[i + 1] - L
            out_u[i - 1] = (kd1 * (d_l - d_f)
                            + kd2 * (d_l - tg * V[i])
                            + kv * ((V[i - 1] - V[i]) - (V[i] - V[i + 1]))
                            + kc * (v_des - V[i]))
        else:
            out_u[i - 1] = kd1 * (d_l - tg * V[i]) + kv * (V[i - 1] - V[i])


def _stage_deriv(n, sp, sv, sa, vp, vv, u_stage, plant_mode, last_mode,
                 c1, c2, c3, lag, kd1, kv, kc, tg, v_des, L, dp, dv, da):
    for i in range(n):
        vi = sv[i]
        ai = sa[i]
        if plant_mode == 0:
            # resistance-compensated input: the actuator lag acts on the net
            # acceleration, d(v')/dt = (u_c - v')/T_e
            vdot = ai - (c1 * vi * vi + c2 * vi + c3)
            dp[i] = vi
            dv[i] = vdot
            da[i] = (2.0 * c1 * vi + c2) * vdot + (u_stage[i] - vdot) / lag
        else:
            dp[i] = vi
            dv[i] = ai
            da[i] = (u_stage[i] - ai) / lag
    if last_mode == 0:
        dvp = vv
        dvv = (kd1 * ((sp[n - 1] - vp - L) - vv * tg)
               + kv * (sv[n - 1] - vv) + kc * (v_des - vv))
    else:
        dvp = 0.0
        dvv = 0.0
    return dvp, dvv


def run_closed_loop(leader_p, leader_v, leader_p_half, leader_v_half,
                    p, v, a, virt_p, virt_v,
                    h, n_steps, d_delay,
                    c1, c2, c3, lag, L,
                    kd1, kd2, kv, kc, tg, v_des, v_max,
                    last_mode, plant_mode,
                    use_clamps, decel_limit, tg_floor,
                    stride, warmup_steps,
                    rec_p, rec_v, rec_a, rec_u, rec_virt,
                    sste, ssse, acc,
                    hist_p, hist_v, scratch, snap):
    n = p.shape[0]
    n_veh = n + 2
    depth = hist_p.shape[0]
    status = 0
    term_step = n_steps
    k = 0
    half_h = 0.5 * h
    sixth_h = h / 6.0
    sqrt_n = sqrt(n)

    y0p, y0v, y0a = scratch[0], scratch[1], scratch[2]
    d1p, d1v, d1a = scratch[3], scratch[4], scratch[5]
    d2p, d2v, d2a = scratch[6], scratch[7], scratch[8]
    d3p, d3v, d3a = scratch[9], scratch[10], scratch[11]
    d4p, d4v, d4a = scratch[12], scratch[13], scratch[14]
    u_s, u_e, u_m = scratch[15], scratch[16], scratch[17]
    snap_p, snap_v, pre_p, pre_v = snap[0], snap[1], snap[2], snap[3]

    pre_p[0] = leader_p[0]
    pre_v[0] = leader_v[0]
    for i in range(n):
        pre_p[i + 1] = p[i]
        pre_v[i + 1] = v[i]
    pre_p[n + 1] = virt_p
    pre_v[n + 1] = virt_v

    while True:
        s1 = 0.0
        s2 = 0.0
        abs_sum = 0.0
        for i in range(n):
            if i == 0:
                gap = leader_p[k] - p[0] - L
                dvel = leader_v[k] - v[0]
            else:
                gap = p[i - 1] - p[i] - L
                dvel = v[i - 1] - v[i]
            vi = v[i] if v[i] > tg_floor else tg_floor
            tgm = gap / vi
            e = tgm - tg
            s1 = s1 + e * e
            abs_sum = abs_sum + fabs(e)
            s2 = s2 + dvel * dvel
        sste[k] = s1
        ssse[k] = s2
        acc[0] = acc[0] + sqrt(s2 / n)
        acc[1] = acc[1] + abs_sum / sqrt_n
        acc[2] = acc[2] + sqrt(s1 / n)
        if s1 > acc[3]:
            acc[3] = s1
        if k >= warmup_steps and s1 > acc[4]:
            acc[4] = s1
        if s2 > acc[5]:
            acc[5] = s2

        if d_delay > 0:
            _snapshot(k - d_delay, n_veh, h, hist_p, hist_v, depth,
                      pre_p, pre_v, snap_p, snap_v)
            _controls(n, snap_p, snap_v, L, kd1, kd2, kv, kc, tg, v_des,
                      last_mode, u_s)
        else:
            snap_p[0] = leader_p[k]
            snap_v[0] = leader_v[k]
            for i in range(n):
                snap_p[i + 1] = p[i]
                snap_v[i + 1] = v[i]
            snap_p[n + 1] = virt_p
            snap_v[n + 1] = virt_v
            _controls(n, snap_p, snap_v, L, kd1, kd2, kv, kc, tg, v_des,
                      last_mode, u_s)

        if k % stride == 0:
            r = k // stride
            rec_p[r, 0] = leader_p[k]
            rec_v[r, 0] = leader_v[k]
            rec_u[r, 0] = 0.0
            for i in range(n):
                rec_p[r, i + 1] = p[i]
                rec_v[r, i + 1] = v[i]
                rec_a[r, i + 1] = a[i]
                rec_u[r, i + 1] = u_s[i]
            rec_virt[r, 0] = virt_p
            rec_virt[r, 1] = virt_v

        if k >= n_steps or status != 0:
            break

        if d_delay > 0:
            row = k % depth
            hist_p[row, 0] = leader_p[k]
            hist_v[row, 0] = leader_v[k]
            for i in range(n):
                hist_p[row, i + 1] = p[i]
                hist_v[row, i + 1] = v[i]
            hist_p[row, n + 1] = virt_p
            hist_v[row, n + 1] = virt_v

            _snapshot(k + 1 - d_delay, n_veh, h, hist_p, hist_v, depth,
                      pre_p, pre_v, snap_p, snap_v)
            _controls(n, snap_p, snap_v, L, kd1, kd2, kv, kc, tg, v_des,
                      last_mode, u_e)
            for i in range(n):
                u_m[i] = 0.5 * (u_s[i] + u_e[i])

        for i in range(n):
            y0p[i] = p[i]
            y0v[i] = v[i]
            y0a[i] = a[i]
        y0vp = virt_p
        y0vv = virt_v

        d1vp, d1vv = _stage_deriv(n, y0p, y0v, y0a, y0vp, y0vv, u_s,
                                  plant_mode, last_mode, c1, c2, c3, lag,
                                  kd1, kv, kc, tg, v_des, L, d1p, d1v, d1a)

        for i in range(n):
            p[i] = y0p[i] + half_h * d1p[i]
            v[i] = y0v[i] + half_h * d1v[i]
            a[i] = y0a[i] + half_h * d1a[i]
        svp = y0vp + half_h * d1vp
        svv = y0vv + half_h * d1vv
        if d_delay == 0:
            snap_p[0] = leader_p_half[k]
            snap_v[0] = leader_v_half[k]
            for i in range(n):
                snap_p[i + 1] = p[i]
                snap_v[i + 1] = v[i]
            snap_p[n + 1] = svp
            snap_v[n + 1] = svv
            _controls(n, snap_p, snap_v, L, kd1, kd2, kv, kc, tg, v_des,
                      last_mode, u_m)
        d2vp, d2vv = _stage_deriv(n, p, v, a, svp, svv, u_m,
                                  plant_mode, last_mode, c1, c2, c3, lag,
                                  kd1, kv, kc, tg, v_des, L, d2p, d2v, d2a)

        for i in range(n):
            p[i] = y0p[i] + half_h * d2p[i]
            v[i] = y0v[i] + half_h * d2v[i]
            a[i] = y0a[i] + half_h * d2a[i]
        svp = y0vp + half_h * d2vp
        svv = y0vv + half_h * d2vv
        if d_delay == 0:
            snap_p[0] = leader_p_half[k]
            snap_v[0] = leader_v_half[k]
            for i in range(n):
                snap_p[i + 1] = p[i]
                snap_v[i + 1] = v[i]
            snap_p[n + 1] = svp
            snap_v[n + 1] = svv
            _controls(n, snap_p, snap_v, L, kd1, kd2, kv, kc, tg, v_des,
                      last_mode, u_m)
        d3vp, d3vv = _stage_deriv(n, p, v, a, svp, svv, u_m,
                                  plant_mode, last_mode, c1, c2, c3, lag,
                                  kd1, kv, kc, tg, v_des, L, d3p, d3v, d3a)

        for i in range(n):
            p[i] = y0p[i] + h * d3p[i]
            v[i] = y0v[i] + h * d3v[i]
            a[i] = y0a[i] + h * d3a[i]
        svp = y0vp + h * d3vp
        svv = y0vv + h * d3vv
        if d_delay == 0:
            snap_p[0] = leader_p[k + 1]
            snap_v[0] = leader_v[k + 1]
            for i in range(n):
                snap_p[i + 1] = p[i]
                snap_v[i + 1] = v[i]
            snap_p[n + 1] = svp
            snap_v[n + 1] = svv
            _controls(n, snap_p, snap_v, L, kd1, kd2, kv, kc, tg, v_des,
                      last_mode, u_e)
        d4vp, d4vv = _stage_deriv(n, p, v, a, svp, svv, u_e,
                                  plant_mode, last_mode, c1, c2, c3, lag,
                                  kd1, kv, kc, tg, v_des, L, d4p, d4v, d4a)

        for i in range(n):
            p[i] = y0p[i] + sixth_h * (d1p[i] + 2.0 * d2p[i] + 2.0 * d3p[i] + d4p[i])
            v[i] = y0v[i] + sixth_h * (d1v[i] + 2.0 * d2v[i] + 2.0 * d3v[i] + d4v[i])
            a[i] = y0a[i] + sixth_h * (d1a[i] + 2.0 * d2a[i] + 2.0 * d3a[i] + d4a[i])
        virt_p = y0vp + sixth_h * (d1vp + 2.0 * d2vp + 2.0 * d3vp + d4vp)
        virt_v = y0vv + sixth_h * (d1vv + 2.0 * d2vv + 2.0 * d3vv + d4vv)

        if use_clamps:
            for i in range(n):
                if v[i] < 0.0:
                    v[i] = 0.0
                vi = v[i]
                if plant_mode == 0:
                    resist = c1 * vi * vi + c2 * vi + c3
                    a[i] = _clamp_accel(a[i] - resist, vi, v_max, decel_limit) + resist
                else:
                    a[i] = _clamp_accel(a[i], vi, v_max, decel_limit)

        k = k + 1

        bad = 0.0
        for i in range(n):
            bad = bad + p[i] + v[i] + a[i]
        bad = bad + virt_p + virt_v
        if not isfinite(bad) or fabs(bad) > 1e30:
            status = 2
            term_step = k
        else:
            for i in range(n):
                if i == 0:
                    gap = leader_p[k] - p[0] - L
                else:
                    gap = p[i - 1] - p[i] - L
                if gap <= 0.0:
                    status = 1
                    term_step = k
                    break

    return status, term_step
