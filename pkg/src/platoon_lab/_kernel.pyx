# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop platoon stepper.

Mirrors platoon_lab._kernel_py operation for operation; both must produce
bit-identical trajectories (the build disables FP contraction). Keep the
arithmetic expression order in sync with the fallback when editing.
"""

from libc.math cimport sqrt, fabs, isfinite


cdef inline double _max_accel(double v) noexcept nogil:
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


cdef inline double _clamp_accel(double a, double v, double v_max,
                                double decel_limit) noexcept nogil:
    cdef double lo = -decel_limit
    cdef double hi = _max_accel(v)
    if v >= v_max and hi > 0.0:
        hi = 0.0
    if v <= 0.0 and lo < 0.0:
        lo = 0.0
    if a < lo:
        return lo
    if a > hi:
        return hi
    return a


cdef void _snapshot(int idx, int n_veh, double h,
                    double[:, :] hist_p, double[:, :] hist_v, int depth,
                    double[:] pre_p, double[:] pre_v,
                    double[:] out_p, double[:] out_v) noexcept nogil:
    """States of all vehicles at grid step ``idx`` (cruise pre-history if idx < 0)."""
    cdef int i, row
    cdef double t
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


cdef void _controls(int n, double[:] P, double[:] V, double L,
                    double kd1, double kd2, double kv, double kc,
                    double tg, double v_des, int last_mode,
                    double[:] out_u) noexcept nogil:
    """Exogenous commands for followers 1..n from one consistent snapshot.

    P/V index 0 is the leader, 1..n the followers, n+1 the virtual truck.
    """
    cdef int i
    cdef double d_l, d_f
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


cdef void _stage_deriv(int n, double[:] sp, double[:] sv, double[:] sa,
                       double vp, double vv, double[:] u_stage,
                       int plant_mode, int last_mode,
                       double c1, double c2, double c3, double lag,
                       double kd1, double kv, double kc,
                       double tg, double v_des, double L,
                       double[:] dp, double[:] dv, double[:] da,
                       double* dvp, double* dvv) noexcept nogil:
    cdef int i
    cdef double vi, ai, vdot
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
        dvp[0] = vv
        dvv[0] = (kd1 * ((sp[n - 1] - vp - L) - vv * tg)
                  + kv * (sv[n - 1] - vv) + kc * (v_des - vv))
    else:
        dvp[0] = 0.0
        dvv[0] = 0.0


def run_closed_loop(double[:] leader_p, double[:] leader_v,
                    double[:] leader_p_half, double[:] leader_v_half,
                    double[:] p, double[:] v, double[:] a,
                    double virt_p, double virt_v,
                    double h, int n_steps, int d_delay,
                    double c1, double c2, double c3, double lag, double L,
                    double kd1, double kd2, double kv, double kc,
                    double tg, double v_des, double v_max,
                    int last_mode, int plant_mode,
                    int use_clamps, double decel_limit, double tg_floor,
                    int stride, long warmup_steps,
                    double[:, :] rec_p, double[:, :] rec_v,
                    double[:, :] rec_a, double[:, :] rec_u,
                    double[:, :] rec_virt,
                    double[:] sste, double[:] ssse, double[:] acc,
                    double[:, :] hist_p, double[:, :] hist_v,
                    double[:, :] scratch, double[:, :] snap):
    cdef int n = p.shape[0]
    cdef int n_veh = n + 2
    cdef int depth = hist_p.shape[0]
    cdef int status = 0
    cdef long term_step = n_steps
    cdef long k = 0
    cdef int i, r, row
    cdef double half_h = 0.5 * h
    cdef double sixth_h = h / 6.0
    cdef double sqrt_n = sqrt(<double> n)

    # scratch rows
    cdef double[:] y0p = scratch[0]
    cdef double[:] y0v = scratch[1]
    cdef double[:] y0a = scratch[2]
    cdef double[:] d1p = scratch[3]
    cdef double[:] d1v = scratch[4]
    cdef double[:] d1a = scratch[5]
    cdef double[:] d2p = scratch[6]
    cdef double[:] d2v = scratch[7]
    cdef double[:] d2a = scratch[8]
    cdef double[:] d3p = scratch[9]
    cdef double[:] d3v = scratch[10]
    cdef double[:] d3a = scratch[11]
    cdef double[:] d4p = scratch[12]
    cdef double[:] d4v = scratch[13]
    cdef double[:] d4a = scratch[14]
    cdef double[:] u_s = scratch[15]
    cdef double[:] u_e = scratch[16]
    cdef double[:] u_m = scratch[17]
    cdef double[:] snap_p = snap[0]
    cdef double[:] snap_v = snap[1]
    cdef double[:] pre_p = snap[2]
    cdef double[:] pre_v = snap[3]

    cdef double y0vp, y0vv, svp, svv
    cdef double d1vp, d1vv, d2vp, d2vv, d3vp, d3vv, d4vp, d4vv
    cdef double gap, tgm, e, s1, s2, abs_sum, dvel, vi, ai, bad, resist

    with nogil:
        # pre-history anchors: cruise at the initial speeds
        pre_p[0] = leader_p[0]
        pre_v[0] = leader_v[0]
        for i in range(n):
            pre_p[i + 1] = p[i]
            pre_v[i + 1] = v[i]
        pre_p[n + 1] = virt_p
        pre_v[n + 1] = virt_v

        while True:
            # metrics at step k
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
            acc[0] = acc[0] + sqrt(s2 / n)       # speed-error fitness term
            acc[1] = acc[1] + abs_sum / sqrt_n   # literal time-gap fitness term
            acc[2] = acc[2] + sqrt(s1 / n)       # conventional-RMSE alternative
            if s1 > acc[3]:
                acc[3] = s1
            if k >= warmup_steps and s1 > acc[4]:
                acc[4] = s1
            if s2 > acc[5]:
                acc[5] = s2

            # command issued at t_k
            if d_delay > 0:
                _snapshot(<int> (k - d_delay), n_veh, h, hist_p, hist_v, depth,
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

            # record step k
            if k % stride == 0:
                r = <int> (k // stride)
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

            # push step k into the history ring, then step to k+1
            if d_delay > 0:
                row = <int> (k % depth)
                hist_p[row, 0] = leader_p[k]
                hist_v[row, 0] = leader_v[k]
                for i in range(n):
                    hist_p[row, i + 1] = p[i]
                    hist_v[row, i + 1] = v[i]
                hist_p[row, n + 1] = virt_p
                hist_v[row, n + 1] = virt_v

                _snapshot(<int> (k + 1 - d_delay), n_veh, h, hist_p, hist_v, depth,
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

            # stage 1 at t_k
            _stage_deriv(n, y0p, y0v, y0a, y0vp, y0vv, u_s, plant_mode, last_mode,
                         c1, c2, c3, lag, kd1, kv, kc, tg, v_des, L,
                         d1p, d1v, d1a, &d1vp, &d1vv)

            # stage 2 at t_k + h/2
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
            _stage_deriv(n, p, v, a, svp, svv, u_m, plant_mode, last_mode,
                         c1, c2, c3, lag, kd1, kv, kc, tg, v_des, L,
                         d2p, d2v, d2a, &d2vp, &d2vv)

            # stage 3 at t_k + h/2
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
            _stage_deriv(n, p, v, a, svp, svv, u_m, plant_mode, last_mode,
                         c1, c2, c3, lag, kd1, kv, kc, tg, v_des, L,
                         d3p, d3v, d3a, &d3vp, &d3vv)

            # stage 4 at t_k + h
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
            _stage_deriv(n, p, v, a, svp, svv, u_e, plant_mode, last_mode,
                         c1, c2, c3, lag, kd1, kv, kc, tg, v_des, L,
                         d4p, d4v, d4a, &d4vp, &d4vv)

            for i in range(n):
                p[i] = y0p[i] + sixth_h * (d1p[i] + 2.0 * d2p[i] + 2.0 * d3p[i] + d4p[i])
                v[i] = y0v[i] + sixth_h * (d1v[i] + 2.0 * d2v[i] + 2.0 * d3v[i] + d4v[i])
                a[i] = y0a[i] + sixth_h * (d1a[i] + 2.0 * d2a[i] + 2.0 * d3a[i] + d4a[i])
            virt_p = y0vp + sixth_h * (d1vp + 2.0 * d2vp + 2.0 * d3vp + d4vp)
            virt_v = y0vv + sixth_h * (d1vv + 2.0 * d2vv + 2.0 * d3vv + d4vv)

            # actuator envelope on the realized (net) acceleration
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

            # termination checks on the new state
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
