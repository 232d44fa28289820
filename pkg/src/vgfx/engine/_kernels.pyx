# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Euler-Maruyama path kernel.

Same arithmetic, in the same association order, as ``_fallback.py``.
Compiled with ``-ffp-contract=off`` so no FMA contraction changes rounding.
"""
from libc.math cimport sqrt


cdef inline double _pos(double x) noexcept nogil:
    return x if x > 0.0 else 0.0


cdef inline double _cutoff(double x, double n) noexcept nogil:
    cdef double lo_in = 1.0 / n
    cdef double lo_out = 1.0 / (n + 1.0)
    cdef double hi_out = n + 1.0
    cdef double t
    if lo_in <= x and x <= n:
        return 1.0
    if x <= lo_out or x >= hi_out:
        return 0.0
    if x > n:
        t = hi_out - x
    else:
        t = (x - lo_out) / (lo_in - lo_out)
    return t * t * (3.0 - 2.0 * t)


cdef inline bint _inside(double x, double lo, double hi) noexcept nogil:
    return lo <= x and x <= hi


def advance_paths(double[:, :, ::1] states, const double[:, ::1] dgamma,
                  const double[:, :, ::1] z, const double[:, ::1] H,
                  const double[::1] coef, double dt, double rho_sf,
                  bint calendar, bint absorb, double loc_n, bint apply_cutoff,
                  long long[::1] exit_step):
    cdef Py_ssize_t m_paths = states.shape[0]
    cdef Py_ssize_t n_steps = dgamma.shape[1]
    cdef Py_ssize_t i, j
    cdef double kv = coef[0], kd = coef[1], kf = coef[2]
    cdef double av = coef[3], ad = coef[4], af = coef[5]
    cdef double sv = coef[6], sd = coef[7], sf = coef[8]
    cdef double ths = coef[9], thv = coef[10], thd = coef[11], thf = coef[12]
    cdef double h11 = H[0, 0]
    cdef double h21 = H[1, 0], h22 = H[1, 1]
    cdef double h31 = H[2, 0], h32 = H[2, 1], h33 = H[2, 2]
    cdef double h41 = H[3, 0], h42 = H[3, 1], h43 = H[3, 2], h44 = H[3, 3]
    cdef double sfr = sf * rho_sf
    cdef bint track = loc_n > 0
    cdef bint localize = track and apply_cutoff
    cdef double lo = 1.0 / loc_n if track else 0.0
    cdef double s, v, rd, rf, dg, c, z1, z2, z3, z4, vp, rdp, rfp
    cdef double phi1, phi2, phi3, psi
    cdef double ds_drift, ds_sub, ds_noise, dv_drift, dv_sub, dv_noise
    cdef double dd_drift, dd_sub, dd_noise, df_drift, df_sub, df_noise
    cdef double ns, nv, nd, nf

    with nogil:
        for i in range(m_paths):
            s = states[i, 0, 0]
            v = states[i, 0, 1]
            rd = states[i, 0, 2]
            rf = states[i, 0, 3]
            if track and exit_step[i] < 0:
                if not (_inside(s, lo, loc_n) and _inside(v, lo, loc_n)
                        and _inside(rd, lo, loc_n) and _inside(rf, lo, loc_n)):
                    exit_step[i] = 0
            for j in range(n_steps):
                dg = dgamma[i, j]
                c = dt if calendar else dg
                z1 = z[i, j, 0]
                z2 = z[i, j, 1]
                z3 = z[i, j, 2]
                z4 = z[i, j, 3]
                vp = _pos(v)
                rdp = _pos(rd)
                rfp = _pos(rf)
                phi1 = h21 * z1 + h22 * z2
                phi2 = h31 * z1 + h32 * z2 + h33 * z3
                phi3 = h41 * z1 + h42 * z2 + h43 * z3 + h44 * z4

                ds_drift = s * (rd - rf) * c
                ds_sub = s * ths * dg
                ds_noise = s * sqrt(vp * dg) * h11 * z1
                dv_drift = kv * (av - v) * c
                dv_sub = thv * dg
                dv_noise = sv * sqrt(vp * dg) * phi1
                dd_drift = kd * (ad - rd) * c
                dd_sub = thd * dg
                dd_noise = sd * sqrt(rdp * dg) * phi2
                df_drift = (kf * (af - rf) - sfr * sqrt(vp * rfp)) * c
                df_sub = thf * dg
                df_noise = sf * sqrt(rfp * dg) * phi3

                if localize:
                    psi = _cutoff(s, loc_n) * _cutoff(v, loc_n) * _cutoff(rd, loc_n) * _cutoff(rf, loc_n)
                    ds_drift = psi * ds_drift
                    ds_sub = psi * ds_sub
                    ds_noise = psi * ds_noise
                    dv_drift = psi * dv_drift
                    dv_sub = psi * dv_sub
                    dv_noise = psi * dv_noise
                    dd_drift = psi * dd_drift
                    dd_sub = psi * dd_sub
                    dd_noise = psi * dd_noise
                    df_drift = psi * df_drift
                    df_sub = psi * df_sub
                    df_noise = psi * df_noise

                ns = s + ds_drift + ds_sub + ds_noise
                nv = v + dv_drift + dv_sub + dv_noise
                nd = rd + dd_drift + dd_sub + dd_noise
                nf = rf + df_drift + df_sub + df_noise
                if absorb:
                    ns = _pos(ns)
                    nv = _pos(nv)
                    nd = _pos(nd)
                    nf = _pos(nf)
                states[i, j + 1, 0] = ns
                states[i, j + 1, 1] = nv
                states[i, j + 1, 2] = nd
                states[i, j + 1, 3] = nf
                s = ns
                v = nv
                rd = nd
                rf = nf
                if track and exit_step[i] < 0:
                    if not (_inside(s, lo, loc_n) and _inside(v, lo, loc_n)
                            and _inside(rd, lo, loc_n) and _inside(rf, lo, loc_n)):
                        exit_step[i] = j + 1
