"""Pure NumPy path kernel, vectorised across paths.

Mirrors ``_kernels.pyx`` operation for operation so both produce bit-identical
paths (no fused multiply-adds, same association order everywhere).
"""
import numpy as np


def _pos(x):
    return np.where(x > 0.0, x, 0.0)


def cutoff_array(x, n):
    lo_in = 1.0 / n
    lo_out = 1.0 / (n + 1.0)
    hi_out = n + 1.0
    t = np.where(x > n, hi_out - x, (x - lo_out) / (lo_in - lo_out))
    band = t * t * (3.0 - 2.0 * t)
    out = np.where((x <= lo_out) | (x >= hi_out), 0.0, band)
    return np.where((x >= lo_in) & (x <= n), 1.0, out)


def advance_paths(states, dgamma, z, H, coef, dt, rho_sf,
                  calendar, absorb, loc_n, apply_cutoff, exit_step):
    """Fill ``states[:, 1:]`` from ``states[:, 0]`` in place.

    states (M, N+1, 4), dgamma (M, N), z (M, N, 4), exit_step (M,) preset to -1.
    ``loc_n <= 0`` disables both the cutoff and exit tracking.
    """
    (kv, kd, kf, av, ad, af, sv, sd, sf, ths, thv, thd, thf) = (float(c) for c in coef)
    h11 = H[0, 0]
    h21, h22 = H[1, 0], H[1, 1]
    h31, h32, h33 = H[2, 0], H[2, 1], H[2, 2]
    h41, h42, h43, h44 = H[3, 0], H[3, 1], H[3, 2], H[3, 3]
    sfr = sf * rho_sf
    n_steps = dgamma.shape[1]
    track = loc_n > 0
    if track:
        lo = 1.0 / loc_n
        inside = np.all((states[:, 0] >= lo) & (states[:, 0] <= loc_n), axis=1)
        exit_step[~inside & (exit_step < 0)] = 0

    for j in range(n_steps):
        s = states[:, j, 0]
        v = states[:, j, 1]
        rd = states[:, j, 2]
        rf = states[:, j, 3]
        dg = dgamma[:, j]
        c = dt if calendar else dg
        z1 = z[:, j, 0]
        z2 = z[:, j, 1]
        z3 = z[:, j, 2]
        z4 = z[:, j, 3]
        vp = _pos(v)
        rdp = _pos(rd)
        rfp = _pos(rf)
        phi1 = h21 * z1 + h22 * z2
        phi2 = h31 * z1 + h32 * z2 + h33 * z3
        phi3 = h41 * z1 + h42 * z2 + h43 * z3 + h44 * z4

        ds_drift = s * (rd - rf) * c
        ds_sub = s * ths * dg
        ds_noise = s * np.sqrt(vp * dg) * h11 * z1
        dv_drift = kv * (av - v) * c
        dv_sub = thv * dg
        dv_noise = sv * np.sqrt(vp * dg) * phi1
        dd_drift = kd * (ad - rd) * c
        dd_sub = thd * dg
        dd_noise = sd * np.sqrt(rdp * dg) * phi2
        df_drift = (kf * (af - rf) - sfr * np.sqrt(vp * rfp)) * c
        df_sub = thf * dg
        df_noise = sf * np.sqrt(rfp * dg) * phi3

        if track and apply_cutoff:
            psi = (cutoff_array(s, loc_n) * cutoff_array(v, loc_n)
                   * cutoff_array(rd, loc_n) * cutoff_array(rf, loc_n))
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

        nxt = states[:, j + 1]
        nxt[:, 0] = s + ds_drift + ds_sub + ds_noise
        nxt[:, 1] = v + dv_drift + dv_sub + dv_noise
        nxt[:, 2] = rd + dd_drift + dd_sub + dd_noise
        nxt[:, 3] = rf + df_drift + df_sub + df_noise
        if absorb:
            nxt[...] = _pos(nxt)
        if track:
            inside = np.all((nxt >= lo) & (nxt <= loc_n), axis=1)
            exit_step[~inside & (exit_step < 0)] = j + 1
