# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled objective kernel: same math as the numpy backend, tight C loops.

Evaluates the weighted objective terms for a batch of candidate actions
(4 free control points + total time) against one planning scenario.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, exp, fabs, fmod, sin, sqrt

cnp.import_array()

cdef double PI = 3.141592653589793
cdef double TWO_PI = 6.283185307179586


cdef inline double _clip_unit(double v) noexcept:
    if v < 1e-9:
        return 1e-9
    return v


def evaluate_terms(
    double[:, ::1] params,        # (B, 13)
    double[::1] v_in,
    double[::1] a_in,
    double[::1] goal,
    double[:, :, ::1] obst_coeffs,  # (n_seg, 4, 3)
    double[::1] scal,             # [alpha_j, alpha_psi, alpha_fov, alpha_g, alpha_T,
                                  #  lam, cos_half_theta, gamma, mu_coll, gravity,
                                  #  obst_seg_dt, psi_dot_max, singular_rel_tol]
    double[::1] rho,
    double[::1] v_max,
    double[::1] a_max,
    double[::1] j_max,
    double[:, ::1] b0_q,          # (61, 9)
    double[:, ::1] b2_q,
    double[:, ::1] b0_s,          # (64, 9)
    double[:, ::1] b2_s,
    double[:, ::1] b0_c,          # (100, 9)
    double[:, ::1] d1,            # (8, 9)
    double[:, ::1] d2,            # (7, 8)
    double[:, ::1] d3,            # (6, 7)
    double[:, ::1] psi_fit,       # (9, 64)
    double[::1] wq,               # (65,)
    double[:, ::1] out,           # (B, 7)
):
    cdef Py_ssize_t B = params.shape[0]
    cdef Py_ssize_t nq = b0_q.shape[0]
    cdef Py_ssize_t ns = b0_s.shape[0]
    cdef Py_ssize_t nc = b0_c.shape[0]
    cdef Py_ssize_t n_seg = obst_coeffs.shape[0]

    cdef double alpha_j = scal[0], alpha_psi = scal[1], alpha_fov = scal[2]
    cdef double alpha_g = scal[3], alpha_T = scal[4], lam = scal[5]
    cdef double cos_half_theta = scal[6], gamma = scal[7], mu_coll = scal[8]
    cdef double gravity = scal[9], seg_dt = scal[10], psi_dot_max = scal[11]
    cdef double singular_tol = scal[12]

    cdef double q[9][3]
    cdef double psi_raw[64]
    cdef double psi_u[64]
    cdef double psi_cps[9]
    cdef double vel[8][3]
    cdef double accd[7][3]
    cdef double jerkd[6][3]
    cdef double prev_b1[3]
    cdef double pos[3]
    cdef double acc[3]
    cdef double ob[3]
    cdef double xi[3]
    cdef double b1v[3]
    cdef double r[3]

    cdef Py_ssize_t b, s, l, k, seg
    cdef double T, delta, t, u, c_corr, dd, ddmod
    cdef double xi_sq, r_dot_xi, pn, rn, nx, ny, nz, denom, xnorm
    cdef double b10x, b10y, b10z, b20x, b20y, b20z
    cdef double cpsi, spsi, val, z, depth, diff, w
    cdef double int_jerk, int_psi, int_fov, goal_err, dyn, pen, psiv, psidd, excess

    for b in range(B):
        T = params[b, 12]
        delta = T / 6.0

        # control points from the boundary conditions (frame f origin)
        for k in range(3):
            q[0][k] = 0.0
            q[1][k] = (delta / 3.0) * v_in[k]
            q[2][k] = q[1][k] + (2.0 * delta / 3.0) * (v_in[k] + (delta / 2.0) * a_in[k])
        for l in range(4):
            for k in range(3):
                q[3 + l][k] = params[b, 3 * l + k]
        for k in range(3):
            q[7][k] = q[6][k]
            q[8][k] = q[6][k]

        # yaw samples: closed-form optical axis, guarded, unwrapped
        prev_b1[0] = 1.0
        prev_b1[1] = 0.0
        prev_b1[2] = 0.0
        for s in range(ns):
            for k in range(3):
                pos[k] = 0.0
                acc[k] = 0.0
            for l in range(9):
                for k in range(3):
                    pos[k] += b0_s[s, l] * q[l][k]
                    acc[k] += b2_s[s, l] * q[l][k]
            for k in range(3):
                acc[k] /= T * T
            t = (s / <double>(ns - 1)) * T
            seg = <Py_ssize_t>(t / seg_dt)
            if seg > n_seg - 1:
                seg = n_seg - 1
            if seg < 0:
                seg = 0
            u = t - seg * seg_dt
            for k in range(3):
                ob[k] = obst_coeffs[seg, 0, k] + u * (
                    obst_coeffs[seg, 1, k] + u * (obst_coeffs[seg, 2, k] + u * obst_coeffs[seg, 3, k])
                )
            xi[0] = acc[0]
            xi[1] = acc[1]
            xi[2] = acc[2] + gravity
            xi_sq = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]
            for k in range(3):
                r[k] = ob[k] - pos[k]
            r_dot_xi = r[0] * xi[0] + r[1] * xi[1] + r[2] * xi[2]
            for k in range(3):
                b1v[k] = r[k] - (r_dot_xi / xi_sq) * xi[k]
            pn = sqrt(b1v[0] * b1v[0] + b1v[1] * b1v[1] + b1v[2] * b1v[2])
            rn = sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
            if pn <= singular_tol * (1.0 + rn):
                # parallel case: previous optical axis (or e_x), reprojected
                r_dot_xi = prev_b1[0] * xi[0] + prev_b1[1] * xi[1] + prev_b1[2] * xi[2]
                for k in range(3):
                    b1v[k] = prev_b1[k] - (r_dot_xi / xi_sq) * xi[k]
                pn = sqrt(b1v[0] * b1v[0] + b1v[1] * b1v[1] + b1v[2] * b1v[2])
                if pn <= 1e-12:
                    if fabs(xi[0]) > fabs(xi[1]):
                        b1v[0] = xi[1] * 0.0 - xi[2] * 1.0
                        b1v[1] = xi[2] * 0.0 - xi[0] * 0.0
                        b1v[2] = xi[0] * 1.0 - xi[1] * 0.0
                    else:
                        b1v[0] = xi[1] * 0.0 - xi[2] * 0.0
                        b1v[1] = xi[2] * 1.0 - xi[0] * 0.0
                        b1v[2] = xi[0] * 0.0 - xi[1] * 1.0
                    pn = sqrt(b1v[0] * b1v[0] + b1v[1] * b1v[1] + b1v[2] * b1v[2])
            for k in range(3):
                b1v[k] /= pn
                prev_b1[k] = b1v[k]
            xnorm = sqrt(xi_sq)
            nx = xi[0] / xnorm
            ny = xi[1] / xnorm
            nz = xi[2] / xnorm
            denom = _clip_unit(1.0 + nz)
            b10x = 1.0 - nx * nx / denom
            b10y = -nx * ny / denom
            b10z = -nx
            b20x = -nx * ny / denom
            b20y = 1.0 - ny * ny / denom
            b20z = -ny
            psi_raw[s] = atan2(
                b1v[0] * b20x + b1v[1] * b20y + b1v[2] * b20z,
                b1v[0] * b10x + b1v[1] * b10y + b1v[2] * b10z,
            )

        # numpy-compatible unwrap (period 2*pi, discontinuity threshold pi)
        psi_u[0] = psi_raw[0]
        c_corr = 0.0
        for s in range(1, ns):
            dd = psi_raw[s] - psi_raw[s - 1]
            if fabs(dd) >= PI:
                ddmod = fmod(dd + PI, TWO_PI)
                if ddmod < 0.0:
                    ddmod += TWO_PI
                ddmod -= PI
                if ddmod == -PI and dd > 0.0:
                    ddmod = PI
                c_corr += ddmod - dd
            psi_u[s] = psi_raw[s] + c_corr

        # least-squares yaw spline control points
        for l in range(9):
            psi_cps[l] = 0.0
            for s in range(ns):
                psi_cps[l] += psi_fit[l, s] * psi_u[s]

        # quadrature: yaw-acceleration and FOV integrals
        int_psi = 0.0
        int_fov = 0.0
        for s in range(nq):
            for k in range(3):
                pos[k] = 0.0
                acc[k] = 0.0
            psiv = 0.0
            psidd = 0.0
            for l in range(9):
                for k in range(3):
                    pos[k] += b0_q[s, l] * q[l][k]
                    acc[k] += b2_q[s, l] * q[l][k]
                psiv += b0_q[s, l] * psi_cps[l]
                psidd += b2_q[s, l] * psi_cps[l]
            for k in range(3):
                acc[k] /= T * T
            psidd /= T * T
            w = wq[s] * T
            int_psi += w * psidd * psidd

            t = (s / <double>(nq - 1)) * T
            seg = <Py_ssize_t>(t / seg_dt)
            if seg > n_seg - 1:
                seg = n_seg - 1
            if seg < 0:
                seg = 0
            u = t - seg * seg_dt
            for k in range(3):
                ob[k] = obst_coeffs[seg, 0, k] + u * (
                    obst_coeffs[seg, 1, k] + u * (obst_coeffs[seg, 2, k] + u * obst_coeffs[seg, 3, k])
                )
            xi[0] = acc[0]
            xi[1] = acc[1]
            xi[2] = acc[2] + gravity
            xnorm = sqrt(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2])
            nx = xi[0] / xnorm
            ny = xi[1] / xnorm
            nz = xi[2] / xnorm
            denom = _clip_unit(1.0 + nz)
            b10x = 1.0 - nx * nx / denom
            b10y = -nx * ny / denom
            b10z = -nx
            b20x = -nx * ny / denom
            b20y = 1.0 - ny * ny / denom
            b20z = -ny
            cpsi = cos(psiv)
            spsi = sin(psiv)
            b1v[0] = cpsi * b10x + spsi * b20x
            b1v[1] = cpsi * b10y + spsi * b20y
            b1v[2] = cpsi * b10z + spsi * b20z
            for k in range(3):
                r[k] = ob[k] - pos[k]
            rn = sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
            if rn < 1e-12:
                rn = 1e-12
            z = gamma * ((b1v[0] * r[0] + b1v[1] * r[1] + b1v[2] * r[2]) / rn - cos_half_theta)
            val = 1.0 / (1.0 + exp(-z))
            int_fov += w * val * val * val

        goal_err = 0.0
        for k in range(3):
            diff = q[8][k] - goal[k]
            goal_err += diff * diff

        # derivative control points: exact jerk integral, dynamic-limit penalty
        dyn = 0.0
        int_jerk = 0.0
        for l in range(8):
            for k in range(3):
                val = 0.0
                for s in range(9):
                    val += d1[l, s] * q[s][k]
                vel[l][k] = val / T
                excess = fabs(vel[l][k]) - v_max[k]
                if excess > 0.0:
                    dyn += excess * excess
        for l in range(7):
            for k in range(3):
                val = 0.0
                for s in range(8):
                    val += d2[l, s] * vel[s][k]
                accd[l][k] = val / T
                excess = fabs(accd[l][k]) - a_max[k]
                if excess > 0.0:
                    dyn += excess * excess
        for l in range(6):
            for k in range(3):
                val = 0.0
                for s in range(7):
                    val += d3[l, s] * accd[s][k]
                jerkd[l][k] = val / T
                int_jerk += jerkd[l][k] * jerkd[l][k]
                excess = fabs(jerkd[l][k]) - j_max[k]
                if excess > 0.0:
                    dyn += excess * excess
        int_jerk *= T / 6.0
        for l in range(8):
            val = 0.0
            for s in range(9):
                val += d1[l, s] * psi_cps[s]
            val /= T
            excess = fabs(val) - psi_dot_max
            if excess > 0.0:
                dyn += excess * excess

        # collision penetration into the inflated box
        pen = 0.0
        for s in range(nc):
            for k in range(3):
                pos[k] = 0.0
            for l in range(9):
                for k in range(3):
                    pos[k] += b0_c[s, l] * q[l][k]
            t = (s / <double>(nc - 1)) * T
            seg = <Py_ssize_t>(t / seg_dt)
            if seg > n_seg - 1:
                seg = n_seg - 1
            if seg < 0:
                seg = 0
            u = t - seg * seg_dt
            depth = 1e300
            for k in range(3):
                ob[k] = obst_coeffs[seg, 0, k] + u * (
                    obst_coeffs[seg, 1, k] + u * (obst_coeffs[seg, 2, k] + u * obst_coeffs[seg, 3, k])
                )
                diff = rho[k] - fabs(pos[k] - ob[k])
                if diff < 0.0:
                    diff = 0.0
                if diff < depth:
                    depth = diff
            pen += depth * depth

        out[b, 0] = alpha_j * int_jerk
        out[b, 1] = alpha_psi * int_psi
        out[b, 2] = -alpha_fov * int_fov
        out[b, 3] = alpha_g * goal_err
        out[b, 4] = alpha_T * T
        out[b, 5] = lam * dyn
        out[b, 6] = mu_coll * pen
    return np.asarray(out)
