# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trinomial design-moment kernel.

Same arithmetic as _reference.otr_moments: for every (design, nominal)
pair, accumulate the 3x3 information matrix over support points in closed
form and return (logdet, cvar, trinv).  Kept in lockstep with the
reference implementation; the parity test compares them elementwise.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()

cdef double RIDGE_REL = 1e-10
cdef double PROB_FLOOR = 1e-12


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def otr_moments(double[:, ::1] points, double[:, ::1] weights,
                double[:, ::1] thetas, double[:, ::1] cgrads,
                double[:, :, ::1] bases, double alpha):
    cdef Py_ssize_t B = points.shape[0]
    cdef Py_ssize_t m = points.shape[1]
    cdef Py_ssize_t K = thetas.shape[0]

    logdet_arr = np.empty((B, K), dtype=np.float64)
    cvar_arr = np.empty((B, K), dtype=np.float64)
    trinv_arr = np.empty((B, K), dtype=np.float64)
    cdef double[:, ::1] logdet = logdet_arr
    cdef double[:, ::1] cvar = cvar_arr
    cdef double[:, ::1] trinv = trinv_arr

    cdef Py_ssize_t bi, i, j
    cdef double c1, c2, slope, x, w, s1, s2, pi1, pi2, pi3, u, v
    cdef double M11, M12, M13, M22, M23, M33
    cdef double det, scale, det_floor, ridge
    cdef double R11, R22, R33, r11, r12, r13, r22, r23, r33, rdet
    cdef double g1, g2, g3, quad
    cdef double mw
    cdef bint invalid

    with nogil:
        for bi in range(B):
            for i in range(K):
                c1 = thetas[i, 0]
                c2 = thetas[i, 1]
                slope = thetas[i, 2]
                M11 = M12 = M13 = M22 = M23 = M33 = 0.0
                invalid = False
                for j in range(m):
                    w = weights[bi, j]
                    if w <= 1e-12:
                        continue
                    x = points[bi, j]
                    s1 = _sigmoid(c1 + slope * x)
                    s2 = _sigmoid(c2 + slope * x)
                    pi1 = s1
                    pi2 = s2 - s1
                    pi3 = 1.0 - s2
                    if pi1 < PROB_FLOOR or pi2 < PROB_FLOOR or pi3 < PROB_FLOOR:
                        invalid = True
                        break
                    u = s1 * (1.0 - s1)
                    v = s2 * (1.0 - s2)
                    M11 += w * (u * u * (1.0 / pi1 + 1.0 / pi2))
                    M12 += w * (-u * v / pi2)
                    M13 += w * (x * (u * u / pi1 - u * (v - u) / pi2))
                    M22 += w * (v * v * (1.0 / pi2 + 1.0 / pi3))
                    M23 += w * (x * (v * (v - u) / pi2 + v * v / pi3))
                    M33 += w * (x * x * (u * u / pi1
                                         + (v - u) * (v - u) / pi2
                                         + v * v / pi3))
                if invalid:
                    logdet[bi, i] = -INFINITY
                    cvar[bi, i] = INFINITY
                    trinv[bi, i] = INFINITY
                    continue
                if alpha > 0.0:
                    mw = 1.0 - alpha
                    M11 = alpha * bases[i, 0, 0] + mw * M11
                    M12 = alpha * bases[i, 0, 1] + mw * M12
                    M13 = alpha * bases[i, 0, 2] + mw * M13
                    M22 = alpha * bases[i, 1, 1] + mw * M22
                    M23 = alpha * bases[i, 1, 2] + mw * M23
                    M33 = alpha * bases[i, 2, 2] + mw * M33

                det = (M11 * (M22 * M33 - M23 * M23)
                       + M12 * (M13 * M23 - M12 * M33)
                       + M13 * (M12 * M23 - M13 * M22))
                scale = M11 + M22 + M33
                if scale < 1e-300:
                    scale = 1e-300
                det_floor = 1e-12 * (scale / 3.0) ** 3
                if det > det_floor:
                    logdet[bi, i] = log(det)
                else:
                    logdet[bi, i] = -INFINITY

                ridge = RIDGE_REL * scale
                R11 = M11 + ridge
                R22 = M22 + ridge
                R33 = M33 + ridge
                r11 = R22 * R33 - M23 * M23
                r12 = M13 * M23 - M12 * R33
                r13 = M12 * M23 - M13 * R22
                r22 = R11 * R33 - M13 * M13
                r23 = M12 * M13 - R11 * M23
                r33 = R11 * R22 - M12 * M12
                rdet = R11 * r11 + M12 * r12 + M13 * r13
                if rdet <= 0.0:
                    cvar[bi, i] = INFINITY
                    trinv[bi, i] = INFINITY
                    continue
                g1 = cgrads[i, 0]
                g2 = cgrads[i, 1]
                g3 = cgrads[i, 2]
                quad = (g1 * (r11 * g1 + r12 * g2 + r13 * g3)
                        + g2 * (r12 * g1 + r22 * g2 + r23 * g3)
                        + g3 * (r13 * g1 + r23 * g2 + r33 * g3))
                cvar[bi, i] = quad / rdet
                trinv[bi, i] = (r11 + r22 + r33) / rdet

    return logdet_arr, cvar_arr, trinv_arr
