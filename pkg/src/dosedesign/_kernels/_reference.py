"""NumPy fallback kernel: batched trinomial design moments.

Mirrors the Cython extension arithmetic (same ridge, same sentinels) so
the two backends agree to floating-point noise.
"""

import numpy as np

RIDGE_REL = 1e-10
PROB_FLOOR = 1e-12

_LOGDET_SENTINEL = -np.inf


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def otr_moments(points, weights, thetas, cgrads, bases, alpha):
    """(logdet, cvar, trinv) each (B, K) for the cumulative trinomial.

    Per support point x and nominal (c1, c2, b) the cell probabilities are
    pi = (s1, s2 - s1, 1 - s2) with s_j = sigmoid(c_j + b x), and the cell
    gradients w.r.t. (c1, c2, b) give the elemental information

        M(x) = sum_cells (d pi_cell)(d pi_cell)^T / pi_cell.
    """
    B, m = points.shape
    K = thetas.shape[0]
    x = points[:, :, None]                          # (B, m, 1)
    w = weights[:, :, None]                         # (B, m, 1)
    c1 = thetas[None, None, :, 0]
    c2 = thetas[None, None, :, 1]
    b = thetas[None, None, :, 2]
    s1 = _sigmoid(c1 + b * x)                       # (B, m, K)
    s2 = _sigmoid(c2 + b * x)
    pi1, pi2, pi3 = s1, s2 - s1, 1.0 - s2
    active = weights[:, :, None] > 1e-12
    bad = active & (
        (pi1 < PROB_FLOOR) | (pi2 < PROB_FLOOR) | (pi3 < PROB_FLOOR)
    )
    invalid = bad.any(axis=1)                       # (B, K)
    # clamp so the arithmetic below stays finite; results are masked out
    pi1 = np.maximum(pi1, PROB_FLOOR)
    pi2 = np.maximum(pi2, PROB_FLOOR)
    pi3 = np.maximum(pi3, PROB_FLOOR)
    u = s1 * (1.0 - s1)
    v = s2 * (1.0 - s2)

    m11 = u * u * (1.0 / pi1 + 1.0 / pi2)
    m12 = -u * v / pi2
    m13 = x * (u * u / pi1 - u * (v - u) / pi2)
    m22 = v * v * (1.0 / pi2 + 1.0 / pi3)
    m23 = x * (v * (v - u) / pi2 + v * v / pi3)
    m33 = x * x * (u * u / pi1 + (v - u) ** 2 / pi2 + v * v / pi3)

    def mix(entry, r, c):
        tot = np.sum(w * entry, axis=1)             # (B, K)
        if alpha > 0.0:
            tot = alpha * bases[None, :, r, c] + (1.0 - alpha) * tot
        return tot

    M11, M12, M13 = mix(m11, 0, 0), mix(m12, 0, 1), mix(m13, 0, 2)
    M22, M23, M33 = mix(m22, 1, 1), mix(m23, 1, 2), mix(m33, 2, 2)

    cof11 = M22 * M33 - M23 * M23
    cof12 = M13 * M23 - M12 * M33
    cof13 = M12 * M23 - M13 * M22
    det = M11 * cof11 + M12 * cof12 + M13 * cof13
    trace = M11 + M22 + M33
    scale = np.maximum(trace, 1e-300)
    # relative floor: a rank-deficient matrix has det at rounding level
    det_floor = 1e-12 * (scale / 3.0) ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        logdet = np.where(
            det > det_floor, np.log(np.maximum(det, 1e-300)), _LOGDET_SENTINEL
        )

    # ridge-regularized solves for the c-variance and trace of the inverse
    ridge = RIDGE_REL * scale
    R11, R22, R33 = M11 + ridge, M22 + ridge, M33 + ridge
    r11 = R22 * R33 - M23 * M23
    r12 = M13 * M23 - M12 * R33
    r13 = M12 * M23 - M13 * R22
    r22 = R11 * R33 - M13 * M13
    r23 = M12 * M13 - R11 * M23
    r33 = R11 * R22 - M12 * M12
    rdet = R11 * r11 + M12 * r12 + M13 * r13
    g1 = cgrads[None, :, 0]
    g2 = cgrads[None, :, 1]
    g3 = cgrads[None, :, 2]
    quad = (
        g1 * (r11 * g1 + r12 * g2 + r13 * g3)
        + g2 * (r12 * g1 + r22 * g2 + r23 * g3)
        + g3 * (r13 * g1 + r23 * g2 + r33 * g3)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        cvar = quad / rdet
        trinv = (r11 + r22 + r33) / rdet

    logdet = np.where(invalid, _LOGDET_SENTINEL, logdet)
    cvar = np.where(invalid | ~np.isfinite(cvar), np.inf, cvar)
    trinv = np.where(invalid | ~np.isfinite(trinv), np.inf, trinv)
    return logdet, cvar, trinv
