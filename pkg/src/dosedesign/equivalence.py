"""Directional-derivative sensitivity functions and optimality certificates.

For a concave design criterion, a design maximizes the criterion iff the
directional (Frechet) derivative toward every one-point design is
nonpositive; it vanishes on the design's own support.  The derivative is
taken with respect to the free part of the design measure: fixed arms and
any first-stage information contribute through the total matrix M but
scale the derivative by the free mass fraction.

The per-part sensitivities used here are the derivatives of the
normalized criterion parts of :mod:`dosedesign.criteria` (log det / p,
-log trace-inverse, -log c-variance), so "max sensitivity <= tol" is a
scale-free certificate across criteria.

Singular designs (one-point c-optimal) need care: the equivalence
condition holds for *some* generalized inverse, not necessarily the
Moore-Penrose one.  Every solution of M y = c induces a valid g-inverse
direction, and c is orthogonal to the null space whenever the variance is
finite, so the certificate searches the affine family y = M^+ c + N t for
the witness minimizing the grid maximum.
"""

from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import models
from .criteria import CriterionSpec, DesignObjective
from .designs import Design
from .errors import DegenerateDoseError, SingularInformationError

DEFAULT_GRID_HI = float(np.log(30001.0))
DEFAULT_GRID_N = 2001
DEFAULT_TOL = 1e-3
_NULL_REL = 1e-10


@dataclass(frozen=True)
class SensitivityCurve:
    grid: np.ndarray
    values: np.ndarray
    max_value: float
    argmax: float

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape or g.ndim != 1:
            raise ValueError("grid and values must be 1-D and equally long")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def to_dict(self):
        return {
            "grid_transformed": [float(x) for x in self.grid],
            "values": [None if not np.isfinite(v) else float(v) for v in self.values],
            "max_value": float(self.max_value),
            "argmax": float(self.argmax),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("dose_transformed,sensitivity\n")
        for x, v in zip(self.grid, self.values):
            buf.write(f"{float(x)!r},{float(v)!r}\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Standalone Frechet derivatives (direction = one-point design at x)
# ---------------------------------------------------------------------------


def frechet_D(M, stilde_x, alpha_fixed=0.0, free_info=None) -> float:
    """Derivative of log det toward the one-point design at x.

    With a fixed-arm fraction ``alpha_fixed`` the free part M1 (pass it
    as ``free_info``; defaults to M itself when nothing is fixed) mixes
    as M = alpha * M_fixed + (1 - alpha) * M1, giving
    (1 - alpha) * tr(M^{-1} (s s^T - M1)).
    """
    M = _mat(M)
    M1 = M if free_info is None else _mat(free_info)
    s = np.asarray(stilde_x, dtype=float)
    Minv = _inv(M)
    return float((1.0 - alpha_fixed) * (np.sum(s * (Minv @ s)) - np.trace(Minv @ M1)))


def frechet_c(M, stilde_x, c) -> float:
    """c' M^{-1} c - c' M^{-1} s s' M^{-1} c: derivative of the
    c-variance toward the one-point design at x (sign as in the variance
    scale; nonnegative everywhere iff the design minimizes it)."""
    M = _mat(M)
    s = np.asarray(stilde_x, dtype=float)
    c = np.asarray(c, dtype=float)
    z = _gsolve(M, c)
    return float(c @ z - np.sum((s.T @ z) ** 2))


def frechet_A(M, stilde_x, alpha_fixed=0.0, free_info=None) -> float:
    """-(1 - alpha) tr(M^{-1} (s s^T - M1) M^{-1}): derivative of
    trace(M^{-1}); nonnegative everywhere certifies A-optimality."""
    M = _mat(M)
    M1 = M if free_info is None else _mat(free_info)
    s = np.asarray(stilde_x, dtype=float)
    Minv = _inv(M)
    z = Minv @ s
    return float(-(1.0 - alpha_fixed) * (np.sum(z * z) - np.trace(Minv @ M1 @ Minv)))


def _mat(M):
    return M.M if isinstance(M, models.FisherInfo) else np.asarray(M, dtype=float)


def _inv(M):
    try:
        return np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError("information matrix is singular") from exc


def _gsolve(M, c):
    try:
        return np.linalg.solve(M, c)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(M, rcond=1e-12, hermitian=True) @ c


# ---------------------------------------------------------------------------
# Combined certificate
# ---------------------------------------------------------------------------


class _NominalPieces:
    """Per-nominal cached quantities for the combined sensitivity."""

    def __init__(self, obj: DesignObjective, design: Design):
        self.obj = obj
        free = design.free_design()
        self.M = obj.info_matrices(design)
        self.M1 = [
            models.fisher_info(obj.spec, obj.spec.params(t), free).M
            for t in obj.thetas
        ]
        self.free_frac = (1.0 - obj.alpha) * design.free_mass
        self.Minv = []
        self.null = []
        for m in self.M:
            eigval, eigvec = np.linalg.eigh(m)
            keep = eigval > _NULL_REL * eigval[-1]
            inv = (eigvec[:, keep] / eigval[keep]) @ eigvec[:, keep].T
            self.Minv.append(inv)
            self.null.append(eigvec[:, ~keep])
        self.trinv = [float(np.trace(mi)) for mi in self.Minv]
        self.tr_m1 = [float(np.trace(mi @ m1)) for mi, m1 in zip(self.Minv, self.M1)]
        self.trm1_inv2 = [
            float(np.trace(mi @ m1 @ mi)) for mi, m1 in zip(self.Minv, self.M1)
        ]
        # g-inverse direction for the c part; refined by calibrate() when
        # the matrix is singular
        self.zc = [mi @ g for mi, g in zip(self.Minv, obj.cgrads)]
        self.cvar = [float(g @ z) for g, z in zip(obj.cgrads, self.zc)]
        self.q1 = [float(z @ m1 @ z) for z, m1 in zip(self.zc, self.M1)]

    def calibrate(self, grid_stildes):
        """Pick the witnessing solution of M y = c per singular nominal.

        ``grid_stildes[i]`` is a list of s-matrices (entries may be None
        for degenerate doses).  Minimizes the grid maximum of
        ||s(x)^T y||^2 over y = M^+ c + N t; the variance c^T y is
        invariant on that family.
        """
        for i in range(self.obj.crit.K):
            if self.obj.part_w[i, 2] <= 0 or self.null[i].shape[1] == 0:
                continue
            N = self.null[i]
            if np.linalg.norm(N.T @ self.obj.cgrads[i]) > 1e-6 * max(
                np.linalg.norm(self.obj.cgrads[i]), 1e-300
            ):
                continue  # c not in range: variance infinite, nothing to pick
            S = [s for s in grid_stildes[i] if s is not None]
            z0 = self.zc[i]

            def gridmax(t):
                y = z0 + N @ np.atleast_1d(t)
                return max(float(np.sum((s.T @ y) ** 2)) for s in S)

            q = N.shape[1]
            if q == 1:
                res = minimize_scalar(
                    gridmax, bounds=(-1e3, 1e3), method="bounded",
                    options={"xatol": 1e-10},
                )
                t_best = np.array([res.x])
            else:
                res = minimize(
                    gridmax, np.zeros(q), method="Nelder-Mead",
                    options={"xatol": 1e-10, "fatol": 1e-12},
                )
                t_best = np.atleast_1d(res.x)
            y = z0 + N @ t_best
            self.zc[i] = y
            self.q1[i] = float(y @ self.M1[i] @ y)

    def sensitivity_from_stildes(self, stildes_at_x) -> float:
        """Combined derivative given per-nominal s-matrices at one dose."""
        obj = self.obj
        total = 0.0
        for i in range(obj.crit.K):
            wD, wA, wc = obj.part_w[i]
            s = stildes_at_x[i]
            term = 0.0
            if wD > 0:
                term += wD * (np.sum(s * (self.Minv[i] @ s)) - self.tr_m1[i]) / obj.p
            if wA > 0:
                z = self.Minv[i] @ s
                term += wA * (np.sum(z * z) - self.trm1_inv2[i]) / self.trinv[i]
            if wc > 0:
                q2 = float(np.sum((s.T @ self.zc[i]) ** 2))
                term += wc * (q2 - self.q1[i]) / self.cvar[i]
            total += term
        return self.free_frac * total / obj.crit.K

    def stildes_at(self, x: float):
        return [
            models.stilde(self.obj.spec, self.obj.spec.params(t), x)
            for t in self.obj.thetas
        ]


def sensitivity_function(design: Design, crit: CriterionSpec, model_spec,
                         fixed_arms=None, calibration_grid=None):
    """Returns f(x): the combined directional derivative at dose x."""
    arms = design.fixed_arms if fixed_arms is None else fixed_arms
    obj = DesignObjective(model_spec, crit, arms)
    pieces = _NominalPieces(obj, design)
    if any(n.shape[1] for n in pieces.null):
        grid = (
            np.linspace(0.0, DEFAULT_GRID_HI, 401)
            if calibration_grid is None
            else np.asarray(calibration_grid, dtype=float)
        )
        pieces.calibrate(_grid_stildes(pieces, grid)[0])
    return lambda x: pieces.sensitivity_from_stildes(pieces.stildes_at(float(x)))


def _grid_stildes(pieces, grid):
    """Per-nominal s-matrices over the grid; None marks degenerate doses."""
    out = []
    bad = np.zeros(grid.size, dtype=bool)
    for t in pieces.obj.thetas:
        row = []
        tp = pieces.obj.spec.params(t)
        for j, x in enumerate(grid):
            try:
                row.append(models.stilde(pieces.obj.spec, tp, float(x)))
            except DegenerateDoseError:
                row.append(None)
                bad[j] = True
        out.append(row)
    return out, bad


def verify_design(design: Design, crit: CriterionSpec, model_spec,
                  grid=None, tol=DEFAULT_TOL):
    """Equivalence-theorem certificate for a candidate optimal design.

    Evaluates the combined sensitivity over a dose grid; the verdict is
    'optimal' iff the maximum is at most ``tol`` (the parts are
    normalized, so ``tol`` is relative to the criterion scale).
    Degenerate grid points are skipped with a warning and excluded from
    the maximum.  Returns (SensitivityCurve, verdict).
    """
    if grid is None:
        grid = np.linspace(0.0, DEFAULT_GRID_HI, DEFAULT_GRID_N)
    grid = np.asarray(grid, dtype=float)
    obj = DesignObjective(model_spec, crit, design.fixed_arms)
    pieces = _NominalPieces(obj, design)
    stildes, bad = _grid_stildes(pieces, grid)
    if bad.any():
        warnings.warn(
            f"{int(bad.sum())} degenerate grid points skipped during verification",
            stacklevel=2,
        )
    if bad.all():
        raise SingularInformationError("sensitivity undefined on the whole grid")
    pieces.calibrate(stildes)
    values = np.full(grid.shape, np.nan)
    for j in range(grid.size):
        if not bad[j]:
            values[j] = pieces.sensitivity_from_stildes(
                [stildes[i][j] for i in range(obj.crit.K)]
            )
    jmax = int(np.nanargmax(np.where(np.isfinite(values), values, -np.inf)))
    curve = SensitivityCurve(grid, values, float(values[jmax]), float(grid[jmax]))
    verdict = "optimal" if curve.max_value <= tol else "not_optimal"
    return curve, verdict
