"""Design optimality criteria and efficiency computations.

All criteria are expressed in a maximize convention.  The scalar building
blocks per nominal parameter set are

* D-part:  log det M / p        (volume of the confidence ellipsoid)
* A-part:  -log trace(M^{-1})   (average parameter variance)
* c-part:  -log c^T M^{-1} c    (asymptotic variance of the RD50 estimate)

and a criterion is a convex combination of the three, averaged over the
K nominal sets.  Pure D-, c- and A-optimality, the dual (D/c) criterion
and the robust composites are all instances.  Criterion parts that are
natively minimized (variances, trace-inverse) enter with flipped sign on
a log scale; the convention is validated against known optimal designs
in the tests.

Sentinels: a singular information matrix yields -inf for the D-part.  The
c-part falls back to a pseudo-inverse when the gradient lies in the range
of M (one-point c-optimal designs are singular but perfectly informative
about the endpoint) and +inf otherwise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import fitting, models
from ._kernels import RIDGE_REL, design_moments
from .designs import Design
from .errors import DimensionError, SingularInformationError
from .models import FisherInfo, ModelSpec, ParamVector

CRITERION_KINDS = ("D", "c", "A", "dual", "robust_D", "robust_dual", "multiple")


def _as_matrix(M) -> np.ndarray:
    return M.M if isinstance(M, FisherInfo) else np.asarray(M, dtype=float)


def is_singular(M, rel=1e-12) -> bool:
    M = _as_matrix(M)
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    return eig[-1] <= 0 or eig[0] < rel * eig[-1]


def phi_D(M) -> float:
    """log det M; -inf when the matrix is numerically singular."""
    A = _as_matrix(M)
    if is_singular(A):
        return -np.inf
    sign, logdet = np.linalg.slogdet(A)
    return float(logdet) if sign > 0 else -np.inf


def cvar(M, c, consistency_tol=1e-2) -> float:
    """c^T M^{-1} c with generalized-inverse handling.

    For singular M the value is finite iff c lies in the range of M;
    otherwise +inf.  The range check is deliberately loose (1e-2
    relative residual): one-point c-optimal designs are singular with c
    in range only at the exact optimum, and supports quoted to a few
    digits would otherwise flip to infinity.
    """
    A = _as_matrix(M)
    c = np.asarray(c, dtype=float)
    if c.size != A.shape[0]:
        raise DimensionError("gradient length does not match matrix size")
    if not is_singular(A):
        return float(c @ np.linalg.solve(A, c))
    Ainv = np.linalg.pinv(A, rcond=1e-12, hermitian=True)
    z = Ainv @ c
    if np.linalg.norm(A @ z - c) > consistency_tol * max(np.linalg.norm(c), 1e-300):
        return np.inf
    return float(c @ z)


def supports_rd50(spec: ModelSpec) -> bool:
    """True for specs whose radial-50 endpoint the fitting module defines:
    common-slope trinomials with the cumulative link."""
    return (
        spec.inverse_link == "cumulative"
        and spec.structure == "shared_slope"
        and spec.p == 3
    )


def phi_c(M, theta) -> float:
    """Asymptotic variance of the RD50 estimate under information M."""
    A = _as_matrix(M)
    grad = fitting.rd50_gradient(theta)[: A.shape[0]]
    return cvar(A, grad)


def phi_A(M) -> float:
    """trace(M^{-1}); +inf when singular."""
    A = _as_matrix(M)
    if is_singular(A):
        return np.inf
    return float(np.trace(np.linalg.inv(A)))


def phi_dual(M, theta, lam: float) -> float:
    """Maximize convention: (lam/p) log det M - (1-lam) log c^T M^{-1} c."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    A = _as_matrix(M)
    p = A.shape[0]
    d_part = phi_D(A) / p if lam > 0 else 0.0
    if lam == 1.0:
        return lam * d_part
    v = phi_c(A, theta)
    if not np.isfinite(v) or v <= 0:
        return -np.inf
    return lam * d_part - (1.0 - lam) * float(np.log(v))


@dataclass(frozen=True)
class CriterionSpec:
    """Fully specified optimality target.

    ``lambdas`` holds one D-weight per nominal set for the dual family
    (scalars broadcast); ``lambdas2`` adds the A-weight for the
    three-part 'multiple' criterion.  ``stage1`` optionally mixes a
    first-stage information contribution: a Design (per-nominal
    information is recomputed) or a fixed FisherInfo, combined as
    ``alpha * M_stage1 + (1 - alpha) * M_design``.
    """

    kind: str
    nominal_sets: tuple[ParamVector, ...]
    lambdas: tuple[float, ...] = ()
    lambdas2: tuple[float, ...] = ()
    endpoint: str = "RD50"
    stage1: object = None
    stage1_alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in CRITERION_KINDS:
            raise ValueError(f"unknown criterion kind {self.kind!r}")
        if not self.nominal_sets:
            raise ValueError("at least one nominal parameter set is required")
        object.__setattr__(
            self, "nominal_sets", tuple(self.nominal_sets)
        )
        K = len(self.nominal_sets)
        lam = self._broadcast(self.lambdas, K, self._default_lambda())
        lam2 = self._broadcast(self.lambdas2, K, 0.0)
        for a, b in zip(lam, lam2):
            if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0 and a + b <= 1.0):
                raise ValueError("criterion weights must lie in the simplex")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "lambdas2", lam2)
        if not 0.0 <= self.stage1_alpha <= 1.0:
            raise ValueError("stage1_alpha must lie in [0, 1]")

    def _default_lambda(self):
        return {"D": 1.0, "robust_D": 1.0, "c": 0.0, "A": 0.0}.get(self.kind, 0.5)

    @staticmethod
    def _broadcast(vals, K, default):
        if vals is None or (hasattr(vals, "__len__") and len(vals) == 0):
            return (default,) * K
        if np.isscalar(vals):
            return (float(vals),) * K
        vals = tuple(float(v) for v in vals)
        if len(vals) == 1:
            return vals * K
        if len(vals) != K:
            raise DimensionError("one lambda per nominal set required")
        return vals

    @property
    def K(self) -> int:
        return len(self.nominal_sets)

    def part_weights(self) -> np.ndarray:
        """(K, 3) array of (D, A, c) weights per nominal set."""
        W = np.zeros((self.K, 3))
        if self.kind in ("D", "robust_D"):
            W[:, 0] = 1.0
        elif self.kind == "c":
            W[:, 2] = 1.0
        elif self.kind == "A":
            W[:, 1] = 1.0
        elif self.kind in ("dual", "robust_dual"):
            W[:, 0] = self.lambdas
            W[:, 2] = 1.0 - np.asarray(self.lambdas)
        else:  # multiple
            W[:, 0] = self.lambdas
            W[:, 1] = self.lambdas2
            W[:, 2] = 1.0 - np.asarray(self.lambdas) - np.asarray(self.lambdas2)
        return W


class DesignObjective:
    """Evaluates a CriterionSpec for single designs and particle batches.

    The batched path is the particle-swarm hot loop; for the trinomial
    common-slope family it dispatches to the compiled kernel when
    available.  Values from the batched path use a tiny ridge in the
    c-part solve so that near-singular designs degrade smoothly; reported
    quantities should be recomputed with `value_exact`.
    """

    def __init__(self, model_spec: ModelSpec, crit: CriterionSpec, fixed_arms=()):
        self.spec = model_spec
        self.crit = crit
        self.fixed_arms = tuple((float(d), float(w)) for d, w in fixed_arms)
        self.thetas = np.stack([ns.values for ns in crit.nominal_sets])
        if self.thetas.shape[1] != model_spec.p:
            raise DimensionError("nominal sets do not match the model dimension")
        self.part_w = crit.part_weights()
        self.p = model_spec.p
        if np.any(self.part_w[:, 2] > 0):
            if not supports_rd50(model_spec):
                raise ValueError(
                    "the c criterion targets the radial-50 endpoint, which is "
                    "defined only for the common-slope cumulative trinomial "
                    f"models, not {model_spec.name!r}"
                )
            self.cgrads = np.stack(
                [fitting.rd50_gradient(t)[: self.p] for t in self.thetas]
            )
        else:
            self.cgrads = np.zeros_like(self.thetas)
        self.alpha = float(crit.stage1_alpha)
        self.bases = self._stage1_bases(crit.stage1)
        self._fast = (
            model_spec.name == "po_trinomial"
            and model_spec.structure == "shared_slope"
            and len(model_spec.basis) == 1
            and model_spec.basis.terms[0].kind == "dose"
        )

    def _stage1_bases(self, stage1):
        if stage1 is None or self.alpha == 0.0:
            return None
        if isinstance(stage1, FisherInfo):
            return np.repeat(stage1.M[None, :, :], self.crit.K, axis=0)
        if isinstance(stage1, Design):
            return np.stack(
                [
                    models.fisher_info(self.spec, self.spec.params(t), stage1).M
                    for t in self.thetas
                ]
            )
        raise TypeError("stage1 must be a Design or FisherInfo")

    # -- information assembly -------------------------------------------------

    def _with_arms(self, points, weights):
        B = points.shape[0]
        if not self.fixed_arms:
            return points, weights
        arm_p = np.array([d for d, _ in self.fixed_arms])
        arm_w = np.array([w for _, w in self.fixed_arms])
        pts = np.concatenate([points, np.broadcast_to(arm_p, (B, arm_p.size))], axis=1)
        wts = np.concatenate([weights, np.broadcast_to(arm_w, (B, arm_w.size))], axis=1)
        return pts, wts

    def info_matrices(self, design: Design) -> list[np.ndarray]:
        """Per-nominal information of the full design (arms + stage 1)."""
        out = []
        for i, t in enumerate(self.thetas):
            M = models.fisher_info(self.spec, self.spec.params(t), design).M
            if self.bases is not None:
                M = self.alpha * self.bases[i] + (1.0 - self.alpha) * M
            out.append(M)
        return out

    def moments(self, points, weights):
        """(logdet, cvar, trinv) arrays of shape (B, K) for design batches.

        ``points``/``weights`` describe the free part; fixed arms are
        appended here, so each row's weights plus arm weights must sum
        to one.
        """
        pts, wts = self._with_arms(points, weights)
        if self._fast:
            return design_moments(
                self.spec.name, pts, wts, self.thetas, self.cgrads,
                self.bases, self.alpha,
            )
        return self._generic_moments(pts, wts)

    def _generic_moments(self, pts, wts):
        B, K, p = pts.shape[0], self.crit.K, self.p
        logdet = np.full((B, K), -np.inf)
        cv = np.full((B, K), np.inf)
        trinv = np.full((B, K), np.inf)
        eye = np.eye(p)
        for b in range(B):
            for i, t in enumerate(self.thetas):
                M = np.zeros((p, p))
                ok = True
                for x, w in zip(pts[b], wts[b]):
                    if w <= 1e-12:
                        continue
                    try:
                        M += w * models.elemental_info(self.spec, self.spec.params(t), x)
                    except models.DegenerateDoseError:
                        ok = False
                        break
                if not ok:
                    continue
                if self.bases is not None:
                    M = self.alpha * self.bases[i] + (1.0 - self.alpha) * M
                sign, ld = np.linalg.slogdet(M)
                logdet[b, i] = ld if sign > 0 else -np.inf
                ridge = RIDGE_REL * max(np.trace(M), 1e-300)
                Mr = M + ridge * eye
                sol = np.linalg.solve(Mr, np.column_stack([self.cgrads[i], np.ones(p)]))
                cv[b, i] = float(self.cgrads[i] @ sol[:, 0])
                trinv[b, i] = float(np.trace(np.linalg.solve(Mr, eye)))
        return logdet, cv, trinv

    # -- criterion values ------------------------------------------------------

    def compose(self, logdet, cv, trinv) -> np.ndarray:
        """Combine (B, K) moments into (B,) criterion values.

        Inactive parts (zero weight) are masked before multiplying so a
        sentinel in an unused moment cannot poison the value: a one-point
        c-optimal candidate has logdet = -inf but a finite c-part.
        """
        wD, wA, wc = self.part_w[:, 0], self.part_w[:, 1], self.part_w[:, 2]
        total = np.zeros_like(logdet)
        with np.errstate(divide="ignore", invalid="ignore"):
            if np.any(wD > 0):
                total = total + wD * np.where(wD > 0, logdet, 0.0) / self.p
            if np.any(wA > 0):
                total = total - wA * np.where(wA > 0, np.log(trinv), 0.0)
            if np.any(wc > 0):
                total = total - wc * np.where(wc > 0, np.log(cv), 0.0)
        vals = total.mean(axis=1)
        return np.where(np.isnan(vals) | ~np.isfinite(vals), -np.inf, vals)

    def batch_value(self, points, weights) -> np.ndarray:
        return self.compose(*self.moments(points, weights))

    def value(self, design: Design) -> float:
        """Criterion value via the batched (ridge-regularized) path."""
        return float(
            self.batch_value(design.points[None, :], design.weights[None, :])[0]
        )

    def value_exact(self, design: Design) -> float:
        """Criterion value with exact linear algebra (pinv for singular c)."""
        total = 0.0
        for i, M in enumerate(self.info_matrices(design)):
            wD, wA, wc = self.part_w[i]
            term = 0.0
            if wD > 0:
                ld = phi_D(M)
                if not np.isfinite(ld):
                    return -np.inf
                term += wD * ld / self.p
            if wA > 0:
                tr = phi_A(M)
                if not np.isfinite(tr):
                    return -np.inf
                term -= wA * np.log(tr)
            if wc > 0:
                v = cvar(M, self.cgrads[i])
                if not np.isfinite(v) or v <= 0:
                    return -np.inf
                term -= wc * np.log(v)
            total += term
        return total / self.crit.K


def phi_robust(design: Design, crit: CriterionSpec, model_spec: ModelSpec) -> float:
    """Average criterion over the K nominal sets (maximize convention)."""
    return DesignObjective(model_spec, crit, design.fixed_arms).value_exact(design)


def two_stage_info(stage1, stage2: Design, alpha: float, spec, theta) -> FisherInfo:
    """alpha * M_stage1 + (1 - alpha) * M(stage2)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    M1 = _as_matrix(stage1)
    M2 = models.fisher_info(spec, theta, stage2).M
    if M1.shape != M2.shape:
        raise DimensionError("stage information matrices differ in size")
    return FisherInfo(alpha * M1 + (1.0 - alpha) * M2)


# ---------------------------------------------------------------------------
# Rank-k augmentation identities (adding a fixed arm to an existing design)
# ---------------------------------------------------------------------------


def swm_augmented_det(M1, x0_stilde, alpha: float) -> float:
    """det((1-a) M1 + a s0 s0^T) without forming the mixed matrix.

    Uses the determinant identity
    det = (1-a)^p det(M1) det(I + a/(1-a) s0^T M1^{-1} s0).
    """
    A = _as_matrix(M1)
    s0 = np.asarray(x0_stilde, dtype=float)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if is_singular(A):
        raise SingularInformationError("M1 must be invertible")
    p = A.shape[0]
    r = alpha / (1.0 - alpha)
    inner = np.eye(s0.shape[1]) + r * (s0.T @ np.linalg.solve(A, s0))
    return float(
        (1.0 - alpha) ** p * np.linalg.det(A) * np.linalg.det(inner)
    )


def swm_augmented_cvar(M1, x0_stilde, alpha: float, c) -> float:
    """c^T ((1-a) M1 + a s0 s0^T)^{-1} c via the rank-k update."""
    A = _as_matrix(M1)
    s0 = np.asarray(x0_stilde, dtype=float)
    c = np.asarray(c, dtype=float)
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    if is_singular(A):
        raise SingularInformationError("M1 must be invertible")
    Minv_c = np.linalg.solve(A, c)
    base = float(c @ Minv_c) / (1.0 - alpha)
    if alpha == 0.0:
        return base
    r = alpha / (1.0 - alpha)
    Minv_s = np.linalg.solve(A, s0)
    inner = np.eye(s0.shape[1]) + r * (s0.T @ Minv_s)
    t = s0.T @ Minv_c
    corr = alpha / (1.0 - alpha) ** 2 * float(t @ np.linalg.solve(inner, t))
    return base - corr


def efficiency(design: Design, reference: Design, kind: str, spec, theta) -> float:
    """Relative efficiency of ``design`` against a reference optimal design.

    D: (det M / det M*)^(1/p);  c: var*(RD50) / var(RD50).  Values are
    clipped to [0, 1]; a value above 1 (reference not actually optimal)
    is clipped with a warning.
    """
    M = models.fisher_info(spec, theta, design).M
    Mref = models.fisher_info(spec, theta, reference).M
    if kind == "D":
        ld_ref = phi_D(Mref)
        if not np.isfinite(ld_ref):
            raise SingularInformationError("reference design is singular")
        ld = phi_D(M)
        eff = 0.0 if not np.isfinite(ld) else float(np.exp((ld - ld_ref) / spec.p))
    elif kind == "c":
        v_ref = phi_c(Mref, theta)
        v = phi_c(M, theta)
        if not np.isfinite(v_ref):
            raise SingularInformationError("reference design has infinite variance")
        eff = 0.0 if not np.isfinite(v) else v_ref / v
    else:
        raise ValueError(f"efficiency kind must be 'D' or 'c', got {kind!r}")
    if eff > 1.0 + 1e-9:
        warnings.warn(
            f"{kind}-efficiency {eff:.4f} exceeds 1; reference is not optimal",
            stacklevel=2,
        )
    return float(min(max(eff, 0.0), 1.0))
