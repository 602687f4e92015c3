"""Maximum-likelihood fitting of trinomial dose-response data and
delta-method inference for the derived endpoints (RD50, LD50, ratio).

Fitting uses Fisher scoring with step halving, which is monotone in the
log-likelihood and robust for these ordinal likelihoods.  Doses are
expected on the transformed scale (``log(raw + 1)``); `fit_mle` applies
the transform itself when given raw `CountRecord` rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models
from .errors import (
    ConvergenceError,
    DegenerateDoseError,
    DimensionError,
    NoRootError,
    SeparationError,
    SingularEndpointError,
    SingularInformationError,
)
from .models import ModelSpec, ParamVector

MAX_ITER = 200
GRAD_TOL = 1e-9


@dataclass(frozen=True)
class CountRecord:
    """One experimental row: dose on the raw scale plus category counts.

    ``other_abnormal`` pools 0-spicules, dead/delayed and any unrecorded
    abnormal outcomes into the third response category.  The original
    column split is kept when known so ingested files round-trip.
    """

    date: str
    dose: float
    duration: str
    observed: int
    normal: int
    radial: int
    other_abnormal: int
    zero_spicules: int | None = None
    dead_delayed: int | None = None

    def __post_init__(self):
        if self.dose < 0:
            raise ValueError(f"dose must be nonnegative, got {self.dose}")
        counts = (self.observed, self.normal, self.radial, self.other_abnormal)
        if any(c < 0 for c in counts):
            raise ValueError(f"counts must be nonnegative: {counts}")
        if self.normal + self.radial + self.other_abnormal != self.observed:
            raise ValueError(
                "category counts do not sum to observed: "
                f"{self.normal}+{self.radial}+{self.other_abnormal} != {self.observed}"
            )

    @property
    def category_counts(self) -> np.ndarray:
        return np.array([self.normal, self.radial, self.other_abnormal], dtype=float)


@dataclass(frozen=True)
class FitResult:
    theta_hat: ParamVector
    cov: np.ndarray
    loglik: float
    aic: float
    bic: float
    n_obs: int
    n_iter: int = 0
    spec_name: str = ""

    def to_dict(self):
        return {
            "spec": self.spec_name,
            "theta_hat": [float(v) for v in self.theta_hat.values],
            "labels": list(self.theta_hat.labels),
            "se": [float(s) for s in np.sqrt(np.diag(self.cov))],
            "cov": [[float(v) for v in row] for row in self.cov],
            "loglik": float(self.loglik),
            "aic": float(self.aic),
            "bic": float(self.bic),
            "n_obs": int(self.n_obs),
            "n_iter": int(self.n_iter),
        }


@dataclass(frozen=True)
class EndpointEstimate:
    value: float
    se: float
    kind: str

    def __post_init__(self):
        if self.se < 0 or not math.isfinite(self.value):
            raise ValueError("endpoint estimate must have finite value and se >= 0")


def transform_dose(raw):
    """log(dose + 1): maps [0, inf) onto itself, taming the raw dose range."""
    return np.log1p(np.asarray(raw, dtype=float))


def _aggregate(records, transform=True):
    """Pool counts by dose level; returns (x, counts k-vector per dose)."""
    by_dose: dict[float, np.ndarray] = {}
    for r in records:
        x = float(transform_dose(r.dose)) if transform else float(r.dose)
        by_dose.setdefault(x, np.zeros(3))
        by_dose[x] += r.category_counts
    doses = np.array(sorted(by_dose))
    counts = np.stack([by_dose[d] for d in doses])
    return doses, counts


def _loglik_parts(spec, theta, doses, counts):
    """(loglik, gradient, expected information) of the pooled multinomial."""
    p = spec.p
    ll = 0.0
    grad = np.zeros(p)
    info = np.zeros((p, p))
    for x, y in zip(doses, counts):
        n = y.sum()
        if n == 0:
            continue
        pi = models.category_probs(spec, theta, x).pi
        X = spec.design_matrix(x)
        D = spec.C.T @ np.diag(1.0 / (spec.L @ pi)) @ spec.L
        J = np.linalg.solve(D, X)[:, :p]  # d pi / d theta, free block
        ll += float(y @ np.log(pi))
        grad += J.T @ (y / pi)
        info += n * (J.T @ (J / pi[:, None]))
    return ll, grad, info


def _start_values(spec, doses, counts):
    """Intercepts from pooled empirical marginals (0.5 smoothing), slopes 0."""
    pooled = counts.sum(axis=0) + 0.5
    pi = pooled / pooled.sum()
    logpi = np.log(spec.L @ pi)
    eta = spec.C.T @ logpi  # empirical linear predictors, last entry ~ 0
    theta0 = np.zeros(spec.p)
    if spec.structure == "shared_slope":
        theta0[: spec.k - 1] = eta[: spec.k - 1]
    else:
        m = len(spec.basis)
        for j in range(spec.k - 1):
            theta0[j * m] = eta[j]
    return theta0


def fit_mle(spec: ModelSpec, records, max_iter=MAX_ITER) -> FitResult:
    """Fisher scoring with step halving for the multinomial likelihood.

    Raises SeparationError when the data cannot identify the parameters
    (single dose level, rank-deficient information, diverging estimates)
    and ConvergenceError when the iteration budget is exhausted.
    """
    if not records:
        raise SeparationError("no records supplied")
    doses, counts = _aggregate(records)
    informative = (counts.sum(axis=1) > 0).sum()
    if informative < 2:
        raise SeparationError(
            f"{informative} informative dose level(s); model is unidentifiable"
        )
    n_obs = int(counts.sum())
    theta = _start_values(spec, doses, counts)

    def safe_parts(t):
        try:
            return _loglik_parts(spec, t, doses, counts)
        except DegenerateDoseError:
            return -np.inf, None, None

    ll, grad, info = safe_parts(theta)
    if not np.isfinite(ll):
        raise SeparationError("degenerate likelihood at starting values")
    it = 0
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as exc:
            raise SeparationError(
                "singular expected information; too few distinct dose levels "
                "or separated data"
            ) from exc
        # step halving keeps the log-likelihood non-decreasing
        scale = 1.0
        for _ in range(40):
            cand = theta + scale * step
            ll_new, grad_new, info_new = safe_parts(cand)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12:
                break
            scale *= 0.5
        else:
            raise ConvergenceError("step halving failed to improve likelihood")
        theta, ll, grad, info = cand, ll_new, grad_new, info_new
        if np.linalg.norm(theta) > 1e4:
            raise SeparationError("parameter estimates diverging; separated data")
        if np.linalg.norm(grad) < GRAD_TOL * max(1.0, abs(ll)):
            break
    else:
        raise ConvergenceError(f"no convergence after {max_iter} iterations")

    cov = np.linalg.inv(_observed_info(spec, theta, doses, counts))
    cov = 0.5 * (cov + cov.T)
    p = spec.p
    return FitResult(
        theta_hat=spec.params(theta),
        cov=cov,
        loglik=ll,
        aic=-2.0 * ll + 2.0 * p,
        bic=-2.0 * ll + p * math.log(n_obs),
        n_obs=n_obs,
        n_iter=it,
        spec_name=spec.name,
    )


def _observed_info(spec, theta, doses, counts, h=1e-6):
    """Negative Hessian at theta via central differences of the gradient."""
    p = theta.size
    H = np.zeros((p, p))
    for i in range(p):
        hi = h * max(1.0, abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += hi
        tm[i] -= hi
        _, gp, _ = _loglik_parts(spec, tp, doses, counts)
        _, gm, _ = _loglik_parts(spec, tm, doses, counts)
        H[:, i] = (gp - gm) / (2.0 * hi)
    return -0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# Derived endpoints for the common-slope trinomial models
# ---------------------------------------------------------------------------


def _theta3(theta) -> np.ndarray:
    vals = theta.values if isinstance(theta, ParamVector) else np.asarray(theta, float)
    if vals.size != 3:
        raise DimensionError("endpoint operations require (c1, c2, b) parameters")
    return vals


def _sig(z: float) -> float:
    # scalar logistic; the root finder calls this in a tight loop
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _radial_excess(theta, x):
    """f(x) = P(radial at x) - 0.5 for the cumulative trinomial."""
    c1, c2, b = theta
    return _sig(c2 + b * x) - _sig(c1 + b * x) - 0.5


def rd50(theta, bracket=(0.0, 15.0)) -> float:
    """Dose (transformed scale) where the radialization probability is 0.5.

    The radial probability is unimodal in dose; when its peak exceeds 0.5
    there are two crossings and the ascending one (smaller dose) is
    returned, matching how the endpoint is used: the first dose at which
    half the population radializes.
    """
    vals = _theta3(theta)
    c1, c2, b = vals
    if b == 0:
        raise NoRootError("slope is zero; radial probability does not vary")
    lo, hi = bracket
    x_peak = -(c1 + c2) / (2.0 * b)  # argmax of the radial probability
    f = lambda x: _radial_excess(vals, x)
    candidates = []
    if lo < x_peak < hi:
        candidates = [(lo, x_peak), (x_peak, hi)]
    else:
        candidates = [(lo, hi)]
    for a, bnd in candidates:
        fa, fb = f(a), f(bnd)
        if fa == 0.0:
            return float(a)
        if fa * fb < 0:
            for _ in range(200):  # bisection to ~1e-13
                mid = 0.5 * (a + bnd)
                fm = f(mid)
                if fa * fm <= 0:
                    bnd = mid
                else:
                    a, fa = mid, fm
                if bnd - a < 1e-13:
                    break
            x = 0.5 * (a + bnd)
            # one Newton polish using the analytic dose derivative
            dfdx = _dfdx(vals, x)
            if dfdx != 0:
                x -= f(x) / dfdx
            if abs(f(x)) > 1e-10:
                raise NoRootError(f"root polish failed, |f|={abs(f(x)):.2e}")
            return float(x)
    raise NoRootError(
        f"no sign change for the radial-50 equation in bracket {bracket}"
    )


def _dlogistic(z):
    s = _sig(float(z))
    return s * (1.0 - s)


def _dfdx(theta, x):
    c1, c2, b = theta
    return b * (_dlogistic(c2 + b * x) - _dlogistic(c1 + b * x))


def rd50_gradient(theta, x=None) -> np.ndarray:
    """Implicit-function gradient of rd50 w.r.t. (c1, c2, b, 0).

    Returns a length-4 vector; the last entry is the structural zero of
    the simplex-constraint coefficient.  ``grad f / grad x`` must not
    vanish at the root.
    """
    vals = _theta3(theta)
    c1, c2, b = vals
    if x is None:
        x = rd50(vals)
    d1 = _dlogistic(c1 + b * x)
    d2 = _dlogistic(c2 + b * x)
    dfdx = b * (d2 - d1)
    if abs(dfdx) < 1e-14:
        raise SingularEndpointError("df/dx vanishes at the radial-50 root")
    dfdtheta = np.array([-d1, d2, x * (d2 - d1), 0.0])
    return -dfdtheta / dfdx


def ld50(theta) -> float:
    """Dose (transformed scale) at which the cumulative below-lethal
    probability is 0.5, i.e. the second predictor crosses zero."""
    c1, c2, b = _theta3(theta)
    if b == 0:
        raise NoRootError("slope is zero")
    return float(-c2 / b)


def ld50_gradient(theta) -> np.ndarray:
    c1, c2, b = _theta3(theta)
    if b == 0:
        raise NoRootError("slope is zero")
    return np.array([0.0, -1.0 / b, c2 / (b * b), 0.0])


def endpoint_variance(theta, matrix, kind, matrix_is_information=False):
    """Delta-method estimate for RD50, LD50 or their ratio LD50/RD50.

    ``matrix`` is the parameter covariance, or an information matrix when
    ``matrix_is_information`` is set (it is then inverted).  Accepts
    either the free 3x3 block or the 4x4 form with the structural zero.
    """
    vals = _theta3(theta)
    A = np.asarray(matrix, dtype=float)
    if matrix_is_information:
        try:
            A = np.linalg.inv(A)
        except np.linalg.LinAlgError as exc:
            raise SingularInformationError("information matrix not invertible") from exc
    q = A.shape[0]

    def dvar(grad4):
        g = grad4[:q]
        return float(g @ A @ g)

    if kind == "RD50":
        x = rd50(vals)
        return EndpointEstimate(x, math.sqrt(max(dvar(rd50_gradient(vals, x)), 0.0)), kind)
    if kind == "LD50":
        return EndpointEstimate(ld50(vals), math.sqrt(max(dvar(ld50_gradient(vals)), 0.0)), kind)
    if kind != "ratio":
        raise ValueError(f"unknown endpoint kind {kind!r}")

    x_r = rd50(vals)
    x_l = ld50(vals)
    G = np.stack([ld50_gradient(vals)[:q], rd50_gradient(vals, x_r)[:q]])
    cov2 = G @ A @ G.T  # 2x2 covariance of (LD50, RD50)
    r = x_l / x_r
    d = np.array([1.0 / x_r, -x_l / (x_r * x_r)])  # d r / d (LD50, RD50)
    var = float(d @ cov2 @ d)
    return EndpointEstimate(r, math.sqrt(max(var, 0.0)), kind)
