"""Multivariate logistic (contrast/marginal-indicator) dose-response models.

The model family covers categorical responses whose linear predictors are
contrasts of logs of marginal probability sums,

    eta = X(dose) @ theta_full,      eta = C^T log(L pi),

with ``L`` stacking marginal indicator rows and ``C`` the contrast matrix.
The last predictor row always encodes ``log(sum(pi)) = 0``, which pins the
probability simplex; its coefficient is a structural zero appended to the
user-facing parameter vector.  Different ``(C, L)`` choices give the
proportional-odds (cumulative), continuation-ratio and adjacent-categories
trinomial models, all with a common slope, plus a richer eight-coefficient
cumulative model with basis ``(1, x, x^2, sin 2x)`` per predictor.

Per-observation Fisher information factors through

    s(x) = X^T (C^T D^{-1} L)^{-T} V^{-1/2},   D = Diag(L pi),  V = Diag(pi),

so that ``M(x) = s(x) s(x)^T``.  The rows of ``s`` corresponding to the
structural zero decouple exactly (the full matrix is block-diagonal with a
trailing 1), so the public API exposes the free-parameter block only:
``stilde`` returns a ``p x k`` matrix and ``fisher_info`` a ``p x p`` matrix
for ``p`` free parameters.

All functions here are pure; the model-specification objects are frozen
and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDoseError, DimensionError, SingularInformationError

# Probabilities below this are treated as degenerate rather than clamped:
# clamping would silently corrupt information matrices and optimality
# certificates downstream.
PROB_FLOOR = 1e-12


def sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BasisTerm:
    """One scalar basis function of the (transformed) dose.

    kind: 'const' -> 1, 'dose' -> x, 'dose_sq' -> x^2, 'sin' -> sin(freq*x).
    """

    kind: str
    freq: int = 1

    _KINDS = ("const", "dose", "dose_sq", "sin")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown basis term kind {self.kind!r}")
        if self.kind == "sin" and (self.freq != int(self.freq) or self.freq == 0):
            raise ValueError("sin term requires a nonzero integer frequency")

    def __call__(self, x: float) -> float:
        if self.kind == "const":
            return 1.0
        if self.kind == "dose":
            return float(x)
        if self.kind == "dose_sq":
            return float(x) * float(x)
        return math.sin(self.freq * float(x))

    @property
    def label(self) -> str:
        return {
            "const": "1",
            "dose": "x",
            "dose_sq": "x^2",
            "sin": f"sin({self.freq}x)",
        }[self.kind]


@dataclass(frozen=True)
class RegressionBasis:
    """Ordered collection of basis terms evaluated at a dose."""

    terms: tuple[BasisTerm, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("basis must contain at least one term")

    def __len__(self):
        return len(self.terms)

    def evaluate(self, x: float) -> np.ndarray:
        vals = np.array([t(x) for t in self.terms], dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"basis evaluation not finite at dose {x!r}")
        return vals

    @classmethod
    def from_names(cls, names) -> "RegressionBasis":
        """Parse term names like '1', 'x', 'x^2', 'sin(2x)'."""
        terms = []
        for name in names:
            s = name.replace(" ", "")
            if s == "1":
                terms.append(BasisTerm("const"))
            elif s == "x":
                terms.append(BasisTerm("dose"))
            elif s in ("x^2", "x**2", "x2"):
                terms.append(BasisTerm("dose_sq"))
            elif s.startswith("sin(") and s.endswith("x)"):
                freq = s[4:-2]
                terms.append(BasisTerm("sin", int(freq) if freq else 1))
            else:
                raise ValueError(f"cannot parse basis term {name!r}")
        return cls(tuple(terms))

    @property
    def labels(self):
        return [t.label for t in self.terms]


@dataclass(frozen=True)
class ParamVector:
    """Free model parameters with human-readable labels.

    For the trinomial common-slope models the layout is ``(c1, c2, b)``:
    intercepts of the two linear predictors followed by the shared slope.
    Slopes are stored signed; a decreasing normal-category dose response
    has ``b < 0``.
    """

    values: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if vals.ndim != 1:
            raise DimensionError("parameter values must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise ValueError("parameter values must be finite")
        object.__setattr__(self, "values", vals)
        if self.labels and len(self.labels) != vals.size:
            raise DimensionError("labels do not match parameter length")

    def __len__(self):
        return self.values.size

    def as_array(self) -> np.ndarray:
        return self.values.copy()


# A robust criterion takes several of these as equally plausible truths.
NominalSet = ParamVector


@dataclass(frozen=True)
class CategoryProbs:
    """Probability vector over the k response categories."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if np.any(pi <= 0.0) or np.any(pi >= 1.0):
            raise DegenerateDoseError(f"category probabilities outside (0,1): {pi}")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError(f"category probabilities sum to {pi.sum()!r}, not 1")
        object.__setattr__(self, "pi", pi)


@dataclass(frozen=True)
class FisherInfo:
    """Symmetric PSD information matrix, normalized per observation."""

    M: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionError("information matrix must be square")
        scale = max(1.0, float(np.abs(M).max()))
        if np.abs(M - M.T).max() > 1e-10 * scale:
            raise ValueError("information matrix is not symmetric")
        M = 0.5 * (M + M.T)
        if np.linalg.eigvalsh(M).min() < -1e-10 * scale:
            raise ValueError("information matrix is not positive semidefinite")
        object.__setattr__(self, "M", M)

    @property
    def p(self):
        return self.M.shape[0]


@dataclass(frozen=True)
class ModelSpec:
    """A member of the contrast/marginal-indicator model family.

    ``L`` is l x k; ``C`` is stored l x k so that ``C.T`` is the contrast
    matrix applied to ``log(L pi)``.  ``structure`` selects how the design
    matrix is assembled from the basis:

    * ``shared_slope``: one intercept per predictor plus slope coefficients
      shared across predictors (basis holds the non-constant terms).
    * ``separate``: each predictor gets its own full set of basis
      coefficients (basis must then start with the constant term).

    ``p`` counts free parameters; the structural zero multiplying the
    simplex-constraint column is not included.
    """

    name: str
    basis: RegressionBasis
    L: np.ndarray
    C: np.ndarray
    k: int
    structure: str
    inverse_link: str

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if L.shape[1] != self.k or C.shape[1] != self.k:
            raise DimensionError("L and C must have k columns")
        if L.shape != C.shape:
            raise DimensionError("L and C must be l x k with matching l")
        if np.linalg.matrix_rank(L) != self.k or np.linalg.matrix_rank(C) != self.k:
            raise ValueError("L and C must have full column rank")
        if self.structure not in ("shared_slope", "separate"):
            raise ValueError(f"unknown structure {self.structure!r}")
        if self.structure == "separate" and self.basis.terms[0].kind != "const":
            raise ValueError("separate structure requires a leading constant term")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "C", C)

    @property
    def p(self) -> int:
        """Number of free parameters."""
        if self.structure == "shared_slope":
            return (self.k - 1) + len(self.basis)
        return (self.k - 1) * len(self.basis)

    @property
    def param_labels(self) -> tuple[str, ...]:
        if self.structure == "shared_slope":
            labels = [f"c{j + 1}" for j in range(self.k - 1)]
            if len(self.basis) == 1:
                labels.append("b")
            else:
                labels.extend(f"b_{t}" for t in self.basis.labels)
            return tuple(labels)
        return tuple(
            f"eta{j + 1}_{t}" for j in range(self.k - 1) for t in self.basis.labels
        )

    def design_matrix(self, dose: float) -> np.ndarray:
        """Full k x (p+1) design matrix including the constraint column."""
        if not np.isfinite(dose):
            raise ValueError(f"dose must be finite, got {dose!r}")
        k, p = self.k, self.p
        X = np.zeros((k, p + 1))
        fx = self.basis.evaluate(dose)
        if self.structure == "shared_slope":
            m = len(self.basis)
            for j in range(k - 1):
                X[j, j] = 1.0
                X[j, k - 1 : k - 1 + m] = fx
        else:
            m = len(self.basis)
            for j in range(k - 1):
                X[j, j * m : (j + 1) * m] = fx
        X[k - 1, p] = 1.0
        return X

    def params(self, values, labels=None) -> ParamVector:
        vals = np.atleast_1d(np.asarray(values, dtype=float))
        if vals.size != self.p:
            raise DimensionError(
                f"{self.name} expects {self.p} parameters, got {vals.size}"
            )
        return ParamVector(vals, tuple(labels) if labels else self.param_labels)


def _check_theta(spec: ModelSpec, theta: ParamVector) -> np.ndarray:
    vals = theta.values if isinstance(theta, ParamVector) else np.asarray(theta, float)
    if vals.size != spec.p:
        raise DimensionError(
            f"spec {spec.name} has p={spec.p} but theta has length {vals.size}"
        )
    return vals


def eval_linear_predictors(spec: ModelSpec, theta, dose: float) -> np.ndarray:
    """Linear predictors eta at a transformed dose; the last entry is 0."""
    vals = _check_theta(spec, theta)
    X = spec.design_matrix(dose)
    return X @ np.append(vals, 0.0)


def _invert_link(spec: ModelSpec, eta: np.ndarray) -> np.ndarray:
    """Closed-form pi(eta) for the shipped specs."""
    if spec.inverse_link == "cumulative":
        # eta1 = logit(pi1), eta2 = logit(pi1+pi2): requires eta2 > eta1.
        cum = sigmoid(eta[:-1])
        pi = np.diff(np.concatenate(([0.0], cum, [1.0])))
    elif spec.inverse_link == "continuation":
        # eta_j = logit(pi_j / (pi_j + ... + pi_k)), conditional split.
        remaining = 1.0
        pi = np.empty(spec.k)
        for j in range(spec.k - 1):
            pi[j] = remaining * sigmoid(eta[j])
            remaining -= pi[j]
        pi[-1] = remaining
    elif spec.inverse_link == "adjacent":
        # eta_j = log(pi_j / pi_{j+1}); softmax over reversed cumulative sums.
        logpi = np.concatenate((np.cumsum(eta[-2::-1])[::-1], [0.0]))
        logpi -= logpi.max()
        pi = np.exp(logpi)
        pi /= pi.sum()
    else:
        raise ValueError(f"unknown inverse link {spec.inverse_link!r}")
    return pi


def category_probs(spec: ModelSpec, theta, dose: float) -> CategoryProbs:
    """Category probabilities at a dose; raises on degenerate configurations."""
    eta = eval_linear_predictors(spec, theta, dose)
    pi = _invert_link(spec, eta)
    if np.any(pi < PROB_FLOOR):
        raise DegenerateDoseError(
            f"degenerate category probabilities {pi} at dose {dose!r} "
            f"for spec {spec.name}"
        )
    pi = pi / pi.sum()
    return CategoryProbs(pi)


def stilde(spec: ModelSpec, theta, dose: float) -> np.ndarray:
    """Information square root s(x): p x k over the free parameters.

    The elemental information is ``s @ s.T``.  Built from the identity
    ``d pi / d theta = (C^T D^{-1} L)^{-1} X`` so that
    ``s = X^T (C^T D^{-1} L)^{-T} Diag(1/sqrt(pi))``; the row belonging to
    the structural-zero coefficient carries no cross information and is
    dropped.
    """
    vals = _check_theta(spec, theta)
    pi = category_probs(spec, vals, dose).pi
    X = spec.design_matrix(dose)
    D = spec.C.T @ np.diag(1.0 / (spec.L @ pi)) @ spec.L
    try:
        J = np.linalg.solve(D, X)  # d pi / d theta_full, k x (p+1)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError(
            f"contrast map singular at dose {dose!r} for spec {spec.name}"
        ) from exc
    s_full = (J / np.sqrt(pi)[:, None]).T  # (p+1) x k
    return s_full[: spec.p, :]


def elemental_info(spec: ModelSpec, theta, dose: float) -> np.ndarray:
    """Per-observation information contribution s(x) s(x)^T."""
    s = stilde(spec, theta, dose)
    return s @ s.T


def fisher_info(spec: ModelSpec, theta, design) -> FisherInfo:
    """Normalized information of a design: sum_i w_i s(x_i) s(x_i)^T.

    ``design`` is anything with ``all_points()``/``all_weights()`` (see
    designs.Design) or a (points, weights) pair of arrays on the
    transformed dose scale.
    """
    if hasattr(design, "all_points"):
        pts, wts = design.all_points(), design.all_weights()
    else:
        pts, wts = (np.asarray(a, dtype=float) for a in design)
    if pts.shape != wts.shape:
        raise DimensionError("points and weights differ in length")
    total = wts.sum()
    if wts.size == 0 or np.any(wts < -1e-12) or abs(total - 1.0) > 1e-9:
        raise ValueError(f"design weights must be a probability vector, sum {total}")
    M = np.zeros((spec.p, spec.p))
    for x, w in zip(pts, wts):
        if w <= 0.0:
            continue
        M += w * elemental_info(spec, theta, x)
    return FisherInfo(M)


def _trinomial_cumulative_CL():
    L = np.array(
        [
            [1, 0, 0],
            [1, 1, 0],
            [0, 1, 1],
            [0, 0, 1],
            [1, 1, 1],
        ],
        dtype=float,
    )
    Ct = np.array(
        [
            [1, 0, -1, 0, 0],
            [0, 1, 0, -1, 0],
            [0, 0, 0, 0, 1],
        ],
        dtype=float,
    )
    return L, Ct.T


def _trinomial_continuation_CL():
    L = np.array(
        [
            [1, 0, 0],
            [0, 1, 0],
            [0, 1, 1],
            [0, 0, 1],
            [1, 1, 1],
        ],
        dtype=float,
    )
    Ct = np.array(
        [
            [1, 0, -1, 0, 0],
            [0, 1, 0, -1, 0],
            [0, 0, 0, 0, 1],
        ],
        dtype=float,
    )
    return L, Ct.T


def _trinomial_adjacent_CL():
    L = np.array(
        [
            [1, 0, 0],
            [0, 1, 0],
            [0, 0, 1],
            [1, 1, 1],
        ],
        dtype=float,
    )
    Ct = np.array(
        [
            [1, -1, 0, 0],
            [0, 1, -1, 0],
            [0, 0, 0, 1],
        ],
        dtype=float,
    )
    return L, Ct.T


def _build_specs():
    slope = RegressionBasis.from_names(["x"])
    rich = RegressionBasis.from_names(["1", "x", "x^2", "sin(2x)"])
    Lc, Cc = _trinomial_cumulative_CL()
    Lr, Cr = _trinomial_continuation_CL()
    La, Ca = _trinomial_adjacent_CL()
    specs = [
        ModelSpec("po_trinomial", slope, Lc, Cc, 3, "shared_slope", "cumulative"),
        ModelSpec("cr_trinomial", slope, Lr, Cr, 3, "shared_slope", "continuation"),
        ModelSpec("ac_trinomial", slope, La, Ca, 3, "shared_slope", "adjacent"),
        ModelSpec("rich_trinomial", rich, Lc, Cc, 3, "separate", "cumulative"),
    ]
    return {s.name: s for s in specs}


SPECS = _build_specs()


def get_spec(name: str) -> ModelSpec:
    try:
        return SPECS[name]
    except KeyError:
        raise KeyError(
            f"unknown model spec {name!r}; available: {sorted(SPECS)}"
        ) from None
