"""High-level design search: swarm, support-size sweep, local polish.

The swarm finds the basin; a Nelder-Mead polish in the same parametrization
(doses + weight logits) then drives the design to certificate quality, so
optimizer output passes the equivalence-theorem check at tight tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .criteria import CriterionSpec, DesignObjective
from .designs import Design, merge_support
from .models import ModelSpec
from .pso import SwarmConfig, SwarmRun, optimize


@dataclass(frozen=True)
class SearchResult:
    design: Design
    value: float
    trace: np.ndarray
    n_support_tried: tuple[int, ...]

    def trace_csv(self) -> str:
        lines = ["iter,best_value"]
        lines += [f"{i},{float(v)!r}" for i, v in enumerate(self.trace)]
        return "\n".join(lines) + "\n"


def _polish(objective, pts, wts, free_mass, box, maxiter=4000):
    """Nelder-Mead refinement of a merged design in (dose, logit) space."""
    n = pts.size
    lo, hi = box
    wts = np.maximum(wts, 1e-12)
    z0 = np.concatenate([pts, np.log(wts / wts.sum())])

    def neg(z):
        p = z[:n]
        if np.any(p < lo) or np.any(p > hi):
            return np.inf
        e = np.exp(z[n:] - z[n:].max())
        w = free_mass * e / e.sum()
        v = objective(p[None, :], w[None, :])[0]
        return -v if np.isfinite(v) else np.inf

    res = minimize(
        neg, z0, method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": maxiter,
                 "maxfev": maxiter, "adaptive": True},
    )
    z = res.x if np.isfinite(res.fun) else z0
    p = z[:n]
    e = np.exp(z[n:] - z[n:].max())
    w = free_mass * e / e.sum()
    return p, w


def find_design(
    model_spec: ModelSpec,
    crit: CriterionSpec,
    fixed_arms=(),
    swarm: SwarmConfig | None = None,
    n_support=None,
    polish: bool = True,
    merge_tol: float = 1e-6,
) -> SearchResult:
    """Search for the criterion-optimal design.

    ``n_support`` may be an int, an iterable of ints, or None, which
    sweeps p-1 .. p+3 free points (each with a seed offset) and keeps
    the best merged design.  Returns the design, its exact criterion
    value, and the winning swarm's best-value trace.
    """
    objective = DesignObjective(model_spec, crit, fixed_arms)
    if swarm is None:
        swarm = SwarmConfig(n_support=model_spec.p)
    if n_support is None:
        sweep = tuple(
            n for n in range(max(1, model_spec.p - 1), model_spec.p + 4)
        )
    elif np.isscalar(n_support):
        sweep = (int(n_support),)
    else:
        sweep = tuple(int(n) for n in n_support)

    free_mass = 1.0 - sum(w for _, w in fixed_arms)
    best: tuple[float, SwarmRun] | None = None
    for n in sweep:
        cfg = swarm.replace(n_support=n, seed=swarm.seed + n)
        run = optimize(objective.batch_value, cfg, fixed_arms, merge_tol)
        if best is None or run.value > best[0]:
            best = (run.value, run)
    assert best is not None
    run = best[1]
    pts, wts = run.design.points, run.design.weights

    if polish:
        pts, wts = _polish(
            objective.batch_value, pts, wts, free_mass, swarm.dose_box
        )
        pts, wts = merge_support(pts, wts, tol=merge_tol)
        wts = wts * (free_mass / wts.sum())
    design = Design(pts, wts, fixed_arms=tuple(fixed_arms))
    return SearchResult(
        design=design,
        value=objective.value_exact(design),
        trace=run.trace,
        n_support_tried=sweep,
    )
