"""Constrained particle swarm over design space.

Particles carry ``n_support`` dose coordinates (reflected into the dose
box) and ``n_support`` unconstrained weight coordinates mapped through a
softmax onto the free-mass simplex, so velocity updates never leave the
feasible set.  The objective is evaluated for the whole swarm at once
(``objective(points, weights) -> values``), which is where the compiled
kernels earn their keep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .designs import Design, merge_support
from .errors import SwarmInitError

DOSE_BOX_DEFAULT = (0.0, float(np.log(30001.0)))
LOGIT_CLIP = 40.0


@dataclass(frozen=True)
class SwarmConfig:
    n_support: int
    n_particles: int = 200
    iters: int = 500
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    seed: int = 0
    dose_box: tuple[float, float] = DOSE_BOX_DEFAULT

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("need at least two particles")
        if not 0.0 < self.inertia < 1.0:
            raise ValueError("inertia must lie in (0, 1)")
        if self.n_support < 1 or self.iters < 1:
            raise ValueError("n_support and iters must be positive")
        lo, hi = self.dose_box
        if not lo < hi:
            raise ValueError("dose box must have low < high")

    def replace(self, **kw) -> "SwarmConfig":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass(frozen=True)
class SwarmRun:
    design: Design
    value: float
    trace: np.ndarray
    raw_points: np.ndarray
    raw_weights: np.ndarray

    def trace_csv(self) -> str:
        lines = ["iter,best_value"]
        lines += [f"{i},{float(v)!r}" for i, v in enumerate(self.trace)]
        return "\n".join(lines) + "\n"


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _reflect(x, lo, hi):
    """Fold positions back into [lo, hi] (billiard reflection)."""
    span = hi - lo
    y = np.mod(x - lo, 2.0 * span)
    y = np.where(y > span, 2.0 * span - y, y)
    return lo + y


def optimize(objective, config: SwarmConfig, fixed_arms=(), merge_tol=1e-6) -> SwarmRun:
    """Maximize a batched design objective; deterministic given config.

    ``objective(points, weights)`` receives (B, n) arrays where weights
    include the free-mass scaling (1 minus the fixed-arm mass) and must
    return (B,) values with -inf allowed as a sentinel.  Near-duplicate
    support points of the winning particle are merged afterwards.
    """
    rng = np.random.default_rng(config.seed)
    n, B = config.n_support, config.n_particles
    lo, hi = config.dose_box
    merge_tol = max(merge_tol, 1e-6)  # Design enforces 1e-6 distinctness
    arms = tuple((float(d), float(w)) for d, w in fixed_arms)
    free_mass = 1.0 - sum(w for _, w in arms)
    if free_mass <= 0:
        raise ValueError("fixed arms leave no free design mass")

    pos = np.concatenate(
        [rng.uniform(lo, hi, size=(B, n)), rng.normal(0.0, 1.0, size=(B, n))],
        axis=1,
    )
    vel = np.zeros_like(pos)
    vmax = np.concatenate(
        [np.full(n, 0.5 * (hi - lo)), np.full(n, 5.0)]
    )

    def evaluate(p):
        pts = p[:, :n]
        wts = _softmax(p[:, n:]) * free_mass
        return np.asarray(objective(pts, wts), dtype=float)

    vals = evaluate(pos)
    if not np.any(np.isfinite(vals)):
        raise SwarmInitError("every particle evaluated to a sentinel")
    pbest, pbest_vals = pos.copy(), vals.copy()
    g = int(np.argmax(pbest_vals))
    gbest, gbest_val = pbest[g].copy(), float(pbest_vals[g])
    trace = [gbest_val]

    for _ in range(config.iters):
        r1 = rng.uniform(size=pos.shape)
        r2 = rng.uniform(size=pos.shape)
        vel = (
            config.inertia * vel
            + config.cognitive * r1 * (pbest - pos)
            + config.social * r2 * (gbest[None, :] - pos)
        )
        vel = np.clip(vel, -vmax, vmax)
        pos = pos + vel
        pos[:, :n] = _reflect(pos[:, :n], lo, hi)
        pos[:, n:] = np.clip(pos[:, n:], -LOGIT_CLIP, LOGIT_CLIP)
        vals = evaluate(pos)
        better = vals > pbest_vals
        pbest[better] = pos[better]
        pbest_vals[better] = vals[better]
        g = int(np.argmax(pbest_vals))
        if pbest_vals[g] > gbest_val:
            gbest, gbest_val = pbest[g].copy(), float(pbest_vals[g])
        trace.append(gbest_val)

    raw_pts = gbest[:n]
    raw_wts = _softmax(gbest[None, n:])[0] * free_mass
    pts, wts = merge_support(raw_pts, raw_wts, tol=merge_tol)
    wts = wts * (free_mass / wts.sum())  # restore mass dropped by merging
    design = Design(pts, wts, fixed_arms=arms)
    return SwarmRun(design, gbest_val, np.asarray(trace), raw_pts, raw_wts)
