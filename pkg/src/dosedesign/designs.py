"""Approximate designs: dose support points with probability weights.

Doses are carried on the transformed scale (``log(raw + 1)`` by default,
see workflow.transform_dose).  A design may carry fixed arms — (dose,
weight) pairs excluded from optimization, typically a zero-dose control
and a high lethal dose — whose weight is part of the unit total.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DesignError

MERGE_TOL = 1e-6


@dataclass(frozen=True)
class Design:
    points: np.ndarray
    weights: np.ndarray
    fixed_arms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        wts = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if pts.shape != wts.shape or pts.ndim != 1:
            raise DesignError("points and weights must be 1-D and equally long")
        arms = tuple((float(d), float(w)) for d, w in self.fixed_arms)
        if np.any(wts < -1e-12) or any(w < -1e-12 for _, w in arms):
            raise DesignError("design weights must be nonnegative")
        total = wts.sum() + sum(w for _, w in arms)
        if abs(total - 1.0) > 1e-9:
            raise DesignError(f"total design weight is {total!r}, expected 1")
        order = np.argsort(pts)
        pts, wts = pts[order], wts[order]
        if pts.size > 1 and np.any(np.diff(pts) < MERGE_TOL):
            raise DesignError(
                "support points closer than the merge tolerance; "
                "use merge_support() first"
            )
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)
        object.__setattr__(self, "fixed_arms", arms)

    @property
    def free_mass(self) -> float:
        return float(self.weights.sum())

    def all_points(self) -> np.ndarray:
        return np.concatenate([self.points, [d for d, _ in self.fixed_arms]])

    def all_weights(self) -> np.ndarray:
        return np.concatenate([self.weights, [w for _, w in self.fixed_arms]])

    def free_design(self) -> "Design":
        """The free part renormalized to unit mass (for sensitivity work)."""
        if not self.fixed_arms:
            return self
        return Design(self.points, self.weights / self.free_mass)

    def to_dict(self, criterion: str | None = None, value: float | None = None):
        d = {
            "points_transformed": [float(x) for x in self.points],
            "points_raw": [float(np.expm1(x)) for x in self.points],
            "weights": [float(w) for w in self.weights],
            "fixed_arms": [
                {
                    "dose_transformed": d_,
                    "dose_raw": float(np.expm1(d_)),
                    "weight": w,
                }
                for d_, w in self.fixed_arms
            ],
        }
        if criterion is not None:
            d["criterion"] = criterion
        if value is not None:
            d["value"] = float(value)
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "Design":
        arms = tuple(
            (a["dose_transformed"], a["weight"]) for a in d.get("fixed_arms", [])
        )
        return cls(np.asarray(d["points_transformed"]), np.asarray(d["weights"]), arms)


def merge_support(points, weights, tol=MERGE_TOL):
    """Pool weights of near-duplicate support points, dropping zero weights."""
    pts = np.asarray(points, dtype=float)
    wts = np.asarray(weights, dtype=float)
    order = np.argsort(pts)
    merged_p, merged_w = [], []
    for x, w in zip(pts[order], wts[order]):
        if merged_p and x - merged_p[-1] < tol:
            # weight-average the location so merging is order-independent
            tot = merged_w[-1] + w
            if tot > 0:
                merged_p[-1] = (merged_p[-1] * merged_w[-1] + x * w) / tot
            merged_w[-1] = tot
        else:
            merged_p.append(float(x))
            merged_w.append(float(w))
    keep = [i for i, w in enumerate(merged_w) if w > 1e-9]
    return np.array([merged_p[i] for i in keep]), np.array([merged_w[i] for i in keep])


def uniform_design(points, fixed_arms=()) -> Design:
    pts = np.asarray(points, dtype=float)
    free = 1.0 - sum(w for _, w in fixed_arms)
    return Design(pts, np.full(pts.size, free / pts.size), tuple(fixed_arms))
