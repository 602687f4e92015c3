"""Hot-loop kernels for the common-slope cumulative trinomial model.

The particle-swarm optimizer evaluates the design criterion for hundreds
of candidate designs per iteration, each requiring one 3x3 information
matrix per (support point, nominal set) pair.  That inner loop is
implemented twice:

* ``_otr_fast``    -- Cython extension (built by setup.py)
* ``_reference``   -- vectorized NumPy fallback, always available

The compiled backend is preferred when importable.  Set the environment
variable ``DOSEDESIGN_BACKEND=python`` to force the fallback or
``DOSEDESIGN_BACKEND=cython`` to fail loudly when the extension is
missing.  ``python -m dosedesign.benchmarks.kernel_bench`` compares the
two.

Both backends add a relative ridge of ``RIDGE_REL * trace(M)`` before the
c-variance and trace-inverse solves so that near-singular candidates
degrade smoothly during optimization; exact (pseudo-inverse) values for
reporting live in :mod:`dosedesign.criteria`.
"""

import os

import numpy as np

RIDGE_REL = 1e-10
PROB_FLOOR = 1e-12

from . import _reference

_requested = os.environ.get("DOSEDESIGN_BACKEND", "auto").lower()
if _requested not in ("auto", "", "cython", "c", "python"):
    raise ValueError(
        f"DOSEDESIGN_BACKEND={_requested!r} not recognized "
        "(use 'auto', 'cython' or 'python')"
    )

if _requested == "python":
    _impl = _reference
    BACKEND = "python"
else:
    try:
        from . import _otr_fast as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _requested in ("cython", "c"):
            raise
        _impl = _reference
        BACKEND = "python"


def design_moments(spec_name, points, weights, thetas, cgrads, bases=None, alpha=0.0):
    """(logdet, cvar, trinv), each (B, K), for a batch of designs.

    ``points``/``weights`` are (B, m) with unit row sums; ``thetas`` and
    ``cgrads`` are (K, 3).  ``bases`` optionally mixes per-nominal fixed
    information: M = alpha * bases[i] + (1 - alpha) * sum_j w_j M_i(x_j).
    Only the common-slope cumulative trinomial is supported here.
    """
    if spec_name != "po_trinomial":
        raise ValueError(f"no fast kernel for spec {spec_name!r}")
    pts = np.ascontiguousarray(points, dtype=np.float64)
    wts = np.ascontiguousarray(weights, dtype=np.float64)
    th = np.ascontiguousarray(thetas, dtype=np.float64)
    cg = np.ascontiguousarray(cgrads, dtype=np.float64)
    if pts.shape != wts.shape or pts.ndim != 2:
        raise ValueError("points and weights must both be (B, m)")
    if th.shape != cg.shape or th.ndim != 2 or th.shape[1] != 3:
        raise ValueError("thetas and cgrads must both be (K, 3)")
    if bases is None:
        bases_arr = np.zeros((th.shape[0], 3, 3))
        alpha = 0.0
    else:
        bases_arr = np.ascontiguousarray(bases, dtype=np.float64)
        if bases_arr.shape != (th.shape[0], 3, 3):
            raise ValueError("bases must be (K, 3, 3)")
    return _impl.otr_moments(pts, wts, th, cg, bases_arr, float(alpha))
