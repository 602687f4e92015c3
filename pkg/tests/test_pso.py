import numpy as np
import pytest

from dosedesign.criteria import CriterionSpec, DesignObjective
from dosedesign.errors import SwarmInitError
from dosedesign.pso import SwarmConfig, optimize
from dosedesign.search import find_design


def quad_objective(points, weights):
    """Concave toy: maximized at all points = 3 and equal weights."""
    point_term = -np.sum((points - 3.0) ** 2, axis=1)
    weight_term = -np.sum((weights - 1.0 / points.shape[1]) ** 2, axis=1)
    return point_term + 10.0 * weight_term


class TestOptimize:
    def test_recovers_quadratic_maximum(self):
        cfg = SwarmConfig(n_support=2, n_particles=60, iters=400, seed=4,
                          dose_box=(0.0, 6.0))
        run = optimize(quad_objective, cfg)
        assert np.allclose(run.raw_points, 3.0, atol=1e-4)
        assert np.allclose(run.raw_weights, 0.5, atol=1e-4)

    def test_deterministic(self):
        cfg = SwarmConfig(n_support=2, n_particles=40, iters=80, seed=11,
                          dose_box=(0.0, 6.0))
        r1 = optimize(quad_objective, cfg)
        r2 = optimize(quad_objective, cfg)
        assert np.array_equal(r1.raw_points, r2.raw_points)
        assert np.array_equal(r1.raw_weights, r2.raw_weights)
        assert np.array_equal(r1.trace, r2.trace)

    def test_trace_monotone(self):
        cfg = SwarmConfig(n_support=3, n_particles=30, iters=120, seed=3,
                          dose_box=(0.0, 6.0))
        run = optimize(quad_objective, cfg)
        assert np.all(np.diff(run.trace) >= 0.0)

    def test_feasible_output(self, po_spec, pooled, fixed_arms):
        crit = CriterionSpec("robust_D", (pooled,))
        obj = DesignObjective(po_spec, crit, fixed_arms)
        cfg = SwarmConfig(n_support=3, n_particles=40, iters=60, seed=9)
        run = optimize(obj.batch_value, cfg, fixed_arms=fixed_arms)
        d = run.design
        assert np.all(d.weights >= 0)
        total = d.weights.sum() + sum(w for _, w in d.fixed_arms)
        assert total == pytest.approx(1.0, abs=1e-9)
        lo, hi = cfg.dose_box
        assert np.all((d.points >= lo) & (d.points <= hi))

    def test_all_sentinel_raises(self):
        bad = lambda p, w: np.full(p.shape[0], -np.inf)
        with pytest.raises(SwarmInitError):
            optimize(bad, SwarmConfig(n_support=2, n_particles=10, iters=5))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SwarmConfig(n_support=2, n_particles=1)
        with pytest.raises(ValueError):
            SwarmConfig(n_support=2, inertia=1.2)
        with pytest.raises(ValueError):
            SwarmConfig(n_support=2, dose_box=(3.0, 1.0))


class TestDesignProblems:
    def test_d_optimal_support_structure(self, po_spec, pooled):
        # pooled parameters: three support points, heavier middle weight
        crit = CriterionSpec("D", (pooled,))
        res = find_design(
            po_spec, crit,
            swarm=SwarmConfig(n_support=3, seed=7, n_particles=150, iters=300),
            n_support=3,
        )
        assert res.design.points.size == 3
        want = np.array([1.98435514, 5.26353407, 8.54271317])
        assert np.abs(res.design.points - want).max() < 2e-3
        assert np.abs(res.design.weights - [0.318, 0.364, 0.318]).max() < 2e-3

    def test_restart_robustness(self, po_spec, pooled):
        # most seeds land within half a percent of the best criterion value
        crit = CriterionSpec("D", (pooled,))
        obj = DesignObjective(po_spec, crit)
        values = []
        for seed in range(10):
            cfg = SwarmConfig(n_support=3, n_particles=60, iters=120, seed=seed)
            run = optimize(obj.batch_value, cfg)
            values.append(run.value)
        values = np.array(values)
        best = values.max()
        near = np.sum(values >= best - abs(best) * 0.005)
        assert near >= 8
