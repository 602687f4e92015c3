import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dosedesign import models
from dosedesign.designs import Design, uniform_design
from dosedesign.errors import DegenerateDoseError, DimensionError


def fd_expected_info(spec, theta, x, h=1e-5):
    """Independent oracle: negative expected log-likelihood Hessian via
    central differences of log pi."""
    p = spec.p

    def logpi(t):
        eta = models.eval_linear_predictors(spec, spec.params(t), x)
        return np.log(models._invert_link(spec, eta))

    pi0 = models.category_probs(spec, spec.params(theta), x).pi
    M = np.zeros((p, p))
    for c in range(spec.k):
        H = np.zeros((p, p))
        for i in range(p):
            for j in range(i, p):
                tpp, tpm, tmp, tmm = (theta.copy() for _ in range(4))
                tpp[i] += h
                tpp[j] += h
                tmm[i] -= h
                tmm[j] -= h
                tpm[i] += h
                tpm[j] -= h
                tmp[i] -= h
                tmp[j] += h
                val = (
                    logpi(tpp)[c] - logpi(tpm)[c] - logpi(tmp)[c] + logpi(tmm)[c]
                ) / (4 * h * h)
                H[i, j] = H[j, i] = val
        M += pi0[c] * (-H)
    return M


def random_po_theta(rng):
    return np.array([
        rng.uniform(0.5, 3.0), rng.uniform(6.0, 11.0), rng.uniform(-1.8, -0.5),
    ])


class TestLinearPredictors:
    def test_zero_theta(self, po_spec):
        eta = models.eval_linear_predictors(po_spec, po_spec.params([0, 0, 0]), 1.7)
        assert np.allclose(eta, 0.0)

    def test_first_dataset_at_zero(self, po_spec, pooled):
        eta = models.eval_linear_predictors(po_spec, pooled, 0.0)
        assert np.allclose(eta, [2.506, 7.800, 0.0])

    def test_hand_arithmetic(self, po_spec):
        theta = po_spec.params([2.328, 9.845, -1.562])
        eta = models.eval_linear_predictors(po_spec, theta, 1.0)
        assert np.allclose(eta, [0.766, 8.283, 0.0])

    def test_dimension_mismatch(self, po_spec):
        with pytest.raises(DimensionError):
            models.eval_linear_predictors(po_spec, np.array([1.0, 2.0]), 0.0)


class TestCategoryProbs:
    def test_equal_intercepts_degenerate(self, po_spec):
        with pytest.raises(DegenerateDoseError):
            models.category_probs(po_spec, po_spec.params([0.0, 0.0, -1.0]), 2.0)

    def test_radial_prob_half_at_rd50(self, po_spec, pooled):
        pi = models.category_probs(po_spec, pooled, 2.580588982512583).pi
        assert abs(pi[1] - 0.5) < 1e-9

    def test_logistic_values(self, po_spec):
        theta = po_spec.params([2.328, 9.845, -1.562])
        pi = models.category_probs(po_spec, theta, 3.0).pi
        s = lambda z: 1.0 / (1.0 + np.exp(-z))
        lo, hi = s(2.328 - 4.686), s(9.845 - 4.686)
        assert np.allclose(pi, [lo, hi - lo, 1 - hi], atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        c1=st.floats(0.3, 3.0), gap=st.floats(0.5, 9.0),
        b=st.floats(-2.0, -0.3), x=st.floats(0.0, 9.0),
    )
    def test_probability_simplex_property(self, c1, gap, b, x):
        spec = models.get_spec("po_trinomial")
        try:
            pi = models.category_probs(spec, spec.params([c1, c1 + gap, b]), x).pi
        except DegenerateDoseError:
            return
        assert abs(pi.sum() - 1.0) < 1e-12
        assert np.all(pi > 0.0) and np.all(pi < 1.0)

    def test_ordering_impossible_to_violate(self, po_spec):
        # shared slope: eta2 - eta1 == c2 - c1 at every dose
        theta = po_spec.params([1.0, 4.0, -1.2])
        for x in [0.0, 1.0, 5.0, 10.0]:
            eta = models.eval_linear_predictors(po_spec, theta, x)
            assert eta[1] - eta[0] == pytest.approx(3.0, abs=1e-12)

    def test_other_links(self):
        for name in ("cr_trinomial", "ac_trinomial"):
            spec = models.get_spec(name)
            pi = models.category_probs(spec, spec.params([1.0, 2.0, -0.7]), 1.5).pi
            assert abs(pi.sum() - 1.0) < 1e-12
            # forward map eta = C' log(L pi) must reproduce the predictors
            eta = spec.C.T @ np.log(spec.L @ pi)
            want = models.eval_linear_predictors(spec, spec.params([1.0, 2.0, -0.7]), 1.5)
            assert np.allclose(eta, want, atol=1e-10)


class TestStilde:
    def test_outer_product_psd(self, po_spec, pooled):
        s = models.stilde(po_spec, pooled, 2.0)
        M = s @ s.T
        assert np.allclose(M, M.T)
        assert np.linalg.eigvalsh(M).min() > -1e-12

    def test_matches_fd_hessian_oracle(self, po_spec):
        rng = np.random.default_rng(7)
        for _ in range(20):
            theta = random_po_theta(rng)
            x = rng.uniform(0.0, 9.0)
            M = models.elemental_info(po_spec, po_spec.params(theta), x)
            M_fd = fd_expected_info(po_spec, theta, x)
            assert np.abs(M - M_fd).max() <= 1e-4 * max(1.0, np.abs(M_fd).max())

    def test_rich_spec_shape(self):
        spec = models.get_spec("rich_trinomial")
        rng = np.random.default_rng(3)
        theta = rng.normal(0, 0.2, size=spec.p)
        theta[0], theta[4] = 1.0, 3.0
        s = models.stilde(spec, spec.params(theta), 1.0)
        assert s.shape == (spec.p, spec.k) == (8, 3)

    def test_rich_spec_fd_oracle(self):
        spec = models.get_spec("rich_trinomial")
        rng = np.random.default_rng(11)
        theta = rng.normal(0, 0.15, size=8)
        theta[0], theta[4] = 0.8, 2.5
        M = models.elemental_info(spec, spec.params(theta), 1.3)
        M_fd = fd_expected_info(spec, theta, 1.3)
        assert np.abs(M - M_fd).max() <= 1e-4 * max(1.0, np.abs(M_fd).max())


class TestFisherInfo:
    def test_single_point_rank(self, po_spec, pooled):
        M = models.fisher_info(po_spec, pooled, ([2.0], [1.0])).M
        s = models.stilde(po_spec, pooled, 2.0)
        assert np.allclose(M, s @ s.T)
        assert np.linalg.matrix_rank(M, tol=1e-10) <= po_spec.k

    def test_one_point_design_singular(self, po_spec, pooled):
        x = float(np.log1p(12.01))
        M = models.fisher_info(po_spec, pooled, ([x], [1.0])).M
        scale = (np.trace(M) / 3.0) ** 3
        assert np.linalg.det(M) < 1e-12 * scale

    def test_uniform_three_point_mean(self, po_spec, pooled):
        pts = [1.0, 4.0, 8.0]
        M = models.fisher_info(po_spec, pooled, (pts, [1 / 3] * 3)).M
        direct = sum(models.elemental_info(po_spec, pooled, x) for x in pts) / 3.0
        assert np.allclose(M, direct, atol=1e-14)

    def test_affine_in_weights(self, po_spec, pooled):
        d1 = uniform_design([1.0, 4.0, 8.0])
        d2 = uniform_design([2.0, 5.0, 9.0])
        a = 0.3
        M1 = models.fisher_info(po_spec, pooled, d1).M
        M2 = models.fisher_info(po_spec, pooled, d2).M
        mix = Design(
            np.concatenate([d1.points, d2.points]),
            np.concatenate([a * d1.weights, (1 - a) * d2.weights]),
        )
        Mmix = models.fisher_info(po_spec, pooled, mix).M
        assert np.abs(Mmix - (a * M1 + (1 - a) * M2)).max() < 1e-12

    def test_symmetry_psd_random(self, po_spec):
        rng = np.random.default_rng(5)
        for _ in range(10):
            theta = random_po_theta(rng)
            pts = np.sort(rng.uniform(0, 9, size=4))
            wts = rng.dirichlet(np.ones(4))
            M = models.fisher_info(po_spec, po_spec.params(theta), (pts, wts)).M
            assert np.abs(M - M.T).max() < 1e-10 * max(1, np.abs(M).max())
            assert np.linalg.eigvalsh(M).min() >= -1e-10 * np.abs(M).max()


class TestBasisParsing:
    def test_round_trip_labels(self):
        basis = models.RegressionBasis.from_names(["1", "x", "x^2", "sin(2x)"])
        assert basis.labels == ["1", "x", "x^2", "sin(2x)"]
        vals = basis.evaluate(0.5)
        assert np.allclose(vals, [1.0, 0.5, 0.25, np.sin(1.0)])

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            models.RegressionBasis.from_names(["exp(x)"])
