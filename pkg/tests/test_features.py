import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distgen.features import JLProjection, RandomFourierFeatures, jl_from_matrix, jl_project, rff_transform, sample_jl


def _rff(d, p, gamma, seed=0):
    return RandomFourierFeatures(gamma=gamma, n_components=p, random_state=seed).fit(np.zeros((1, d)))


def _kernel_errors(p, pairs=100, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((pairs, 5)) * 0.7
    Y = rng.standard_normal((pairs, 5)) * 0.7
    gamma = 0.5
    rff = _rff(5, p, gamma, seed=seed + 1)
    approx = np.sum(rff.transform(X) * rff.transform(Y), axis=1)
    exact = np.exp(-gamma * np.sum((X - Y) ** 2, axis=1))
    return approx - exact


class TestRff:
    def test_zero_frequency_single_feature(self):
        rff = _rff(3, 1, 1.0)
        rff.frequencies_ = np.zeros((1, 3))
        rff.phases_ = np.zeros(1)
        np.testing.assert_allclose(rff_transform(rff, np.array([1.0, -2.0, 5.0])), [np.sqrt(2.0)])

    def test_formula(self, rng):
        rff = _rff(4, 7, 0.3, seed=2)
        x = rng.standard_normal(4)
        expected = np.sqrt(2 / 7) * np.cos(rff.frequencies_ @ x + rff.phases_)
        np.testing.assert_allclose(rff_transform(rff, x), expected, rtol=1e-13, atol=1e-15)

    def test_frequency_variance(self):
        rff = _rff(50, 2000, 0.01, seed=3)
        assert abs(rff.frequencies_.var() / 0.02 - 1) < 0.02
        assert rff.phases_.min() >= 0 and rff.phases_.max() < 2 * np.pi

    def test_kernel_approximation_p4000(self):
        assert np.max(np.abs(_kernel_errors(4000))) < 0.05

    def test_error_decays_with_p(self):
        rms = lambda p: np.sqrt(np.mean(_kernel_errors(p) ** 2))
        assert rms(4000) < rms(250)

    def test_determinism(self):
        a, b = _rff(3, 10, 0.1, seed=4), _rff(3, 10, 0.1, seed=4)
        assert a.frequencies_.tobytes() == b.frequencies_.tobytes()

    @settings(max_examples=30)
    @given(st.integers(1, 50), st.floats(1e-3, 10), st.integers(0, 2**32))
    def test_outputs_bounded(self, p, gamma, seed):
        rff = _rff(3, p, gamma, seed)
        Z = rff.transform(np.random.default_rng(seed).normal(scale=10, size=(20, 3)))
        assert np.all(np.abs(Z) <= np.sqrt(2 / p) * (1 + 1e-15))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            _rff(3, 5, 1.0).transform(np.zeros((2, 4)))


class TestJl:
    def test_entry_variance(self):
        A = sample_jl(1000, 50, 1).components_
        assert A.shape == (1000, 50)
        assert abs(A.var() / 0.02 - 1) < 0.05
        assert abs(A.mean()) < 0.01

    def test_m_one_is_column(self):
        assert sample_jl(10, 1, 0).components_.shape == (10, 1)

    def test_zero_maps_to_zero(self):
        np.testing.assert_array_equal(jl_project(sample_jl(8, 3, 0), np.zeros(8)), np.zeros(3))

    def test_norm_preserved_in_expectation(self, rng):
        x = rng.standard_normal(30)
        sq = [np.sum(jl_project(sample_jl(30, 20, s), x) ** 2) for s in range(200)]
        assert abs(np.mean(sq) / (x @ x) - 1) < 0.05

    def test_linearity(self, rng):
        jl = sample_jl(6, 4, 9)
        x, y = rng.standard_normal(6), rng.standard_normal(6)
        np.testing.assert_allclose(jl_project(jl, 2 * x - 3 * y), 2 * jl_project(jl, x) - 3 * jl_project(jl, y),
                                   atol=1e-13)

    def test_determinism(self):
        assert sample_jl(5, 3, 7).components_.tobytes() == sample_jl(5, 3, 7).components_.tobytes()

    def test_explicit_matrix(self):
        jl = jl_from_matrix(np.eye(3))
        np.testing.assert_array_equal(jl.transform(np.array([1.0, 2.0, 3.0])), [1, 2, 3])

    def test_estimator_fit(self):
        jl = JLProjection(n_components=2, random_state=1).fit(np.zeros((3, 5)))
        assert jl.components_.shape == (5, 2)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            jl_project(sample_jl(4, 2, 0), np.zeros(5))
