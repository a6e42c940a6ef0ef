import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distgen.exceptions import ConvergenceError, InfeasibleError
from distgen.ratedistortion import (
    AlgorithmRdInstance,
    ConditionalRdInstance,
    FiniteDistributedToy,
    RdInstance,
    algorithm_rd,
    blahut_arimoto,
    check_pmf,
    conditional_algorithm_rd,
    finite_toy_bounds,
    mutual_information,
    rd_at_distortion,
    robust_rd,
)
from oracles import (
    cvx_algorithm_rd,
    cvx_conditional_rd,
    grid_algorithm_rd,
    grid_conditional_rd,
    random_algorithm_instance,
    random_conditional_instance,
)


def hamming(n):
    return 1.0 - np.eye(n)


def h_b(p):
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


@st.composite
def rd_instances(draw, max_x=5, max_y=4):
    nx = draw(st.integers(1, max_x))
    ny = draw(st.integers(1, max_y))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    px = rng.dirichlet(np.ones(nx))
    return RdInstance(px, rng.uniform(0, 1, (nx, ny)))


class TestValidation:
    def test_pmf(self):
        check_pmf([0.25, 0.75])
        with pytest.raises(ValueError, match="sums to"):
            check_pmf([0.5, 0.6])
        with pytest.raises(ValueError, match="negative"):
            check_pmf([1.5, -0.5])

    def test_instance_shapes(self):
        with pytest.raises(ValueError):
            RdInstance([0.5, 0.5], np.zeros((3, 2)))
        with pytest.raises(ValueError):
            RdInstance([0.5, 0.5], [[0.0, np.inf], [0.0, 1.0]])

    def test_mutual_information(self):
        assert mutual_information(np.array([[0.5, 0], [0, 0.5]])) == pytest.approx(math.log(2))
        assert mutual_information(np.outer([0.3, 0.7], [0.6, 0.4])) == pytest.approx(0.0, abs=1e-15)


class TestBlahutArimoto:
    def test_zero_slope_is_rate_zero(self):
        res = blahut_arimoto(RdInstance([0.3, 0.7], hamming(2)), 0.0)
        assert res.rate == 0.0

    def test_zero_distortion_matrix(self):
        res = blahut_arimoto(RdInstance(np.full(4, 0.25), np.zeros((4, 3))), -5.0)
        assert res.rate == pytest.approx(0.0, abs=1e-12)

    def test_bsc_point_on_curve(self):
        # slope -log((1-D)/D) touches R(D) = ln 2 - H_b(D) at D.
        D = 0.1
        res = blahut_arimoto(RdInstance([0.5, 0.5], hamming(2)), -math.log((1 - D) / D), tol=1e-14)
        assert res.distortion == pytest.approx(D, abs=1e-9)
        assert res.rate == pytest.approx(math.log(2) - h_b(D), abs=1e-9)
        assert res.lower_bound <= res.rate + 1e-12

    def test_positive_slope_rejected(self):
        with pytest.raises(ValueError):
            blahut_arimoto(RdInstance([1.0], [[0.0]]), 1.0)

    def test_cap_carries_last_iterate(self):
        inst = RdInstance(np.full(6, 1 / 6), np.random.default_rng(0).uniform(0, 1, (6, 6)))
        with pytest.raises(ConvergenceError) as info:
            blahut_arimoto(inst, -30.0, tol=1e-300, max_iter=3)
        assert info.value.result.iterations == 3

    @settings(max_examples=60, deadline=None)
    @given(rd_instances(), st.floats(0, 50))
    def test_rate_range_and_sandwich(self, inst, beta):
        res = blahut_arimoto(inst, -beta)
        ny = inst.distortion.shape[1]
        assert -1e-12 <= res.rate <= math.log(ny) + 1e-9
        assert res.lower_bound <= res.rate + 1e-9
        np.testing.assert_allclose(res.conditional.sum(axis=1), 1.0, atol=1e-12)


class TestRdAtDistortion:
    def test_bsc(self):
        rate = rd_at_distortion(RdInstance([0.5, 0.5], hamming(2), 0.1))
        assert abs(rate - (math.log(2) - h_b(0.1))) <= 1e-4
        assert rate == pytest.approx(0.368064207168497, abs=1e-9)

    def test_large_target(self):
        assert rd_at_distortion(RdInstance([0.2, 0.8], hamming(2)), 10.0) == 0.0

    def test_infeasible(self):
        with pytest.raises(InfeasibleError, match="infeasible"):
            rd_at_distortion(RdInstance([0.5, 0.5], hamming(2) + 0.1), 0.05)

    def test_missing_target(self):
        with pytest.raises(ValueError):
            rd_at_distortion(RdInstance([0.5, 0.5], hamming(2)))

    def test_small_gaussian(self):
        # 201-point quantization is coarse, so only a loose check here.
        x = np.linspace(-5, 5, 201)
        px = np.exp(-x**2 / 2)
        px /= px.sum()
        rate = rd_at_distortion(RdInstance(px, (x[:, None] - x[None, :]) ** 2), 0.25)
        assert rate == pytest.approx(0.5 * math.log(4), rel=0.03)

    def test_product_source_is_additive(self):
        px = np.array([0.2, 0.5, 0.3])
        d = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
        one = rd_at_distortion(RdInstance(px, d), 0.3)
        grids = list(itertools.product(range(3), repeat=4))
        p4 = np.array([np.prod(px[list(g)]) for g in grids])
        d4 = np.array([[sum(d[a, b] for a, b in zip(g, h)) for h in grids] for g in grids])
        four = rd_at_distortion(RdInstance(p4, d4), 4 * 0.3, tol=1e-12)
        assert four == pytest.approx(4 * one, rel=1e-6)

    def test_nonincreasing_and_convex(self):
        inst = RdInstance([0.1, 0.2, 0.3, 0.4], np.random.default_rng(3).uniform(0, 1, (4, 3)))
        lo = float(inst.px @ inst.distortion.min(axis=1))
        hi = float(np.min(inst.px @ inst.distortion))
        grid = np.linspace(lo, hi, 21)
        r = np.array([rd_at_distortion(inst, t) for t in grid])
        assert np.all(np.diff(r) <= 1e-9)
        mid = np.array([rd_at_distortion(inst, t) for t in (grid[:-2] + grid[2:]) / 2])
        assert np.all(mid <= (r[:-2] + r[2:]) / 2 + 1e-8)

    def test_matches_ba_sweep(self):
        inst = RdInstance([0.25, 0.25, 0.5], np.array([[0, 1, 3], [1, 0, 1], [3, 1, 0.0]]))
        for beta in (0.5, 1.0, 3.0):
            res = blahut_arimoto(inst, -beta, tol=1e-14)
            assert rd_at_distortion(inst, res.distortion) == pytest.approx(res.rate, abs=1e-8)

    def test_deterministic(self):
        inst = RdInstance([0.3, 0.7], np.array([[0.0, 0.4], [0.9, 0.1]]), 0.2)
        assert rd_at_distortion(inst) == rd_at_distortion(inst)


class TestAlgorithmRd:
    def test_rate_zero_at_own_level(self):
        rng = np.random.default_rng(1)
        joint, gen, gen_hat, _ = random_algorithm_instance(rng)
        # A constant w_hat with zero mean generalization error under Q_S.
        gen_hat = np.column_stack([gen_hat, np.zeros(3)])
        eps = float(np.sum(joint * gen))
        assert algorithm_rd(AlgorithmRdInstance(joint, gen, gen_hat, eps)) == 0.0
        assert algorithm_rd(AlgorithmRdInstance(joint, gen, gen_hat, 1e6)) == 0.0

    def test_infeasible(self):
        joint = np.full((2, 2), 0.25)
        with pytest.raises(InfeasibleError):
            algorithm_rd(AlgorithmRdInstance(joint, np.ones((2, 2)), np.zeros((2, 2)), 0.5))

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_convex_program(self, seed):
        rng = np.random.default_rng(100 + seed)
        joint, gen, gen_hat, eps = random_algorithm_instance(rng, n_hat=3)
        got = algorithm_rd(AlgorithmRdInstance(joint, gen, gen_hat, eps))
        assert got == pytest.approx(cvx_algorithm_rd(joint, gen, gen_hat, eps), abs=1e-6)

    def test_grid_is_an_upper_bound(self):
        rng = np.random.default_rng(7)
        joint, gen, gen_hat, eps = random_algorithm_instance(rng)
        got = algorithm_rd(AlgorithmRdInstance(joint, gen, gen_hat, eps))
        coarse = grid_algorithm_rd(joint, gen, gen_hat, eps, step=0.1)
        assert got <= coarse + 1e-9

    def test_boundary_continuity(self):
        rng = np.random.default_rng(5)
        joint, gen, gen_hat, _ = random_algorithm_instance(rng)
        ps = joint.sum(axis=1)
        edge = float(np.sum(joint * gen)) - float(ps @ gen_hat.max(axis=1))
        near = algorithm_rd(AlgorithmRdInstance(joint, gen, gen_hat, edge + 1e-7))
        at = algorithm_rd(AlgorithmRdInstance(joint, gen, gen_hat, edge))
        assert abs(near - at) < 1e-3


class TestConditionalRd:
    def test_single_conditioning_value_equals_unconditional(self):
        rng = np.random.default_rng(11)
        joint, gen, gen_hat, eps = random_algorithm_instance(rng, n_hat=3)
        inst = AlgorithmRdInstance(joint, gen, gen_hat, eps)
        assert conditional_algorithm_rd(inst.as_conditional()) == algorithm_rd(inst)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_convex_program(self, seed):
        rng = np.random.default_rng(200 + seed)
        joint, gen_agg, gen_hat, eps = random_conditional_instance(rng, n_hat=3)
        got = conditional_algorithm_rd(ConditionalRdInstance(joint, gen_agg, gen_hat, eps))
        assert got == pytest.approx(cvx_conditional_rd(joint, gen_agg, gen_hat, eps), abs=1e-6)

    def test_independent_conditioning(self):
        # Q(u, s) = Q(u) Q(s) and gen_hat free of u: conditioning changes nothing.
        pu, ps = np.array([0.4, 0.6]), np.array([0.2, 0.3, 0.5])
        gen_hat1 = np.array([[0.3, -0.2], [-0.4, 0.5], [0.1, 0.0]])
        joint = np.einsum("u,s->us", pu, ps)
        cond = ConditionalRdInstance(joint, np.zeros((2, 3)), np.broadcast_to(gen_hat1, (2, 3, 2)), 0.05)
        plain = AlgorithmRdInstance(ps[:, None], np.zeros((3, 1)), gen_hat1, 0.05)
        assert conditional_algorithm_rd(cond) == pytest.approx(algorithm_rd(plain), abs=1e-9)

    def test_k2_binary_toy_against_grid(self):
        # Client i sees a binary sample, the peer a binary hypothesis.
        joint = np.array([[0.3, 0.1], [0.15, 0.45]])  # (u, s)
        gen_agg = np.array([[0.2, -0.2], [0.1, -0.3]])
        gen_hat = np.array([[[0.4, -0.4], [-0.4, 0.4]], [[0.3, -0.3], [-0.1, 0.5]]])
        eps = -0.05
        got = conditional_algorithm_rd(ConditionalRdInstance(joint, gen_agg, gen_hat, eps))
        assert abs(got - grid_conditional_rd(joint, gen_agg, gen_hat, eps, step=0.02)) <= 1e-3
        assert got == pytest.approx(cvx_conditional_rd(joint, gen_agg, gen_hat, eps), abs=1e-6)

    def test_large_epsilon(self):
        rng = np.random.default_rng(3)
        joint, gen_agg, gen_hat, _ = random_conditional_instance(rng)
        assert conditional_algorithm_rd(ConditionalRdInstance(joint, gen_agg, gen_hat, 1e3)) == 0.0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.5))
    def test_nonincreasing_in_epsilon(self, seed, extra):
        joint, gen_agg, gen_hat, eps = random_conditional_instance(np.random.default_rng(seed))
        a = conditional_algorithm_rd(ConditionalRdInstance(joint, gen_agg, gen_hat, eps))
        b = conditional_algorithm_rd(ConditionalRdInstance(joint, gen_agg, gen_hat, eps + extra))
        assert b <= a + 1e-9


class TestRobustRd:
    def _base(self):
        joint = np.array([[0.3, 0.2], [0.1, 0.4]])  # (u, s), four atoms
        gen_agg = np.array([[0.1, -0.1], [0.2, 0.0]])
        gen_hat = np.array([[[0.3, -0.3], [-0.3, 0.3]], [[0.2, -0.2], [-0.2, 0.2]]])
        return ConditionalRdInstance(joint, gen_agg, gen_hat, -0.05)

    def test_tiny_radius_is_base(self):
        base = self._base()
        res = robust_rd(base, 1 - 1e-12)
        assert res.rate == res.rate_at_base == conditional_algorithm_rd(base)

    def test_ball_contains_base(self):
        res = robust_rd(self._base(), 0.5, resolution=4)
        assert res.rate >= res.rate_at_base
        assert res.n_candidates > 1

    def test_refinement_never_decreases(self):
        a = robust_rd(self._base(), 0.5, resolution=4)
        b = robust_rd(self._base(), 0.5, resolution=8)
        assert b.rate >= a.rate

    def test_caps(self):
        joint = np.full((1, 13, 1), 1 / 13)
        big = ConditionalRdInstance(joint, np.zeros_like(joint), np.zeros((1, 13, 2)), 0.0)
        with pytest.raises(ValueError, match="support too large"):
            robust_rd(big, 0.5)
        with pytest.raises(ValueError):
            robust_rd(self._base(), 1.5)


def _toy(kernel, mu=(0.5, 0.5), aggregate=None):
    kw = {} if aggregate is None else {"aggregate": aggregate}
    return FiniteDistributedToy(mu=np.array(mu), n=1, K=2, local_kernel=np.array(kernel, float),
                                w_values=[0.0, 1.0], loss=lambda z, w: float(abs(z - w)), **kw)


def _majority(values):
    return np.array([float(np.mean(values) >= 0.5)])


class TestFiniteToy:
    def test_constant_aggregate(self):
        toy = _toy([[1.0, 0.0], [1.0, 0.0]])
        res = finite_toy_bounds(toy, 1.0, 0.0)
        assert res.bound == 0.0 and res.term_a == 0.0
        assert np.all(res.mutual_informations == 0.0)

    def test_majority_toy_against_enumeration(self):
        kernel = np.array([[0.9, 0.1], [0.2, 0.8]])
        mu = np.array([0.3, 0.7])
        res = finite_toy_bounds(_toy(kernel, mu, _majority), 1.0, 0.0)
        # Independent enumeration of (Z_{1,1}, W_bar) for client 1.
        joint = np.zeros((2, 2))
        loss = np.array([[0.0, 1.0], [1.0, 0.0]])
        for z1, z2, w1, w2 in itertools.product(range(2), repeat=4):
            p = mu[z1] * mu[z2] * kernel[z1, w1] * kernel[z2, w2]
            joint[z1, int((w1 + w2) / 2 >= 0.5)] += p
        mi = mutual_information(joint)
        assert res.mutual_informations[0, 0] == pytest.approx(mi, abs=1e-14)
        pop = mu @ loss
        gen = pop[None, :] - loss
        rate = cvx_algorithm_rd(joint, gen, gen, 0.0)
        assert res.rates_a[0, 0] == pytest.approx(rate, abs=1e-6)
        mi_bound = np.sum(np.sqrt(2 * res.mutual_informations)) / 2
        # Compressing to W_hat = W_bar is one feasible choice, so the rate
        # term is at most the mutual-information term.
        assert res.term_a <= mi_bound
        assert res.term_a == pytest.approx(np.sum(np.sqrt(2 * res.rates_a)) / 2)
        assert res.bound == min(res.term_a, res.term_b)
        assert res.dataset_bound == min(res.dataset_a, res.dataset_b)

    def test_epsilon_never_increases_rates(self):
        toy = _toy([[0.9, 0.1], [0.2, 0.8]])
        base = finite_toy_bounds(toy, 1.0, 0.0)
        for eps in (0.01, 0.05, 0.2):
            res = finite_toy_bounds(toy, 1.0, eps)
            assert res.bound <= base.bound + eps + 1e-12
            assert np.all(res.rates_a <= base.rates_a + 1e-9)

    def test_bad_kernel(self):
        with pytest.raises(ValueError):
            _toy([[0.9, 0.2], [0.2, 0.8]])
