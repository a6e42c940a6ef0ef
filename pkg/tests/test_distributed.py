import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distgen.datasets import Dataset, synth_two_gaussians
from distgen.distributed import (
    FsgldSchedule,
    SweepConfig,
    aggregate,
    estimate_gradient_variance,
    estimate_limit_gap,
    run_centralized,
    run_dsvm,
    run_fsgld,
    summarize,
    sweep,
)
from distgen.learners import SgdParams, SgldStepParams, sgld_step
from distgen.seeding import child_seed, make_rng

FAST = SgdParams(max_epochs=20)


@pytest.fixture(scope="module")
def task():
    pool = synth_two_gaussians(5, 3000, 3.0, 0.05, seed=1)
    test = synth_two_gaussians(5, 2000, 3.0, 0.05, seed=2)
    return pool, test


def _zero_grad(X, y, w):
    return np.zeros((X.shape[0], w.shape[0]))


class TestAggregate:
    def test_examples(self):
        w = np.array([0.3, -1.2])
        assert np.array_equal(aggregate([w]), w)
        e1 = np.array([1.0, 0.0])
        assert np.array_equal(aggregate([e1, -e1]), np.zeros(2))

    def test_errors(self):
        with pytest.raises(ValueError, match="empty"):
            aggregate([])
        with pytest.raises(ValueError, match="dimension mismatch"):
            aggregate([np.zeros(2), np.zeros(3)])

    @settings(max_examples=50)
    @given(st.integers(1, 12), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_permutation_bit_identical(self, K, d, seed):
        rng = np.random.default_rng(seed)
        W = rng.standard_normal((K, d)) * 10.0 ** rng.integers(-8, 8, (K, 1))
        perm = rng.permutation(K)
        assert np.array_equal(aggregate(W), aggregate(W[perm]))

    @settings(max_examples=50)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.sampled_from([2.0, 0.5, -4.0, 0.0]))
    def test_linear(self, K, seed, c):
        W = np.random.default_rng(seed).standard_normal((K, 3))
        np.testing.assert_allclose(aggregate(c * W), c * aggregate(W), rtol=1e-14, atol=1e-15)


class TestDsvm:
    def test_report_identities(self, task):
        pool, test = task
        rep = run_dsvm(pool, test, K=5, n=50, theta=0.2, sgd_params=FAST, seed=3)
        assert abs(rep.gen_gap + rep.agg_emp_risk_margin - rep.pop_risk) <= 1e-12
        assert rep.delta_emp == rep.agg_emp_risk - rep.local_emp_risk
        assert rep.agg_emp_risk_margin >= rep.agg_emp_risk
        assert rep.client_norms.shape == (5,)
        assert np.all(np.isfinite([rep.gen_gap, rep.pop_risk]))

    def test_k1_single_client(self, task):
        pool, test = task
        rep = run_dsvm(pool, test, K=1, n=80, sgd_params=FAST, seed=4)
        assert rep.delta_emp == 0.0
        assert rep.gen_gap == rep.pop_risk - rep.agg_emp_risk

    def test_centralized_is_k1(self, task):
        pool, test = task
        a = run_centralized(pool, test, 120, sgd_params=FAST, seed=9)
        b = run_dsvm(pool, test, 1, 120, sgd_params=FAST, seed=9)
        assert np.array_equal(a.w_bar, b.w_bar) and a.pop_risk == b.pop_risk and a.gen_gap == b.gen_gap

    def test_centralized_separable(self):
        data = synth_two_gaussians(2, 2000, 8.0, 0.0, seed=0)
        rep = run_centralized(data, data, 200, seed=0)
        assert rep.agg_emp_risk < 0.001

    def test_perfect_classifier_zero_gap(self):
        X = np.array([[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0], [-2.0, 0.0]] * 10)
        y = np.array([1, 1, -1, -1] * 10)
        data = Dataset(X, y)
        rep = run_dsvm(data, data, 2, 8, theta=0.0, seed=0)
        assert rep.pop_risk == 0.0 and rep.gen_gap == 0.0

    def test_deterministic_and_parallel_invariant(self, task):
        pool, test = task
        a = run_dsvm(pool, test, 4, 40, sgd_params=FAST, seed=11)
        b = run_dsvm(pool, test, 4, 40, sgd_params=FAST, seed=11, n_jobs=2)
        assert np.array_equal(a.w_bar, b.w_bar) and a.gen_gap == b.gen_gap

    def test_rescale_bounds_client_norms(self, task):
        pool, test = task
        rep = run_dsvm(pool, test, 3, 40, sgd_params=FAST, seed=2, rescale=True)
        assert np.linalg.norm(rep.w_bar) <= 1.0 + 1e-12


class TestLimitGap:
    def test_constant_algorithm(self, task):
        pool, test = task
        # eta0 tiny and one epoch: clients barely move from zero, so all predict +1 on ties.
        est = estimate_limit_gap(pool, test, 20, SgdParams(eta0=1e-12, max_epochs=1), R=20, seed=0)
        assert abs(est.estimate) <= 4 * est.se + 0.05

    def test_requires_two(self, task):
        with pytest.raises(ValueError):
            estimate_limit_gap(*task, 10, R=1)

    def test_stable_under_doubling(self, task):
        pool, test = task
        a = estimate_limit_gap(pool, test, 10, FAST, R=20, seed=5)
        b = estimate_limit_gap(pool, test, 10, FAST, R=40, seed=5)
        assert abs(a.estimate - b.estimate) <= 2 * (a.se + b.se) + 1e-12
        assert a.se > 0


class TestFsgld:
    def test_zero_gradient_no_noise(self, task):
        pool, test = task
        w0 = np.array([0.5, -0.5, 0.0, 1.0, 2.0])
        sched = FsgldSchedule.constant(1, 0.1, np.inf)
        trace, _ = run_fsgld(pool, test, 1, 10, 5, sched, surrogate=_zero_grad, w0=w0)
        assert np.array_equal(trace.final_w, w0)

    def test_identical_clients_match_single(self, task):
        pool, test = task
        shard0 = Dataset(pool.X[:20], pool.y[:20])
        sched = FsgldSchedule.constant(15, 0.05, np.inf)
        one, _ = run_fsgld(pool, test, 1, 20, 5, sched, shards=[shard0])
        many, _ = run_fsgld(pool, test, 4, 20, 5, sched, shards=[shard0] * 4)
        np.testing.assert_allclose(many.aggregates, one.aggregates, rtol=0, atol=1e-15)

    def test_k1_matches_sgld_steps_bitwise(self, task):
        pool, test = task
        data = Dataset(pool.X[:12], pool.y[:12])
        sched = FsgldSchedule(np.linspace(0.1, 0.01, 9), np.linspace(10, 50, 9))
        trace, _ = run_fsgld(pool, test, 1, 12, 4, sched, shards=[data], seed=7, aggregator="last")
        rng = make_rng(child_seed(7, "noise", 0))
        w = np.zeros(5)
        for t in range(9):
            j = t % 3
            batch = Dataset(data.X[4 * j:4 * j + 4], data.y[4 * j:4 * j + 4])
            w = sgld_step(w, batch, SgldStepParams(sched.eta[t], sched.beta[t]), noise=rng.standard_normal(5))
        assert np.array_equal(trace.final_w, w)

    def test_index_sets_partition(self, task):
        pool, test = task
        sched = FsgldSchedule.constant(100, 0.01, 100.0)
        trace, report = run_fsgld(pool, test, 4, 50, 10, sched, seed=1)
        for i in range(4):
            sets = trace.index_sets(i)
            assert sorted(t for ts in sets.values() for t in ts) == list(range(100))
            assert all(len(ts) == 20 for ts in sets.values())
        np.testing.assert_allclose(trace.aggregates[1:].mean(axis=0), trace.final_w)
        assert report.gen_gap == report.pop_risk - report.agg_emp_risk

    def test_minibatch_size_must_divide(self, task):
        with pytest.raises(ValueError, match="not divisible"):
            run_fsgld(*task, 2, 10, 3, FsgldSchedule.constant(2, 0.1, 1.0))

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            FsgldSchedule(np.ones(3), np.ones(2))
        with pytest.raises(ValueError):
            FsgldSchedule(np.ones(2), np.ones(2), np.array([0, 5])).minibatches(1, 2)

    def test_variance_estimate(self, task):
        pool, test = task
        sched = FsgldSchedule.constant(6, 0.05, 50.0)
        traces = [run_fsgld(pool, test, 2, 20, 5, sched, seed=s)[0] for s in range(4)]
        var = estimate_gradient_variance(traces)
        G = np.stack([t.gradients for t in traces])
        t, i = 3, 1
        ref = np.sum(np.var(G[:, t, i], axis=0, ddof=1))
        assert var.shape == (6, 2) and var[t, i] == pytest.approx(ref)
        with pytest.raises(ValueError):
            estimate_gradient_variance(traces[:1])
        with pytest.raises(ValueError):
            traces[0].with_variance(np.zeros((2, 2)))


class TestSweep:
    def test_single_cell(self, task):
        pool, test = task
        rows = sweep(SweepConfig([2], [20], repeats=1, sgd=FAST, centralized=False), pool, test)
        assert len(rows) == 1 and rows[0]["repeat"] == 0

    def test_summary_rows(self):
        rows = [{"experiment": "distributed", "K": 2, "n": 5, "repeat": r, "gen_gap": g}
                for r, g in enumerate([0.1, 0.3])]
        mean, se = summarize(rows)
        assert mean["repeat"] == "mean" and mean["gen_gap"] == pytest.approx(0.2)
        assert se["gen_gap"] == pytest.approx(0.1)
        assert "pop_risk" not in mean

    def test_deterministic_and_order_invariant(self, task):
        pool, test = task
        cfg = SweepConfig([1, 3], [20], repeats=3, master_seed=5, sgd=FAST)
        a = sweep(cfg, pool, test)
        b = sweep(cfg, pool, test, n_jobs=2)
        assert a == b
        per = [r for r in a if isinstance(r["repeat"], int)]
        key = lambda r: (r["experiment"], r["K"], r["repeat"])  # noqa: E731
        assert sorted(summarize(per[::-1]), key=key) == sorted(summarize(per), key=key)

    def test_bound_columns(self, task):
        pool, test = task
        rows = sweep(SweepConfig([4], [20], repeats=2, sgd=FAST), pool, test, B=1.0)
        dist = [r for r in rows if r["experiment"] == "distributed" and r["repeat"] == 0][0]
        cent = [r for r in rows if r["experiment"] == "centralized" and r["repeat"] == 0][0]
        assert dist["bound_expected"] <= dist["bound_tail"]
        assert "bound_centralized" in cent and "bound_expected" not in cent

    def test_repeats_validated(self):
        with pytest.raises(ValueError):
            SweepConfig([1], [10], repeats=0)
