"""One-round SVM averaging, federated SGLD, and experiment sweeps.

Clients are simulated in-process. Each client draws its own RNG stream from
the run seed through :func:`~distgen.seeding.child_seed`, so results do not
depend on the order or the worker in which clients are trained.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .datasets import Dataset, ShardPlan, shard
from .learners import (
    SgdParams,
    empirical_risk,
    population_risk_estimate,
    sgd_train_svm,
    surrogate_grad_logistic,
)
from .exceptions import DivergenceError
from .seeding import child_seed, make_rng

__all__ = [
    "aggregate",
    "DsvmRunReport",
    "run_dsvm",
    "run_centralized",
    "LimitGapEstimate",
    "estimate_limit_gap",
    "FsgldSchedule",
    "FsgldTrace",
    "FsgldReport",
    "run_fsgld",
    "estimate_gradient_variance",
    "SweepConfig",
    "sweep",
    "summarize",
    "sort_rows",
]


def aggregate(hypotheses):
    """Coordinate-wise mean of client hypotheses.

    Each coordinate is summed after sorting its ``K`` values, so the result
    is bit-identical under any permutation of the inputs.

    Parameters
    ----------
    hypotheses : sequence of ndarray of shape (d,), or ndarray of shape (K, d)

    Returns
    -------
    ndarray of shape (d,)
    """
    if len(hypotheses) == 0:
        raise ValueError("cannot aggregate an empty list of hypotheses")
    dims = {np.shape(w) for w in hypotheses}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise ValueError(f"dimension mismatch among hypotheses: {sorted(dims)}")
    W = np.array(hypotheses, dtype=np.float64)
    return np.sort(W, axis=0).sum(axis=0) / W.shape[0]


@dataclass
class DsvmRunReport:
    """Risks of one distributed SVM run.

    ``gen_gap`` is ``pop_risk - agg_emp_risk_margin``: the 0-1 population
    risk of the aggregate minus its average margin-``theta`` empirical risk
    over the client shards. ``delta_emp`` is ``agg_emp_risk -
    local_emp_risk`` with both terms under the 0-1 loss.
    """

    K: int
    n: int
    seed: int
    theta: float
    w_bar: np.ndarray
    client_norms: np.ndarray
    client_train_risks: np.ndarray
    client_epochs: np.ndarray
    local_emp_risk: float
    agg_emp_risk: float
    agg_emp_risk_margin: float
    pop_risk: float
    gen_gap: float
    delta_emp: float


def _train_client(shard_data, params):
    res = sgd_train_svm(shard_data, params)
    return res.w, res.train_risk, res.n_epochs


def _run_clients(shards, sgd_params, seed, n_jobs):
    params = [sgd_params.replace(seed=child_seed(seed, "client", i)) for i in range(len(shards))]
    if n_jobs == 1 or len(shards) == 1:
        return [_train_client(s, p) for s, p in zip(shards, params)]
    return Parallel(n_jobs=n_jobs)(delayed(_train_client)(s, p) for s, p in zip(shards, params))


def run_dsvm(
    pool,
    test,
    K,
    n,
    theta=0.0,
    sgd_params=None,
    feature_map=None,
    seed=0,
    rescale=False,
    n_jobs=1,
):
    """Train ``K`` SVM clients on random shards and average their weights.

    Parameters
    ----------
    pool, test : Dataset
        Training pool the shards are drawn from and held-out set used as
        the population. Features must already be mapped unless
        ``feature_map`` is given.
    K, n : int
        Number of clients and samples per client.
    theta : float, default=0.0
        Margin of the empirical risk in the generalization gap.
    sgd_params : SgdParams, optional
        Client hyperparameters; the seed field is replaced per client.
    feature_map : fitted transformer, optional
        Applied to ``pool`` and ``test`` before training.
    seed : int, default=0
        Run seed; shards and client streams are derived from it.
    rescale : bool, default=False
        Scale each client hypothesis to norm at most 1 before averaging.
    n_jobs : int, default=1
        Parallel workers for client training; results do not depend on it.

    Returns
    -------
    DsvmRunReport
    """
    sgd_params = SgdParams() if sgd_params is None else sgd_params
    if feature_map is not None:
        pool = Dataset(feature_map.transform(pool.X), pool.y)
        test = Dataset(feature_map.transform(test.X), test.y)
    shards = shard(pool, ShardPlan(K=K, n=n, seed=child_seed(seed, "shards")))
    results = _run_clients(shards, sgd_params, seed, n_jobs)
    W = np.array([r[0] for r in results])
    norms = np.linalg.norm(W, axis=1)
    if rescale:
        W = W / np.maximum(1.0, norms)[:, None]
    w_bar = aggregate(W)
    local = float(np.mean([empirical_risk(s, w) for s, w in zip(shards, W)]))
    agg = float(np.mean([empirical_risk(s, w_bar) for s in shards]))
    agg_margin = float(np.mean([empirical_risk(s, w_bar, "margin", theta) for s in shards]))
    pop = population_risk_estimate(test, w_bar)
    return DsvmRunReport(
        K=K,
        n=n,
        seed=seed,
        theta=theta,
        w_bar=w_bar,
        client_norms=norms,
        client_train_risks=np.array([r[1] for r in results]),
        client_epochs=np.array([r[2] for r in results]),
        local_emp_risk=local,
        agg_emp_risk=agg,
        agg_emp_risk_margin=agg_margin,
        pop_risk=pop,
        gen_gap=pop - agg_margin,
        delta_emp=agg - local,
    )


def run_centralized(pool, test, N, theta=0.0, sgd_params=None, feature_map=None, seed=0, rescale=False):
    """A single SVM trained on ``N`` pooled samples; same as ``run_dsvm`` with ``K=1``."""
    return run_dsvm(pool, test, 1, N, theta, sgd_params, feature_map, seed, rescale)


@dataclass
class LimitGapEstimate:
    """Large-``K`` limit of the empirical-risk difference, with jackknife error."""

    estimate: float
    se: float
    R: int


def estimate_limit_gap(pool, test, n, sgd_params=None, R=200, seed=0, theta=0.0, n_jobs=1):
    """Estimate ``L(E[W]) - E[L_hat(S, W)]`` from ``R`` independent clients.

    As ``K`` grows the average of client hypotheses approaches ``E[W]``, so
    the empirical-risk difference tends to the population risk of the mean
    hypothesis minus the expected training risk of a single client. The
    estimate uses the mean of ``R`` client weight vectors; its standard
    error is the delete-one jackknife over clients.

    Returns
    -------
    LimitGapEstimate
    """
    if R < 2:
        raise ValueError("R must be at least 2")
    sgd_params = SgdParams() if sgd_params is None else sgd_params
    shards = shard(pool, ShardPlan(K=R, n=n, seed=child_seed(seed, "shards")))
    results = _run_clients(shards, sgd_params, seed, n_jobs)
    W = np.array([r[0] for r in results])
    loss = "margin" if theta > 0 else "zero_one"
    own = np.array([empirical_risk(s, w, loss, theta) for s, w in zip(shards, W)])
    estimate = population_risk_estimate(test, aggregate(W)) - own.mean()
    # Leave-one-out population risks from the summed test scores.
    scores = test.X @ W.T
    total = scores.sum(axis=1, keepdims=True)
    loo_pop = np.mean(test.y[:, None] * (total - scores) < 0, axis=0)
    loo_own = (own.sum() - own) / (R - 1)
    loo = loo_pop - loo_own
    se = float(np.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))
    return LimitGapEstimate(estimate=float(estimate), se=se, R=R)


@dataclass(frozen=True)
class FsgldSchedule:
    """Per-round learning rates, inverse temperatures and minibatch choices.

    Attributes
    ----------
    eta, beta : ndarray of shape (T,)
    minibatch_index : ndarray of shape (T,) or (T, K), optional
        Zero-based minibatch used at each round (per client if 2-D). When
        omitted the schedule is cyclic: ``j_t = t mod m``.
    """

    eta: np.ndarray
    beta: np.ndarray
    minibatch_index: Optional[np.ndarray] = None

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=np.float64)
        beta = np.asarray(self.beta, dtype=np.float64)
        if eta.ndim != 1 or eta.shape != beta.shape:
            raise ValueError("eta and beta must be 1-D arrays of equal length")
        if np.any(eta <= 0) or np.any(beta <= 0):
            raise ValueError("eta and beta must be positive")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "beta", beta)

    @property
    def T(self):
        return self.eta.shape[0]

    @classmethod
    def constant(cls, T, eta, beta):
        return cls(np.full(T, float(eta)), np.full(T, float(beta)))

    def minibatches(self, K, m):
        """Zero-based minibatch index per (round, client), shape ``(T, K)``."""
        if self.minibatch_index is None:
            j = np.arange(self.T) % m
            return np.repeat(j[:, None], K, axis=1)
        j = np.asarray(self.minibatch_index, dtype=np.int64)
        if j.ndim == 1:
            j = np.repeat(j[:, None], K, axis=1)
        if j.shape != (self.T, K) or j.min() < 0 or j.max() >= m:
            raise ValueError("minibatch_index must have shape (T,) or (T, K) with entries in [0, m)")
        return j


@dataclass
class FsgldTrace:
    """Everything the federated SGLD bound needs from one run.

    Attributes
    ----------
    K, n, b : int
        Clients, samples per client and minibatch size (``m = n // b``).
    eta, beta : ndarray of shape (T,)
    minibatch_index : ndarray of shape (T, K)
        Zero-based minibatch ``j_t`` used by each client at each round.
    aggregates : ndarray of shape (T + 1, d)
        ``W_bar_0, ..., W_bar_T``.
    final_w : ndarray of shape (d,)
        Polyak average of ``W_bar_1..W_bar_T`` or the last iterate.
    gradients : ndarray of shape (T, K, d) or None
        Minibatch-mean surrogate gradients at ``W_bar_{t-1}``.
    gradient_scatter : ndarray of shape (T, K)
        Within-minibatch estimate of the variance of the minibatch-mean
        gradient, ``sum_l ||g_l - g_mean||^2 / (b (b - 1))`` (zero if b = 1).
    gradient_variance : ndarray of shape (T, K) or None
        Variance of the minibatch-mean gradient used by the bound; filled
        by :func:`estimate_gradient_variance` or from ``gradient_scatter``.
    """

    K: int
    n: int
    b: int
    eta: np.ndarray
    beta: np.ndarray
    minibatch_index: np.ndarray
    aggregates: np.ndarray
    final_w: np.ndarray
    gradients: Optional[np.ndarray] = None
    gradient_scatter: Optional[np.ndarray] = None
    gradient_variance: Optional[np.ndarray] = None

    @property
    def T(self):
        return self.eta.shape[0]

    @property
    def m(self):
        return self.n // self.b

    def index_sets(self, i):
        """Rounds at which client ``i`` used each minibatch, ``{j: [t, ...]}``."""
        out = {j: [] for j in range(self.m)}
        for t, j in enumerate(self.minibatch_index[:, i]):
            out[int(j)].append(t)
        return out

    def with_variance(self, variance):
        variance = np.asarray(variance, dtype=np.float64)
        if variance.shape != (self.T, self.K):
            raise ValueError(f"variance must have shape {(self.T, self.K)}")
        return replace(self, gradient_variance=variance)


@dataclass
class FsgldReport:
    """0-1 risks of the final federated SGLD hypothesis."""

    K: int
    n: int
    seed: int
    pop_risk: float
    agg_emp_risk: float
    gen_gap: float


def run_fsgld(
    pool,
    test,
    K,
    n,
    b,
    schedule,
    surrogate=surrogate_grad_logistic,
    aggregator="polyak",
    seed=0,
    w0=None,
    shards=None,
    record_gradients=True,
):
    """Federated SGLD: broadcast, one local Langevin step per client, average.

    At round ``t`` every client ``i`` computes
    ``W_it = W_bar_{t-1} - eta_t * grad + sqrt(2 eta_t / beta_t) V_it`` on its
    minibatch ``j_t`` and the server sets ``W_bar_t`` to their mean. Each
    shard is split into ``m = n / b`` consecutive disjoint minibatches.

    Parameters
    ----------
    pool, test : Dataset
    K, n, b : int
        Clients, samples per client and minibatch size; ``b`` must divide ``n``.
    schedule : FsgldSchedule
    surrogate : callable, default=surrogate_grad_logistic
        Per-sample gradient ``surrogate(X, y, w) -> (b, d)``.
    aggregator : {"polyak", "last"}, default="polyak"
        Final hypothesis: average of ``W_bar_1..W_bar_T`` or ``W_bar_T``.
    seed : int, default=0
    w0 : ndarray of shape (d,), optional
        Initial aggregate; zeros by default.
    shards : list of Dataset, optional
        Use these client datasets instead of drawing them from ``pool``.
    record_gradients : bool, default=True
        Keep the ``(T, K, d)`` gradient array in the trace.

    Returns
    -------
    trace : FsgldTrace
    report : FsgldReport
    """
    if n % b != 0:
        raise ValueError(f"n={n} is not divisible by the minibatch size b={b}")
    if aggregator not in ("polyak", "last"):
        raise ValueError("aggregator must be 'polyak' or 'last'")
    if shards is None:
        shards = shard(pool, ShardPlan(K=K, n=n, seed=child_seed(seed, "shards")))
    if len(shards) != K or any(s.n_samples != n for s in shards):
        raise ValueError("shards must be K datasets of n samples each")
    m = n // b
    T = schedule.T
    jt = schedule.minibatches(K, m)
    d = shards[0].n_features
    w_bar = np.zeros(d) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    noise_rngs = [make_rng(child_seed(seed, "noise", i)) for i in range(K)]
    aggregates = np.empty((T + 1, d))
    aggregates[0] = w_bar
    grads = np.empty((T, K, d)) if record_gradients else None
    scatter = np.zeros((T, K))
    local = np.empty((K, d))
    for t in range(T):
        eta, beta = schedule.eta[t], schedule.beta[t]
        noise_scale = np.sqrt(2.0 * eta / beta)
        for i in range(K):
            lo = jt[t, i] * b
            Xb = shards[i].X[lo:lo + b]
            yb = shards[i].y[lo:lo + b]
            per_sample = np.asarray(surrogate(Xb, yb, w_bar), dtype=np.float64).reshape(b, d)
            g = per_sample.mean(axis=0)
            if not np.all(np.isfinite(g)):
                raise DivergenceError(f"non-finite gradient at round {t + 1}, client {i}")
            if b > 1:
                scatter[t, i] = np.sum((per_sample - g) ** 2) / (b * (b - 1))
            if grads is not None:
                grads[t, i] = g
            v = noise_rngs[i].standard_normal(d)
            local[i] = w_bar - eta * g + noise_scale * v
        w_bar = aggregate(local)
        aggregates[t + 1] = w_bar
    final = aggregates[1:].mean(axis=0) if aggregator == "polyak" else aggregates[-1].copy()
    trace = FsgldTrace(
        K=K,
        n=n,
        b=b,
        eta=schedule.eta,
        beta=schedule.beta,
        minibatch_index=jt,
        aggregates=aggregates,
        final_w=final,
        gradients=grads,
        gradient_scatter=scatter,
    )
    pop = population_risk_estimate(test, final)
    emp = float(np.mean([empirical_risk(s, final) for s in shards]))
    report = FsgldReport(K=K, n=n, seed=seed, pop_risk=pop, agg_emp_risk=emp, gen_gap=pop - emp)
    return trace, report


def estimate_gradient_variance(traces):
    """Variance of the minibatch gradient per (round, client) across replicas.

    The replicas must share the schedule and differ in data and noise. For
    each ``(t, i)`` this is the unbiased estimate
    ``sum_r ||g_r - g_mean||^2 / (R - 1)``.

    Returns
    -------
    ndarray of shape (T, K)
    """
    if len(traces) < 2:
        raise ValueError("need at least two replicas to estimate a variance")
    if any(tr.gradients is None for tr in traces):
        raise ValueError("traces were recorded without gradients")
    G = np.stack([tr.gradients for tr in traces])
    centred = G - G.mean(axis=0)
    return np.sum(centred**2, axis=(0, 3)) / (len(traces) - 1)


@dataclass
class SweepConfig:
    """Grid and protocol of a DSVM experiment sweep.

    ``theta`` is the margin used in the measured generalization gap;
    ``bound_theta`` is the margin plugged into the bound curves.
    """

    K_values: list
    n_values: list
    repeats: int = 10
    master_seed: int = 0
    theta: float = 0.0
    bound_theta: float = 0.2
    delta: float = 0.05
    sigma: float = 1.0
    rescale_hypotheses: bool = False
    centralized: bool = True
    sgd: SgdParams = field(default_factory=SgdParams)

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.K_values or not self.n_values:
            raise ValueError("K_values and n_values must be nonempty")

    def cell_seed(self, K, n, repeat):
        return child_seed(self.master_seed, f"cell:K={K}:n={n}", repeat)


def _report_row(experiment, rep, report, repeat, bounds):
    row = {
        "experiment": experiment,
        "K": rep[0],
        "n": rep[1],
        "repeat": repeat,
        "seed": report.seed,
        "gen_gap": report.gen_gap,
        "emp_risk_local": report.local_emp_risk,
        "emp_risk_agg": report.agg_emp_risk,
        "emp_risk_agg_margin": report.agg_emp_risk_margin,
        "pop_risk": report.pop_risk,
        "delta_emp": report.delta_emp,
    }
    row.update(bounds)
    return row


def _sweep_task(kind, K, n, repeat, seed, pool, test, config, bounds):
    if kind == "distributed":
        report = run_dsvm(pool, test, K, n, config.theta, config.sgd, seed=seed,
                          rescale=config.rescale_hypotheses)
    else:
        N = min(n * K, pool.n_samples)
        report = run_centralized(pool, test, N, config.theta, config.sgd, seed=seed,
                                 rescale=config.rescale_hypotheses)
    return _report_row(kind, (K, n), report, repeat, bounds)


def sweep(config, pool, test, B=None, n_jobs=1):
    """Run every (K, n, repeat) cell of a sweep, distributed and centralized.

    Parameters
    ----------
    config : SweepConfig
    pool, test : Dataset
        Feature-mapped training pool and held-out population set.
    B : float, optional
        Feature-norm bound for the bound columns; defaults to the largest
        feature norm in ``pool``.
    n_jobs : int, default=1
        Cells run in parallel; output is identical for any value.

    Returns
    -------
    list of dict
        One row per (experiment, K, n, repeat) followed by ``"mean"`` and
        ``"se"`` rows per (experiment, K, n) when there are at least two
        repeats, sorted by
        (experiment, K, n, repeat). The centralized model for a cell uses
        ``N = n K`` samples (capped at the pool size) and the same seed as
        the distributed run.
    """
    from .bounds import SvmBoundParams, centralized_bound, dsvm_expected_bound, dsvm_tail_bound

    if B is None:
        B = float(np.max(np.linalg.norm(pool.X, axis=1)))
    tasks = []
    for n in config.n_values:
        for K in config.K_values:
            params = SvmBoundParams.default(n, K, config.bound_theta, B, config.delta, config.sigma)
            dist_bounds = {
                "bound_expected": dsvm_expected_bound(params),
                "bound_tail": dsvm_tail_bound(params),
            }
            cent_bounds = {
                "bound_centralized": centralized_bound(n, K, config.bound_theta, B, sigma=config.sigma)
            }
            for r in range(config.repeats):
                seed = config.cell_seed(K, n, r)
                tasks.append(("distributed", K, n, r, seed, dist_bounds))
                if config.centralized:
                    tasks.append(("centralized", K, n, r, seed, cent_bounds))
    if n_jobs == 1:
        rows = [_sweep_task(k, K, n, r, s, pool, test, config, b) for k, K, n, r, s, b in tasks]
    else:
        rows = Parallel(n_jobs=n_jobs)(
            delayed(_sweep_task)(k, K, n, r, s, pool, test, config, b) for k, K, n, r, s, b in tasks
        )
    rows.extend(summarize(rows))
    return sort_rows(rows)


NUMERIC_COLUMNS = (
    "gen_gap",
    "emp_risk_local",
    "emp_risk_agg",
    "emp_risk_agg_margin",
    "pop_risk",
    "delta_emp",
    "bound_expected",
    "bound_tail",
    "bound_centralized",
)


def summarize(rows):
    """Mean and standard-error rows per (experiment, K, n) over integer repeats.

    Cells with a single repeat get no summary rows: the mean is the row
    itself and the standard error is undefined.
    """
    groups = {}
    for row in rows:
        if isinstance(row.get("repeat"), (int, np.integer)):
            groups.setdefault((row["experiment"], row["K"], row["n"]), []).append(row)
    out = []
    for (exp, K, n), members in groups.items():
        if len(members) < 2:
            continue
        members = sorted(members, key=lambda r: r["repeat"])
        mean_row = {"experiment": exp, "K": K, "n": n, "repeat": "mean", "seed": None}
        se_row = {"experiment": exp, "K": K, "n": n, "repeat": "se", "seed": None}
        for col in NUMERIC_COLUMNS:
            vals = [r[col] for r in members if r.get(col) is not None]
            if not vals:
                continue
            vals = np.array(vals, dtype=np.float64)
            mean_row[col] = float(np.mean(vals))
            se_row[col] = float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else None
        out.extend([mean_row, se_row])
    return out


def _repeat_key(value):
    if isinstance(value, (int, np.integer)):
        return (0, int(value), "")
    return (1, 0, str(value))


def _num_key(value):
    return (1, 0) if value is None or value == "" else (0, value)


def sort_rows(rows):
    """Sort result rows by (experiment, K, n, repeat); integer repeats first."""
    return sorted(
        rows,
        key=lambda r: (r["experiment"], _num_key(r.get("K")), _num_key(r.get("n")), _repeat_key(r.get("repeat"))),
    )
