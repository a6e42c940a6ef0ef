"""Closed-form generalization bounds.

All formulas are the explicit expressions obtained before any big-O
simplification, evaluated with natural logarithms.

Distributed SVM
    For ``K`` clients with ``n`` samples each, margin ``theta`` and features
    with ``||X|| <= B``, the compressed-hypothesis argument uses a JL
    dimension ``m``, norm thresholds ``c1, c2 > 1`` and a noise radius
    ``nu``. The distortion level is::

        eps = 8 exp(-(m/7) (K theta / (4B))^2)
            + (2 m nu^m / sqrt(pi)) exp(-((m+1)/2) (K theta / (4 c1 nu B))^2)
            + 4 exp(-0.21 m (c1^2 - 1)) + 4 exp(-0.21 m (c2^2 - 1))

    and the rate is ``m log((c2 + nu) / nu)``. The default parameters are
    ``m = ceil(112 (B/(K theta))^2 log(n K sqrt(K)))``,
    ``c1 = c2 = sqrt(K^2 theta^2 / (20 B^2) + 1)`` and ``nu = 1/(2 c1)``.

Federated SGLD
    ``sqrt(2b) sigma / (2 n K sqrt(K)) * sum_j sum_i sqrt(sum_{t in T_ij} beta_t eta_t Var_ti)``
    where ``T_ij`` is the set of rounds at which client ``i`` used
    minibatch ``j`` and ``Var_ti`` the variance of its minibatch gradient.
"""

import math
import sys
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

__all__ = [
    "SvmBoundParams",
    "EpsilonBreakdown",
    "LipschitzBoundParams",
    "epsilon_terms",
    "dsvm_rate_term",
    "dsvm_tail_bound",
    "dsvm_expected_bound",
    "centralized_bound",
    "optimize_svm_bound",
    "lipschitz_expected_bound",
    "fsgld_bound",
    "sgld_bound_single_client",
]


_LOG_MAX_FLOAT = math.log(sys.float_info.max)


@dataclass(frozen=True)
class SvmBoundParams:
    """Inputs of the distributed SVM bound.

    Parameters
    ----------
    n, K : int
        Samples per client and number of clients.
    theta : float
        Margin.
    B : float
        Almost-sure bound on the feature norm.
    m : int
        JL target dimension.
    c1, c2 : float
        Norm thresholds for projected features and hypotheses (``> 1``).
    nu : float
        Radius of the uniform-ball quantization noise.
    delta : float, optional
        Confidence level of the tail bound.
    sigma : float, default=1.0
        Subgaussian parameter of the loss.
    """

    n: int
    K: int
    theta: float
    B: float
    m: int
    c1: float
    c2: float
    nu: float
    delta: Optional[float] = None
    sigma: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.K < 1 or self.m < 1:
            raise ValueError("n, K and m must be positive integers")
        if self.theta <= 0 or self.B <= 0 or self.nu <= 0 or self.sigma <= 0:
            raise ValueError("theta, B, nu and sigma must be positive")
        if self.c1 < 1 or self.c2 < 1:
            raise ValueError("c1 and c2 must be at least 1")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    @classmethod
    def default(cls, n, K, theta, B=1.0, delta=None, sigma=1.0):
        """Parameters with the default ``(m, c1, c2, nu)`` choices for ``(n, K, theta, B)``."""
        m = math.ceil(112.0 * (B / (K * theta)) ** 2 * math.log(n * K * math.sqrt(K)))
        m = max(m, 1)
        c = math.sqrt(K**2 * theta**2 / (20.0 * B**2) + 1.0)
        return cls(n=n, K=K, theta=theta, B=B, m=m, c1=c, c2=c, nu=1.0 / (2.0 * c),
                   delta=delta, sigma=sigma)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class EpsilonBreakdown:
    """The four terms of the distortion level and their sum."""

    term1: float
    term2: float
    term3: float
    term4: float
    log_term2: float

    @property
    def total(self):
        return self.term1 + self.term2 + self.term3 + self.term4

    def to_dict(self):
        out = asdict(self)
        out["total"] = self.total
        return out


def epsilon_terms(params, tight=False):
    """Evaluate the four distortion terms.

    The second term is formed in log-space (``nu^m`` underflows for ``m`` in
    the hundreds). With ``tight=True`` it is set to zero whenever
    ``K theta / (4 c1 nu B) >= 1``, where the underlying probability is
    exactly zero.
    """
    p = params
    a = p.K * p.theta / (4.0 * p.B)
    term1 = 8.0 * math.exp(-(p.m / 7.0) * a * a)
    t = p.K * p.theta / (4.0 * p.c1 * p.nu * p.B)
    log_term2 = (
        math.log(2.0 * p.m / math.sqrt(math.pi))
        + p.m * math.log(p.nu)
        - 0.5 * (p.m + 1) * t * t
    )
    if tight and t >= 1.0:
        term2 = 0.0
    else:
        # Large nu makes this term astronomically large; the bound is then vacuous.
        term2 = math.exp(log_term2) if log_term2 < _LOG_MAX_FLOAT else math.inf
    term3 = 4.0 * math.exp(-0.21 * p.m * (p.c1**2 - 1.0))
    term4 = 4.0 * math.exp(-0.21 * p.m * (p.c2**2 - 1.0))
    return EpsilonBreakdown(term1, term2, term3, term4, log_term2)


def dsvm_rate_term(params):
    """Rate of the compressed hypothesis, ``m log((c2 + nu) / nu)`` nats."""
    return params.m * math.log1p(params.c2 / params.nu)


def dsvm_tail_bound(params, tight=False):
    """High-probability bound ``sqrt((2 rate + 2 log(1/delta)) sigma^2 / n) + eps``."""
    if params.delta is None:
        raise ValueError("the tail bound needs delta")
    rate = dsvm_rate_term(params)
    eps = epsilon_terms(params, tight).total
    return math.sqrt((2.0 * rate + 2.0 * math.log(1.0 / params.delta)) * params.sigma**2 / params.n) + eps


def dsvm_expected_bound(params, tight=False):
    """In-expectation bound ``sqrt(2 sigma^2 rate / n) + eps``."""
    rate = dsvm_rate_term(params)
    eps = epsilon_terms(params, tight).total
    return math.sqrt(2.0 * params.sigma**2 * rate / params.n) + eps


def centralized_bound(n, K, theta, B=1.0, delta=None, sigma=1.0, tight=False):
    """The distributed bound for one client holding all ``n K`` samples.

    Returns the tail bound when ``delta`` is given, otherwise the
    in-expectation bound; default parameters are refit for ``(n K, 1)``.
    """
    params = SvmBoundParams.default(n * K, 1, theta, B, delta, sigma)
    return dsvm_tail_bound(params, tight) if delta is not None else dsvm_expected_bound(params, tight)


def _geomspace_unique(lo, hi, num):
    return np.unique(np.geomspace(lo, hi, num))


def optimize_svm_bound(n, K, theta, B=1.0, delta=None, sigma=1.0, grid=None, max_sweeps=20):
    """Minimize the bound over ``(m, c1, c2, nu)`` by coordinate descent.

    Any feasible parameter choice yields a valid bound, so the minimum over
    a grid is still a bound. Each coordinate is optimized over a fixed
    candidate list that also contains the current value, so the result is
    never worse than the defaults and the search is deterministic.

    Parameters
    ----------
    grid : dict, optional
        Candidate values per coordinate, keys ``"m"``, ``"c1"``, ``"c2"``,
        ``"nu"``. Defaults span two decades around the default choice.

    Returns
    -------
    params : SvmBoundParams
    value : float
    """
    start = SvmBoundParams.default(n, K, theta, B, delta, sigma)
    evaluate = dsvm_tail_bound if delta is not None else dsvm_expected_bound
    if grid is None:
        grid = {
            "m": np.unique(np.round(_geomspace_unique(1, 20 * start.m, 200)).astype(int)),
            "c1": 1.0 + _geomspace_unique(1e-3, 10.0, 120),
            "c2": 1.0 + _geomspace_unique(1e-3, 10.0, 120),
            "nu": _geomspace_unique(1e-3, 10.0, 120),
        }
    best, best_val = start, evaluate(start)
    for _ in range(max_sweeps):
        improved = False
        for key in ("m", "c1", "c2", "nu"):
            for value in grid[key]:
                value = int(value) if key == "m" else float(value)
                cand = best.replace(**{key: value})
                val = evaluate(cand)
                if val < best_val:
                    best, best_val, improved = cand, val, True
        if not improved:
            break
    return best, best_val


@dataclass(frozen=True)
class LipschitzBoundParams:
    """Inputs of the bound for deterministic Lipschitz algorithms.

    ``lipschitz`` is the Lipschitz constant of the loss in the hypothesis
    and ``sigma_w2`` bounds the variance of each client's hypothesis.
    """

    lipschitz: float
    sigma: float
    sigma_w2: float
    n: int
    K: int

    def __post_init__(self):
        if self.lipschitz <= 0 or self.sigma <= 0 or self.sigma_w2 < 0 or self.n < 1 or self.K < 1:
            raise ValueError("invalid Lipschitz bound parameters")


def lipschitz_expected_bound(params):
    """``min(2 cbrt(2 L sigma^2 sigma_W^2 / (n K^2)), 2 L sigma_W^2 / K^2)``."""
    p = params
    first = 2.0 * np.cbrt(2.0 * p.lipschitz * p.sigma**2 * p.sigma_w2 / (p.n * p.K**2))
    second = 2.0 * p.lipschitz * p.sigma_w2 / p.K**2
    return float(min(first, second))


def fsgld_bound(trace, sigma, b=None, n=None, K=None):
    """Expected-generalization bound of federated SGLD from a recorded trace.

    Parameters
    ----------
    trace : FsgldTrace
        Must carry ``gradient_variance`` of shape ``(T, K)``.
    sigma : float
        Subgaussian parameter of the evaluation loss.
    b, n, K : int, optional
        Override the minibatch size, samples per client and number of
        clients stored in the trace.
    """
    b = trace.b if b is None else b
    n = trace.n if n is None else n
    K = trace.K if K is None else K
    if trace.gradient_variance is None:
        raise ValueError("missing variance data: attach gradient_variance to the trace first")
    var = np.asarray(trace.gradient_variance, dtype=np.float64)
    if np.any(var < 0) or not np.all(np.isfinite(var)):
        raise ValueError("gradient variances must be finite and nonnegative")
    weights = (trace.beta * trace.eta)[:, None] * var
    m = max(trace.m, int(trace.minibatch_index.max()) + 1)
    total = 0.0
    for i in range(trace.minibatch_index.shape[1]):
        per_batch = np.bincount(trace.minibatch_index[:, i], weights=weights[:, i], minlength=m)
        total += np.sqrt(per_batch).sum()
    return float(math.sqrt(2.0 * b) * sigma / (2.0 * n * K * math.sqrt(K)) * total)


def sgld_bound_single_client(eta, beta, minibatch_index, variance, sigma, b, n):
    """Single-client SGLD bound ``sqrt(2b) sigma / (2n) sum_j sqrt(sum_{t in T_j} beta_t eta_t Var_t)``.

    This is the one-client form of :func:`fsgld_bound`, written out
    separately so the two can be checked against each other.
    """
    per_batch = {}
    for t, j in enumerate(np.asarray(minibatch_index).reshape(-1)):
        per_batch[int(j)] = per_batch.get(int(j), 0.0) + beta[t] * eta[t] * variance[t]
    total = sum(math.sqrt(v) for v in per_batch.values())
    return math.sqrt(2.0 * b) * sigma / (2.0 * n) * total
