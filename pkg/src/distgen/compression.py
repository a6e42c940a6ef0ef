"""Compressed hypotheses for the distributed SVM and Monte Carlo distortion checks.

Client ``i``'s own hypothesis is replaced by a noisy JL projection
``A w_i + V`` with ``V`` uniform on the ``m``-ball of radius ``nu`` (or by
``V`` alone when ``||A w_i|| > c2``), while the other clients' hypotheses
are kept verbatim. The compressed score of a sample is
``(<A x, w_hat_ii> + sum_{j != i} <x, w_j>) / K``.

The distortion of this construction, ``D_A``, is the probability that the
compressed score moves by more than ``theta / 2`` relative to the true
aggregate score, summed over a population draw and a shard draw. Its
expectation over ``A`` is bounded by the four-term level computed in
:func:`distgen.bounds.epsilon_terms`; :func:`validate_distortion_level` checks that
inequality by simulation, term by term.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import chi2

from .bounds import SvmBoundParams, dsvm_rate_term, epsilon_terms
from .features import sample_jl
from .seeding import child_seed, make_rng

__all__ = [
    "CompressionParams",
    "CompressedHypothesis",
    "sample_uniform_ball",
    "compress",
    "compressed_score",
    "compressed_loss",
    "compression_rate",
    "estimate_distortion_DA",
    "BoundedGaussianModel",
    "jl_tail_diagnostic",
    "validate_distortion_level",
]


@dataclass(frozen=True)
class CompressionParams:
    """Parameters of the compressed-hypothesis construction.

    Shares its defaults with :class:`~distgen.bounds.SvmBoundParams`.
    """

    m: int
    c1: float
    c2: float
    nu: float
    theta: float
    B: float
    K: int
    seed: int = 0

    @classmethod
    def from_bound_params(cls, params, seed=0):
        return cls(params.m, params.c1, params.c2, params.nu, params.theta, params.B, params.K, seed)

    @classmethod
    def default(cls, n, K, theta, B=1.0, seed=0):
        return cls.from_bound_params(SvmBoundParams.default(n, K, theta, B), seed)

    def bound_params(self, n=1):
        return SvmBoundParams(n=n, K=self.K, theta=self.theta, B=self.B, m=self.m,
                              c1=self.c1, c2=self.c2, nu=self.nu)


@dataclass
class CompressedHypothesis:
    """Client ``owner``'s compressed view of the aggregate.

    Attributes
    ----------
    hat_w_ii : ndarray of shape (m,)
        Noisy projection of the owner's hypothesis.
    peers : ndarray of shape (K - 1, d)
        Other clients' hypotheses, copied verbatim.
    owner : int
    jl : JLProjection
    """

    hat_w_ii: np.ndarray
    peers: np.ndarray
    owner: int
    jl: object

    @property
    def K(self):
        return self.peers.shape[0] + 1


def sample_uniform_ball(m, radius, seed=None, size=None):
    """Uniform samples from the ``m``-dimensional ball of the given radius.

    Direction is a normalized standard Gaussian and the radius is
    ``radius * U ** (1/m)``.

    Parameters
    ----------
    m : int
    radius : float
    seed : int or numpy.random.Generator
    size : int, optional
        Number of samples; a single vector of shape ``(m,)`` if omitted.
    """
    if m < 1 or radius <= 0:
        raise ValueError("m must be >= 1 and radius > 0")
    rng = make_rng(0 if seed is None else seed)
    count = 1 if size is None else size
    g = rng.standard_normal((count, m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / m)
    out = g * r[:, None]
    return out[0] if size is None else out


def compress(w_i, peers, jl, params, seed=None, owner=0):
    """Compress client ``owner``'s hypothesis; peers are kept as they are.

    Parameters
    ----------
    w_i : ndarray of shape (d,)
    peers : ndarray of shape (K - 1, d)
    jl : JLProjection
        Fitted projection from ``R^d`` to ``R^m``.
    params : CompressionParams
    seed : int or Generator, optional
        Noise seed; defaults to ``params.seed``.
    """
    w_i = np.asarray(w_i, dtype=np.float64)
    peers = np.asarray(peers, dtype=np.float64).reshape(-1, w_i.shape[0])
    proj = jl.transform(w_i)
    noise = sample_uniform_ball(proj.shape[0], params.nu, params.seed if seed is None else seed)
    hat = proj + noise if np.linalg.norm(proj) <= params.c2 else noise
    return CompressedHypothesis(hat_w_ii=hat, peers=peers.copy(), owner=owner, jl=jl)


def compressed_score(x, ch):
    """``(<A x, w_hat_ii> + sum_j <x, w_j>) / K`` for one sample or a batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != ch.jl.n_features_in_:
        raise ValueError(f"dimension mismatch: x has {x.shape[-1]} features, expected {ch.jl.n_features_in_}")
    own = ch.jl.transform(x) @ ch.hat_w_ii
    peers = x @ ch.peers.sum(axis=0) if ch.peers.shape[0] else 0.0
    return (own + peers) / ch.K


def compressed_loss(x, y, ch, theta):
    """``1{y * score < theta / 2}`` under the compressed score."""
    return (np.asarray(y) * compressed_score(x, ch) < theta / 2.0).astype(np.int64)


def compression_rate(params):
    """Rate of the construction, ``m log((c2 + nu) / nu)``; shared with the bounds module."""
    return dsvm_rate_term(params.bound_params())


def _hypothesis_draws(w_i, count, rng):
    w_i = np.asarray(w_i, dtype=np.float64)
    if w_i.ndim == 1:
        return np.broadcast_to(w_i, (count, w_i.shape[0]))
    return w_i[rng.integers(0, w_i.shape[0], size=count)]


def _score_shift(X, W, jl, params, rng):
    """Per-draw ``|<x, w> - <A x, w_hat>| / K`` and the pieces used by the diagnostics."""
    AX = jl.transform(X)
    AW = jl.transform(W)
    V = sample_uniform_ball(params.m, params.nu, rng, size=X.shape[0])
    in_ball = np.linalg.norm(AW, axis=1) <= params.c2
    hat = np.where(in_ball[:, None], AW + V, V)
    exact = np.einsum("ij,ij->i", X, W)
    approx = np.einsum("ij,ij->i", AX, hat)
    return np.abs(exact - approx) / params.K, AX, AW, V, exact, in_ball


def estimate_distortion_DA(pop_X, shard_X, w_i, peers, jl, params, n_mc=10_000, seed=0):
    """Monte Carlo estimate of the distortion ``D_A`` of the construction.

    ``D_A`` is the sum of two probabilities that the compressed score
    deviates from the exact score by more than ``theta / 2``: one over a
    population sample (drawn from ``pop_X``) and one over a shard sample
    (drawn uniformly from ``shard_X``), each with fresh quantization noise.
    The peers' contributions cancel in the score difference, so ``peers``
    only has its dimension checked and may be ``None``.

    Parameters
    ----------
    pop_X : ndarray of shape (N, d)
        Samples standing in for the population.
    shard_X : ndarray of shape (n, d)
        The client's training features.
    w_i : ndarray of shape (d,) or (R, d)
        Client hypothesis, or samples of it (one is drawn per Monte Carlo draw).
    peers : ndarray of shape (K - 1, d) or None
    jl : JLProjection
    params : CompressionParams
    n_mc : int, default=10000
        Paired draws (``>= 100``).

    Returns
    -------
    estimate, std_err : float
    """
    if n_mc < 100:
        raise ValueError("n_mc must be at least 100")
    if peers is not None and np.asarray(peers).size and np.asarray(peers).shape[-1] != pop_X.shape[1]:
        raise ValueError("peer hypotheses must match the feature dimension")
    rng = make_rng(seed)
    half = params.theta / 2.0
    pop_idx = rng.integers(0, pop_X.shape[0], size=n_mc)
    shard_idx = rng.integers(0, shard_X.shape[0], size=n_mc)
    W_pop = _hypothesis_draws(w_i, n_mc, rng)
    W_emp = _hypothesis_draws(w_i, n_mc, rng)
    pop_dev = _score_shift(pop_X[pop_idx], W_pop, jl, params, rng)[0] > half
    emp_dev = _score_shift(shard_X[shard_idx], W_emp, jl, params, rng)[0] > half
    total = pop_dev.astype(np.float64) + emp_dev
    return float(total.mean()), float(total.std(ddof=1) / np.sqrt(n_mc))


@dataclass
class BoundedGaussianModel:
    """Synthetic data and hypotheses with ``||X|| <= B`` and ``||W|| <= 1``.

    Features are ``N(0, (scale B)^2 / d I)`` clipped to norm ``B``, so with
    the default ``scale = 1`` most samples sit on or near the sphere of
    radius ``B`` (the hardest case for the JL tails). Hypotheses are unit
    vectors around a fixed direction.
    """

    d: int = 50
    B: float = 1.0
    scale: float = 1.0
    w_spread: float = 0.3
    seed: int = 0

    def sample_x(self, count, rng):
        X = rng.standard_normal((count, self.d)) * (self.scale * self.B / np.sqrt(self.d))
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        return X * np.minimum(1.0, self.B / np.maximum(norms, 1e-300))

    def sample_w(self, count, rng):
        base = make_rng(child_seed(self.seed, "direction")).standard_normal(self.d)
        base /= np.linalg.norm(base)
        W = base + self.w_spread * rng.standard_normal((count, self.d)) / np.sqrt(self.d)
        return W / np.linalg.norm(W, axis=1, keepdims=True)


def jl_tail_diagnostic(X, m, c, B, n_matrices=20, seed=0):
    """Probability that a Gaussian projection stretches a feature past ``c B``.

    Two estimates of ``P(||A X|| >= c B)`` are returned: the raw Monte Carlo
    frequency over ``n_matrices`` sampled projections, and the exact value
    given each ``X`` (``||A x||^2 m / ||x||^2`` is chi-square with ``m``
    degrees of freedom), averaged over ``X``. The second has far lower
    variance for rare events. The diagnostic passes when the exact
    estimate minus two standard errors is at most
    ``2 exp(-0.21 m (c^2 - 1))``.

    Returns
    -------
    dict
    """
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    hits = []
    for k in range(n_matrices):
        jl = sample_jl(X.shape[1], m, child_seed(seed, "tail-matrix", k))
        hits.append(np.linalg.norm(jl.transform(X), axis=1) >= c * B)
    hits = np.concatenate(hits).astype(np.float64)
    with np.errstate(divide="ignore"):
        exact = chi2.sf(m * (c * B) ** 2 / np.maximum(norms, 1e-300) ** 2, m)
    bound = 2.0 * np.exp(-0.21 * m * (c**2 - 1.0))
    exact_mean = float(exact.mean())
    exact_se = float(exact.std(ddof=1) / np.sqrt(exact.size))
    return {
        "m": m,
        "c": c,
        "B": B,
        "mc_frequency": float(hits.mean()),
        "mc_se": float(hits.std(ddof=1) / np.sqrt(hits.size)),
        "exact_given_x": exact_mean,
        "exact_given_x_se": exact_se,
        "sphere_value": float(chi2.sf(m * c**2, m)),
        "analytic_bound": float(bound),
        "passed": bool(exact_mean - 2.0 * exact_se <= bound),
    }


def validate_distortion_level(grid, data_model=None, n_mc=10_000, n_matrices=20, seed=0):
    """Check ``E_A[D_A] <= eps`` by simulation at each grid point.

    Parameters
    ----------
    grid : list of CompressionParams or dict
        Dicts are passed to :class:`CompressionParams`.
    data_model : BoundedGaussianModel, optional
    n_mc : int, default=10000
        Paired Monte Carlo draws per matrix.
    n_matrices : int, default=20
        Independent JL matrices per grid point.

    Returns
    -------
    list of dict
        Per grid point: mean ``D_A`` over matrices and its standard error,
        the analytic level and its four terms (standard and tight), the
        pass flag ``mean - 2 SE <= eps``, and empirical frequencies of the
        four failure events (projection error of the score, quantization
        noise, stretched feature, stretched hypothesis) with the
        exact-given-``X`` probabilities of the two stretching events.
    """
    model = BoundedGaussianModel() if data_model is None else data_model
    report = []
    for g, point in enumerate(grid):
        params = point if isinstance(point, CompressionParams) else CompressionParams(**point)
        if abs(model.B - params.B) > 1e-12:
            model = BoundedGaussianModel(model.d, params.B, model.scale, model.w_spread, model.seed)
        rng = make_rng(child_seed(seed, "distortion-data", g))
        pop_X = model.sample_x(max(n_mc, 1000), rng)
        shard_X = model.sample_x(100, rng)
        W = model.sample_w(1000, rng)
        values = []
        terms = np.zeros(4)
        exact34 = np.zeros(2)
        quarter = params.theta / 4.0
        for k in range(n_matrices):
            mseed = child_seed(seed, f"distortion-matrix:{g}", k)
            jl = sample_jl(model.d, params.m, mseed)
            est, _ = estimate_distortion_DA(pop_X, shard_X, W, None, jl, params, n_mc, seed=child_seed(mseed, "mc"))
            values.append(est)
            drng = make_rng(child_seed(mseed, "diagnostics"))
            for X_src in (pop_X, shard_X):
                X = X_src[drng.integers(0, X_src.shape[0], size=n_mc)]
                Wd = W[drng.integers(0, W.shape[0], size=n_mc)]
                _, AX, AW, V, exact, in_ball = _score_shift(X, Wd, jl, params, drng)
                proj = np.einsum("ij,ij->i", AX, AW)
                small = (np.linalg.norm(AX, axis=1) <= params.c1 * params.B) & in_ball
                terms[0] += np.mean(np.abs(exact - proj) / params.K > quarter)
                terms[1] += np.mean(small & (np.abs(np.einsum("ij,ij->i", AX, V)) / params.K > quarter))
                terms[2] += np.mean(np.linalg.norm(AX, axis=1) >= params.c1 * params.B)
                terms[3] += np.mean(~in_ball)
        for X_src in (pop_X, shard_X):
            nx = np.linalg.norm(X_src, axis=1)
            exact34[0] += chi2.sf(params.m * (params.c1 * params.B) ** 2 / np.maximum(nx, 1e-300) ** 2,
                                  params.m).mean()
        nw = np.linalg.norm(W, axis=1)
        exact34[1] = 2.0 * chi2.sf(params.m * params.c2**2 / np.maximum(nw, 1e-300) ** 2, params.m).mean()
        terms /= n_matrices
        values = np.array(values)
        mean = float(values.mean())
        se = float(values.std(ddof=1) / np.sqrt(n_matrices)) if n_matrices > 1 else float("nan")
        eps = epsilon_terms(params.bound_params())
        eps_tight = epsilon_terms(params.bound_params(), tight=True)
        report.append({
            "m": params.m, "c1": params.c1, "c2": params.c2, "nu": params.nu,
            "K": params.K, "theta": params.theta, "B": params.B,
            "D_A_mean": mean,
            "D_A_se": se,
            "epsilon": eps.total,
            "epsilon_tight": eps_tight.total,
            "passed": bool(mean - 2.0 * se <= eps.total),
            "term_empirical": terms.tolist(),
            "term_analytic": [eps.term1, eps.term2, eps.term3, eps.term4],
            "term_analytic_tight": [eps_tight.term1, eps_tight.term2, eps_tight.term3, eps_tight.term4],
            "term3_exact_given_x": float(exact34[0]),
            "term4_exact_given_w": float(exact34[1]),
        })
    return report
