"""Rate-distortion solvers on finite alphabets.

* :func:`blahut_arimoto` computes the point of the rate-distortion curve
  with a given slope.
* :func:`rd_at_distortion` finds the rate at a target distortion by
  bisection on the slope.
* :func:`algorithm_rd` and :func:`conditional_algorithm_rd` evaluate the
  compressibility of a learning algorithm: the smallest mutual information
  between data and a compressed hypothesis whose expected generalization
  error is at most ``epsilon`` below that of the algorithm.
* :func:`robust_rd` searches a KL ball of algorithm distributions.
* :func:`finite_toy_bounds` enumerates a small distributed algorithm and
  evaluates its rate-distortion generalization bounds exactly.

All rates are in nats. Every solver is deterministic.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConvergenceError, InfeasibleError

__all__ = [
    "check_pmf",
    "mutual_information",
    "RdInstance",
    "BAResult",
    "blahut_arimoto",
    "rd_at_distortion",
    "AlgorithmRdInstance",
    "ConditionalRdInstance",
    "algorithm_rd",
    "conditional_algorithm_rd",
    "RobustRdResult",
    "robust_rd",
    "FiniteDistributedToy",
    "FiniteToyBounds",
    "finite_toy_bounds",
]

PMF_TOL = 1e-12
WARM_START_MIX = 1e-9


def check_pmf(p, name="pmf"):
    """Validate a probability vector (or array) and return it as float64."""
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError(f"{name} has negative or non-finite mass")
    total = p.sum()
    if abs(total - 1.0) > max(PMF_TOL, 1e-12 * p.size):
        raise ValueError(f"{name} sums to {total!r}, not 1")
    return p


def mutual_information(joint):
    """Mutual information (nats) of a 2-D joint probability table."""
    joint = check_pmf(joint, "joint")
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    return float(np.sum(joint[mask] * np.log(joint[mask] / (px @ py)[mask])))


@dataclass(frozen=True)
class RdInstance:
    """Source distribution, distortion matrix and (optional) target level.

    Parameters
    ----------
    px : array of shape (n_x,)
    distortion : array of shape (n_x, n_xhat)
    target : float, optional
        Distortion level used by :func:`rd_at_distortion`.
    """

    px: np.ndarray
    distortion: np.ndarray
    target: Optional[float] = None

    def __post_init__(self):
        px = check_pmf(self.px, "px")
        d = np.asarray(self.distortion, dtype=np.float64)
        if px.ndim != 1 or d.ndim != 2 or d.shape[0] != px.shape[0]:
            raise ValueError("distortion must have shape (len(px), n_xhat)")
        if not np.all(np.isfinite(d)):
            raise ValueError("distortion entries must be finite")
        object.__setattr__(self, "px", px)
        object.__setattr__(self, "distortion", d)


@dataclass
class BAResult:
    """One point on the rate-distortion curve.

    ``rate`` is the mutual information of ``conditional`` (an achievable
    point, hence an upper bound on ``R(distortion)``); ``lower_bound`` is
    the matching lower bound on ``R(distortion)`` from the dual.
    """

    rate: float
    distortion: float
    slope: float
    conditional: np.ndarray
    marginal: np.ndarray
    iterations: int
    lower_bound: float

    @property
    def gap(self):
        return self.rate - self.lower_bound


def _ba(px, dist, beta, q0=None, tol=1e-10, max_iter=100_000, raise_on_cap=True):
    """Blahut-Arimoto iteration at inverse slope ``beta >= 0`` on support rows."""
    nx, ny = dist.shape
    dmin = dist.min(axis=1, keepdims=True)
    # Shifting each row by its minimum leaves the conditional unchanged and
    # keeps the largest entry of every row of A equal to 1.
    A = np.exp(-beta * (dist - dmin))
    AD = A * dist
    shift = float(px @ dmin[:, 0])
    q = np.full(ny, 1.0 / ny)
    if q0 is not None:
        # Keep every symbol alive: a warm start that has collapsed onto a
        # few outputs would otherwise take very long to leave them.
        q = (1.0 - WARM_START_MIX) * np.asarray(q0, dtype=np.float64) + WARM_START_MIX * q
    prev = np.inf
    converged = False
    it = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        while it < max_iter:
            it += 1
            Z = A @ q
            w = px / Z
            c = A.T @ w
            D = float(w @ (AD @ q))
            q_new = q * c
            logc = np.log(np.where(c > 0, c, 1.0))
            base = -beta * (D - shift) - float(px @ np.log(Z))
            # Mutual information of the current conditional A q / Z, whose
            # output marginal is q * c.
            rate = max(base - float(q_new[c > 0] @ logc[c > 0]), 0.0)
            lower = base - float(np.max(np.where(c > 0, logc, -np.inf)))
            P_q = q
            q = q_new / q_new.sum()
            # rate - lower bounds the suboptimality of the current kernel;
            # on large alphabets it closes slowly, so a stalled rate also stops.
            if rate - lower <= tol or abs(rate - prev) < tol:
                converged = True
                break
            prev = rate
    P = A * P_q / (A @ P_q)[:, None]
    result = BAResult(rate, D, -beta, P, q, it, max(lower, 0.0))
    if not converged and raise_on_cap:
        raise ConvergenceError(f"Blahut-Arimoto did not converge in {max_iter} iterations", result)
    return result


def blahut_arimoto(instance, slope, tol=1e-10, max_iter=100_000):
    """Rate-distortion point with Lagrange slope ``slope <= 0``.

    Parameters
    ----------
    instance : RdInstance
    slope : float
        Slope ``dR/dD`` of the curve at the returned point, ``<= 0``.
    tol : float, default=1e-10
        Stop when the rate changes by less than ``tol`` between iterations.
    max_iter : int, default=100000

    Returns
    -------
    BAResult

    Raises
    ------
    ConvergenceError
        At ``max_iter``; the last iterate is attached as ``.result``.
    """
    if slope > 0:
        raise ValueError("slope must be <= 0")
    support = instance.px > 0
    res = _ba(instance.px[support], instance.distortion[support], -slope, tol=tol, max_iter=max_iter)
    full = np.zeros((instance.px.shape[0], instance.distortion.shape[1]))
    full[support] = res.conditional
    full[~support] = res.marginal
    res.conditional = full
    return res


@dataclass
class _Source:
    weight: float
    px: np.ndarray
    dist: np.ndarray


@dataclass
class _SlopePoint:
    beta: float
    distortion: float
    rate: float
    qs: list


def _evaluate(sources, beta, qs, tol, max_iter):
    rate = 0.0
    dist = 0.0
    new_qs = []
    for src, q0 in zip(sources, qs):
        res = _ba(src.px, src.dist, beta, q0, tol, max_iter, raise_on_cap=False)
        rate += src.weight * res.rate
        dist += src.weight * res.distortion
        new_qs.append(res.marginal)
    return _SlopePoint(beta, dist, rate, new_qs)


def _solve_shared_slope(sources, target, tol=1e-12, max_iter=100_000, max_bisect=200):
    """Minimum weighted rate subject to a single averaged distortion constraint.

    The constraint is ``sum_u w_u E[d_u] <= target``. By Lagrangian
    duality the optimum is reached with one slope shared by all sources;
    the slope is found by Brent's method in log-space, and the rate at the
    target is interpolated linearly between the bracketing points, which
    is exact on the straight segments of the curve.
    """
    d_min = sum(s.weight * float(s.px @ s.dist.min(axis=1)) for s in sources)
    d_max = sum(s.weight * float(np.min(s.px @ s.dist)) for s in sources)
    scale = max(max(float(np.ptp(s.dist)) for s in sources), 1e-300)
    slack = 1e-12 * max(scale, abs(d_min), abs(d_max))
    if target >= d_max - slack:
        return 0.0
    if target < d_min - slack:
        raise InfeasibleError(
            f"infeasible: distortion target {target!r} is below the minimum achievable {d_min!r}"
        )
    qs = [None] * len(sources)
    # Start near the slope scale of the target; tiny slopes converge slowly.
    beta = 1.0 / max(target - d_min, 1e-9 * scale)
    point = _evaluate(sources, beta, qs, tol, max_iter)
    hi = lo = None
    beta_cap = 1e9 / scale
    if point.distortion <= target:
        hi = point
        while True:
            beta /= 2.0
            point = _evaluate(sources, beta, hi.qs, tol, max_iter)
            if point.distortion > target:
                lo = point
                break
            hi = point
            if beta < 1e-12 / scale:
                return hi.rate
    else:
        lo = point
        while True:
            beta *= 2.0
            point = _evaluate(sources, beta, lo.qs, tol, max_iter)
            if point.distortion <= target:
                hi = point
                break
            lo = point
            if beta > beta_cap:
                # The target sits at the zero-slope end; the limit point is
                # the best achievable estimate.
                return point.rate
    state = {"lo": lo, "hi": hi}

    def excess(log_beta):
        ref = state["hi"] if abs(math.log(state["hi"].beta) - log_beta) < abs(
            math.log(state["lo"].beta) - log_beta) else state["lo"]
        pt = _evaluate(sources, math.exp(log_beta), ref.qs, tol, max_iter)
        if pt.distortion > target:
            state["lo"] = pt
        else:
            state["hi"] = pt
        return pt.distortion - target

    brentq(excess, math.log(lo.beta), math.log(hi.beta), xtol=1e-13, rtol=1e-13,
           maxiter=max_bisect)
    lo, hi = state["lo"], state["hi"]
    span = lo.distortion - hi.distortion
    if span <= 0 or hi.distortion == target:
        return hi.rate
    frac = (lo.distortion - target) / span
    return lo.rate + frac * (hi.rate - lo.rate)


def rd_at_distortion(instance, target=None, tol=1e-10):
    """Rate ``R(D)`` of ``instance`` at distortion ``target``.

    Parameters
    ----------
    instance : RdInstance
    target : float, optional
        Defaults to ``instance.target``.
    tol : float, default=1e-10
        Blahut-Arimoto stopping tolerance on the rate. Tighter values can
        cost many thousands of iterations per slope on large alphabets.

    Raises
    ------
    InfeasibleError
        If ``target`` is below the smallest achievable distortion.
    """
    target = instance.target if target is None else target
    if target is None:
        raise ValueError("no distortion target given")
    support = instance.px > 0
    src = _Source(1.0, instance.px[support], instance.distortion[support])
    return _solve_shared_slope([src], float(target), tol)


@dataclass(frozen=True)
class AlgorithmRdInstance:
    """Finite learning algorithm and compressed hypothesis alphabet.

    Parameters
    ----------
    joint : array of shape (n_s, n_w)
        Joint distribution ``Q`` of the dataset and the hypothesis.
    gen : array of shape (n_s, n_w)
        Generalization error ``gen(s, w)`` of each hypothesis on each dataset.
    gen_hat : array of shape (n_s, n_what)
        Generalization error of each compressed hypothesis.
    epsilon : float
        Allowed loss in expected generalization error.
    """

    joint: np.ndarray
    gen: np.ndarray
    gen_hat: np.ndarray
    epsilon: float

    def __post_init__(self):
        joint = check_pmf(self.joint, "joint")
        gen = np.asarray(self.gen, dtype=np.float64)
        gen_hat = np.asarray(self.gen_hat, dtype=np.float64)
        if joint.ndim != 2 or gen.shape != joint.shape:
            raise ValueError("joint and gen must be 2-D arrays of equal shape")
        if gen_hat.ndim != 2 or gen_hat.shape[0] != joint.shape[0]:
            raise ValueError("gen_hat must have shape (n_s, n_what)")
        if not (np.all(np.isfinite(gen)) and np.all(np.isfinite(gen_hat))):
            raise ValueError("gen tables must be finite")
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "gen", gen)
        object.__setattr__(self, "gen_hat", gen_hat)

    def as_conditional(self):
        """The same problem with a trivial one-value conditioning variable."""
        return ConditionalRdInstance(self.joint[None], self.gen[None], self.gen_hat[None], self.epsilon)


@dataclass(frozen=True)
class ConditionalRdInstance:
    """Conditional compressibility problem for one client.

    ``u`` indexes the hypotheses of the other clients, ``s`` the client's
    dataset (or a single sample) and ``w`` its own hypothesis.

    Parameters
    ----------
    joint : array of shape (n_u, n_s, n_w) or (n_u, n_s)
        Joint distribution of ``(u, s, w)``.
    gen_agg : array of the same shape as ``joint``
        Generalization error of the aggregate hypothesis on ``s``.
    gen_hat : array of shape (n_u, n_s, n_what)
        Generalization error of each compressed hypothesis on ``s`` given ``u``.
    epsilon : float
    """

    joint: np.ndarray
    gen_agg: np.ndarray
    gen_hat: np.ndarray
    epsilon: float

    def __post_init__(self):
        joint = check_pmf(self.joint, "joint")
        gen_agg = np.asarray(self.gen_agg, dtype=np.float64)
        gen_hat = np.asarray(self.gen_hat, dtype=np.float64)
        if joint.ndim == 2:
            joint = joint[:, :, None]
            gen_agg = gen_agg[:, :, None]
        if joint.ndim != 3 or gen_agg.shape != joint.shape:
            raise ValueError("joint and gen_agg must have equal shape (n_u, n_s[, n_w])")
        if gen_hat.ndim != 3 or gen_hat.shape[:2] != joint.shape[:2]:
            raise ValueError("gen_hat must have shape (n_u, n_s, n_what)")
        if not (np.all(np.isfinite(gen_agg)) and np.all(np.isfinite(gen_hat))):
            raise ValueError("gen tables must be finite")
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "gen_agg", gen_agg)
        object.__setattr__(self, "gen_hat", gen_hat)

    def with_joint(self, joint):
        return ConditionalRdInstance(np.asarray(joint).reshape(self.joint.shape), self.gen_agg,
                                     self.gen_hat, self.epsilon)


def conditional_algorithm_rd(instance, tol=1e-12):
    """Conditional compressibility rate of one client.

    Minimizes ``sum_u Q(u) I(S; W_hat | U = u)`` over kernels
    ``P(w_hat | s, u)`` subject to the single averaged constraint
    ``E[gen_agg] - E[gen_hat(S, W_hat)] <= epsilon``. Each conditioning
    value is a rate-distortion problem with distortion ``-gen_hat``; the
    averaged constraint couples them through one shared slope.

    Raises
    ------
    InfeasibleError
        If no kernel meets the constraint.
    """
    joint_us = instance.joint.sum(axis=2)
    expected_gen = float(np.sum(instance.joint * instance.gen_agg))
    target = instance.epsilon - expected_gen
    sources = []
    for u in range(joint_us.shape[0]):
        pu = joint_us[u].sum()
        if pu <= 0:
            continue
        ps = joint_us[u] / pu
        keep = ps > 0
        sources.append(_Source(pu, ps[keep], -instance.gen_hat[u][keep]))
    return _solve_shared_slope(sources, target, tol)


def algorithm_rd(instance, tol=1e-12):
    """Compressibility rate of a finite learning algorithm.

    Reduces to a standard rate-distortion problem over the dataset with
    distortion ``-gen_hat(s, w_hat)`` at level ``epsilon - E_Q[gen(S, W)]``.

    Raises
    ------
    InfeasibleError
        If no kernel meets the constraint.
    """
    ps = instance.joint.sum(axis=1)
    target = instance.epsilon - float(np.sum(instance.joint * instance.gen))
    keep = ps > 0
    return _solve_shared_slope([_Source(1.0, ps[keep], -instance.gen_hat[keep])], target, tol)


def _compositions(total, parts):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield out


@dataclass
class RobustRdResult:
    """Largest conditional rate found over a lattice inside a KL ball.

    The value is a lower estimate of the supremum over the ball; refining
    the lattice (multiplying ``resolution``) can only increase it.
    """

    rate: float
    rate_at_base: float
    argmax_joint: np.ndarray
    resolution: int
    n_candidates: int
    radius: float


def _kl(q, p):
    mask = q > 0
    return float(np.sum(q[mask] * np.log(q[mask] / p[mask])))


def robust_rd(base, delta, resolution=4, max_atoms=12, max_candidates=200_000, tol=1e-12):
    """Search the KL ball ``{Q : KL(Q || P) <= log(1/delta)}`` for the largest rate.

    Candidates are the base distribution ``P`` and every lattice point with
    denominator ``resolution`` on the support of ``P`` that lies inside the
    ball. Each candidate keeps the generalization tables of ``base`` and
    changes only the joint distribution.

    Parameters
    ----------
    base : ConditionalRdInstance or AlgorithmRdInstance
    delta : float
        Confidence level in ``(0, 1)``; the radius is ``log(1/delta)``.
    resolution : int, default=4
        Lattice denominator.
    max_atoms : int, default=12
        Largest support of ``P`` accepted.

    Returns
    -------
    RobustRdResult
        ``rate`` is ``inf`` if some candidate makes the constraint infeasible.
    """
    if isinstance(base, AlgorithmRdInstance):
        base = base.as_conditional()
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    p = base.joint.reshape(-1)
    support = np.flatnonzero(p > 0)
    k = support.size
    if k > max_atoms:
        raise ValueError(f"support too large: {k} atoms exceeds the cap of {max_atoms}")
    n_lattice = math.comb(resolution + k - 1, k - 1)
    if n_lattice > max_candidates:
        raise ValueError(f"lattice has {n_lattice} points, above max_candidates={max_candidates}")
    radius = math.log(1.0 / delta)
    rate_at_base = conditional_algorithm_rd(base, tol)
    best_rate, best_q = rate_at_base, p.copy()
    count = 1
    for counts in _compositions(resolution, k):
        q = np.zeros_like(p)
        q[support] = np.asarray(counts, dtype=np.float64) / resolution
        if _kl(q, p) > radius + 1e-12:
            continue
        count += 1
        try:
            rate = conditional_algorithm_rd(base.with_joint(q), tol)
        except InfeasibleError:
            rate = math.inf
        if rate > best_rate:
            best_rate, best_q = rate, q
    return RobustRdResult(best_rate, rate_at_base, best_q.reshape(base.joint.shape), resolution, count, radius)


def _default_aggregate(values):
    return np.mean(np.asarray(values, dtype=np.float64), axis=0)


@dataclass
class FiniteDistributedToy:
    """A distributed learning algorithm small enough to enumerate.

    Each of ``K`` clients receives ``n`` i.i.d. symbols from ``mu``, picks a
    local hypothesis from ``w_values`` with probability
    ``local_kernel[s, w]`` (``s`` is the lexicographic index of the client's
    dataset in ``range(n_z) ** n``), and the server forms the aggregate
    ``aggregate([w_1, ..., w_K])``.

    Parameters
    ----------
    mu : array of shape (n_z,)
    n, K : int
    local_kernel : array of shape (n_z ** n, n_w)
    w_values : array of shape (n_w,) or (n_w, dim)
    loss : callable
        ``loss(z, w_bar)`` for a symbol index ``z`` and an aggregate value.
    aggregate : callable, default=mean
    """

    mu: np.ndarray
    n: int
    K: int
    local_kernel: np.ndarray
    w_values: np.ndarray
    loss: Callable
    aggregate: Callable = field(default=_default_aggregate)

    def __post_init__(self):
        self.mu = check_pmf(self.mu, "mu")
        self.local_kernel = np.asarray(self.local_kernel, dtype=np.float64)
        self.w_values = np.asarray(self.w_values, dtype=np.float64)
        nz = self.mu.shape[0]
        if self.local_kernel.shape[0] != nz**self.n or self.local_kernel.shape[1] != self.w_values.shape[0]:
            raise ValueError("local_kernel must have shape (n_z ** n, n_w)")
        for row in self.local_kernel:
            check_pmf(row, "local_kernel row")


@dataclass
class FiniteToyBounds:
    """Exact rate-distortion bounds of an enumerated distributed algorithm.

    ``term_a`` averages per-sample rates of the aggregate,
    ``term_b`` uses per-client conditional rates (worst client per sample
    position) and ``bound`` is their minimum. ``dataset_*`` are the looser
    variants that compress whole datasets instead of single samples.
    """

    term_a: float
    term_b: float
    bound: float
    dataset_a: float
    dataset_b: float
    dataset_bound: float
    rates_a: np.ndarray
    rates_b: np.ndarray
    mutual_informations: np.ndarray
    aggregate_values: np.ndarray


def _enumerate(toy):
    nz = toy.mu.shape[0]
    datasets = list(itertools.product(range(nz), repeat=toy.n))
    p_data = np.array([np.prod(toy.mu[list(s)]) for s in datasets])
    nw = toy.w_values.shape[0]
    # Aggregate alphabet, keyed by the rounded aggregate value.
    w_tuples = list(itertools.product(range(nw), repeat=toy.K))
    agg_index = {}
    agg_values = []
    agg_of = np.empty(len(w_tuples), dtype=np.int64)
    for idx, wt in enumerate(w_tuples):
        value = np.atleast_1d(toy.aggregate([toy.w_values[w] for w in wt]))
        key = tuple(np.round(value, 12))
        if key not in agg_index:
            agg_index[key] = len(agg_values)
            agg_values.append(value)
        agg_of[idx] = agg_index[key]
    agg_values = np.array(agg_values)
    n_agg = len(agg_values)
    loss_table = np.array([[toy.loss(z, _unwrap(a)) for a in agg_values] for z in range(nz)])
    pop = toy.mu @ loss_table
    return datasets, p_data, w_tuples, agg_of, agg_values, n_agg, loss_table, pop


def _unwrap(value):
    return value[0] if value.shape == (1,) else value


def finite_toy_bounds(toy, sigma, epsilon, tol=1e-12):
    """Evaluate the per-sample and per-client rate-distortion bounds exactly.

    With ``RD_ij`` the rate of the pair (sample ``j`` of client ``i``,
    aggregate) and ``RD_ij^cond`` the conditional rate of the same sample
    given the other clients' hypotheses, the bounds are::

        term_a = (1/(n K)) sum_ij sqrt(2 sigma^2 RD_ij) + epsilon
        term_b = (1/n) sum_j sqrt(2 sigma^2 max_i RD_ij^cond) + epsilon

    At ``epsilon = 0`` the rates are at most the corresponding mutual
    informations, which are returned for comparison.

    Raises
    ------
    InfeasibleError
        If any rate-distortion subproblem is infeasible.
    """
    n, K = toy.n, toy.K
    nz = toy.mu.shape[0]
    nw = toy.w_values.shape[0]
    datasets, p_data, w_tuples, agg_of, agg_values, n_agg, loss_table, pop = _enumerate(toy)
    n_data = len(datasets)
    # Client-level joint of (dataset, local hypothesis).
    client = p_data[:, None] * toy.local_kernel
    sample_gen = pop[None, :] - loss_table  # (n_z, n_agg)
    emp_loss = np.array([[loss_table[list(s), a].mean() for a in range(n_agg)] for s in datasets])
    dataset_gen = pop[None, :] - emp_loss  # (n_data, n_agg)

    rates_a = np.zeros((K, n))
    mis = np.zeros((K, n))
    rates_b = np.zeros((K, n))
    for i in range(K):
        # joint over (dataset of client i, w tuple)
        joint_sw = np.zeros((n_data, len(w_tuples)))
        for t, wt in enumerate(w_tuples):
            others = np.prod([client[:, w].sum() for k, w in enumerate(wt) if k != i])
            joint_sw[:, t] = client[:, wt[i]] * others
        for j in range(n):
            z_of = np.array([s[j] for s in datasets])
            joint_za = np.zeros((nz, n_agg))
            np.add.at(joint_za, (z_of[:, None], agg_of[None, :]), joint_sw)
            mis[i, j] = mutual_information(joint_za)
            inst = AlgorithmRdInstance(joint_za, sample_gen, sample_gen, epsilon)
            rates_a[i, j] = algorithm_rd(inst, tol)
            # Conditional on the other clients' hypotheses.
            u_tuples = list(itertools.product(range(nw), repeat=K - 1))
            u_index = {u: k for k, u in enumerate(u_tuples)}
            joint_u = np.zeros((len(u_tuples), nz, nw))
            gen_agg = np.zeros((len(u_tuples), nz, nw))
            for t, wt in enumerate(w_tuples):
                u = u_index[wt[:i] + wt[i + 1:]]
                np.add.at(joint_u[u], (z_of, wt[i]), joint_sw[:, t])
                gen_agg[u, :, wt[i]] = sample_gen[:, agg_of[t]]
            gen_hat = np.broadcast_to(sample_gen, (len(u_tuples), nz, n_agg))
            rates_b[i, j] = conditional_algorithm_rd(
                ConditionalRdInstance(joint_u, gen_agg, gen_hat, epsilon), tol
            )
    two_s2 = 2.0 * sigma**2
    term_a = float(np.sum(np.sqrt(two_s2 * rates_a)) / (n * K) + epsilon)
    term_b = float(np.sum(np.sqrt(two_s2 * rates_b.max(axis=0))) / n + epsilon)

    # Whole-dataset variants.
    all_data = list(itertools.product(range(n_data), repeat=K))
    joint_full = np.zeros((len(all_data), n_agg))
    for d_idx, ds in enumerate(all_data):
        for t, wt in enumerate(w_tuples):
            prob = np.prod([client[ds[k], wt[k]] for k in range(K)])
            joint_full[d_idx, agg_of[t]] += prob
    gen_full = np.array([np.mean([dataset_gen[ds[k]] for k in range(K)], axis=0) for ds in all_data])
    dataset_rate_a = algorithm_rd(AlgorithmRdInstance(joint_full, gen_full, gen_full, epsilon), tol)
    dataset_a = math.sqrt(two_s2 * dataset_rate_a / (n * K)) + epsilon
    dataset_rates_b = []
    for i in range(K):
        u_tuples = list(itertools.product(range(nw), repeat=K - 1))
        u_index = {u: k for k, u in enumerate(u_tuples)}
        joint_u = np.zeros((len(u_tuples), n_data, nw))
        gen_agg = np.zeros((len(u_tuples), n_data, nw))
        for t, wt in enumerate(w_tuples):
            others = np.prod([client[:, w].sum() for k, w in enumerate(wt) if k != i])
            u = u_index[wt[:i] + wt[i + 1:]]
            joint_u[u, :, wt[i]] += client[:, wt[i]] * others
            gen_agg[u, :, wt[i]] = dataset_gen[:, agg_of[t]]
        gen_hat = np.broadcast_to(dataset_gen, (len(u_tuples), n_data, n_agg))
        dataset_rates_b.append(conditional_algorithm_rd(ConditionalRdInstance(joint_u, gen_agg, gen_hat, epsilon), tol))
    dataset_b = math.sqrt(two_s2 * max(dataset_rates_b) / n) + epsilon
    return FiniteToyBounds(
        term_a=term_a,
        term_b=term_b,
        bound=min(term_a, term_b),
        dataset_a=dataset_a,
        dataset_b=dataset_b,
        dataset_bound=min(dataset_a, dataset_b),
        rates_a=rates_a,
        rates_b=rates_b,
        mutual_informations=mis,
        aggregate_values=agg_values,
    )
