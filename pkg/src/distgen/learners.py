"""Losses and local learners: hinge-loss SGD for the linear SVM and one SGLD step."""

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .datasets import Dataset
from .exceptions import DivergenceError
from .seeding import make_rng

__all__ = [
    "loss_zero_one",
    "loss_margin",
    "empirical_risk",
    "population_risk_estimate",
    "SgdParams",
    "SgdResult",
    "sgd_train_svm",
    "HingeSGDClassifier",
    "SgldStepParams",
    "sgld_step",
    "surrogate_grad_logistic",
    "logistic_loss",
]


def _scores(X, y, w):
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if X.shape[-1] != w.shape[-1]:
        raise ValueError(f"dimension mismatch: x has {X.shape[-1]} entries, w has {w.shape[-1]}")
    return np.asarray(y) * (X @ w)


def loss_zero_one(X, y, w):
    """0-1 loss ``1{y <x, w> < 0}``; a zero score counts as correct.

    Accepts a single sample (``X`` 1-D, ``y`` scalar) or a batch of rows.
    """
    return (_scores(X, y, w) < 0).astype(np.int64)


def loss_margin(X, y, w, theta):
    """Margin loss ``1{y <x, w> < theta}``; ``theta = 0`` gives the 0-1 loss."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    return (_scores(X, y, w) < theta).astype(np.int64)


def empirical_risk(data, w, loss="zero_one", theta=0.0):
    """Average loss of ``w`` over ``data``.

    Parameters
    ----------
    data : Dataset
    w : ndarray of shape (d,)
    loss : {"zero_one", "margin"} or callable, default="zero_one"
        A callable is invoked as ``loss(X, y, w)`` and must return per-sample
        losses.
    theta : float, default=0.0
        Margin for ``loss="margin"``.
    """
    if data.n_samples == 0:
        raise ValueError("empirical risk of an empty dataset")
    if loss == "zero_one":
        values = loss_zero_one(data.X, data.y, w)
    elif loss == "margin":
        values = loss_margin(data.X, data.y, w, theta)
    elif callable(loss):
        values = np.asarray(loss(data.X, data.y, w), dtype=np.float64)
    else:
        raise ValueError(f"unknown loss {loss!r}")
    return float(np.mean(values))


def population_risk_estimate(test, w):
    """0-1 risk of ``w`` on a held-out set standing in for the population."""
    return empirical_risk(test, w, "zero_one")


@dataclass(frozen=True)
class SgdParams:
    """Hyperparameters of the hinge-loss SGD trainer.

    The learning-rate schedule multiplies the rate by ``lr_decay_factor``
    whenever the end-of-epoch training objective has failed to improve by
    at least ``no_improve_tol`` for ``no_improve_epochs`` consecutive
    epochs. ``improvement_rule="increase"`` switches to the alternative
    reading where an epoch counts as stalled when the objective did not
    *increase* by more than the tolerance over the previous epoch.
    """

    eta0: float = 0.01
    alpha: float = 1e-5
    batch_size: int = 1
    max_epochs: int = 200
    lr_decay_factor: float = 0.2
    no_improve_tol: float = 0.01
    no_improve_epochs: int = 10
    target_train_risk: float = 0.001
    improvement_rule: str = "decrease"
    seed: int = 0

    def __post_init__(self):
        if self.eta0 <= 0 or self.alpha < 0:
            raise ValueError("eta0 must be positive and alpha nonnegative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.no_improve_epochs < 1:
            raise ValueError("batch_size, max_epochs and no_improve_epochs must be >= 1")
        if not 0 < self.lr_decay_factor < 1:
            raise ValueError("lr_decay_factor must lie in (0, 1)")
        if self.no_improve_tol < 0 or self.target_train_risk < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.improvement_rule not in ("decrease", "increase"):
            raise ValueError("improvement_rule must be 'decrease' or 'increase'")
        if self.eta0 * self.alpha >= 1:
            raise ValueError("eta0 * alpha must be < 1 for the weight decay to be stable")

    def replace(self, **changes):
        values = asdict(self)
        values.update(changes)
        return SgdParams(**values)


@dataclass
class SgdResult:
    """Output of :func:`sgd_train_svm` with per-epoch traces."""

    w: np.ndarray
    n_epochs: int
    train_risk: float
    risk_trace: list = field(default_factory=list)
    loss_trace: list = field(default_factory=list)
    lr_trace: list = field(default_factory=list)
    reached_target: bool = False


def _objective(X, y, w, alpha):
    margins = y * (X @ w)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * alpha * (w @ w)), margins


def sgd_train_svm(shard, params=None):
    """Train a zero-bias linear SVM by minibatch SGD on the regularized hinge loss.

    Minimizes ``mean(max(0, 1 - y <x, w>)) + alpha/2 ||w||^2`` starting
    from ``w = 0``. Samples are reshuffled every epoch from the seed stream.
    Training stops after ``max_epochs`` or as soon as the training 0-1
    risk drops below ``target_train_risk``; if the target is never reached
    the achieved risk is recorded and the last iterate returned.

    Parameters
    ----------
    shard : Dataset
        Already feature-mapped inputs with labels in ``{-1, +1}``.
    params : SgdParams, optional

    Returns
    -------
    SgdResult

    Raises
    ------
    DivergenceError
        If the training objective becomes non-finite.
    """
    params = SgdParams() if params is None else params
    X = np.ascontiguousarray(shard.X, dtype=np.float64)
    y = np.asarray(shard.y, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot train on an empty shard")
    rng = make_rng(params.seed)
    b = params.batch_size
    eta = params.eta0
    decay = params.alpha
    # w is stored as scale * v so the L2 shrinkage costs O(1) per step.
    v = np.zeros(d)
    scale = 1.0
    result = SgdResult(w=v, n_epochs=0, train_risk=1.0)
    best_loss = np.inf
    prev_loss = np.inf
    stalled = 0
    for epoch in range(params.max_epochs):
        order = rng.permutation(n)
        shrink = 1.0 - eta * decay
        if b == 1:
            for i in order:
                xi = X[i]
                yi = y[i]
                active = yi * scale * xi.dot(v) < 1.0
                scale *= shrink
                if active:
                    v += (eta * yi / scale) * xi
                if scale < 1e-6:
                    v *= scale
                    scale = 1.0
        else:
            for start in range(0, n, b):
                idx = order[start:start + b]
                Xb = X[idx]
                yb = y[idx]
                active = yb * scale * (Xb @ v) < 1.0
                scale *= shrink
                if active.any():
                    v += (eta / (len(idx) * scale)) * (yb[active] @ Xb[active])
                if scale < 1e-6:
                    v *= scale
                    scale = 1.0
        w = scale * v
        loss, margins = _objective(X, y, w, decay)
        if not np.isfinite(loss):
            raise DivergenceError(f"divergence: non-finite training loss at epoch {epoch + 1}")
        risk = float(np.mean(margins < 0))
        result.risk_trace.append(risk)
        result.loss_trace.append(loss)
        result.lr_trace.append(eta)
        result.n_epochs = epoch + 1
        result.train_risk = risk
        if risk < params.target_train_risk:
            result.reached_target = True
            break
        if params.improvement_rule == "decrease":
            stalled = stalled + 1 if loss > best_loss - params.no_improve_tol else 0
        else:
            stalled = stalled + 1 if loss <= prev_loss + params.no_improve_tol else 0
        best_loss = min(best_loss, loss)
        prev_loss = loss
        if stalled >= params.no_improve_epochs:
            eta *= params.lr_decay_factor
            stalled = 0
    result.w = scale * v
    return result


class HingeSGDClassifier(ClassifierMixin, BaseEstimator):
    """Linear SVM without intercept trained by :func:`sgd_train_svm`.

    Labels must be ``-1``/``+1``. Parameters mirror :class:`SgdParams`.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    n_iter_ : int
        Number of epochs run.
    train_risk_ : float
        Final training 0-1 risk.
    risk_trace_, loss_trace_, lr_trace_ : list of float
        Per-epoch training 0-1 risk, objective and learning rate.
    """

    def __init__(
        self,
        eta0=0.01,
        alpha=1e-5,
        batch_size=1,
        max_epochs=200,
        lr_decay_factor=0.2,
        no_improve_tol=0.01,
        no_improve_epochs=10,
        target_train_risk=0.001,
        improvement_rule="decrease",
        random_state=0,
    ):
        self.eta0 = eta0
        self.alpha = alpha
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.lr_decay_factor = lr_decay_factor
        self.no_improve_tol = no_improve_tol
        self.no_improve_epochs = no_improve_epochs
        self.target_train_risk = target_train_risk
        self.improvement_rule = improvement_rule
        self.random_state = random_state

    def _sgd_params(self):
        return SgdParams(
            eta0=self.eta0,
            alpha=self.alpha,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            lr_decay_factor=self.lr_decay_factor,
            no_improve_tol=self.no_improve_tol,
            no_improve_epochs=self.no_improve_epochs,
            target_train_risk=self.target_train_risk,
            improvement_rule=self.improvement_rule,
            seed=self.random_state,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("labels must be -1 or +1")
        res = sgd_train_svm(Dataset(X, y), self._sgd_params())
        self.coef_ = res.w
        self.n_iter_ = res.n_epochs
        self.train_risk_ = res.train_risk
        self.risk_trace_ = res.risk_trace
        self.loss_trace_ = res.loss_trace
        self.lr_trace_ = res.lr_trace
        self.classes_ = np.array([-1, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        return check_array(X) @ self.coef_

    def predict(self, X):
        # A zero score is a correct prediction for either label under the
        # strict-inequality 0-1 loss; report it as +1.
        return np.where(self.decision_function(X) >= 0, 1, -1)


def logistic_loss(X, y, w):
    """Per-sample logistic loss ``log(1 + exp(-y <x, w>))``."""
    return np.logaddexp(0.0, -_scores(X, y, w))


def surrogate_grad_logistic(X, y, w):
    """Per-sample gradient of the logistic loss with respect to ``w``.

    Returns ``-y x sigmoid(-y <x, w>)``, shape ``(d,)`` for a single sample
    or ``(b, d)`` for a batch. The sigmoid is evaluated with
    :func:`scipy.special.expit`, which is stable for large scores.
    """
    X = np.asarray(X, dtype=np.float64)
    coef = -np.asarray(y, dtype=np.float64) * expit(-_scores(X, y, w))
    if X.ndim == 1:
        return coef * X
    return coef[:, None] * X


@dataclass(frozen=True)
class SgldStepParams:
    """Learning rate, inverse temperature and noise seed of one SGLD step.

    ``beta = inf`` disables the noise (plain gradient step).
    """

    eta: float
    beta: float
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0 or not self.beta > 0:
            raise ValueError("eta and beta must be positive")


def sgld_step(w_in, minibatch, params, surrogate_grad=surrogate_grad_logistic, noise=None):
    """One stochastic gradient Langevin step from ``w_in`` on a minibatch.

    Computes ``w_in - eta * mean_l grad(z_l, w_in) + sqrt(2 eta / beta) V``
    with ``V ~ N(0, I_d)`` drawn from ``params.seed`` unless ``noise`` is
    supplied.

    Parameters
    ----------
    w_in : ndarray of shape (d,)
    minibatch : Dataset
        The ``b`` samples the gradient is averaged over.
    params : SgldStepParams
    surrogate_grad : callable, default=surrogate_grad_logistic
        ``surrogate_grad(X, y, w)`` returning per-sample gradients ``(b, d)``.
    noise : ndarray of shape (d,), optional
        Fixed standard normal draw to use instead of sampling.

    Raises
    ------
    DivergenceError
        If the gradient is not finite.
    """
    w_in = np.asarray(w_in, dtype=np.float64)
    X, y = minibatch.X, minibatch.y
    grad = np.asarray(surrogate_grad(X, y, w_in), dtype=np.float64).reshape(X.shape[0], -1).mean(axis=0)
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient in SGLD step")
    if noise is None:
        noise = make_rng(params.seed).standard_normal(w_in.shape[0])
    return w_in - params.eta * grad + np.sqrt(2.0 * params.eta / params.beta) * noise
