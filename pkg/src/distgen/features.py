"""Random Fourier features and Johnson-Lindenstrauss projections."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .seeding import make_rng

__all__ = [
    "RandomFourierFeatures",
    "JLProjection",
    "rff_transform",
    "sample_jl",
    "jl_from_matrix",
    "jl_project",
]


class RandomFourierFeatures(TransformerMixin, BaseEstimator):
    """Random Fourier feature map for the Gaussian kernel.

    Approximates ``k(x, x') = exp(-gamma * ||x - x'||^2)`` by
    ``phi(x) = sqrt(2/p) * cos(W x + b)`` with ``W_ij ~ N(0, 2 gamma)`` and
    ``b_j ~ U[0, 2 pi)``, so that ``<phi(x), phi(x')>`` is an unbiased
    estimate of the kernel. Every coordinate lies in
    ``[-sqrt(2/p), sqrt(2/p)]``, hence ``||phi(x)|| <= sqrt(2)``.

    Parameters
    ----------
    gamma : float, default=0.01
        Kernel bandwidth.
    n_components : int, default=2000
        Output dimension ``p``.
    random_state : int, default=0
        Seed for the frequencies and phases.

    Attributes
    ----------
    frequencies_ : ndarray of shape (n_components, n_features)
    phases_ : ndarray of shape (n_components,)
    """

    def __init__(self, gamma=0.01, n_components=2000, random_state=0):
        self.gamma = gamma
        self.n_components = n_components
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        if self.gamma <= 0 or self.n_components < 1:
            raise ValueError("gamma must be positive and n_components >= 1")
        rng = make_rng(self.random_state)
        d = X.shape[1]
        self.frequencies_ = np.sqrt(2.0 * self.gamma) * rng.standard_normal(
            (self.n_components, d)
        )
        self.phases_ = rng.uniform(0.0, 2.0 * np.pi, size=self.n_components)
        self.n_features_in_ = d
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"dimension mismatch: expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        proj = X @ self.frequencies_.T
        proj += self.phases_
        np.cos(proj, out=proj)
        proj *= np.sqrt(2.0 / self.n_components)
        return proj


def rff_transform(rff, x):
    """Map one vector (or a batch of rows) through a fitted RFF map."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return rff.transform(x[None, :])[0]
    return rff.transform(x)


class JLProjection(TransformerMixin, BaseEstimator):
    """Dense Gaussian Johnson-Lindenstrauss projection.

    Stores a ``(n_features, n_components)`` matrix ``A`` with i.i.d.
    ``N(0, 1/m)`` entries and maps ``x -> x @ A``, so that
    ``E ||x A||^2 = ||x||^2``. This is the compression map used in the
    distortion analysis, not a generic dimensionality reducer, so the
    scaling is fixed rather than tuned.

    Parameters
    ----------
    n_components : int
        Target dimension ``m``.
    random_state : int, default=0
        Seed for the matrix entries.

    Attributes
    ----------
    components_ : ndarray of shape (n_features, n_components)
    """

    def __init__(self, n_components, random_state=0):
        self.n_components = n_components
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        return self._draw(X.shape[1])

    def _draw(self, d):
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        rng = make_rng(self.random_state)
        self.components_ = rng.standard_normal((d, self.n_components)) / np.sqrt(
            self.n_components
        )
        self.n_features_in_ = d
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.n_features_in_:
            raise ValueError(
                f"dimension mismatch: expected {self.n_features_in_} features, got {X.shape[-1]}"
            )
        return X @ self.components_


def sample_jl(D, m, seed):
    """Draw a fitted :class:`JLProjection` from ``R^D`` to ``R^m``."""
    return JLProjection(n_components=m, random_state=seed)._draw(D)


def jl_from_matrix(A):
    """Wrap an explicit ``(D, m)`` matrix as a fitted :class:`JLProjection`."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("the projection matrix must be 2-D")
    jl = JLProjection(n_components=A.shape[1])
    jl.components_ = A
    jl.n_features_in_ = A.shape[0]
    return jl


def jl_project(jl, x):
    """Project a vector (or rows of a matrix) with a fitted JL matrix."""
    return jl.transform(x)
