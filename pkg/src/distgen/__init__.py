"""Generalization bounds and experiments for distributed learning.

Submodules
----------
datasets        IDX loading, standardization, synthetic tasks, sharding
features        random Fourier features and JL projections
learners        losses, hinge-loss SGD, SGLD step
distributed     one-round SVM averaging, federated SGLD, experiment sweeps
bounds          closed-form generalization bounds
ratedistortion  Blahut-Arimoto and algorithm rate-distortion solvers
compression     compressed-hypothesis construction and distortion checks
cli             command-line entry point
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"
