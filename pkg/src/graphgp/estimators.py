"""scikit-learn style wrappers around the kernel engine and the ridge classifier.

``GraphGPKernel`` is a transformer from node features to the transductive node
kernel of a fixed graph. ``KernelRidgeNodeClassifier`` follows the
``kernel="precomputed"`` convention: ``fit`` takes the train-train block and
``predict`` the test-train block.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidParameterError
from .graph import Graph, shortest_path_buckets
from .inference import one_hot, solve_ridge_system
from .kernels.params import HyperParams
from .kernels.positional import build_positional_covariance
from .kernels.sweep import SweepOptions, run_depth_sweep


class GraphGPKernel(BaseEstimator, TransformerMixin):
    """Infinite-width kernel of a ``depth``-layer graph network on a fixed graph.

    ``fit(X)`` builds the graph from ``adjacency`` and node features ``X`` and
    runs the layer recursion; ``transform`` returns the ``n x n`` node kernel.
    ``pe_kind`` and ``max_bucket`` configure Graphormer's positional covariance
    and shortest-path relation.
    """

    def __init__(self, adjacency=None, model="gcn", depth=2, activation="relu", layernorm=True,
                 alpha=0.5, pe_kind=None, pe_rank=None, max_bucket=None, sigma_b2=0.0,
                 self_loops=False):
        self.adjacency = adjacency
        self.model = model
        self.depth = depth
        self.activation = activation
        self.layernorm = layernorm
        self.alpha = alpha
        self.pe_kind = pe_kind
        self.pe_rank = pe_rank
        self.max_bucket = max_bucket
        self.sigma_b2 = sigma_b2
        self.self_loops = self_loops

    def fit(self, X, y=None):
        if self.adjacency is None:
            raise InvalidParameterError("GraphGPKernel needs an adjacency matrix")
        g = Graph(np.asarray(self.adjacency, dtype=float), np.asarray(X, dtype=float))
        hp = HyperParams(alpha=self.alpha, sigma_b2=self.sigma_b2)
        pe = None if self.pe_kind is None else build_positional_covariance(g, self.pe_kind, self.pe_rank, hp)
        relation = None if self.max_bucket is None else shortest_path_buckets(g, self.max_bucket)
        options = SweepOptions(activation=self.activation, layernorm=self.layernorm, pe=pe,
                               relation=relation, self_loops=self.self_loops)
        traj = run_depth_sweep(g, self.model, hp, self.depth, options)
        self.trajectory_ = traj
        self.kernel_ = traj[-1].values
        self.n_features_in_ = g.features.shape[1]
        return self

    def transform(self, X=None):
        check_is_fitted(self, "kernel_")
        if X is not None and np.shape(X)[0] != self.kernel_.shape[0]:
            raise InvalidParameterError("transform expects the features of the fitted graph")
        return np.array(self.kernel_)


class KernelRidgeNodeClassifier(BaseEstimator, ClassifierMixin):
    """Ridge regression on one-hot targets over a precomputed kernel."""

    def __init__(self, ridge=1e-2):
        self.ridge = ridge

    def fit(self, K, y):
        K = np.asarray(K, dtype=float)
        y = np.asarray(y)
        if K.shape != (y.size, y.size):
            raise InvalidParameterError(f"fit expects a square train kernel, got {K.shape} for {y.size} labels")
        self.classes_ = np.unique(y)
        self.dual_coef_ = solve_ridge_system(K, one_hot(y, self.classes_), float(self.ridge))
        return self

    def decision_function(self, K):
        check_is_fitted(self, "dual_coef_")
        return np.asarray(K, dtype=float) @ self.dual_coef_

    def predict(self, K):
        return self.classes_[np.argmax(self.decision_function(K), axis=1)]
