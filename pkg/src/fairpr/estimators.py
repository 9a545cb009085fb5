"""scikit-learn style wrappers around the solvers.

The estimators take a graph where scikit-learn would take ``X`` and the
per-vertex group labels where it would take ``y``.  Fitted results live
in trailing-underscore attributes.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_graph, check_groups, check_score_vector, make_spec
from .pagerank import DEFAULT_GAMMA, DEFAULT_MAX_ITER, PrConfig, power_iterate
from .projection import constraint_violation, project
from .solver import FairSolveConfig, solve


class PageRank(BaseEstimator):
    """Plain PageRank.

    Parameters
    ----------
    gamma : float, default=0.15
        Teleportation probability.
    tol : float or None
        l1 stopping threshold; ``None`` means ``n * 1e-6``.
    max_iter : int, default=10000
    teleport : array-like or None
        Teleportation distribution, uniform when ``None``.
    """

    def __init__(self, gamma=DEFAULT_GAMMA, tol=None, max_iter=DEFAULT_MAX_ITER, teleport=None):
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.teleport = teleport

    def _config(self):
        return PrConfig(self.gamma, self.teleport, self.tol, self.max_iter)

    def fit(self, graph, y=None):
        graph = check_graph(graph)
        self.scores_, self.report_ = power_iterate(graph, self._config())
        self.n_iter_ = self.report_.iterations
        self.converged_ = self.report_.converged
        self.n_features_in_ = graph.n
        return self

    def fit_transform(self, graph, y=None):
        return self.fit(graph, y).scores_


class FairRARI(PageRank):
    """Group-fair PageRank through projected PageRank iterations.

    ``criterion`` selects the fairness set: ``"sum"`` (group totals equal
    ``phi``), ``"min"`` (protected vertices get at least ``alpha`` of
    their group) or ``"sum-min"`` (both).  Protected sets come from the
    partition passed to :meth:`fit` unless ``protected`` is set.
    """

    def __init__(
        self,
        criterion="sum",
        phi=None,
        alpha=None,
        protected=None,
        gamma=DEFAULT_GAMMA,
        tol=None,
        max_iter=DEFAULT_MAX_ITER,
        teleport=None,
        n_jobs=None,
    ):
        super().__init__(gamma=gamma, tol=tol, max_iter=max_iter, teleport=teleport)
        self.criterion = criterion
        self.phi = phi
        self.alpha = alpha
        self.protected = protected
        self.n_jobs = n_jobs

    def fit(self, graph, groups):
        graph = check_graph(graph)
        part = check_groups(groups, graph.n)
        spec = make_spec(self.criterion, self.phi, self.alpha, self.protected)
        cfg = FairSolveConfig(spec=spec, pr=self._config(), n_jobs=self.n_jobs)
        self.scores_, self.report_ = solve(graph, part, cfg)
        self.spec_ = spec
        self.partition_ = part
        self.n_iter_ = self.report_.iterations
        self.converged_ = self.report_.converged
        self.n_features_in_ = graph.n
        return self

    def fit_transform(self, graph, groups):
        return self.fit(graph, groups).scores_


class FairProjector(TransformerMixin, BaseEstimator):
    """Map score vectors onto a fairness set; the post-processing baseline.

    :meth:`fit` records the partition, :meth:`transform` projects each
    row of ``X`` (or a single 1-d vector).
    """

    def __init__(self, criterion="sum", phi=None, alpha=None, protected=None):
        self.criterion = criterion
        self.phi = phi
        self.alpha = alpha
        self.protected = protected

    def fit(self, X=None, groups=None):
        if groups is None:
            raise ValueError("FairProjector.fit needs the group labels")
        n = np.shape(X)[-1] if X is not None else np.shape(getattr(groups, "assignment", groups))[0]
        self.partition_ = check_groups(groups, n)
        self.spec_ = make_spec(self.criterion, self.phi, self.alpha, self.protected)
        self.spec_.validate(self.partition_)
        self.n_features_in_ = n
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = np.asarray(X, dtype=float)
        rows = np.atleast_2d(X)
        out = np.vstack([
            project(check_score_vector(r, self.n_features_in_), self.spec_, self.partition_)[0] for r in rows
        ])
        return out[0] if X.ndim == 1 else out

    def violation(self, X):
        """Constraint gap of each row of ``X`` before projection."""
        check_is_fitted(self, "spec_")
        rows = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([constraint_violation(r, self.spec_, self.partition_) for r in rows])
