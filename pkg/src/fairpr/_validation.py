"""Input coercion shared by the estimators and the CLI."""
from __future__ import annotations

import numpy as np

from .graph import CompressedGraph, GroupPartition
from .projection import MinFair, SumFair, SumMinFair


def check_graph(graph):
    if isinstance(graph, CompressedGraph):
        return graph
    try:
        import networkx as nx
    except ImportError:  # pragma: no cover
        nx = None
    if nx is not None and isinstance(graph, nx.Graph):
        return CompressedGraph.from_networkx(graph)
    raise TypeError(f"expected a CompressedGraph or networkx graph, got {type(graph).__name__}")


def check_groups(groups, n, protected=None):
    """Coerce ``groups`` (a partition or per-vertex labels) into a :class:`GroupPartition`."""
    if isinstance(groups, GroupPartition):
        part = groups
    else:
        labels = np.asarray(groups)
        if labels.ndim != 1:
            raise ValueError("group labels must be 1-d")
        part = GroupPartition.from_labels(labels.tolist())
    if part.n != n:
        raise ValueError(f"groups cover {part.n} vertices, graph has {n}")
    if protected is not None:
        part = part.with_protected(protected)
    return part


def check_score_vector(x, n=None, name="scores"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-d")
    if n is not None and x.size != n:
        raise ValueError(f"{name} has length {x.size}, expected {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def make_spec(criterion, phi=None, alpha=None, protected=None):
    """Build a fairness specification from flat estimator parameters."""
    if criterion == "sum":
        if phi is None:
            raise ValueError("criterion 'sum' needs phi")
        return SumFair(tuple(np.atleast_1d(phi).tolist()))
    if criterion == "min":
        if alpha is None:
            raise ValueError("criterion 'min' needs alpha")
        return MinFair(tuple(np.atleast_1d(alpha).tolist()), protected)
    if criterion in ("sum-min", "sum_min"):
        if phi is None or alpha is None:
            raise ValueError("criterion 'sum-min' needs phi and alpha")
        return SumMinFair(tuple(np.atleast_1d(phi).tolist()), tuple(np.atleast_1d(alpha).tolist()), protected)
    raise ValueError(f"unknown criterion {criterion!r}; choose 'sum', 'min' or 'sum-min'")
