"""PageRank power iteration, its label-spreading form, and the variational objective."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import StationaryDistribution, normalized_adjacency_apply, stationary_distribution, transition_apply

DEFAULT_GAMMA = 0.15
DEFAULT_MAX_ITER = 10_000
DEFAULT_TOL_PER_VERTEX = 1e-6


@dataclass(frozen=True)
class PrConfig:
    """PageRank parameters.

    ``teleport=None`` means the uniform vector and ``tol=None`` means
    ``n * 1e-6``; both are resolved against a graph by :meth:`resolve`.
    """

    gamma: float = DEFAULT_GAMMA
    teleport: np.ndarray | None = None
    tol: float | None = None
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.teleport is not None:
            v = np.asarray(self.teleport, dtype=float)
            if v.ndim != 1 or np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
                raise ValueError("teleport must be a nonnegative vector summing to 1")
            object.__setattr__(self, "teleport", v)

    def resolve(self, n):
        """Return a copy with the teleport vector and tolerance made explicit for ``n`` vertices."""
        v = self.teleport
        if v is None:
            v = np.full(n, 1.0 / n)
        elif v.shape != (n,):
            raise ValueError(f"teleport has length {v.size}, graph has {n} vertices")
        tol = self.tol if self.tol is not None else n * DEFAULT_TOL_PER_VERTEX
        return replace(self, teleport=v, tol=tol)


@dataclass
class SolverReport:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    fairness_violation: float | None = None
    objective_trace: list | None = None

    def summary(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": self.residuals[-1] if self.residuals else None,
            "wall_time": self.wall_time,
            "fairness_violation": self.fairness_violation,
            "stopping_norm": "l1",
        }


def pagerank_step(graph, config, x):
    """One iteration ``(1 - gamma) P x + gamma v``; ``config`` must be resolved."""
    return (1.0 - config.gamma) * transition_apply(graph, x) + config.gamma * config.teleport


def _iterate(step, x0, tol, max_iter, callback=None):
    report = SolverReport()
    start = time.perf_counter()
    x = x0
    if callback is not None:
        callback(0, x)
    for t in range(1, max_iter + 1):
        x_new = step(x)
        res = float(np.abs(x_new - x).sum())
        x = x_new
        report.residuals.append(res)
        report.iterations = t
        if callback is not None:
            callback(t, x)
        if res <= tol:
            report.converged = True
            break
    report.wall_time = time.perf_counter() - start
    return x, report


def power_iterate(graph, config=None, callback=None):
    """Standard PageRank by fixed-point iteration from ``x0 = v``.

    Stops once the l1 change between successive iterates is at most
    ``config.tol``.  Hitting ``max_iter`` is reported through
    ``report.converged`` rather than raised.
    """
    cfg = (config or PrConfig()).resolve(graph.n)
    return _iterate(lambda x: pagerank_step(graph, cfg, x), cfg.teleport.copy(), cfg.tol, cfg.max_iter, callback)


def label_spread_iterate(graph, config=None):
    """PageRank on an undirected graph computed as label spreading.

    Iterates ``z <- (1 - gamma) A_norm z + gamma Pi^-1/2 v`` and maps the
    result back with ``Pi^1/2``.  The residual is measured on the
    back-transformed iterates so the stopping rule matches
    :func:`power_iterate`.
    """
    if graph.directed:
        raise ValueError("label spreading requires an undirected graph")
    cfg = (config or PrConfig()).resolve(graph.n)
    root_pi = np.sqrt(stationary_distribution(graph).pi)
    v_bar = cfg.teleport / root_pi
    g = cfg.gamma

    report = SolverReport()
    start = time.perf_counter()
    z = v_bar.copy()
    for t in range(1, cfg.max_iter + 1):
        z_new = (1.0 - g) * normalized_adjacency_apply(graph, z) + g * v_bar
        res = float(np.abs(root_pi * (z_new - z)).sum())
        z = z_new
        report.residuals.append(res)
        report.iterations = t
        if res <= cfg.tol:
            report.converged = True
            break
    report.wall_time = time.perf_counter() - start
    return root_pi * z, report


def _pi_vector(graph, pi):
    if pi is None:
        pi = stationary_distribution(graph)
    if isinstance(pi, StationaryDistribution):
        pi = pi.pi
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0):
        raise ValueError("stationary distribution must be strictly positive")
    return pi


def _check_undirected(graph):
    if graph.directed:
        raise ValueError("the variational objective is only evaluated on undirected graphs")
    if np.any(graph.out_degree == 0):
        raise ValueError("zero-degree vertex: Pi^-1 is undefined")


def pagerank_residual(graph, config, x):
    """``r(x) = [I - (1 - gamma) P] x - gamma v``; zero exactly at the PageRank vector."""
    cfg = config.resolve(graph.n)
    x = np.asarray(x, dtype=float)
    return x - pagerank_step(graph, cfg, x)


def objective_f(graph, pi, config, x):
    """Smoothness-plus-proximity objective whose unconstrained minimizer is PageRank.

    ``f(x) = (1-g)/2 x' Pi^-1 (I - P) x + g/2 ||Pi^-1/2 (x - v)||^2``.
    """
    _check_undirected(graph)
    cfg = config.resolve(graph.n)
    pi = _pi_vector(graph, pi)
    x = np.asarray(x, dtype=float)
    lrw_x = x - transition_apply(graph, x)
    d = x - cfg.teleport
    return 0.5 * (1.0 - cfg.gamma) * float(np.dot(x / pi, lrw_x)) + 0.5 * cfg.gamma * float(np.dot(d / pi, d))


def gradient_f(graph, pi, config, x):
    """Analytic gradient ``Pi^-1 r(x)`` of :func:`objective_f`."""
    _check_undirected(graph)
    pi = _pi_vector(graph, pi)
    return pagerank_residual(graph, config, x) / pi
