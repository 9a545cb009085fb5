"""Fair PageRank by projecting every PageRank step onto the fairness set."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .graph import stationary_distribution
from .pagerank import PrConfig, SolverReport, objective_f, pagerank_step
from .projection import Projector, constraint_violation


@dataclass(frozen=True)
class FairSolveConfig:
    spec: object
    pr: PrConfig = PrConfig()
    record_objective: bool = False
    n_jobs: int | None = None


def solve(graph, partition, config, callback=None):
    """Run ``x <- Proj_X((1 - gamma) P x + gamma v)`` from ``x0 = Proj_X(v)``.

    The loop stops when the l1 change of the projected iterate is at most
    ``tol``.  Exhausting ``max_iter`` returns the last (feasible) iterate
    with ``report.converged = False``.

    ``callback(t, x)`` is invoked with every projected iterate, starting
    from ``t = 0``.
    """
    if partition.n != graph.n:
        raise ValueError(f"partition covers {partition.n} vertices, graph has {graph.n}")
    cfg = config.pr.resolve(graph.n)
    proj = Projector(config.spec, partition, n_jobs=config.n_jobs)

    trace = None
    if config.record_objective and not graph.directed:
        pi = stationary_distribution(graph)
        trace = []

    report = SolverReport()
    start = time.perf_counter()
    x = proj(cfg.teleport)[0]
    if trace is not None:
        trace.append(objective_f(graph, pi, cfg, x))
    if callback is not None:
        callback(0, x)
    for t in range(1, cfg.max_iter + 1):
        x_new = proj(pagerank_step(graph, cfg, x))[0]
        res = float(np.abs(x_new - x).sum())
        x = x_new
        report.residuals.append(res)
        report.iterations = t
        if trace is not None:
            trace.append(objective_f(graph, pi, cfg, x))
        if callback is not None:
            callback(t, x)
        if res <= cfg.tol:
            report.converged = True
            break
    report.wall_time = time.perf_counter() - start
    report.fairness_violation = constraint_violation(x, config.spec, partition, exact=False)
    report.objective_trace = trace
    return x, report


def residual_check(graph, partition, config, x):
    """Fixed-point residual ``||x - Proj_X((1 - gamma) P x + gamma v)||_1``."""
    cfg = config.pr.resolve(graph.n)
    proj = Projector(config.spec, partition)
    x = np.asarray(x, dtype=float)
    return float(np.abs(x - proj(pagerank_step(graph, cfg, x))[0]).sum())


def projected_step(graph, partition, config, x):
    """One solver iteration from ``x``; returns ``(x_next, duals)``."""
    cfg = config.pr.resolve(graph.n)
    return Projector(config.spec, partition)(pagerank_step(graph, cfg, np.asarray(x, dtype=float)))
