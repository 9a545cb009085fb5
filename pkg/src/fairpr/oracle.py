"""Brute-force references for small instances.

These are deliberately slow and share no code path with the fast
projections beyond the specification objects.
"""
from __future__ import annotations

import numpy as np

from .graph import stationary_distribution, transition_apply
from .pagerank import PrConfig
from .projection import MinFair, lower_bounds, project

MAX_ENUMERATION = 15
KKT_TOL = 1e-12


class OracleSizeError(ValueError):
    pass


def _patterns(n):
    """All ``2**n`` free/clamped masks as a boolean matrix, one row per pattern."""
    codes = np.arange(2**n, dtype=np.int64)[:, None]
    return ((codes >> np.arange(n)) & 1).astype(bool)


def _enumerate_block(y, lower, target):
    """Exact projection of ``y`` onto ``{x >= lower, sum(x) = target}`` by trying every clamp pattern.

    A pattern fixes some coordinates at their floor.  The rest share one
    shift, solved from the sum constraint.  A pattern survives when the
    free coordinates stay at or above their floor and every clamped
    coordinate has a nonnegative multiplier.
    """
    n = y.size
    if n > MAX_ENUMERATION:
        raise OracleSizeError(f"block of size {n} exceeds enumeration cap {MAX_ENUMERATION}")
    scale = max(1.0, float(np.abs(y).max()), abs(target))
    tol = KKT_TOL * scale * max(n, 1)
    free = _patterns(n)
    n_free = free.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (free @ y + (~free) @ lower - target) / n_free
    x = np.where(free, y - lam[:, None], lower)
    slack = y - lower  # a clamped floor has multiplier lam - slack_i
    ok_free = np.all(~free | (x >= lower - tol), axis=1)
    ok_clamped = np.all(free | (lam[:, None] - slack >= -tol), axis=1)
    ok = (n_free > 0) & ok_free & ok_clamped
    # the all-clamped pattern is feasible only when the floors fill the target
    ok[n_free == 0] = abs(lower.sum() - target) <= tol
    x[n_free == 0] = lower
    if not ok.any():
        raise ValueError("no feasible clamp pattern: specification is infeasible")
    dist = ((x - y) ** 2).sum(axis=1)
    dist[~ok] = np.inf
    return x[int(np.argmin(dist))].copy()


def active_set_project(y, spec, partition):
    """Projection onto the fairness set of ``spec`` by active-set enumeration."""
    spec.validate(partition)
    y = np.asarray(y, dtype=float)
    lower = lower_bounds(spec, partition)
    x = np.empty_like(y)
    if isinstance(spec, MinFair):
        return _enumerate_block(y, lower, 1.0)
    phi = spec.targets(partition)
    for k, idx in enumerate(partition.members):
        x[idx] = _enumerate_block(y[idx], lower[idx], float(phi[k]))
    return x


def grid_search_project(y, spec, partition, step=1e-3):
    """Nearest grid point of the fairness set, for instances with at most 4 vertices.

    Every coordinate but the last of each block ranges over multiples of
    ``step``; the last is fixed by the block's sum constraint.
    """
    y = np.asarray(y, dtype=float)
    if y.size > 4:
        raise OracleSizeError("grid search is limited to 4 vertices")
    spec.validate(partition)
    lower = lower_bounds(spec, partition)
    if isinstance(spec, MinFair):
        blocks, targets = [np.arange(partition.n)], [1.0]
    else:
        blocks, targets = partition.members, spec.targets(partition)

    per_block = []
    for idx, t in zip(blocks, targets):
        grid = np.arange(0.0, t + step / 2, step)
        if idx.size == 1:
            cand = np.array([[t]])
        else:
            mesh = np.array(np.meshgrid(*[grid] * (idx.size - 1), indexing="ij")).reshape(idx.size - 1, -1).T
            last = t - mesh.sum(axis=1)
            cand = np.column_stack([mesh, last])
        ok = np.all(cand >= lower[idx] - 1e-12, axis=1)
        cand = cand[ok]
        d = ((cand - y[idx]) ** 2).sum(axis=1)
        per_block.append(cand[np.argmin(d)])
    x = np.empty_like(y)
    for idx, xb in zip(blocks, per_block):
        x[idx] = xb
    return x


def dense_transition(graph):
    return np.column_stack([transition_apply(graph, e) for e in np.eye(graph.n)])


def dense_constrained_pr(graph, config, spec, partition, tol=1e-12, max_iter=2_000_000, projector="auto"):
    """Minimize the PageRank objective over the fairness set with dense linear algebra.

    Uses accelerated projected gradient with step ``1/L``, ``L`` the
    largest Hessian eigenvalue, restarting momentum whenever the objective
    increases, until successive iterates differ by at most ``tol`` in the
    max norm.  ``projector`` is ``"active-set"``, ``"fast"`` or ``"auto"``
    (enumeration when every block is small enough).
    """
    if graph.directed:
        raise ValueError("dense_constrained_pr needs an undirected graph")
    if graph.n > 200:
        raise OracleSizeError("dense_constrained_pr is limited to 200 vertices")
    cfg = (config or PrConfig()).resolve(graph.n)
    pi = stationary_distribution(graph).pi
    g = cfg.gamma
    v = cfg.teleport
    P = dense_transition(graph)
    n = graph.n
    H = np.diag(1.0 / pi) @ ((1.0 - g) * (np.eye(n) - P) + g * np.eye(n))
    H = 0.5 * (H + H.T)
    b = g * v / pi  # f(x) = x'Hx/2 - b'x + const
    L = float(np.linalg.eigvalsh(H)[-1])

    if projector == "auto":
        blocks = [partition.n] if isinstance(spec, MinFair) else list(partition.group_sizes)
        projector = "active-set" if max(blocks) <= 10 else "fast"
    if projector == "active-set":
        proj = lambda y: active_set_project(y, spec, partition)  # noqa: E731
    else:
        proj = lambda y: project(y, spec, partition)[0]  # noqa: E731

    def f(x):
        return 0.5 * x @ H @ x - b @ x

    x = proj(v)
    z = x.copy()
    theta = 1.0
    fx = f(x)
    for _ in range(max_iter):
        x_new = proj(z - (H @ z - b) / L)
        f_new = f(x_new)
        if f_new > fx:
            # restart momentum from the last accepted point
            theta = 1.0
            z = x.copy()
            x_new = proj(x - (H @ x - b) / L)
            f_new = f(x_new)
        step = np.abs(x_new - x).max()
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        z = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        theta = theta_new
        x, fx = x_new, f_new
        if step <= tol:
            break
    else:
        raise RuntimeError("dense projected gradient did not converge")
    return x
