"""Post-processing baseline: the l2-closest fair vector to a finished PageRank vector."""
from __future__ import annotations

import numpy as np

from .pagerank import PrConfig
from .graph import transition_apply
from .projection import lower_bounds, project


def postprocess(p_o, spec, partition, return_duals=False):
    """Euclidean projection of ``p_o`` onto the fairness set of ``spec``."""
    p_o = np.asarray(p_o, dtype=float)
    spec.validate(partition)
    x, duals = project(p_o, spec, partition)
    return (x, duals) if return_duals else x


def closed_form_two_group(p_o, partition, phi):
    """Two-group sum-fair post-processing computed by threshold peeling.

    ``phi`` is the target total of group 0.  With ``eps = phi - phi_o``
    oriented so the receiving group gains, that group moves up uniformly
    by ``eps / n_1``.  The donating group's lowest scores are zeroed one
    at a time (their mass is ``c``) until every remaining score is at
    least the uniform cut ``(eps - c) / |S_2+|``.
    """
    if partition.n_groups != 2:
        raise ValueError(f"closed form needs exactly 2 groups, got {partition.n_groups}")
    if not 0.0 < phi < 1.0:
        raise ValueError(f"phi must lie in (0, 1), got {phi}")
    p_o = np.asarray(p_o, dtype=float)
    S1, S2 = partition.members
    eps = phi - p_o[S1].sum()
    if eps < 0:
        S1, S2, eps = S2, S1, -eps

    x = p_o.copy()
    x[S1] += eps / S1.size

    order = S2[np.argsort(p_o[S2], kind="stable")]
    vals = p_o[order]
    c = 0.0
    for z in range(order.size):
        cut = (eps - c) / (order.size - z)
        if vals[z] >= cut:
            break
        c += vals[z]
    else:  # pragma: no cover - needs phi == 1
        raise ValueError("target leaves no mass for the donating group")
    x[order[:z]] = 0.0
    x[order[z:]] = vals[z:] - cut
    return x


def _kkt_terms(p_o, duals, spec, partition):
    # z(x) for the objective ||x - p_o||^2: equality multipliers 2 lam_b on
    # e_{S_b}; inequality multipliers 2 max(0, lam_b - (p_i - l_i)) on -e_i.
    lower = lower_bounds(spec, partition)
    z = np.zeros_like(p_o)
    for lam, idx in zip(duals.lambdas, duals.blocks):
        ineq = np.maximum(0.0, lam - (p_o[idx] - lower[idx]))
        z[idx] = 2.0 * lam - 2.0 * ineq
    return z


def kkt_correction_residual(p_o, x, duals, spec, partition):
    """``||x - p_o + z(x) / 2||_inf`` certifying the post-processing KKT form.

    Dual values come from the projection's :class:`DualSolution`; the
    inequality multipliers are implied by them and ``p_o``.
    """
    if duals is None:
        raise ValueError("dual solution is required")
    p_o = np.asarray(p_o, dtype=float)
    x = np.asarray(x, dtype=float)
    z = _kkt_terms(p_o, duals, spec, partition)
    return float(np.abs(x - p_o + 0.5 * z).max())


def diffusion_correction_residual(graph, config, p_o, x, duals, spec, partition, weighting=None):
    """Residual of ``x = p_o - [I - (1-g) P]^-1 W z / 2`` with a dense resolvent.

    ``duals`` are those of projecting ``(1-g) P x + g v`` (so ``z`` is
    built around that vector rather than ``p_o``).  ``weighting`` is the
    diagonal ``W`` (``None`` is the identity).  Tiny graphs only.
    """
    if graph.n > 2000:
        raise ValueError("dense resolvent check is limited to small graphs")
    cfg = (config or PrConfig()).resolve(graph.n)
    x = np.asarray(x, dtype=float)
    y = (1.0 - cfg.gamma) * transition_apply(graph, x) + cfg.gamma * cfg.teleport
    z = _kkt_terms(y, duals, spec, partition)
    if weighting is not None:
        z = np.asarray(weighting, dtype=float) * z
    P = np.column_stack([transition_apply(graph, e) for e in np.eye(graph.n)])
    B = np.eye(graph.n) - (1.0 - cfg.gamma) * P
    return float(np.abs(x - np.asarray(p_o) + 0.5 * np.linalg.solve(B, z)).max())


def zeroed_counts(x, partition, atol=0.0):
    """Number of vertices with score ``<= atol`` in each group."""
    x = np.asarray(x, dtype=float)
    return [int(np.count_nonzero(x[m] <= atol)) for m in partition.members]


def sum_fair_targets(phi, K, split="equal-rest"):
    """Expand a scalar level into a length-``K`` target vector.

    ``equal-rest`` gives ``phi`` to group 0 and splits ``1 - phi`` evenly.
    """
    if split != "equal-rest":
        raise ValueError(f"unknown split {split!r}")
    if K == 1:
        return np.array([1.0])
    rest = (1.0 - phi) / (K - 1)
    return np.array([phi] + [rest] * (K - 1))

