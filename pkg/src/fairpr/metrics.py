"""Utility and fairness measures of a candidate score vector against a baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SUM_TOL = 1e-6


def _pair(p, q, strict=True):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"score vectors must be 1-d with equal length, got {p.shape} and {q.shape}")
    if strict:
        for name, v in (("p", p), ("q", q)):
            check_distribution(v, name)
    return p, q


def check_distribution(p, name="p"):
    """Reject vectors with negative entries or totals off 1 by more than ``SUM_TOL``."""
    if np.any(p < 0):
        raise ValueError(f"{name} has negative entries")
    total = math.fsum(p)
    if abs(total - 1.0) > SUM_TOL:
        raise ValueError(f"{name} sums to {total:.12g}, not 1; pass normalize=True to rescale")


def _maybe_normalize(p, normalize):
    p = np.asarray(p, dtype=float)
    return p / p.sum() if normalize else p


def tv_distance(p, q, normalize=False):
    """Total variation distance ``||p - q||_1 / 2``."""
    p, q = _pair(_maybe_normalize(p, normalize), _maybe_normalize(q, normalize))
    return 0.5 * math.fsum(np.abs(p - q))


def utility_loss_l2(p, q, normalize=False):
    """Squared Euclidean distance ``||p - q||_2^2``."""
    p, q = _pair(_maybe_normalize(p, normalize), _maybe_normalize(q, normalize))
    return math.fsum((p - q) ** 2)


def _swap_count(values):
    """Number of pairs ``i < j`` with ``values[i] > values[j]``.

    Bottom-up merge sort: at each width the right half of every run pair
    is located in the sorted left half with ``searchsorted``.
    """
    n = values.size
    # dense integer ranks keep keys exact when offset by block
    ranks = np.unique(values, return_inverse=True)[1].astype(np.int64)
    span = int(ranks.max()) + 2
    a = ranks.copy()
    total = 0
    width = 1
    pos = np.arange(n)
    while width < n:
        pair_id = pos // (2 * width)
        in_right = (pos // width) % 2 == 1
        keyed = a + pair_id * span
        left_keys = keyed[~in_right]  # already sorted: runs are sorted, blocks offset
        right_keys = keyed[in_right]
        # elements of the left run that are <= r, counted within the same pair block
        le = np.searchsorted(left_keys, right_keys, side="right")
        block_end = np.searchsorted(left_keys, (pair_id[in_right] + 1) * span, side="left")
        total += int((block_end - le).sum())
        # merge: sort within each pair block
        a = np.sort(keyed) - pair_id * span
        width *= 2
    return total


def _tie_pairs(sorted_values):
    if sorted_values.size == 0:
        return 0
    _, counts = np.unique(sorted_values, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def kendall_tau(p, q):
    """Kendall tau-b between the rankings induced by ``p`` and ``q``.

    Ties are corrected for in both vectors.  Runs in ``O(n log^2 n)``
    vectorized time via merge-sort swap counting.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("score vectors must be 1-d with equal length")
    n = p.size
    if n < 2:
        raise ValueError("kendall tau needs at least 2 entries")
    order = np.lexsort((q, p))
    ps, qs = p[order], q[order]
    n0 = n * (n - 1) // 2
    ties_p = _tie_pairs(ps)
    # joint ties: equal (p, q) pairs, adjacent after lexsort
    joint = np.concatenate([[True], (ps[1:] != ps[:-1]) | (qs[1:] != qs[:-1]), [True]])
    run = np.diff(np.flatnonzero(joint))
    ties_joint = int((run * (run - 1) // 2).sum())
    ties_q = _tie_pairs(np.sort(qs))
    swaps = _swap_count(qs)
    denom = math.sqrt((n0 - ties_p) * (n0 - ties_q)) if (n0 - ties_p) and (n0 - ties_q) else 0.0
    if denom == 0.0:
        raise ValueError("kendall tau is undefined when one of the vectors is constant")
    concordant_minus_discordant = n0 - ties_p - ties_q + ties_joint - 2 * swaps
    return concordant_minus_discordant / denom


def kendall_tau_bruteforce(p, q):
    """Quadratic pair-counting tau-b, the reference for :func:`kendall_tau`."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = p.size
    conc = disc = tp = tq = 0
    for i in range(n):
        for j in range(i + 1, n):
            a = np.sign(p[i] - p[j])
            b = np.sign(q[i] - q[j])
            if a == 0 and b == 0:
                continue
            if a == 0:
                tp += 1
            elif b == 0:
                tq += 1
            elif a == b:
                conc += 1
            else:
                disc += 1
    denom = math.sqrt((conc + disc + tp) * (conc + disc + tq))
    if denom == 0:
        raise ValueError("kendall tau is undefined when one of the vectors is constant")
    return (conc - disc) / denom


def group_shares(p, partition):
    return partition.group_sums(p)


def fairness_violation(p, partition, phi):
    """Mean squared gap ``(1/K) sum_k (share_k - phi_k)^2`` between group totals and targets."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (partition.n_groups,):
        raise ValueError(f"phi has {phi.size} entries, partition has {partition.n_groups} groups")
    p = np.asarray(p, dtype=float)
    sums = np.array([math.fsum(p[m]) for m in partition.members])
    return float(np.mean((sums - phi) ** 2))


def top_set(p, x_percent):
    """Indices of the ``ceil(x% * n)`` highest scores; ties go to the lower index."""
    if not 0 < x_percent <= 100:
        raise ValueError(f"x_percent must lie in (0, 100], got {x_percent}")
    p = np.asarray(p, dtype=float)
    size = math.ceil(x_percent * p.size / 100 - 1e-9)
    order = np.argsort(-p, kind="stable")
    return order[:max(size, 1)]


def phi_precision_at(p, partition, k, x_percent):
    """Share of the top-``x%`` score mass that belongs to group ``k``."""
    p = np.asarray(p, dtype=float)
    T = top_set(p, x_percent)
    denom = math.fsum(p[T])
    if denom == 0:
        raise ValueError("top set carries zero total score")
    mine = T[partition.assignment[T] == k]
    return math.fsum(p[mine]) / denom


def min_protected_score(p, protected_set):
    s = np.asarray(protected_set, dtype=np.int64)
    if s.size == 0:
        raise ValueError("protected set is empty")
    return float(np.asarray(p, dtype=float)[s].min())


@dataclass
class MetricReport:
    tv: float
    utility_loss_l2: float
    kendall_tau: float
    fairness_violation: float
    phi_precision: dict = field(default_factory=dict)  # (group, x_percent) -> value
    min_scores: dict = field(default_factory=dict)  # group -> value

    def to_dict(self):
        out = {
            "tv": self.tv,
            "utility_loss_l2": self.utility_loss_l2,
            "kendall_tau": self.kendall_tau,
            "fairness_violation": self.fairness_violation,
        }
        for (k, x), val in sorted(self.phi_precision.items()):
            out[f"phi_precision.{k}@{x:g}"] = val
        for k, val in sorted(self.min_scores.items()):
            out[f"min_score.{k}"] = val
        return out


def evaluate(baseline, candidate, partition, phi=None, precision_at=(), normalize=False):
    """Compare ``candidate`` with ``baseline``.

    ``phi`` defaults to the baseline's own group shares.  Minimum scores
    are reported for every non-empty protected set of ``partition``.
    """
    baseline = _maybe_normalize(baseline, normalize)
    candidate = _maybe_normalize(candidate, normalize)
    _pair(baseline, candidate)
    if phi is None:
        phi = partition.group_sums(baseline)
    report = MetricReport(
        tv=tv_distance(baseline, candidate),
        utility_loss_l2=utility_loss_l2(baseline, candidate),
        kendall_tau=kendall_tau(baseline, candidate),
        fairness_violation=fairness_violation(candidate, partition, phi),
    )
    for x in precision_at:
        for k in range(partition.n_groups):
            report.phi_precision[(k, float(x))] = phi_precision_at(candidate, partition, k, x)
    for k, s in enumerate(partition.protected_sets):
        if s.size:
            report.min_scores[k] = min_protected_score(candidate, s)
    return report
