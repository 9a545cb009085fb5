"""Euclidean projections onto the group-fairness constraint sets.

Every set handled here is a product of pieces of the form
``{x >= l, sum(x) = t}`` over disjoint index blocks (one block per group,
or a single block for min-fairness).  On a block the projection is
``max(l, y - lam)`` for the unique shift ``lam`` at which the sum hits
``t``; the shift is found by bisection on the dual root function and then
snapped to the closed form on the detected support, so the block sum is
exact to rounding.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

BISECTION_ITERS = 100
SPEC_TOL = 1e-12


class InfeasibleSpecError(ValueError):
    """A fairness specification that admits no feasible vector for a partition."""

    def __init__(self, check, message):
        super().__init__(f"{check}: {message}")
        self.check = check


class BracketError(ValueError):
    pass


# ---------------------------------------------------------------------------
# specifications


def _as_vector(values, K, name):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size != K:
        raise InfeasibleSpecError(f"{name}-length", f"expected {K} values for {name}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InfeasibleSpecError(f"{name}-finite", f"{name} must be finite")
    if np.any(arr < 0):
        raise InfeasibleSpecError(f"{name}-nonnegative", f"{name} must be nonnegative")
    return arr


def _check_phi(phi, K):
    phi = _as_vector(phi, K, "phi")
    if abs(phi.sum() - 1.0) > SPEC_TOL:
        raise InfeasibleSpecError("phi-sum", f"phi must sum to 1, got {phi.sum():.17g}")
    return phi


@dataclass(frozen=True)
class SumFair:
    """Group ``k`` receives total score exactly ``phi[k]``."""

    phi: tuple

    def validate(self, partition):
        _check_phi(self.phi, partition.n_groups)
        return self

    def targets(self, partition):
        return _check_phi(self.phi, partition.n_groups)


@dataclass(frozen=True)
class MinFair:
    """Scores sum to one and each protected vertex of group ``k`` gets at least ``alpha[k]``.

    ``protected`` overrides the partition's protected sets when given.
    """

    alpha: tuple
    protected: tuple | None = None

    def validate(self, partition):
        alpha = _as_vector(self.alpha, partition.n_groups, "alpha")
        sets = protected_sets(self, partition)
        load = float(sum(a * s.size for a, s in zip(alpha, sets)))
        if load > 1.0 + SPEC_TOL:
            raise InfeasibleSpecError("alpha-load", f"sum_k alpha_k |A_k| = {load:.17g} exceeds 1")
        return self


@dataclass(frozen=True)
class SumMinFair:
    """Both group totals ``phi`` and per-vertex floors ``alpha`` on the protected sets."""

    phi: tuple
    alpha: tuple
    protected: tuple | None = None

    def validate(self, partition):
        phi = _check_phi(self.phi, partition.n_groups)
        alpha = _as_vector(self.alpha, partition.n_groups, "alpha")
        for k, s in enumerate(protected_sets(self, partition)):
            if alpha[k] * s.size > phi[k] + SPEC_TOL:
                raise InfeasibleSpecError(
                    "alpha-exceeds-phi",
                    f"group {k}: alpha_k |A_k| = {alpha[k] * s.size:.17g} > phi_k = {phi[k]:.17g}",
                )
        return self

    def targets(self, partition):
        return _check_phi(self.phi, partition.n_groups)


FairnessSpec = Union[SumFair, MinFair, SumMinFair]


def protected_sets(spec, partition):
    if getattr(spec, "protected", None) is not None:
        sets = tuple(np.asarray(s, dtype=np.int64) for s in spec.protected)
        if len(sets) != partition.n_groups:
            raise InfeasibleSpecError("protected-length", "need one protected set per group")
        for k, s in enumerate(sets):
            if s.size and np.any(partition.assignment[s] != k):
                raise InfeasibleSpecError("protected-membership", f"protected set {k} leaves group {k}")
        return sets
    return partition.protected_sets


def lower_bounds(spec, partition):
    """Per-vertex floor vector: ``alpha[k]`` on ``A_k`` and 0 elsewhere."""
    lower = np.zeros(partition.n)
    if isinstance(spec, SumFair):
        return lower
    alpha = _as_vector(spec.alpha, partition.n_groups, "alpha")
    for k, s in enumerate(protected_sets(spec, partition)):
        lower[s] = alpha[k]
    return lower


def constraint_violation(x, spec, partition, exact=True):
    """Scalar feasibility gap of ``x`` for ``spec``.

    For the sum criteria this is the mean squared deviation of the group
    totals from ``phi``; for min-fairness the squared deviation of the
    grand total from 1.  Any floor shortfall adds its largest squared
    value.  ``exact=False`` swaps correctly rounded sums for plain
    floating point accumulation.
    """
    x = np.asarray(x, dtype=float)
    total = math.fsum if exact else np.sum
    if isinstance(spec, MinFair):
        value = (total(x) - 1.0) ** 2
    else:
        phi = spec.targets(partition)
        sums = np.array([total(x[m]) for m in partition.members])
        value = float(np.mean((sums - phi) ** 2))
    if not isinstance(spec, SumFair):
        short = lower_bounds(spec, partition) - x
        value += float(max(0.0, short.max())) ** 2
    return value


# ---------------------------------------------------------------------------
# scalar root finding


def bisect_root(f, lo, hi, iter_cap=BISECTION_ITERS):
    """Root of a nonincreasing function bracketed by ``f(lo) >= 0 >= f(hi)``.

    Performs at most ``iter_cap`` halvings and returns the midpoint of the
    final bracket.
    """
    if not lo < hi:
        raise BracketError(f"need lo < hi, got [{lo}, {hi}]")
    if f(lo) < 0:
        raise BracketError(f"f(lo) = {f(lo)} < 0")
    if f(hi) > 0:
        raise BracketError(f"f(hi) = {f(hi)} > 0")
    for _ in range(iter_cap):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if f(mid) < 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def dual_root_function(y, lower, target):
    """``g(lam) = sum(max(lower, y - lam)) - target`` for one block."""
    y = np.asarray(y, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), y.shape)

    def g(lam):
        return float(np.maximum(lower, y - lam).sum() - target)

    return g


def dual_bracket(y, target):
    """Initial bracket ``[min(y) - target / n, max(y)]`` for the block shift."""
    y = np.asarray(y, dtype=float)
    return float(y.min() - target / y.size), float(y.max())


def _consistent(t, free, lam):
    if free.any() and t[free].min() < lam:
        return False
    clamped = ~free
    if clamped.any() and t[clamped].max() > lam:
        return False
    return True


def solve_block_shift(y, lower, target, iter_cap=BISECTION_ITERS):
    """Shift ``lam`` with ``sum(max(lower, y - lam)) == target`` on one block.

    Returns ``(lam, free)`` where ``free`` marks coordinates strictly above
    their floor (ties count as free).  ``lower`` may be a scalar.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    scalar_lower = np.ndim(lower) == 0
    lower_arr = np.full(n, float(lower)) if scalar_lower else np.asarray(lower, dtype=float)
    base = float(lower_arr.sum())
    t = y - lower_arr  # coordinate i is free iff lam <= t[i]

    if base > target + SPEC_TOL:
        raise InfeasibleSpecError("floor-load", f"floors sum to {base:.17g} > target {target:.17g}")
    if base >= target:
        # only the floor vector is feasible
        return float(t.max()), np.zeros(n, dtype=bool)

    # unclamped support: one pass, the common case inside PageRank iterations
    lam = (float(y.sum()) - target) / n
    if lam <= t.min():
        return lam, np.ones(n, dtype=bool)

    lo, hi = dual_bracket(y, target)
    # breakpoints outside (lo, hi) have a fixed status on the whole bracket
    in_play = (t > lo) & (t < hi)
    cy, ct, cl = y[in_play], t[in_play], lower_arr[in_play]
    always_free = t >= hi
    sum_free = float(y[always_free].sum())
    n_free = int(always_free.sum())
    sum_clamped = float(lower_arr[t <= lo].sum())

    for _ in range(iter_cap):
        if ct.size == 0:
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        fm = ct > mid
        g = (
            sum_free + cy[fm].sum() - (n_free + int(fm.sum())) * mid
            + sum_clamped + cl[~fm].sum() - target
        )
        if g < 0:
            hi = mid
        else:
            lo = mid
        to_free = ct >= hi
        to_clamp = ct <= lo
        if to_free.any():
            sum_free += float(cy[to_free].sum())
            n_free += int(to_free.sum())
        if to_clamp.any():
            sum_clamped += float(cl[to_clamp].sum())
        keep = ~(to_free | to_clamp)
        cy, ct, cl = cy[keep], ct[keep], cl[keep]

    # exact support refinement; remaining breakpoints sit at the root
    for free in (t > lo, t >= hi):
        n_f = int(free.sum())
        if n_f == 0:
            continue
        lam = (float(y[free].sum()) + float(lower_arr[~free].sum()) - target) / n_f
        if _consistent(t, free, lam):
            return lam, free
    lam = 0.5 * (lo + hi)
    return lam, t >= lam


# ---------------------------------------------------------------------------
# projections


@dataclass(frozen=True)
class DualSolution:
    """Block shifts and supports of a projection.

    ``lambdas[b]`` belongs to block ``b``: the groups for the sum
    criteria, or the single whole-vertex block for min-fairness.
    ``free`` marks the coordinates left above their floor.
    """

    lambdas: np.ndarray
    blocks: tuple
    free: np.ndarray

    @cached_property
    def supports(self):
        return tuple(idx[self.free[idx]] for idx in self.blocks)

    def primal(self, y, lower=0.0):
        """Rebuild the projected vector from the shifts."""
        y = np.asarray(y, dtype=float)
        lower = np.broadcast_to(np.asarray(lower, dtype=float), y.shape)
        x = np.empty_like(y)
        for lam, idx in zip(self.lambdas, self.blocks):
            x[idx] = np.maximum(lower[idx], y[idx] - lam)
        return x


def _solve_blocks(y, blocks, lower, targets, which, n_jobs=None):
    def work(b):
        idx = blocks[b]
        yb = y[idx]
        lb = 0.0 if lower is None else lower[idx]
        lam, free = solve_block_shift(yb, lb, float(targets[b]))
        return lam, free, np.maximum(lb, yb - lam)

    if n_jobs and n_jobs > 1 and len(which) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return dict(zip(which, pool.map(work, which)))
    return {b: work(b) for b in which}


def _check_finite(y):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("cannot project a vector with non-finite entries")
    return y


def _project_blocks(y, blocks, lower, targets, n_jobs=None, block_of=None):
    """Project block by block; ``block_of[i]`` is the block of coordinate ``i``.

    When ``block_of`` is given, every block is first tried with no clamped
    coordinate in a single vectorized pass.  Only blocks where that fails
    go through the per-block dual solve.
    """
    y = _check_finite(y)
    targets = np.asarray(targets, dtype=float)
    B = len(blocks)
    lambdas = np.empty(B)
    free = np.ones(y.size, dtype=bool)
    if block_of is not None:
        sizes = np.array([idx.size for idx in blocks], dtype=float)
        lam = (np.bincount(block_of, weights=y, minlength=B) - targets) / sizes
        x = y - lam.take(block_of)
        bad = x < (0.0 if lower is None else lower)
        if lower is not None:
            # floors that already fill their block leave only the floor vector
            full = np.bincount(block_of, weights=lower, minlength=B) >= targets
            bad |= full.take(block_of)
        if not bad.any():
            return x, DualSolution(lam, tuple(blocks), free)
        which = np.unique(block_of[bad]).tolist()
        lambdas[:] = lam
    else:
        x = np.empty_like(y)
        which = list(range(B))
    for b, (lam_b, free_b, xb) in _solve_blocks(y, blocks, lower, targets, which, n_jobs).items():
        idx = blocks[b]
        x[idx] = xb
        free[idx] = free_b
        lambdas[b] = lam_b
    return x, DualSolution(lambdas=lambdas, blocks=tuple(blocks), free=free)


def _check_length(y, partition):
    if np.shape(y) != (partition.n,):
        raise ValueError(f"expected vector of length {partition.n}, got shape {np.shape(y)}")


def project_sum_fair(y, partition, phi, n_jobs=None):
    """Project onto ``{x >= 0 : sum of group k equals phi[k] for all k}``."""
    _check_length(y, partition)
    phi = _check_phi(phi, partition.n_groups)
    return _project_blocks(y, partition.members, None, phi, n_jobs, partition.assignment)


def project_min_fair(y, partition, alpha, protected=None):
    """Project onto ``{x >= 0 : sum(x) = 1, x_i >= alpha[k] on A_k}``."""
    _check_length(y, partition)
    spec = MinFair(alpha, protected).validate(partition)
    lower = lower_bounds(spec, partition)
    everything = np.arange(partition.n)
    return _project_blocks(y, (everything,), lower, [1.0], block_of=np.zeros(partition.n, dtype=np.intp))


def project_sum_min_fair(y, partition, phi, alpha, protected=None, n_jobs=None):
    """Project onto the intersection of the group-sum targets and the protected floors."""
    _check_length(y, partition)
    spec = SumMinFair(phi, alpha, protected).validate(partition)
    lower = lower_bounds(spec, partition)
    return _project_blocks(y, partition.members, lower, spec.targets(partition), n_jobs, partition.assignment)


def project(y, spec, partition, n_jobs=None):
    """Dispatch to the projection matching ``spec``. Returns ``(x, duals)``."""
    if isinstance(spec, SumFair):
        return project_sum_fair(y, partition, spec.phi, n_jobs=n_jobs)
    if isinstance(spec, MinFair):
        return project_min_fair(y, partition, spec.alpha, spec.protected)
    if isinstance(spec, SumMinFair):
        return project_sum_min_fair(y, partition, spec.phi, spec.alpha, spec.protected, n_jobs=n_jobs)
    raise TypeError(f"unknown fairness specification {type(spec).__name__}")


class Projector:
    """Projection onto a fixed fairness set with validation done once.

    Used inside iterative solvers where the same set is hit every step.
    Each call starts from the support found by the previous call and
    alternates closed-form shifts with support updates.  A shift is only
    accepted once it passes the KKT sign check, so the result is the same
    exact projection; stalls fall back to bisection.
    """

    # dense block indicator up to this many entries, bincount beyond
    DENSE_INDICATOR_LIMIT = 4_000_000
    NEWTON_ROUNDS = 50

    def __init__(self, spec, partition, n_jobs=None):
        spec.validate(partition)
        self.spec = spec
        self.partition = partition
        self.n_jobs = n_jobs
        if isinstance(spec, MinFair):
            self.blocks = (np.arange(partition.n),)
            self.targets = np.array([1.0])
            self.block_of = np.zeros(partition.n, dtype=np.intp)
        else:
            self.blocks = partition.members
            self.targets = spec.targets(partition)
            self.block_of = partition.assignment.astype(np.intp)
        self.lower = None if isinstance(spec, SumFair) else lower_bounds(spec, partition)
        B = len(self.blocks)
        if B == 1:
            self._block_sum = lambda w: np.array([w.sum()])
            self._spread = lambda lam: lam[0]
        elif B * partition.n <= self.DENSE_INDICATOR_LIMIT:
            ind = partition.indicator
            self._block_sum = ind.__matmul__
            self._spread = ind.T.__matmul__
        else:
            self._block_sum = lambda w: np.bincount(self.block_of, weights=w, minlength=B)
            self._spread = lambda lam: lam.take(self.block_of)
        self._floor_total = None if self.lower is None else self._block_sum(self.lower)
        self._free = None

    def _block_counts(self, idx, weights):
        return np.bincount(self.block_of[idx], weights=weights, minlength=len(self.blocks))

    def _newton(self, y, free, count, clamped):
        """Exact projection warm-started from the support ``free``; ``None`` if it stalls.

        The shift on the given support comes in closed form.  Coordinates
        whose status then disagrees are flipped and the shift is updated
        incrementally; each such round is a Newton step on the piecewise
        linear dual root function.  Only coordinates near the first
        threshold are revisited, which is exact as long as the shift stays
        within the radius that defines "near".
        """
        if np.any(count == 0):
            return None
        slack = y if self.lower is None else y - self.lower
        total = self._block_sum(slack) - self._block_counts(clamped, slack[clamped])
        if self.lower is not None:
            total += self._floor_total
        lam = (total - self.targets) / count
        gap = slack - self._spread(lam)
        above = gap > 0
        moved = np.flatnonzero(above != free)
        moved = moved[gap[moved] != 0]  # ties at the floor are consistent either way
        if moved.size:
            free = free.copy()
            lam_first = None
            for _ in range(self.NEWTON_ROUNDS):
                sign = np.where(free[moved], -1.0, 1.0)
                free[moved] = ~free[moved]
                count = count + self._block_counts(moved, sign)
                if np.any(count == 0):
                    return None
                total = total + self._block_counts(moved, sign * slack[moved])
                new = (total - self.targets) / count
                if lam_first is None:
                    # a coordinate with |gap| > radius keeps its status for
                    # every shift within radius of the first one
                    lam_first, radius = lam, 3.0 * float(np.abs(new - lam).max())
                    cand = np.flatnonzero(np.abs(gap) <= radius)
                    cand_slack, cand_block = slack[cand], self.block_of[cand]
                elif np.abs(new - lam_first).max() > radius:
                    return None
                lam = new
                g = cand_slack - lam.take(cand_block)
                flip = ((g > 0) != free[cand]) & (g != 0)
                if not flip.any():
                    break
                moved = cand[flip]
            else:
                return None
            gap = slack - self._spread(lam)
            clamped = np.flatnonzero(~free)
        x = np.maximum(gap, 0.0, out=gap)
        if self.lower is not None:
            x += self.lower
        return x, DualSolution(lam, tuple(self.blocks), free), count, clamped

    def __call__(self, y):
        y = _check_finite(y)
        if self._free is None:
            self._free = np.ones(y.size, dtype=bool)
            self._count = np.array([idx.size for idx in self.blocks], dtype=float)
            self._clamped = np.zeros(0, dtype=np.intp)
        out = self._newton(y, self._free, self._count, self._clamped)
        if out is None:
            x, duals = _project_blocks(y, self.blocks, self.lower, self.targets, self.n_jobs, self.block_of)
            count = self._block_counts(np.flatnonzero(duals.free), None)
            clamped = np.flatnonzero(~duals.free)
        else:
            x, duals, count, clamped = out
        self._free, self._count, self._clamped = duals.free, count, clamped
        return x, duals
