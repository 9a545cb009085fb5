import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairpr.graph import GroupPartition
from fairpr.oracle import active_set_project, grid_search_project
from fairpr.projection import (
    BracketError,
    InfeasibleSpecError,
    MinFair,
    Projector,
    SumFair,
    SumMinFair,
    bisect_root,
    constraint_violation,
    dual_bracket,
    dual_root_function,
    lower_bounds,
    project,
    project_min_fair,
    project_sum_fair,
    project_sum_min_fair,
    solve_block_shift,
)


# ---------------------------------------------------------------------------
# worked examples


def test_bisect_piecewise_linear():
    f = lambda lam: max(0, 0.5 - lam) + max(0, 0.3 - lam) - 0.5  # noqa: E731
    lo, hi = dual_bracket(np.array([0.5, 0.3]), 0.5)
    assert bisect_root(f, lo, hi) == pytest.approx(0.15, abs=1e-14)


def test_bisect_bad_bracket():
    with pytest.raises(BracketError):
        bisect_root(lambda x: -1.0, 0.0, 1.0)
    with pytest.raises(BracketError):
        bisect_root(lambda x: 1.0, 0.0, 1.0)
    with pytest.raises(BracketError):
        bisect_root(lambda x: 0.0, 1.0, 1.0)


def test_sum_fair_examples():
    part = GroupPartition.from_labels([0, 0, 1])
    x, duals = project_sum_fair(np.array([0.5, 0.3, 0.2]), part, (0.5, 0.5))
    np.testing.assert_allclose(x, [0.35, 0.15, 0.5], atol=1e-15)
    assert duals.lambdas[0] == pytest.approx(0.15)

    part = GroupPartition.from_labels([0, 1, 1])
    x, duals = project_sum_fair(np.array([0.9, 0.05, 0.05]), part, (0.2, 0.8))
    np.testing.assert_allclose(x, [0.2, 0.4, 0.4], atol=1e-15)
    assert duals.lambdas[1] == pytest.approx(-0.35)


def test_min_fair_examples():
    part = GroupPartition.from_labels([0, 0, 0], protected_sets=[[0]])
    x, duals = project_min_fair(np.array([0.6, 0.3, 0.1]), part, (0.7,))
    np.testing.assert_allclose(x, [0.7, 0.25, 0.05], atol=1e-15)
    assert duals.lambdas[0] == pytest.approx(0.05)

    part = GroupPartition.from_labels([0] * 5, protected_sets=[[0, 1]])
    x, duals = project_min_fair(np.full(5, 0.2), part, (0.3,))
    np.testing.assert_allclose(x, [0.3, 0.3, 0.4 / 3, 0.4 / 3, 0.4 / 3], atol=1e-15)
    assert duals.lambdas[0] == pytest.approx(1 / 15)


def test_sum_min_examples():
    part = GroupPartition.from_labels([0, 0, 1], protected_sets=[[0], []])
    x, duals = project_sum_min_fair(np.array([0.3, 0.3, 0.7]), part, (0.5, 0.5), (0.4, 0.0))
    np.testing.assert_allclose(x, [0.4, 0.1, 0.5], atol=1e-15)
    assert duals.lambdas[0] == pytest.approx(0.2)
    x, _ = project_sum_min_fair(np.array([0.4, 0.2, 0.7]), part, (0.5, 0.5), (0.1, 0.0))
    np.testing.assert_allclose(x, [0.35, 0.15, 0.5], atol=1e-15)


def test_infeasible_specs_name_the_check():
    part = GroupPartition.from_labels([0, 0, 1], protected_sets=[[0, 1], []])
    with pytest.raises(InfeasibleSpecError) as exc:
        SumFair((0.9, 0.2)).validate(part)
    assert exc.value.check == "phi-sum"
    with pytest.raises(InfeasibleSpecError) as exc:
        SumMinFair((0.5, 0.5), (0.3, 0.0)).validate(part)
    assert exc.value.check == "alpha-exceeds-phi"
    with pytest.raises(InfeasibleSpecError) as exc:
        MinFair((0.6, 0.0)).validate(part)
    assert exc.value.check == "alpha-load"
    with pytest.raises(InfeasibleSpecError):
        SumFair((0.5,)).validate(part)


def test_degenerate_floor_equals_target():
    part = GroupPartition.from_labels([0, 0, 1], protected_sets=[[0, 1], []])
    x, _ = project_sum_min_fair(np.array([0.9, -0.3, 0.4]), part, (0.5, 0.5), (0.25, 0.0))
    np.testing.assert_allclose(x, [0.25, 0.25, 0.5])


def test_non_finite_is_rejected():
    part = GroupPartition.from_labels([0, 1])
    with pytest.raises(ValueError):
        project_sum_fair(np.array([np.nan, 0.5]), part, (0.5, 0.5))


def test_grid_search_agrees_with_oracle():
    part = GroupPartition.from_labels([0, 0, 1])
    spec = SumFair((0.5, 0.5))
    y = np.array([0.5, 0.3, 0.2])
    np.testing.assert_allclose(grid_search_project(y, spec, part), active_set_project(y, spec, part), atol=1e-3)


def test_threaded_projection_matches_serial():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 4, 2000)
    part = GroupPartition.from_labels(labels.tolist())
    spec = SumFair(tuple(rng.dirichlet(np.ones(part.n_groups))))
    y = rng.uniform(-1, 1, 2000)
    np.testing.assert_array_equal(project(y, spec, part, n_jobs=3)[0], project(y, spec, part)[0])
    np.testing.assert_allclose(Projector(spec, part, n_jobs=3)(y)[0], project(y, spec, part)[0], rtol=0, atol=1e-12)


def _warm_sequence(rng, n, steps=8):
    y = rng.uniform(-0.5, 1.5, n)
    for _ in range(steps):
        yield y
        y = y + rng.normal(0, 0.05, n)


@pytest.mark.parametrize("criterion", ["sum", "min", "sum-min"])
def test_projector_warm_sequence_matches_oracle(criterion):
    rng = np.random.default_rng(7)
    labels = np.array([0, 1, 2] * 4)
    part = GroupPartition.from_labels(labels.tolist()).with_protected(
        [np.array([0, 3]), np.array([1]), np.array([])])
    phi = (0.5, 0.3, 0.2)
    spec = {"sum": SumFair(phi), "min": MinFair((0.1, 0.05, 0.0)),
            "sum-min": SumMinFair(phi, (0.2, 0.1, 0.0))}[criterion]
    proj = Projector(spec, part)
    for y in _warm_sequence(rng, part.n):
        np.testing.assert_allclose(proj(y)[0], active_set_project(y, spec, part), atol=1e-12)


def test_projector_fallback_path_is_exact():
    rng = np.random.default_rng(3)
    part = GroupPartition.from_labels(rng.integers(0, 3, 400).tolist())
    spec = SumFair((0.2, 0.3, 0.5))
    proj = Projector(spec, part)
    proj.NEWTON_ROUNDS = 0  # every call that needs a flip falls back to bisection
    for y in _warm_sequence(rng, part.n, steps=5):
        x, duals = proj(y)
        np.testing.assert_allclose(x, project(y, spec, part)[0], atol=1e-14)
        np.testing.assert_allclose(duals.primal(y), x, atol=1e-15)


def test_projector_large_jump_recovers():
    rng = np.random.default_rng(5)
    part = GroupPartition.from_labels(rng.integers(0, 2, 1000).tolist())
    spec = SumFair((0.9, 0.1))
    proj = Projector(spec, part)
    proj(rng.uniform(0, 1, 1000))
    y = rng.uniform(-5, 5, 1000)  # far from the previous support
    np.testing.assert_allclose(proj(y)[0], project(y, spec, part)[0], atol=1e-14)


# ---------------------------------------------------------------------------
# properties


@st.composite
def instances(draw, criterion=None, max_n=12, max_k=3):
    criterion = criterion or draw(st.sampled_from(["sum", "min", "sum-min"]))
    n = draw(st.integers(1, max_n))
    K = draw(st.integers(1, min(max_k, n)))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, K, n)
    labels[:K] = np.arange(K)
    rng.shuffle(labels)
    part = GroupPartition.from_labels(labels.tolist())
    K = part.n_groups
    y = rng.uniform(-0.5, 1.5, n)
    phi = rng.dirichlet(np.ones(K))
    sets = [np.flatnonzero(part.assignment == k) for k in range(K)]
    sets = [s[rng.random(s.size) < 0.4] for s in sets]
    part = part.with_protected(sets)
    if criterion == "sum":
        spec = SumFair(tuple(phi))
    elif criterion == "min":
        budget = rng.uniform(0, 1)
        total = sum(s.size for s in sets)
        alpha = np.full(K, budget / total if total else 0.0) * rng.uniform(0, 1, K)
        spec = MinFair(tuple(alpha))
    else:
        alpha = np.array([phi[k] / s.size * rng.uniform(0, 1) if s.size else 0.0 for k, s in enumerate(sets)])
        spec = SumMinFair(tuple(phi), tuple(alpha))
    return y, spec, part


def feasible_point(rng, spec, part):
    lower = lower_bounds(spec, part)
    if isinstance(spec, MinFair):
        blocks, targets = [np.arange(part.n)], [1.0]
    else:
        blocks, targets = part.members, spec.targets(part)
    z = lower.copy()
    for idx, t in zip(blocks, targets):
        z[idx] += rng.dirichlet(np.ones(idx.size)) * (t - lower[idx].sum())
    return z


@settings(max_examples=300, deadline=None)
@given(instances())
def test_matches_active_set(inst):
    y, spec, part = inst
    x, _ = project(y, spec, part)
    np.testing.assert_allclose(x, active_set_project(y, spec, part), atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(instances())
def test_feasible_and_idempotent(inst):
    y, spec, part = inst
    x, _ = project(y, spec, part)
    assert constraint_violation(x, spec, part) <= 1e-24 + 1e-12
    assert np.all(x >= lower_bounds(spec, part) - 1e-14)
    np.testing.assert_allclose(project(x, spec, part)[0], x, atol=1e-13)


@settings(max_examples=200, deadline=None)
@given(instances(), st.integers(0, 2**32 - 1))
def test_non_expansive(inst, seed):
    y, spec, part = inst
    y2 = y + np.random.default_rng(seed).normal(0, 0.3, y.size)
    d = np.linalg.norm(project(y, spec, part)[0] - project(y2, spec, part)[0])
    assert d <= np.linalg.norm(y - y2) + 1e-12


@settings(max_examples=100, deadline=None)
@given(instances(), st.integers(0, 2**32 - 1))
def test_normal_cone_certificate(inst, seed):
    y, spec, part = inst
    rng = np.random.default_rng(seed)
    x, _ = project(y, spec, part)
    for _ in range(100):
        z = feasible_point(rng, spec, part)
        assert (y - x) @ (z - x) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(instances(criterion="sum"))
def test_dual_sign_contract(inst):
    y, spec, part = inst
    phi = spec.targets(part)
    for k, idx in enumerate(part.members):
        g = dual_root_function(y[idx], 0.0, phi[k])
        lo, hi = dual_bracket(y[idx], phi[k])
        assert g(hi) == pytest.approx(-phi[k], abs=1e-15)
        if idx.size >= 2 and phi[k] > 0 and np.ptp(y[idx]) > 0:
            assert g(lo) > 0
        else:
            assert g(lo) >= -1e-15


@settings(max_examples=200, deadline=None)
@given(instances(criterion="sum-min"))
def test_block_shift_root(inst):
    y, spec, part = inst
    lower = lower_bounds(spec, part)
    phi = spec.targets(part)
    for k, idx in enumerate(part.members):
        lam, free = solve_block_shift(y[idx], lower[idx], phi[k])
        assert abs(dual_root_function(y[idx], lower[idx], phi[k])(lam)) <= 1e-12
