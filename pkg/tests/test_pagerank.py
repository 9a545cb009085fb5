import networkx as nx
import numpy as np
import pytest
from scipy import sparse

from fairpr.graph import CompressedGraph, stationary_distribution
from fairpr.oracle import dense_transition
from fairpr.pagerank import (
    PrConfig,
    gradient_f,
    label_spread_iterate,
    objective_f,
    pagerank_residual,
    power_iterate,
)

from conftest import random_connected_graph


def dense_pagerank(g, gamma=0.15):
    P = dense_transition(g)
    return gamma * np.linalg.solve(np.eye(g.n) - (1 - gamma) * P, np.full(g.n, 1 / g.n))


def test_config_validation():
    for bad in (dict(gamma=0), dict(gamma=1), dict(tol=0), dict(max_iter=0), dict(teleport=[0.5, 0.6])):
        with pytest.raises(ValueError):
            PrConfig(**bad)
    cfg = PrConfig().resolve(4)
    assert cfg.tol == pytest.approx(4e-6)
    np.testing.assert_allclose(cfg.teleport, 0.25)


def test_two_cycle_is_uniform():
    g = CompressedGraph.from_arcs(2, [0], [1], directed=False)
    x, report = power_iterate(g)
    np.testing.assert_allclose(x, [0.5, 0.5])
    assert report.converged


def test_path_matches_dense_solve(path3, frozen):
    x, rep = power_iterate(path3, PrConfig(tol=1e-14))
    np.testing.assert_allclose(x, frozen["path_pagerank"], atol=1e-8)
    np.testing.assert_allclose(x, dense_pagerank(path3), atol=1e-12)
    assert len(rep.residuals) == rep.iterations and rep.residuals[-1] <= 1e-14


def test_networkx_agreement():
    G = nx.karate_club_graph()
    g = CompressedGraph.from_networkx(G)
    x, _ = power_iterate(g, PrConfig(tol=1e-13))
    ref = nx.pagerank(G, alpha=0.85, tol=1e-14, weight=None)
    np.testing.assert_allclose(x, [ref[v] for v in G], atol=1e-10)


def test_iteration_cap_reported():
    g = random_connected_graph(np.random.default_rng(0), 50)
    _, rep = power_iterate(g, PrConfig(tol=1e-300, max_iter=3))
    assert rep.iterations == 3 and not rep.converged


def test_callback_starts_at_teleport(path3):
    seen = []
    power_iterate(path3, callback=lambda t, x: seen.append((t, x.copy())))
    assert seen[0][0] == 0
    np.testing.assert_allclose(seen[0][1], 1 / 3)


@pytest.mark.parametrize("G", [nx.path_graph(3), nx.star_graph(3)], ids=["path", "star"])
def test_label_spreading_matches(G):
    g = CompressedGraph.from_networkx(G)
    cfg = PrConfig(tol=1e-14)
    np.testing.assert_allclose(label_spread_iterate(g, cfg)[0], power_iterate(g, cfg)[0], atol=1e-10)


def test_objective_matches_dense(path3):
    x = np.array([0.2, 0.5, 0.3])
    pi = stationary_distribution(path3)
    g = 0.15
    P = dense_transition(path3)
    Pinv = np.diag(1 / pi.pi)
    v = np.full(3, 1 / 3)
    ref = 0.5 * (1 - g) * x @ Pinv @ (np.eye(3) - P) @ x + 0.5 * g * (x - v) @ Pinv @ (x - v)
    assert objective_f(path3, pi, PrConfig(), x) == pytest.approx(ref, abs=1e-12)


def test_gradient_is_scaled_residual():
    rng = np.random.default_rng(1)
    g = random_connected_graph(rng, 30)
    pi = stationary_distribution(g)
    cfg = PrConfig()
    x = rng.dirichlet(np.ones(g.n))
    grad = gradient_f(g, pi, cfg, x)
    np.testing.assert_allclose(grad, pagerank_residual(g, cfg, x) / pi.pi, rtol=1e-12)
    # finite-difference check of the gradient
    h = 1e-6
    e = np.zeros(g.n)
    e[3] = h
    fd = (objective_f(g, pi, cfg, x + e) - objective_f(g, pi, cfg, x - e)) / (2 * h)
    assert fd == pytest.approx(grad[3], rel=1e-6)


def test_minimizer_is_pagerank():
    g = random_connected_graph(np.random.default_rng(2), 25)
    x, _ = power_iterate(g, PrConfig(tol=1e-14))
    pi = stationary_distribution(g)
    assert np.abs(gradient_f(g, pi, PrConfig(), x)).max() < 1e-9


def test_objective_rejects_directed():
    g = CompressedGraph.from_arcs(3, [0, 1, 2], [1, 2, 0], directed=True)
    with pytest.raises(ValueError):
        objective_f(g, stationary_distribution(g), PrConfig(), np.full(3, 1 / 3))


def test_plain_pr_l1_contraction():
    rng = np.random.default_rng(5)
    for _ in range(5):
        g = random_connected_graph(rng, 60)
        p = dense_pagerank(g)
        trace = []
        power_iterate(g, PrConfig(tol=1e-13), callback=lambda t, x: trace.append(x))
        err = [np.abs(x - p).sum() for x in trace]
        assert all(b <= 0.85 * a + 1e-12 for a, b in zip(err, err[1:]))


def test_sparse_storage_matches_scipy(path3):
    A = sparse.csc_matrix((np.ones(path3.row_idx.size), path3.row_idx, path3.col_ptr), shape=(3, 3))
    np.testing.assert_array_equal(A.toarray(), [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
