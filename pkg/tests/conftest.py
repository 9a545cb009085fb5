import json
import sys
import os
import pathlib

import networkx as nx
import numpy as np
import pytest

from fairpr.graph import CompressedGraph, GroupPartition

HERE = pathlib.Path(__file__).resolve().parent


@pytest.fixture(scope="session")
def frozen():
    return json.loads((HERE / "frozen_values.json").read_text())


def path_graph():
    return CompressedGraph.from_arcs(3, [0, 1], [1, 2], directed=False, vertex_ids=["1", "2", "3"])


@pytest.fixture
def path3():
    return path_graph()


def random_connected_graph(rng, n, kind=None):
    """Connected undirected graph on ``n`` vertices from a few random families."""
    kind = kind or rng.choice(["gnp", "ba", "ws"])
    seed = int(rng.integers(2**31))
    if kind == "ba":
        G = nx.barabasi_albert_graph(n, int(rng.integers(1, 4)), seed=seed)
    elif kind == "ws":
        G = nx.connected_watts_strogatz_graph(n, 4 if n > 4 else 2, 0.3, seed=seed)
    else:
        p = min(1.0, 3.0 * np.log(max(n, 2)) / n)
        G = nx.gnp_random_graph(n, p, seed=seed)
        comps = list(nx.connected_components(G))
        for a, b in zip(comps, comps[1:]):
            G.add_edge(min(a), min(b))
    return CompressedGraph.from_networkx(G)


def random_partition(rng, n, K):
    labels = rng.integers(0, K, n)
    labels[:K] = np.arange(K)  # every group non-empty
    rng.shuffle(labels)
    return GroupPartition.from_labels(labels.tolist())


def random_phi(rng, K):
    return tuple(rng.dirichlet(np.ones(K)).tolist())


def data_dir():
    path = os.environ.get("FAIRPR_DATA_DIR")
    return pathlib.Path(path) if path else HERE / "data"


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
