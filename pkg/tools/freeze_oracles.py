"""Regenerate tests/frozen_values.json from the brute-force oracles.

Only dense linear algebra and the enumeration projector are used, so the
frozen numbers do not depend on the sparse solvers they later check.
"""
import json
import pathlib

import numpy as np

from fairpr.graph import CompressedGraph, GroupPartition
from fairpr.oracle import active_set_project, dense_constrained_pr, dense_transition
from fairpr.pagerank import PrConfig
from fairpr.projection import SumFair

OUT = pathlib.Path(__file__).resolve().parents[1] / "tests" / "frozen_values.json"


def path_graph():
    return CompressedGraph.from_arcs(3, [0, 1], [1, 2], directed=False, vertex_ids=["1", "2", "3"])


def dense_fixed_point(graph, spec, partition, gamma=0.15, iters=5000):
    P = dense_transition(graph)
    v = np.full(graph.n, 1.0 / graph.n)
    x = active_set_project(v, spec, partition)
    for _ in range(iters):
        x = active_set_project((1 - gamma) * P @ x + gamma * v, spec, partition)
    return x


def main():
    g = path_graph()
    part = GroupPartition.from_labels([0, 0, 1])
    spec = SumFair((0.5, 0.5))
    P = dense_transition(g)
    pr = 0.15 * np.linalg.solve(np.eye(3) - 0.85 * P, np.full(3, 1 / 3))
    frozen = {
        "path_pagerank": pr.tolist(),
        "path_sumfair_fixed_point": dense_fixed_point(g, spec, part).tolist(),
        "path_sumfair_constrained_minimizer": dense_constrained_pr(g, PrConfig(), spec, part).tolist(),
    }
    OUT.write_text(json.dumps(frozen, indent=2) + "\n")
    print(json.dumps(frozen, indent=2))


if __name__ == "__main__":
    main()
