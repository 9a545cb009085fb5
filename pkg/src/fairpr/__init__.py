"""Group-fair PageRank by projected fixed-point iteration."""

from .estimators import FairProjector, FairRARI, PageRank
from .graph import (
    CompressedGraph,
    DanglingVertexWarning,
    GraphFormatError,
    GroupPartition,
    load_edge_list,
    load_groups,
    load_protected,
    stationary_distribution,
    top_degree_protected,
    transition_apply,
    write_edge_list,
)
from .metrics import MetricReport, evaluate, kendall_tau, tv_distance, utility_loss_l2
from .pagerank import PrConfig, SolverReport, label_spread_iterate, power_iterate
from .postprocess import closed_form_two_group, postprocess, zeroed_counts
from .projection import InfeasibleSpecError, MinFair, Projector, SumFair, SumMinFair, project
from .solver import FairSolveConfig, solve

__version__ = "0.1.0"

__all__ = [
    "CompressedGraph",
    "DanglingVertexWarning",
    "FairProjector",
    "FairRARI",
    "FairSolveConfig",
    "GraphFormatError",
    "GroupPartition",
    "InfeasibleSpecError",
    "MetricReport",
    "MinFair",
    "PageRank",
    "PrConfig",
    "Projector",
    "SolverReport",
    "SumFair",
    "SumMinFair",
    "closed_form_two_group",
    "evaluate",
    "kendall_tau",
    "label_spread_iterate",
    "load_edge_list",
    "load_groups",
    "load_protected",
    "postprocess",
    "power_iterate",
    "project",
    "solve",
    "stationary_distribution",
    "top_degree_protected",
    "transition_apply",
    "tv_distance",
    "utility_loss_l2",
    "write_edge_list",
    "zeroed_counts",
]
