"""Graph ingestion and the random-walk operators built on it.

Graphs are stored column-oriented: the arcs leaving vertex ``j`` are
``row_idx[col_ptr[j]:col_ptr[j + 1]]``.  Undirected graphs store both
directions of every edge.
"""
from __future__ import annotations

import io
import os
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphFormatError(ValueError):
    """Raised for malformed edge-list, group or protected-set input."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DanglingVertexWarning(UserWarning):
    pass


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class CompressedGraph:
    """Immutable unweighted graph in compressed sparse column layout.

    Attributes
    ----------
    n : int
        Number of vertices.
    m : int
        Number of edges (arcs for directed graphs, unordered pairs otherwise).
    col_ptr : ndarray of shape (n + 1,)
        Offsets into ``row_idx`` per source vertex.
    row_idx : ndarray
        Destination of every stored arc.
    out_degree : ndarray of shape (n,)
        Out-degree (degree, for undirected graphs).
    directed : bool
    vertex_ids : tuple of str
        External token of each dense vertex index.
    """

    n: int
    m: int
    col_ptr: np.ndarray = field(repr=False)
    row_idx: np.ndarray = field(repr=False)
    out_degree: np.ndarray = field(repr=False)
    directed: bool = False
    vertex_ids: tuple = field(default=(), repr=False)

    def __eq__(self, other):
        if not isinstance(other, CompressedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and self.directed == other.directed
            and self.vertex_ids == other.vertex_ids
            and np.array_equal(self.col_ptr, other.col_ptr)
            and np.array_equal(self.row_idx, other.row_idx)
        )

    __hash__ = None

    @classmethod
    def from_arcs(cls, n, src, dst, directed=False, vertex_ids=None):
        """Build a graph from integer arc endpoints.

        Self-loops and duplicate arcs are dropped.  For undirected graphs
        each pair is mirrored, so ``(u, v)`` and ``(v, u)`` collapse to a
        single edge.
        """
        n = int(n)
        if n <= 0:
            raise GraphFormatError("graph has no vertices")
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValueError("src and dst must have the same length")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("arc endpoint out of range [0, n)")
        keep = src != dst
        src, dst = src[keep], dst[keep]
        if not directed:
            src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        key = np.unique(src * n + dst)
        src, dst = key // n, key % n
        counts = np.bincount(src, minlength=n)
        col_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=col_ptr[1:])
        m = key.size if directed else key.size // 2
        if vertex_ids is None:
            vertex_ids = tuple(str(i) for i in range(n))
        else:
            vertex_ids = tuple(str(v) for v in vertex_ids)
            if len(vertex_ids) != n:
                raise ValueError("vertex_ids must have length n")
        return cls(
            n=n,
            m=int(m),
            col_ptr=_readonly(col_ptr),
            row_idx=_readonly(dst),
            out_degree=_readonly(counts.astype(np.int64)),
            directed=bool(directed),
            vertex_ids=vertex_ids,
        )

    @classmethod
    def from_networkx(cls, G):
        nodes = list(G.nodes())
        index = {v: i for i, v in enumerate(nodes)}
        edges = np.array([(index[u], index[v]) for u, v in G.edges()], dtype=np.int64).reshape(-1, 2)
        return cls.from_arcs(len(nodes), edges[:, 0], edges[:, 1], directed=G.is_directed(), vertex_ids=nodes)

    @cached_property
    def index(self):
        """Mapping from vertex token to dense index."""
        return {v: i for i, v in enumerate(self.vertex_ids)}

    @cached_property
    def dangling(self):
        return _readonly(np.flatnonzero(self.out_degree == 0))

    def arcs(self):
        """Return the stored arcs as ``(src, dst)`` index arrays."""
        src = np.repeat(np.arange(self.n), self.out_degree)
        return src, np.asarray(self.row_idx)

    @cached_property
    def adjacency(self):
        """Sparse adjacency with ``A[i, j] = 1`` for every arc ``j -> i``."""
        data = np.ones(self.row_idx.size)
        A = sp.csc_matrix((data, self.row_idx, self.col_ptr), shape=(self.n, self.n))
        return A.tocsr()

    @cached_property
    def _walk(self):
        # column-normalized adjacency, dangling columns left empty
        deg = self.out_degree.astype(float)
        inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
        data = np.repeat(inv, self.out_degree)
        W = sp.csc_matrix((data, self.row_idx, self.col_ptr), shape=(self.n, self.n))
        return W.tocsr()

    def is_connected(self):
        """Weak connectivity for undirected graphs, strong for directed ones."""
        n_comp, _ = connected_components(
            self.adjacency, directed=self.directed, connection="strong"
        )
        return n_comp == 1


def transition_apply(graph, x):
    """Compute ``P @ x`` for the column-stochastic walk ``P = A D^-1``.

    Mass on dangling vertices is spread uniformly over all vertices, so the
    total of a nonnegative ``x`` is preserved.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (graph.n,):
        raise ValueError(f"expected vector of length {graph.n}, got shape {x.shape}")
    y = graph._walk @ x
    if graph.dangling.size:
        y += x[graph.dangling].sum() / graph.n
    return y


def normalized_adjacency_apply(graph, x):
    """Compute ``D^-1/2 A D^-1/2 @ x`` on an undirected graph."""
    if graph.directed:
        raise ValueError("normalized adjacency is defined for undirected graphs only")
    if np.any(graph.out_degree == 0):
        raise ValueError("normalized adjacency requires every vertex to have positive degree")
    x = np.asarray(x, dtype=float)
    if x.shape != (graph.n,):
        raise ValueError(f"expected vector of length {graph.n}, got shape {x.shape}")
    s = 1.0 / np.sqrt(graph.out_degree)
    return s * (graph.adjacency @ (s * x))


@dataclass(frozen=True)
class StationaryDistribution:
    pi: np.ndarray
    source: str  # "exact-undirected" | "power-iterated-directed"


def stationary_distribution(graph, tol=1e-12, max_iter=200_000):
    """Stationary distribution of the walk ``P``.

    Undirected graphs use the exact ``degree / 2m``.  Directed graphs run
    power iteration on the lazy chain ``(I + P) / 2``, which has the same
    stationary vector and is aperiodic, until ``||P pi - pi||_1 <= tol``.
    """
    if not graph.directed:
        if np.any(graph.out_degree == 0):
            raise ValueError("isolated vertex: stationary distribution has a zero entry")
        pi = graph.out_degree / (2.0 * graph.m)
        return StationaryDistribution(_readonly(pi), "exact-undirected")

    pi = np.full(graph.n, 1.0 / graph.n)
    for _ in range(max_iter):
        Ppi = transition_apply(graph, pi)
        if np.abs(Ppi - pi).sum() <= tol:
            break
        pi = 0.5 * (pi + Ppi)
        pi /= pi.sum()
    else:
        raise RuntimeError(
            f"stationary distribution did not converge in {max_iter} iterations; "
            "the chain is likely reducible"
        )
    if np.any(pi <= 0):
        raise RuntimeError("stationary distribution has non-positive entries; graph is not strongly connected")
    return StationaryDistribution(_readonly(pi), "power-iterated-directed")


# ---------------------------------------------------------------------------
# text formats


def _iter_lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        yield from source
    else:
        yield from source


def _records(source, what):
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line[0] in "#%":
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"expected 2 tokens in {what} line, got {len(parts)}", lineno)
        yield lineno, parts[0], parts[1]


def load_edge_list(source, directed=False, strict=False):
    """Parse a whitespace separated edge list.

    ``source`` is a path, an open text file, or an iterable of lines.
    Vertex tokens are mapped to dense indices in order of first
    appearance.  With ``strict=True`` graphs that are not (strongly)
    connected are rejected.
    """
    index = {}
    src, dst = [], []
    for _, a, b in _records(source, "edge"):
        for tok in (a, b):
            if tok not in index:
                index[tok] = len(index)
        src.append(index[a])
        dst.append(index[b])
    if not index:
        raise GraphFormatError("empty graph")
    graph = CompressedGraph.from_arcs(len(index), src, dst, directed=directed, vertex_ids=list(index))
    if graph.m == 0:
        raise GraphFormatError("graph has no edges after dropping self-loops")
    if graph.dangling.size:
        warnings.warn(
            f"{graph.dangling.size} dangling vertices; their mass is redistributed uniformly",
            DanglingVertexWarning,
            stacklevel=2,
        )
    if strict and not graph.is_connected():
        raise GraphFormatError("graph is not connected" if not directed else "graph is not strongly connected")
    return graph


def write_edge_list(graph, target):
    """Write ``graph`` so that :func:`load_edge_list` rebuilds it exactly.

    Lines are ordered by their larger endpoint so first appearance
    reproduces the index order of any graph that was itself loaded from
    an edge list.
    """
    src, dst = graph.arcs()
    if not graph.directed:
        keep = src < dst
        src, dst = src[keep], dst[keep]
    hi = np.maximum(src, dst)
    lo = np.minimum(src, dst)
    order = np.lexsort((lo, hi))
    src, dst, hi, lo = src[order], dst[order], hi[order], lo[order]

    lines = []
    seen = 0  # vertices 0..seen-1 have appeared
    start = 0
    while start < hi.size:
        stop = start + int(np.searchsorted(hi[start:], hi[start], side="right"))
        block = list(range(start, stop))
        k = int(hi[start])
        if seen < k:
            # vertex k-1 first appears together with k; emit that arc first
            first = next(
                (i for i in block if lo[i] == k - 1 and src[i] == k - 1),
                next((i for i in block if lo[i] == k - 1), block[0]),
            )
            block.remove(first)
            block.insert(0, first)
        for i in block:
            lines.append(f"{graph.vertex_ids[src[i]]} {graph.vertex_ids[dst[i]]}\n")
        seen = max(seen, k + 1)
        start = stop

    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
    else:
        target.writelines(lines)


@dataclass(frozen=True, eq=False)
class GroupPartition:
    """Assignment of every vertex to one of ``K`` groups.

    ``protected_sets[k]`` holds the indices of the protected subset of
    group ``k`` (possibly empty).
    """

    assignment: np.ndarray
    group_labels: tuple
    protected_sets: tuple = ()

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("assignment must be a non-empty 1-d array")
        K = len(self.group_labels)
        if a.min() < 0 or a.max() >= K:
            raise ValueError("group index out of range")
        object.__setattr__(self, "assignment", _readonly(a))
        if not self.protected_sets:
            prot = tuple(_readonly(np.zeros(0, dtype=np.int64)) for _ in range(K))
        else:
            if len(self.protected_sets) != K:
                raise ValueError("need one protected set per group")
            prot = []
            for k, s in enumerate(self.protected_sets):
                s = np.unique(np.asarray(s, dtype=np.int64))
                if s.size and (s.min() < 0 or s.max() >= a.size):
                    raise ValueError("protected vertex out of range")
                if np.any(a[s] != k):
                    raise ValueError(f"protected set {k} contains vertices outside group {k}")
                prot.append(_readonly(s))
            prot = tuple(prot)
        object.__setattr__(self, "protected_sets", prot)

    @classmethod
    def from_labels(cls, labels, protected_sets=None):
        labels = list(labels)
        order = {}
        for lab in labels:
            order.setdefault(lab, len(order))
        assignment = np.array([order[lab] for lab in labels], dtype=np.int64)
        return cls(assignment, tuple(order), tuple(protected_sets or ()))

    @property
    def n(self):
        return self.assignment.size

    @property
    def n_groups(self):
        return len(self.group_labels)

    @cached_property
    def group_sizes(self):
        return _readonly(np.bincount(self.assignment, minlength=self.n_groups))

    @cached_property
    def members(self):
        """Index array of each group, in ascending vertex order."""
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.concatenate([[0], np.cumsum(self.group_sizes)])
        return tuple(_readonly(order[bounds[k]:bounds[k + 1]]) for k in range(self.n_groups))

    @cached_property
    def indicator(self):
        """Dense ``K x n`` 0/1 matrix with a one where vertex ``i`` is in group ``k``."""
        ind = np.zeros((self.n_groups, self.n))
        ind[self.assignment, np.arange(self.n)] = 1.0
        ind.flags.writeable = False
        return ind

    def group_sums(self, x):
        return np.bincount(self.assignment, weights=np.asarray(x, dtype=float), minlength=self.n_groups)

    def with_protected(self, protected_sets):
        return GroupPartition(self.assignment, self.group_labels, tuple(protected_sets))


def load_groups(source, graph):
    """Parse ``vertex group`` lines into a :class:`GroupPartition` for ``graph``."""
    labels = [None] * graph.n
    order = {}
    for lineno, vtok, gtok in _records(source, "group"):
        i = graph.index.get(vtok)
        if i is None:
            raise GraphFormatError(f"unknown vertex {vtok!r}", lineno)
        if labels[i] is not None:
            raise GraphFormatError(f"duplicate vertex {vtok!r}", lineno)
        order.setdefault(gtok, len(order))
        labels[i] = order[gtok]
    missing = [graph.vertex_ids[i] for i, lab in enumerate(labels) if lab is None]
    if missing:
        raise GraphFormatError(f"vertex {missing[0]!r} has no group ({len(missing)} missing)")
    return GroupPartition(np.array(labels, dtype=np.int64), tuple(order))


def load_protected(sources: Sequence, graph, partition):
    """Read protected-vertex files; each vertex joins the set of its own group."""
    sets = [set() for _ in range(partition.n_groups)]
    for source in sources:
        for lineno, raw in enumerate(_iter_lines(source), start=1):
            line = raw.strip()
            if not line or line[0] in "#%":
                continue
            parts = line.split()
            if len(parts) != 1:
                raise GraphFormatError("expected one vertex token per protected-set line", lineno)
            i = graph.index.get(parts[0])
            if i is None:
                raise GraphFormatError(f"unknown vertex {parts[0]!r}", lineno)
            sets[partition.assignment[i]].add(i)
    return partition.with_protected([sorted(s) for s in sets])


def top_degree_protected(graph, partition, group=0, fraction=0.01):
    """Protected set made of the ``ceil(fraction * n_k)`` highest-degree vertices of ``group``.

    Ties in degree are broken by ascending vertex index.
    """
    members = partition.members[group]
    size = max(1, int(np.ceil(fraction * members.size)))
    deg = graph.out_degree[members]
    order = np.lexsort((members, -deg))
    chosen = np.sort(members[order[:size]])
    sets = [np.zeros(0, dtype=np.int64)] * partition.n_groups
    sets[group] = chosen
    return partition.with_protected(sets)
