"""Separation of non-intersecting components via the k-NN graph Laplacian."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.cluster.hierarchy import linkage

from .errors import InvalidInputError
from .geometry import eig_sym, knn_all

log = logging.getLogger(__name__)

DEFAULT_ZERO_TOL = 1e-8


@dataclass(frozen=True)
class NeighborGraph:
    """Undirected, loop-free graph stored as sorted adjacency lists."""

    n: int
    adjacency: tuple

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.intp)

    def edges(self):
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if i < j:
                    yield i, int(j)

    @classmethod
    def from_edges(cls, n, edges):
        adj = [set() for _ in range(n)]
        for i, j in edges:
            if i == j:
                raise InvalidInputError(f"self-loop at vertex {i}")
            adj[i].add(j)
            adj[j].add(i)
        return cls(n, tuple(np.array(sorted(a), dtype=np.intp) for a in adj))


def build_knn_graph(points, k, mutual=False) -> NeighborGraph:
    """Symmetrized k-NN graph.

    With the default union rule ``i ~ j`` when either lists the other, so every
    vertex has degree at least ``min(k, n - 1)``. ``mutual=True`` requires both.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 2:
        raise InvalidInputError(f"a neighbor graph needs at least 2 points, got {n}")
    idx, _ = knn_all(pts, k)
    rows = np.repeat(np.arange(n), idx.shape[1])
    directed = sparse.csr_matrix((np.ones(rows.size), (rows, idx.ravel())), shape=(n, n))
    sym = directed.multiply(directed.T) if mutual else directed + directed.T
    sym = sparse.csr_matrix(sym)
    sym.setdiag(0)
    sym.eliminate_zeros()
    sym.sort_indices()
    return NeighborGraph(n, tuple(sym.indices[sym.indptr[i]:sym.indptr[i + 1]].astype(np.intp)
                                  for i in range(n)))


def laplacian(g: NeighborGraph) -> np.ndarray:
    """Degree-minus-adjacency matrix of ``g``."""
    lap = np.zeros((g.n, g.n))
    for i, nbrs in enumerate(g.adjacency):
        lap[i, nbrs] = -1.0
        lap[i, i] = len(nbrs)
    return lap


def count_components(lap, zero_tol=DEFAULT_ZERO_TOL) -> int:
    """Number of (numerically) zero eigenvalues of a graph Laplacian."""
    vals, _ = eig_sym(lap)
    scale = max(float(vals[0]), 1.0) if len(vals) else 1.0
    return max(1, int(np.count_nonzero(vals < zero_tol * scale)))


def graph_components(g: NeighborGraph) -> np.ndarray:
    """Connected-component labels, numbered by smallest member index."""
    labels = np.full(g.n, -1, dtype=np.intp)
    next_id = 0
    for start in range(g.n):
        if labels[start] >= 0:
            continue
        labels[start] = next_id
        stack = [start]
        while stack:
            v = stack.pop()
            for w in g.adjacency[v]:
                if labels[w] < 0:
                    labels[w] = next_id
                    stack.append(w)
        next_id += 1
    return labels


def renumber(labels) -> np.ndarray:
    """Relabel so ids are dense and ordered by each class's smallest member index."""
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first, kind="stable")
    mapping = {labels[first[o]]: new for new, o in enumerate(order)}
    return np.array([mapping[v] for v in labels], dtype=np.intp)


def single_linkage_labels(points, m) -> np.ndarray:
    """Cut the single-linkage dendrogram of ``points`` into exactly ``m`` clusters."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if m == 1 or n == 1:
        return np.zeros(n, dtype=np.intp)
    z = linkage(pts, method="single", metric="euclidean")
    # replay the first n - m merges; cluster ids >= n refer to earlier merges
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step in range(n - m):
        a, b = int(z[step, 0]), int(z[step, 1])
        parent[find(a)] = n + step
        parent[find(b)] = n + step
    return renumber([find(i) for i in range(n)])


def split_components(points, g: NeighborGraph | None, m, by_graph=False) -> np.ndarray:
    """Assign every point to one of ``m`` non-intersecting components.

    The default is single-linkage agglomerative clustering on the raw
    coordinates. With ``by_graph=True`` the connected components of ``g`` are
    used directly when there are exactly ``m`` of them.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if m < 1 or m > n:
        raise InvalidInputError(f"cannot split {n} points into {m} components")
    if by_graph and g is not None:
        labels = graph_components(g)
        if labels.max() + 1 == m:
            return renumber(labels)
        log.warning("graph has %d components but %d were requested; using single linkage",
                    labels.max() + 1, m)
    return single_linkage_labels(pts, m)
