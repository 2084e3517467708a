"""
Dissimilarity builders for LDPS: min-max attribute normalization, squared
Euclidean distances, and manifold distances approximated by shortest paths on
a symmetrized t-nearest-neighbor graph.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial.distance import pdist, squareform

from ldps_core import (
    DataMatrix,
    DisconnectedGraph,
    DissimilarityMatrix,
    InvalidNeighborCount,
    InvalidParameter,
    MeasureKind,
    NonFiniteData,
    chunked,
    run_parallel,
)

# Coincident points would otherwise give zero-length edges
MIN_EDGE_WEIGHT = 1e-12

# Pairs in different t-nn components sit this many times the longest path apart,
# beyond any kernel bandwidth or LDI radius in the (h_bar, r_bar) grid
UNREACHABLE_SCALE = 100.0

DIJKSTRA_CHUNK = 64


@dataclass(frozen=True)
class NeighborGraph:
    """Symmetrized t-nn graph.

    adjacency[i] is a tuple of (neighbor index, edge weight) sorted by index.
    """
    adjacency: tuple
    t: int

    @property
    def m(self) -> int:
        return len(self.adjacency)

    def degrees(self):
        return np.array([len(edges) for edges in self.adjacency], dtype=int)

    def to_sparse(self):
        rows, cols, weights = [], [], []
        for i, edges in enumerate(self.adjacency):
            for j, w in edges:
                rows.append(i)
                cols.append(j)
                weights.append(w)
        return csr_matrix((weights, (rows, cols)), shape=(self.m, self.m))

    def component_labels(self):
        _, labels = connected_components(self.to_sparse(), directed=False)
        return labels


def min_max_normalize(data: DataMatrix) -> DataMatrix:
    """Map each attribute to [0, 1]; constant attributes become 0."""
    x = np.asarray(data.points, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFiniteData("cannot normalize non-finite data")
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    scale = np.where(span > 0, span, 1.0)
    # constant columns have x == lo, so they land on 0
    return DataMatrix((x - lo) / scale)


def squared_euclidean(data: DataMatrix) -> DissimilarityMatrix:
    d = squareform(pdist(data.points, metric='sqeuclidean'))
    return DissimilarityMatrix(d, MeasureKind.SQUARED_EUCLIDEAN)


def _edge_map_from_neighbors(dist, t):
    m = dist.shape[0]
    edges = [dict() for _ in range(m)]
    for i in range(m):
        order = np.argsort(dist[i], kind='stable')
        order = order[order != i][:t]
        for j in order:
            w = max(float(dist[i, j]), MIN_EDGE_WEIGHT)
            edges[i][int(j)] = w
            edges[int(j)][i] = w
    return edges


def _graph_from_edges(edges, t):
    return NeighborGraph(tuple(tuple(sorted(e.items())) for e in edges), t)


def build_tnn_graph(data: DataMatrix, t: int) -> NeighborGraph:
    """Connect every point to its t nearest points (plain Euclidean) and union-symmetrize; components stay apart."""
    m = data.m
    if t < 1 or t >= m:
        raise InvalidNeighborCount(f"t must satisfy 1 <= t < m={m}, got {t}")
    dist = squareform(pdist(data.points, metric='euclidean'))
    edges = _edge_map_from_neighbors(dist, t)
    return _graph_from_edges(edges, t)


def _separate_components(d):
    """Replace infinite (cross-component) entries with UNREACHABLE_SCALE x the longest path."""
    reachable = np.isfinite(d)
    if reachable.all():
        return d
    longest = float(d[reachable].max())
    if longest <= 0.0:
        raise DisconnectedGraph("graph has no edges to measure its components by")
    return np.where(reachable, d, UNREACHABLE_SCALE * longest)


def manifold_distance(graph: NeighborGraph, threads: int = 1) -> DissimilarityMatrix:
    """All-pairs shortest path lengths, one Dijkstra run per source.

    Points in different components get a common, finite distance far beyond
    every within-component path, so each component peaks on its own.
    """
    sparse = graph.to_sparse()
    sources = list(range(graph.m))
    blocks = run_parallel(
        lambda chunk: dijkstra(sparse, directed=False, indices=chunk),
        chunked(sources, DIJKSTRA_CHUNK),
        threads,
    )
    d = np.vstack(blocks)
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return DissimilarityMatrix(_separate_components(d), MeasureKind.MANIFOLD_GRAPH, graph.t)


def manifold_dissimilarity(data: DataMatrix, t: int, threads: int = 1) -> DissimilarityMatrix:
    return manifold_distance(build_tnn_graph(data, t), threads=threads)


def build_dissimilarity(data: DataMatrix, kind: str = 'euclid', t: int = 10, threads: int = 1) -> DissimilarityMatrix:
    """Dispatch on the CLI spelling of the measure ('euclid' or 'manifold')."""
    if kind == 'euclid':
        return squared_euclidean(data)
    if kind == 'manifold':
        return manifold_dissimilarity(data, t, threads=threads)
    raise InvalidParameter(f"unknown dissimilarity kind: {kind}")
