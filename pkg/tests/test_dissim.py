import numpy as np
import pytest
from scipy.sparse.csgraph import floyd_warshall

from ldps_core import DataMatrix, DisconnectedGraph, InvalidNeighborCount, InvalidParameter, MeasureKind
from dissim import (
    MIN_EDGE_WEIGHT,
    UNREACHABLE_SCALE,
    NeighborGraph,
    build_dissimilarity,
    build_tnn_graph,
    manifold_distance,
    manifold_dissimilarity,
    min_max_normalize,
    squared_euclidean,
)


def test_min_max_normalize_maps_columns_to_unit_interval():
    data = DataMatrix([[1.0, 5.0, 7.0], [3.0, 5.0, -1.0], [2.0, 5.0, 3.0]])
    x = min_max_normalize(data).points
    np.testing.assert_allclose(x[:, 0], [0.0, 1.0, 0.5])
    np.testing.assert_array_equal(x[:, 1], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(x[:, 2], [1.0, 0.0, 0.5])


@pytest.mark.parametrize('seed', range(50))
def test_squared_euclidean_matches_double_loop(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 61))
    x = rng.random((m, int(rng.integers(1, 5))))
    D = squared_euclidean(DataMatrix(x))
    for i in range(m):
        for j in range(m):
            assert D.d[i, j] == pytest.approx(((x[i] - x[j]) ** 2).sum(), abs=1e-12)
    assert D.measure is MeasureKind.SQUARED_EUCLIDEAN


def test_tnn_rejects_bad_neighbor_counts():
    data = DataMatrix(np.arange(5.0))
    with pytest.raises(InvalidNeighborCount):
        build_tnn_graph(data, 0)
    with pytest.raises(InvalidNeighborCount):
        build_tnn_graph(data, 5)


def test_tnn_graph_is_symmetric_and_has_t_neighbors():
    rng = np.random.default_rng(1)
    data = DataMatrix(rng.random((30, 2)))
    graph = build_tnn_graph(data, 4)
    weights = {}
    for i, edges in enumerate(graph.adjacency):
        for j, w in edges:
            weights[(i, j)] = w
    for (i, j), w in weights.items():
        assert weights[(j, i)] == w
        assert w > 0
    assert np.all(graph.degrees() >= 4)


def test_far_groups_stay_separate_components():
    left = np.random.default_rng(2).random((10, 2))
    data = DataMatrix(np.vstack([left, left + 100.0]))
    graph = build_tnn_graph(data, 9)
    labels = graph.component_labels()
    assert set(labels[:10]).isdisjoint(labels[10:])
    D = manifold_distance(graph)
    assert D.d[0, 10] == D.d_star
    assert D.d[0, 10] >= UNREACHABLE_SCALE * D.d[:10, :10].max()


def test_manifold_distance_on_a_line():
    # t=1: 0-1, 1-3, 3-6 are the only edges, so paths walk the line
    data = DataMatrix([0.0, 1.0, 3.0, 6.0])
    D = manifold_dissimilarity(data, 1)
    assert D.d[0, 3] == pytest.approx(6.0)
    assert D.d[1, 3] == pytest.approx(5.0)
    assert D.measure is MeasureKind.MANIFOLD_GRAPH
    assert D.t == 1


@pytest.mark.parametrize('seed', range(50))
def test_manifold_distance_matches_floyd_warshall(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(8, 61))
    data = DataMatrix(rng.random((m, 2)))
    graph = build_tnn_graph(data, int(rng.integers(3, 7)))
    D = manifold_distance(graph)
    oracle = floyd_warshall(graph.to_sparse(), directed=False)
    reachable = np.isfinite(oracle)
    np.testing.assert_allclose(D.d[reachable], oracle[reachable], rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(D.d[~reachable], UNREACHABLE_SCALE * oracle[reachable].max())


def test_manifold_distance_is_thread_count_independent():
    rng = np.random.default_rng(5)
    data = DataMatrix(rng.random((150, 2)))
    graph = build_tnn_graph(data, 5)
    np.testing.assert_array_equal(manifold_distance(graph, threads=1).d, manifold_distance(graph, threads=3).d)


def test_coincident_points_get_a_tiny_positive_distance():
    data = DataMatrix([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    D = manifold_dissimilarity(data, 1)
    assert D.d[0, 1] == MIN_EDGE_WEIGHT
    np.testing.assert_array_equal(np.diag(D.d), 0.0)


def test_components_sit_far_beyond_every_path():
    graph = NeighborGraph((((1, 1.0),), ((0, 1.0), (2, 2.0)), ((1, 2.0),), ((4, 0.5),), ((3, 0.5),)), t=1)
    D = manifold_distance(graph)
    assert D.d[0, 2] == pytest.approx(3.0)
    assert D.d[3, 4] == pytest.approx(0.5)
    across = D.d[np.ix_([0, 1, 2], [3, 4])]
    np.testing.assert_array_equal(across, UNREACHABLE_SCALE * 3.0)
    assert D.d_star == UNREACHABLE_SCALE * 3.0
    np.testing.assert_array_equal(D.d, D.d.T)


def test_graph_without_edges_is_rejected():
    graph = NeighborGraph(((), ()), t=1)
    with pytest.raises(DisconnectedGraph):
        manifold_distance(graph)


def test_build_dissimilarity_dispatch():
    data = DataMatrix(np.arange(6.0))
    assert build_dissimilarity(data, 'euclid').measure is MeasureKind.SQUARED_EUCLIDEAN
    assert build_dissimilarity(data, 'manifold', t=2).measure is MeasureKind.MANIFOLD_GRAPH
    with pytest.raises(InvalidParameter):
        build_dissimilarity(data, 'cosine')
