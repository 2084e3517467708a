import numpy as np
import pytest

from ldps_core import (
    DataMatrix,
    DissimilarityMatrix,
    EmptyInput,
    InvalidBandwidth,
    InvalidParameter,
    InvalidRadius,
    KEstimationFailed,
    LdpsError,
    LdpsParams,
    NonFiniteData,
    chunked,
    run_parallel,
    spawn_seeds,
    stable_sort_descending,
)


def test_data_matrix_rejects_nan_and_empty():
    with pytest.raises(NonFiniteData):
        DataMatrix([[0.0, np.nan]])
    with pytest.raises(EmptyInput):
        DataMatrix(np.empty((0, 2)))


def test_data_matrix_is_read_only_and_copies():
    raw = np.array([[1.0, 2.0], [3.0, 4.0]])
    data = DataMatrix(raw)
    raw[0, 0] = 99.0
    assert data.points[0, 0] == 1.0
    with pytest.raises(ValueError):
        data.points[0, 0] = 5.0
    assert (data.m, data.p) == (2, 2)


def test_one_dimensional_input_becomes_a_column():
    data = DataMatrix([1.0, 2.0, 3.0])
    assert data.points.shape == (3, 1)


def test_dissimilarity_validation():
    with pytest.raises(InvalidParameter):
        DissimilarityMatrix([[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(InvalidParameter):
        DissimilarityMatrix([[0.0, -1.0], [-1.0, 0.0]])
    with pytest.raises(InvalidParameter):
        DissimilarityMatrix([[1.0, 1.0], [1.0, 0.0]])
    with pytest.raises(NonFiniteData):
        DissimilarityMatrix([[0.0, np.inf], [np.inf, 0.0]])


def test_d_star_and_submatrix():
    D = DissimilarityMatrix([[0.0, 1.0, 4.0], [1.0, 0.0, 9.0], [4.0, 9.0, 0.0]])
    assert D.d_star == 9.0
    sub = D.submatrix([0, 2])
    np.testing.assert_array_equal(sub.d, [[0.0, 4.0], [4.0, 0.0]])


def test_params_validation_and_derived_values():
    with pytest.raises(InvalidBandwidth):
        LdpsParams(h_bar=0.0)
    with pytest.raises(InvalidRadius):
        LdpsParams(r_bar=-0.1)
    with pytest.raises(InvalidParameter):
        LdpsParams(density_exponent=0.5)
    params = LdpsParams(h_bar=0.05, r_bar=0.2, density_exponent=0.25, tau_min=0.3)
    assert params.h(10.0) == pytest.approx(0.5)
    assert params.r(10.0) == pytest.approx(2.0)
    moved = params.with_theta(0.1, 0.4)
    assert (moved.h_bar, moved.r_bar, moved.density_exponent, moved.tau_min) == (0.1, 0.4, 0.25, 0.3)
    assert params.with_threshold(1.0).gamma_o_threshold == 1.0


def test_stable_sort_keeps_index_order_on_ties():
    values, order = stable_sort_descending([0.5, 0.9, 0.5, 0.9])
    np.testing.assert_array_equal(order, [1, 3, 0, 2])
    np.testing.assert_array_equal(values, [0.9, 0.9, 0.5, 0.5])
    with pytest.raises(EmptyInput):
        stable_sort_descending([])
    with pytest.raises(NonFiniteData):
        stable_sort_descending([1.0, np.nan])


def test_spawn_seeds_are_reproducible_and_distinct():
    first = spawn_seeds(42, 5)
    assert first == spawn_seeds(42, 5)
    assert len(set(first)) == 5
    assert first != spawn_seeds(43, 5)


def test_run_parallel_keeps_item_order():
    items = list(range(20))
    assert run_parallel(lambda x: x * x, items, threads=4) == [x * x for x in items]
    assert run_parallel(lambda x: x + 1, items, threads=1) == [x + 1 for x in items]


def test_chunked():
    assert chunked([1, 2, 3, 4, 5], 2) == [[1, 2], [3, 4], [5]]


def test_errors_share_one_base():
    assert issubclass(KEstimationFailed, LdpsError)
    assert issubclass(LdpsError, ValueError)
