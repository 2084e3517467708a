import numpy as np
import pytest

from ldps_core import (
    DataMatrix,
    DissimilarityMatrix,
    EmptyGrid,
    InvalidBandwidth,
    InvalidCutoff,
    InvalidParameter,
    InvalidRadius,
    InvalidScore,
    KTooLarge,
    LdpsParams,
    TooFewPoints,
)
from dissim import squared_euclidean
from ldps import (
    cfsfdp_assign,
    cfsfdp_baseline,
    choose_cutoff,
    detect_outliers,
    gamma_center,
    gamma_outlier,
    gap_rule,
    grid_search_theta,
    local_density,
    local_distinctiveness_index,
    normalized_density,
    search_peaks,
    select_seeds,
)
from evaluation import error_rate


def _random_dissimilarity(m, seed):
    rng = np.random.default_rng(seed)
    return squared_euclidean(DataMatrix(rng.random((m, 2))))


def test_local_density_matches_double_loop():
    D = _random_dissimilarity(15, 0)
    h = 0.3
    rho = local_density(D, h)
    for i in range(15):
        expected = sum(np.exp(-0.5 * (D.d[i, j] / h) ** 2) / np.sqrt(2 * np.pi) for j in range(15)) / (15 * h)
        assert rho[i] == pytest.approx(expected, rel=1e-12)


def test_single_point_density_is_the_self_term():
    rho = local_density(DissimilarityMatrix([[0.0]]), 1.0)
    assert rho[0] == pytest.approx(1 / np.sqrt(2 * np.pi))
    with pytest.raises(InvalidBandwidth):
        local_density(DissimilarityMatrix([[0.0]]), 0.0)


def test_normalized_density_exponent():
    np.testing.assert_allclose(normalized_density([1.0, 2.0, 4.0]), [0.25, 0.5, 1.0])
    np.testing.assert_allclose(normalized_density([1.0, 16.0], 0.25), [0.5, 1.0])


def test_ldi_matches_brute_force():
    D = _random_dissimilarity(25, 1)
    rho = local_density(D, 0.05)
    r = 0.2
    ldi = local_distinctiveness_index(D, rho, r)
    for i in range(25):
        candidates = [D.d[i, j] for j in range(25) if rho[j] > rho[i] and 0 < D.d[i, j] <= r]
        assert ldi[i] == pytest.approx(min(candidates) / r if candidates else 1.0)
    assert ldi[np.argmax(rho)] == 1.0
    assert np.all((ldi > 0) & (ldi <= 1))


def test_ldi_needs_strictly_denser_neighbors():
    D = DissimilarityMatrix([[0.0, 0.1], [0.1, 0.0]])
    np.testing.assert_array_equal(local_distinctiveness_index(D, [1.0, 1.0], 1.0), [1.0, 1.0])
    with pytest.raises(InvalidRadius):
        local_distinctiveness_index(D, [1.0, 1.0], 0.0)


def test_scores_at_the_corners():
    assert gamma_center([1.0], [1.0])[0] == pytest.approx(1.0)
    assert gamma_center([0.0], [0.0])[0] == pytest.approx(0.0)
    assert gamma_outlier([0.0], [1.0])[0] == pytest.approx(1.0)
    assert gamma_outlier([1.0], [0.0])[0] == pytest.approx(0.0)
    with pytest.raises(InvalidScore):
        gamma_center([1.2], [0.5])


def test_isolated_low_density_points_score_as_outliers():
    rho_bar, ldi = np.meshgrid(np.arange(0, 10) / 100, np.arange(81, 101) / 100)
    assert np.all(gamma_outlier(rho_bar.ravel(), ldi.ravel()) > 0.95)


def test_gap_rule_picks_the_largest_gap():
    order, gaps, k, tau = gap_rule([0.1, 0.85, 0.9, 0.2])
    np.testing.assert_array_equal(order, [2, 1, 3, 0])
    np.testing.assert_allclose(gaps, [0.05, 0.65, 0.1, 0.1])
    assert (k, tau) == (2, pytest.approx(0.65))


def test_gap_rule_ties_take_the_smallest_k():
    _, _, k, tau = gap_rule([1.0, 0.5, 0.0])
    assert (k, tau) == (1, 0.5)


def test_gap_rule_ignores_the_drop_after_the_last_point():
    # the trailing drop 0.6 -> 0 is the biggest, yet every point a peak is not an estimate
    order, gaps, k, tau = gap_rule([0.9, 0.8, 0.7, 0.6])
    assert gaps[-1] == pytest.approx(0.6)
    assert k == 1
    assert tau == pytest.approx(0.1)


def test_gap_rule_all_tied_scores_make_every_point_a_peak():
    _, _, k, tau = gap_rule([0.7, 0.7, 0.7])
    assert (k, tau) == (3, pytest.approx(0.7))


def test_evenly_spread_points_never_estimate_k_equal_m():
    D = squared_euclidean(DataMatrix(np.linspace(0.0, 1.0, 12)))
    profile = search_peaks(D, LdpsParams())
    assert profile.estimated_k < D.m


def test_two_points_form_two_peaks():
    profile = search_peaks(DissimilarityMatrix([[0.0, 1.0], [1.0, 0.0]]), LdpsParams())
    assert profile.estimated_k == 2
    assert profile.tau_star == pytest.approx(1.0)


def test_peak_search_finds_three_blobs(three_blobs):
    data, labels = three_blobs
    profile = search_peaks(squared_euclidean(data), LdpsParams())
    assert profile.estimated_k == 3
    assert sorted(labels[profile.peak_indices]) == [0, 1, 2]
    assert profile.tau_star > 0.3
    assert profile.tau_star == profile.gaps[2]


def test_peak_search_reports_failure_below_tau_min(three_blobs):
    data, _ = three_blobs
    profile = search_peaks(squared_euclidean(data), LdpsParams(tau_min=1.0))
    assert profile.estimated_k == -1
    assert profile.peak_indices.size == 0


def test_peak_search_needs_two_points():
    with pytest.raises(TooFewPoints):
        search_peaks(DissimilarityMatrix([[0.0]]), LdpsParams())


def test_select_seeds(three_blobs):
    data, _ = three_blobs
    profile = search_peaks(squared_euclidean(data), LdpsParams())
    seeds = select_seeds(profile, 5)
    np.testing.assert_array_equal(seeds.indices, profile.sorted_order[:5])
    assert seeds.tau_star == profile.gaps[4]
    with pytest.raises(KTooLarge):
        select_seeds(profile, data.m + 1)
    with pytest.raises(InvalidParameter):
        select_seeds(profile, 0)


def test_detect_outliers_flags_a_far_point(three_blobs):
    data, _ = three_blobs
    points = np.vstack([data.points, [[3.0, 3.0]]])
    profile = search_peaks(squared_euclidean(DataMatrix(points)), LdpsParams())
    outliers = detect_outliers(profile, 0.95)
    np.testing.assert_array_equal(outliers, [len(points) - 1])
    assert set(detect_outliers(profile, 0.5)) >= set(outliers)
    with pytest.raises(InvalidParameter):
        detect_outliers(profile, 1.5)


def test_detect_outliers_never_returns_excluded_points():
    profile = search_peaks(DissimilarityMatrix([[0.0, 1.0], [1.0, 0.0]]), LdpsParams())
    assert detect_outliers(profile, 0.0).size == 0
    assert detect_outliers(profile, 0.0, exclude=[0]).tolist() == [1]


def test_grid_search_ties_prefer_small_parameters():
    D = DissimilarityMatrix([[0.0, 1.0], [1.0, 0.0]])
    result = grid_search_theta(D, h_grid=(0.2, 0.1), r_grid=(0.3, 0.2))
    assert result.theta == (0.1, 0.2)
    assert len(result.table) == 4
    assert all(row[2] == pytest.approx(1.0) for row in result.table)


def test_grid_search_on_blobs(three_blobs):
    data, labels = three_blobs
    D = squared_euclidean(data)
    result = grid_search_theta(D, h_grid=(0.02, 0.1), r_grid=(0.05, 0.1, 0.3))
    assert result.profile.estimated_k == 3
    assert sorted(labels[result.profile.peak_indices]) == [0, 1, 2]
    best = max(row[2] for row in result.table)
    assert result.profile.tau_star == best
    threaded = grid_search_theta(D, h_grid=(0.02, 0.1), r_grid=(0.05, 0.1, 0.3), threads=2)
    assert threaded.table == result.table


def test_grid_search_rejects_empty_grids(three_blobs):
    D = squared_euclidean(three_blobs[0])
    with pytest.raises(EmptyGrid):
        grid_search_theta(D, h_grid=(), r_grid=(0.1,))


def test_cfsfdp_finds_the_flower_centers(flower):
    data, labels = flower
    D = squared_euclidean(data)
    profile = cfsfdp_baseline(D, 1.1e-4)
    assert profile.rho_cutoff[0] == 8
    assert profile.rho_cutoff[1] == 3
    assert profile.estimated_k == 3
    assert sorted(profile.center_indices.tolist()) == [0, 9, 18]
    assert error_rate(cfsfdp_assign(D, profile), labels) == 0.0


def test_cfsfdp_cutoff_validation(three_blobs):
    D = squared_euclidean(three_blobs[0])
    with pytest.raises(InvalidCutoff):
        cfsfdp_baseline(D, 0.0)
    dc = choose_cutoff(D)
    assert dc > 0
    off_diagonal = D.d[np.triu_indices(D.m, k=1)]
    assert np.mean(off_diagonal <= dc) == pytest.approx(0.02, abs=0.02)


def test_score_values_from_the_formula():
    # balanced density and distinctiveness beat a dense point with a close dominator
    balanced = gamma_center([0.5], [0.6])[0]
    crowded = gamma_center([1.0], [0.1])[0]
    assert balanced == pytest.approx(0.795 ** 2, abs=1e-12)
    assert crowded == pytest.approx(0.595 ** 2, abs=1e-12)
    assert balanced > crowded
    assert gamma_outlier([0.1], [0.8])[0] == pytest.approx(0.950625, abs=1e-12)
    assert gamma_outlier([1.0], [1.0])[0] == pytest.approx(0.25)


@pytest.mark.parametrize('seed', range(50))
def test_density_and_ldi_oracles_on_random_instances(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 61))
    x = rng.random((m, int(rng.integers(1, 4))))
    D = squared_euclidean(DataMatrix(x))
    h, r = rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5)
    rho = local_density(D, h)
    ldi = local_distinctiveness_index(D, rho, r)
    for i in range(m):
        kernel = [np.exp(-0.5 * (D.d[i, j] / h) ** 2) / np.sqrt(2 * np.pi) for j in range(m)]
        assert rho[i] == pytest.approx(sum(kernel) / (m * h), rel=1e-12)
        dominators = [D.d[i, j] for j in range(m) if rho[j] > rho[i] and 0 < D.d[i, j] <= r]
        assert ldi[i] == (min(dominators) / r if dominators else 1.0)

    dc = choose_cutoff(D) if m > 2 else 0.1
    profile = cfsfdp_baseline(D, dc)
    counts = [sum(D.d[i, j] < dc for j in range(m)) - 1 for i in range(m)]
    np.testing.assert_array_equal(profile.rho_cutoff, counts)
    for i in range(m):
        denser = [j for j in range(m) if counts[j] > counts[i]]
        expected = min(D.d[i, j] for j in denser) if denser else D.d[i].max()
        assert profile.gdi[i] == expected


def test_center_score_is_monotone_in_both_arguments():
    values = np.linspace(0.0, 1.0, 101)
    rho_bar, ldi = np.meshgrid(values, values, indexing='ij')
    scores = gamma_center(rho_bar.ravel(), ldi.ravel()).reshape(101, 101)
    assert np.all(np.diff(scores, axis=0) >= -1e-15)
    assert np.all(np.diff(scores, axis=1) >= -1e-15)
    assert scores[-1, -1] == pytest.approx(1.0)


@pytest.mark.parametrize('seed', range(10))
def test_ldi_past_the_diameter_is_global_distinctiveness_over_r(seed):
    rng = np.random.default_rng(100 + seed)
    m = int(rng.integers(3, 61))
    D = squared_euclidean(DataMatrix(rng.random((m, 2))))
    rho = local_density(D, rng.uniform(0.02, 0.3))
    r = D.d_star * rng.uniform(1.0, 3.0)
    ldi = local_distinctiveness_index(D, rho, r)
    for i in range(m):
        denser = [D.d[i, j] for j in range(m) if rho[j] > rho[i]]
        if denser:
            assert ldi[i] == pytest.approx(min(denser) / r, rel=1e-12)
        else:
            assert ldi[i] == 1.0
