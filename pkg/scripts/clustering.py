"""
Clustering engines: Lloyd k-means, k-medoids (alternating assign / medoid
update), k-means++ seeding, and the LDPS-seeded drivers that estimate k,
pick deterministic seeds and strip outliers before clustering.
"""

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from ldps_core import (
    OUTLIER_LABEL,
    CenterKind,
    ClusterModel,
    DataMatrix,
    DissimilarityMatrix,
    InvalidParameter,
    KEstimationFailed,
    KTooLarge,
    LdpsParams,
    make_rng,
)
from dissim import squared_euclidean
from ldps import LdpsProfile, detect_outliers, search_peaks, select_seeds

DEFAULT_MAX_ITERATIONS = 300
DEFAULT_REL_SSE_TOLERANCE = 1e-9


class SeedKind(enum.Enum):
    RANDOM = "random"
    KMEANS_PLUS_PLUS = "kmeans++"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class SeedMode:
    kind: SeedKind = SeedKind.RANDOM
    seed: int = 0
    indices: tuple = ()

    @classmethod
    def random(cls, seed):
        return cls(SeedKind.RANDOM, seed)

    @classmethod
    def kmeans_plus_plus(cls, seed):
        return cls(SeedKind.KMEANS_PLUS_PLUS, seed)

    @classmethod
    def explicit(cls, indices):
        return cls(SeedKind.EXPLICIT, 0, tuple(int(i) for i in indices))


@dataclass(frozen=True)
class ClusterConfig:
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    rel_sse_tolerance: float = DEFAULT_REL_SSE_TOLERANCE
    seed_mode: SeedMode = field(default_factory=SeedMode)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidParameter(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.rel_sse_tolerance < 0:
            raise InvalidParameter(f"rel_sse_tolerance must be >= 0, got {self.rel_sse_tolerance}")

    def with_seeds(self, seed_mode: SeedMode) -> "ClusterConfig":
        return ClusterConfig(self.max_iterations, self.rel_sse_tolerance, seed_mode)


@dataclass(frozen=True)
class LdpsResult:
    """An LDPS-seeded run: model over the retained points plus what was removed.

    retained[i] is the original index of the model's i-th point.
    """
    model: ClusterModel
    outliers: np.ndarray
    tau_star: float
    seeds: np.ndarray
    retained: np.ndarray
    profile: LdpsProfile

    def labels_with_outliers(self) -> np.ndarray:
        m = len(self.retained) + len(self.outliers)
        labels = np.full(m, OUTLIER_LABEL, dtype=int)
        labels[self.retained] = self.model.assignments
        return labels


def _check_k(k, m):
    if k > m:
        raise KTooLarge(f"k={k} exceeds the number of points {m}")
    if k < 1:
        raise InvalidParameter(f"k must be >= 1, got {k}")


def _has_converged(previous_sse, sse, tolerance):
    if previous_sse is None:
        return False
    if previous_sse == 0:
        return sse == 0
    return abs(previous_sse - sse) / previous_sse < tolerance


# ---------------------------------------------------------------------------
# ASSIGN / UPDATE
# ---------------------------------------------------------------------------

def assign_to_centers(data: DataMatrix, centers) -> np.ndarray:
    """Nearest center by squared Euclidean distance; ties go to the lower center index."""
    return np.argmin(cdist(data.points, np.asarray(centers, dtype=float), metric='sqeuclidean'), axis=1)


def assign_to_medoids(D: DissimilarityMatrix, medoids) -> np.ndarray:
    return np.argmin(D.d[:, np.asarray(medoids, dtype=int)], axis=1)


def assign(space, centers) -> np.ndarray:
    """Dispatch: coordinates for a DataMatrix, medoid indices for a DissimilarityMatrix."""
    if isinstance(space, DissimilarityMatrix):
        return assign_to_medoids(space, centers)
    return assign_to_centers(space, centers)


def update_means(data: DataMatrix, labels, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    counts = np.bincount(labels, minlength=k)
    if np.any(counts == 0):
        raise InvalidParameter(f"clusters {np.flatnonzero(counts == 0).tolist()} are empty")
    sums = np.zeros((k, data.p))
    np.add.at(sums, labels, data.points)
    return sums / counts[:, None]


def update_medoids(D: DissimilarityMatrix, labels, k: int) -> np.ndarray:
    """Per cluster, the member with the smallest total dissimilarity to its cluster."""
    labels = np.asarray(labels, dtype=int)
    medoids = np.empty(k, dtype=int)
    for j in range(k):
        members = np.flatnonzero(labels == j)
        if members.size == 0:
            raise InvalidParameter(f"cluster {j} is empty")
        costs = D.d[np.ix_(members, members)].sum(axis=1)
        medoids[j] = members[int(np.argmin(costs))]
    return medoids


def _repair_empty_clusters(labels, point_costs, k):
    """Give each empty cluster the point currently farthest from its own center."""
    labels = labels.copy()
    point_costs = point_costs.copy()
    moved = []
    for j in range(k):
        if np.any(labels == j):
            continue
        donor_counts = np.bincount(labels, minlength=k)
        eligible = donor_counts[labels] > 1
        candidates = np.where(eligible, point_costs, -np.inf)
        i = int(np.argmax(candidates))
        labels[i] = j
        point_costs[i] = 0.0
        moved.append(i)
    return labels, moved


# ---------------------------------------------------------------------------
# SEEDING
# ---------------------------------------------------------------------------

def _plus_plus(weights_to, m, k, seed):
    rng = make_rng(seed)
    chosen = [int(rng.integers(m))]
    closest = np.asarray(weights_to(chosen[0]), dtype=float).copy()
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(m, p=closest / total))
        else:
            # every remaining point coincides with a chosen seed
            remaining = np.setdiff1d(np.arange(m), chosen)
            nxt = int(rng.choice(remaining))
        chosen.append(nxt)
        closest = np.minimum(closest, weights_to(nxt))
    return np.array(chosen, dtype=int)


def kmeans_plus_plus_seeds(data: DataMatrix, k: int, seed) -> np.ndarray:
    """First seed uniform, each next one drawn with probability proportional to D(x)^2."""
    _check_k(k, data.m)
    x = data.points
    return _plus_plus(lambda i: ((x - x[i]) ** 2).sum(axis=1), data.m, k, seed)


def dissimilarity_plus_plus_seeds(D: DissimilarityMatrix, k: int, seed) -> np.ndarray:
    _check_k(k, D.m)
    return _plus_plus(lambda i: D.d[i], D.m, k, seed)


def random_seeds(m: int, k: int, seed) -> np.ndarray:
    _check_k(k, m)
    return make_rng(seed).choice(m, size=k, replace=False)


def _initial_indices(seed_mode, m, k, plus_plus):
    if seed_mode.kind is SeedKind.EXPLICIT:
        indices = np.asarray(seed_mode.indices, dtype=int)
        if len(indices) != k:
            raise InvalidParameter(f"expected {k} explicit seeds, got {len(indices)}")
        return indices
    if seed_mode.kind is SeedKind.KMEANS_PLUS_PLUS:
        return plus_plus(k, seed_mode.seed)
    return random_seeds(m, k, seed_mode.seed)


# ---------------------------------------------------------------------------
# ENGINES
# ---------------------------------------------------------------------------

def k_means(data: DataMatrix, k: int, config: Optional[ClusterConfig] = None,
            initial_centers=None) -> ClusterModel:
    """Lloyd iterations until assignments repeat, SSE stalls, or max_iterations."""
    config = config or ClusterConfig()
    _check_k(k, data.m)
    x = data.points
    if initial_centers is None:
        seeds = _initial_indices(config.seed_mode, data.m, k,
                                 lambda kk, s: kmeans_plus_plus_seeds(data, kk, s))
        centers = x[seeds].astype(float)
    else:
        centers = np.asarray(initial_centers, dtype=float)
        if centers.shape != (k, data.p):
            raise InvalidParameter(f"initial centers must have shape {(k, data.p)}, got {centers.shape}")

    labels, previous_sse, history = None, None, []
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        sq = cdist(x, centers, metric='sqeuclidean')
        new_labels = np.argmin(sq, axis=1)
        new_labels, _ = _repair_empty_clusters(new_labels, sq[np.arange(data.m), new_labels], k)
        unchanged = labels is not None and np.array_equal(new_labels, labels)
        labels = new_labels
        centers = update_means(data, labels, k)
        sse = float(((x - centers[labels]) ** 2).sum())
        history.append(sse)
        if unchanged or _has_converged(previous_sse, sse, config.rel_sse_tolerance):
            break
        previous_sse = sse

    return ClusterModel(k, CenterKind.COORDINATES, centers, labels, history[-1], iterations, tuple(history))


def k_medoids(D: DissimilarityMatrix, k: int, config: Optional[ClusterConfig] = None) -> ClusterModel:
    """Alternate nearest-medoid assignment and per-cluster medoid update."""
    config = config or ClusterConfig()
    _check_k(k, D.m)
    d = D.d
    medoids = _initial_indices(config.seed_mode, D.m, k,
                               lambda kk, s: dissimilarity_plus_plus_seeds(D, kk, s)).copy()

    labels, previous_sse, history = None, None, []
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        to_medoids = d[:, medoids]
        new_labels = np.argmin(to_medoids, axis=1)
        new_labels, _ = _repair_empty_clusters(new_labels, to_medoids[np.arange(D.m), new_labels], k)
        unchanged = labels is not None and np.array_equal(new_labels, labels)
        labels = new_labels
        medoids = update_medoids(D, labels, k)
        sse = float(d[np.arange(D.m), medoids[labels]].sum())
        history.append(sse)
        if unchanged or _has_converged(previous_sse, sse, config.rel_sse_tolerance):
            break
        previous_sse = sse

    return ClusterModel(k, CenterKind.MEDOID_INDICES, medoids, labels, history[-1], iterations, tuple(history))


def model_objective(space, model: ClusterModel) -> float:
    """Recompute the objective of a model from its assignments."""
    if model.center_kind is CenterKind.MEDOID_INDICES:
        m = len(model.assignments)
        return float(space.d[np.arange(m), model.centers[model.assignments]].sum())
    return float(((space.points - model.centers[model.assignments]) ** 2).sum())


# ---------------------------------------------------------------------------
# LDPS DRIVERS
# ---------------------------------------------------------------------------

def _ldps_initialize(D, k_star, params):
    profile = search_peaks(D, params)
    k = k_star if k_star is not None else profile.estimated_k
    if k == -1:
        raise KEstimationFailed(
            f"tau*={profile.tau_star:.4f} is below tau_min={params.tau_min}; pass k explicitly"
        )
    selection = select_seeds(profile, k)
    outliers = detect_outliers(profile, params.gamma_o_threshold, exclude=selection.indices)
    retained = np.setdiff1d(np.arange(D.m), outliers)
    # seeds are never outliers, so each has a position among the retained points
    local_seeds = np.searchsorted(retained, selection.indices)
    return profile, selection, outliers, retained, local_seeds


def ldps_means(data: DataMatrix, k_star: Optional[int] = None, params: Optional[LdpsParams] = None,
               config: Optional[ClusterConfig] = None, D: Optional[DissimilarityMatrix] = None) -> LdpsResult:
    """LDPS seeds (as coordinates), outlier removal, then k-means on what is left."""
    params = params or LdpsParams()
    config = config or ClusterConfig()
    D = D if D is not None else squared_euclidean(data)
    profile, selection, outliers, retained, local_seeds = _ldps_initialize(D, k_star, params)
    kept = data.subset(retained)
    model = k_means(kept, len(local_seeds), config, initial_centers=kept.points[local_seeds])
    return LdpsResult(model, outliers, selection.tau_star, selection.indices, retained, profile)


def ldps_medoids(D: DissimilarityMatrix, k_star: Optional[int] = None, params: Optional[LdpsParams] = None,
                 config: Optional[ClusterConfig] = None) -> LdpsResult:
    """LDPS seeds (as indices), outlier rows/columns dropped, then k-medoids.

    Medoids in the returned model are original point indices.
    """
    params = params or LdpsParams()
    config = config or ClusterConfig()
    profile, selection, outliers, retained, local_seeds = _ldps_initialize(D, k_star, params)
    local = k_medoids(D.submatrix(retained), len(local_seeds), config.with_seeds(SeedMode.explicit(local_seeds)))
    model = ClusterModel(local.k, local.center_kind, retained[local.centers], local.assignments,
                         local.sse, local.iterations, local.sse_history)
    return LdpsResult(model, outliers, selection.tau_star, selection.indices, retained, profile)
