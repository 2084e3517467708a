"""
Shared types and deterministic helpers for the LDPS clustering toolkit.
Every other script in this folder imports from here: the data/dissimilarity
records, the parameter records, the error hierarchy, the stable sort used for
score ranking, seeding and the thread fan-out helper.
"""

import asyncio
import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

OUTLIER_LABEL = -1

DEFAULT_H_BAR = 0.02
DEFAULT_R_BAR = 0.1
DEFAULT_TAU_MIN = 0.1
DEFAULT_GAMMA_O_THRESHOLD = 0.95
DENSITY_EXPONENTS = (1.0, 0.25)


# ---------------------------------------------------------------------------
# ERRORS
# ---------------------------------------------------------------------------

class LdpsError(ValueError):
    """Base class for every domain error raised by the toolkit."""


class InvalidParameter(LdpsError):
    pass


class EmptyInput(LdpsError):
    pass


class NonFiniteData(LdpsError):
    pass


class InvalidNeighborCount(LdpsError):
    pass


class DisconnectedGraph(LdpsError):
    pass


class InvalidBandwidth(LdpsError):
    pass


class InvalidRadius(LdpsError):
    pass


class InvalidScore(LdpsError):
    pass


class TooFewPoints(LdpsError):
    pass


class KTooLarge(LdpsError):
    pass


class InvalidCutoff(LdpsError):
    pass


class EmptyGrid(LdpsError):
    pass


class KEstimationFailed(LdpsError):
    pass


class CannotPlaceCenters(LdpsError):
    pass


class MalformedFile(LdpsError):
    pass


class ParseError(LdpsError):
    pass


class LabelMismatch(LdpsError):
    pass


# ---------------------------------------------------------------------------
# DATA RECORDS
# ---------------------------------------------------------------------------

def _frozen(array):
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class DataMatrix:
    """m points in p dimensions, one row per point."""
    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise EmptyInput(f"need at least one point with one attribute, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise NonFiniteData("data contains NaN or infinite values")
        object.__setattr__(self, 'points', _frozen(points))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def subset(self, indices) -> "DataMatrix":
        return DataMatrix(self.points[np.asarray(indices, dtype=int)])


class MeasureKind(enum.Enum):
    SQUARED_EUCLIDEAN = "squared-euclidean"
    MANIFOLD_GRAPH = "manifold-graph"


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric m x m dissimilarities plus the measure that produced them.

    `t` is only meaningful for MANIFOLD_GRAPH (the t-nn neighbor count).
    """
    d: np.ndarray
    measure: MeasureKind = MeasureKind.SQUARED_EUCLIDEAN
    t: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'd', _frozen(np.asarray(self.d, dtype=float)))
        validate_dissimilarity(self.d)

    @property
    def m(self) -> int:
        return self.d.shape[0]

    @property
    def d_star(self) -> float:
        return float(self.d.max())

    def submatrix(self, indices) -> "DissimilarityMatrix":
        indices = np.asarray(indices, dtype=int)
        return DissimilarityMatrix(self.d[np.ix_(indices, indices)], self.measure, self.t)


def validate_dissimilarity(d):
    """Raise unless d is square, finite, nonnegative, symmetric with a zero diagonal."""
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
        raise EmptyInput(f"dissimilarity matrix must be square and nonempty, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise NonFiniteData("dissimilarity matrix contains NaN or infinite values")
    if np.any(d < 0):
        raise InvalidParameter("dissimilarities must be nonnegative")
    if np.any(np.diag(d) != 0):
        raise InvalidParameter("dissimilarity matrix must have a zero diagonal")
    if not np.array_equal(d, d.T):
        raise InvalidParameter("dissimilarity matrix must be symmetric")


# ---------------------------------------------------------------------------
# PARAMETER RECORDS
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LdpsParams:
    """Normalized bandwidth/radius plus the knobs of the peak search.

    Absolute h and r are always derived from d*, never stored.
    """
    h_bar: float = DEFAULT_H_BAR
    r_bar: float = DEFAULT_R_BAR
    density_exponent: float = 1.0
    tau_min: float = DEFAULT_TAU_MIN
    gamma_o_threshold: float = DEFAULT_GAMMA_O_THRESHOLD

    def __post_init__(self):
        if not self.h_bar > 0:
            raise InvalidBandwidth(f"h_bar must be > 0, got {self.h_bar}")
        if not self.r_bar > 0:
            raise InvalidRadius(f"r_bar must be > 0, got {self.r_bar}")
        if self.density_exponent not in DENSITY_EXPONENTS:
            raise InvalidParameter(f"density_exponent must be one of {DENSITY_EXPONENTS}, got {self.density_exponent}")
        if self.tau_min < 0:
            raise InvalidParameter(f"tau_min must be >= 0, got {self.tau_min}")
        if not 0 <= self.gamma_o_threshold <= 1:
            raise InvalidParameter(f"gamma_o_threshold must be in [0, 1], got {self.gamma_o_threshold}")

    def h(self, d_star: float) -> float:
        return self.h_bar * d_star

    def r(self, d_star: float) -> float:
        return self.r_bar * d_star

    def with_theta(self, h_bar: float, r_bar: float) -> "LdpsParams":
        return LdpsParams(h_bar, r_bar, self.density_exponent, self.tau_min, self.gamma_o_threshold)

    def with_threshold(self, gamma_o_threshold: float) -> "LdpsParams":
        return LdpsParams(self.h_bar, self.r_bar, self.density_exponent, self.tau_min, gamma_o_threshold)


class CenterKind(enum.Enum):
    COORDINATES = "coordinates"
    MEDOID_INDICES = "medoid-indices"


@dataclass(frozen=True)
class ClusterModel:
    """Result of one k-means / k-medoids run.

    centers holds k x p coordinates (COORDINATES) or k point indices
    (MEDOID_INDICES). sse_history has one objective value per iteration.
    """
    k: int
    center_kind: CenterKind
    centers: np.ndarray
    assignments: np.ndarray
    sse: float
    iterations: int
    sse_history: tuple = field(default_factory=tuple)


# ---------------------------------------------------------------------------
# DETERMINISTIC HELPERS
# ---------------------------------------------------------------------------

def stable_sort_descending(values):
    """Sort descending; equal values keep ascending original index order."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInput("cannot sort an empty list")
    if not np.all(np.isfinite(values)):
        raise NonFiniteData("values to sort must be finite")
    order = np.argsort(-values, kind='stable')
    return values[order], order


def make_rng(seed):
    return np.random.default_rng(seed)


def spawn_seeds(seed, n):
    """n independent child seeds, identical for the same parent seed."""
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


async def _run_parallel_async(fn, items, threads):
    semaphore = asyncio.Semaphore(threads)

    async def _one(item):
        async with semaphore:
            return await asyncio.to_thread(fn, item)

    return await asyncio.gather(*[_one(item) for item in items])


def run_parallel(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map fn over items on up to `threads` worker threads; results keep item order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return list(asyncio.run(_run_parallel_async(fn, items, threads)))


def chunked(sequence, size):
    return [sequence[i:i + size] for i in range(0, len(sequence), size)]
