"""
Local Density Peaks Searching.

Density (Gaussian KDE over dissimilarities), local distinctiveness index,
center/outlier scores, the gap-based peak search, seed selection, outlier
detection, the (h_bar, r_bar) grid search, and the CFSFDP baseline that the
peak search is compared against.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ldps_core import (
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
    run_parallel,
    stable_sort_descending,
)

INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

# Rows processed at once in the LDI scan; bounds the m x block boolean masks
LDI_BLOCK = 1024

DEFAULT_H_GRID = tuple(np.linspace(0.02, 0.2, 10))
DEFAULT_R_GRID = tuple(np.linspace(0.05, 0.5, 10))

CFSFDP_NEIGHBOR_FRACTION = 0.02


@dataclass(frozen=True)
class LdpsProfile:
    rho: np.ndarray
    rho_bar: np.ndarray
    ldi: np.ndarray
    gamma_c: np.ndarray
    gamma_o: np.ndarray
    sorted_order: np.ndarray
    gaps: np.ndarray
    estimated_k: int
    peak_indices: np.ndarray
    tau_star: float
    params: LdpsParams
    h: float
    r: float

    @property
    def m(self) -> int:
        return self.rho.shape[0]


@dataclass(frozen=True)
class SeedSelection:
    indices: np.ndarray
    tau_star: float


@dataclass(frozen=True)
class CfsfdpProfile:
    rho_cutoff: np.ndarray
    gdi: np.ndarray
    gamma: np.ndarray
    nearest_denser: np.ndarray
    sorted_order: np.ndarray
    gaps: np.ndarray
    estimated_k: int
    center_indices: np.ndarray
    dc: float


@dataclass(frozen=True)
class GridSearchResult:
    theta: tuple
    profile: LdpsProfile
    table: tuple  # (h_bar, r_bar, tau_star, estimated_k) per cell, grid order


# ---------------------------------------------------------------------------
# DENSITY AND DISTINCTIVENESS
# ---------------------------------------------------------------------------

def local_density(D: DissimilarityMatrix, h: float) -> np.ndarray:
    """Gaussian KDE over dissimilarities, self-term included."""
    if not h > 0:
        raise InvalidBandwidth(f"bandwidth must be > 0, got {h}")
    d = D.d
    m = d.shape[0]
    kernel = INV_SQRT_2PI * np.exp(-0.5 * (d / h) ** 2)
    return kernel.sum(axis=1) / (m * h)


def normalized_density(rho, exponent: float = 1.0) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    rho_bar = rho / rho.max()
    if exponent != 1.0:
        rho_bar = rho_bar ** exponent
    return rho_bar


def local_distinctiveness_index(D: DissimilarityMatrix, rho, r: float) -> np.ndarray:
    """delta^l_i = min d_ij / r over strictly denser j with 0 < d_ij <= r; 1 if there is none."""
    if not r > 0:
        raise InvalidRadius(f"radius must be > 0, got {r}")
    d = D.d
    rho = np.asarray(rho, dtype=float)
    m = d.shape[0]
    ldi = np.ones(m)
    for start in range(0, m, LDI_BLOCK):
        rows = slice(start, min(start + LDI_BLOCK, m))
        block = d[rows]
        dominating = (block > 0) & (block <= r) & (rho[None, :] > rho[rows, None])
        nearest = np.where(dominating, block, np.inf).min(axis=1)
        found = np.isfinite(nearest)
        ldi[rows] = np.where(found, nearest / r, 1.0)
    return ldi


def _check_scores(rho_bar, ldi):
    rho_bar = np.asarray(rho_bar, dtype=float)
    ldi = np.asarray(ldi, dtype=float)
    for name, values in (('rho_bar', rho_bar), ('ldi', ldi)):
        if np.any(~np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
            raise InvalidScore(f"{name} must lie in [0, 1]")
    return rho_bar, ldi


def gamma_center(rho_bar, ldi) -> np.ndarray:
    rho_bar, ldi = _check_scores(rho_bar, ldi)
    return (1.0 - 0.5 * (1.0 - rho_bar) ** 2 - 0.5 * (1.0 - ldi) ** 2) ** 2


def gamma_outlier(rho_bar, ldi) -> np.ndarray:
    rho_bar, ldi = _check_scores(rho_bar, ldi)
    return (1.0 - 0.5 * rho_bar ** 2 - 0.5 * (1.0 - ldi) ** 2) ** 2


# ---------------------------------------------------------------------------
# PEAK SEARCH
# ---------------------------------------------------------------------------

def gap_rule(scores):
    """Sort scores descending and find the biggest gap between neighbors.

    gaps carries a trailing gap to 0 so every point has one, but k is picked
    among the m - 1 inner gaps; only when all scores tie does the trailing gap
    decide (k = m). Returns (order, gaps, k, tau_at_k).
    """
    sorted_scores, order = stable_sort_descending(scores)
    closed = np.append(sorted_scores, 0.0)
    gaps = closed[:-1] - closed[1:]
    inner = gaps[:-1]
    if inner.size and inner.max() > 0:
        k = int(np.argmax(inner)) + 1
    else:
        k = gaps.size
    return order, gaps, k, float(gaps[k - 1])


def _profile_from_density(D, rho, params, h):
    r = params.r(D.d_star)
    rho_bar = normalized_density(rho, params.density_exponent)
    ldi = local_distinctiveness_index(D, rho, r)
    gamma_c = gamma_center(rho_bar, ldi)
    gamma_o = gamma_outlier(rho_bar, ldi)
    order, gaps, k, tau_star = gap_rule(gamma_c)

    if tau_star < params.tau_min:
        estimated_k, peaks = -1, np.empty(0, dtype=int)
    else:
        estimated_k, peaks = k, order[:k].copy()

    return LdpsProfile(
        rho=rho, rho_bar=rho_bar, ldi=ldi, gamma_c=gamma_c, gamma_o=gamma_o,
        sorted_order=order, gaps=gaps, estimated_k=estimated_k, peak_indices=peaks,
        tau_star=tau_star, params=params, h=h, r=r,
    )


def search_peaks(D: DissimilarityMatrix, params: LdpsParams) -> LdpsProfile:
    if D.m < 2:
        raise TooFewPoints(f"peak search needs at least 2 points, got {D.m}")
    h = params.h(D.d_star)
    rho = local_density(D, h)
    return _profile_from_density(D, rho, params, h)


def select_seeds(profile: LdpsProfile, k_star: int) -> SeedSelection:
    """First k_star points by center score, plus tau* re-read at k_star."""
    if k_star > profile.m:
        raise KTooLarge(f"k*={k_star} exceeds the number of points {profile.m}")
    if k_star < 1:
        raise InvalidParameter(f"k* must be >= 1, got {k_star}")
    return SeedSelection(profile.sorted_order[:k_star].copy(), float(profile.gaps[k_star - 1]))


def detect_outliers(profile: LdpsProfile, threshold: float, exclude: Optional[Sequence[int]] = None) -> np.ndarray:
    """Indices with gamma_o > threshold, never including the seeds (peaks by default)."""
    if not 0 <= threshold <= 1:
        raise InvalidParameter(f"outlier threshold must be in [0, 1], got {threshold}")
    exclude = profile.peak_indices if exclude is None else np.asarray(exclude, dtype=int)
    candidates = profile.gamma_o > threshold
    candidates[exclude] = False
    return np.flatnonzero(candidates)


def grid_search_theta(D: DissimilarityMatrix, h_grid=DEFAULT_H_GRID, r_grid=DEFAULT_R_GRID,
                      params: Optional[LdpsParams] = None, threads: int = 1,
                      progress=None) -> GridSearchResult:
    """Pick (h_bar, r_bar) maximizing tau*; failed cells score 0, ties go to smaller h_bar then r_bar."""
    if len(h_grid) == 0 or len(r_grid) == 0:
        raise EmptyGrid("grid search needs at least one h_bar and one r_bar")
    if D.m < 2:
        raise TooFewPoints(f"peak search needs at least 2 points, got {D.m}")
    base = params or LdpsParams()
    h_values = sorted(float(h) for h in h_grid)
    r_values = sorted(float(r) for r in r_grid)

    def _row(h_bar):
        h = h_bar * D.d_star
        rho = local_density(D, h)
        row = []
        for r_bar in r_values:
            row.append(_profile_from_density(D, rho, base.with_theta(h_bar, r_bar), h))
        if progress:
            progress(h_bar)
        return row

    rows = run_parallel(_row, h_values, threads)

    best, best_score, table = None, -1.0, []
    for row in rows:
        for profile in row:
            score = profile.tau_star if profile.estimated_k != -1 else 0.0
            table.append((profile.params.h_bar, profile.params.r_bar, score, profile.estimated_k))
            if score > best_score:
                best, best_score = profile, score

    return GridSearchResult((best.params.h_bar, best.params.r_bar), best, tuple(table))


# ---------------------------------------------------------------------------
# CFSFDP BASELINE
# ---------------------------------------------------------------------------

def choose_cutoff(D: DissimilarityMatrix, neighbor_fraction: float = CFSFDP_NEIGHBOR_FRACTION) -> float:
    """d_c such that a point has about neighbor_fraction * m neighbors on average."""
    if not 0 < neighbor_fraction < 1:
        raise InvalidParameter(f"neighbor_fraction must be in (0, 1), got {neighbor_fraction}")
    upper = D.d[np.triu_indices(D.m, k=1)]
    if upper.size == 0:
        raise TooFewPoints("cutoff choice needs at least 2 points")
    dc = float(np.quantile(upper, neighbor_fraction))
    if dc <= 0:
        dc = float(upper[upper > 0].min()) if np.any(upper > 0) else 1.0
    return dc


def cfsfdp_baseline(D: DissimilarityMatrix, dc: float) -> CfsfdpProfile:
    """Cutoff density, global distinctiveness, gamma = rho * delta^g, and the gap rule on gamma."""
    if not dc > 0:
        raise InvalidCutoff(f"cutoff distance must be > 0, got {dc}")
    d = D.d
    m = d.shape[0]
    rho = (d < dc).sum(axis=1) - 1

    gdi = np.empty(m)
    nearest_denser = np.full(m, -1, dtype=int)
    for i in range(m):
        denser = np.flatnonzero(rho > rho[i])
        if denser.size == 0:
            gdi[i] = d[i].max()
        else:
            j = denser[np.argmin(d[i, denser])]
            nearest_denser[i] = j
            gdi[i] = d[i, j]

    gamma = rho * gdi
    order, gaps, k, _ = gap_rule(gamma)
    return CfsfdpProfile(
        rho_cutoff=rho, gdi=gdi, gamma=gamma, nearest_denser=nearest_denser,
        sorted_order=order, gaps=gaps, estimated_k=k, center_indices=order[:k].copy(), dc=dc,
    )


def cfsfdp_assign(D: DissimilarityMatrix, profile: CfsfdpProfile, centers=None) -> np.ndarray:
    """Label centers 0..k-1, then hand each point its nearest denser point's label."""
    centers = profile.center_indices if centers is None else np.asarray(centers, dtype=int)
    m = D.m
    labels = np.full(m, -1, dtype=int)
    labels[centers] = np.arange(len(centers))
    _, by_density = stable_sort_descending(profile.rho_cutoff)
    for i in by_density:
        if labels[i] != -1:
            continue
        parent = profile.nearest_denser[i]
        if parent == -1 or labels[parent] == -1:
            labels[i] = int(np.argmin(D.d[i, centers]))
        else:
            labels[i] = labels[parent]
    return labels
