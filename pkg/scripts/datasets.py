"""
Synthetic datasets with ground truth (Gaussian blob sets in the style of the
A/S/Dim benchmark families, concentric rings) and the whitespace point-file
format used by the public clustering benchmark collections.

Point file: one point per line, floats separated by whitespace, optional
trailing integer label, '#' starts a comment line.
"""

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ldps_core import (
    CannotPlaceCenters,
    DataMatrix,
    InvalidParameter,
    MalformedFile,
    ParseError,
    make_rng,
)

MAX_CENTER_ATTEMPTS = 10_000
INTEGER_TOKEN = re.compile(r'^[+-]?\d+$')

# name -> generator keyword arguments
# sigma is a per-axis standard deviation (covariance sigma^2 I). Sets built with
# covariance sigma I at the same sigma would be far wider, so the S-style and
# Dim-style presets here overlap much less than such sets do.
PRESETS = {
    # A-style: circular clusters, 150 points each
    'a0': dict(kind='gaussian', k=5, m0=150, sigma=0.002, p=2, min_sep=0.1),
    'a1': dict(kind='gaussian', k=20, m0=150, sigma=0.002, p=2, min_sep=0.1),
    'a2': dict(kind='gaussian', k=35, m0=150, sigma=0.002, p=2, min_sep=0.1),
    'a3': dict(kind='gaussian', k=50, m0=150, sigma=0.002, p=2, min_sep=0.1),
    # S-style: 50 clusters of 100, growing spread
    's1': dict(kind='gaussian', k=50, m0=100, sigma=0.002, p=2, min_sep=0.1),
    's2': dict(kind='gaussian', k=50, m0=100, sigma=0.004, p=2, min_sep=0.1),
    's3': dict(kind='gaussian', k=50, m0=100, sigma=0.006, p=2, min_sep=0.1),
    's4': dict(kind='gaussian', k=50, m0=100, sigma=0.008, p=2, min_sep=0.1),
    # Dim-style: 50 clusters of 100 in p dimensions
    'dim3': dict(kind='gaussian', k=50, m0=100, sigma=0.001, p=3, min_sep=0.1),
    'dim6': dict(kind='gaussian', k=50, m0=100, sigma=0.004, p=6, min_sep=0.1),
    'dim9': dict(kind='gaussian', k=50, m0=100, sigma=0.007, p=9, min_sep=0.1),
    'dim12': dict(kind='gaussian', k=50, m0=100, sigma=0.01, p=12, min_sep=0.1),
    'rings': dict(kind='rings', k=2, m0=200, radii=(1.0, 2.0), noise=0.05),
}


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    k: int
    per_cluster: int
    sigma: float
    p: int
    seed: int


@dataclass(frozen=True)
class LabeledDataset:
    data: DataMatrix
    labels: Optional[np.ndarray] = None
    spec: Optional[GeneratorSpec] = None

    @property
    def k(self) -> Optional[int]:
        return None if self.labels is None else int(len(np.unique(self.labels)))


# ---------------------------------------------------------------------------
# GENERATORS
# ---------------------------------------------------------------------------

def _place_centers(rng, k, p, min_sep):
    """Uniform centers in [0,1]^p, each redrawn until it is min_sep from the ones before."""
    centers = np.empty((k, p))
    for j in range(k):
        for _ in range(MAX_CENTER_ATTEMPTS):
            candidate = rng.random(p)
            if j == 0 or np.sqrt(((centers[:j] - candidate) ** 2).sum(axis=1)).min() >= min_sep:
                centers[j] = candidate
                break
        else:
            raise CannotPlaceCenters(
                f"could not place center {j + 1}/{k} with min separation {min_sep} "
                f"after {MAX_CENTER_ATTEMPTS} attempts"
            )
    return centers


def gen_gaussian_clusters(k: int, m0: int, sigma: float, p: int = 2, seed: int = 0,
                          min_sep: float = 0.0) -> LabeledDataset:
    """k isotropic Gaussian blobs of m0 points each; sigma is the per-axis standard deviation."""
    if k < 1 or m0 < 1 or p < 1:
        raise InvalidParameter(f"k, m0 and p must be >= 1, got k={k}, m0={m0}, p={p}")
    if not sigma > 0:
        raise InvalidParameter(f"sigma must be > 0, got {sigma}")
    if min_sep < 0:
        raise InvalidParameter(f"min_sep must be >= 0, got {min_sep}")

    rng = make_rng(seed)
    centers = _place_centers(rng, k, p, min_sep)
    labels = np.repeat(np.arange(k), m0)
    points = centers[labels] + rng.normal(scale=sigma, size=(k * m0, p))
    spec = GeneratorSpec('gaussian', k, m0, sigma, p, seed)
    return LabeledDataset(DataMatrix(points), labels, spec)


def gen_rings(k: int, m0: int, radii, noise: float, seed: int = 0, centers=None) -> LabeledDataset:
    """Noisy rings, one label per ring; concentric at the origin unless centers are given."""
    radii = np.asarray(radii, dtype=float)
    if len(radii) != k:
        raise InvalidParameter(f"need {k} radii, got {len(radii)}")
    if np.any(np.diff(radii) <= 0) or np.any(radii <= 0):
        raise InvalidParameter("radii must be positive and strictly increasing")
    if noise < 0:
        raise InvalidParameter(f"noise must be >= 0, got {noise}")
    centers = np.zeros((k, 2)) if centers is None else np.asarray(centers, dtype=float)

    rng = make_rng(seed)
    labels = np.repeat(np.arange(k), m0)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=k * m0)
    radius = radii[labels] + rng.normal(scale=noise, size=k * m0) if noise > 0 else radii[labels]
    points = centers[labels] + np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])
    spec = GeneratorSpec('rings', k, m0, noise, 2, seed)
    return LabeledDataset(DataMatrix(points), labels, spec)


def generate_preset(name: str, seed: int = 0) -> LabeledDataset:
    if name not in PRESETS:
        raise InvalidParameter(f"unknown preset '{name}', expected one of {sorted(PRESETS)}")
    recipe = dict(PRESETS[name])
    if recipe.pop('kind') == 'rings':
        return gen_rings(seed=seed, **recipe)
    return gen_gaussian_clusters(seed=seed, **recipe)


# ---------------------------------------------------------------------------
# POINT FILES
# ---------------------------------------------------------------------------

def _data_rows(text):
    for number, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        yield number, stripped.split()


def load_point_file(path) -> LabeledDataset:
    rows = list(_data_rows(Path(path).read_text()))
    if not rows:
        raise MalformedFile(f"{path}: no data rows")

    width = len(rows[0][1])
    for number, tokens in rows:
        if len(tokens) != width:
            raise MalformedFile(f"{path}:{number}: expected {width} columns, got {len(tokens)}")

    labelled = width >= 2 and all(INTEGER_TOKEN.match(tokens[-1]) for _, tokens in rows)
    n_coords = width - 1 if labelled else width

    values = np.empty((len(rows), n_coords))
    for r, (number, tokens) in enumerate(rows):
        try:
            values[r] = [float(tok) for tok in tokens[:n_coords]]
        except ValueError as e:
            raise ParseError(f"{path}:{number}: {e}") from e

    labels = None
    if labelled:
        raw = np.array([int(tokens[-1]) for _, tokens in rows])
        _, labels = np.unique(raw, return_inverse=True)
    return LabeledDataset(DataMatrix(values), labels)


def format_point_rows(points, labels=None):
    lines = []
    for i, row in enumerate(np.asarray(points, dtype=float)):
        tokens = [repr(float(v)) for v in row]
        if labels is not None:
            tokens.append(str(int(labels[i])))
        lines.append(' '.join(tokens))
    return '\n'.join(lines) + '\n'


def save_point_file(path, dataset: LabeledDataset, include_labels: bool = True):
    labels = dataset.labels if include_labels else None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='\n') as f:
        f.write(format_point_rows(dataset.data.points, labels))
    return path
