import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'scripts'))

from ldps_core import DataMatrix  # noqa: E402
from datasets import format_point_rows  # noqa: E402

BLOB_CENTERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def make_blobs(centers, per_cluster, sigma, seed):
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    labels = np.repeat(np.arange(len(centers)), per_cluster)
    points = centers[labels] + rng.normal(scale=sigma, size=(len(labels), centers.shape[1]))
    return DataMatrix(points), labels


@pytest.fixture
def three_blobs():
    """120 points in three tight, far-apart groups; returns (data, true labels)."""
    return make_blobs(BLOB_CENTERS, 40, 0.02, seed=3)


@pytest.fixture
def flower():
    """Three groups of a center point ringed by 8 points at radius 0.01.

    Under a squared cutoff of 1.1e-4 each center has 8 neighbors and each
    ring point has 3 (its center and two ring neighbors).
    """
    angles = np.arange(8) * (2 * np.pi / 8)
    ring = 0.01 * np.column_stack([np.cos(angles), np.sin(angles)])
    centers = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    points, labels = [], []
    for j, c in enumerate(centers):
        points.append(c)
        points.extend(c + ring)
        labels.extend([j] * 9)
    return DataMatrix(np.array(points)), np.array(labels)


def write_points(path, points, labels=None):
    path.write_text(format_point_rows(points, labels))
    return path
