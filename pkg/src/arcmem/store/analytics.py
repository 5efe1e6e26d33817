"""Embedding analytics: 3D PCA projection, agglomerative clustering, Jaccard.

Both projections and clusterings are fully deterministic: PCA components
carry a fixed sign convention and cluster merges break ties on the
lexicographically smallest member pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .vectors import EmbeddingRecord


@dataclass(frozen=True)
class ClusterAssignment:
    cluster_id: int
    member_ids: tuple[str, ...]


def pca_project_3d(records: Sequence[EmbeddingRecord]) -> list[tuple[str, float, float, float]]:
    """Mean-center and project onto the top-3 principal components.

    Components are ordered by singular value descending; each component's
    largest-magnitude loading is forced positive so coordinates are stable.
    Degenerate directions (fewer than 3 nonzero components) pad with 0.
    """
    if not records:
        raise ValueError("pca_project_3d requires at least one record")
    matrix = np.asarray([r.vector for r in records], dtype=np.float64)
    centered = matrix - matrix.mean(axis=0, keepdims=True)
    # SVD of the centered data; right-singular vectors are the components.
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    coords = np.zeros((len(records), 3), dtype=np.float64)
    eps = 1e-9 * (singular[0] if singular.size and singular[0] > 0 else 1.0)
    for axis in range(min(3, vt.shape[0])):
        if singular[axis] <= eps:
            break
        component = vt[axis]
        pivot = int(np.argmax(np.abs(component)))
        if component[pivot] < 0:
            component = -component
        coords[:, axis] = centered @ component
    return [
        (record.record_id, float(coords[i, 0]), float(coords[i, 1]), float(coords[i, 2]))
        for i, record in enumerate(records)
    ]


def cluster_embeddings(
    records: Sequence[EmbeddingRecord],
    distance_threshold: float,
) -> list[ClusterAssignment]:
    """Average-linkage agglomeration under cosine distance (1 - similarity).

    Merging stops when the nearest cluster pair exceeds the threshold. When
    several pairs tie on distance, the pair whose sorted smallest member ids
    compare lowest merges first. Cluster ids are assigned by each final
    cluster's smallest member id.
    """
    if not (0.0 < distance_threshold < 2.0):
        raise ValueError("distance_threshold must be in (0, 2)")
    if not records:
        return []

    matrix = np.asarray([r.vector for r in records], dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    unit = matrix / norms
    distance = 1.0 - unit @ unit.T

    ids = [r.record_id for r in records]
    clusters: dict[int, list[int]] = {i: [i] for i in range(len(records))}

    def pair_key(a: int, b: int) -> tuple[str, str]:
        ka = min(ids[i] for i in clusters[a])
        kb = min(ids[i] for i in clusters[b])
        return (ka, kb) if ka <= kb else (kb, ka)

    def average_distance(a: int, b: int) -> float:
        block = distance[np.ix_(clusters[a], clusters[b])]
        return float(block.mean())

    while len(clusters) > 1:
        best: tuple[float, tuple[str, str], int, int] | None = None
        keys = sorted(clusters)
        for i, a in enumerate(keys):
            for b in keys[i + 1 :]:
                d = average_distance(a, b)
                candidate = (d, pair_key(a, b), a, b)
                if best is None or candidate[:2] < best[:2]:
                    best = candidate
        assert best is not None
        d, _, a, b = best
        if d > distance_threshold:
            break
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]

    final = sorted(clusters.values(), key=lambda members: min(ids[i] for i in members))
    return [
        ClusterAssignment(cluster_id=n, member_ids=tuple(sorted(ids[i] for i in members)))
        for n, members in enumerate(final)
    ]


def jaccard_similarity(a: set[str], b: set[str]) -> float:
    """|a ∩ b| / |a ∪ b|, with 1.0 when both sets are empty."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)
