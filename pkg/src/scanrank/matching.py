"""Putative point correspondences between two scans via feature nearest neighbours."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, EmptyScanError
from .geometry import ScanRecord


@dataclass(frozen=True)
class Correspondence:
    """One putative match: query point x paired with candidate point y."""

    query_index: int
    candidate_index: int
    x: np.ndarray  # (3,) float64
    y: np.ndarray  # (3,) float64
    feature_distance: float


@dataclass(frozen=True)
class CorrespondenceSet:
    """Ordered correspondences, stored as aligned arrays.

    Query indices are unique (one match per sampled query point) and the
    set is ordered by query index.
    """

    query_indices: np.ndarray      # (n,) int64
    candidate_indices: np.ndarray  # (n,) int64
    query_points: np.ndarray       # (n, 3) float64
    candidate_points: np.ndarray   # (n, 3) float64
    feature_distances: np.ndarray  # (n,) float64

    def __post_init__(self) -> None:
        qi = np.asarray(self.query_indices, dtype=np.int64)
        if len(np.unique(qi)) != qi.shape[0]:
            raise ValueError("query indices must be unique within a correspondence set")
        object.__setattr__(self, "query_indices", qi)
        object.__setattr__(self, "candidate_indices",
                           np.asarray(self.candidate_indices, dtype=np.int64))
        object.__setattr__(self, "query_points",
                           np.asarray(self.query_points, dtype=np.float64).reshape(-1, 3))
        object.__setattr__(self, "candidate_points",
                           np.asarray(self.candidate_points, dtype=np.float64).reshape(-1, 3))
        object.__setattr__(self, "feature_distances",
                           np.asarray(self.feature_distances, dtype=np.float64))

    def __len__(self) -> int:
        return int(self.query_indices.shape[0])

    def __getitem__(self, i: int) -> Correspondence:
        return Correspondence(
            int(self.query_indices[i]),
            int(self.candidate_indices[i]),
            self.query_points[i],
            self.candidate_points[i],
            float(self.feature_distances[i]),
        )


def sample_query_points(scan: ScanRecord, n_max: int) -> np.ndarray:
    """Deterministic uniform-stride subsample of point indices.

    Returns min(n_max, N) strictly increasing indices; identical inputs
    always yield identical output.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    n_points = scan.cloud.shape[0]
    if n_points == 0:
        raise EmptyScanError("cannot sample from an empty scan")
    if n_max >= n_points:
        return np.arange(n_points, dtype=np.int64)
    return (np.arange(n_max, dtype=np.int64) * n_points) // n_max


def nn_squared_distances(query_feats: np.ndarray, candidate_feats: np.ndarray) -> np.ndarray:
    """Squared feature distances (b, n, N) for a stack of b candidate scans.

    Computed as |q|^2 + |c|^2 - 2 q.c with one GEMM over the flattened
    stack; entries may dip a hair below zero. Results are bitwise
    independent of how candidates are grouped into stacks, which the
    parallel re-ranking path relies on.
    """
    q = np.ascontiguousarray(query_feats, dtype=np.float64)
    c = np.ascontiguousarray(candidate_feats, dtype=np.float64)
    b, big_n, dim = c.shape
    cross = q @ c.reshape(b * big_n, dim).T            # (n, b*N)
    d2 = cross.reshape(q.shape[0], b, big_n).transpose(1, 0, 2).copy()
    d2 *= -2.0
    d2 += np.einsum("ij,ij->i", q, q)[None, :, None]
    d2 += np.einsum("bij,bij->bi", c, c)[:, None, :]
    return d2


def match_features(
    query: ScanRecord,
    candidate: ScanRecord,
    n_max: int = 1000,
    mutual: bool = False,
) -> CorrespondenceSet:
    """Match sampled query points to candidate points by L2 feature distance.

    For each sampled query index the closest candidate feature wins, ties
    going to the smallest candidate index. With `mutual` set, a pair
    survives only if the candidate point's nearest sampled query feature
    is the same query point. Output is ordered by query index.
    """
    if query.feature_dim != candidate.feature_dim:
        raise DimMismatchError(
            f"feature dims differ: query d'={query.feature_dim}, "
            f"candidate d'={candidate.feature_dim}"
        )
    if candidate.cloud.shape[0] == 0:
        raise EmptyScanError("candidate scan has no points")
    sampled = sample_query_points(query, n_max)
    qf = query.local_features[sampled].astype(np.float64)
    d2 = nn_squared_distances(qf, candidate.local_features[None].astype(np.float64))[0]
    nn = d2.argmin(axis=1)

    keep = np.ones(sampled.shape[0], dtype=bool)
    if mutual:
        reverse = d2.argmin(axis=0)  # per candidate point: closest sampled query
        keep = reverse[nn] == np.arange(sampled.shape[0])

    rows = np.flatnonzero(keep)
    cand_idx = nn[rows]
    dist = np.sqrt(np.maximum(d2[rows, cand_idx], 0.0))
    return CorrespondenceSet(
        query_indices=sampled[rows],
        candidate_indices=cand_idx,
        query_points=query.cloud[sampled[rows]].astype(np.float64),
        candidate_points=candidate.cloud[cand_idx].astype(np.float64),
        feature_distances=dist,
    )
