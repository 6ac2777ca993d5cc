"""Correspondence-based rigid registration: Kabsch fits inside seeded RANSAC.

The RANSAC loop is deterministic for a fixed seed: all hypothesis triples
are drawn up front from one generator, evaluated in draw order (in
vectorized blocks), and the adaptive confidence exit is applied on the
draw index, so block size never changes the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateConfigurationError,
    EmptySetError,
    NonPositiveThresholdError,
    TooFewCorrespondencesError,
)
from .geometry import RigidTransform
from .matching import CorrespondenceSet

_RANK_TOL = 1e-9
_BLOCK = 128


@dataclass(frozen=True)
class RansacParams:
    inlier_threshold: float = 0.5   # meters
    max_iterations: int = 1000
    min_sample: int = 3
    seed: int = 0
    confidence: float = 0.999

    def __post_init__(self) -> None:
        if self.inlier_threshold <= 0:
            raise ValueError(f"inlier_threshold must be > 0, got {self.inlier_threshold}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.min_sample != 3:
            raise ValueError("min_sample is fixed at 3 for rigid fits")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {self.confidence}")


@dataclass(frozen=True)
class RegistrationResult:
    transform: RigidTransform
    inlier_mask: np.ndarray  # (n,) bool
    inlier_ratio: float

    def __post_init__(self) -> None:
        mask = np.asarray(self.inlier_mask, dtype=bool)
        mask.setflags(write=False)
        object.__setattr__(self, "inlier_mask", mask)


def _kabsch_arrays(x: np.ndarray, y: np.ndarray) -> RigidTransform:
    cx = x.mean(axis=0)
    cy = y.mean(axis=0)
    h = (x - cx).T @ (y - cy)
    u, s, vt = np.linalg.svd(h)
    if s[0] <= 0.0 or s[1] <= _RANK_TOL * s[0]:
        raise DegenerateConfigurationError(
            "point configuration is rank-deficient (collinear or coincident)"
        )
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rot, cy - rot @ cx, orthonormal_tol=1e-7)


def kabsch_fit(pairs) -> RigidTransform:
    """Least-squares rigid transform T minimizing sum ||T x_i - y_i||^2.

    `pairs` is a sequence of (x, y) point pairs. Centroid subtraction plus
    SVD of the cross-covariance, with the determinant corrected so
    reflections are never returned.
    """
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1:] != (2, 3):
        raise ValueError(f"pairs must have shape (n, 2, 3), got {arr.shape}")
    if arr.shape[0] < 3:
        raise DegenerateConfigurationError(f"need >= 3 pairs, got {arr.shape[0]}")
    return _kabsch_arrays(arr[:, 0], arr[:, 1])


def _residuals(rot: np.ndarray, t: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x @ rot.T + t - y, axis=1)


def _batched_kabsch(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rigid fits for a stack of 3-point samples (m, 3, 3). Returns
    (rotations, translations, valid-mask); rank-deficient samples are
    flagged invalid rather than raising."""
    ca = a.mean(axis=1)
    cb = b.mean(axis=1)
    h = np.matmul((a - ca[:, None]).transpose(0, 2, 1), b - cb[:, None])
    u, s, vt = np.linalg.svd(h)
    valid = (s[:, 0] > 0.0) & (s[:, 1] > _RANK_TOL * s[:, 0])
    v = vt.transpose(0, 2, 1)
    det = np.linalg.det(np.matmul(v, u.transpose(0, 2, 1)))
    flip = np.ones_like(s)
    flip[:, 2] = np.sign(det)
    rot = np.matmul(v * flip[:, None, :], u.transpose(0, 2, 1))
    t = cb - np.einsum("mij,mj->mi", rot, ca)
    return rot, t, valid


def ransac_register(corrs: CorrespondenceSet, params: RansacParams = RansacParams()) -> RegistrationResult:
    """Robust rigid registration of a correspondence set.

    Hypotheses are Kabsch fits on uniformly drawn triples; degenerate
    triples are skipped (they still consume iterations). The best model by
    inlier count (first found on ties) is re-fit on its inlier set, and the
    returned mask/ratio are recomputed from that final transform.
    """
    n = len(corrs)
    if n < 3:
        raise TooFewCorrespondencesError(f"need >= 3 correspondences, got {n}")
    x = corrs.query_points
    y = corrs.candidate_points
    tau = params.inlier_threshold

    rng = np.random.default_rng(params.seed)
    keys = rng.random((params.max_iterations, n))
    triples = np.argpartition(keys, 2, axis=1)[:, :3]

    best_count = -1
    best_rot: np.ndarray | None = None
    best_t: np.ndarray | None = None
    needed = float(params.max_iterations)

    stop = False
    for start in range(0, params.max_iterations, _BLOCK):
        if stop or start >= needed:
            break
        blk = triples[start:start + _BLOCK]
        rot, t, valid = _batched_kabsch(x[blk], y[blk])
        # residuals of every point under every hypothesis in the block
        tx = np.einsum("mij,nj->mni", rot, x) + t[:, None, :]
        counts = ((((tx - y[None]) ** 2).sum(axis=2)) < tau * tau).sum(axis=1)
        for j in range(blk.shape[0]):
            if start + j >= needed:
                stop = True
                break
            if not valid[j]:
                continue
            c = int(counts[j])
            if c > best_count:
                best_count = c
                best_rot, best_t = rot[j], t[j]
                w = c / n
                if w >= 1.0:
                    stop = True
                    break
                log_fail = np.log(1.0 - w ** 3)
                if log_fail < 0.0:
                    needed = min(needed, np.log(1.0 - params.confidence) / log_fail)

    if best_rot is None:
        raise DegenerateConfigurationError("every sampled triple was degenerate")

    transform = RigidTransform(best_rot, best_t, orthonormal_tol=1e-7)
    mask = _residuals(transform.rotation, transform.translation, x, y) < tau
    if int(mask.sum()) >= 3:
        try:
            transform = _kabsch_arrays(x[mask], y[mask])
            mask = _residuals(transform.rotation, transform.translation, x, y) < tau
        except DegenerateConfigurationError:
            pass  # keep the hypothesis transform
    return RegistrationResult(
        transform=transform,
        inlier_mask=mask,
        inlier_ratio=float(int(mask.sum()) / n),
    )


def registered_inlier_ratio(corrs: CorrespondenceSet, transform: RigidTransform, tau: float) -> float:
    """Fraction of correspondences within `tau` after applying `transform`."""
    if len(corrs) == 0:
        raise EmptySetError("inlier ratio of an empty correspondence set is undefined")
    if tau <= 0:
        raise NonPositiveThresholdError(f"tau must be > 0, got {tau}")
    res = _residuals(transform.rotation, transform.translation,
                     corrs.query_points, corrs.candidate_points)
    return float(int((res < tau).sum()) / len(corrs))
