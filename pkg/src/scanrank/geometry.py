"""Core geometric and domain primitives: points, rigid poses, scans, ranked lists.

All types are immutable value objects; every pipeline stage is a pure
function over them, so they are safe to share between threads.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray

Vec3 = NDArray[np.float64]   # shape (3,)
Mat3 = NDArray[np.float64]   # shape (3, 3)
Points = NDArray[np.float64]  # shape (N, 3)

# Orthonormality tolerance for rotations built in double precision.
ROTATION_TOL = 1e-9
# Looser tolerance for rotations that round-tripped through float32 storage:
# quantizing a perfect rotation to f32 perturbs R^T R away from I by ~1e-7.
ROTATION_TOL_F32 = 1e-5


def point3(x: float, y: float, z: float) -> Vec3:
    """Build a validated 3D point; rejects NaN/Inf components."""
    p = np.array([x, y, z], dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError(f"point components must be finite, got {p}")
    return p


def _as_finite_array(x, shape, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) pose: proper rotation matrix plus translation in meters.

    The rotation is validated at construction: orthonormal with
    determinant +1 within `orthonormal_tol` (Frobenius). The default
    tolerance assumes double-precision construction; poses lifted from
    float32 storage use `ROTATION_TOL_F32`.
    """

    rotation: Mat3
    translation: Vec3
    orthonormal_tol: InitVar[float] = ROTATION_TOL

    def __post_init__(self, orthonormal_tol: float) -> None:
        R = _as_finite_array(self.rotation, (3, 3), "rotation")
        t = _as_finite_array(self.translation, (3,), "translation")
        err = np.linalg.norm(R.T @ R - np.eye(3))
        if err > orthonormal_tol:
            raise ValueError(f"rotation not orthonormal: ||R^T R - I|| = {err:.3e}")
        det = np.linalg.det(R)
        if abs(det - 1.0) > max(orthonormal_tol, 1e-9) * 10:
            raise ValueError(f"rotation must have det +1, got {det:.12f}")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m, orthonormal_tol: float = ROTATION_TOL) -> "RigidTransform":
        """Build from a 4x4 homogeneous matrix."""
        m = _as_finite_array(m, (4, 4), "matrix")
        return cls(m[:3, :3], m[:3, 3], orthonormal_tol)

    def matrix4(self) -> NDArray[np.float64]:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points: Points) -> Points:
        """Apply to one point (3,) or a stack of points (N, 3)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Returns the transform applying `other` first, then `self`.

        Validated at the f32 tolerance so poses lifted from storage can be
        composed; results of double-precision inputs stay at ~1e-15.
        """
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
            orthonormal_tol=ROTATION_TOL_F32,
        )

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -(Rt @ self.translation), orthonormal_tol=ROTATION_TOL_F32)


def se3_apply(transform: RigidTransform, point) -> Vec3:
    """R @ p + t."""
    return transform.apply(np.asarray(point, dtype=np.float64))


def se3_compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Composition applying `b` first, then `a`."""
    return a.compose(b)


def se3_inverse(transform: RigidTransform) -> RigidTransform:
    return transform.inverse()


def geo_distance(a, b) -> float:
    """Euclidean distance in meters between two points."""
    pa = np.asarray(a, dtype=np.float64)
    pb = np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(pa - pb))


def rotation_about_z(angle_rad: float) -> Mat3:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotation(rng: np.random.Generator) -> Mat3:
    """Uniform-ish proper rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] *= -1.0
    return q


def quantize_pose_f32(pose: RigidTransform) -> RigidTransform:
    """Round a pose through float32 so it round-trips storage bit-exactly.

    The result's values are exactly representable in f32; validation uses
    the f32 tolerance since quantization perturbs orthonormality.
    """
    return RigidTransform(
        pose.rotation.astype(np.float32).astype(np.float64),
        pose.translation.astype(np.float32).astype(np.float64),
        orthonormal_tol=ROTATION_TOL_F32,
    )


@dataclass(frozen=True)
class ScanRecord:
    """One place observation.

    Float payloads are stored as float32, matching the on-disk archive
    format exactly, so write -> read reproduces a record bit-for-bit.
    Numerical routines convert to float64 at their boundaries. The pose
    is quantized through float32 at construction for the same reason.
    """

    id: str
    cloud: np.ndarray            # (N, 3) float32, N >= 1
    local_features: np.ndarray   # (N, d') float32
    global_descriptor: np.ndarray  # (d,) float32
    gt_pose: RigidTransform      # scan-to-world
    geo_location: np.ndarray     # (3,) float32, world meters

    def __post_init__(self) -> None:
        cloud = np.ascontiguousarray(self.cloud, dtype=np.float32)
        feats = np.ascontiguousarray(self.local_features, dtype=np.float32)
        desc = np.ascontiguousarray(self.global_descriptor, dtype=np.float32)
        geo = np.ascontiguousarray(self.geo_location, dtype=np.float32)
        if not self.id:
            raise ValueError("scan id must be non-empty")
        if cloud.ndim != 2 or cloud.shape[1] != 3 or cloud.shape[0] < 1:
            raise ValueError(f"cloud must be (N>=1, 3), got {cloud.shape}")
        if feats.ndim != 2 or feats.shape[0] != cloud.shape[0]:
            raise ValueError(
                f"local_features rows ({feats.shape}) must match cloud points ({cloud.shape[0]})"
            )
        if desc.ndim != 1 or desc.shape[0] < 1:
            raise ValueError(f"global_descriptor must be a non-empty vector, got {desc.shape}")
        if geo.shape != (3,):
            raise ValueError(f"geo_location must be shape (3,), got {geo.shape}")
        for name, a in (("cloud", cloud), ("local_features", feats),
                        ("global_descriptor", desc), ("geo_location", geo)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be finite")
        for a in (cloud, feats, desc, geo):
            a.setflags(write=False)
        object.__setattr__(self, "cloud", cloud)
        object.__setattr__(self, "local_features", feats)
        object.__setattr__(self, "global_descriptor", desc)
        object.__setattr__(self, "geo_location", geo)
        object.__setattr__(self, "gt_pose", quantize_pose_f32(self.gt_pose))

    @property
    def num_points(self) -> int:
        return self.cloud.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.local_features.shape[1]

    @property
    def descriptor_dim(self) -> int:
        return self.global_descriptor.shape[0]


class OrderingKind(Enum):
    ASCENDING_DISTANCE = "ascending_distance"
    DESCENDING_FITNESS = "descending_fitness"


@dataclass(frozen=True)
class RankedList:
    """Ordered candidate ids with per-candidate scores.

    Builders produce entries sorted per `ordering_kind` with stable ties.
    A re-ranked list is only sorted over its re-scored prefix; entries
    past the prefix keep their original order and scores.
    """

    entries: tuple[tuple[str, float], ...]
    ordering_kind: OrderingKind = OrderingKind.ASCENDING_DISTANCE

    def __post_init__(self) -> None:
        entries = tuple((str(i), float(s)) for i, s in self.entries)
        ids = [i for i, _ in entries]
        if len(set(ids)) != len(ids):
            raise ValueError("candidate ids must be unique within a ranked list")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_scores(cls, ids, scores, kind: OrderingKind) -> "RankedList":
        """Stable sort: ascending for distances, descending for fitness."""
        scores = np.asarray(scores, dtype=np.float64)
        key = scores if kind is OrderingKind.ASCENDING_DISTANCE else -scores
        order = np.argsort(key, kind="stable")
        return cls(tuple((ids[i], float(scores[i])) for i in order), kind)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.entries)

    @property
    def scores(self) -> tuple[float, ...]:
        return tuple(s for _, s in self.entries)

    def top_ids(self, k: int) -> tuple[str, ...]:
        return self.ids[:k]

    def is_sorted(self) -> bool:
        s = self.scores
        if self.ordering_kind is OrderingKind.ASCENDING_DISTANCE:
            return all(s[i] <= s[i + 1] for i in range(len(s) - 1))
        return all(s[i] >= s[i + 1] for i in range(len(s) - 1))
