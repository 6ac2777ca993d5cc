"""Global-descriptor database and exact top-k similarity search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, EmptyDatabaseError
from .geometry import OrderingKind, RankedList, ScanRecord


@dataclass(frozen=True)
class DescriptorIndex:
    """Immutable descriptor matrix aligned with scan ids, in database order."""

    ids: tuple[str, ...]
    descriptors: np.ndarray  # (|db|, d) float64

    def __post_init__(self) -> None:
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("index ids must be unique")
        d = np.ascontiguousarray(self.descriptors, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != len(self.ids):
            raise ValueError(f"descriptors must be ({len(self.ids)}, d), got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "descriptors", d)

    @property
    def dim(self) -> int:
        return self.descriptors.shape[1]

    def descriptor_of(self, scan_id: str) -> np.ndarray:
        return self.descriptors[self.ids.index(scan_id)]


def build_index(database: list[ScanRecord]) -> DescriptorIndex:
    """Stack database descriptors, preserving manifest order."""
    if not database:
        raise EmptyDatabaseError("cannot index an empty database")
    dims = {r.descriptor_dim for r in database}
    if len(dims) > 1:
        raise DimMismatchError(f"mixed descriptor dims in database: {sorted(dims)}")
    return DescriptorIndex(
        ids=tuple(r.id for r in database),
        descriptors=np.stack([r.global_descriptor for r in database]).astype(np.float64),
    )


def query_topk(
    index: DescriptorIndex,
    descriptor: np.ndarray,
    k: int,
    metric: str = "euclidean",
) -> RankedList:
    """Exact top-k search, ascending by descriptor distance.

    Ties resolve to database order (stable sort). k larger than the
    database returns the full ranking. `metric` is `euclidean` (default)
    or `cosine` (distance = 1 - cosine similarity).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    g = np.asarray(descriptor, dtype=np.float64).ravel()
    if g.shape[0] != index.dim:
        raise DimMismatchError(f"query dim {g.shape[0]} != index dim {index.dim}")
    if metric == "euclidean":
        distances = np.sqrt(((index.descriptors - g) ** 2).sum(axis=1))
    elif metric == "cosine":
        norms = np.linalg.norm(index.descriptors, axis=1) * np.linalg.norm(g)
        norms = np.where(norms == 0.0, 1.0, norms)
        distances = 1.0 - (index.descriptors @ g) / norms
    else:
        raise ValueError(f"unknown metric {metric!r}")
    order = np.argsort(distances, kind="stable")[: min(k, len(index.ids))]
    return RankedList(
        tuple((index.ids[i], float(distances[i])) for i in order),
        OrderingKind.ASCENDING_DISTANCE,
    )
