"""Re-ranking strategies over an initial retrieval list.

Two geometric-verification strategies (spectral fitness, registered inlier
ratio) permute the top-k prefix of the input list; two query-expansion
strategies aggregate descriptors and re-retrieve from the full index, so
their output may contain ids absent from the input list.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    DegenerateConfigurationError,
    DimMismatchError,
    EmptyMatrixError,
    TooFewCorrespondencesError,
    UnresolvedCandidateError,
    ZeroVectorError,
)
from .geometry import OrderingKind, RankedList, ScanRecord
from .matching import match_features
from .registration import RansacParams, ransac_register
from .retrieval import DescriptorIndex, query_topk
from .spectral import SpectralParams, score_candidates


class Strategy(Enum):
    SPECTRAL = "spectral"
    RANSAC_RIR = "ransac_rir"
    AVERAGE_QE = "average_qe"
    ALPHA_QE = "alpha_qe"


@dataclass(frozen=True)
class RerankParams:
    n_topk: int = 20
    strategy: Strategy = Strategy.SPECTRAL
    spectral: SpectralParams = field(default_factory=SpectralParams)
    ransac: RansacParams = field(default_factory=RansacParams)
    alpha: float = 3.0
    n_qe: int | None = None  # defaults to n_topk

    def __post_init__(self) -> None:
        if self.n_topk < 1:
            raise ValueError(f"n_topk must be >= 1, got {self.n_topk}")
        if self.strategy is Strategy.ALPHA_QE and self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")


def _resolve_prefix(
    candidates: list[ScanRecord], ranked: RankedList, n_topk: int
) -> list[ScanRecord]:
    by_id = {c.id: c for c in candidates}
    prefix = ranked.entries[:n_topk]
    missing = [i for i, _ in prefix if i not in by_id]
    if missing:
        raise UnresolvedCandidateError(f"no scans provided for ranked ids {missing}")
    return [by_id[i] for i, _ in prefix]


def _reorder_prefix(ranked: RankedList, fitness: np.ndarray, n_topk: int) -> RankedList:
    """Stable descending sort of the first n_topk entries by fitness; the
    tail keeps its original order and scores."""
    prefix = ranked.entries[:n_topk]
    order = np.argsort(-np.asarray(fitness, dtype=np.float64), kind="stable")
    entries = tuple((prefix[i][0], float(fitness[i])) for i in order) + ranked.entries[n_topk:]
    return RankedList(entries, OrderingKind.DESCENDING_FITNESS)


def rerank_spectral(
    query: ScanRecord,
    candidates: list[ScanRecord],
    ranked: RankedList,
    params: RerankParams,
    workers: int = 1,
) -> RankedList:
    """Re-rank the top-k prefix by descending spectral fitness s*."""
    if len(ranked) == 0:
        raise ValueError("ranked list must be non-empty")
    scans = _resolve_prefix(candidates, ranked, params.n_topk)
    scores, _ = score_candidates(query, scans, params.spectral, workers=workers)
    return _reorder_prefix(ranked, scores, params.n_topk)


def _rir_fitness(query: ScanRecord, cand: ScanRecord, params: RerankParams, ordinal: int) -> float:
    # Candidates that cannot produce a score get fitness 0 rather than
    # failing the query: the re-ranker must always return a full list.
    try:
        corrs = match_features(query, cand, params.spectral.n_max, params.spectral.mutual)
        ransac = replace(params.ransac, seed=params.ransac.seed ^ ordinal)
        return ransac_register(corrs, ransac).inlier_ratio
    except (TooFewCorrespondencesError, DegenerateConfigurationError, EmptyMatrixError):
        return 0.0


def rerank_rir(
    query: ScanRecord,
    candidates: list[ScanRecord],
    ranked: RankedList,
    params: RerankParams,
    workers: int = 1,
) -> RankedList:
    """Re-rank the top-k prefix by inlier ratio after per-candidate RANSAC.

    Each candidate registers with a seed derived from its ordinal, so the
    result is independent of scheduling.
    """
    if len(ranked) == 0:
        raise ValueError("ranked list must be non-empty")
    scans = _resolve_prefix(candidates, ranked, params.n_topk)
    if workers > 1 and len(scans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fitness = list(pool.map(
                lambda io: _rir_fitness(query, io[1], params, io[0]), enumerate(scans)
            ))
    else:
        fitness = [_rir_fitness(query, cand, params, i) for i, cand in enumerate(scans)]
    return _reorder_prefix(ranked, np.asarray(fitness), params.n_topk)


def rerank_average_qe(
    index: DescriptorIndex,
    descriptor: np.ndarray,
    ranked: RankedList,
    n_qe: int,
    k: int,
) -> RankedList:
    """Mean-aggregate the query with its first n_qe candidates, re-retrieve."""
    g = np.asarray(descriptor, dtype=np.float64).ravel()
    if g.shape[0] != index.dim:
        raise DimMismatchError(f"query dim {g.shape[0]} != index dim {index.dim}")
    if n_qe > len(ranked):
        raise ValueError(f"n_qe={n_qe} exceeds ranked list length {len(ranked)}")
    stack = [g] + [index.descriptor_of(i) for i in ranked.ids[:n_qe]]
    expanded = np.mean(np.stack(stack), axis=0)
    return query_topk(index, expanded, k)


def rerank_alpha_qe(
    index: DescriptorIndex,
    descriptor: np.ndarray,
    ranked: RankedList,
    n_qe: int,
    alpha: float,
    k: int,
) -> RankedList:
    """Cosine-weighted aggregation: candidate i contributes with weight
    max(0, cos(g, g_i))^alpha on L2-normalized descriptors.

    Re-retrieval uses the cosine metric: the expanded query is unit-norm,
    so Euclidean distance against raw descriptors would not even reproduce
    the original ranking in the degenerate n_qe = 0 case.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    g = np.asarray(descriptor, dtype=np.float64).ravel()
    if g.shape[0] != index.dim:
        raise DimMismatchError(f"query dim {g.shape[0]} != index dim {index.dim}")
    if n_qe > len(ranked):
        raise ValueError(f"n_qe={n_qe} exceeds ranked list length {len(ranked)}")
    gn = np.linalg.norm(g)
    if gn == 0.0:
        raise ZeroVectorError("query descriptor has zero norm")
    g_unit = g / gn
    acc = g_unit.copy()
    for scan_id in ranked.ids[:n_qe]:
        gi = index.descriptor_of(scan_id)
        norm = np.linalg.norm(gi)
        if norm == 0.0:
            continue
        gi_unit = gi / norm
        w = max(0.0, float(g_unit @ gi_unit)) ** alpha
        acc += w * gi_unit
    total = np.linalg.norm(acc)
    if total == 0.0:
        raise ZeroVectorError("expanded query collapsed to the zero vector")
    return query_topk(index, acc / total, k, metric="cosine")
