"""Spatial-compatibility matrices and the spectral fitness score.

The fitness of a candidate is the optimal inter-cluster score of the
correspondence compatibility graph: s* = v*^T M v* with v* the principal
eigenvector of M, approximated by power iteration. Scoring many candidates
of one query is a single batched computation; results are bitwise
independent of how candidates are grouped, so parallel and sequential
evaluation always agree.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, EmptyMatrixError, NonPositiveThresholdError
from .geometry import ScanRecord
from .matching import CorrespondenceSet, match_features, nn_squared_distances, sample_query_points


@dataclass(frozen=True)
class SpectralParams:
    """Knobs for correspondence scoring. All defaults are deliberate:
    d_thr bounds the pairwise length difference treated as compatible,
    n_max keeps the matrix at most n_max^2 entries."""

    d_thr: float = 0.5
    n_max: int = 1000
    tol: float = 1e-6
    max_iters: int = 100
    mutual: bool = False

    def __post_init__(self) -> None:
        if self.d_thr <= 0:
            raise NonPositiveThresholdError(f"d_thr must be > 0, got {self.d_thr}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class CompatibilityMatrix:
    """Symmetric non-negative matrix of pairwise compatibility scores.

    Entries lie in [0, 1] with an exactly zero diagonal; symmetry is exact
    because the matrix is built once and mirrored.
    """

    values: np.ndarray  # (n, n) float64
    d_thr: float

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"values must be square, got {v.shape}")
        if not np.array_equal(v, v.T):
            raise ValueError("compatibility matrix must be exactly symmetric")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("entries must lie in [0, 1]")
        if v.size and np.any(np.diagonal(v) != 0.0):
            raise ValueError("diagonal must be exactly zero")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _pairwise_distances(points: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix over the last two axes, (..., n, 3) -> (..., n, n)."""
    p = np.asarray(points, dtype=np.float64)
    sq = np.einsum("...ij,...ij->...i", p, p)
    d2 = np.matmul(p, np.swapaxes(p, -1, -2))
    d2 *= -2.0
    d2 += sq[..., :, None]
    d2 += sq[..., None, :]
    np.clip(d2, 0.0, None, out=d2)
    return np.sqrt(d2, out=d2)


def _compat_values(dx: np.ndarray, y: np.ndarray, d_thr: float) -> np.ndarray:
    """Compatibility entries for candidate points y against query distances dx.

    m_ij = max(0, 1 - d_ij^2 / d_thr^2), d_ij = | ||x_i-x_j|| - ||y_i-y_j|| |.
    The upper triangle is computed and mirrored, so symmetry is exact and
    the diagonal is exactly zero.
    """
    m = _pairwise_distances(y)  # (..., n, n)
    m -= dx
    m *= m
    m *= -1.0 / (d_thr * d_thr)
    m += 1.0
    np.clip(m, 0.0, None, out=m)
    n = m.shape[-1]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    m *= upper
    mt = np.swapaxes(m, -1, -2).copy()
    m += mt
    return m


def build_compatibility_matrix(corrs: CorrespondenceSet, d_thr: float) -> CompatibilityMatrix:
    """Pairwise spatial-compatibility matrix of a correspondence set."""
    if d_thr <= 0:
        raise NonPositiveThresholdError(f"d_thr must be > 0, got {d_thr}")
    if len(corrs) == 0:
        return CompatibilityMatrix(np.zeros((0, 0)), d_thr)
    dx = _pairwise_distances(corrs.query_points)
    values = _compat_values(dx, corrs.candidate_points, d_thr)
    return CompatibilityMatrix(values, d_thr)


@dataclass(frozen=True)
class SpectralResult:
    """Principal-eigenpair approximation plus the fitness score."""

    v_star: np.ndarray  # (n,), unit L2 norm
    eigenvalue: float   # Rayleigh quotient at v_star
    s_star: float       # v*^T M v*
    iterations: int
    converged: bool


def _power_iteration_batch(
    m_stack: np.ndarray, tol: float, max_iters: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Power iteration over a stack of symmetric matrices (b, n, n).

    Iterates the shifted matrix M + I: same eigenvectors as M, but the
    shift breaks the +/- eigenvalue symmetry of bipartite-ish compatibility
    graphs (e.g. isolated correspondence chains), where plain iteration
    oscillates forever. The Rayleigh quotient is taken on M itself.

    Each slice starts from the uniform vector and is frozen the moment its
    own stopping rule fires, so a slice's trajectory never depends on which
    other slices share the batch. A slice whose image vanishes is frozen
    immediately (covers the all-zero matrix case).
    """
    b, n = m_stack.shape[0], m_stack.shape[1]
    v = np.full((b, n, 1), 1.0 / np.sqrt(n))
    iterations = np.zeros(b, dtype=np.int64)
    converged = np.zeros(b, dtype=bool)
    active = np.arange(b)
    k = 0
    while active.size and k < max_iters:
        k += 1
        va = v[active]
        w = np.matmul(m_stack[active], va)
        w += va
        norms = np.sqrt(np.einsum("bij,bij->b", w, w))
        dead = norms == 0.0
        w /= np.where(dead, 1.0, norms)[:, None, None]
        if dead.any():
            w[dead] = va[dead]
        diffs = np.sqrt(np.einsum("bij,bij->b", w - va, w - va))
        done = (diffs < tol) | dead
        v[active] = w
        iterations[active] = k
        converged[active[done]] = True
        active = active[~done]
    mv = np.matmul(m_stack, v)
    lam = np.einsum("bij,bij->b", v, mv)
    return v[..., 0], lam, iterations, converged


def power_iterate(
    matrix: CompatibilityMatrix, tol: float = 1e-6, max_iters: int = 100
) -> SpectralResult:
    """Approximate the principal eigenpair of a compatibility matrix.

    Starts from the uniform vector; converged means the successive-iterate
    difference dropped below `tol`. Hitting `max_iters` is not an error:
    the current Rayleigh quotient is returned with converged=False.
    """
    if matrix.n == 0:
        raise EmptyMatrixError("cannot power-iterate an empty matrix")
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    v, lam, iters, conv = _power_iteration_batch(matrix.values[None], tol, max_iters)
    return SpectralResult(
        v_star=v[0],
        eigenvalue=float(lam[0]),
        s_star=float(lam[0]),
        iterations=int(iters[0]),
        converged=bool(conv[0]),
    )


def spectral_fitness(matrix: CompatibilityMatrix, params: SpectralParams = SpectralParams()) -> SpectralResult:
    """s* = v*^T M v*, the scalar spatial-consistency summary of the graph."""
    return power_iterate(matrix, params.tol, params.max_iters)


def _score_stack(
    dx: np.ndarray,
    query_feats: np.ndarray,
    candidates: list[ScanRecord],
    params: SpectralParams,
) -> np.ndarray:
    """Batched s* for candidates sharing the sampled query points.

    Candidates are grouped by point count for the NN step (one GEMM per
    group); compatibility matrices and the power iteration run as one
    batch. Per-candidate numbers are bitwise identical to scoring each
    candidate alone.
    """
    n = query_feats.shape[0]
    y = np.empty((len(candidates), n, 3))
    groups: dict[int, list[int]] = {}
    for pos, cand in enumerate(candidates):
        groups.setdefault(cand.num_points, []).append(pos)
    for count, positions in groups.items():
        feats = np.stack([candidates[p].local_features for p in positions]).astype(np.float64)
        pts = np.stack([candidates[p].cloud for p in positions]).astype(np.float64)
        d2 = nn_squared_distances(query_feats, feats)
        nn = d2.argmin(axis=2)
        y[positions] = np.take_along_axis(pts, nn[:, :, None], axis=1)
    m_stack = _compat_values(dx, y, params.d_thr)
    _, lam, _, _ = _power_iteration_batch(m_stack, params.tol, params.max_iters)
    return lam


def score_candidates(
    query: ScanRecord,
    candidates: list[ScanRecord],
    params: SpectralParams = SpectralParams(),
    workers: int = 1,
) -> tuple[np.ndarray, int]:
    """Spectral fitness of every candidate against one query.

    Returns (scores, n) where n is the correspondence count shared by all
    candidates. `workers` only controls how the candidate batch is split
    across threads; any split yields identical scores.
    """
    for cand in candidates:
        if cand.feature_dim != query.feature_dim:
            raise DimMismatchError(
                f"feature dims differ: query d'={query.feature_dim}, "
                f"candidate {cand.id!r} d'={cand.feature_dim}"
            )
    sampled = sample_query_points(query, params.n_max)
    n = sampled.shape[0]
    if not candidates:
        return np.zeros(0), n

    if params.mutual:
        # Mutual filtering yields a different correspondence count per
        # candidate, so score each one through the single-set path.
        scores = np.empty(len(candidates))
        for i, cand in enumerate(candidates):
            corrs = match_features(query, cand, params.n_max, mutual=True)
            matrix = build_compatibility_matrix(corrs, params.d_thr)
            if matrix.n == 0:
                scores[i] = 0.0
            else:
                scores[i] = spectral_fitness(matrix, params).s_star
        return scores, n

    query_feats = query.local_features[sampled].astype(np.float64)
    dx = _pairwise_distances(query.cloud[sampled].astype(np.float64))

    workers = max(1, workers)
    if workers == 1 or len(candidates) == 1:
        return _score_stack(dx, query_feats, candidates, params), n

    chunk_bounds = np.linspace(0, len(candidates), min(workers, len(candidates)) + 1).astype(int)
    chunks = [
        candidates[chunk_bounds[i]:chunk_bounds[i + 1]]
        for i in range(len(chunk_bounds) - 1)
        if chunk_bounds[i] < chunk_bounds[i + 1]
    ]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda ch: _score_stack(dx, query_feats, ch, params), chunks))
    return np.concatenate(parts), n


def score_candidate(
    query: ScanRecord,
    candidate: ScanRecord,
    params: SpectralParams = SpectralParams(),
) -> tuple[float, int]:
    """Fitness score of a single candidate: sample -> match -> M -> s*."""
    scores, n = score_candidates(query, [candidate], params)
    return float(scores[0]), n
