"""Spatial primitives: farthest point sampling, k-nearest neighbors, ball query
and the two normalizations used before and inside the encoder.

Everything here is exact and deterministic. Distances are plain Euclidean
(no approximate structures) and every tie is broken by a rule that depends on
geometry first and on index second, so permuting a cloud permutes the outputs.
"""

from __future__ import annotations

import numpy as np

NEIGHBORHOOD_EPS = 1e-5


def as_cloud(points, name: str = "cloud") -> np.ndarray:
    """Validate and return an ``(N, 3)`` float array of finite coordinates."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError(f"{name} must contain at least one point")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def _order_invariant_mean(points: np.ndarray) -> np.ndarray:
    # Sorting each column first makes the summation order (and so the rounding)
    # independent of how the rows are permuted.
    return np.sort(points, axis=0).mean(axis=0)


def _pick(values: np.ndarray, points: np.ndarray) -> int:
    """Index of the largest value; ties go to the lexicographically smallest
    point, then to the smallest index."""
    best = values.max()
    cand = np.flatnonzero(values == best)
    if cand.size == 1:
        return int(cand[0])
    sub = points[cand]
    # lexsort uses the last key as primary; the candidate index is the final tie-break
    order = np.lexsort((cand, sub[:, 2], sub[:, 1], sub[:, 0]))
    return int(cand[order[0]])


def _norm(diff: np.ndarray) -> np.ndarray:
    # Euclidean length over the last axis. Nested hypot neither underflows on
    # tiny offsets nor overflows on huge ones, unlike summing squares.
    return np.hypot(np.hypot(diff[..., 0], diff[..., 1]), diff[..., 2])


def farthest_point_sample(points, m: int) -> np.ndarray:
    """Greedy max-min subsampling of ``m`` indices from an ``(N, 3)`` cloud.

    The seed is the point farthest from the centroid. Each following pick
    maximizes the distance to the already chosen set.
    """
    pts = as_cloud(points)
    n = pts.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"sample count must be in [1, {n}], got {m}")

    centroid = _order_invariant_mean(pts)
    d_centroid = _norm(pts - centroid)
    selected = np.empty(m, dtype=np.int64)
    selected[0] = _pick(d_centroid, pts)

    min_dist = np.full(n, np.inf)
    for i in range(1, m):
        last = pts[selected[i - 1]]
        d = _norm(pts - last)
        np.minimum(min_dist, d, out=min_dist)
        min_dist[selected[i - 1]] = -1.0
        selected[i] = _pick(min_dist, pts)
    return selected


def pairwise_dist(queries: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Distances computed by explicit differences (no Gram trick), so equal
    geometric distances produce equal floats."""
    return _norm(queries[:, None, :] - reference[None, :, :])


def knn(queries, reference, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest reference points for every query.

    Returns an ``(M, k)`` integer array sorted by ascending distance, equal
    distances ordered by smaller reference index.
    """
    q = as_cloud(queries, "queries")
    ref = as_cloud(reference, "reference")
    if not 1 <= k <= ref.shape[0]:
        raise ValueError(f"k must be in [1, {ref.shape[0]}], got {k}")
    d = pairwise_dist(q, ref)
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def ball_query(queries, reference, k: int, radius: float) -> np.ndarray:
    """Up to ``k`` reference points within ``radius`` of each query, in index
    order. Short rows are padded by repeating their first entry; an empty
    ball falls back to the single nearest point.
    """
    q = as_cloud(queries, "queries")
    ref = as_cloud(reference, "reference")
    if not 1 <= k <= ref.shape[0]:
        raise ValueError(f"k must be in [1, {ref.shape[0]}], got {k}")
    if radius <= 0:
        raise ValueError("radius must be positive")
    d = pairwise_dist(q, ref)
    out = np.empty((q.shape[0], k), dtype=np.int64)
    for j in range(q.shape[0]):
        inside = np.flatnonzero(d[j] <= radius)[:k]
        if inside.size == 0:
            inside = np.argsort(d[j], kind="stable")[:1]
        out[j, : inside.size] = inside
        out[j, inside.size :] = inside[0]
    return out


def normalize_cloud(points) -> np.ndarray:
    """Center on the centroid and scale so the farthest point has norm 1."""
    pts = as_cloud(points)
    centered = pts - _order_invariant_mean(pts)
    scale = np.sqrt((centered**2).sum(axis=1)).max()
    if scale == 0.0:
        scale = 1.0
    return centered / scale


def normalize_neighborhood(center, neighbors, eps: float = NEIGHBORHOOD_EPS) -> np.ndarray:
    """Relative neighbor coordinates standardized by their mean offset and a
    single standard deviation shared by all three axes.

    Also accepts batched input: ``center`` of shape ``(G, 3)`` with
    ``neighbors`` of shape ``(G, k, 3)``.
    """
    center = np.asarray(center, dtype=np.float64)
    neighbors = np.asarray(neighbors, dtype=np.float64)
    if neighbors.shape[-2] < 1:
        raise ValueError("neighborhood must contain at least one point")
    offsets = neighbors - center[..., None, :]
    centered = offsets - offsets.mean(axis=-2, keepdims=True)
    sigma = np.sqrt((centered**2).mean(axis=(-2, -1), keepdims=True))
    return centered / (sigma + eps)
