"""The multi-stage non-parametric encoder.

A cloud is embedded point-wise with the trigonometric encoding, then each
stage halves the point count by farthest point sampling, groups neighbors of
every sampled center, widens features by concatenating center and neighbor,
modulates them with the encoding of the standardized relative coordinates and
pools. A final pooling over the last stage yields the global descriptor.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .encoding import PosEParams, pos_e_batch
from .geometry import as_cloud, ball_query, farthest_point_sample, knn, normalize_neighborhood

STAGE_POOLING = ("max", "avg", "max+avg")
GLOBAL_POOLING = ("max+avg", "concat")


class NeighborClampWarning(UserWarning):
    """A stage had fewer points than the configured neighbor count."""


@dataclass
class StagePointSet:
    coords: np.ndarray
    feats: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.feats = np.asarray(self.feats)
        if self.feats.dtype.kind != "f":
            self.feats = self.feats.astype(np.float64)
        if self.coords.ndim != 2 or self.coords.shape[1] != 3:
            raise ValueError(f"coords must be (N, 3), got {self.coords.shape}")
        if self.feats.ndim != 2 or self.feats.shape[0] != self.coords.shape[0]:
            raise ValueError(
                f"feats must be (N, C) with N={self.coords.shape[0]}, got {self.feats.shape}"
            )
        if self.feats.shape[1] < 1:
            raise ValueError("feature dimension must be positive")

    def __len__(self):
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.feats.shape[1]


@dataclass(frozen=True)
class EncoderConfig:
    """Hyper-parameters of the encoder.

    ``grouping`` is ``"knn"`` or ``"ball:<radius>"``. ``stage_params``
    optionally overrides ``(alpha, beta)`` per stage for the relative-position
    weighting (index 0 is the first aggregation stage). ``dtype`` is the working
    precision of features; float32 trigonometry is far cheaper than float64.
    With ``expansion`` off, neighbors are weighted without the center feature
    prepended, so every stage keeps ``init_dim`` channels.
    """

    stages: int = 4
    init_dim: int = 72
    neighbors: int = 90
    alpha: float = 1000.0
    beta: float = 100.0
    grouping: str = "knn"
    stage_pooling: str = "max+avg"
    global_pooling: str = "max+avg"
    stage_params: Optional[tuple] = field(default=None)
    dtype: str = "float32"
    expansion: bool = True

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError("stages must be >= 1")
        if self.neighbors < 1:
            raise ValueError("neighbors must be >= 1")
        PosEParams(self.init_dim, self.alpha, self.beta)
        if self.stage_pooling not in STAGE_POOLING:
            raise ValueError(f"stage_pooling must be one of {STAGE_POOLING}")
        if self.global_pooling not in GLOBAL_POOLING:
            raise ValueError(f"global_pooling must be one of {GLOBAL_POOLING}")
        self.radius  # validates grouping
        if self.stage_params is not None and len(self.stage_params) != self.stages:
            raise ValueError("stage_params needs one (alpha, beta) pair per stage")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")

    @property
    def radius(self) -> Optional[float]:
        if self.grouping == "knn":
            return None
        if self.grouping.startswith("ball:"):
            r = float(self.grouping[5:])
            if r <= 0:
                raise ValueError("ball radius must be positive")
            return r
        raise ValueError(f"grouping must be 'knn' or 'ball:<radius>', got {self.grouping!r}")

    def stage_dim(self, stage: int) -> int:
        """Feature width after ``stage`` aggregation stages (0 is the raw embedding)."""
        return 2**stage * self.init_dim if self.expansion else self.init_dim

    @property
    def global_dim(self) -> int:
        base = self.stage_dim(self.stages)
        return 2 * base if self.global_pooling == "concat" else base

    def embed_params(self) -> PosEParams:
        return PosEParams(self.init_dim, self.alpha, self.beta)

    def stage_pose(self, stage: int) -> PosEParams:
        """Encoding used to weigh neighbors in ``stage`` (1-based)."""
        alpha, beta = self.alpha, self.beta
        if self.stage_params is not None:
            alpha, beta = self.stage_params[stage - 1]
        return PosEParams(self.stage_dim(stage), alpha, beta)


def raw_point_embed(cloud, cfg: EncoderConfig) -> StagePointSet:
    pts = as_cloud(cloud)
    return StagePointSet(pts, pos_e_batch(pts, cfg.embed_params(), cfg.dtype))


def expand_features(center_feat, neighbor_feats) -> np.ndarray:
    """Prepend the center feature to every neighbor feature: ``(k, C) -> (k, 2C)``."""
    center_feat = np.asarray(center_feat)
    neighbor_feats = np.asarray(neighbor_feats)
    if center_feat.shape[-1] != neighbor_feats.shape[-1]:
        raise ValueError(
            f"center dim {center_feat.shape[-1]} != neighbor dim {neighbor_feats.shape[-1]}"
        )
    center = np.broadcast_to(center_feat[..., None, :], neighbor_feats.shape)
    return np.concatenate([center, neighbor_feats], axis=-1)


def weigh_neighbors(expanded, delta_p, pose: PosEParams) -> np.ndarray:
    """``(f + e) * e`` with ``e`` the encoding of each relative coordinate."""
    expanded = np.asarray(expanded)
    if expanded.shape[-1] != pose.dim:
        raise ValueError(f"feature dim {expanded.shape[-1]} != encoding dim {pose.dim}")
    e = pos_e_batch(delta_p, pose, expanded.dtype if expanded.dtype.kind == "f" else np.float64)
    if e.shape != expanded.shape:
        raise ValueError(f"delta_p shape {np.shape(delta_p)} does not match features")
    return (expanded + e) * e


def pool_neighborhood(weighted, mode: str = "max+avg") -> np.ndarray:
    """Reduce the neighbor axis (second to last) by max, mean or their sum."""
    weighted = np.asarray(weighted)
    if weighted.ndim < 2 or weighted.shape[-2] == 0:
        raise ValueError("cannot pool an empty neighborhood")
    if mode == "max":
        return weighted.max(axis=-2)
    if mode == "avg":
        return weighted.mean(axis=-2)
    if mode == "max+avg":
        return weighted.max(axis=-2) + weighted.mean(axis=-2)
    raise ValueError(f"unknown pooling mode {mode!r}")


def _group(centers: np.ndarray, coords: np.ndarray, k: int, cfg: EncoderConfig) -> np.ndarray:
    radius = cfg.radius
    if radius is None:
        return knn(centers, coords, k)
    return ball_query(centers, coords, k, radius)


def encode_stage(points: StagePointSet, cfg: EncoderConfig, stage: int) -> StagePointSet:
    """One aggregation stage (``stage`` is 1-based); halves points, doubles width."""
    m_in = len(points)
    m_out = math.ceil(m_in / 2)
    k = cfg.neighbors
    if k > m_in:
        warnings.warn(
            f"stage {stage}: {m_in} points < {k} neighbors, using k={m_in}",
            NeighborClampWarning,
            stacklevel=2,
        )
        k = m_in

    centers = farthest_point_sample(points.coords, m_out)
    center_xyz = points.coords[centers]
    groups = _group(center_xyz, points.coords, k, cfg)

    if cfg.expansion:
        expanded = expand_features(points.feats[centers], points.feats[groups])
    else:
        expanded = points.feats[groups]
    delta = normalize_neighborhood(center_xyz, points.coords[groups])
    weighted = weigh_neighbors(expanded, delta, cfg.stage_pose(stage))
    return StagePointSet(center_xyz, pool_neighborhood(weighted, cfg.stage_pooling))


def encode_hierarchy(cloud, cfg: EncoderConfig) -> list:
    """Raw embedding followed by every stage output, ``cfg.stages + 1`` sets."""
    levels = [raw_point_embed(cloud, cfg)]
    for s in range(1, cfg.stages + 1):
        levels.append(encode_stage(levels[-1], cfg, s))
    return levels


def global_pool(feats: np.ndarray, mode: str = "max+avg") -> np.ndarray:
    if mode == "max+avg":
        return feats.max(axis=0) + feats.mean(axis=0)
    if mode == "concat":
        return np.concatenate([feats.max(axis=0), feats.mean(axis=0)])
    raise ValueError(f"unknown global pooling {mode!r}")


def encode_global(cloud, cfg: EncoderConfig = EncoderConfig()) -> np.ndarray:
    """Global descriptor of a (normalized) cloud, length ``cfg.global_dim``."""
    last = encode_hierarchy(cloud, cfg)[-1]
    return global_pool(last.feats, cfg.global_pooling).astype(np.float64)


def encode_batch(
    clouds: Sequence, cfg: EncoderConfig = EncoderConfig(), workers: int = 1
) -> np.ndarray:
    """Stack of global descriptors, one row per cloud.

    With ``workers > 1`` clouds are encoded on a thread pool; numpy releases
    the GIL in the heavy kernels. Row order always follows the input.
    """
    if len(clouds) == 0:
        return np.zeros((0, cfg.global_dim))
    if workers <= 1:
        rows = [encode_global(c, cfg) for c in clouds]
    else:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda c: encode_global(c, cfg), clouds))
    return np.stack(rows)
