"""Part segmentation with the non-parametric encoder, a mirrored decoder and a
bank of per-(object, part) mean features."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .encoder import EncoderConfig, StagePointSet, encode_hierarchy
from .geometry import knn, pairwise_dist
from .memory import DEFAULT_GAMMA, MemoryBank, build_bank, predict

PROPAGATE_EPS = 1e-8

# ShapeNetPart category -> part label ids (50 parts over 16 categories)
SHAPENET_PARTS = {
    "Airplane": (0, 1, 2, 3),
    "Bag": (4, 5),
    "Cap": (6, 7),
    "Car": (8, 9, 10, 11),
    "Chair": (12, 13, 14, 15),
    "Earphone": (16, 17, 18),
    "Guitar": (19, 20, 21),
    "Knife": (22, 23),
    "Lamp": (24, 25, 26, 27),
    "Laptop": (28, 29),
    "Motorbike": (30, 31, 32, 33, 34, 35),
    "Mug": (36, 37),
    "Pistol": (38, 39, 40),
    "Rocket": (41, 42, 43),
    "Skateboard": (44, 45, 46),
    "Table": (47, 48, 49),
}

# A part bank is a memory bank whose classes are part labels.
PartBank = MemoryBank


class UnknownCategoryWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SegEncoderConfig(EncoderConfig):
    stages: int = 5
    init_dim: int = 144
    neighbors: int = 128


def propagate(coarse: StagePointSet, fine_coords, skip_feats=None) -> StagePointSet:
    """Carry coarse features onto finer points by inverse-distance weighting of
    the 3 nearest coarse points, then append ``skip_feats``."""
    fine = np.asarray(fine_coords, dtype=np.float64)
    k = min(3, len(coarse))
    idx = knn(fine, coarse.coords, k)
    d = np.take_along_axis(pairwise_dist(fine, coarse.coords), idx, axis=1)
    w = 1.0 / (d + PROPAGATE_EPS)
    w /= w.sum(axis=1, keepdims=True)
    feats = coarse.feats
    interp = np.einsum("nk,nkc->nc", w.astype(feats.dtype), feats[idx])
    if skip_feats is not None:
        skip = np.asarray(skip_feats)
        if skip.shape[0] != fine.shape[0]:
            raise ValueError(f"{skip.shape[0]} skip rows for {fine.shape[0]} points")
        interp = np.concatenate([interp, skip.astype(interp.dtype, copy=False)], axis=1)
    return StagePointSet(fine, interp)


def encode_pointwise(cloud, cfg: EncoderConfig = SegEncoderConfig()) -> StagePointSet:
    """One feature row per input point (input order kept).

    The decoder walks the encoder levels back up, at each step interpolating
    onto the finer level and concatenating that level's encoder features.
    """
    levels = encode_hierarchy(cloud, cfg)
    current = levels[-1]
    for level in reversed(levels[:-1]):
        current = propagate(current, level.coords, level.feats)
    return current


def part_prototypes(point_feats, point_labels):
    """Mean feature per distinct label, labels ascending. Returns ``(feats, labels)``."""
    feats = np.asarray(point_feats, dtype=np.float64)
    labels = np.asarray(point_labels)
    if labels.shape != (feats.shape[0],):
        raise ValueError(f"expected {feats.shape[0]} labels, got shape {labels.shape}")
    parts = np.unique(labels)
    protos = np.stack([feats[labels == p].mean(axis=0) for p in parts]) if parts.size else None
    return protos, parts


def build_part_bank(
    clouds: Sequence,
    point_labels: Sequence,
    cfg: EncoderConfig = SegEncoderConfig(),
    gamma: float = DEFAULT_GAMMA,
    num_parts: int = 50,
    part_names: Optional[Sequence[str]] = None,
) -> MemoryBank:
    """Part bank from training objects: one row per (object, part) present."""
    if len(clouds) != len(point_labels):
        raise ValueError("need one label array per cloud")
    rows, labels = [], []
    for cloud, lab in zip(clouds, point_labels):
        lab = np.asarray(lab)
        if lab.shape != (len(cloud),):
            raise ValueError(f"{lab.size} part labels for {len(cloud)} points")
        if np.any((lab < 0) | (lab >= num_parts)):
            raise ValueError(f"part labels must be in [0, {num_parts})")
        protos, parts = part_prototypes(encode_pointwise(cloud, cfg).feats, lab)
        if protos is not None:
            rows.append(protos)
            labels.append(parts)
    if not rows:
        raise ValueError("no labelled points to build a part bank from")
    if part_names is None:
        part_names = [f"part{i}" for i in range(num_parts)]
    return build_bank(
        np.concatenate(rows), np.concatenate(labels), num_parts, gamma, part_names, kind="part"
    )


def allowed_parts(
    category: Optional[str], num_parts: int, part_ranges: Mapping = SHAPENET_PARTS
) -> np.ndarray:
    if category is None:
        return np.arange(num_parts)
    if category not in part_ranges:
        warnings.warn(
            f"unknown category {category!r}; matching against the whole part bank",
            UnknownCategoryWarning,
            stacklevel=3,
        )
        return np.arange(num_parts)
    return np.asarray(part_ranges[category], dtype=np.int64)


def segment_features(point_feats, bank: MemoryBank, parts) -> np.ndarray:
    """Part label per feature row, chosen among ``parts`` by bank matching."""
    parts = np.asarray(parts, dtype=np.int64)
    logits = predict(point_feats, bank)
    return parts[np.argmax(logits[:, parts], axis=1)]


def segment(
    cloud,
    bank: MemoryBank,
    cfg: EncoderConfig = SegEncoderConfig(),
    category: Optional[str] = None,
    part_ranges: Mapping = SHAPENET_PARTS,
) -> np.ndarray:
    """Per-point part labels for a cloud of a known (or unknown) category."""
    if bank.size == 0:
        raise ValueError("part bank is empty")
    parts = allowed_parts(category, bank.num_classes, part_ranges)
    return segment_features(encode_pointwise(cloud, cfg).feats, bank, parts)


def instance_miou(pred, truth, parts) -> float:
    """Mean IoU (%) over ``parts`` for one object; a part missing from both
    prediction and ground truth scores 1."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    ious = []
    for p in parts:
        union = np.sum((pred == p) | (truth == p))
        inter = np.sum((pred == p) & (truth == p))
        ious.append(1.0 if union == 0 else inter / union)
    return 100.0 * float(np.mean(ious))
