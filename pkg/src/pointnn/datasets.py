"""Labelled point-cloud datasets, synthetic primitives, few-shot episodes and
classification metrics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .encoder import EncoderConfig, encode_batch
from .geometry import as_cloud, normalize_cloud
from .memory import DEFAULT_GAMMA, build_bank, predict_labels, select_gamma

PRIMITIVES = ("sphere", "cube", "cylinder", "cone", "torus", "plane")
_SPLITS = {"train": 0, "test": 1}


@dataclass
class LabeledDataset:
    clouds: list
    labels: np.ndarray
    class_names: tuple
    split: str = "train"

    def __post_init__(self):
        self.clouds = [as_cloud(c) for c in self.clouds]
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.class_names = tuple(self.class_names)
        if len(self.clouds) != self.labels.size:
            raise ValueError(f"{len(self.clouds)} clouds but {self.labels.size} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("labels must index into class_names")

    def __len__(self):
        return len(self.clouds)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def subset(self, indices, split: Optional[str] = None) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            [self.clouds[i] for i in indices], self.labels[indices], self.class_names, split or self.split
        )


# -- synthetic primitives ---------------------------------------------------


def _unit_vectors(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _cube(rng, n):
    face = rng.integers(0, 6, size=n)
    pts = rng.uniform(-1.0, 1.0, size=(n, 3))
    axis = face // 2
    pts[np.arange(n), axis] = np.where(face % 2 == 0, -1.0, 1.0)
    return pts


def _cylinder(rng, n, radius=1.0, height=2.0):
    side = 2 * np.pi * radius * height
    cap = np.pi * radius**2
    on_side = rng.uniform(size=n) < side / (side + 2 * cap)
    theta = rng.uniform(0, 2 * np.pi, size=n)
    r = np.where(on_side, radius, radius * np.sqrt(rng.uniform(size=n)))
    z = np.where(on_side, rng.uniform(-height / 2, height / 2, size=n),
                 np.where(rng.uniform(size=n) < 0.5, -height / 2, height / 2))
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)


def _cone(rng, n, radius=1.0, height=2.0):
    slant = np.hypot(radius, height)
    lateral = np.pi * radius * slant
    base = np.pi * radius**2
    on_side = rng.uniform(size=n) < lateral / (lateral + base)
    theta = rng.uniform(0, 2 * np.pi, size=n)
    # lateral surface: area grows linearly with distance from the apex
    t = np.sqrt(rng.uniform(size=n))
    r = np.where(on_side, radius * t, radius * np.sqrt(rng.uniform(size=n)))
    z = np.where(on_side, height / 2 - height * t, -height / 2)
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)


def _torus(rng, n, major=1.0, minor=0.35):
    out = np.empty((0, 3))
    while out.shape[0] < n:
        m = 2 * (n - out.shape[0]) + 8
        u = rng.uniform(0, 2 * np.pi, size=m)
        v = rng.uniform(0, 2 * np.pi, size=m)
        # area element is proportional to (major + minor cos v)
        keep = rng.uniform(size=m) * (major + minor) < major + minor * np.cos(v)
        u, v = u[keep], v[keep]
        ring = major + minor * np.cos(v)
        out = np.vstack([out, np.stack([ring * np.cos(u), ring * np.sin(u), minor * np.sin(v)], axis=1)])
    return out[:n]


def _plane(rng, n):
    xy = rng.uniform(-1.0, 1.0, size=(n, 2))
    return np.column_stack([xy, np.zeros(n)])


_SAMPLERS = {
    "sphere": _unit_vectors,
    "cube": _cube,
    "cylinder": _cylinder,
    "cone": _cone,
    "torus": _torus,
    "plane": _plane,
}


def sample_primitive(name: str, n: int, rng) -> np.ndarray:
    """Uniform surface samples of a canonical primitive centered at the origin,
    z up. The cube has half-extent 1, the sphere radius 1."""
    if name not in _SAMPLERS:
        raise ValueError(f"unknown primitive {name!r}; choose from {PRIMITIVES}")
    return _SAMPLERS[name](rng, n)


def _rotate_z(pts, angle):
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return pts @ rot.T


def synth_primitives(
    classes: Sequence[str] = PRIMITIVES,
    per_class: int = 200,
    points: int = 512,
    noise: float = 0.01,
    seed: int = 0,
    split: str = "train",
) -> LabeledDataset:
    """Jittered, randomly z-rotated primitive surfaces scaled into the unit sphere.

    Scaling keeps each primitive's own center at the origin. ``split`` selects
    an independent random stream, so ``train`` and ``test`` sets drawn with the
    same seed do not overlap.
    """
    classes = list(classes)
    if not classes:
        raise ValueError("need at least one primitive class")
    if points < 8:
        raise ValueError("need at least 8 points per cloud")
    if split not in _SPLITS:
        raise ValueError(f"split must be one of {tuple(_SPLITS)}")
    rng = np.random.default_rng([seed, _SPLITS[split]])
    clouds, labels = [], []
    for label, name in enumerate(classes):
        for _ in range(per_class):
            pts = sample_primitive(name, points, rng)
            pts = _rotate_z(pts, rng.uniform(0, 2 * np.pi))
            if noise > 0:
                pts = pts + rng.normal(scale=noise, size=pts.shape)
            pts = pts / np.sqrt((pts**2).sum(axis=1)).max()
            clouds.append(pts)
            labels.append(label)
    return LabeledDataset(clouds, np.array(labels), tuple(classes), split)


# -- few-shot episodes ------------------------------------------------------


@dataclass
class FewShotEpisode:
    """Support and query sets relabelled to ``0 .. n_way-1``.

    ``classes`` maps episode labels back to dataset labels; ``support_index``
    and ``query_index`` are positions in the source dataset.
    """

    n_way: int
    k_shot: int
    support: LabeledDataset
    query: LabeledDataset
    seed: int
    classes: np.ndarray = field(default=None)
    support_index: np.ndarray = field(default=None)
    query_index: np.ndarray = field(default=None)


def episode_indices(labels, n_way: int, k_shot: int, query_per_class: int, seed: int,
                    class_names: Optional[Sequence[str]] = None):
    """Seeded choice of classes and disjoint support/query rows.

    Returns ``(classes, support_index, query_index)``; rows are grouped by
    episode class in the order of ``classes``.
    """
    labels = np.asarray(labels)
    present = np.unique(labels)
    if n_way < 1 or k_shot < 1 or query_per_class < 0:
        raise ValueError("n_way and k_shot must be positive, query_per_class non-negative")
    need = k_shot + query_per_class
    eligible = [c for c in present if np.sum(labels == c) >= need]
    if len(present) < n_way:
        raise ValueError(f"dataset has {len(present)} classes, episode needs {n_way}")
    if len(eligible) < n_way:
        short = next(c for c in present if np.sum(labels == c) < need)
        name = class_names[short] if class_names is not None else str(short)
        raise ValueError(f"class {name!r} has {np.sum(labels == short)} samples, needs {need}")
    rng = np.random.default_rng(seed)
    classes = np.sort(rng.choice(np.asarray(eligible), size=n_way, replace=False))
    support, query = [], []
    for c in classes:
        rows = rng.permutation(np.flatnonzero(labels == c))[:need]
        support.append(rows[:k_shot])
        query.append(rows[k_shot:])
    return classes, np.concatenate(support), np.concatenate(query)


def sample_episode(dataset: LabeledDataset, n_way: int, k_shot: int,
                   query_per_class: int = 20, seed: int = 0) -> FewShotEpisode:
    classes, s_idx, q_idx = episode_indices(
        dataset.labels, n_way, k_shot, query_per_class, seed, dataset.class_names
    )
    remap = {int(c): i for i, c in enumerate(classes)}
    names = tuple(dataset.class_names[c] for c in classes)

    def part(idx, split):
        return LabeledDataset(
            [dataset.clouds[i] for i in idx], [remap[int(dataset.labels[i])] for i in idx], names, split
        )

    return FewShotEpisode(n_way, k_shot, part(s_idx, "train"), part(q_idx, "test"), seed,
                          classes, s_idx, q_idx)


# -- metrics ----------------------------------------------------------------


def accuracy(pred, truth) -> float:
    """Percentage of matching labels."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.size == 0:
        raise ValueError("accuracy of an empty prediction is undefined")
    return 100.0 * float(np.mean(pred == truth))


@dataclass
class ClassificationReport:
    accuracy: float
    per_class: dict
    confusion: np.ndarray
    class_names: tuple
    gamma: float
    timing: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def format(self, timing: bool = False) -> str:
        """Human-readable table followed by a ``key=value`` block.

        Timing is left out unless asked for, so equal runs print equal reports.
        """
        lines = [f"overall accuracy: {self.accuracy:.2f}%", "", f"{'class':<16}{'acc%':>8}{'n':>6}"]
        for i, name in enumerate(self.class_names):
            n = int(self.confusion[i].sum())
            acc = self.per_class.get(name)
            shown = f"{acc:8.2f}" if acc is not None else f"{'-':>8}"
            lines.append(f"{name:<16}{shown}{n:>6}")
        lines.append("")
        lines.append("[results]")
        lines.append(f"accuracy={self.accuracy:.4f}")
        lines.append(f"gamma={self.gamma:g}")
        for name, acc in self.per_class.items():
            lines.append(f"class_accuracy.{name}={acc:.4f}")
        lines.append("confusion=" + ";".join(",".join(str(int(v)) for v in row) for row in self.confusion))
        for key, val in self.extra.items():
            lines.append(f"{key}={val}")
        if timing:
            for key, val in self.timing.items():
                lines.append(f"time.{key}={val:.3f}")
        return "\n".join(lines) + "\n"


def classification_report(pred, truth, class_names, gamma, timing=None) -> ClassificationReport:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    k = len(class_names)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    per_class = {}
    for i, name in enumerate(class_names):
        mask = truth == i
        if mask.any():
            per_class[name] = accuracy(pred[mask], truth[mask])
    return ClassificationReport(accuracy(pred, truth), per_class, confusion, tuple(class_names),
                                float(gamma), dict(timing or {}))


def encode_dataset(dataset: LabeledDataset, cfg: EncoderConfig = EncoderConfig(),
                   normalize: bool = True, workers: int = 1) -> np.ndarray:
    """Global feature per cloud, normalizing each cloud first unless told not to."""
    clouds = [normalize_cloud(c) for c in dataset.clouds] if normalize else dataset.clouds
    return encode_batch(clouds, cfg, workers)


def evaluate_classification(
    train: LabeledDataset,
    test: LabeledDataset,
    cfg: EncoderConfig = EncoderConfig(),
    gamma=DEFAULT_GAMMA,
    normalize: bool = True,
    workers: int = 1,
) -> ClassificationReport:
    """Build a bank from ``train``, classify ``test`` and collect metrics.

    ``gamma="auto"`` picks gamma by leave-one-out accuracy on the training
    bank; the test set is never consulted.
    """
    if tuple(train.class_names) != tuple(test.class_names):
        raise ValueError("train and test must share class names")
    t0 = time.perf_counter()
    train_feats = encode_dataset(train, cfg, normalize, workers)
    test_feats = encode_dataset(test, cfg, normalize, workers)
    t1 = time.perf_counter()
    report = evaluate_features(train_feats, train.labels, test_feats, test.labels,
                               train.class_names, gamma)
    report.timing = {"encode": t1 - t0, "predict": time.perf_counter() - t1}
    return report


def evaluate_features(train_feats, train_labels, test_feats, test_labels, class_names,
                      gamma=DEFAULT_GAMMA) -> ClassificationReport:
    """Bank matching on precomputed global features."""
    auto = isinstance(gamma, str)
    if auto and gamma != "auto":
        raise ValueError(f"gamma must be a number or 'auto', got {gamma!r}")
    bank = build_bank(train_feats, train_labels, len(class_names),
                      DEFAULT_GAMMA if auto else gamma, class_names)
    if auto:
        bank = bank.with_gamma(select_gamma(bank))
    pred = predict_labels(test_feats, bank)
    report = classification_report(pred, test_labels, class_names, bank.gamma)
    if auto:
        report.extra["gamma_selection"] = "leave-one-out"
    return report


def few_shot_accuracies(feats, labels, n_way: int, k_shot: int, query_per_class: int = 20,
                        runs: int = 10, seed: int = 0, gamma=DEFAULT_GAMMA) -> np.ndarray:
    """Accuracy (%) of ``runs`` episodes on precomputed features; episode ``r``
    is drawn with seed ``seed + r``."""
    feats = np.asarray(feats)
    labels = np.asarray(labels)
    out = []
    for r in range(runs):
        classes, s_idx, q_idx = episode_indices(labels, n_way, k_shot, query_per_class, seed + r)
        remap = np.full(labels.max() + 1, -1)
        remap[classes] = np.arange(n_way)
        names = [str(c) for c in classes]
        report = evaluate_features(feats[s_idx], remap[labels[s_idx]], feats[q_idx],
                                   remap[labels[q_idx]], names, gamma)
        out.append(report.accuracy)
    return np.array(out)
