"""Point-memory bank: cached training features with one-hot labels, and
classification by similarity matching against them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

DEFAULT_GAMMA = 100.0


class BankError(ValueError):
    """Raised when a bank cannot be built from the given samples."""


@dataclass(frozen=True, eq=False)
class MemoryBank:
    """Row-normalized feature memory (float32) and its one-hot label memory.

    Built through :func:`build_bank`; treat instances as immutable.
    """

    feat_mem: np.ndarray
    label_mem: np.ndarray
    gamma: float
    class_names: tuple
    kind: str = "classification"

    @property
    def size(self) -> int:
        return self.feat_mem.shape[0]

    @property
    def num_classes(self) -> int:
        return self.label_mem.shape[1]

    @property
    def dim(self) -> int:
        return self.feat_mem.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return self.label_mem.argmax(axis=1)

    def subset(self, rows) -> "MemoryBank":
        rows = np.asarray(rows, dtype=np.int64)
        return MemoryBank(self.feat_mem[rows], self.label_mem[rows], self.gamma, self.class_names, self.kind)

    def with_gamma(self, gamma: float) -> "MemoryBank":
        return MemoryBank(self.feat_mem, self.label_mem, _as_gamma(gamma), self.class_names, self.kind)


def _as_gamma(gamma: float) -> float:
    # Banks persist gamma as float32; round here so saved and live banks agree.
    gamma = float(np.float32(gamma))
    if not gamma >= 0 or not np.isfinite(gamma):
        raise BankError(f"gamma must be a finite non-negative number, got {gamma}")
    return gamma


def build_bank(
    features,
    labels,
    num_classes: int,
    gamma: float = DEFAULT_GAMMA,
    class_names: Optional[Sequence[str]] = None,
    kind: str = "classification",
) -> MemoryBank:
    """Cache ``(N, C)`` features with their class indices.

    Rows are L2-normalized and stored as float32; sample order is preserved.
    """
    feats = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise BankError(f"features must be a non-empty (N, C) matrix, got {feats.shape}")
    if labels.shape != (feats.shape[0],):
        raise BankError(f"expected {feats.shape[0]} labels, got shape {labels.shape}")
    if num_classes < 1:
        raise BankError("num_classes must be positive")
    bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if bad.size:
        raise BankError(f"sample {bad[0]} has label {labels[bad[0]]} outside [0, {num_classes})")
    if not np.all(np.isfinite(feats)):
        raise BankError(f"sample {np.flatnonzero(~np.isfinite(feats).all(1))[0]} has non-finite features")
    norms = np.linalg.norm(feats, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise BankError(f"sample {zero[0]} has an all-zero feature and cannot be normalized")
    if class_names is None:
        class_names = [f"class{i}" for i in range(num_classes)]
    if len(class_names) != num_classes:
        raise BankError(f"{len(class_names)} class names for {num_classes} classes")

    feat_mem = (feats / norms[:, None]).astype(np.float32)
    label_mem = np.zeros((feats.shape[0], num_classes), dtype=np.float32)
    label_mem[np.arange(feats.shape[0]), labels.astype(np.int64)] = 1.0
    return MemoryBank(feat_mem, label_mem, _as_gamma(gamma), tuple(class_names), kind)


def phi(x, gamma: float):
    """Sharpening activation ``exp(-gamma * (1 - x))``."""
    return np.exp(-gamma * (1.0 - np.asarray(x, dtype=np.float64)))


def similarities(test_feats, bank: MemoryBank) -> np.ndarray:
    """Cosine similarity of one ``(C,)`` or several ``(T, C)`` features to every bank row."""
    f = np.asarray(test_feats, dtype=np.float64)
    if f.shape[-1] != bank.dim:
        raise ValueError(f"feature dim {f.shape[-1]} != bank dim {bank.dim}")
    norms = np.linalg.norm(f, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot match an all-zero test feature")
    return (f / norms) @ bank.feat_mem.astype(np.float64).T


def predict(test_feat, bank: MemoryBank) -> np.ndarray:
    """Class logits: each cached sample votes for its class with weight
    ``phi(cosine similarity)``.

    Works on a single feature or a ``(T, C)`` batch.
    """
    s = similarities(test_feat, bank)
    return phi(s, bank.gamma) @ bank.label_mem.astype(np.float64)


def _rank(s: np.ndarray) -> np.ndarray:
    # descending similarity; stable sort keeps the smaller index first on ties
    return np.argsort(-s, kind="stable")


def predict_topk(test_feat, bank: MemoryBank, top_k: int) -> np.ndarray:
    """Like :func:`predict` but only the ``top_k`` most similar samples vote."""
    if not 1 <= top_k <= bank.size:
        raise ValueError(f"top_k must be in [1, {bank.size}], got {top_k}")
    s = similarities(test_feat, bank)
    if s.ndim == 1:
        s = s[None]
        squeeze = True
    else:
        squeeze = False
    w = phi(s, bank.gamma)
    keep = np.zeros_like(w, dtype=bool)
    for row, order in zip(keep, map(_rank, s)):
        row[order[:top_k]] = True
    logits = np.where(keep, w, 0.0) @ bank.label_mem.astype(np.float64)
    return logits[0] if squeeze else logits


def knn_classify(test_feat, bank: MemoryBank, k: int) -> int:
    """Hard majority vote of the ``k`` most similar samples.

    Tied vote counts go to the class of the most similar sample among the
    tied classes.
    """
    if not 1 <= k <= bank.size:
        raise ValueError(f"k must be in [1, {bank.size}], got {k}")
    s = similarities(test_feat, bank)
    if s.ndim != 1:
        raise ValueError("knn_classify takes a single feature vector")
    order = _rank(s)[:k]
    votes = bank.labels[order]
    counts = np.bincount(votes, minlength=bank.num_classes)
    tied = counts == counts.max()
    for c in votes:
        if tied[c]:
            return int(c)
    raise AssertionError("unreachable")


def softmax(logits, axis: int = -1) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def fuse_logits(a, b, weight: float = 0.5) -> np.ndarray:
    """Linear interpolation ``weight * a + (1 - weight) * b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"cannot fuse logits of shapes {a.shape} and {b.shape}")
    if not 0.0 <= weight <= 1.0:
        raise ValueError(f"fusion weight must be in [0, 1], got {weight}")
    if weight == 1.0:
        return a.copy()
    if weight == 0.0:
        return b.copy()
    return weight * a + (1.0 - weight) * b


def subsample_bank(bank: MemoryBank, ratio: float, seed: int = 0) -> MemoryBank:
    """Random subset holding ``ceil(ratio * N)`` samples (at least one)."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    n = max(1, int(np.ceil(ratio * bank.size)))
    rows = np.sort(np.random.default_rng(seed).choice(bank.size, size=n, replace=False))
    return bank.subset(rows)


def sweep_gamma(bank: MemoryBank, val_feats, val_labels, gammas) -> dict:
    """Validation accuracy (%) for each candidate gamma."""
    s = np.atleast_2d(similarities(val_feats, bank))
    truth = np.asarray(val_labels)
    label_mem = bank.label_mem.astype(np.float64)
    out = {}
    for g in gammas:
        pred = (_shifted_weights(s, float(g)) @ label_mem).argmax(axis=1)
        out[float(g)] = 100.0 * float(np.mean(pred == truth))
    return out


GAMMA_GRID = tuple(float(g) for g in np.logspace(0, 4, 9))


def _shifted_weights(s: np.ndarray, gamma: float) -> np.ndarray:
    # phi(s) / phi(max s) per row: same argmax as phi, but no row underflows to all zeros
    return np.exp(gamma * (s - s.max(axis=-1, keepdims=True)))


def predict_labels(test_feats, bank: MemoryBank) -> np.ndarray:
    """Argmax class of :func:`predict` for a ``(T, C)`` batch, safe for very large gamma."""
    s = np.atleast_2d(similarities(test_feats, bank))
    return (_shifted_weights(s, bank.gamma) @ bank.label_mem.astype(np.float64)).argmax(axis=1)


def loo_accuracy(bank: MemoryBank, gammas=GAMMA_GRID) -> dict:
    """Leave-one-out accuracy (%) of the bank on its own samples for each gamma.

    Exact duplicates of a held-out row still vote; only the row itself is removed.
    """
    f = bank.feat_mem.astype(np.float64)
    s = f @ f.T
    np.fill_diagonal(s, -np.inf)
    truth = bank.labels
    label_mem = bank.label_mem.astype(np.float64)
    out = {}
    for g in gammas:
        pred = (_shifted_weights(s, float(g)) @ label_mem).argmax(axis=1)
        out[float(g)] = 100.0 * float(np.mean(pred == truth))
    return out


def select_gamma(bank: MemoryBank, gammas=GAMMA_GRID) -> float:
    """Gamma with the best leave-one-out accuracy; ties go to the smaller value."""
    if bank.size < 2:
        return bank.gamma
    scores = loo_accuracy(bank, gammas)
    best = max(scores.values())
    return min(g for g, acc in scores.items() if acc == best)
