# Variations on bank matching: top-k weights, hard k-NN votes, smaller banks, fusion.
import warnings

import numpy as np

from pointnn import (
    NeighborClampWarning,
    build_bank,
    fuse_logits,
    knn_classify,
    predict,
    predict_labels,
    predict_topk,
    softmax,
    subsample_bank,
    synth_primitives,
)
from pointnn.datasets import encode_dataset

# 512-point clouds leave 64 points for the last stage, fewer than 90 neighbors
warnings.simplefilter("ignore", NeighborClampWarning)

train = synth_primitives(per_class=30, seed=1)
test = synth_primitives(per_class=10, seed=1, split="test")
tr, te = encode_dataset(train), encode_dataset(test)
bank = build_bank(tr, train.labels, train.num_classes, gamma=1000, class_names=train.class_names)

def acc(pred):
    return 100 * np.mean(np.asarray(pred) == test.labels)

print("full bank     ", acc(predict_labels(te, bank)))
for k in (1, 5, 20):
    print(f"top-{k:<3d}       ", acc([predict_topk(f, bank, k).argmax() for f in te]))
    print(f"{k}-NN vote     ", acc([knn_classify(f, bank, k) for f in te]))

# with every sample voting, hard k-NN returns the biggest class of the bank;
# drop some rows so one class outnumbers the rest
rows = np.concatenate([np.flatnonzero(train.labels == c)[: 30 - 3 * c] for c in range(train.num_classes)])
lopsided = bank.subset(rows)
print("N-NN vote     ", acc([knn_classify(f, lopsided, lopsided.size) for f in te]))
print("same bank     ", acc(predict_labels(te, lopsided)))

for ratio in (0.1, 0.3, 1.0):
    print(f"{ratio:.0%} bank     ", acc(predict_labels(te, subsample_bank(bank, ratio, seed=0))))

# fusing with another model's logits: here a noisy stand-in that knows the answer
rng = np.random.default_rng(0)
ours = softmax(predict(te, bank.with_gamma(100)))
other = softmax(rng.normal(size=ours.shape) + 2 * np.eye(ours.shape[1])[test.labels])
for lam in (0.0, 0.5, 1.0):
    fused = np.stack([fuse_logits(a, b, lam) for a, b in zip(ours, other)])
    print(f"lambda {lam:.1f}    ", acc(fused.argmax(1)))
