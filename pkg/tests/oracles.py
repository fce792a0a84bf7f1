"""Slow, loop-based reference implementations used only by the tests.

They share no code with the package: plain Python floats and the math module.
"""

import math
from collections import defaultdict


def fps(points, m):
    pts = [tuple(map(float, p)) for p in points]
    n = len(pts)
    centroid = tuple(math.fsum(p[a] for p in pts) / n for a in range(3))
    first = min(range(n), key=lambda i: (-math.dist(pts[i], centroid), pts[i], i))
    chosen = [first]
    while len(chosen) < m:
        best = None
        for i in range(n):
            if i in chosen:
                continue
            d = min(math.dist(pts[i], pts[j]) for j in chosen)
            key = (-d, pts[i], i)
            if best is None or key < best[0]:
                best = (key, i)
        chosen.append(best[1])
    return chosen


def knn(queries, reference, k):
    ref = [tuple(map(float, r)) for r in reference]
    out = []
    for q in queries:
        q = tuple(map(float, q))
        out.append(sorted(range(len(ref)), key=lambda i: (math.dist(q, ref[i]), i))[:k])
    return out


def pose(p, dim, alpha, beta):
    out = []
    for a in p:
        for m in range(dim // 6):
            w = alpha / beta ** (6 * m / dim)
            out += [math.sin(w * a), math.cos(w * a)]
    return out


def pool(rows, mode):
    cols = list(zip(*rows))
    if mode == "max":
        return [max(c) for c in cols]
    if mode == "avg":
        return [math.fsum(c) / len(c) for c in cols]
    return [max(c) + math.fsum(c) / len(c) for c in cols]


def _cos(a, b):
    dot = math.fsum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(math.fsum(x * x for x in a)) * math.sqrt(math.fsum(y * y for y in b)))


def bank_logits(test, feats, labels, num_classes, gamma, top_k=None):
    sims = [_cos(test, f) for f in feats]
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
    keep = set(order if top_k is None else order[:top_k])
    logits = [0.0] * num_classes
    for i, (s, y) in enumerate(zip(sims, labels)):
        if i in keep:
            logits[y] += math.exp(-gamma * (1 - s))
    return logits


def knn_vote(test, feats, labels, k):
    sims = [_cos(test, f) for f in feats]
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))[:k]
    counts = defaultdict(int)
    for i in order:
        counts[labels[i]] += 1
    top = max(counts.values())
    for i in order:
        if counts[labels[i]] == top:
            return labels[i]


def propagate(coarse_xyz, coarse_feats, fine_xyz, eps=1e-8):
    out = []
    for p in fine_xyz:
        near = knn([p], coarse_xyz, min(3, len(coarse_xyz)))[0]
        w = [1.0 / (math.dist(tuple(p), tuple(coarse_xyz[i])) + eps) for i in near]
        total = math.fsum(w)
        row = [0.0] * len(coarse_feats[0])
        for wi, i in zip(w, near):
            for c, v in enumerate(coarse_feats[i]):
                row[c] += wi / total * v
        out.append(row)
    return out


def group_means(feats, labels):
    groups = defaultdict(list)
    for f, y in zip(feats, labels):
        groups[int(y)].append(f)
    return {y: [math.fsum(col) / len(rows) for col in zip(*rows)] for y, rows in groups.items()}
