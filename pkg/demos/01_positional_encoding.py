# Trigonometric positional encoding and what the dot product of two codes measures.
import numpy as np

from pointnn import PosEParams, pos_e, pos_e_batch

params = PosEParams(dim=72, alpha=1000, beta=100)

# the origin encodes to alternating sin=0, cos=1
print(pos_e([0, 0, 0], params)[:6])

# every code has the same squared norm, dim / 2
pts = np.random.default_rng(0).uniform(-1, 1, size=(5, 3))
codes = pos_e_batch(pts, params)
print((codes * codes).sum(axis=1))

# the dot product of two codes only depends on their offset,
# so shifting both points leaves it unchanged
a, b = pts[0], pts[1]
shift = np.array([0.3, -0.2, 0.1])
print(pos_e(a, params) @ pos_e(b, params))
print(pos_e(a + shift, params) @ pos_e(b + shift, params))

# and it peaks when the offset is zero
offsets = np.linspace(-0.05, 0.05, 11)
sims = [pos_e([0, 0, 0], params) @ pos_e([d, 0, 0], params) for d in offsets]
for d, s in zip(offsets, sims):
    print(f"{d:+.3f}  {s:7.3f}")
