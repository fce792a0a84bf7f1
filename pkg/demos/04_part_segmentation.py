# Part segmentation by matching point features against per-part prototypes.
import warnings

import numpy as np

from pointnn import NeighborClampWarning, SegEncoderConfig, build_part_bank, instance_miou, normalize_cloud, segment
from pointnn.datasets import sample_primitive

rng = np.random.default_rng(0)
# deeper stages have fewer than 128 points left; k shrinks to fit
warnings.simplefilter("ignore", NeighborClampWarning)

def lamp(n=512):
    # a cone shade (part 0) sitting on a thin cylinder pole (part 1)
    shade = sample_primitive("cone", n // 2, rng) * [0.6, 0.6, 0.3] + [0, 0, 0.9]
    pole = sample_primitive("cylinder", n // 2, rng) * [0.08, 0.08, 0.6]
    pts = np.concatenate([shade, pole]) + rng.normal(scale=0.005, size=(n, 3))
    return normalize_cloud(pts), np.repeat([0, 1], n // 2)

cfg = SegEncoderConfig()  # 5 stages, 144 initial channels, 128 neighbors

# matching an object against its own part prototypes recovers its labels
cloud, truth = lamp()
own = build_part_bank([cloud], [truth], cfg, num_parts=2)
pred = segment(cloud, own, cfg, category="lamp", part_ranges={"lamp": (0, 1)})
print("self-recall accuracy", 100 * np.mean(pred == truth))

# a bank from other lamps; deep-stage features carry most of the norm and vary
# from cloud to cloud, so transfer to an unseen object is much weaker
train = [lamp() for _ in range(4)]
bank = build_part_bank([c for c, _ in train], [l for _, l in train], cfg, gamma=100,
                       num_parts=2, part_names=["shade", "pole"])
print(bank.size, "part prototypes of dim", bank.dim)

cloud, truth = lamp()
pred = segment(cloud, bank, cfg, category="lamp", part_ranges={"lamp": (0, 1)})
print("point accuracy", 100 * np.mean(pred == truth))
print("instance mIoU ", instance_miou(pred, truth, [0, 1]))
