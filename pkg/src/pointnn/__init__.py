"""Training-free point cloud classification and part segmentation with a
non-parametric trigonometric encoder and a point-memory bank."""

from .datasets import (
    PRIMITIVES,
    ClassificationReport,
    FewShotEpisode,
    LabeledDataset,
    accuracy,
    encode_dataset,
    evaluate_classification,
    evaluate_features,
    few_shot_accuracies,
    sample_episode,
    synth_primitives,
)
from .encoder import (
    EncoderConfig,
    NeighborClampWarning,
    StagePointSet,
    encode_batch,
    encode_global,
    encode_hierarchy,
    encode_stage,
    expand_features,
    pool_neighborhood,
    raw_point_embed,
    weigh_neighbors,
)
from .encoding import PosEParams, pos_e, pos_e_batch
from .geometry import (
    ball_query,
    farthest_point_sample,
    knn,
    normalize_cloud,
    normalize_neighborhood,
)
from .memory import (
    BankError,
    MemoryBank,
    build_bank,
    fuse_logits,
    knn_classify,
    phi,
    predict,
    predict_labels,
    predict_topk,
    select_gamma,
    softmax,
    subsample_bank,
)
from .segmentation import (
    SHAPENET_PARTS,
    PartBank,
    SegEncoderConfig,
    build_part_bank,
    encode_pointwise,
    instance_miou,
    propagate,
    segment,
)

__version__ = "0.1.0"
