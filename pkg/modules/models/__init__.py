"""
Models Module

The speed-separation (OFS) and pose/direction (OFPD) networks, their
training targets and their supervised trainers.
"""

from .errors import MissingGroundTruthError, ModelError, TrainingDivergedError
from .targets import (
    TrainingExample,
    build_ofs_targets,
    load_examples,
    match_ground_truth,
    object_event_grid,
    ofs_target,
    sequence_examples,
    split_validation,
)
from .trainer import TrainingCurve
from .ofs import (
    OfsModel,
    OfsOutput,
    init_ofs,
    load_ofs,
    ofs_forward,
    ofs_loss,
    ofs_loss_graph,
    receptive_mask,
    save_ofs,
    spike_rate,
    train_ofs,
)
from .ofpd import (
    LOW_CONFIDENCE_SUPPORT,
    OfpdModel,
    OfpdPrediction,
    angular_error_deg,
    evaluate_ofpd,
    init_ofpd,
    load_ofpd,
    mirror_consistency,
    ofpd_forward,
    ofpd_graph,
    ofpd_loss_graph,
    ofpd_predict,
    save_ofpd,
    train_ofpd,
)

__all__ = [
    "LOW_CONFIDENCE_SUPPORT",
    "MissingGroundTruthError",
    "ModelError",
    "OfpdModel",
    "OfpdPrediction",
    "OfsModel",
    "OfsOutput",
    "TrainingCurve",
    "TrainingDivergedError",
    "TrainingExample",
    "angular_error_deg",
    "build_ofs_targets",
    "evaluate_ofpd",
    "init_ofpd",
    "init_ofs",
    "load_examples",
    "load_ofpd",
    "load_ofs",
    "match_ground_truth",
    "mirror_consistency",
    "object_event_grid",
    "ofpd_forward",
    "ofpd_graph",
    "ofpd_loss_graph",
    "ofpd_predict",
    "ofs_forward",
    "ofs_loss",
    "ofs_loss_graph",
    "ofs_target",
    "receptive_mask",
    "save_ofpd",
    "save_ofs",
    "sequence_examples",
    "spike_rate",
    "split_validation",
    "train_ofpd",
    "train_ofs",
]
