from .assign import AssignmentResult, atss_assign, centerness_target
from .boxes import decode_deltas, encode_deltas, make_anchors, pairwise_iou
from .decode import Detection, decode_predictions
from .detector import (
    Checkpoint,
    Detector,
    ModelConfig,
    encode_image,
    images_to_tensor,
    load_checkpoint,
    save_checkpoint,
)
from .encoders import ImageEncoder, ImageEncoderOutput, TextEncoder, alignment_scores, encode_concepts

__all__ = [
    "AssignmentResult",
    "Checkpoint",
    "Detection",
    "Detector",
    "ImageEncoder",
    "ImageEncoderOutput",
    "ModelConfig",
    "TextEncoder",
    "alignment_scores",
    "atss_assign",
    "centerness_target",
    "decode_deltas",
    "decode_predictions",
    "encode_concepts",
    "encode_deltas",
    "encode_image",
    "images_to_tensor",
    "load_checkpoint",
    "make_anchors",
    "pairwise_iou",
    "save_checkpoint",
]
