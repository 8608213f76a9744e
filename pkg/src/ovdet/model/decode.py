from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from torchvision.ops import batched_nms

from ..data.records import BBox
from .boxes import decode_deltas


@dataclass(frozen=True)
class Detection:
    box: BBox
    concept: str
    score: float


def decode_predictions(
    S: torch.Tensor,
    box_deltas: torch.Tensor,
    anchors: torch.Tensor,
    centerness_logits: torch.Tensor,
    concept_names: Sequence[str],
    score_thresh: float = 0.05,
    nms_iou: float = 0.5,
    image_size: tuple[int, int] | None = None,
    pre_nms_topk: int = 1000,
    max_detections: int = 100,
) -> list[Detection]:
    """Dense-head decoding for one image.

    score = sigmoid(S[n, m]) * sigmoid(centerness[m]); boxes come from the
    anchor deltas (clipped to ``image_size`` = (height, width)); class-wise
    greedy NMS at ``nms_iou``.
    """
    if S.shape != (len(concept_names), anchors.shape[0]):
        raise ValueError(f"S has shape {tuple(S.shape)}, expected ({len(concept_names)}, {anchors.shape[0]})")
    with torch.no_grad():
        scores = torch.sigmoid(S) * torch.sigmoid(centerness_logits)[None, :]
        keep = scores > score_thresh
        if not bool(keep.any()):
            return []
        concept_idx, anchor_idx = keep.nonzero(as_tuple=True)
        flat = scores[concept_idx, anchor_idx]
        if flat.numel() > pre_nms_topk:
            top = flat.topk(pre_nms_topk).indices
            concept_idx, anchor_idx, flat = concept_idx[top], anchor_idx[top], flat[top]
        boxes = decode_deltas(anchors[anchor_idx], box_deltas[anchor_idx], image_size)
        valid = (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])
        boxes, flat, concept_idx = boxes[valid], flat[valid], concept_idx[valid]
        kept = batched_nms(boxes.float(), flat.float(), concept_idx, nms_iou)[:max_detections]
        return [
            Detection(BBox.from_list(boxes[i].tolist()), concept_names[int(concept_idx[i])], float(flat[i]))
            for i in kept.tolist()
        ]
