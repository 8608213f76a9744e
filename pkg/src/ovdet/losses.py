"""Alignment (sigmoid focal), centerness (soft BCE) and GIoU regression losses."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import torch
import torch.nn.functional as F

from .data.records import BBox

NON_DETECTION_KINDS = frozenset({"grounding", "imagetext"})


@dataclass
class LossBreakdown:
    L_ALI: torch.Tensor
    L_CEN: torch.Tensor
    L_REG: torch.Tensor
    total: torch.Tensor
    num_positives: int

    def as_dict(self) -> dict:
        return {
            "L_ALI": self.L_ALI.item(),
            "L_CEN": self.L_CEN.item(),
            "L_REG": self.L_REG.item(),
            "total": self.total.item(),
            "num_positives": self.num_positives,
        }


def sigmoid_focal_alignment_loss(S: torch.Tensor, G: torch.Tensor, gamma: float = 2.0, alpha_f: float = 0.25,
                                 normalizer: float = 1.0) -> torch.Tensor:
    """Sum over all entries of -a_t (1 - p_t)^gamma log p_t with p = sigmoid(S), over ``normalizer``.

    ``alpha_f < 0`` disables the class-balance weight.
    """
    if S.shape != G.shape:
        raise ValueError(f"S {tuple(S.shape)} and G {tuple(G.shape)} differ in shape")
    if torch.isnan(S).any():
        raise ValueError("NaN in alignment scores")
    if normalizer < 1:
        raise ValueError("normalizer must be >= 1")
    G = G.to(S.dtype)
    p = torch.sigmoid(S)
    ce = F.binary_cross_entropy_with_logits(S, G, reduction="none")
    p_t = p * G + (1 - p) * (1 - G)
    loss = ce * (1 - p_t) ** gamma
    if alpha_f >= 0:
        loss = loss * (alpha_f * G + (1 - alpha_f) * (1 - G))
    return loss.sum() / normalizer


def centerness_loss(logits: torch.Tensor, targets: torch.Tensor, positive_mask: torch.Tensor) -> torch.Tensor:
    """Soft-target binary cross-entropy over positive anchors, averaged over their count."""
    n = int(positive_mask.sum())
    if n == 0:
        return logits.sum() * 0.0
    return F.binary_cross_entropy_with_logits(logits[positive_mask], targets[positive_mask].to(logits.dtype),
                                              reduction="sum") / n


def giou(a: Union[BBox, Sequence[float]], b: Union[BBox, Sequence[float]]) -> float:
    """Generalized IoU of two boxes, in [-1, 1]."""
    a = a if isinstance(a, BBox) else BBox.from_list(a)
    b = b if isinstance(b, BBox) else BBox.from_list(b)
    iw = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    ih = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    inter = iw * ih
    union = a.area + b.area - inter
    hull = (max(a.x2, b.x2) - min(a.x1, b.x1)) * (max(a.y2, b.y2) - min(a.y1, b.y1))
    return inter / union - (hull - union) / hull


def giou_tensor(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Row-wise GIoU of K x 4 box tensors."""
    area_p = (pred[:, 2] - pred[:, 0]) * (pred[:, 3] - pred[:, 1])
    area_t = (target[:, 2] - target[:, 0]) * (target[:, 3] - target[:, 1])
    lt = torch.maximum(pred[:, :2], target[:, :2])
    rb = torch.minimum(pred[:, 2:], target[:, 2:])
    wh = (rb - lt).clamp(min=0)
    inter = wh[:, 0] * wh[:, 1]
    union = area_p + area_t - inter
    hull_wh = torch.maximum(pred[:, 2:], target[:, 2:]) - torch.minimum(pred[:, :2], target[:, :2])
    hull = hull_wh[:, 0] * hull_wh[:, 1]
    return inter / union - (hull - union) / hull


def giou_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean of 1 - GIoU over rows; 0 for no rows."""
    if pred.shape[0] == 0:
        return pred.sum() * 0.0
    return (1.0 - giou_tensor(pred, target)).mean()


def total_loss(
    S: torch.Tensor,
    G: torch.Tensor,
    centerness_logits: torch.Tensor,
    centerness_targets: torch.Tensor,
    positive_mask: torch.Tensor,
    pred_boxes: torch.Tensor,
    target_boxes: torch.Tensor,
    kind: Union[str, Sequence[str]] = "detection",
    alpha: float = 1.0,
    beta: float = 1.0,
    gamma: float = 2.0,
    alpha_focal: float = 0.25,
) -> LossBreakdown:
    """L_ALI + alpha * L_CEN + beta * L_REG, batched or single-image.

    Shapes: S, G (B x) N x M; centerness and positive_mask (B x) M; boxes (B x) M x 4.
    Regression is dropped for grounding and image-text samples.
    """
    if S.dim() == 2:
        S, G = S[None], G[None]
        centerness_logits, centerness_targets = centerness_logits[None], centerness_targets[None]
        positive_mask, pred_boxes, target_boxes = positive_mask[None], pred_boxes[None], target_boxes[None]
    B = S.shape[0]
    kinds = [kind] * B if isinstance(kind, str) else list(kind)
    if len(kinds) != B:
        raise ValueError("one kind per batch element required")
    positive_mask = positive_mask.bool()
    num_pos = int(positive_mask.sum())

    l_ali = sigmoid_focal_alignment_loss(S, G, gamma, alpha_f=alpha_focal, normalizer=max(1, num_pos))
    l_cen = centerness_loss(centerness_logits, centerness_targets, positive_mask)
    reg_rows = torch.tensor([k not in NON_DETECTION_KINDS for k in kinds], device=S.device)
    reg_mask = positive_mask & reg_rows[:, None]
    l_reg = giou_loss(pred_boxes[reg_mask], target_boxes[reg_mask])
    if not bool(reg_rows.any()):
        l_reg = l_reg * 0.0
    total = l_ali + alpha * l_cen + beta * l_reg
    return LossBreakdown(l_ali, l_cen, l_reg, total, num_pos)
