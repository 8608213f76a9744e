"""ATSS anchor assignment producing the concept-by-anchor alignment matrix."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import torch

from ..data.records import BBox
from .boxes import box_centers, pairwise_iou

log = logging.getLogger(__name__)


@dataclass
class AssignmentResult:
    G: torch.Tensor  # N x M, 0/1
    positive_mask: torch.Tensor  # M, bool
    assigned_object: torch.Tensor  # M, object index or -1
    reg_targets: torch.Tensor  # M x 4, target box where positive, 0 elsewhere
    centerness_targets: torch.Tensor  # M, in [0, 1] where positive

    @property
    def num_positives(self) -> int:
        return int(self.positive_mask.sum())


def centerness_target(points: torch.Tensor, boxes: torch.Tensor) -> torch.Tensor:
    """sqrt(min(l, r) / max(l, r) * min(t, b) / max(t, b)) from points to box sides."""
    l = points[:, 0] - boxes[:, 0]
    t = points[:, 1] - boxes[:, 1]
    r = boxes[:, 2] - points[:, 0]
    b = boxes[:, 3] - points[:, 1]
    lr = torch.minimum(l, r) / torch.maximum(l, r)
    tb = torch.minimum(t, b) / torch.maximum(t, b)
    return torch.sqrt((lr * tb).clamp(min=0))


def atss_assign(
    anchors: torch.Tensor,
    anchors_per_level: Sequence[int],
    objects: Sequence[tuple[BBox, int]],
    N: int,
    topk: int = 9,
) -> AssignmentResult:
    """Adaptive training sample selection.

    Per object: the ``topk`` anchors per level whose centers are closest to the
    object center become candidates (ties by anchor index). The IoU threshold is
    mean + std (sample std) of the candidate IoUs. Candidates at or above the
    threshold whose centers lie strictly inside the box are positives. An anchor
    claimed by several objects keeps the one with the highest IoU (lowest
    object index on ties).
    """
    M = anchors.shape[0]
    if sum(anchors_per_level) != M:
        raise ValueError("anchors_per_level does not sum to the anchor count")
    dtype, device = anchors.dtype, anchors.device
    G = torch.zeros((N, M), dtype=dtype, device=device)
    assigned = torch.full((M,), -1, dtype=torch.long, device=device)
    reg = torch.zeros((M, 4), dtype=dtype, device=device)
    ctr = torch.zeros(M, dtype=dtype, device=device)
    if not objects:
        return AssignmentResult(G, assigned >= 0, assigned, reg, ctr)

    gt = torch.tensor([b.as_list() for b, _ in objects], dtype=dtype, device=device)
    concept = torch.tensor([c for _, c in objects], dtype=torch.long, device=device)
    if (concept < 0).any() or (concept >= N).any():
        raise ValueError("object concept index out of range")
    K = gt.shape[0]
    ious = pairwise_iou(gt, anchors)  # K x M
    a_ctr = box_centers(anchors)
    # squared distances, computed directly so grid ties stay exact
    diff = box_centers(gt)[:, None, :] - a_ctr[None, :, :]
    dist = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1]  # K x M

    candidates = []
    start = 0
    for n in anchors_per_level:
        k = min(topk, n)
        order = torch.argsort(dist[:, start:start + n], dim=1, stable=True)[:, :k]
        candidates.append(order + start)
        start += n
    cand = torch.cat(candidates, dim=1)  # K x C
    cand_iou = torch.gather(ious, 1, cand)
    if cand.shape[1] > 1:
        thr = cand_iou.mean(dim=1) + cand_iou.std(dim=1, unbiased=True)
    else:
        thr = cand_iou[:, 0]
    is_pos = cand_iou >= thr[:, None]

    cx = a_ctr[cand, 0]
    cy = a_ctr[cand, 1]
    inside = (cx > gt[:, None, 0]) & (cx < gt[:, None, 2]) & (cy > gt[:, None, 1]) & (cy < gt[:, None, 3])
    is_pos &= inside

    masked = torch.full((K, M), -1.0, dtype=dtype, device=device)
    rows = torch.arange(K, device=device)[:, None].expand_as(cand)
    masked[rows[is_pos], cand[is_pos]] = ious[rows[is_pos], cand[is_pos]]
    best_iou, best_obj = masked.max(dim=0)  # first maximal index on ties
    pos = best_iou >= 0

    assigned[pos] = best_obj[pos]
    G[concept[best_obj[pos]], pos.nonzero(as_tuple=True)[0]] = 1.0
    reg[pos] = gt[best_obj[pos]]
    ctr[pos] = centerness_target(a_ctr[pos], reg[pos])

    empty = [i for i in range(K) if not bool((assigned == i).any())]
    if empty:
        log.debug("objects without positive anchors: %s", empty)
    return AssignmentResult(G, pos, assigned, reg, ctr)
