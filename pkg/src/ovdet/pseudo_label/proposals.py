"""Region proposals: filtering, file IO and a sliding-window stub generator."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import torch
from scipy import ndimage
from torchvision.ops import box_iou, nms

from ..data.records import BBox, read_jsonl, write_jsonl

OBJECTNESS_THRESHOLD = 0.3
MIN_AREA = 6000.0


@dataclass(frozen=True)
class Proposal:
    box: BBox
    objectness: float

    def __post_init__(self):
        if not math.isfinite(self.objectness):
            raise ValueError("objectness must be finite")


def filter_proposals(proposals: Iterable[Proposal], objectness_threshold: float = OBJECTNESS_THRESHOLD,
                     min_area: float = MIN_AREA) -> list[Proposal]:
    """Keep proposals with objectness >= threshold and area >= min_area, in input order."""
    if objectness_threshold < 0 or min_area < 0:
        raise ValueError("thresholds must be >= 0")
    return [p for p in proposals if p.objectness >= objectness_threshold and p.box.area >= min_area]


def load_proposals(path) -> dict[str, list[Proposal]]:
    by_image: dict[str, list[Proposal]] = defaultdict(list)
    for row in read_jsonl(path):
        by_image[str(row["image_id"])].append(Proposal(BBox.from_list(row["box"]), float(row["objectness"])))
    return dict(by_image)


def save_proposals(path, proposals: dict[str, list[Proposal]]) -> None:
    write_jsonl(path, (
        {"image_id": image_id, "box": p.box.as_list(), "objectness": p.objectness}
        for image_id, props in proposals.items() for p in props
    ))


def sliding_window_proposals(image: np.ndarray, sizes=tuple(range(16, 73, 4)), step: int = 2, top_k: int = 20,
                             fg_threshold: float = 0.3, nms_iou: float = 0.3) -> list[Proposal]:
    """Class-agnostic stub RPN.

    Square windows are scored by the cube of their best IoU with the bounding
    box of a connected foreground blob, so objectness 0.3 means IoU ~0.67.
    Survivors are suppressed with NMS.
    """
    fg = np.asarray(image).max(axis=-1) > fg_threshold
    labeled, _ = ndimage.label(fg)
    blobs = [[sl[1].start, sl[0].start, sl[1].stop, sl[0].stop] for sl in ndimage.find_objects(labeled)]
    if not blobs:
        return []
    h, w = fg.shape
    windows = []
    for s in sizes:
        if s > min(h, w):
            continue
        ys, xs = np.mgrid[0:h - s + 1:step, 0:w - s + 1:step]
        x1, y1 = xs.ravel(), ys.ravel()
        windows.append(np.stack([x1, y1, x1 + s, y1 + s], axis=1))
    if not windows:
        return []
    boxes_t = torch.from_numpy(np.concatenate(windows).astype(np.float32))
    scores_t = box_iou(boxes_t, torch.tensor(blobs, dtype=torch.float32)).max(dim=1).values ** 3
    live = scores_t > 0
    boxes_t, scores_t = boxes_t[live], scores_t[live]
    keep = nms(boxes_t, scores_t, nms_iou)[:top_k]
    return [Proposal(BBox.from_list(boxes_t[i].tolist()), round(float(scores_t[i]), 6)) for i in keep.tolist()]
