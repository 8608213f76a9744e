"""Anchor generation and the anchor-delta box parameterization."""
from __future__ import annotations

import math

import torch
from torchvision.ops import box_iou as pairwise_iou  # noqa: F401  (re-exported)

DELTA_STDS = (0.1, 0.1, 0.2, 0.2)
_MAX_LOG_RATIO = math.log(1000.0 / 16)


def make_anchors(height: int, width: int, strides=(8, 16), anchor_scale: float = 0.75, octave_base: float = 8.0,
                 dtype=torch.float32):
    """One square anchor per feature location, level-major then row-major.

    Returns ``(anchors M x 4, anchors_per_level)``; anchor side is
    ``octave_base * stride * anchor_scale`` and centers sit at ``(j + 0.5) * stride``.
    """
    boxes, per_level = [], []
    for s in strides:
        if height % s or width % s:
            raise ValueError(f"image size {height}x{width} must be divisible by stride {s}")
        h, w = height // s, width // s
        ys = (torch.arange(h, dtype=dtype) + 0.5) * s
        xs = (torch.arange(w, dtype=dtype) + 0.5) * s
        cy, cx = torch.meshgrid(ys, xs, indexing="ij")
        half = octave_base * s * anchor_scale / 2.0
        level = torch.stack([cx - half, cy - half, cx + half, cy + half], dim=-1).reshape(-1, 4)
        boxes.append(level)
        per_level.append(h * w)
    return torch.cat(boxes), per_level


def box_centers(boxes: torch.Tensor) -> torch.Tensor:
    return torch.stack([(boxes[..., 0] + boxes[..., 2]) / 2, (boxes[..., 1] + boxes[..., 3]) / 2], dim=-1)


def encode_deltas(anchors: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    aw, ah = anchors[..., 2] - anchors[..., 0], anchors[..., 3] - anchors[..., 1]
    ax, ay = anchors[..., 0] + aw / 2, anchors[..., 1] + ah / 2
    tw, th = targets[..., 2] - targets[..., 0], targets[..., 3] - targets[..., 1]
    tx, ty = targets[..., 0] + tw / 2, targets[..., 1] + th / 2
    stds = anchors.new_tensor(DELTA_STDS)
    raw = torch.stack([(tx - ax) / aw, (ty - ay) / ah, torch.log(tw / aw), torch.log(th / ah)], dim=-1)
    return raw / stds


def decode_deltas(anchors: torch.Tensor, deltas: torch.Tensor, max_size: tuple[int, int] | None = None) -> torch.Tensor:
    """Inverse of :func:`encode_deltas`; optionally clip to ``(height, width)``."""
    deltas = deltas * deltas.new_tensor(DELTA_STDS)
    aw, ah = anchors[..., 2] - anchors[..., 0], anchors[..., 3] - anchors[..., 1]
    ax, ay = anchors[..., 0] + aw / 2, anchors[..., 1] + ah / 2
    dw = deltas[..., 2].clamp(-_MAX_LOG_RATIO, _MAX_LOG_RATIO)
    dh = deltas[..., 3].clamp(-_MAX_LOG_RATIO, _MAX_LOG_RATIO)
    cx, cy = ax + deltas[..., 0] * aw, ay + deltas[..., 1] * ah
    w, h = aw * torch.exp(dw), ah * torch.exp(dh)
    boxes = torch.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], dim=-1)
    if max_size is not None:
        height, width = max_size
        boxes = torch.stack(
            [boxes[..., 0].clamp(0, width), boxes[..., 1].clamp(0, height),
             boxes[..., 2].clamp(0, width), boxes[..., 3].clamp(0, height)], dim=-1)
    return boxes
