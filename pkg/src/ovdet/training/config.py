"""Flat training configuration (JSON file, overridable from the command line)."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from ..model import ModelConfig

REFERENCE_BATCH_SIZE = 128
REFERENCE_LR_VISUAL = 2.8e-4
REFERENCE_LR_TEXT = 2.8e-5


@dataclass
class TrainConfig:
    # data
    detection: Optional[str] = None
    grounding: Optional[str] = None
    imagetext: Optional[str] = None
    pseudo_labels: Optional[str] = None
    proposals: Optional[str] = None
    scorer: str = "stub"
    dictionary: Optional[str] = None
    holdout_concepts: list = field(default_factory=list)
    max_records: Optional[int] = None

    # paralleled concept input
    N: int = 16
    enrich: bool = True
    neg_sample: bool = True
    label_completion: bool = True
    detection_negatives: str = "label_space"  # or "dictionary"
    provider: str = "stub"

    # pseudo-labeling applied in-process when imagetext records come without labels
    obj_thresh: float = 0.3
    min_area: float = 6000.0
    score_thresh: float = 0.24

    # optimization
    epochs: int = 20
    batch_size: int = 8
    lr_visual: Optional[float] = None
    lr_text: Optional[float] = None
    lr_scale: float = 16.0  # the reference rates are tuned for pre-trained backbones
    milestones: Optional[list] = None
    warmup_steps: int = 100  # linear ramp; the first Adam steps are otherwise too large from scratch
    warmup_ratio: float = 0.001
    weight_decay: float = 1e-4
    grad_clip: float = 10.0
    hflip: bool = True
    seed: int = 0

    # loss
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 2.0
    alpha_focal: float = 0.25

    # model (flat keys)
    d_model: int = 64
    strides: list = field(default_factory=lambda: [8, 16])
    anchor_scale: float = 0.75
    topk_atss: int = 9
    text_layers: int = 2
    vocab_size: int = 0
    max_tokens: int = 48
    normalize: bool = False

    # output
    out_dir: str = "runs/default"
    resume: Optional[str] = None

    def __post_init__(self):
        if self.milestones is None:
            self.milestones = default_milestones(self.epochs)
        self.milestones = [int(m) for m in self.milestones]
        if any(b <= a for a, b in zip(self.milestones, self.milestones[1:])):
            raise ValueError(f"milestones must be strictly increasing: {self.milestones}")
        if self.warmup_steps < 0 or not 0 < self.warmup_ratio <= 1:
            raise ValueError("warmup_steps must be >= 0 and warmup_ratio in (0, 1]")
        if self.detection_negatives not in ("label_space", "dictionary"):
            raise ValueError("detection_negatives must be 'label_space' or 'dictionary'")
        if self.lr_visual is None or self.lr_text is None:
            visual, text = default_learning_rates(self.batch_size, self.lr_scale)
            self.lr_visual = visual if self.lr_visual is None else self.lr_visual
            self.lr_text = text if self.lr_text is None else self.lr_text

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_file(cls, path, **overrides) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        obj.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        return asdict(self)

    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.to_dict())


def default_milestones(epochs: int) -> list[int]:
    """Decay points at 2/3 and 11/12 of training, i.e. epochs 8 and 11 of 12."""
    points = sorted({max(1, round(epochs * 2 / 3)), max(1, round(epochs * 11 / 12))})
    return [p for p in points if p < epochs] or ([epochs - 1] if epochs > 1 else [])


def default_learning_rates(batch_size: int, lr_scale: float = 16.0) -> tuple[float, float]:
    """Reference rates scaled linearly by batch size, times ``lr_scale``; text keeps a 10x lower rate."""
    ratio = batch_size / REFERENCE_BATCH_SIZE
    return REFERENCE_LR_VISUAL * ratio * lr_scale, REFERENCE_LR_TEXT * ratio * lr_scale
