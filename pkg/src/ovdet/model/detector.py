"""The dual-encoder detector, its flat config and checkpoint archive."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn as nn

from ..data.tokenizer import TokenSeq, Tokenizer
from .encoders import ImageEncoder, ImageEncoderOutput, TextEncoder, alignment_scores, encode_concepts


@dataclass
class ModelConfig:
    d_model: int = 64
    strides: tuple[int, ...] = (8, 16)
    anchor_scale: float = 0.75
    topk_atss: int = 9
    text_layers: int = 2
    text_heads: int = 4
    vocab_size: int = 0  # 0: take it from the tokenizer
    max_tokens: int = 48
    width: int = 32
    prior_prob: float = 0.01
    normalize: bool = False

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in obj.items() if k in names}
        if "strides" in kwargs:
            kwargs["strides"] = tuple(int(s) for s in kwargs["strides"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["strides"] = list(self.strides)
        return out


class Detector(nn.Module):
    def __init__(self, config: ModelConfig, tokenizer: Tokenizer):
        super().__init__()
        if config.vocab_size == 0:
            config.vocab_size = tokenizer.vocab_size
        if config.vocab_size < tokenizer.vocab_size:
            raise ValueError(f"vocab_size {config.vocab_size} smaller than tokenizer's {tokenizer.vocab_size}")
        self.config = config
        self.tokenizer = tokenizer
        self.image_encoder = ImageEncoder(config.d_model, config.strides, config.anchor_scale, config.width,
                                          prior_prob=config.prior_prob, normalize=config.normalize)
        self.text_encoder = TextEncoder(config.vocab_size, config.d_model, config.text_layers, config.text_heads,
                                        config.max_tokens, normalize=config.normalize)

    def visual_parameters(self):
        return list(self.image_encoder.parameters())

    def text_parameters(self):
        return list(self.text_encoder.parameters())

    def encode_images(self, images: torch.Tensor) -> ImageEncoderOutput:
        return self.image_encoder(images)

    def encode_texts(self, texts: Sequence[str]) -> torch.Tensor:
        return encode_concepts(self.text_encoder, self.tokenizer.tokenize_many(texts))

    def encode_tokens(self, seqs: Sequence[TokenSeq]) -> torch.Tensor:
        return encode_concepts(self.text_encoder, seqs)

    def scores(self, images: torch.Tensor, texts: Sequence[str]):
        out = self.encode_images(images)
        return alignment_scores(self.encode_texts(texts), out.region_features), out


def images_to_tensor(images: Sequence[np.ndarray]) -> torch.Tensor:
    """Stack H x W x C float arrays into a B x C x H x W tensor."""
    return torch.from_numpy(np.stack([np.asarray(im, dtype=np.float32) for im in images])).permute(0, 3, 1, 2).contiguous()


def encode_image(model: Detector, image: np.ndarray) -> ImageEncoderOutput:
    """Single-image convenience wrapper; batch dimension is squeezed away."""
    out = model.encode_images(images_to_tensor([image]))
    return ImageEncoderOutput(out.region_features[0], out.box_deltas[0], out.centerness_logits[0],
                              out.anchors, out.anchors_per_level)


@dataclass
class Checkpoint:
    model: Detector
    metadata: dict = field(default_factory=dict)
    optimizer_state: Optional[dict] = None


def save_checkpoint(path, model: Detector, metadata: dict | None = None, optimizer_state: dict | None = None) -> None:
    meta = dict(metadata or {})
    meta["model_config"] = model.config.to_dict()
    meta["tokenizer"] = model.tokenizer.state()
    payload = {
        "params": {k: v.detach().cpu() for k, v in model.state_dict().items()},
        "metadata_json": json.dumps(meta, sort_keys=True),
        "optimizer": optimizer_state,
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path) -> Checkpoint:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    meta = json.loads(payload["metadata_json"])
    model = Detector(ModelConfig.from_dict(meta["model_config"]), Tokenizer.from_state(meta["tokenizer"]))
    model.load_state_dict(payload["params"])
    model.eval()
    return Checkpoint(model, meta, payload.get("optimizer"))
