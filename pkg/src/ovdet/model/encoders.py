"""Image and text encoders of the dual-encoder detector."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..data.tokenizer import EOS_ID, PAD_ID, TokenSeq
from .boxes import make_anchors


def _prior_logit(prior_prob: float) -> float:
    return -math.log((1 - prior_prob) / prior_prob)


@dataclass
class ImageEncoderOutput:
    region_features: torch.Tensor  # B x M x D
    box_deltas: torch.Tensor  # B x M x 4
    centerness_logits: torch.Tensor  # B x M
    anchors: torch.Tensor  # M x 4
    anchors_per_level: list[int]

    @property
    def num_regions(self) -> int:
        return self.anchors.shape[0]


def _conv_gn(cin: int, cout: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False),
        nn.GroupNorm(min(8, cout), cout),
        nn.ReLU(inplace=True),
    )


class ImageEncoder(nn.Module):
    """Strided conv backbone, top-down pyramid over ``strides``, shared dense head.

    The last feature channel is the alignment-bias channel: its bias starts at
    the focal prior logit so initial scores sit near ``prior_prob``, and the
    text side emits ~1 in the same channel.
    """

    def __init__(self, d_model: int = 64, strides: Sequence[int] = (8, 16), anchor_scale: float = 0.75,
                 width: int = 32, in_channels: int = 3, prior_prob: float = 0.01, normalize: bool = False):
        super().__init__()
        self.strides = tuple(int(s) for s in strides)
        if sorted(self.strides) != list(self.strides) or any(s & (s - 1) for s in self.strides):
            raise ValueError(f"strides must be increasing powers of two: {self.strides}")
        self.anchor_scale = anchor_scale
        self.d_model = d_model
        self.normalize = normalize

        depth = int(math.log2(self.strides[-1]))
        chans = [min(width * 2 ** max(i - 1, 0), 128) for i in range(depth)]
        layers, cin = [], in_channels
        for c in chans:
            layers.append(_conv_gn(cin, c, stride=2))
            cin = c
        self.backbone = nn.ModuleList(layers)
        self._level_of_stage = {int(math.log2(s)) - 1: i for i, s in enumerate(self.strides)}
        fpn = width * 2
        self.lateral = nn.ModuleList(nn.Conv2d(chans[int(math.log2(s)) - 1], fpn, 1) for s in self.strides)
        self.cls_tower = nn.Sequential(_conv_gn(fpn, fpn), _conv_gn(fpn, fpn))
        self.reg_tower = nn.Sequential(_conv_gn(fpn, fpn), _conv_gn(fpn, fpn))
        self.feature_out = nn.Conv2d(fpn, d_model, 3, padding=1)
        self.delta_out = nn.Conv2d(fpn, 4, 3, padding=1)
        self.centerness_out = nn.Conv2d(fpn, 1, 3, padding=1)
        self.level_scales = nn.Parameter(torch.ones(len(self.strides)))

        for m in (self.feature_out, self.delta_out, self.centerness_out):
            nn.init.normal_(m.weight, std=0.01)
            nn.init.zeros_(m.bias)
        with torch.no_grad():
            self.feature_out.bias[-1] = _prior_logit(prior_prob)

    def forward(self, images: torch.Tensor) -> ImageEncoderOutput:
        if images.dim() != 4:
            raise ValueError("expected a B x C x H x W batch")
        h, w = images.shape[-2:]
        coarsest = self.strides[-1]
        if h % coarsest or w % coarsest:
            raise ValueError(f"image height and width must be divisible by stride {coarsest}, got {h}x{w}")
        feats = {}
        x = images
        for i, layer in enumerate(self.backbone):
            x = layer(x)
            if i in self._level_of_stage:
                feats[self._level_of_stage[i]] = x
        pyramid = [None] * len(self.strides)
        top = None
        for lvl in reversed(range(len(self.strides))):
            p = self.lateral[lvl](feats[lvl])
            if top is not None:
                p = p + F.interpolate(top, size=p.shape[-2:], mode="nearest")
            pyramid[lvl] = top = p

        region, deltas, ctr = [], [], []
        for lvl, p in enumerate(pyramid):
            c = self.cls_tower(p)
            r = self.reg_tower(p)
            region.append(self.feature_out(c).flatten(2).transpose(1, 2))
            deltas.append((self.delta_out(r) * self.level_scales[lvl]).flatten(2).transpose(1, 2))
            ctr.append(self.centerness_out(r).flatten(1))
        feats_out = torch.cat(region, dim=1)
        if self.normalize:
            feats_out = F.normalize(feats_out, dim=-1)
        anchors, per_level = make_anchors(h, w, self.strides, self.anchor_scale, dtype=images.dtype)
        return ImageEncoderOutput(feats_out, torch.cat(deltas, dim=1), torch.cat(ctr, dim=1),
                                  anchors.to(images.device), per_level)


class TextEncoder(nn.Module):
    """Token + position embeddings and a small transformer run over each concept alone.

    Sequences never attend to each other; the output row is the hidden state at
    the end-of-sequence position.
    """

    def __init__(self, vocab_size: int, d_model: int = 64, layers: int = 2, heads: int = 4, max_tokens: int = 48,
                 normalize: bool = False):
        super().__init__()
        self.max_tokens = max_tokens
        self.normalize = normalize
        self.d_model = d_model
        self.token_embedding = nn.Embedding(vocab_size, d_model, padding_idx=PAD_ID)
        self.position_embedding = nn.Embedding(max_tokens, d_model)
        layer = nn.TransformerEncoderLayer(d_model, heads, dim_feedforward=2 * d_model, dropout=0.0,
                                           batch_first=True, norm_first=True)
        self.encoder = nn.TransformerEncoder(layer, layers, enable_nested_tensor=False)
        self.final_norm = nn.LayerNorm(d_model)
        self.proj = nn.Linear(d_model, d_model)
        nn.init.normal_(self.token_embedding.weight, std=0.5)
        nn.init.normal_(self.position_embedding.weight, std=0.1)
        with torch.no_grad():
            self.token_embedding.weight[PAD_ID].zero_()
            # a shared EOS vector would dominate the pooled state and make all concepts alike
            self.token_embedding.weight[EOS_ID].zero_()
            # pairs with the image side's alignment-bias channel
            self.proj.weight[-1].zero_()
            self.proj.bias[-1] = 1.0

    def forward(self, ids: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        n, t = ids.shape
        if n == 0:
            return self.proj.weight.new_zeros((0, self.d_model))
        pos = torch.arange(t, device=ids.device)
        x = self.token_embedding(ids) + self.position_embedding(pos)[None]
        pad = pos[None, :] >= lengths[:, None]
        x = self.encoder(x, src_key_padding_mask=pad)
        eos = x[torch.arange(n, device=ids.device), lengths - 1]
        out = self.proj(self.final_norm(eos))
        if self.normalize:
            out = F.normalize(out, dim=-1)
        return out


def pack_tokens(seqs: Sequence[TokenSeq], device=None) -> tuple[torch.Tensor, torch.Tensor]:
    lengths = torch.tensor([len(s) for s in seqs], dtype=torch.long, device=device)
    width = int(lengths.max()) if len(seqs) else 1
    ids = torch.full((len(seqs), width), PAD_ID, dtype=torch.long, device=device)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = torch.tensor(s.ids, dtype=torch.long)
    return ids, lengths


def encode_concepts(text_encoder: TextEncoder, seqs: Sequence[TokenSeq]) -> torch.Tensor:
    """N x D concept embeddings; identical sequences are encoded once."""
    unique: dict[tuple[int, ...], int] = {}
    index = [unique.setdefault(s.ids, len(unique)) for s in seqs]
    device = next(text_encoder.parameters()).device
    if not seqs:
        return text_encoder.proj.weight.new_zeros((0, text_encoder.d_model))
    ids, lengths = pack_tokens([TokenSeq(k) for k in unique], device=device)
    rows = text_encoder(ids, lengths)
    return rows[torch.tensor(index, device=device)]


def alignment_scores(concept_embeddings: torch.Tensor, region_features: torch.Tensor) -> torch.Tensor:
    """S = F^T (F^I)^T, shape N x M (or B x N x M for batched region features)."""
    if concept_embeddings.shape[-1] != region_features.shape[-1]:
        raise ValueError(
            f"dimension mismatch: concepts have D={concept_embeddings.shape[-1]}, "
            f"regions have D={region_features.shape[-1]}")
    return concept_embeddings @ region_features.transpose(-1, -2)
