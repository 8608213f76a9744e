"""Training loop: mixed-kind batches, two learning-rate groups, step decay."""
from __future__ import annotations

import json
import logging
import math
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from ..data import (
    KINDS,
    BBox,
    ParalleledInput,
    Tokenizer,
    UnifiedRecord,
    build_parallel_input,
    fingerprint,
    load_records,
)
from ..data.records import read_jsonl
from ..dictionary import ConceptDictionary, enrich, load_dictionary, provider_from_spec
from ..errors import TrainingDiverged
from ..losses import LossBreakdown, total_loss
from ..model import Detector, atss_assign, decode_deltas, images_to_tensor, load_checkpoint, save_checkpoint
from ..model.encoders import alignment_scores
from ..pseudo_label import (
    candidate_concepts,
    filter_proposals,
    group_labels,
    label_image,
    labels_to_record,
    load_proposals,
    precompute_concept_embeddings,
    scorer_from_spec,
)
from .config import TrainConfig

log = logging.getLogger(__name__)


def child_seed(seed: int, name: str, *parts: int) -> int:
    """Derive an independent seed for a named random stream."""
    key = f"{seed}:{name}:" + ":".join(str(p) for p in parts)
    return zlib.crc32(key.encode("utf-8"))


@dataclass
class TrainData:
    records: list[UnifiedRecord]
    dictionary: ConceptDictionary
    label_space: list[str]
    trace: dict = field(default_factory=dict)

    @property
    def training_concepts(self) -> list[str]:
        return sorted({n for r in self.records for _, n in r.objects})


@dataclass
class TrainResult:
    checkpoint: Path
    metrics: Path
    steps: int
    history: list[dict]


def pseudo_label_records(records: Sequence[UnifiedRecord], proposals: dict, dictionary: ConceptDictionary,
                         scorer, use_dictionary: bool, obj_thresh: float, min_area: float,
                         score_thresh: float) -> tuple[list[UnifiedRecord], list[str]]:
    """Fill image-text records with pseudo labels; returns (records, candidate list fingerprint input)."""
    cache = precompute_concept_embeddings(dictionary, scorer) if use_dictionary else {}
    out = []
    candidates = []
    for rec in records:
        props = filter_proposals(proposals.get(rec.image_id, []), obj_thresh, min_area)
        labels = label_image(rec.image, props, dictionary, scorer, score_thresh, use_dictionary, rec.caption, cache)
        candidates.append(candidate_concepts(dictionary, rec.caption, use_dictionary))
        out.append(labels_to_record(rec, labels))
    return out, candidates


def load_training_data(config: TrainConfig) -> TrainData:
    if not config.dictionary:
        raise ValueError("config.dictionary is required")
    dictionary = load_dictionary(config.dictionary)
    records: list[UnifiedRecord] = []
    label_space: list[str] = []
    trace: dict = {}
    for kind in ("detection", "grounding"):
        path = getattr(config, kind)
        if path:
            recs = load_records(path, kind)[: config.max_records]
            records += recs
            if kind == "detection":
                label_space = sorted({n for r in recs for _, n in r.objects})
    if config.imagetext:
        recs = load_records(config.imagetext, "imagetext")[: config.max_records]
        if config.pseudo_labels:
            labels = group_labels(read_jsonl(config.pseudo_labels))
            recs = [labels_to_record(r, labels.get(r.image_id, [])) for r in recs]
        elif config.proposals:
            recs, candidates = pseudo_label_records(
                recs, load_proposals(config.proposals), dictionary, scorer_from_spec(config.scorer),
                config.label_completion, config.obj_thresh, config.min_area, config.score_thresh)
            trace["pseudo_label_candidates"] = fingerprint(candidates)
        else:
            log.warning("image-text records given without pseudo labels or proposals; they are skipped")
            recs = []
        records += [r for r in recs if r.objects]
    if not records:
        raise ValueError("no training records with objects")
    return TrainData(records, dictionary, label_space, trace)


class BatchBuilder:
    """Turns records into paralleled inputs and stacked tensors for one step."""

    def __init__(self, config: TrainConfig, data: TrainData, tokenizer: Tokenizer, provider):
        self.config = config
        self.data = data
        self.tokenizer = tokenizer
        self.provider = provider
        self._enriched: dict[str, str] = {}

    def enrich(self, name: str) -> str:
        text = self._enriched.get(name)
        if text is None:
            text = self._enriched[name] = enrich(self.data.dictionary, name, self.provider)
        return text

    def parallel_input(self, record: UnifiedRecord, seed: int) -> ParalleledInput:
        cfg = self.config
        pool = self.data.label_space if (record.kind == "detection" and cfg.detection_negatives == "label_space") else None
        return build_parallel_input(
            record, self.data.dictionary, cfg.N, enrich=cfg.enrich, sample_negatives=cfg.neg_sample,
            provider=self.provider, seed=seed, negative_pool=pool, exclude=cfg.holdout_concepts,
            enricher=self.enrich)


def stage_hashes(config: TrainConfig, data: TrainData, provider=None) -> dict:
    """Fingerprint of each toggleable pipeline stage, evaluated on fixed probe inputs.

    ``pseudo_label``: candidate concepts per image-text record (label completion).
    ``negatives``: concept names per annotated record (negative sampling).
    ``enrichment``: text produced for every dictionary name (enrichment).
    """
    builder = BatchBuilder(config, data, None, provider)
    annotated = [r for r in data.records if r.kind != "imagetext"]
    names = [builder.parallel_input(r, child_seed(config.seed, "negatives", 0, i)).names
             for i, r in enumerate(annotated)]
    texts = [builder.enrich(n) if config.enrich else n for n in data.dictionary.names]
    return {
        "pseudo_label": data.trace.get("pseudo_label_candidates"),
        "negatives": fingerprint(names),
        "enrichment": fingerprint(texts),
    }


def flip_record(record: UnifiedRecord) -> UnifiedRecord:
    w = record.width
    objects = [(BBox(w - b.x2, b.y1, w - b.x1, b.y2), n) for b, n in record.objects]
    return UnifiedRecord(record.image_id, np.ascontiguousarray(record.image[:, ::-1]), objects, record.kind,
                         record.caption)


def batch_loss(model: Detector, records: Sequence[UnifiedRecord], inputs: Sequence[ParalleledInput],
               config: TrainConfig) -> LossBreakdown:
    """Forward one single-kind batch and return the loss breakdown."""
    images = images_to_tensor([r.image for r in records])
    out = model.encode_images(images)
    texts = [t for pi in inputs for t in pi.concepts]
    F_T = model.encode_texts(texts).reshape(len(inputs), config.N, -1)
    S = alignment_scores(F_T, out.region_features)  # B x N x M
    Gs, masks, ctr_t, reg_t = [], [], [], []
    for pi in inputs:
        a = atss_assign(out.anchors, out.anchors_per_level, list(zip(pi.object_boxes, pi.concept_index_of_object)),
                        config.N, config.topk_atss)
        Gs.append(a.G)
        masks.append(a.positive_mask)
        ctr_t.append(a.centerness_targets)
        reg_t.append(a.reg_targets)
    pred_boxes = decode_deltas(out.anchors[None].expand_as(out.box_deltas), out.box_deltas)
    return total_loss(S, torch.stack(Gs), out.centerness_logits, torch.stack(ctr_t), torch.stack(masks),
                      pred_boxes, torch.stack(reg_t), [pi.kind for pi in inputs], config.alpha, config.beta,
                      config.gamma, config.alpha_focal)


def make_batches(records: Sequence[UnifiedRecord], batch_size: int, rng: np.random.Generator) -> list[list[int]]:
    """Single-kind batches; shuffling their order samples kinds in proportion to their sizes."""
    batches = []
    for kind in KINDS:
        idx = [i for i, r in enumerate(records) if r.kind == kind]
        idx = [idx[j] for j in rng.permutation(len(idx))]
        batches += [idx[i:i + batch_size] for i in range(0, len(idx), batch_size)]
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def build_optimizer(model: Detector, config: TrainConfig) -> torch.optim.Optimizer:
    return torch.optim.AdamW(
        [
            {"params": model.visual_parameters(), "lr": config.lr_visual, "name": "visual"},
            {"params": model.text_parameters(), "lr": config.lr_text, "name": "text"},
        ],
        weight_decay=config.weight_decay,
    )


def lr_at_epoch(base: float, epoch: int, milestones: Sequence[int]) -> float:
    return base * 0.1 ** sum(1 for m in milestones if epoch >= m)


def warmup_factor(step: int, warmup_steps: int, ratio: float) -> float:
    if step >= warmup_steps:
        return 1.0
    return ratio + (1.0 - ratio) * step / warmup_steps


def set_lr(optimizer: torch.optim.Optimizer, config: TrainConfig, epoch: int, step: int = 10 ** 9) -> None:
    """Step decay at the milestones times the warmup ramp; both groups share the factor."""
    factor = warmup_factor(step, config.warmup_steps, config.warmup_ratio)
    for group in optimizer.param_groups:
        base = config.lr_visual if group["name"] == "visual" else config.lr_text
        group["lr"] = lr_at_epoch(base, epoch, config.milestones) * factor


def build_model(config: TrainConfig, dictionary: ConceptDictionary, extra_texts: Sequence[str] = ()) -> Detector:
    texts = list(extra_texts)
    for entry in dictionary:
        texts.append(entry.name)
        if entry.definition:
            texts.append(entry.definition)
    tokenizer = Tokenizer.from_texts(texts, max_len=config.max_tokens)
    torch.manual_seed(child_seed(config.seed, "init"))
    return Detector(config.model_config(), tokenizer)


def train(config: TrainConfig, data: TrainData | None = None, progress: bool = False) -> TrainResult:
    """Train and write ``checkpoint.pt`` plus ``metrics.jsonl`` under ``config.out_dir``."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = data or load_training_data(config)
    provider = provider_from_spec(config.provider) if config.enrich else None

    start_epoch, step = 0, 0
    if config.resume:
        ckpt = load_checkpoint(config.resume)
        model = ckpt.model
        model.train()
        optimizer = build_optimizer(model, config)
        if ckpt.optimizer_state:
            optimizer.load_state_dict(ckpt.optimizer_state)
        start_epoch, step = int(ckpt.metadata["epoch"]), int(ckpt.metadata["step"])
    else:
        model = build_model(config, data.dictionary, [n for r in data.records for _, n in r.objects])
        optimizer = build_optimizer(model, config)
    model.train()
    builder = BatchBuilder(config, data, model.tokenizer, provider)

    ckpt_path = out_dir / "checkpoint.pt"
    metrics_path = out_dir / "metrics.jsonl"
    metadata = {
        "train_config": config.to_dict(),
        "dictionary_hash": data.dictionary.content_hash(),
        "training_concepts": data.training_concepts,
        "holdout_concepts": list(config.holdout_concepts),
        "stage_hashes": stage_hashes(config, data, provider),
    }
    history: list[dict] = []
    started = time.time()
    with open(metrics_path, "a", encoding="utf-8") as metrics_fh:
        for epoch in range(start_epoch, config.epochs):
            rng = np.random.default_rng(child_seed(config.seed, "shuffle", epoch))
            for batch_idx in make_batches(data.records, config.batch_size, rng):
                set_lr(optimizer, config, epoch, step)
                records = [data.records[i] for i in batch_idx]
                if config.hflip:
                    flips = rng.random(len(records)) < 0.5
                    records = [flip_record(r) if f else r for r, f in zip(records, flips)]
                inputs = [builder.parallel_input(r, child_seed(config.seed, "negatives", step, j))
                          for j, r in enumerate(records)]
                losses = batch_loss(model, records, inputs, config)
                if not math.isfinite(losses.total.item()):
                    raise TrainingDiverged(f"non-finite loss at step {step}",
                                           last_checkpoint=ckpt_path if ckpt_path.exists() else None)
                optimizer.zero_grad(set_to_none=True)
                losses.total.backward()
                if config.grad_clip:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
                optimizer.step()
                step += 1
                row = {"step": step, "epoch": epoch, **{k: v for k, v in losses.as_dict().items() if k != "num_positives"},
                       "lr_visual": optimizer.param_groups[0]["lr"], "lr_text": optimizer.param_groups[1]["lr"]}
                metrics_fh.write(json.dumps(row) + "\n")
                history.append(row)
            metrics_fh.flush()
            save_checkpoint(ckpt_path, model, {**metadata, "epoch": epoch + 1, "step": step},
                            optimizer.state_dict())
            if progress:
                recent = [h["total"] for h in history[-20:]]
                log.info("epoch %d/%d step %d loss %.4f (%.0fs)", epoch + 1, config.epochs, step,
                         sum(recent) / max(1, len(recent)), time.time() - started)
    if not ckpt_path.exists():
        save_checkpoint(ckpt_path, model, {**metadata, "epoch": config.epochs, "step": step}, optimizer.state_dict())
    return TrainResult(ckpt_path, metrics_path, step, history)
