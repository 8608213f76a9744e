"""Zero-shot style evaluation: class-wise AP@0.5 with 11-point interpolation."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import torch

from ..data import BBox, ParalleledInput, UnifiedRecord, concept_key
from ..dictionary import ConceptDictionary, enrich as enrich_name, lookup
from ..model import Detection, Detector, decode_predictions, images_to_tensor, load_checkpoint
from ..model.encoders import alignment_scores

log = logging.getLogger(__name__)


@dataclass
class EvalReport:
    per_concept_ap: dict
    mean_ap: float
    seen_mean_ap: Optional[float]
    unseen_mean_ap: Optional[float]
    seen_concepts: list
    unseen_concepts: list
    detection_counts: dict
    gt_counts: dict
    config: dict = field(default_factory=dict)
    baseline: Optional[dict] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def box_iou(a: BBox, b: BBox) -> float:
    iw = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    ih = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def eleven_point_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    peaks = []
    for j in range(11):
        above = precision[recall >= j / 10]  # j / 10 is exact where linspace gives 0.6000000000000001
        peaks.append(float(above.max()) if above.size else 0.0)
    return sum(peaks) / 11.0  # one division keeps a perfect curve at exactly 1.0


def average_precision(detections: Sequence[tuple[str, Detection]], ground_truth: dict[str, list[BBox]],
                      iou_threshold: float = 0.5) -> Optional[float]:
    """AP of one concept. ``detections`` are (image_id, det); ground truth maps image_id -> boxes.

    Returns None when the concept has no ground truth.
    """
    n_gt = sum(len(v) for v in ground_truth.values())
    if n_gt == 0:
        return None
    if not detections:
        return 0.0
    order = sorted(range(len(detections)), key=lambda i: -detections[i][1].score)
    used = {k: [False] * len(v) for k, v in ground_truth.items()}
    tp = np.zeros(len(order))
    for rank, i in enumerate(order):
        image_id, det = detections[i]
        gts = ground_truth.get(image_id, [])
        best, best_j = iou_threshold, -1
        for j, g in enumerate(gts):
            if used[image_id][j]:
                continue
            iou = box_iou(det.box, g)
            if iou >= best:
                best, best_j = iou, j
        if best_j >= 0:
            used[image_id][best_j] = True
            tp[rank] = 1.0
    cum_tp = np.cumsum(tp)
    recall = cum_tp / n_gt
    precision = cum_tp / np.arange(1, len(order) + 1)
    return eleven_point_ap(recall, precision)


def concept_list_input(concepts: Sequence[str], dictionary: ConceptDictionary | None, enrich: bool,
                       provider=None) -> ParalleledInput:
    """Inference-time input: every listed concept, enriched or bare, no negatives."""
    texts = []
    for name in concepts:
        if enrich and dictionary is not None:
            if lookup(dictionary, name) is None and provider is None:
                log.info("concept %r not in dictionary; using the bare name", name)
            texts.append(enrich_name(dictionary, name, provider))
        else:
            texts.append(name)
    return ParalleledInput(tuple(texts), tuple(concepts), len(concepts), (), (), "detection")


@torch.no_grad()
def predict(model: Detector, records: Sequence[UnifiedRecord], texts: Sequence[str], concept_names: Sequence[str],
            score_thresh: float = 0.05, nms_iou: float = 0.5, batch_size: int = 16) -> list[list[Detection]]:
    model.eval()
    F_T = model.encode_texts(list(texts))
    results = []
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        out = model.encode_images(images_to_tensor([r.image for r in chunk]))
        S = alignment_scores(F_T, out.region_features)
        for b, rec in enumerate(chunk):
            results.append(decode_predictions(S[b], out.box_deltas[b], out.anchors, out.centerness_logits[b],
                                              concept_names, score_thresh, nms_iou, (rec.height, rec.width)))
    return results


def score_detections(records: Sequence[UnifiedRecord], predictions: Sequence[Sequence[Detection]],
                     concepts: Sequence[str], iou_threshold: float = 0.5):
    per_ap, det_counts, gt_counts = {}, {}, {}
    for name in concepts:
        gt = {r.image_id: [b for b, n in r.objects if n == name] for r in records}
        dets = [(r.image_id, d) for r, preds in zip(records, predictions) for d in preds if d.concept == name]
        per_ap[name] = average_precision(dets, gt, iou_threshold)
        det_counts[name] = len(dets)
        gt_counts[name] = sum(len(v) for v in gt.values())
    return per_ap, det_counts, gt_counts


def _mean(values) -> Optional[float]:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def random_box_predictions(records: Sequence[UnifiedRecord], concepts: Sequence[str], per_image: int = 100,
                           seed: int = 0) -> list[list[Detection]]:
    """Uniform random boxes with random concepts and scores: the chance-level baseline."""
    rng = np.random.default_rng(seed)
    out = []
    for rec in records:
        dets = []
        for _ in range(per_image):
            x = np.sort(rng.uniform(0, rec.width, 2))
            y = np.sort(rng.uniform(0, rec.height, 2))
            if x[1] - x[0] < 1e-6 or y[1] - y[0] < 1e-6:
                continue
            dets.append(Detection(BBox(x[0], y[0], x[1], y[1]), concepts[int(rng.integers(len(concepts)))],
                                  float(rng.random())))
        out.append(dets)
    return out


def evaluate(
    checkpoint,
    records: Sequence[UnifiedRecord],
    concept_list: Sequence[str],
    enrich: bool = True,
    dictionary: ConceptDictionary | None = None,
    provider=None,
    seen_concepts: Sequence[str] | None = None,
    score_thresh: float = 0.05,
    nms_iou: float = 0.5,
    with_baseline: bool = True,
    baseline_seed: int = 0,
) -> EvalReport:
    """Detect every concept in ``concept_list`` on ``records`` and score AP@0.5 per concept.

    ``checkpoint`` is a path or a loaded Detector. Seen concepts default to the
    checkpoint's recorded training concepts; the rest count as unseen.
    """
    if not concept_list:
        raise ValueError("concept_list must be nonempty")
    meta = {}
    if isinstance(checkpoint, Detector):
        model = checkpoint
    else:
        ckpt = load_checkpoint(checkpoint)
        model, meta = ckpt.model, ckpt.metadata
    if seen_concepts is None:
        seen_concepts = meta.get("training_concepts", [])
    seen_keys = {concept_key(n) for n in seen_concepts}
    seen = [c for c in concept_list if concept_key(c) in seen_keys]
    unseen = [c for c in concept_list if concept_key(c) not in seen_keys]

    pin = concept_list_input(concept_list, dictionary, enrich, provider)
    preds = predict(model, records, pin.concepts, list(concept_list), score_thresh, nms_iou)
    per_ap, det_counts, gt_counts = score_detections(records, preds, concept_list)
    baseline = None
    if with_baseline:
        b_ap, _, _ = score_detections(records, random_box_predictions(records, list(concept_list), seed=baseline_seed),
                                      concept_list)
        baseline = {"per_concept_ap": b_ap, "mean_ap": _mean(b_ap.values()),
                    "seen_mean_ap": _mean(b_ap[c] for c in seen), "unseen_mean_ap": _mean(b_ap[c] for c in unseen)}
    return EvalReport(
        per_concept_ap=per_ap,
        mean_ap=_mean(per_ap.values()) or 0.0,
        seen_mean_ap=_mean(per_ap[c] for c in seen),
        unseen_mean_ap=_mean(per_ap[c] for c in unseen),
        seen_concepts=seen,
        unseen_concepts=unseen,
        detection_counts=det_counts,
        gt_counts=gt_counts,
        config={"enrich": enrich, "score_thresh": score_thresh, "nms_iou": nms_iou,
                "concept_texts": list(pin.concepts), "checkpoint_step": meta.get("step")},
        baseline=baseline,
    )


def plot_precision_recall(records, predictions, concepts, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    for name in concepts:
        gt = {r.image_id: [b for b, n in r.objects if n == name] for r in records}
        n_gt = sum(len(v) for v in gt.values())
        dets = sorted(((r.image_id, d) for r, ps in zip(records, predictions) for d in ps if d.concept == name),
                      key=lambda x: -x[1].score)
        if not n_gt or not dets:
            continue
        used = {k: [False] * len(v) for k, v in gt.items()}
        tp = []
        for image_id, d in dets:
            hit = next((j for j, g in enumerate(gt[image_id]) if not used[image_id][j] and box_iou(d.box, g) >= 0.5), -1)
            if hit >= 0:
                used[image_id][hit] = True
            tp.append(hit >= 0)
        cum = np.cumsum(tp)
        ax.plot(cum / n_gt, cum / np.arange(1, len(tp) + 1), label=name)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
