"""Pseudo labels for image-text records by cosine scoring of cropped proposals."""
from __future__ import annotations

import hashlib
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..data.records import BBox, UnifiedRecord
from ..dictionary import ConceptDictionary, extract_noun_phrases
from ..errors import PseudoLabelError, ProviderError
from .proposals import Proposal
from .scorers import RegionScorer, unit

log = logging.getLogger(__name__)

SCORE_THRESHOLD = 0.24
CROP_SIZE = 224


@dataclass(frozen=True)
class PseudoLabel:
    box: BBox
    concept: str
    score: float

    def to_json(self, image_id: str) -> dict:
        return {"image_id": image_id, "box": self.box.as_list(), "concept": self.concept, "score": self.score}


def format_prompt(category: str) -> str:
    if not category or not category.strip():
        raise ValueError("empty category")
    return f"a photo of a {category.strip()}."


def precompute_concept_embeddings(dictionary: ConceptDictionary, scorer: RegionScorer,
                                  cache_dir=None) -> dict[str, np.ndarray]:
    """Prompt embedding of every concept, optionally cached on disk.

    The cache file is keyed by the dictionary content hash and the scorer id.
    """
    if len(dictionary) == 0:
        raise PseudoLabelError("cannot precompute embeddings for an empty dictionary")
    path = None
    if cache_dir is not None:
        key = hashlib.sha256(f"{dictionary.content_hash()}|{scorer.scorer_id}".encode()).hexdigest()[:24]
        path = Path(cache_dir) / f"concepts-{key}.npz"
        if path.exists():
            with np.load(path, allow_pickle=False) as data:
                return {str(n): v for n, v in zip(data["names"], data["vectors"])}
    table = {}
    for name in dictionary.names:
        try:
            table[name] = unit(scorer.embed_text(format_prompt(name)), name)
        except ProviderError as exc:
            raise PseudoLabelError(f"text embedding failed for concept {name!r}: {exc}") from exc
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.stem + ".tmp.npz")
        np.savez(tmp, names=np.array(list(table)), vectors=np.stack(list(table.values())))
        tmp.replace(path)
    return table


def crop_and_resize(image: np.ndarray, box: BBox, size: int = CROP_SIZE) -> np.ndarray:
    """Crop ``box`` (pixel-snapped outward, clipped) and resize bilinearly to size x size."""
    h, w = image.shape[:2]
    x1, y1 = max(0, int(np.floor(box.x1))), max(0, int(np.floor(box.y1)))
    x2, y2 = min(w, int(np.ceil(box.x2))), min(h, int(np.ceil(box.y2)))
    if x2 <= x1 or y2 <= y1:
        raise PseudoLabelError(f"proposal {box.as_list()} lies outside the image")
    crop = torch.from_numpy(np.ascontiguousarray(image[y1:y2, x1:x2], dtype=np.float32)).permute(2, 0, 1)[None]
    out = F.interpolate(crop, size=(size, size), mode="bilinear", align_corners=False)
    return out[0].permute(1, 2, 0).numpy()


def candidate_concepts(dictionary: ConceptDictionary, caption: Optional[str], use_dictionary: bool) -> list[str]:
    """Whole dictionary (label completion) or the caption's noun phrases, sorted."""
    if use_dictionary:
        return list(dictionary.names)
    return sorted(extract_noun_phrases(caption or ""))


def label_image(
    image: np.ndarray,
    proposals: Sequence[Proposal],
    dictionary: ConceptDictionary,
    scorer: RegionScorer,
    score_threshold: float = SCORE_THRESHOLD,
    use_dictionary: bool = True,
    caption: Optional[str] = None,
    concept_embeddings: Optional[Mapping[str, np.ndarray]] = None,
) -> list[PseudoLabel]:
    """One label per proposal: the argmax-cosine candidate, kept when score >= threshold."""
    names = candidate_concepts(dictionary, caption, use_dictionary)
    if not names:
        log.warning("no candidate concepts (use_dictionary=%s, caption=%r); nothing labeled", use_dictionary, caption)
        return []
    cached = concept_embeddings or {}
    text = np.stack([cached[n] if n in cached else unit(scorer.embed_text(format_prompt(n)), n) for n in names])
    labels = []
    for prop in proposals:
        region = unit(scorer.embed_image_region(crop_and_resize(image, prop.box)), "region")
        sims = text @ region
        best = int(np.argmax(sims))
        score = float(sims[best])
        if score >= score_threshold:
            labels.append(PseudoLabel(prop.box, names[best], score))
    return labels


def labels_to_record(source: UnifiedRecord, labels: Iterable[PseudoLabel]) -> UnifiedRecord:
    # stays "imagetext" so box regression remains masked for pseudo boxes
    return UnifiedRecord(source.image_id, source.image, [(lab.box, lab.concept) for lab in labels], "imagetext",
                         caption=source.caption)


def group_labels(rows: Iterable[dict]) -> dict[str, list[PseudoLabel]]:
    out: dict[str, list[PseudoLabel]] = defaultdict(list)
    for row in rows:
        out[str(row["image_id"])].append(PseudoLabel(BBox.from_list(row["box"]), row["concept"], float(row["score"])))
    return dict(out)
