"""Unified records over detection, grounding and image-text data."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

KINDS = ("detection", "grounding", "imagetext")

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite box {coords}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box {coords}")

    @classmethod
    def from_list(cls, xs) -> "BBox":
        x1, y1, x2, y2 = (float(v) for v in xs)
        return cls(x1, y1, x2, y2)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height


def clip_box(coords, width: float, height: float) -> Optional[BBox]:
    """Clip to the image; None when nothing of positive area remains."""
    x1, y1, x2, y2 = (float(v) for v in coords)
    x1, x2 = min(max(x1, 0.0), width), min(max(x2, 0.0), width)
    y1, y2 = min(max(y1, 0.0), height), min(max(y2, 0.0), height)
    if not (x1 < x2 and y1 < y2):
        return None
    return BBox(x1, y1, x2, y2)


@dataclass
class UnifiedRecord:
    image_id: str
    image: np.ndarray  # H x W x C, float32 in [0, 1]
    objects: list[tuple[BBox, str]] = field(default_factory=list)
    kind: str = "detection"
    caption: Optional[str] = None
    dropped_boxes: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown record kind {self.kind!r}")
        for _, name in self.objects:
            if not name or not name.strip():
                raise ValueError(f"empty concept name in record {self.image_id}")

    @property
    def height(self) -> int:
        return int(self.image.shape[0])

    @property
    def width(self) -> int:
        return int(self.image.shape[1])

    @property
    def concept_names(self) -> list[str]:
        return list(dict.fromkeys(name for _, name in self.objects))


def load_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".npy":
        arr = np.load(path)
    else:
        from PIL import Image

        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    return to_float_image(arr)


def to_float_image(arr) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.dtype == np.uint8:
        return arr.astype(np.float32) / 255.0
    return np.clip(arr.astype(np.float32), 0.0, 1.0)


def normalize_record(raw: dict, kind: str, image: np.ndarray | None = None, root=None) -> UnifiedRecord:
    """Turn a source-specific raw record into a UnifiedRecord.

    ``image`` overrides ``raw["image_path"]`` (resolved against ``root``).
    Boxes are clipped to the image; boxes that collapse are dropped and counted.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown record kind {kind!r}")
    if image is None:
        path = Path(raw["image_path"])
        if root is not None and not path.is_absolute():
            path = Path(root) / path
        image = load_image(path)
    else:
        image = to_float_image(image)
    h, w = image.shape[:2]

    if kind == "detection":
        pairs = list(zip(raw.get("boxes", []), raw.get("classes", [])))
        if len(raw.get("boxes", [])) != len(raw.get("classes", [])):
            raise ValueError(f"record {raw.get('image_id')}: boxes and classes differ in length")
    elif kind == "grounding":
        # the caption is kept for reference only; phrases become the concepts
        pairs = [(pb["box"], pb["phrase"]) for pb in raw.get("phrase_boxes", [])]
    else:
        pairs = []

    objects, dropped = [], 0
    for coords, name in pairs:
        box = clip_box(coords, w, h)
        if box is None:
            dropped += 1
            continue
        objects.append((box, " ".join(str(name).lower().split())))
    if dropped:
        log.warning("record %s: dropped %d degenerate box(es) after clipping", raw.get("image_id"), dropped)
    return UnifiedRecord(
        image_id=str(raw["image_id"]),
        image=image,
        objects=objects,
        kind=kind,
        caption=raw.get("caption"),
        dropped_boxes=dropped,
    )


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_jsonl(path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_records(path, kind: str) -> list[UnifiedRecord]:
    """Load a record file; relative image paths resolve against its directory."""
    root = Path(path).parent
    return [normalize_record(raw, kind, root=root) for raw in read_jsonl(path)]


def record_to_raw(record: UnifiedRecord, image_path: str) -> dict:
    if record.kind == "detection":
        return {
            "image_id": record.image_id,
            "image_path": image_path,
            "boxes": [b.as_list() for b, _ in record.objects],
            "classes": [n for _, n in record.objects],
        }
    if record.kind == "grounding":
        return {
            "image_id": record.image_id,
            "image_path": image_path,
            "caption": record.caption or " ".join(n for _, n in record.objects),
            "phrase_boxes": [{"phrase": n, "box": b.as_list()} for b, n in record.objects],
        }
    return {"image_id": record.image_id, "image_path": image_path, "caption": record.caption or ""}
