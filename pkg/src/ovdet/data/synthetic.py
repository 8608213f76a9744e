"""Synthetic colored-shape detection data with exact boxes.

Training images only show palette concepts that are not held out; the eval
split mixes every palette concept so held-out names can be scored zero-shot.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from matplotlib.path import Path as MplPath

from ..dictionary import ConceptDictionary, ConceptEntry
from .records import KINDS, BBox, UnifiedRecord, record_to_raw, write_jsonl

log = logging.getLogger(__name__)

COLORS = {
    "red": (0.90, 0.15, 0.12),
    "green": (0.15, 0.80, 0.20),
    "blue": (0.18, 0.30, 0.95),
    "yellow": (0.95, 0.88, 0.15),
    "purple": (0.65, 0.20, 0.85),
    "white": (0.95, 0.95, 0.95),
}

SHAPE_DEFINITIONS = {
    "circle": "a round flat disk",
    "square": "a flat shape with four equal straight sides and four right angles",
    "triangle": "a flat shape with three straight sides and three corners",
    "ring": "a round band with an empty hole in the middle",
    "cross": "a shape made of two bars crossing at right angles",
    "star": "a shape with five pointed arms around a center",
}

DEFAULT_DISTRACTORS = {
    "pagoda": "An Asian temple; usually a pyramidal tower with an upward curving roof.",
    "salmon": "Any of various large food and game fishes of northern waters.",
    "brewery": "A plant where beer is brewed by fermentation.",
    "pottery": "Ceramic ware made from clay and baked in a kiln.",
    "fresco": "A mural done with watercolors on wet plaster.",
    "shrub": "A low woody perennial plant usually having several major stems.",
    "taro": "Edible starchy tuberous root of taro plants.",
    "cathedral": "Any large and important church.",
    "library": "A room where books are kept.",
    "footbridge": "A bridge designed for pedestrians.",
    "courtyard": "An area wholly or partly surrounded by walls or buildings.",
    "insect": "Small air-breathing arthropod.",
    "office": "Place of business where professional or clerical duties are performed.",
    "basin": "A bowl-shaped vessel; usually used for holding food or liquids.",
    "pod": "The vessel that contains the seeds of a plant (not the seeds themselves).",
    "wildflower": "Wild or uncultivated flowering plant.",
    "purple star": "a shape with five pointed arms around a center colored purple",
    "white cross": "a shape made of two bars crossing at right angles colored white",
    "yellow star": "a shape with five pointed arms around a center colored yellow",
    "purple cross": "a shape made of two bars crossing at right angles colored purple",
}


@dataclass(frozen=True)
class PaletteConcept:
    name: str
    definition: str
    shape: str
    color: str


def default_palette() -> list[PaletteConcept]:
    out = []
    for shape in ("circle", "square", "triangle", "ring"):
        for color in ("red", "green", "blue"):
            out.append(PaletteConcept(f"{color} {shape}", f"{SHAPE_DEFINITIONS[shape]} colored {color}", shape, color))
    return out


DEFAULT_HOLDOUT = ("green circle", "blue square", "red triangle", "green ring")


@dataclass
class SyntheticSpec:
    num_images: int = 500
    image_size: int = 128
    seed: int = 0
    palette: list[PaletteConcept] = field(default_factory=default_palette)
    holdout: tuple[str, ...] = DEFAULT_HOLDOUT
    kind_ratios: dict = field(default_factory=lambda: {"detection": 0.6, "grounding": 0.25, "imagetext": 0.15})
    eval_images: int = 0
    min_size: int = 32
    max_size: int = 56
    max_objects: int = 4
    distractors: dict = field(default_factory=lambda: dict(DEFAULT_DISTRACTORS))

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticSpec":
        obj = dict(obj)
        if "palette" in obj:
            obj["palette"] = [PaletteConcept(**p) for p in obj["palette"]]
        if "holdout" in obj:
            obj["holdout"] = tuple(obj["holdout"])
        return cls(**obj)

    def to_json(self) -> dict:
        out = asdict(self)
        out["holdout"] = list(self.holdout)
        return out

    @property
    def training_concepts(self) -> list[PaletteConcept]:
        held = set(self.holdout)
        return [p for p in self.palette if p.name not in held]


@dataclass
class SyntheticDataset:
    records: list[UnifiedRecord]
    dictionary: ConceptDictionary
    eval_records: list[UnifiedRecord]
    spec: SyntheticSpec

    def by_kind(self, kind: str) -> list[UnifiedRecord]:
        return [r for r in self.records if r.kind == kind]


def shape_mask(shape: str, size: int, canvas: int, cx: float, cy: float) -> np.ndarray:
    yy, xx = np.mgrid[0:canvas, 0:canvas]
    px, py = xx + 0.5 - cx, yy + 0.5 - cy
    r = size / 2.0
    if shape == "circle":
        return px**2 + py**2 <= r**2
    if shape == "square":
        return (np.abs(px) <= r) & (np.abs(py) <= r)
    if shape == "ring":
        d2 = px**2 + py**2
        return (d2 <= r**2) & (d2 >= (0.55 * r) ** 2)
    if shape == "cross":
        arm = r / 3.0
        return ((np.abs(px) <= arm) & (np.abs(py) <= r)) | ((np.abs(py) <= arm) & (np.abs(px) <= r))
    if shape == "triangle":
        verts = [(0.0, -r), (r, r), (-r, r)]
    elif shape == "star":
        angles = -np.pi / 2 + np.arange(10) * np.pi / 5
        radii = np.where(np.arange(10) % 2 == 0, r, 0.45 * r)
        verts = list(zip(radii * np.cos(angles), radii * np.sin(angles)))
    else:
        raise ValueError(f"unknown shape {shape!r}")
    pts = np.stack([px.ravel(), py.ravel()], axis=1)
    return MplPath(verts).contains_points(pts).reshape(canvas, canvas)


def mask_box(mask: np.ndarray) -> Optional[BBox]:
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        return None
    return BBox(float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1))


def _overlaps(a: BBox, b: BBox, margin: float = 2.0) -> bool:
    return not (a.x2 + margin <= b.x1 or b.x2 + margin <= a.x1 or a.y2 + margin <= b.y1 or b.y2 + margin <= a.y1)


def render_image(rng: np.random.Generator, concepts: list[PaletteConcept], spec: SyntheticSpec, max_tries: int = 60):
    size = spec.image_size
    image = rng.uniform(0.0, 0.12, size=(size, size, 3))
    objects: list[tuple[BBox, str]] = []
    n_wanted = int(rng.integers(1, spec.max_objects + 1))
    for _ in range(n_wanted):
        concept = concepts[int(rng.integers(len(concepts)))]
        for _ in range(max_tries):
            s = int(rng.integers(spec.min_size, spec.max_size + 1))
            cx = rng.uniform(s / 2 + 1, size - s / 2 - 1)
            cy = rng.uniform(s / 2 + 1, size - s / 2 - 1)
            mask = shape_mask(concept.shape, s, size, cx, cy)
            box = mask_box(mask)
            if box is None or any(_overlaps(box, other) for other, _ in objects):
                continue
            base = np.asarray(COLORS[concept.color])
            color = np.clip(base + rng.uniform(-0.08, 0.08, size=3), 0.0, 1.0)
            image[mask] = color
            objects.append((box, concept.name))
            break
        else:
            log.info("placement failed after %d tries; image keeps %d object(s)", max_tries, len(objects))
    return image.astype(np.float32), objects


def _caption(names: list[str]) -> str:
    phrases = [f"a {n}" for n in names]
    if len(phrases) == 1:
        return f"a picture of {phrases[0]}"
    return "a picture of " + ", ".join(phrases[:-1]) + " and " + phrases[-1]


def _kind_sequence(n: int, ratios: dict, rng: np.random.Generator) -> list[str]:
    total = sum(ratios.get(k, 0.0) for k in KINDS)
    counts = [int(round(n * ratios.get(k, 0.0) / total)) for k in KINDS]
    counts[0] += n - sum(counts)
    kinds = [k for k, c in zip(KINDS, counts) for _ in range(c)]
    order = rng.permutation(len(kinds))
    return [kinds[i] for i in order]


def generate_synthetic_dataset(spec: SyntheticSpec) -> SyntheticDataset:
    """Records (train split), companion dictionary and eval split, deterministic per seed."""
    if not spec.palette:
        raise ValueError("palette must be nonempty")
    unknown = set(spec.holdout) - {p.name for p in spec.palette}
    if unknown:
        raise ValueError(f"held-out names not in palette: {sorted(unknown)}")
    train_concepts = spec.training_concepts
    if spec.num_images and not train_concepts:
        raise ValueError("every palette concept is held out")

    rng = np.random.default_rng(spec.seed)
    kinds = _kind_sequence(spec.num_images, spec.kind_ratios, rng)
    records = []
    for i, kind in enumerate(kinds):
        image, objects = render_image(rng, train_concepts, spec)
        names = [n for _, n in objects]
        if kind == "detection":
            rec = UnifiedRecord(f"train_{i:05d}", image, objects, "detection")
        elif kind == "grounding":
            rec = UnifiedRecord(f"train_{i:05d}", image, [(b, f"a {n}") for b, n in objects], "grounding", _caption(names))
        else:
            # captions of image-text pairs are partial: a random nonempty subset
            keep = sorted(rng.choice(len(names), size=int(rng.integers(1, len(names) + 1)), replace=False))
            rec = UnifiedRecord(f"train_{i:05d}", image, [], "imagetext", _caption([names[j] for j in keep]))
        records.append(rec)

    eval_records = []
    for i in range(spec.eval_images):
        image, objects = render_image(rng, list(spec.palette), spec)
        eval_records.append(UnifiedRecord(f"eval_{i:05d}", image, objects, "detection"))

    counts: dict[str, int] = {}
    for rec in records:
        for _, name in rec.objects:
            counts[name] = counts.get(name, 0) + 1
    held = set(spec.holdout)
    entries = [
        ConceptEntry(p.name, p.definition, "things" if p.name in held else "detection", counts.get(p.name, 0))
        for p in spec.palette
    ]
    palette_names = {p.name for p in spec.palette}
    entries += [ConceptEntry(n, d, "things", 0) for n, d in spec.distractors.items() if n not in palette_names]
    return SyntheticDataset(records, ConceptDictionary(entries), eval_records, spec)


def scorer_table_rows(spec: SyntheticSpec, names, dim: int = 32) -> list[dict]:
    """Fixture region-scorer table: a random text vector per concept plus one
    region prototype per palette concept sharing its concept's vector."""
    from ..pseudo_label.labeler import crop_and_resize
    from ..pseudo_label.scorers import region_descriptor

    rng = np.random.default_rng(spec.seed + 7)
    vectors = {n: rng.normal(size=dim) for n in sorted(set(names) | {p.name for p in spec.palette})}
    rows = [{"name": n, "vector": np.round(v, 6).tolist()} for n, v in vectors.items()]
    canvas, size = 64, 40
    for p in spec.palette:
        mask = shape_mask(p.shape, size, canvas, canvas / 2, canvas / 2)
        image = np.zeros((canvas, canvas, 3))
        image[mask] = COLORS[p.color]
        desc = region_descriptor(crop_and_resize(image, mask_box(mask)))
        rows.append({"descriptor": np.round(desc, 6).tolist(), "vector": np.round(vectors[p.name], 6).tolist(), "concept": p.name})
    return rows


def write_synthetic_dataset(dataset: SyntheticDataset, out_dir) -> dict:
    """Write NPY images, per-kind record files, a manifest, build-dict inputs,
    stub proposals for image-text images and a fixture scorer table."""
    from ..dictionary import save_dictionary
    from ..pseudo_label.proposals import save_proposals, sliding_window_proposals

    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    manifest = []
    per_kind: dict[str, list[dict]] = {k: [] for k in KINDS}
    for split, recs in (("train", dataset.records), ("eval", dataset.eval_records)):
        rows = []
        for rec in recs:
            rel = f"images/{rec.image_id}.npy"
            np.save(out / rel, np.round(rec.image * 255.0).astype(np.uint8))
            raw = record_to_raw(rec, rel)
            (per_kind[rec.kind] if split == "train" else rows).append(raw)
            manifest.append({"split": split, "kind": rec.kind, **raw})
        if split == "eval":
            write_jsonl(out / "eval.jsonl", rows)
    for kind, rows in per_kind.items():
        write_jsonl(out / f"{kind}.jsonl", rows)
    write_jsonl(out / "manifest.jsonl", manifest)
    write_jsonl(out / "captions.jsonl", [{"image_id": r["image_id"], "caption": r["caption"]} for r in per_kind["imagetext"]])

    spec = dataset.spec
    held = set(spec.holdout)
    (out / "detection_names.txt").write_text("".join(p.name + "\n" for p in spec.training_concepts), encoding="utf-8")
    (out / "things_names.txt").write_text(
        "".join(n + "\n" for n in sorted(held | set(spec.distractors))), encoding="utf-8"
    )
    lexicon = {p.name: p.definition for p in spec.palette} | dict(spec.distractors)
    write_jsonl(out / "lexicon.jsonl", [{"name": k, "definition": lexicon[k]} for k in sorted(lexicon)])
    save_dictionary(dataset.dictionary, out / "dictionary.jsonl")
    save_proposals(out / "proposals.jsonl",
                   {r.image_id: sliding_window_proposals(r.image) for r in dataset.by_kind("imagetext")})
    write_jsonl(out / "scorer_table.jsonl", scorer_table_rows(spec, dataset.dictionary.names))
    meta = {
        "spec": spec.to_json(),
        "training_concepts": [p.name for p in spec.training_concepts],
        "holdout_concepts": list(spec.holdout),
        "counts": {k: len(v) for k, v in per_kind.items()} | {"eval": len(dataset.eval_records)},
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return meta
