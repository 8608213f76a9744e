"""Paralleled concept inputs: k positives padded to N concepts with negatives."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..dictionary import ConceptDictionary, enrich as enrich_name, normalize_name, sample_from_pool
from ..dictionary.phrases import stopwords
from .records import BBox, UnifiedRecord

PAD_TEXT = ""


@dataclass(frozen=True)
class ParalleledInput:
    concepts: tuple[str, ...]  # text fed to the text encoder, length N
    names: tuple[str, ...]  # the same entries before enrichment
    positive_count: int
    concept_index_of_object: tuple[int, ...]
    object_boxes: tuple[BBox, ...]
    kind: str

    @property
    def N(self) -> int:
        return len(self.concepts)

    @property
    def negatives(self) -> tuple[str, ...]:
        return self.names[self.positive_count:]


def concept_key(name: str) -> str:
    """Name with leading determiners/number words removed, for positive/negative clashes."""
    words = normalize_name(name).split()
    stop = stopwords()
    while len(words) > 1 and words[0] in stop:
        words.pop(0)
    return " ".join(words)


def build_parallel_input(
    record: UnifiedRecord,
    dictionary: ConceptDictionary,
    N: int,
    *,
    enrich: bool = True,
    sample_negatives: bool = True,
    provider=None,
    seed: int = 0,
    negative_pool: Optional[Sequence[str]] = None,
    exclude: Sequence[str] = (),
    enricher: Optional[Callable[[str], str]] = None,
) -> ParalleledInput:
    """Build the N-entry concept list for one record.

    Positives come first in first-occurrence order. The remaining ``N - k``
    slots hold negatives drawn from ``negative_pool`` (e.g. a detection label
    space), topped up from ``dictionary`` if the pool runs short; with
    ``sample_negatives=False`` they are empty pads. Names in ``exclude`` are
    never used as negatives. ``enricher`` replaces the default dictionary
    enrichment (e.g. a memoized one).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    positives = record.concept_names[:N]
    index_of = {name: i for i, name in enumerate(positives)}
    kept = [(box, index_of[name]) for box, name in record.objects if name in index_of]
    k = len(positives)

    n_neg = N - k
    if sample_negatives:
        banned = {concept_key(p) for p in positives} | {concept_key(x) for x in exclude}
        rng = np.random.default_rng(seed)
        negatives: list[str] = []
        if negative_pool is not None:
            pool = [n for n in dict.fromkeys(normalize_name(p) for p in negative_pool) if concept_key(n) not in banned]
            negatives = sample_from_pool(pool, min(n_neg, len(pool)), rng)
            banned |= {concept_key(n) for n in negatives}
        fill = [n for n in dictionary.names if concept_key(n) not in banned]
        negatives += sample_from_pool(fill, n_neg - len(negatives), rng)
    else:
        negatives = [PAD_TEXT] * n_neg

    names = tuple(positives) + tuple(negatives)
    if enrich:
        fn = enricher or (lambda n: enrich_name(dictionary, n, provider))
        texts = tuple(fn(n) if n else PAD_TEXT for n in names)
    else:
        texts = names
    return ParalleledInput(
        concepts=texts,
        names=names,
        positive_count=k,
        concept_index_of_object=tuple(i for _, i in kept),
        object_boxes=tuple(b for b, _ in kept),
        kind=record.kind,
    )


def fingerprint(value) -> str:
    """Stable short hash of a JSON-serializable value."""
    blob = json.dumps(value, sort_keys=True, ensure_ascii=False, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]
