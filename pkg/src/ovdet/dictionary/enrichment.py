"""Definition retrieval, concept enrichment and negative sampling."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ..errors import DictionaryError, InsufficientNegativesError, ProviderError
from .entries import ConceptDictionary, lookup, normalize_name
from .providers import EmbeddingProvider, embed_many

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetrievalResult:
    matched_name: str
    definition: Optional[str]
    similarity: float
    exact: bool


class NameIndex:
    """Precomputed provider embeddings of every dictionary name."""

    def __init__(self, dictionary: ConceptDictionary, provider: EmbeddingProvider):
        self.dictionary = dictionary
        self.provider = provider
        self.matrix = embed_many(provider, dictionary.names)


_INDEX_CACHE: dict[tuple[int, int], NameIndex] = {}


def _index_for(dictionary: ConceptDictionary, provider: EmbeddingProvider) -> NameIndex:
    key = (id(dictionary), id(provider))
    index = _INDEX_CACHE.get(key)
    if index is None or index.dictionary is not dictionary or index.provider is not provider:
        if len(_INDEX_CACHE) > 32:
            _INDEX_CACHE.clear()
        index = _INDEX_CACHE[key] = NameIndex(dictionary, provider)
    return index


def retrieve_nearest(dictionary: ConceptDictionary, name: str, provider: EmbeddingProvider) -> RetrievalResult:
    """Exact dictionary hit, else the name with the largest embedding dot product.

    Ties go to the lexicographically smallest name.
    """
    if len(dictionary) == 0:
        raise DictionaryError("empty dictionary")
    entry = lookup(dictionary, name)
    if entry is not None:
        return RetrievalResult(entry.name, entry.definition, 1.0, True)
    index = _index_for(dictionary, provider)
    query = provider.embed(normalize_name(name))
    sims = index.matrix @ query
    # names are sorted, so argmax's first-occurrence rule is the tie-break
    best = int(np.argmax(sims))
    matched = dictionary.names[best]
    return RetrievalResult(matched, dictionary.get(matched).definition, float(sims[best]), False)


def format_enriched(name: str, definition: Optional[str]) -> str:
    name = name.strip()
    if definition:
        text = definition.strip().rstrip(".").strip()
        if text:
            return f"{name}, {text[0].lower()}{text[1:]}."
    return f"{name.rstrip('.')}."


def find_definition(dictionary: ConceptDictionary, name: str, provider: EmbeddingProvider | None) -> Optional[str]:
    entry = lookup(dictionary, name)
    if entry is not None and entry.definition:
        return entry.definition
    if entry is None and provider is not None and len(dictionary):
        try:
            return retrieve_nearest(dictionary, name, provider).definition
        except ProviderError as exc:
            log.warning("retrieval failed for %r, using bare name: %s", name, exc)
    return None


def enrich(dictionary: ConceptDictionary, name: str, provider: EmbeddingProvider | None = None) -> str:
    """``"{name}, {definition}."``, or ``"{name}."`` when no definition is reachable."""
    if not name or not name.strip():
        raise ValueError("cannot enrich an empty concept name")
    return format_enriched(name, find_definition(dictionary, name, provider))


def sample_from_pool(pool: Sequence[str], k: int, rng: np.random.Generator) -> list[str]:
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > len(pool):
        raise InsufficientNegativesError(f"insufficient negatives: need {k}, pool has {len(pool)}")
    if k == 0:
        return []
    picks = rng.choice(len(pool), size=k, replace=False)
    return [pool[i] for i in picks]


def sample_negatives(dictionary: ConceptDictionary, positives: Iterable[str], k: int, seed: int) -> list[str]:
    """``k`` distinct dictionary names not in ``positives``, uniform without replacement."""
    taken = {normalize_name(p) for p in positives}
    pool = [n for n in dictionary.names if n not in taken]
    return sample_from_pool(pool, k, np.random.default_rng(seed))
