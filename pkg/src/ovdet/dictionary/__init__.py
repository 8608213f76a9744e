from .entries import (
    SOURCES,
    ConceptDictionary,
    ConceptEntry,
    build_dictionary,
    bundled_lexicon,
    load_dictionary,
    load_lexicon,
    lookup,
    normalize_name,
    save_dictionary,
)
from .enrichment import (
    RetrievalResult,
    enrich,
    find_definition,
    format_enriched,
    retrieve_nearest,
    sample_from_pool,
    sample_negatives,
)
from .phrases import extract_noun_phrases, iter_noun_phrases
from .providers import (
    EmbeddingProvider,
    HashingProvider,
    HttpProvider,
    TableProvider,
    embed_many,
    provider_from_spec,
)

__all__ = [
    "SOURCES",
    "ConceptDictionary",
    "ConceptEntry",
    "EmbeddingProvider",
    "HashingProvider",
    "HttpProvider",
    "RetrievalResult",
    "TableProvider",
    "build_dictionary",
    "bundled_lexicon",
    "embed_many",
    "enrich",
    "extract_noun_phrases",
    "find_definition",
    "format_enriched",
    "iter_noun_phrases",
    "load_dictionary",
    "load_lexicon",
    "lookup",
    "normalize_name",
    "provider_from_spec",
    "retrieve_nearest",
    "sample_from_pool",
    "sample_negatives",
    "save_dictionary",
]
