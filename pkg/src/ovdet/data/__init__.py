from .parallel import PAD_TEXT, ParalleledInput, build_parallel_input, concept_key, fingerprint
from .records import (
    KINDS,
    BBox,
    UnifiedRecord,
    clip_box,
    load_image,
    load_records,
    normalize_record,
    read_jsonl,
    record_to_raw,
    write_jsonl,
)
from .synthetic import (
    PaletteConcept,
    SyntheticDataset,
    SyntheticSpec,
    default_palette,
    generate_synthetic_dataset,
    write_synthetic_dataset,
)
from .tokenizer import EOS_ID, MAX_TOKENS, PAD_ID, TokenSeq, Tokenizer, tokenize

__all__ = [
    "EOS_ID",
    "KINDS",
    "MAX_TOKENS",
    "PAD_ID",
    "PAD_TEXT",
    "BBox",
    "PaletteConcept",
    "ParalleledInput",
    "SyntheticDataset",
    "SyntheticSpec",
    "TokenSeq",
    "Tokenizer",
    "UnifiedRecord",
    "build_parallel_input",
    "clip_box",
    "concept_key",
    "default_palette",
    "fingerprint",
    "generate_synthetic_dataset",
    "load_image",
    "load_records",
    "normalize_record",
    "read_jsonl",
    "record_to_raw",
    "tokenize",
    "write_jsonl",
    "write_synthetic_dataset",
]
