from .labeler import (
    CROP_SIZE,
    SCORE_THRESHOLD,
    PseudoLabel,
    candidate_concepts,
    crop_and_resize,
    format_prompt,
    group_labels,
    label_image,
    labels_to_record,
    precompute_concept_embeddings,
)
from .proposals import (
    MIN_AREA,
    OBJECTNESS_THRESHOLD,
    Proposal,
    filter_proposals,
    load_proposals,
    save_proposals,
    sliding_window_proposals,
)
from .scorers import HttpScorer, ModelScorer, RegionScorer, StubScorer, TableScorer, scorer_from_spec

__all__ = [
    "CROP_SIZE",
    "MIN_AREA",
    "OBJECTNESS_THRESHOLD",
    "SCORE_THRESHOLD",
    "HttpScorer",
    "ModelScorer",
    "Proposal",
    "PseudoLabel",
    "RegionScorer",
    "StubScorer",
    "TableScorer",
    "candidate_concepts",
    "crop_and_resize",
    "filter_proposals",
    "format_prompt",
    "group_labels",
    "label_image",
    "labels_to_record",
    "load_proposals",
    "precompute_concept_embeddings",
    "save_proposals",
    "scorer_from_spec",
    "sliding_window_proposals",
]
