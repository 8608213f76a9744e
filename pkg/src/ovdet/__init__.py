"""Open-vocabulary detection pre-training at desk scale.

Concept dictionary with definition enrichment, paralleled concept inputs over
detection / grounding / image-text records, dictionary-driven pseudo-labeling,
and a dual-encoder anchor detector trained with focal alignment, centerness and
GIoU losses.
"""

__version__ = "0.1.0"
